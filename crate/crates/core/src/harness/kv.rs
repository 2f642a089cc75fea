use std::str::FromStr;

use super::{HarnessError, Result};

/// Flat `key = value` text: one pair per line, `#` starts a comment, blank
/// lines ignored. Keys may repeat; single-valued lookups reject repeats.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues {
    entries: Vec<(usize, String, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| HarnessError::Syntax {
                line,
                message: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(HarnessError::Syntax { line, message: format!("invalid key {key:?}") });
            }
            entries.push((line, key.to_string(), value.trim().to_string()));
        }
        Ok(KeyValues { entries })
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for (line, key, _) in &self.entries {
            if !allowed.contains(&key.as_str()) {
                return Err(HarnessError::Syntax { line: *line, message: format!("unknown key `{key}`") });
            }
        }
        Ok(())
    }

    pub fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries.iter().filter(move |(_, k, _)| k == key).map(|(_, _, v)| v.as_str())
    }

    pub fn get(&self, key: &str) -> Result<Option<&str>> {
        let mut found = self.entries.iter().filter(|(_, k, _)| k == key);
        let first = found.next();
        if let Some((line, _, _)) = found.next() {
            return Err(HarnessError::Syntax { line: *line, message: format!("duplicate key `{key}`") });
        }
        Ok(first.map(|(_, _, v)| v.as_str()))
    }

    pub fn require(&self, key: &'static str) -> Result<&str> {
        self.get(key)?.ok_or(HarnessError::MissingKey(key))
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)?
            .map(|v| parse_value(key, v))
            .transpose()
    }

    pub fn parsed_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }
}

pub(crate) fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| HarnessError::bad_value(key, format!("cannot parse {value:?}")))
}

/// Splits a comma-separated list, trimming items and dropping empties.
pub(crate) fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}
