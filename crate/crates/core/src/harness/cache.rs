//! On-disk Q-table cache keyed by (map hash, reward index, gamma).

use std::path::{Path, PathBuf};

use super::{HarnessError, Result};
use crate::mdp::Mdp;
use crate::solver::{train_all, value_iteration, QTable, SolverConfig};

/// Overrides the cache directory.
pub const CACHE_ENV: &str = "DECEPTIVE_MDP_CACHE";

const DEFAULT_DIR: &str = ".deceptive-mdp-cache";

pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV).map_or_else(|| PathBuf::from(DEFAULT_DIR), PathBuf::from)
}

pub fn cache_file_name(map_hash: &str, reward_index: usize, gamma: f64) -> String {
    format!("{}-r{reward_index}-g{gamma}.qtable", &map_hash[..16.min(map_hash.len())])
}

/// Trains every table and writes them under `dir`; returns the written paths.
pub fn train_to_cache(mdp: &Mdp, cfg: &SolverConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let tables = train_all(mdp, cfg)?;
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let hash = mdp.map().content_hash();
    let mut paths = Vec::with_capacity(tables.len());
    for q in &tables {
        let path = dir.join(cache_file_name(&hash, q.reward_index(), mdp.gamma()));
        let tmp = path.with_extension("qtable.tmp");
        std::fs::write(&tmp, q.to_cache_string(&hash, cfg.tolerance)).map_err(|e| HarnessError::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| HarnessError::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Loads each table from `dir` when a matching file exists, otherwise trains
/// it in memory. A cached file that fails verification is reported on stderr
/// and ignored.
pub fn load_or_train(mdp: &Mdp, cfg: &SolverConfig, dir: Option<&Path>) -> Result<Vec<QTable>> {
    let hash = mdp.map().content_hash();
    let mut tables = Vec::with_capacity(mdp.rewards().len());
    for index in 0..mdp.rewards().len() {
        let cached = dir
            .map(|d| d.join(cache_file_name(&hash, index, mdp.gamma())))
            .filter(|p| p.is_file())
            .and_then(|p| {
                let text = std::fs::read_to_string(&p).ok()?;
                match QTable::from_cache_str(&text, mdp) {
                    Ok(q) if q.reward_index() == index => Some(q),
                    Ok(_) => {
                        eprintln!("warning: ignoring {}: wrong reward index", p.display());
                        None
                    }
                    Err(e) => {
                        eprintln!("warning: ignoring {}: {e}", p.display());
                        None
                    }
                }
            });
        tables.push(match cached {
            Some(q) => q,
            None => value_iteration(mdp, index, cfg)?,
        });
    }
    Ok(tables)
}
