//! Trace CSV: optional `# true_goal=<d>` line, then `step,x,y,action[,p_0,...]`.

use std::fmt::Write as _;

use super::{HarnessError, Result};
use crate::mdp::{Action, Cell, GridMap, ObservationSequence};
use crate::observer::PosteriorSnapshot;

/// A parsed trace file, not yet checked against a map.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub true_goal: Option<usize>,
    pub pairs: Vec<(Cell, Action)>,
    /// Observer probabilities per step, when the file carries `p_<i>` columns.
    pub probabilities: Option<Vec<Vec<f64>>>,
}

impl TraceFile {
    /// Validates the pairs against `map`.
    pub fn observations(&self, map: &GridMap) -> Result<ObservationSequence> {
        Ok(ObservationSequence::from_pairs(map, self.pairs.iter().copied())?)
    }

    /// Snapshots rebuilt from the stored probabilities (divergences are not stored).
    pub fn snapshots(&self) -> Vec<PosteriorSnapshot> {
        self.probabilities
            .iter()
            .flatten()
            .enumerate()
            .map(|(j, p)| PosteriorSnapshot { step_index: j + 1, probabilities: p.clone(), divergences: Vec::new() })
            .collect()
    }
}

pub fn write_trace(obs: &ObservationSequence, snapshots: &[PosteriorSnapshot], true_goal: Option<usize>) -> String {
    let mut out = String::new();
    if let Some(g) = true_goal {
        let _ = writeln!(out, "# true_goal={g}");
    }
    out.push_str("step,x,y,action");
    let goals = snapshots.first().map_or(0, |s| s.probabilities.len());
    for i in 0..goals {
        let _ = write!(out, ",p_{i}");
    }
    out.push('\n');
    for (j, &(s, a)) in obs.pairs().iter().enumerate() {
        let _ = write!(out, "{},{},{},{}", j + 1, s.x, s.y, a);
        if let Some(snap) = snapshots.get(j) {
            for p in &snap.probabilities {
                let _ = write!(out, ",{p}");
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_trace(text: &str) -> Result<TraceFile> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let mut true_goal = None;
    let header = loop {
        let Some((line, l)) = lines.next() else {
            return Err(HarnessError::Syntax { line: 0, message: "missing trace header".into() });
        };
        if let Some(meta) = l.strip_prefix('#') {
            if let Some(v) = meta.trim().strip_prefix("true_goal=") {
                let g: usize = v.trim().parse().map_err(|_| HarnessError::Syntax {
                    line,
                    message: "bad true_goal".into(),
                })?;
                if g > 9 {
                    return Err(HarnessError::Syntax { line, message: "true_goal must be a digit".into() });
                }
                true_goal = Some(g);
            }
            continue;
        }
        break (line, l);
    };

    let columns: Vec<&str> = header.1.split(',').collect();
    if columns.len() < 4 || columns[..4] != ["step", "x", "y", "action"] {
        return Err(HarnessError::Syntax { line: header.0, message: "expected `step,x,y,action` header".into() });
    }
    let goals = columns.len() - 4;
    for (i, c) in columns[4..].iter().enumerate() {
        if *c != format!("p_{i}") {
            return Err(HarnessError::Syntax { line: header.0, message: format!("unexpected column {c:?}") });
        }
    }

    let mut pairs = Vec::new();
    let mut probabilities = Vec::new();
    for (line, l) in lines {
        if l.is_empty() {
            continue;
        }
        let fields: Vec<&str> = l.split(',').collect();
        let syntax = |message: &str| HarnessError::Syntax { line, message: message.to_string() };
        if fields.len() != columns.len() {
            return Err(syntax("wrong number of fields"));
        }
        let step: usize = fields[0].parse().map_err(|_| syntax("bad step"))?;
        if step != pairs.len() + 1 {
            return Err(syntax("steps must count up from 1"));
        }
        let x: usize = fields[1].parse().map_err(|_| syntax("bad x"))?;
        let y: usize = fields[2].parse().map_err(|_| syntax("bad y"))?;
        let a: Action = fields[3].parse().map_err(|_| syntax("bad action"))?;
        pairs.push((Cell::new(x, y), a));
        if goals > 0 {
            let p = fields[4..]
                .iter()
                .map(|f| f.parse::<f64>().ok().filter(|p| (0.0..=1.0).contains(p)))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| syntax("probabilities must be numbers in [0, 1]"))?;
            probabilities.push(p);
        }
    }
    Ok(TraceFile { true_goal, pairs, probabilities: (goals > 0).then_some(probabilities) })
}
