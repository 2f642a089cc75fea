//! Exact Q-tables by value iteration, one per candidate reward function.
//!
//! Goals are absorbing: `V(goal) = 0` and every action taken from a goal cell
//! has `Q = 0`. Cells that cannot reach the goal carry no Q-values.

use std::collections::HashSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::mdp::{Action, Cell, Mdp, MdpError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("reward function {reward_index}: value iteration did not converge after {sweeps} sweeps (residual {residual:e})")]
    NotConverged { reward_index: usize, sweeps: usize, residual: f64 },
    #[error("reward function {reward_index}: goal {goal} is unreachable from the start")]
    UnreachableGoal { reward_index: usize, goal: Cell },
    #[error("reward index {index} out of range for {count} reward functions")]
    BadRewardIndex { index: usize, count: usize },
    #[error("invalid solver config: {0}")]
    BadConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Convergence threshold on the largest per-sweep value change.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tolerance: 1e-6, max_sweeps: 100_000 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(SolverError::BadConfig("tolerance must be positive"));
        }
        if self.max_sweeps == 0 {
            return Err(SolverError::BadConfig("max_sweeps must be at least 1"));
        }
        Ok(())
    }
}

/// Action values for one reward function.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    reward_index: usize,
    width: usize,
    height: usize,
    goal: Cell,
    gamma: f64,
    /// `cell_index * 8 + action_index`; NaN where undefined.
    values: Vec<f64>,
    converged_residual: f64,
    sweeps: usize,
}

impl QTable {
    pub fn reward_index(&self) -> usize {
        self.reward_index
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn converged_residual(&self) -> f64 {
        self.converged_residual
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    fn slot(&self, s: Cell, a: Action) -> Option<usize> {
        (s.x < self.width && s.y < self.height).then(|| (s.y * self.width + s.x) * 8 + a.index())
    }

    /// `Q(s, a)`, or `None` if the pair is not a valid, goal-connected transition.
    pub fn get(&self, s: Cell, a: Action) -> Option<f64> {
        self.slot(s, a).map(|i| self.values[i]).filter(|q| !q.is_nan())
    }

    /// Defined actions at `s` with their values, in canonical order.
    pub fn row(&self, s: Cell) -> impl Iterator<Item = (Action, f64)> + '_ {
        Action::ALL.into_iter().filter_map(move |a| self.get(s, a).map(|q| (a, q)))
    }

    /// `max_a Q(s, a)`; zero at the goal.
    pub fn max_value(&self, s: Cell) -> Option<f64> {
        self.row(s).map(|(_, q)| q).reduce(f64::max)
    }

    /// Highest-valued action at `s`; ties go to the canonically earlier action.
    pub fn greedy_action(&self, s: Cell) -> Option<Action> {
        let mut best: Option<(Action, f64)> = None;
        for (a, q) in self.row(s) {
            if best.is_none_or(|(_, b)| q > b) {
                best = Some((a, q));
            }
        }
        best.map(|(a, _)| a)
    }

    /// Serializes to the cache format (header lines, then `x,y,action,q` rows).
    pub fn to_cache_string(&self, map_hash: &str, tolerance: f64) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "map_hash={map_hash}");
        let _ = writeln!(out, "gamma={}", self.gamma);
        let _ = writeln!(out, "reward_index={}", self.reward_index);
        let _ = writeln!(out, "tolerance={tolerance}");
        out.push_str("x,y,action,q\n");
        for y in 0..self.height {
            for x in 0..self.width {
                let s = Cell::new(x, y);
                for (a, q) in self.row(s) {
                    let _ = writeln!(out, "{x},{y},{a},{q}");
                }
            }
        }
        out
    }

    /// Parses a cache file and checks it against `mdp`.
    ///
    /// Rejects a different map hash or discount, rows that are not valid
    /// goal-connected transitions, missing rows, and tables whose Bellman
    /// residual exceeds the recorded tolerance.
    pub fn from_cache_str(text: &str, mdp: &Mdp) -> Result<QTable, CacheError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));
        let mut header = |key: &'static str| -> Result<&str, CacheError> {
            let (line, l) = lines.next().ok_or(CacheError::Truncated(key))?;
            l.strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .ok_or(CacheError::Malformed { line, reason: "expected header" })
        };
        let map_hash = header("map_hash")?.to_string();
        let gamma_txt = header("gamma")?;
        let gamma: f64 = gamma_txt.parse().map_err(|_| CacheError::Malformed { line: 2, reason: "bad gamma" })?;
        let reward_index: usize = header("reward_index")?
            .parse()
            .map_err(|_| CacheError::Malformed { line: 3, reason: "bad reward_index" })?;
        let tolerance: f64 = header("tolerance")?
            .parse()
            .map_err(|_| CacheError::Malformed { line: 4, reason: "bad tolerance" })?;
        if !(tolerance.is_finite() && tolerance > 0.0) {
            return Err(CacheError::Malformed { line: 4, reason: "tolerance must be positive" });
        }

        let expected_hash = mdp.map().content_hash();
        if map_hash != expected_hash {
            return Err(CacheError::MapMismatch { expected: expected_hash, found: map_hash });
        }
        if gamma != mdp.gamma() {
            return Err(CacheError::GammaMismatch { expected: mdp.gamma(), found: gamma });
        }
        let rf = mdp.rewards().get(reward_index).ok_or(CacheError::BadRewardIndex(reward_index))?;

        match lines.next() {
            Some((_, "x,y,action,q")) => {}
            Some((line, _)) => return Err(CacheError::Malformed { line, reason: "expected column header" }),
            None => return Err(CacheError::Truncated("column header")),
        }

        let map = mdp.map();
        let mut table = QTable {
            reward_index,
            width: map.width(),
            height: map.height(),
            goal: rf.goal(),
            gamma,
            values: vec![f64::NAN; map.cell_count() * 8],
            converged_residual: 0.0,
            sweeps: 0,
        };
        let mut seen = HashSet::new();
        for (line, l) in lines {
            if l.is_empty() {
                continue;
            }
            let mut fields = l.split(',');
            let mut next = |reason| fields.next().ok_or(CacheError::Malformed { line, reason });
            let x: usize = next("missing x")?.parse().map_err(|_| CacheError::Malformed { line, reason: "bad x" })?;
            let y: usize = next("missing y")?.parse().map_err(|_| CacheError::Malformed { line, reason: "bad y" })?;
            let a: Action = next("missing action")?
                .parse()
                .map_err(|_| CacheError::Malformed { line, reason: "bad action" })?;
            let q: f64 = next("missing q")?.parse().map_err(|_| CacheError::Malformed { line, reason: "bad q" })?;
            if fields.next().is_some() {
                return Err(CacheError::Malformed { line, reason: "too many fields" });
            }
            if !q.is_finite() {
                return Err(CacheError::Malformed { line, reason: "q must be finite" });
            }
            let s = Cell::new(x, y);
            if map.transition(s, a).is_none() {
                return Err(CacheError::Malformed { line, reason: "not a valid transition" });
            }
            if !seen.insert((s, a)) {
                return Err(CacheError::Malformed { line, reason: "duplicate row" });
            }
            let slot = table.slot(s, a).expect("transition implies in bounds");
            table.values[slot] = q;
        }

        let reach = map.reachable_from(rf.goal());
        for s in map.free_cells().filter(|&s| reach[map.index(s)]) {
            for a in Action::ALL {
                if map.transition(s, a).is_some() && table.get(s, a).is_none() {
                    return Err(CacheError::Incomplete { state: s, action: a });
                }
            }
        }
        if seen.iter().any(|(s, _)| !reach[map.index(*s)]) {
            return Err(CacheError::Malformed { line: 0, reason: "row for a cell that cannot reach the goal" });
        }

        table.converged_residual = bellman_residual(mdp, &table);
        if table.converged_residual > tolerance {
            return Err(CacheError::Inconsistent { residual: table.converged_residual, tolerance });
        }
        Ok(table)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CacheError {
    #[error("cache file ends before {0}")]
    Truncated(&'static str),
    #[error("cache line {line}: {reason}")]
    Malformed { line: usize, reason: &'static str },
    #[error("cache was built for map {found}, current map is {expected}")]
    MapMismatch { expected: String, found: String },
    #[error("cache was built with gamma {found}, scenario uses {expected}")]
    GammaMismatch { expected: f64, found: f64 },
    #[error("cache reward_index {0} does not exist on this map")]
    BadRewardIndex(usize),
    #[error("cache is missing Q({state}, {action})")]
    Incomplete { state: Cell, action: Action },
    #[error("cache values violate the Bellman equation (residual {residual:e} > tolerance {tolerance:e})")]
    Inconsistent { residual: f64, tolerance: f64 },
}

/// Largest `|Q(s,a) - [r(s,a,s') + γ max_a' Q(s',a')]|` over non-goal states.
pub fn bellman_residual(mdp: &Mdp, q: &QTable) -> f64 {
    let map = mdp.map();
    let rf = &mdp.rewards()[q.reward_index];
    let mut worst = 0.0f64;
    for s in map.free_cells().filter(|&s| s != q.goal) {
        for (a, qa) in q.row(s) {
            let next = map.transition(s, a).expect("defined Q implies a valid move");
            let target = rf.reward(s, a, next) + q.gamma * q.max_value(next).unwrap_or(f64::NAN);
            let r = (qa - target).abs();
            worst = if r.is_nan() { f64::INFINITY } else { worst.max(r) };
        }
    }
    worst
}

/// Solves the reward function at `reward_index` by in-place value iteration.
///
/// Non-goal values start at −∞ ("no path found yet") and rise monotonically,
/// sweeping states row-major and actions in canonical order.
pub fn value_iteration(mdp: &Mdp, reward_index: usize, cfg: &SolverConfig) -> Result<QTable, SolverError> {
    cfg.validate()?;
    let rf = mdp.rewards().get(reward_index).ok_or(SolverError::BadRewardIndex {
        index: reward_index,
        count: mdp.rewards().len(),
    })?;
    let map = mdp.map();
    let goal = rf.goal();
    let gamma = mdp.gamma();

    let reach = map.reachable_from(goal);
    if !reach[map.index(map.start())] {
        return Err(SolverError::UnreachableGoal { reward_index, goal });
    }
    let states = successor_table(mdp, rf, &reach);

    let mut v = initial_values(mdp, goal);
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let change = sweep(&states, &mut v, gamma);
        if change < cfg.tolerance {
            break;
        }
        if sweeps >= cfg.max_sweeps {
            return Err(SolverError::NotConverged { reward_index, sweeps, residual: change });
        }
    }

    if !(v[map.index(map.start())] > 0.0) {
        return Err(SolverError::UnreachableGoal { reward_index, goal });
    }

    let mut values = vec![f64::NAN; map.cell_count() * 8];
    for s in map.free_cells().filter(|&s| reach[map.index(s)]) {
        for a in Action::ALL {
            if let Some(n) = map.transition(s, a) {
                values[map.index(s) * 8 + a.index()] = if s == goal {
                    0.0
                } else {
                    rf.reward(s, a, n) + gamma * v[map.index(n)]
                };
            }
        }
    }
    let mut table = QTable {
        reward_index,
        width: map.width(),
        height: map.height(),
        goal,
        gamma,
        values,
        converged_residual: 0.0,
        sweeps,
    };
    table.converged_residual = bellman_residual(mdp, &table);
    Ok(table)
}

type SuccessorTable = Vec<(usize, Vec<(usize, f64)>)>;

/// `(action, successor index, reward)` per goal-reachable non-goal state, row-major.
fn successor_table(mdp: &Mdp, rf: &crate::mdp::RewardFunction, reach: &[bool]) -> SuccessorTable {
    let map = mdp.map();
    map.free_cells()
        .filter(|&s| s != rf.goal() && reach[map.index(s)])
        .map(|s| {
            let moves = Action::ALL
                .into_iter()
                .filter_map(|a| map.transition(s, a).map(|n| (map.index(n), rf.reward(s, a, n))))
                .collect();
            (map.index(s), moves)
        })
        .collect()
}

fn initial_values(mdp: &Mdp, goal: Cell) -> Vec<f64> {
    let mut v = vec![f64::NEG_INFINITY; mdp.map().cell_count()];
    v[mdp.map().index(goal)] = 0.0;
    v
}

/// One in-place sweep; returns the largest change (infinite when a state
/// first receives a value).
fn sweep(states: &SuccessorTable, v: &mut [f64], gamma: f64) -> f64 {
    let mut change = 0.0f64;
    for (i, moves) in states {
        let best = moves
            .iter()
            .map(|&(n, r)| r + gamma * v[n])
            .fold(f64::NEG_INFINITY, f64::max);
        let delta = if v[*i] == f64::NEG_INFINITY {
            if best == f64::NEG_INFINITY { 0.0 } else { f64::INFINITY }
        } else {
            (best - v[*i]).abs()
        };
        change = change.max(delta);
        v[*i] = best;
    }
    change
}

/// State values (indexed like [`GridMap::index`]) after each of the first
/// `sweeps` sweeps; cells without a path yet hold −∞.
pub fn value_estimates(mdp: &Mdp, reward_index: usize, sweeps: usize) -> Result<Vec<Vec<f64>>, SolverError> {
    let rf = mdp.rewards().get(reward_index).ok_or(SolverError::BadRewardIndex {
        index: reward_index,
        count: mdp.rewards().len(),
    })?;
    let reach = mdp.map().reachable_from(rf.goal());
    let states = successor_table(mdp, rf, &reach);
    let mut v = initial_values(mdp, rf.goal());
    let mut out = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        sweep(&states, &mut v, mdp.gamma());
        out.push(v.clone());
    }
    Ok(out)
}

/// One table per reward function, in `mdp.rewards()` order.
pub fn train_all(mdp: &Mdp, cfg: &SolverConfig) -> Result<Vec<QTable>, SolverError> {
    (0..mdp.rewards().len())
        .into_par_iter()
        .map(|i| value_iteration(mdp, i, cfg))
        .collect()
}

/// Greedy action for `s`, or an error when `s` has no defined actions.
pub fn greedy_action(q: &QTable, s: Cell) -> Result<Action, MdpError> {
    q.greedy_action(s).ok_or(MdpError::IsolatedState(s))
}
