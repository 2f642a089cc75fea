use std::fmt::Write as _;
use std::path::Path;

use super::cache::load_or_train;
use super::scenario::agent_label;
use super::{HarnessError, Result, Scenario};
use crate::mdp::{GridMap, Mdp, ObservationSequence};
use crate::metrics::{checkpoint_posteriors, default_checkpoints, episode_metrics, EpisodeMetrics};
use crate::observer::{BoltzmannObserver, PosteriorSnapshot};
use crate::policy::{honest_action, run_episode, Episode, PolicyError};
use crate::solver::{QTable, SolverConfig};

const FIXED_COLUMNS: [&str; 14] = [
    "run_id",
    "map",
    "agent",
    "alpha",
    "delta",
    "gamma",
    "seed",
    "truncated",
    "path_cost",
    "optimal_cost",
    "cost_ratio",
    "simulation",
    "ldp_index",
    "non_deceptive_fraction",
];

/// The results CSV header: fixed columns, then `cp_10` through `cp_90`.
pub fn csv_header() -> String {
    let mut cols: Vec<String> = FIXED_COLUMNS.iter().map(|c| c.to_string()).collect();
    cols.extend((1..10).map(|k| format!("cp_{}", k * 10)));
    cols.join(",")
}

/// One line of the results CSV. `result` is `None` for a failed scenario,
/// which is written with `truncated=error` and empty measure cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub run_id: String,
    pub map: String,
    pub agent: String,
    pub alpha: f64,
    pub delta: f64,
    pub gamma: f64,
    pub seed: u64,
    pub result: Option<RowMeasures>,
}

/// The measure cells of a successful row; `deciles` holds the true-goal
/// posterior at 0.1, 0.2, ..., 0.9 of the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMeasures {
    pub metrics: EpisodeMetrics,
    pub deciles: Vec<f64>,
}

impl CsvRow {
    pub fn to_line(&self) -> String {
        let mut out = format!(
            "{},{},{},{},{},{},{}",
            self.run_id, self.map, self.agent, self.alpha, self.delta, self.gamma, self.seed
        );
        match &self.result {
            Some(RowMeasures { metrics: m, deciles }) => {
                let _ = write!(
                    out,
                    ",{},{},{},{},{},{},{}",
                    m.truncated,
                    m.path_cost,
                    m.optimal_cost,
                    m.cost_ratio,
                    m.simulation_value,
                    m.ldp_index,
                    m.non_deceptive_fraction
                );
                for p in deciles {
                    let _ = write!(out, ",{p}");
                }
            }
            None => {
                out.push_str(",error");
                out.push_str(&",".repeat(6 + 9));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub mdp: Mdp,
    pub episode: Episode,
    pub snapshots: Vec<PosteriorSnapshot>,
    pub metrics: EpisodeMetrics,
    pub row: CsvRow,
}

/// Loads the scenario's map, obtains Q-tables (from `cache` when present,
/// otherwise trained in memory) and runs one episode.
pub fn run_scenario(sc: &Scenario, run_id: &str, cache: Option<&Path>) -> Result<ScenarioOutcome> {
    let wrap = |e: HarnessError| HarnessError::Scenario { id: run_id.to_string(), source: Box::new(e) };
    let map = sc.load_map().map_err(wrap)?;
    let label = map_label(&sc.map_path);
    let mdp = Mdp::new(map, sc.true_goal, sc.gamma).map_err(|e| wrap(e.into()))?;
    let qtables = load_or_train(&mdp, &solver_config(sc), cache).map_err(wrap)?;
    run_with_tables(sc, &mdp, &qtables, &label, run_id).map_err(wrap)
}

pub(crate) fn solver_config(sc: &Scenario) -> SolverConfig {
    SolverConfig { tolerance: sc.tolerance, ..SolverConfig::default() }
}

pub(crate) fn map_label(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Runs one episode against already-trained tables. `mdp` must carry the
/// scenario's true goal and gamma.
pub(crate) fn run_with_tables(
    sc: &Scenario,
    mdp: &Mdp,
    qtables: &[QTable],
    map_label: &str,
    run_id: &str,
) -> Result<ScenarioOutcome> {
    let mdp = mdp.with_true_index(sc.true_goal)?;
    let prior = sc.prior.build(qtables.len())?;
    let observer = BoltzmannObserver::new(sc.boltzmann_beta)?;
    let episode = run_episode(&mdp, qtables, &prior, &observer, &sc.agent)?;
    let snapshots = observer.posterior_stream(qtables, &prior, &episode.obs)?;
    let optimal = optimal_cost(mdp.map(), &qtables[sc.true_goal], mdp.true_goal())?;
    let metrics = episode_metrics(&episode.obs, &snapshots, sc.true_goal, optimal, episode.truncated, &sc.checkpoints)?;
    let deciles = checkpoint_posteriors(&snapshots, sc.true_goal, &default_checkpoints())?
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    let row = CsvRow {
        result: Some(RowMeasures { metrics: metrics.clone(), deciles }),
        ..row_identity(sc, map_label, run_id)
    };
    Ok(ScenarioOutcome { mdp, episode, snapshots, metrics, row })
}

/// The identifying cells of a row, with no measures (an error row as-is).
pub(crate) fn row_identity(sc: &Scenario, map_label: &str, run_id: &str) -> CsvRow {
    CsvRow {
        run_id: run_id.to_string(),
        map: map_label.to_string(),
        agent: agent_label(&sc.agent),
        alpha: sc.agent.alpha,
        delta: sc.agent.delta,
        gamma: sc.gamma,
        seed: sc.seed,
        result: None,
    }
}

/// Cost of the greedy path from the start to `goal`.
fn optimal_cost(map: &GridMap, q: &QTable, goal: crate::mdp::Cell) -> Result<f64> {
    let mut obs = ObservationSequence::new();
    let mut s = map.start();
    while s != goal {
        if obs.len() > map.cell_count() {
            return Err(PolicyError::DeadEnd(s).into());
        }
        let a = honest_action(q, s)?;
        s = obs.push(map, s, a)?;
    }
    Ok(obs.path_cost())
}
