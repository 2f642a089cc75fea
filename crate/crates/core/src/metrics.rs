//! Deception measures over a stream of observer posteriors.

use thiserror::Error;

use crate::mdp::{Mdp, ObservationSequence};
use crate::observer::PosteriorSnapshot;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("deception measures need at least two reward functions, found {0}")]
    TooFewRewards(usize),
    #[error("no posterior snapshots to measure")]
    EmptyStream,
    #[error("trace has {trace} pairs but there are {snapshots} snapshots")]
    Misaligned { trace: usize, snapshots: usize },
    #[error("true index {index} out of range for {count} reward functions")]
    BadTrueIndex { index: usize, count: usize },
    #[error("weight {0} is not in [0, 1]")]
    BadWeight(f64),
    #[error("checkpoint fraction {0} is not in (0, 1)")]
    BadFraction(f64),
}

/// Decile checkpoints 0.1 through 0.9.
pub fn default_checkpoints() -> Vec<f64> {
    (1..10).map(|k| k as f64 / 10.0).collect()
}

/// Everything recorded about one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub path_cost: f64,
    pub optimal_cost: f64,
    pub cost_ratio: f64,
    pub checkpoint_posteriors: Vec<(f64, f64)>,
    pub simulation_value: f64,
    pub ldp_index: usize,
    pub non_deceptive_fraction: f64,
    pub truncated: bool,
}

fn check(snapshots: &[PosteriorSnapshot], true_index: usize) -> Result<(), MetricsError> {
    let first = snapshots.first().ok_or(MetricsError::EmptyStream)?;
    let count = first.probabilities.len();
    if count < 2 {
        return Err(MetricsError::TooFewRewards(count));
    }
    if true_index >= count {
        return Err(MetricsError::BadTrueIndex { index: true_index, count });
    }
    Ok(())
}

/// Best bogus probability minus the true one, for one snapshot.
pub fn simulation_term(snapshot: &PosteriorSnapshot, true_index: usize) -> f64 {
    snapshot.best_bogus(true_index) - snapshot.probabilities[true_index]
}

/// Mean of [`simulation_term`] over every prefix; positive means the observer
/// favoured a wrong goal on average.
pub fn simulation_value(snapshots: &[PosteriorSnapshot], true_index: usize) -> Result<f64, MetricsError> {
    check(snapshots, true_index)?;
    let total: f64 = snapshots.iter().map(|s| simulation_term(s, true_index)).sum();
    Ok(total / snapshots.len() as f64)
}

/// True when the real goal fails to strictly dominate some bogus goal (ties count).
pub fn deceptive_step(snapshot: &PosteriorSnapshot, true_index: usize) -> bool {
    let p_true = snapshot.probabilities[true_index];
    snapshot
        .probabilities
        .iter()
        .enumerate()
        .any(|(i, &p)| i != true_index && p_true <= p)
}

/// 1-based index of the last deceptive snapshot, 0 if none.
pub fn last_deceptive_point(snapshots: &[PosteriorSnapshot], true_index: usize) -> Result<usize, MetricsError> {
    check(snapshots, true_index)?;
    Ok(snapshots
        .iter()
        .rposition(|s| deceptive_step(s, true_index))
        .map_or(0, |i| i + 1))
}

pub fn non_deceptive_fraction(snapshots: &[PosteriorSnapshot], true_index: usize) -> Result<f64, MetricsError> {
    check(snapshots, true_index)?;
    let honest = snapshots.iter().filter(|s| !deceptive_step(s, true_index)).count();
    Ok(honest as f64 / snapshots.len() as f64)
}

/// Snapshot index (1-based) read at checkpoint `fraction` of a `t`-step stream.
pub fn checkpoint_index(fraction: f64, t: usize) -> usize {
    // guard against 0.3 * 10 = 3.0000000000000004 style rounding
    let raw = (fraction * t as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(t.max(1))
}

pub fn checkpoint_posteriors(
    snapshots: &[PosteriorSnapshot],
    true_index: usize,
    fractions: &[f64],
) -> Result<Vec<(f64, f64)>, MetricsError> {
    check(snapshots, true_index)?;
    fractions
        .iter()
        .map(|&f| {
            if !(f > 0.0 && f < 1.0) {
                return Err(MetricsError::BadFraction(f));
            }
            let idx = checkpoint_index(f, snapshots.len());
            Ok((f, snapshots[idx - 1].probabilities[true_index]))
        })
        .collect()
}

/// `Σ_j (1-ω)·r_j + ω·d_j`, with `r_j` the true reward of step `j` and `d_j`
/// its simulation term.
pub fn belief_induced_score(
    trace: &ObservationSequence,
    snapshots: &[PosteriorSnapshot],
    mdp: &Mdp,
    omega: f64,
) -> Result<f64, MetricsError> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(MetricsError::BadWeight(omega));
    }
    if trace.len() != snapshots.len() {
        return Err(MetricsError::Misaligned { trace: trace.len(), snapshots: snapshots.len() });
    }
    if trace.is_empty() {
        return Ok(0.0);
    }
    check(snapshots, mdp.true_index())?;
    let rf = mdp.true_reward();
    let map = mdp.map();
    let mut total = 0.0;
    for (&(s, a), snap) in trace.pairs().iter().zip(snapshots) {
        let next = map.transition(s, a).expect("trace is transition-consistent");
        let r = rf.reward(s, a, next);
        total += (1.0 - omega) * r + omega * simulation_term(snap, mdp.true_index());
    }
    Ok(total)
}

/// Gathers all per-episode measures.
pub fn episode_metrics(
    trace: &ObservationSequence,
    snapshots: &[PosteriorSnapshot],
    true_index: usize,
    optimal_cost: f64,
    truncated: bool,
    fractions: &[f64],
) -> Result<EpisodeMetrics, MetricsError> {
    if trace.len() != snapshots.len() {
        return Err(MetricsError::Misaligned { trace: trace.len(), snapshots: snapshots.len() });
    }
    let path_cost = trace.path_cost();
    Ok(EpisodeMetrics {
        path_cost,
        optimal_cost,
        cost_ratio: path_cost / optimal_cost,
        checkpoint_posteriors: checkpoint_posteriors(snapshots, true_index, fractions)?,
        simulation_value: simulation_value(snapshots, true_index)?,
        ldp_index: last_deceptive_point(snapshots, true_index)?,
        non_deceptive_fraction: non_deceptive_fraction(snapshots, true_index)?,
        truncated,
    })
}
