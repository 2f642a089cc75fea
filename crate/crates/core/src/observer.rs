//! Naive intention recognition: Boltzmann posterior over candidate reward
//! functions, driven by how far a trace diverges from each one's optimum.

use thiserror::Error;

use crate::mdp::{Cell, ObservationSequence};
use crate::solver::QTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObserverError {
    #[error("no Q-tables supplied")]
    NoRewards,
    #[error("prior has {prior} weights but there are {rewards} reward functions")]
    PriorLength { prior: usize, rewards: usize },
    #[error("prior weights must be positive and finite and sum to 1 (sum {0})")]
    BadPrior(f64),
    #[error("Q-table {reward_index} has no value for state {state}")]
    UndefinedState { reward_index: usize, state: Cell },
    #[error("posterior is degenerate: every log-weight is non-finite")]
    Degenerate,
    #[error("inverse temperature must be positive and finite, got {0}")]
    BadBeta(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorDistribution {
    weights: Vec<f64>,
}

impl PriorDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self, ObserverError> {
        let sum: f64 = weights.iter().sum();
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(ObserverError::BadPrior(sum));
        }
        Ok(PriorDistribution { weights })
    }

    pub fn uniform(n: usize) -> Self {
        PriorDistribution { weights: vec![1.0 / n as f64; n] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// The observer's belief after `step_index` observed pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSnapshot {
    pub step_index: usize,
    pub probabilities: Vec<f64>,
    pub divergences: Vec<f64>,
}

impl PosteriorSnapshot {
    /// Largest probability among every index except `true_index`.
    pub fn best_bogus(&self, true_index: usize) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != true_index)
            .map(|(_, &p)| p)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `Q(s, a) - max_a' Q(s, a')` for one observed pair.
pub fn step_divergence(q: &QTable, s: Cell, a: crate::mdp::Action) -> Result<f64, ObserverError> {
    let undefined = || ObserverError::UndefinedState { reward_index: q.reward_index(), state: s };
    let best = q.max_value(s).ok_or_else(undefined)?;
    let qa = q.get(s, a).ok_or_else(undefined)?;
    Ok(qa - best)
}

/// Sum of per-step Q-differences along `obs`; zero iff the trace is optimal for `q`.
pub fn divergence(q: &QTable, obs: &ObservationSequence) -> Result<f64, ObserverError> {
    obs.pairs()
        .iter()
        .try_fold(0.0, |acc, &(s, a)| Ok(acc + step_divergence(q, s, a)?))
}

/// `ln Σ exp(x_i)`, stable for large negative inputs.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Boltzmann observer with inverse temperature `beta` (1 reproduces the plain
/// `exp(Δ)` likelihood).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoltzmannObserver {
    beta: f64,
}

impl Default for BoltzmannObserver {
    fn default() -> Self {
        BoltzmannObserver { beta: 1.0 }
    }
}

impl BoltzmannObserver {
    pub fn new(beta: f64) -> Result<Self, ObserverError> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(ObserverError::BadBeta(beta));
        }
        Ok(BoltzmannObserver { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Normalized `prior[i] · exp(β Δ_i)`, computed in log-space.
    pub fn distribution(&self, divergences: &[f64], prior: &[f64]) -> Result<Vec<f64>, ObserverError> {
        if divergences.len() != prior.len() {
            return Err(ObserverError::PriorLength { prior: prior.len(), rewards: divergences.len() });
        }
        let logits: Vec<f64> = divergences
            .iter()
            .zip(prior)
            .map(|(d, p)| self.beta * d + p.ln())
            .collect();
        let norm = log_sum_exp(&logits);
        if !norm.is_finite() {
            return Err(ObserverError::Degenerate);
        }
        Ok(logits.iter().map(|l| (l - norm).exp()).collect())
    }

    pub fn posterior(
        &self,
        qtables: &[QTable],
        prior: &PriorDistribution,
        obs: &ObservationSequence,
    ) -> Result<PosteriorSnapshot, ObserverError> {
        check_inputs(qtables, prior)?;
        let divergences = qtables
            .iter()
            .map(|q| divergence(q, obs))
            .collect::<Result<Vec<_>, _>>()?;
        self.snapshot(obs.len(), divergences, prior)
    }

    /// One snapshot per non-empty prefix, accumulating divergences incrementally.
    pub fn posterior_stream(
        &self,
        qtables: &[QTable],
        prior: &PriorDistribution,
        obs: &ObservationSequence,
    ) -> Result<Vec<PosteriorSnapshot>, ObserverError> {
        check_inputs(qtables, prior)?;
        let mut divergences = vec![0.0; qtables.len()];
        let mut out = Vec::with_capacity(obs.len());
        for (j, &(s, a)) in obs.pairs().iter().enumerate() {
            for (d, q) in divergences.iter_mut().zip(qtables) {
                *d += step_divergence(q, s, a)?;
            }
            out.push(self.snapshot(j + 1, divergences.clone(), prior)?);
        }
        Ok(out)
    }

    fn snapshot(
        &self,
        step_index: usize,
        divergences: Vec<f64>,
        prior: &PriorDistribution,
    ) -> Result<PosteriorSnapshot, ObserverError> {
        let probabilities = if step_index == 0 {
            prior.weights().to_vec()
        } else {
            self.distribution(&divergences, prior.weights())?
        };
        Ok(PosteriorSnapshot { step_index, probabilities, divergences })
    }
}

fn check_inputs(qtables: &[QTable], prior: &PriorDistribution) -> Result<(), ObserverError> {
    if qtables.is_empty() {
        return Err(ObserverError::NoRewards);
    }
    if prior.len() != qtables.len() {
        return Err(ObserverError::PriorLength { prior: prior.len(), rewards: qtables.len() });
    }
    Ok(())
}

/// Shannon entropy in bits; zero-probability terms contribute nothing.
pub fn entropy_bits(probabilities: &[f64]) -> f64 {
    -probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}
