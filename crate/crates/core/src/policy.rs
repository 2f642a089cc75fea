//! Action selection: honest (greedy), ambiguity (entropy of the observer's
//! posterior, restricted to progress-making actions, with Q-gain pruning of
//! bogus reward functions) and irrationality (weighted sum of normalized
//! Q-value and the irrationality of the extended trace).

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::mdp::{Action, Cell, Mdp, MdpError, ObservationSequence};
use crate::observer::{entropy_bits, step_divergence, BoltzmannObserver, ObserverError, PriorDistribution};
use crate::solver::QTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Observer(#[from] ObserverError),
    #[error("no action available at {0}")]
    DeadEnd(Cell),
    #[error("Q-table {reward_index} has no value for ({state}, {action})")]
    UndefinedQ { reward_index: usize, state: Cell, action: Action },
    #[error("expected {expected} Q-tables, got {found}")]
    TableCount { expected: usize, found: usize },
    #[error("invalid policy config: {0}")]
    BadConfig(&'static str),
    #[error("start is already the true goal")]
    StartIsGoal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentKind {
    Honest,
    Ambiguity,
    Irrationality,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Honest => "honest",
            AgentKind::Ambiguity => "ambiguity",
            AgentKind::Irrationality => "irrationality",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "honest" => Ok(AgentKind::Honest),
            "ambiguity" => Ok(AgentKind::Ambiguity),
            "irrationality" => Ok(AgentKind::Irrationality),
            _ => Err(PolicyError::BadConfig("agent must be honest, ambiguity or irrationality")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    pub kind: AgentKind,
    /// Irrationality weight in `[0, 1]`.
    pub alpha: f64,
    /// Pruning threshold; `-inf` disables pruning.
    pub delta: f64,
    /// Smallest number of reward functions kept in the entropy calculation.
    pub min_active: usize,
    /// Entropy scale; does not change which action wins.
    pub kappa: f64,
    /// Step budget; `None` means ten times the honest path length.
    pub step_cap: Option<usize>,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            kind: AgentKind::Honest,
            alpha: 0.3,
            delta: 0.0,
            min_active: 1,
            kappa: 1.0,
            step_cap: None,
        }
    }
}

impl PolicyConfig {
    pub fn honest() -> Self {
        Self::default()
    }

    pub fn ambiguity() -> Self {
        PolicyConfig { kind: AgentKind::Ambiguity, ..Self::default() }
    }

    pub fn irrationality(alpha: f64) -> Self {
        PolicyConfig { kind: AgentKind::Irrationality, alpha, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(PolicyError::BadConfig("alpha must lie in [0, 1]"));
        }
        if self.delta.is_nan() {
            return Err(PolicyError::BadConfig("delta must be a number"));
        }
        if self.min_active == 0 {
            return Err(PolicyError::BadConfig("min_active must be at least 1"));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(PolicyError::BadConfig("kappa must be positive"));
        }
        if self.step_cap == Some(0) {
            return Err(PolicyError::BadConfig("step_cap must be at least 1"));
        }
        Ok(())
    }
}

/// Mutable per-episode state shared by the deceptive policies.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    obs: ObservationSequence,
    /// Reward indices currently in the entropy calculation, ascending.
    active_set: Vec<usize>,
    /// Running divergence of `obs` per reward function.
    divergences: Vec<f64>,
}

impl PolicyState {
    pub fn new(reward_count: usize) -> Self {
        PolicyState {
            obs: ObservationSequence::new(),
            active_set: (0..reward_count).collect(),
            divergences: vec![0.0; reward_count],
        }
    }

    pub fn obs(&self) -> &ObservationSequence {
        &self.obs
    }

    pub fn active_set(&self) -> &[usize] {
        &self.active_set
    }

    pub fn divergences(&self) -> &[f64] {
        &self.divergences
    }

    /// The `(s₀, a₀)` anchor of the residual-reward computation.
    pub fn first_pair(&self) -> Option<(Cell, Action)> {
        self.obs.first()
    }

    fn advance(&mut self, mdp: &Mdp, qtables: &[QTable], s: Cell, a: Action) -> Result<(), PolicyError> {
        for (d, q) in self.divergences.iter_mut().zip(qtables) {
            *d += step_divergence(q, s, a)?;
        }
        self.obs.push(mdp.map(), s, a)?;
        Ok(())
    }
}

/// What a policy chose at one step, and why.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub state: Cell,
    pub action: Action,
    /// Candidate actions considered (ambiguity: A⁺(s); otherwise every available action).
    pub candidates: Vec<Action>,
    /// Ambiguity only: A⁺(s) was empty and the best true-reward Q-gain action was taken.
    pub fallback: bool,
    pub active_set: Vec<usize>,
    /// Score of the chosen action (entropy in bits, weighted score, or Q).
    pub score: f64,
}

fn q_at(q: &QTable, s: Cell, a: Action) -> Result<f64, PolicyError> {
    q.get(s, a).ok_or(PolicyError::UndefinedQ { reward_index: q.reward_index(), state: s, action: a })
}

/// Q at the last observed pair minus Q at the first; zero on an empty trace.
pub fn residual_reward(q: &QTable, obs: &ObservationSequence) -> Result<f64, PolicyError> {
    match (obs.first(), obs.last()) {
        (Some((s0, a0)), Some((sl, al))) => Ok(q_at(q, sl, al)? - q_at(q, s0, a0)?),
        _ => Ok(0.0),
    }
}

/// Gain of taking `a` at `s` over the reward already banked along `obs`.
///
/// Both terms are measured from the `(s₀, a₀)` anchor: the action contributes
/// `Q(s,a) - Q(s₀,a₀)` and the trace has banked `residual_reward(obs)`, so the
/// gain telescopes to `Q(s,a) - Q(s_last, a_last)`. Positive means `a` moves
/// toward that reward function's payoff. On an empty trace it is `Q(s,a)`.
pub fn q_gain(q: &QTable, obs: &ObservationSequence, s: Cell, a: Action) -> Result<f64, PolicyError> {
    let anchor = match obs.first() {
        Some((s0, a0)) => q_at(q, s0, a0)?,
        None => 0.0,
    };
    Ok((q_at(q, s, a)? - anchor) - residual_reward(q, obs)?)
}

/// Indices of actions with non-negative gain; if there are none, the single
/// best-gain action (earliest on ties) and `true`.
pub fn progress_candidates(true_gains: &[f64]) -> (Vec<usize>, bool) {
    let candidates: Vec<usize> = (0..true_gains.len()).filter(|&k| true_gains[k] >= 0.0).collect();
    if !candidates.is_empty() || true_gains.is_empty() {
        return (candidates, false);
    }
    let mut best = 0;
    for k in 1..true_gains.len() {
        if true_gains[k] > true_gains[best] {
            best = k;
        }
    }
    (vec![best], true)
}

/// `1 - max_i exp(Δ_i(obs))`: zero when the trace is optimal for some reward function.
pub fn irrationality_measure(qtables: &[QTable], obs: &ObservationSequence) -> Result<f64, PolicyError> {
    let mut best = f64::NEG_INFINITY;
    for q in qtables {
        best = best.max(crate::observer::divergence(q, obs)?);
    }
    Ok(irrationality_from_divergences(best))
}

fn irrationality_from_divergences(max_divergence: f64) -> f64 {
    if max_divergence == f64::NEG_INFINITY {
        // no reward functions at all: nothing explains the trace
        return 1.0;
    }
    // 1 - e^Δ, kept strictly below 1 once e^Δ drops under f64 resolution
    (0.0 - max_divergence.exp_m1()).min(1.0 - f64::EPSILON / 2.0)
}

fn check_tables(mdp: &Mdp, qtables: &[QTable]) -> Result<(), PolicyError> {
    if qtables.len() != mdp.rewards().len() {
        return Err(PolicyError::TableCount { expected: mdp.rewards().len(), found: qtables.len() });
    }
    Ok(())
}

fn available(mdp: &Mdp, s: Cell) -> Result<Vec<Action>, PolicyError> {
    match mdp.map().available_actions(s) {
        Ok(actions) => Ok(actions),
        Err(MdpError::IsolatedState(c)) => Err(PolicyError::DeadEnd(c)),
        Err(e) => Err(e.into()),
    }
}

/// The optimal action for the true reward function.
pub fn honest_action(q_true: &QTable, s: Cell) -> Result<Action, PolicyError> {
    q_true.greedy_action(s).ok_or(PolicyError::DeadEnd(s))
}

/// Entropy differences below this many bits are treated as ties.
pub const ENTROPY_TIE: f64 = 1e-9;

/// Picks the action whose extended trace leaves the observer most uncertain
/// over the active reward functions.
pub fn ambiguity_action(
    mdp: &Mdp,
    qtables: &[QTable],
    prior: &PriorDistribution,
    observer: &BoltzmannObserver,
    state: &mut PolicyState,
    s: Cell,
    cfg: &PolicyConfig,
) -> Result<Decision, PolicyError> {
    check_tables(mdp, qtables)?;
    let true_index = mdp.true_index();
    let actions = available(mdp, s)?;
    let obs = &state.obs;

    // gains[i][k] = G_i(s, actions[k])
    let mut gains = Vec::with_capacity(qtables.len());
    for q in qtables {
        let row = actions
            .iter()
            .map(|&a| q_gain(q, obs, s, a))
            .collect::<Result<Vec<f64>, PolicyError>>()?;
        gains.push(row);
    }

    let (candidates, fallback) = progress_candidates(&gains[true_index]);

    // best candidate gain per reward function decides pruning
    let best_gain: Vec<f64> = gains
        .iter()
        .map(|row| candidates.iter().map(|&k| row[k]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut active: Vec<usize> = (0..qtables.len())
        .filter(|&i| i == true_index || best_gain[i] >= cfg.delta)
        .collect();
    if active.len() < cfg.min_active {
        let mut pruned: Vec<usize> = (0..qtables.len()).filter(|i| !active.contains(i)).collect();
        pruned.sort_by(|&a, &b| best_gain[b].total_cmp(&best_gain[a]).then(a.cmp(&b)));
        let missing = cfg.min_active - active.len();
        active.extend(pruned.into_iter().take(missing));
        active.sort_unstable();
    }

    let weights = prior.weights();
    let active_sum: f64 = active.iter().map(|&i| weights[i]).sum();
    let active_prior: Vec<f64> = active.iter().map(|&i| weights[i] / active_sum).collect();

    let mut chosen: Option<(usize, f64)> = None;
    for &k in &candidates {
        let a = actions[k];
        let mut divs = Vec::with_capacity(active.len());
        for &i in &active {
            divs.push(state.divergences[i] + step_divergence(&qtables[i], s, a)?);
        }
        let probs = observer.distribution(&divs, &active_prior)?;
        let entropy = entropy_bits(&probs);
        // entropies within rounding noise count as equal and fall back to
        // the larger true-reward gain, then canonical order
        let better = match chosen {
            None => true,
            Some((b, best)) => {
                entropy > best + ENTROPY_TIE
                    || (entropy >= best - ENTROPY_TIE && gains[true_index][k] > gains[true_index][b])
            }
        };
        if better {
            chosen = Some((k, entropy));
        }
    }
    let (k, entropy) = chosen.expect("candidate set is never empty");
    let score = cfg.kappa * entropy;
    let action = actions[k];
    state.active_set = active.clone();
    state.advance(mdp, qtables, s, action)?;
    Ok(Decision {
        state: s,
        action,
        candidates: candidates.iter().map(|&k| actions[k]).collect(),
        fallback,
        active_set: active,
        score,
    })
}

/// Picks `argmax (1-α)·Q'(s,a) + α·IM(obs·(s,a))`, where `Q'` is the true
/// reward's Q min-max normalized over the actions available at `s`.
pub fn irrationality_action(
    mdp: &Mdp,
    qtables: &[QTable],
    state: &mut PolicyState,
    s: Cell,
    cfg: &PolicyConfig,
) -> Result<Decision, PolicyError> {
    check_tables(mdp, qtables)?;
    let q_true = &qtables[mdp.true_index()];
    let actions = available(mdp, s)?;
    let raw = actions
        .iter()
        .map(|&a| q_at(q_true, s, a))
        .collect::<Result<Vec<f64>, _>>()?;
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut chosen: Option<(usize, f64)> = None;
    for (k, &a) in actions.iter().enumerate() {
        let normalized = if hi > lo { (raw[k] - lo) / (hi - lo) } else { 1.0 };
        let mut best_div = f64::NEG_INFINITY;
        for (q, d) in qtables.iter().zip(&state.divergences) {
            best_div = best_div.max(d + step_divergence(q, s, a)?);
        }
        let im = irrationality_from_divergences(best_div);
        let score = (1.0 - cfg.alpha) * normalized + cfg.alpha * im;
        // equal scores fall back to the raw Q-value, then canonical order
        let better = match chosen {
            None => true,
            Some((b, best)) => score > best || (score == best && raw[k] > raw[b]),
        };
        if better {
            chosen = Some((k, score));
        }
    }
    let (k, score) = chosen.expect("available actions are never empty");
    let action = actions[k];
    state.advance(mdp, qtables, s, action)?;
    Ok(Decision {
        state: s,
        action,
        candidates: actions,
        fallback: false,
        active_set: state.active_set.clone(),
        score,
    })
}

/// A finished (or truncated) run of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub obs: ObservationSequence,
    pub decisions: Vec<Decision>,
    /// The step budget ran out before the true goal was reached.
    pub truncated: bool,
    pub step_cap: usize,
}

impl Episode {
    pub fn reached_goal(&self) -> bool {
        !self.truncated
    }
}

/// Number of steps the greedy policy needs from the start to the true goal.
pub fn honest_path_length(mdp: &Mdp, q_true: &QTable) -> Result<usize, PolicyError> {
    let map = mdp.map();
    let goal = mdp.true_goal();
    let mut s = map.start();
    let mut steps = 0;
    while s != goal {
        if steps > map.cell_count() {
            return Err(PolicyError::DeadEnd(s));
        }
        let a = honest_action(q_true, s)?;
        s = map.transition(s, a).ok_or(PolicyError::DeadEnd(s))?;
        steps += 1;
    }
    Ok(steps)
}

/// Runs the configured policy from the map's start until the true goal or the step cap.
pub fn run_episode(
    mdp: &Mdp,
    qtables: &[QTable],
    prior: &PriorDistribution,
    observer: &BoltzmannObserver,
    cfg: &PolicyConfig,
) -> Result<Episode, PolicyError> {
    cfg.validate()?;
    check_tables(mdp, qtables)?;
    if prior.len() != qtables.len() {
        return Err(ObserverError::PriorLength { prior: prior.len(), rewards: qtables.len() }.into());
    }
    let map = mdp.map();
    let goal = mdp.true_goal();
    if map.start() == goal {
        return Err(PolicyError::StartIsGoal);
    }
    let q_true = &qtables[mdp.true_index()];
    let step_cap = match cfg.step_cap {
        Some(cap) => cap,
        None => 10 * honest_path_length(mdp, q_true)?,
    };

    let mut state = PolicyState::new(qtables.len());
    let mut decisions = Vec::new();
    let mut s = map.start();
    while s != goal && decisions.len() < step_cap {
        let decision = match cfg.kind {
            AgentKind::Honest => {
                let action = honest_action(q_true, s)?;
                let score = q_at(q_true, s, action)?;
                state.advance(mdp, qtables, s, action)?;
                Decision {
                    state: s,
                    action,
                    candidates: available(mdp, s)?,
                    fallback: false,
                    active_set: state.active_set.clone(),
                    score,
                }
            }
            AgentKind::Ambiguity => ambiguity_action(mdp, qtables, prior, observer, &mut state, s, cfg)?,
            AgentKind::Irrationality => irrationality_action(mdp, qtables, &mut state, s, cfg)?,
        };
        decisions.push(decision);
        s = state.obs.end_state().expect("trace is non-empty after a step");
    }
    Ok(Episode { truncated: s != goal, obs: state.obs, decisions, step_cap })
}
