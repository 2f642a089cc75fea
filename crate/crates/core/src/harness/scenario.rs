use std::path::{Path, PathBuf};

use super::kv::{list, parse_value, KeyValues};
use super::{read_file, HarnessError, Result};
use crate::mdp::GridMap;
use crate::metrics::default_checkpoints;
use crate::observer::PriorDistribution;
use crate::policy::{AgentKind, PolicyConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    Uniform,
    Weights(Vec<f64>),
}

impl PriorSpec {
    pub fn parse(value: &str) -> Result<Self> {
        if value == "uniform" {
            return Ok(PriorSpec::Uniform);
        }
        let weights = list(value).map(|w| parse_value("prior", w)).collect::<Result<Vec<f64>>>()?;
        Ok(PriorSpec::Weights(weights))
    }

    pub fn build(&self, n: usize) -> Result<PriorDistribution> {
        match self {
            PriorSpec::Uniform => Ok(PriorDistribution::uniform(n)),
            PriorSpec::Weights(w) if w.len() != n => Err(HarnessError::bad_value(
                "prior",
                format!("{} weights for {n} goals", w.len()),
            )),
            PriorSpec::Weights(w) => Ok(PriorDistribution::new(w.clone())?),
        }
    }
}

/// One cell of the experiment grid: a map, a true goal and an agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub map_path: PathBuf,
    pub true_goal: usize,
    pub agent: PolicyConfig,
    pub gamma: f64,
    pub prior: PriorSpec,
    pub seed: u64,
    pub checkpoints: Vec<f64>,
    pub boltzmann_beta: f64,
    pub tolerance: f64,
}

pub(crate) const SCENARIO_KEYS: &[&str] = &[
    "map",
    "true_goal",
    "agent",
    "alpha",
    "delta",
    "min_active",
    "kappa",
    "step_cap",
    "gamma",
    "prior",
    "seed",
    "checkpoints",
    "boltzmann_beta",
    "tolerance",
];

impl Scenario {
    /// Parses scenario text; a relative `map` path is resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        kv.check_keys(SCENARIO_KEYS)?;
        let map_path = base_dir.join(kv.require("map")?);
        let true_goal: usize = kv.parsed("true_goal")?.ok_or(HarnessError::MissingKey("true_goal"))?;
        if true_goal > 9 {
            return Err(HarnessError::bad_value("true_goal", "must be a goal digit 0-9"));
        }
        let kind: AgentKind = parse_value("agent", kv.require("agent")?)?;
        let defaults = PolicyConfig::default();
        let agent = PolicyConfig {
            kind,
            alpha: kv.parsed_or("alpha", defaults.alpha)?,
            delta: kv.parsed_or("delta", defaults.delta)?,
            min_active: kv.parsed_or("min_active", defaults.min_active)?,
            kappa: kv.parsed_or("kappa", defaults.kappa)?,
            step_cap: kv.parsed("step_cap")?,
        };
        agent.validate()?;
        let checkpoints = match kv.get("checkpoints")? {
            Some(v) => list(v).map(|f| parse_value("checkpoints", f)).collect::<Result<Vec<f64>>>()?,
            None => default_checkpoints(),
        };
        let sc = Scenario {
            map_path,
            true_goal,
            agent,
            gamma: kv.parsed_or("gamma", 1.0)?,
            prior: kv.get("prior")?.map_or(Ok(PriorSpec::Uniform), PriorSpec::parse)?,
            seed: kv.parsed_or("seed", 0)?,
            checkpoints,
            boltzmann_beta: kv.parsed_or("boltzmann_beta", 1.0)?,
            tolerance: kv.parsed_or("tolerance", 1e-6)?,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_file(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.checkpoints.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
            return Err(HarnessError::bad_value("checkpoints", "fractions must lie in (0, 1)"));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::bad_value("checkpoints", "fractions must be strictly increasing"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(HarnessError::bad_value("gamma", "must lie in (0, 1]"));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(HarnessError::bad_value("tolerance", "must be positive"));
        }
        self.agent.validate()?;
        Ok(())
    }

    /// Loads the map and checks that `true_goal` names one of its goals.
    pub fn load_map(&self) -> Result<GridMap> {
        let map = GridMap::parse(&read_file(&self.map_path)?)?;
        if self.true_goal >= map.goals().len() {
            return Err(HarnessError::bad_value(
                "true_goal",
                format!("map has goals 0-{}", map.goals().len() - 1),
            ));
        }
        Ok(map)
    }

    /// Short name for CSV rows, e.g. `ambiguity` or `irrationality-0.5`.
    pub fn agent_label(&self) -> String {
        agent_label(&self.agent)
    }
}

pub(crate) fn agent_label(cfg: &PolicyConfig) -> String {
    match cfg.kind {
        AgentKind::Irrationality => format!("irrationality-{}", cfg.alpha),
        kind => kind.name().to_string(),
    }
}
