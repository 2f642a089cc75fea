//! Sweeps: every (map, true goal, agent) combination, run in parallel and
//! written in input order.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::cache::load_or_train;
use super::kv::{list, parse_value, KeyValues};
use super::layout::{generate_layout, LayoutFamily, LayoutSpec};
use super::run::{csv_header, map_label, row_identity, run_with_tables, solver_config, CsvRow, RowMeasures};
use super::scenario::{agent_label, PriorSpec};
use super::{read_file, HarnessError, Result, Scenario};
use crate::mdp::{GridMap, Mdp};
use crate::metrics::default_checkpoints;
use crate::policy::{AgentKind, PolicyConfig};

const SWEEP_KEYS: &[&str] = &[
    "map",
    "generate",
    "instances",
    "width",
    "height",
    "goals",
    "density",
    "seed",
    "agents",
    "true_goals",
    "gamma",
    "delta",
    "min_active",
    "kappa",
    "step_cap",
    "prior",
    "boltzmann_beta",
    "tolerance",
];

#[derive(Debug, Clone, PartialEq)]
pub enum GoalSelection {
    All,
    Listed(Vec<usize>),
}

/// Generated maps in a sweep: `instances` seeds per family.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedMaps {
    pub families: Vec<LayoutFamily>,
    pub instances: usize,
    pub width: usize,
    pub height: usize,
    pub goals: usize,
    pub density: Option<f64>,
}

/// A parsed sweep file.
///
/// ```text
/// map = maps/a.txt          # repeatable, relative to the sweep file
/// generate = empty, archipelago
/// instances = 2
/// width = 25
/// height = 25
/// goals = 3
/// agents = honest, ambiguity, irrationality:0.3, irrationality:0.5
/// true_goals = all
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub maps: Vec<PathBuf>,
    pub generated: Option<GeneratedMaps>,
    pub agents: Vec<PolicyConfig>,
    pub true_goals: GoalSelection,
    pub gamma: f64,
    pub prior: PriorSpec,
    pub seed: u64,
    pub boltzmann_beta: f64,
    pub tolerance: f64,
}

impl SweepSpec {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        kv.check_keys(SWEEP_KEYS)?;
        let maps: Vec<PathBuf> = kv.all("map").map(|m| base_dir.join(m)).collect();

        let generated = match kv.get("generate")? {
            None => None,
            Some(families) => {
                let families = list(families).map(str::parse).collect::<Result<Vec<LayoutFamily>>>()?;
                Some(GeneratedMaps {
                    families,
                    instances: kv.parsed_or("instances", 1)?,
                    width: kv.parsed_or("width", 25)?,
                    height: kv.parsed_or("height", 25)?,
                    goals: kv.parsed_or("goals", 3)?,
                    density: kv.parsed("density")?,
                })
            }
        };

        let mut base = PolicyConfig::default();
        base.delta = kv.parsed_or("delta", base.delta)?;
        base.min_active = kv.parsed_or("min_active", base.min_active)?;
        base.kappa = kv.parsed_or("kappa", base.kappa)?;
        base.step_cap = kv.parsed("step_cap")?;
        let agents = match kv.get("agents")? {
            Some(v) => list(v).map(|a| parse_agent(a, base)).collect::<Result<Vec<_>>>()?,
            None => ["honest", "ambiguity", "irrationality:0.3", "irrationality:0.5"]
                .into_iter()
                .map(|a| parse_agent(a, base))
                .collect::<Result<Vec<_>>>()?,
        };

        let true_goals = match kv.get("true_goals")? {
            None | Some("all") => GoalSelection::All,
            Some(v) => GoalSelection::Listed(
                list(v).map(|g| parse_value("true_goals", g)).collect::<Result<Vec<usize>>>()?,
            ),
        };

        let spec = SweepSpec {
            maps,
            generated,
            agents,
            true_goals,
            gamma: kv.parsed_or("gamma", 1.0)?,
            prior: kv.get("prior")?.map_or(Ok(PriorSpec::Uniform), PriorSpec::parse)?,
            seed: kv.parsed_or("seed", 0)?,
            boltzmann_beta: kv.parsed_or("boltzmann_beta", 1.0)?,
            tolerance: kv.parsed_or("tolerance", 1e-6)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_file(path)?, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.maps.is_empty() && self.generated.is_none() {
            return Err(HarnessError::bad_value("map", "sweep lists no maps and generates none"));
        }
        if self.agents.is_empty() {
            return Err(HarnessError::bad_value("agents", "no agents listed"));
        }
        if let Some(g) = &self.generated {
            if g.families.is_empty() || g.instances == 0 {
                return Err(HarnessError::bad_value("generate", "needs at least one family and instance"));
            }
            // checked now so that a bad size fails before any work starts
            let mut probe = LayoutSpec::new(g.families[0], g.width, g.height, g.goals, self.seed);
            if let Some(d) = g.density {
                probe.obstacle_density = d;
            }
            probe.validate()?;
        }
        if let GoalSelection::Listed(goals) = &self.true_goals {
            if goals.is_empty() || goals.iter().any(|&g| g > 9) {
                return Err(HarnessError::bad_value("true_goals", "expected `all` or goal digits"));
            }
        }
        self.scenario_template(PathBuf::new(), 0, self.agents[0]).validate()
    }

    fn scenario_template(&self, map_path: PathBuf, true_goal: usize, agent: PolicyConfig) -> Scenario {
        Scenario {
            map_path,
            true_goal,
            agent,
            gamma: self.gamma,
            prior: self.prior.clone(),
            seed: self.seed,
            checkpoints: default_checkpoints(),
            boltzmann_beta: self.boltzmann_beta,
            tolerance: self.tolerance,
        }
    }

    /// Loads listed maps and generates the rest, in sweep order.
    fn maps(&self) -> Result<Vec<(String, PathBuf, GridMap)>> {
        let mut out = Vec::new();
        for path in &self.maps {
            let map = GridMap::parse(&read_file(path)?)
                .map_err(|e| HarnessError::Scenario { id: path.display().to_string(), source: Box::new(e.into()) })?;
            out.push((map_label(path), path.clone(), map));
        }
        if let Some(g) = &self.generated {
            for &family in &g.families {
                for i in 0..g.instances {
                    let mut spec = LayoutSpec::new(family, g.width, g.height, g.goals, self.seed.wrapping_add(i as u64));
                    if let Some(d) = g.density {
                        spec.obstacle_density = d;
                    }
                    let label = spec.label();
                    out.push((label.clone(), PathBuf::from(&label), generate_layout(&spec)?));
                }
            }
        }
        Ok(out)
    }
}

/// `honest`, `ambiguity`, `irrationality` or `irrationality:<alpha>`.
fn parse_agent(text: &str, base: PolicyConfig) -> Result<PolicyConfig> {
    let (name, alpha) = match text.split_once(':') {
        Some((n, a)) => (n.trim(), Some(parse_value::<f64>("agents", a.trim())?)),
        None => (text, None),
    };
    let kind: AgentKind = parse_value("agents", name)?;
    if alpha.is_some() && kind != AgentKind::Irrationality {
        return Err(HarnessError::bad_value("agents", format!("only irrationality takes a weight: {text:?}")));
    }
    let cfg = PolicyConfig { kind, alpha: alpha.unwrap_or(base.alpha), ..base };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub rows: Vec<CsvRow>,
    pub summary: Vec<String>,
}

impl BatchOutput {
    /// Header, data rows, then summary rows, newline-terminated.
    pub fn to_csv(&self) -> String {
        let mut out = csv_header();
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.to_line());
            out.push('\n');
        }
        for line in &self.summary {
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    pub fn error_count(&self) -> usize {
        self.rows.iter().filter(|r| r.result.is_none()).count()
    }
}

/// Runs the whole sweep on `workers` threads (all cores when `None`).
/// Failed scenarios become error rows and are reported on stderr.
pub fn run_batch(spec: &SweepSpec, workers: Option<usize>, cache: Option<&Path>) -> Result<BatchOutput> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::bad_value("workers", e.to_string()))?;
    pool.install(|| run_batch_inner(spec, cache))
}

fn run_batch_inner(spec: &SweepSpec, cache: Option<&Path>) -> Result<BatchOutput> {
    let maps = spec.maps()?;
    let solver = solver_config(&spec.scenario_template(PathBuf::new(), 0, spec.agents[0]));

    let tables: Vec<_> = maps
        .par_iter()
        .map(|(_, _, map)| {
            let mdp = Mdp::new(map.clone(), 0, spec.gamma)?;
            let q = load_or_train(&mdp, &solver, cache)?;
            Ok::<_, HarnessError>((mdp, q))
        })
        .collect();

    let mut units = Vec::new();
    for (m, (label, path, map)) in maps.iter().enumerate() {
        let goals: Vec<usize> = match &spec.true_goals {
            GoalSelection::All => (0..map.goals().len()).collect(),
            GoalSelection::Listed(g) => g.clone(),
        };
        for &g in &goals {
            for &agent in &spec.agents {
                let sc = spec.scenario_template(path.clone(), g, agent);
                let id = format!("{label}:g{g}:{}", agent_label(&agent));
                units.push((m, label.as_str(), sc, id));
            }
        }
    }

    let rows: Vec<CsvRow> = units
        .par_iter()
        .map(|(m, label, sc, id)| {
            let result = match &tables[*m] {
                Ok((mdp, q)) => {
                    if sc.true_goal >= q.len() {
                        Err(HarnessError::bad_value("true_goals", format!("map has {} goals", q.len())))
                    } else {
                        run_with_tables(sc, mdp, q, label, id).map(|o| o.row)
                    }
                }
                Err(e) => Err(HarnessError::bad_value("map", e.to_string())),
            };
            result.unwrap_or_else(|e| {
                eprintln!("error: scenario {id}: {e}");
                row_identity(sc, label, id)
            })
        })
        .collect();

    let summary = summary_rows(&rows, spec);
    Ok(BatchOutput { rows, summary })
}

/// One `summary:<agent>` line per agent, in sweep order. Measure cells hold
/// `mean;sd` (sample standard deviation) over that agent's successful rows;
/// `truncated` holds the truncated fraction in the same form.
pub fn summary_rows(rows: &[CsvRow], spec: &SweepSpec) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen = Vec::new();
    for agent in &spec.agents {
        let label = agent_label(agent);
        if seen.contains(&label) {
            continue;
        }
        seen.push(label.clone());
        let measures: Vec<&RowMeasures> =
            rows.iter().filter(|r| r.agent == label).filter_map(|r| r.result.as_ref()).collect();
        let mut line = format!(
            "summary:{label},all,{label},{},{},{},{}",
            agent.alpha, agent.delta, spec.gamma, spec.seed
        );
        let columns: [fn(&RowMeasures) -> f64; 7] = [
            |r| f64::from(u8::from(r.metrics.truncated)),
            |r| r.metrics.path_cost,
            |r| r.metrics.optimal_cost,
            |r| r.metrics.cost_ratio,
            |r| r.metrics.simulation_value,
            |r| r.metrics.ldp_index as f64,
            |r| r.metrics.non_deceptive_fraction,
        ];
        for col in columns {
            push_stat(&mut line, measures.iter().map(|r| col(r)));
        }
        for k in 0..9 {
            push_stat(&mut line, measures.iter().map(|r| r.deciles[k]));
        }
        out.push(line);
    }
    out
}

fn push_stat(line: &mut String, values: impl Iterator<Item = f64>) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        line.push(',');
        return;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let _ = write!(line, ",{mean};{sd}");
}
