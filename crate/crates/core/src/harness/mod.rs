//! Experiment harness: scenario and sweep files, layout generation, episode
//! execution, CSV output, Q-table caching and SVG rendering.

mod batch;
mod cache;
mod kv;
mod layout;
mod render;
mod run;
mod scenario;
mod trace;

use std::path::PathBuf;

use thiserror::Error;

use crate::mdp::MdpError;
use crate::metrics::MetricsError;
use crate::observer::ObserverError;
use crate::policy::PolicyError;
use crate::solver::{CacheError, SolverError};

pub use batch::{run_batch, summary_rows, BatchOutput, SweepSpec};
pub use cache::{cache_dir, cache_file_name, load_or_train, train_to_cache, CACHE_ENV};
pub use kv::KeyValues;
pub use layout::{generate_layout, generate_layout_detailed, GeneratedLayout, LayoutFamily, LayoutSpec};
pub use render::render_svg;
pub use run::{csv_header, run_scenario, CsvRow, ScenarioOutcome};
pub use scenario::{PriorSpec, Scenario};
pub use trace::{parse_trace, write_trace, TraceFile};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("`{key}`: {message}")]
    BadValue { key: String, message: String },
    #[error(transparent)]
    Map(#[from] MdpError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Observer(#[from] ObserverError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("layout generation failed after {attempts} attempts (seed {seed})")]
    LayoutFailed { seed: u64, attempts: usize },
    #[error("scenario {id}: {source}")]
    Scenario {
        id: String,
        #[source]
        source: Box<HarnessError>,
    },
}

impl HarnessError {
    pub(crate) fn bad_value(key: &str, message: impl Into<String>) -> Self {
        HarnessError::BadValue { key: key.to_string(), message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

/// Reads a UTF-8 file, naming the path on failure.
pub fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}
