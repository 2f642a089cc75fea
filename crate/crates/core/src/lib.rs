//! Deceptive policies for deterministic grid-world MDPs.
//!
//! Given pre-trained Q-tables for every candidate reward function, the crate
//! synthesizes an honest, an ambiguity (entropy-maximizing) and an
//! irrationality-weighted policy, and scores them against a naive Boltzmann
//! goal-recognition observer.

pub mod harness;
pub mod mdp;
pub mod metrics;
pub mod observer;
pub mod policy;
pub mod solver;

pub use mdp::{Action, Cell, GridMap, Mdp, MdpError, ObservationSequence, RewardFunction};
pub use observer::{BoltzmannObserver, PosteriorSnapshot, PriorDistribution};
pub use policy::{AgentKind, Episode, PolicyConfig, PolicyState};
pub use solver::{QTable, SolverConfig};
