//! Discrete-time simulator of an evolving service ecosystem.
//!
//! Users at the habitats of a small-world network issue requests for
//! applications. Each request starts a local evolutionary search over the
//! agents (services) available at its habitat. Successful applications are
//! cached and migrate to neighbouring habitats, and the connections that
//! carry useful migrants are strengthened. The statistics layer compares
//! the evolved applications against the distributions that drove the
//! requests.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod driver;
pub mod error;
pub mod evolution;
pub mod habitat;
pub mod model;
pub mod stats;
pub mod userbase;

pub use config::{figure_config, validate_config, ExperimentConfig, Profile};
pub use driver::{
    replicate_figure, run_experiment, run_simulation, ExperimentOutcome, ExperimentSummary, Overrides,
    RunResult,
};
pub use error::{EcoError, Result};
pub use evolution::{run_evolution, EvolutionParams, EvolutionResult};
pub use habitat::{build_topology, HabitatNetwork};
pub use model::{semantic_distance, Agent, Aggregation, AttributeSet, Request, Task};
pub use stats::{analyze, ChiSquareReport, Histogram};
pub use userbase::{DistributionKind, DistributionSpec};
