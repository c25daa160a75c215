//! Experiment orchestration: JSON configs with schema validation, metrics
//! output traceable to a config hash, and the cross-layer comparison
//! experiments (particles vs. PDE, PDE vs. sharp interface, two-formula
//! `lambda0` consistency).

mod config;
mod experiments;
mod metrics;

pub use config::{
    build_model, build_profile, replica_seed, AStar, BuiltModel, ExperimentConfig, GConfig,
    GenerationKnobs, GlauberConfig, LatticeConfig, ModelConfig, OneOrMany, PdeKnobs, ProfileSpec,
    PropagationKnobs,
};
pub use experiments::{
    exp_generation, exp_hydro, exp_lambda0, exp_propagation, init_thread_pool, ExperimentOutcome,
};
pub use metrics::{metrics_body, read_metrics, write_metrics, MetricsRow};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("schema error: {message}")]
    Schema { message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Rates(#[from] crate::rates::RatesError),
    #[error(transparent)]
    Pde(#[from] crate::pde::PdeError),
    #[error(transparent)]
    Sim(#[from] Box<crate::sim::SimError>),
    #[error(transparent)]
    Sharp(#[from] crate::sharp::SharpError),
    #[error("numerical interface vanished at t={t} before the reference law")]
    ExtinctEarly { t: f64 },
    #[error("{0}")]
    Invalid(String),
}
