//! Equilibrium algebra for the zero-range + Glauber model: fugacity duality,
//! one-site marginals and sampling, ensemble averages, the reaction function
//! `f`, bistability and balance calibration, and adjoint identities against
//! inhomogeneous product measures.

mod adjoint;
mod balance;
mod curves;
mod glauber;
mod jump;
mod marginal;

pub use adjoint::adjoint_one;
pub use balance::{
    balance_residual_phi_space, balance_residual_rho_space, calibrate_balance, find_zeros,
    BistableZeros,
};
pub use curves::{CurveRep, ModelCurves};
pub use glauber::{
    ensemble_average, reaction_f_via_average, AveragePath, AverageResult, GlauberRateSpec,
    RateModel,
};
pub use jump::{JumpRate, JumpRateKind, TailRule};
pub use marginal::{fugacity, mean_density, partition_function, Marginal, K_CAP};

use crate::numerics::{BracketError, QuadError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RatesError {
    /// Series or inversion did not converge; usually signals `phi >= phi*`
    /// or a hard cap that is too small.
    #[error("non-convergent computation: {0}")]
    NonConvergent(String),
    #[error("invalid rate specification: {0}")]
    InvalidRate(String),
    #[error("bistability violated: found {found} sign changes, expected 3")]
    BistabilityViolated { found: usize },
    #[error("no sign change for balance residual on ({lo}, {hi})")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("exact ensemble average needs {states} states, budget is {budget}")]
    WindowTooLarge { states: u128, budget: u128 },
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Bracket(#[from] BracketError),
}
