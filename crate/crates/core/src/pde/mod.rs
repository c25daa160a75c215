//! Explicit integrator and diagnostics for the discretized hydrodynamic
//! equation `du/dt = lap_N phi(u) + K f(u)` on the torus, together with the
//! comparison check, the a-priori energy identity, and the generation
//! envelopes built from the reaction ODE.

mod diagnostics;
mod io;
mod ode;
mod stepper;

pub use diagnostics::{
    derivative_diagnostics, energy_identity_residuals, DerivativeDiagnostics,
};
pub use io::{write_field_snapshot_binary, write_field_trajectory_csv};
pub use ode::{default_c4, envelope_c4, generation_envelopes, ode_y};
pub use stepper::{
    comparison_check, discrete_laplacian_phi, solve, step_euler, step_function_view,
    ComparisonReport, DensityField, FieldSnapshot, FieldTrajectory, PdeParams, Violation,
};

use crate::numerics::OdeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PdeError {
    #[error("CFL violation: dt={dt} exceeds stability bound {bound}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("reaction ODE failure: {0}")]
    StepFailure(#[from] OdeError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
