//! Sharp-interface layer: the standing-wave profile `U0`, the potential `W`,
//! the flow constant `lambda_0` by two independent formulas, the
//! shrinking-circle reference law, and interface extraction from lattice
//! fields.

mod interface;
mod potential;
mod profile;

pub use interface::{extract_interface, signed_distance_circle, Interface};
pub use potential::{lambda0_intrinsic, potential_w, PotentialW};
pub use profile::{lambda0_profile, profile_ode_residual, wave_profile, WaveProfile};

use crate::numerics::QuadError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SharpError {
    #[error(transparent)]
    QuadratureFailure(#[from] QuadError),
    #[error("endpoint {which} is not a simple stable zero: f' = {df}")]
    EndpointSingularity { which: &'static str, df: f64 },
    #[error("profile tails unresolved: tail fraction {tail_fraction} of the integral")]
    TailUnresolved { tail_fraction: f64 },
    #[error("field does not cross the level alpha*")]
    NoCrossing,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// The mean-curvature speed constant by both routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConstant {
    pub intrinsic: f64,
    pub profile: f64,
}

/// Compute `lambda_0` by the intrinsic ratio of `W`-integrals and by the
/// standing-wave quadrature, for cross-validation.
pub fn flow_constant(
    curves: &crate::rates::ModelCurves,
    n_nodes: usize,
) -> Result<FlowConstant, SharpError> {
    let intrinsic = lambda0_intrinsic(curves)?;
    let prof = wave_profile(curves, None, n_nodes)?;
    let profile = lambda0_profile(&prof, curves)?;
    Ok(FlowConstant { intrinsic, profile })
}

/// Radius of the shrinking sphere under `V = lambda0 kappa`:
/// `R(t) = sqrt(R0^2 - 2 lambda0 (d-1) t)`; `None` once extinct.
pub fn mcf_radius(t: f64, r0: f64, d: usize, lambda0: f64) -> Option<f64> {
    assert!(r0 > 0.0 && d >= 2);
    let radicand = r0 * r0 - 2.0 * lambda0 * (d as f64 - 1.0) * t;
    if radicand > 0.0 {
        Some(radicand.sqrt())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mcf_radius_closed_forms() {
        assert_eq!(mcf_radius(0.0, 0.25, 2, 1.0), Some(0.25));
        // Radicand exactly zero is extinct.
        assert_eq!(mcf_radius(0.03125, 0.25, 2, 1.0), None);
        let r = mcf_radius(0.01, 0.3, 3, 1.0).unwrap();
        assert!((r - 0.05f64.sqrt()).abs() < 1e-14);
    }
}
