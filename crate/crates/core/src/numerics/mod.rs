//! Small numerical toolkit shared across the crate: adaptive quadrature,
//! Gauss-Legendre panels, root bracketing, cubic splines, and an adaptive
//! Runge-Kutta step for scalar ODEs.

mod ode;
mod quad;
mod roots;
mod spline;

pub use ode::{solve_scalar_ode, OdeError};
pub use quad::{adaptive_simpson, gauss_legendre_nodes, gauss_legendre_panel, QuadError};
pub use roots::{bisect, newton_bisect, BracketError};
pub use spline::CubicSpline;
