//! Glauber+Zero-range interacting particle systems on the discrete torus,
//! the discretized nonlinear reaction-diffusion equation they track, and the
//! sharp-interface mean-curvature limit with its homogenized speed constant.
//!
//! The crate is organized in five layers:
//!
//! * [`rates`] — equilibrium algebra of the zero-range marginals (fugacity,
//!   sampling, ensemble averages), the Glauber reaction function, bistability
//!   calibration, and adjoint identities.
//! * [`sim`] — exact event-driven simulation of the Markov process with
//!   generator `N^2 L_ZR + K L_G`, plus empirical observables.
//! * [`pde`] — explicit integrator and diagnostics for the lattice equation
//!   `du/dt = lap_N(phi(u)) + K f(u)` and the generation envelopes.
//! * [`sharp`] — standing-wave profile, the potential `W`, the flow constant
//!   `lambda_0` via two independent formulas, and interface extraction.
//! * [`harness`] — experiment configs, orchestration, and metrics output.

pub mod harness;
pub mod numerics;
pub mod pde;
pub mod rates;
pub mod sharp;
pub mod sim;
