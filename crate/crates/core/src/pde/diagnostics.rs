use super::{FieldTrajectory, PdeError};
use crate::rates::ModelCurves;
use crate::sim::LatticeTorus;

/// Sup-norms of the macroscopic discrete derivatives:
/// `max |grad_N u|`, `max |grad_N grad_N u|`, `max |lap_N phi(u)|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeDiagnostics {
    pub grad_max: f64,
    pub grad2_max: f64,
    pub lap_phi_max: f64,
}

fn forward_grad(torus: &LatticeTorus, u: &[f64], axis: usize) -> Vec<f64> {
    let n = torus.side() as f64;
    (0..u.len())
        .map(|x| n * (u[torus.neighbor(x, axis, 1)] - u[x]))
        .collect()
}

/// Recorded, not asserted: the quantities whose sup-norm bounds control the
/// discrete evolution. Uses the forward difference `grad_i u(x) = N (u(x+e_i) - u(x))`.
pub fn derivative_diagnostics(
    torus: &LatticeTorus,
    u: &[f64],
    curves: &ModelCurves,
) -> DerivativeDiagnostics {
    let d = torus.dim();
    let mut grad_max: f64 = 0.0;
    let mut grad2_max: f64 = 0.0;
    let mut grads = Vec::with_capacity(d);
    for axis in 0..d {
        let g = forward_grad(torus, u, axis);
        grad_max = g.iter().fold(grad_max, |m, v| m.max(v.abs()));
        grads.push(g);
    }
    for g in &grads {
        for axis2 in 0..d {
            let gg = forward_grad(torus, g, axis2);
            grad2_max = gg.iter().fold(grad2_max, |m, v| m.max(v.abs()));
        }
    }
    let field = super::DensityField {
        torus: *torus,
        u: u.to_vec(),
        t: 0.0,
    };
    let lap = super::discrete_laplacian_phi(&field, curves);
    let lap_phi_max = lap.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    DerivativeDiagnostics {
        grad_max,
        grad2_max,
        lap_phi_max,
    }
}

/// Per-step residual of the exact identity
///
/// ```text
/// (1/2) d/dt sum_x u^2 = - sum_{i,x} grad_i u . grad_i phi(u) + K sum_x u f(u)
/// ```
///
/// evaluated with the forward-difference gradient and the left endpoint of
/// each step; for the Euler scheme the residual is O(dt).
///
/// The trajectory must carry every step (`snapshot_every = None`).
pub fn energy_identity_residuals(
    traj: &FieldTrajectory,
    k: f64,
    curves: &ModelCurves,
) -> Result<Vec<f64>, PdeError> {
    let torus = &traj.torus;
    let d = torus.dim();
    let n = torus.side() as f64;
    let n2 = n * n;
    let dt = traj.dt;
    for pair in traj.snapshots.windows(2) {
        if ((pair[1].t - pair[0].t) - dt).abs() > 1e-9 * dt.max(1e-300) {
            return Err(PdeError::InvalidInput(
                "energy residuals need a trajectory recorded at every step".into(),
            ));
        }
    }
    let inv_2dt = 0.5 / dt;
    let mut out = Vec::with_capacity(traj.snapshots.len().saturating_sub(1));
    for pair in traj.snapshots.windows(2) {
        let u = &pair[0].u;
        let u_next = &pair[1].u;
        let sum_sq: f64 = u.iter().map(|v| v * v).sum();
        let sum_sq_next: f64 = u_next.iter().map(|v| v * v).sum();
        let lhs = (sum_sq_next - sum_sq) * inv_2dt;

        let mut dissipation = 0.0;
        for axis in 0..d {
            for x in 0..u.len() {
                let y = torus.neighbor(x, axis, 1);
                let du = u[y] - u[x];
                let dphi = curves.phi_eval(u[y]) - curves.phi_eval(u[x]);
                dissipation += n2 * du * dphi;
            }
        }
        let reaction: f64 = u.iter().map(|&v| v * curves.f_eval(v)).sum();
        let rhs = -dissipation + k * reaction;
        out.push(lhs - rhs);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{solve, DensityField, PdeParams};
    use crate::rates::ModelCurves;

    fn cubic() -> ModelCurves {
        ModelCurves::synthetic_cubic(0.2, 0.5, 0.8, 4.0)
    }

    #[test]
    fn constant_field_has_zero_diagnostics() {
        let curves = cubic();
        let torus = LatticeTorus::new(2, 8);
        let diag = derivative_diagnostics(&torus, &vec![0.41; 64], &curves);
        assert!(diag.grad_max.abs() < 1e-10);
        assert!(diag.grad2_max.abs() < 1e-10);
        assert!(diag.lap_phi_max.abs() < 1e-8);
    }

    #[test]
    fn linear_ramp_has_constant_gradient_and_wrap_seam() {
        // u(x) = x/N: gradient 1 away from the seam, second derivative zero
        // away from the seam.
        let torus = LatticeTorus::new(1, 32);
        let u: Vec<f64> = (0..32).map(|x| x as f64 / 32.0).collect();
        let g = forward_grad(&torus, &u, 0);
        for x in 0..31 {
            assert!((g[x] - 1.0).abs() < 1e-12, "site {x}");
        }
        assert!((g[31] - (1.0 - 32.0)).abs() < 1e-9); // the seam
        let gg = forward_grad(&torus, &g, 0);
        for x in 0..30 {
            assert!(gg[x].abs() < 1e-9, "site {x}");
        }
    }

    #[test]
    fn smooth_profile_gradient_converges_in_n() {
        // max |grad_N u| approaches max |u0'| as N grows.
        let u0 = |v: f64| 0.5 + 0.2 * (2.0 * std::f64::consts::PI * v).sin();
        let sup_grad = 0.2 * 2.0 * std::f64::consts::PI;
        let curves = cubic();
        let mut errs = Vec::new();
        for n in [64usize, 256] {
            let torus = LatticeTorus::new(1, n);
            let u: Vec<f64> = (0..n).map(|x| u0(x as f64 / n as f64)).collect();
            let diag = derivative_diagnostics(&torus, &u, &curves);
            errs.push((diag.grad_max - sup_grad).abs());
        }
        assert!(errs[1] < errs[0], "no refinement: {errs:?}");
        assert!(errs[1] < 0.05 * sup_grad);
    }

    #[test]
    fn stationary_trajectory_has_zero_residual() {
        let curves = cubic();
        let torus = LatticeTorus::new(1, 16);
        let field = DensityField::constant(torus, 0.8);
        let params = PdeParams::from_cfl(&torus, 2.0, &curves, 0.25);
        let traj = solve(&field, &params, &curves, 20.0 * params.dt, None).unwrap();
        let res = energy_identity_residuals(&traj, 2.0, &curves).unwrap();
        assert!(res.iter().all(|r| r.abs() < 1e-9));
    }

    #[test]
    fn residual_halves_with_dt() {
        let curves = cubic();
        let torus = LatticeTorus::new(1, 32);
        let u: Vec<f64> = (0..32)
            .map(|x| 0.5 + 0.25 * (2.0 * std::f64::consts::PI * x as f64 / 32.0).cos())
            .collect();
        let field = DensityField::new(torus, u);
        let coarse = PdeParams::from_cfl(&torus, 4.0, &curves, 0.2);
        let fine = PdeParams {
            dt: coarse.dt / 2.0,
            ..coarse
        };
        let t_end = 64.0 * coarse.dt;
        let res_c = energy_identity_residuals(
            &solve(&field, &coarse, &curves, t_end, None).unwrap(),
            4.0,
            &curves,
        )
        .unwrap();
        let res_f = energy_identity_residuals(
            &solve(&field, &fine, &curves, t_end, None).unwrap(),
            4.0,
            &curves,
        )
        .unwrap();
        let max_c = res_c.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let max_f = res_f.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let ratio = max_c / max_f;
        assert!(
            (1.5..=2.5).contains(&ratio),
            "first-order ratio {ratio} (coarse {max_c}, fine {max_f})"
        );
    }

    #[test]
    fn dissipation_is_nonpositive_without_reaction() {
        // K = 0: (1/2) d/dt sum u^2 = -sum grad u . grad phi(u) <= 0 since
        // phi is increasing.
        let curves = cubic();
        let torus = LatticeTorus::new(1, 32);
        let u: Vec<f64> = (0..32)
            .map(|x| 0.5 + 0.2 * (2.0 * std::f64::consts::PI * x as f64 / 32.0).sin())
            .collect();
        let field = DensityField::new(torus, u);
        let params = PdeParams::from_cfl(&torus, 0.0, &curves, 0.25);
        let traj = solve(&field, &params, &curves, 50.0 * params.dt, None).unwrap();
        for pair in traj.snapshots.windows(2) {
            let a: f64 = pair[0].u.iter().map(|v| v * v).sum();
            let b: f64 = pair[1].u.iter().map(|v| v * v).sum();
            assert!(b <= a + 1e-12, "energy increased: {a} -> {b}");
        }
    }
}
