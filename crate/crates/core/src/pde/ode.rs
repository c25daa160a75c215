use rayon::prelude::*;

use super::PdeError;
use crate::numerics::solve_scalar_ode;
use crate::rates::ModelCurves;
use crate::sim::LatticeTorus;

const Y_REL_TOL: f64 = 1e-10;
const Y_ABS_TOL: f64 = 1e-12;

/// The reaction flow field, with its argument clamped to the working
/// interval so spline extrapolation can never feed the integrator garbage;
/// outside the interval the clamped rate still points back inside.
fn flow<'c>(curves: &'c ModelCurves) -> impl Fn(f64) -> f64 + 'c {
    let (lo, hi) = curves.domain;
    move |y: f64| curves.f_eval(y.clamp(lo, hi))
}

/// `Y(tau_end, zeta)`: the reaction flow `Y' = f(Y)`, `Y(0) = zeta`.
///
/// The solution is monotone toward the nearest stable level and stays inside
/// `[zeta /\ alpha-, zeta \/ alpha+]`.
pub fn ode_y(curves: &ModelCurves, tau_end: f64, zeta: f64) -> Result<f64, PdeError> {
    if !(zeta >= 0.0) {
        return Err(PdeError::InvalidInput(format!("zeta={zeta} must be >= 0")));
    }
    Ok(solve_scalar_ode(&flow(curves), zeta, tau_end, Y_REL_TOL, Y_ABS_TOL)?)
}

/// Spec default envelope margin constant `C4 = 2 max|f| / gamma`; adequate
/// for order-one-smooth profiles.
pub fn default_c4(curves: &ModelCurves) -> f64 {
    2.0 * curves.max_abs_f / curves.gamma
}

/// Effective envelope constant for a concrete initial profile, following
/// the sub/super-solution computation: the margin rate `P'(t) = C4 gamma
/// e^{gamma K t}` must dominate
///
/// ```text
/// phi''(w) |grad u0|^2 Y_zeta + phi'(w) lap u0 + phi'(w) |grad u0|^2 Y_zz/Y_z
/// ```
///
/// with `Y_zeta <= C1 e^{gamma tau}` and `|Y_zz/Y_z| <= C2 (e^{gamma tau}-1)`.
/// `C1`, `C2` are probed numerically from the actual flow; the profile
/// derivatives are the discrete ones.
pub fn envelope_c4(curves: &ModelCurves, torus: &LatticeTorus, u0: &[f64], k: f64) -> f64 {
    let d = torus.dim();
    let n = torus.side() as f64;
    let mut grad_max: f64 = 0.0;
    let mut lap_max: f64 = 0.0;
    for x in 0..u0.len() {
        let mut lap = -2.0 * d as f64 * u0[x];
        for axis in 0..d {
            let up = u0[torus.neighbor(x, axis, 1)];
            let down = u0[torus.neighbor(x, axis, -1)];
            grad_max = grad_max.max((n * (up - u0[x])).abs());
            lap += up + down;
        }
        lap_max = lap_max.max((n * n * lap).abs());
    }

    // Probe C1 and C2 over the working interval up to the generation horizon.
    let tau_max = k.ln() / (2.0 * curves.gamma);
    let f = flow(curves);
    let (lo, hi) = curves.domain;
    let h = 1e-6 * (hi - lo);
    let mut c1: f64 = 1.0;
    let mut c2: f64 = 0.1;
    for ti in 1..=6 {
        let tau = tau_max * ti as f64 / 6.0;
        let growth = (curves.gamma * tau).exp();
        for zi in 0..=40 {
            let zeta = lo + (hi - lo) * zi as f64 / 40.0;
            let y0 = solve_scalar_ode(&f, zeta - h, tau, Y_REL_TOL, Y_ABS_TOL);
            let y1 = solve_scalar_ode(&f, zeta, tau, Y_REL_TOL, Y_ABS_TOL);
            let y2 = solve_scalar_ode(&f, zeta + h, tau, Y_REL_TOL, Y_ABS_TOL);
            if let (Ok(y0), Ok(y1), Ok(y2)) = (y0, y1, y2) {
                let dz = (y2 - y0) / (2.0 * h);
                let dzz = (y2 - 2.0 * y1 + y0) / (h * h);
                if dz > 1e-12 {
                    c1 = c1.max(dz / growth);
                    c2 = c2.max((dzz / dz).abs() / (growth - 1.0).max(1e-9));
                }
            }
        }
    }

    let mut phi2_max: f64 = 0.0;
    for i in 0..=256 {
        let u = lo + (hi - lo) * i as f64 / 256.0;
        phi2_max = phi2_max.max(curves.phi.deriv2(u).abs());
    }
    let needed = phi2_max * grad_max * grad_max * c1
        + curves.phi_lip * grad_max * grad_max * c2
        + curves.phi_lip * lap_max;
    (1.25 * needed / curves.gamma).max(default_c4(curves))
}

/// Generation envelopes
/// `w_pm(t, x) = Y(K t, u0(x) pm P(t))` with `P(t) = C4 (e^{gamma K t} - 1)/K`,
/// valid up to the generation horizon `t^N = log K / (2 gamma K)`.
///
/// Returns `(w_minus, w_plus)` as site vectors matching `u0`.
pub fn generation_envelopes(
    curves: &ModelCurves,
    u0: &[f64],
    k: f64,
    c4: f64,
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>), PdeError> {
    if !(k > 1.0) {
        return Err(PdeError::InvalidInput(format!("K={k} must exceed 1")));
    }
    if !(c4 > 0.0) {
        return Err(PdeError::InvalidInput(format!("C4={c4} must be > 0")));
    }
    let t_gen = curves.t_generation(k);
    if t > t_gen * (1.0 + 1e-9) {
        return Err(PdeError::InvalidInput(format!(
            "t={t} beyond generation horizon t^N={t_gen}"
        )));
    }
    let p = c4 * ((curves.gamma * k * t).exp() - 1.0) / k;
    let tau = k * t;
    let f = flow(curves);
    let solve_at = |zeta: f64| -> Result<f64, PdeError> {
        let zeta = zeta.max(0.0);
        Ok(solve_scalar_ode(&f, zeta, tau, Y_REL_TOL, Y_ABS_TOL)?)
    };
    let minus: Result<Vec<f64>, PdeError> = u0
        .par_iter()
        .map(|&v| solve_at(v - p))
        .collect();
    let plus: Result<Vec<f64>, PdeError> = u0
        .par_iter()
        .map(|&v| solve_at(v + p))
        .collect();
    Ok((minus?, plus?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> ModelCurves {
        ModelCurves::synthetic_cubic(0.2, 0.5, 0.8, 4.0)
    }

    #[test]
    fn stable_levels_are_equilibria() {
        let c = cubic();
        for level in [0.2, 0.8] {
            let y = ode_y(&c, 3.0, level).unwrap();
            assert!((y - level).abs() < 1e-9, "level {level} moved to {y}");
        }
    }

    #[test]
    fn flow_escapes_the_unstable_level_monotonically() {
        let c = cubic();
        let mut prev = 0.52;
        for tau in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 40.0] {
            let y = ode_y(&c, tau, 0.52).unwrap();
            assert!(y >= prev - 1e-12, "not monotone at tau={tau}");
            prev = y;
        }
        assert!((prev - 0.8).abs() < 1e-6, "did not saturate: {prev}");
        // Below the unstable zero it flows down instead.
        let y = ode_y(&c, 40.0, 0.48).unwrap();
        assert!((y - 0.2).abs() < 1e-6);
    }

    #[test]
    fn flow_stays_in_the_pinched_interval() {
        let c = cubic();
        for zeta in [0.05, 0.3, 0.55, 0.9, 1.1] {
            for tau in [0.1, 1.0, 10.0] {
                let y = ode_y(&c, tau, zeta).unwrap();
                let lo = zeta.min(c.alpha_minus) - 1e-9;
                let hi = zeta.max(c.alpha_plus) + 1e-9;
                assert!(y >= lo && y <= hi, "zeta={zeta}, tau={tau}, y={y}");
            }
        }
    }

    #[test]
    fn zeta_sensitivity_respects_exponential_bounds() {
        // Finite-difference Y_zeta between e^{-gamma_bar tau} and C e^{gamma tau}.
        let c = cubic();
        let h = 1e-7;
        for zeta in [0.35, 0.5, 0.62] {
            for tau in [0.5, 1.5, 3.0] {
                let up = ode_y(&c, tau, zeta + h).unwrap();
                let down = ode_y(&c, tau, zeta - h).unwrap();
                let dy = (up - down) / (2.0 * h);
                let lower = (-c.gamma_bar * tau).exp();
                let upper = 50.0 * (c.gamma * tau).exp();
                assert!(
                    dy > lower * 0.9 && dy < upper,
                    "zeta={zeta}, tau={tau}: Y_zeta={dy}, bounds ({lower}, {upper})"
                );
            }
        }
    }

    #[test]
    fn envelopes_at_time_zero_reproduce_the_profile() {
        let c = cubic();
        let u0 = vec![0.3, 0.5, 0.75];
        let (lo, hi) = generation_envelopes(&c, &u0, 16.0, default_c4(&c), 0.0).unwrap();
        for i in 0..3 {
            assert!((lo[i] - u0[i]).abs() < 1e-9);
            assert!((hi[i] - u0[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn envelopes_stay_ordered() {
        let c = cubic();
        let u0: Vec<f64> = (0..40).map(|i| 0.25 + 0.5 * i as f64 / 39.0).collect();
        let k = 16.0;
        let t_gen = c.t_generation(k);
        for frac in [0.25, 0.6, 1.0] {
            let (lo, hi) =
                generation_envelopes(&c, &u0, k, default_c4(&c), frac * t_gen).unwrap();
            for i in 0..u0.len() {
                assert!(lo[i] <= hi[i] + 1e-12, "crossed at {i}");
            }
        }
    }

    #[test]
    fn horizon_is_enforced() {
        let c = cubic();
        let k = 16.0;
        let too_late = 1.5 * c.t_generation(k);
        assert!(matches!(
            generation_envelopes(&c, &[0.5], k, 1.0, too_late),
            Err(PdeError::InvalidInput(_))
        ));
    }

    #[test]
    fn effective_c4_grows_with_profile_steepness() {
        let c = cubic();
        let torus = LatticeTorus::new(1, 64);
        let flat = vec![0.5; 64];
        let steep: Vec<f64> = (0..64)
            .map(|x| 0.5 + 0.29 * (2.0 * std::f64::consts::PI * x as f64 / 64.0).sin())
            .collect();
        let c4_flat = envelope_c4(&c, &torus, &flat, 16.0);
        let c4_steep = envelope_c4(&c, &torus, &steep, 16.0);
        assert!(c4_flat >= default_c4(&c));
        assert!(c4_steep > c4_flat, "{c4_steep} vs {c4_flat}");
    }
}
