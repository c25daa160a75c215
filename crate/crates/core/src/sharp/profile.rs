use super::potential::PotentialW;
use super::SharpError;
use crate::numerics::{gauss_legendre_panel, newton_bisect};
use crate::rates::ModelCurves;

/// Standing wave `U0` on a uniform z-grid: the monotone connection with
/// `U0(-inf) = alpha+`, `U0(0) = alpha*`, `U0(inf) = alpha-`, together with
/// `U0_z` from the first integral `phi(U0)_z = -sqrt(2 W(U0))`.
#[derive(Debug, Clone)]
pub struct WaveProfile {
    pub z: Vec<f64>,
    pub u0: Vec<f64>,
    pub u0_z: Vec<f64>,
    pub alpha_minus: f64,
    pub alpha_star: f64,
    pub alpha_plus: f64,
    /// Linearized tail rates `sqrt(-f'(alpha_pm)/phi'(alpha_pm))`.
    pub kappa_minus: f64,
    pub kappa_plus: f64,
}

/// Geometric clustering toward the endpoints stops at this offset.
const ENDPOINT_CUTOFF: f64 = 1e-10;
/// Subsegments per dyadic level of the u-ladder.
const SUBSEG: usize = 6;
const GL_ORDER: usize = 16;

/// Construct the wave profile by the u-substitution
/// `z(u) = -int_{alpha*}^{u} phi'(s) / sqrt(2 W(s)) ds`,
/// accumulated on a u-grid clustered geometrically at the endpoints (where
/// `z` diverges logarithmically), then inverted onto a uniform z-grid
/// clipped to `z_half_width` (auto-sized to resolve the tails if `None`).
pub fn wave_profile(
    curves: &ModelCurves,
    z_half_width: Option<f64>,
    n_nodes: usize,
) -> Result<WaveProfile, SharpError> {
    assert!(n_nodes >= 16);
    let (am, astar, ap) = (curves.alpha_minus, curves.alpha_star, curves.alpha_plus);
    let df_minus = curves.f_deriv(am);
    let df_plus = curves.f_deriv(ap);
    if df_minus >= 0.0 {
        return Err(SharpError::EndpointSingularity {
            which: "alpha-",
            df: df_minus,
        });
    }
    if df_plus >= 0.0 {
        return Err(SharpError::EndpointSingularity {
            which: "alpha+",
            df: df_plus,
        });
    }
    let kappa_minus = (-df_minus / curves.phi_deriv(am)).sqrt();
    let kappa_plus = (-df_plus / curves.phi_deriv(ap)).sqrt();

    let w = PotentialW::new(curves)?;
    // z'(u), negative for u > alpha*.
    let dz_du = |u: f64| -curves.phi_deriv(u) / (2.0 * w.eval(u)).sqrt();

    // Cumulative (u, z) tables on both sides of alpha*.
    let right = accumulate_side(&dz_du, astar, ap);
    let left = accumulate_side(&dz_du, astar, am);

    // Merge sorted by z ascending (u descending): right side reversed, then
    // the left side without its duplicate alpha* entry.
    let mut table: Vec<(f64, f64)> = Vec::with_capacity(right.len() + left.len());
    table.extend(right.iter().rev().map(|&(u, z)| (u, z)));
    table.extend(left.iter().skip(1).map(|&(u, z)| (u, z)));

    let z_min = table.first().unwrap().1;
    let z_max = table.last().unwrap().1;
    let z_half = match z_half_width {
        Some(v) => {
            if !(v > 0.0) {
                return Err(SharpError::InvalidInput(format!("z_half_width={v}")));
            }
            v.min(-z_min * 0.999).min(z_max * 0.999)
        }
        None => {
            // Resolve both tails to ~1e-8 of the amplitude.
            let auto = 18.5 / kappa_minus.min(kappa_plus);
            auto.min(-z_min * 0.999).min(z_max * 0.999)
        }
    };

    let mut z_grid = Vec::with_capacity(n_nodes);
    let mut u_vals = Vec::with_capacity(n_nodes);
    let mut u0_z = Vec::with_capacity(n_nodes);
    for i in 0..n_nodes {
        let z_t = -z_half + 2.0 * z_half * i as f64 / (n_nodes - 1) as f64;
        let u = invert_z(&table, &dz_du, z_t, astar)?;
        z_grid.push(z_t);
        u0_z.push(-(2.0 * w.eval(u)).sqrt() / curves.phi_deriv(u));
        u_vals.push(u);
    }

    Ok(WaveProfile {
        z: z_grid,
        u0: u_vals,
        u0_z,
        alpha_minus: am,
        alpha_star: astar,
        alpha_plus: ap,
        kappa_minus,
        kappa_plus,
    })
}

/// Accumulate `(u, z)` from `alpha*` toward `target`, halving the distance
/// to the endpoint at each level down to the cutoff.
fn accumulate_side<F: Fn(f64) -> f64>(dz_du: &F, astar: f64, target: f64) -> Vec<(f64, f64)> {
    let span = target - astar;
    let levels = ((span.abs() / ENDPOINT_CUTOFF).log2().ceil() as usize).max(1);
    let mut out = vec![(astar, 0.0)];
    let mut u_prev = astar;
    let mut z_acc = 0.0;
    for level in 1..=levels {
        let u_level = target - span * 0.5f64.powi(level as i32);
        let step = (u_level - u_prev) / SUBSEG as f64;
        for s in 1..=SUBSEG {
            let u_next = u_prev + step * s as f64;
            let a = u_prev + step * (s - 1) as f64;
            z_acc += gauss_legendre_panel(dz_du, a, u_next, GL_ORDER);
            out.push((u_next, z_acc));
        }
        u_prev = u_level;
    }
    out
}

/// Solve `z(u) = z_t` inside the bracketing table interval by safeguarded
/// Newton on the partial quadrature from the nearest table node.
fn invert_z<F: Fn(f64) -> f64>(
    table: &[(f64, f64)],
    dz_du: &F,
    z_t: f64,
    astar: f64,
) -> Result<f64, SharpError> {
    if z_t == 0.0 {
        return Ok(astar);
    }
    let idx = table.partition_point(|&(_, z)| z < z_t);
    if idx == 0 || idx >= table.len() {
        return Err(SharpError::InvalidInput(format!(
            "z={z_t} outside the resolved window"
        )));
    }
    let (u_hi, z_lo) = table[idx - 1]; // smaller z, larger u
    let (u_lo, z_hi) = table[idx];
    if z_hi == z_t {
        return Ok(u_lo);
    }
    let partial = |u: f64| z_lo + gauss_legendre_panel(dz_du, u_hi, u, GL_ORDER) - z_t;
    // u decreases as z increases: bracket is [u_lo, u_hi].
    let root = newton_bisect(&partial, dz_du, u_lo, u_hi, 1e-15, 120)
        .map_err(|e| SharpError::InvalidInput(format!("profile inversion failed: {e}")))?;
    let _ = z_hi;
    Ok(root)
}

/// `lambda0` from the standing wave:
/// `int (phi'(U0) U0_z)^2 dz / int phi'(U0) U0_z^2 dz`, trapezoid on the
/// z-grid. Errors with `TailUnresolved` if the estimated truncated tails
/// exceed 1e-6 of either integral.
pub fn lambda0_profile(profile: &WaveProfile, curves: &ModelCurves) -> Result<f64, SharpError> {
    let n = profile.z.len();
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    for i in 0..n {
        let dphi = curves.phi_deriv(profile.u0[i]);
        let a = dphi * profile.u0_z[i];
        num[i] = a * a;
        den[i] = dphi * profile.u0_z[i] * profile.u0_z[i];
    }
    let trap = |v: &[f64]| -> f64 {
        let h = profile.z[1] - profile.z[0];
        let inner: f64 = v[1..n - 1].iter().sum();
        h * (0.5 * v[0] + inner + 0.5 * v[n - 1])
    };
    let i_num = trap(&num);
    let i_den = trap(&den);
    // Exponential tails: each integrand decays like e^{-2 kappa |z|}.
    let tail_num = num[0] / (2.0 * profile.kappa_plus) + num[n - 1] / (2.0 * profile.kappa_minus);
    let tail_den = den[0] / (2.0 * profile.kappa_plus) + den[n - 1] / (2.0 * profile.kappa_minus);
    let frac = (tail_num / i_num).max(tail_den / i_den);
    if frac > 1e-6 {
        return Err(SharpError::TailUnresolved {
            tail_fraction: frac,
        });
    }
    Ok(i_num / i_den)
}

/// Sup-norm of the profile equation residual `(phi(U0))_zz + f(U0)` by
/// central differences, over the interior fraction of the grid (defaults to
/// skipping 5% on each end).
pub fn profile_ode_residual(profile: &WaveProfile, curves: &ModelCurves) -> f64 {
    let n = profile.z.len();
    let h = profile.z[1] - profile.z[0];
    let skip = n / 20;
    let mut worst: f64 = 0.0;
    for i in (1 + skip)..(n - 1 - skip) {
        let lap = (curves.phi_eval(profile.u0[i + 1]) - 2.0 * curves.phi_eval(profile.u0[i])
            + curves.phi_eval(profile.u0[i - 1]))
            / (h * h);
        worst = worst.max((lap + curves.f_eval(profile.u0[i])).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sharp::lambda0_intrinsic;

    fn cubic(scale: f64) -> ModelCurves {
        ModelCurves::synthetic_cubic(0.2, 0.5, 0.8, scale)
    }

    #[test]
    fn profile_hits_alpha_star_at_origin_and_decreases() {
        let c = cubic(4.0);
        let p = wave_profile(&c, None, 2001).unwrap();
        let mid = p.z.len() / 2;
        assert_eq!(p.z[mid], 0.0);
        assert!((p.u0[mid] - 0.5).abs() < 1e-12);
        for i in 1..p.u0.len() {
            assert!(p.u0[i] < p.u0[i - 1] + 1e-14, "not decreasing at {i}");
        }
        assert!(p.u0[0] > 0.8 - 1e-6 && p.u0[0] <= 0.8);
        assert!(p.u0[p.u0.len() - 1] < 0.2 + 1e-6);
    }

    #[test]
    fn balanced_cubic_matches_tanh_wave() {
        // For f(u) = -c (u-a)(u-m)(u-p) with midpoint m and linear phi, the
        // standing wave is m - A tanh(kappa z / sqrt(2) ...) with
        // A = (p-a)/2; explicitly U0(z) = m - A tanh(A sqrt(c/2) z).
        let scale = 4.0;
        let c = cubic(scale);
        let p = wave_profile(&c, None, 2001).unwrap();
        let amp = 0.3;
        let rate = amp * (scale / 2.0f64).sqrt();
        for (i, &z) in p.z.iter().enumerate() {
            let exact = 0.5 - amp * (rate * z).tanh();
            assert!(
                (p.u0[i] - exact).abs() < 1e-9,
                "z={z}: {} vs {exact}",
                p.u0[i]
            );
        }
    }

    #[test]
    fn profile_satisfies_its_ode() {
        let c = cubic(4.0);
        let p = wave_profile(&c, None, 4001).unwrap();
        let res = profile_ode_residual(&p, &c);
        assert!(res < 1e-4, "ODE residual {res}");
    }

    #[test]
    fn tails_decay_at_the_linearized_rate() {
        let c = cubic(4.0);
        let p = wave_profile(&c, None, 4001).unwrap();
        // Log-linear fit of |U0 - alpha+| on the left tail.
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..p.z.len() {
            let dev = p.u0[i] - 0.8;
            let dev = dev.abs();
            if dev > 1e-8 && dev < 1e-3 && p.z[i] < 0.0 {
                xs.push(p.z[i]);
                ys.push(dev.ln());
            }
        }
        assert!(xs.len() > 10, "tail window too small");
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(
            (slope - p.kappa_plus).abs() < 0.1 * p.kappa_plus,
            "tail rate {slope} vs kappa {}",
            p.kappa_plus
        );
    }

    #[test]
    fn linear_phi_profile_lambda0_is_one() {
        let c = cubic(4.0);
        let p = wave_profile(&c, None, 8193).unwrap();
        let l = lambda0_profile(&p, &c).unwrap();
        assert!((l - 1.0).abs() < 1e-6, "lambda0 = {l}");
    }

    #[test]
    fn node_doubling_is_converged() {
        let c = cubic(4.0);
        let coarse = lambda0_profile(&wave_profile(&c, None, 8193).unwrap(), &c).unwrap();
        let fine = lambda0_profile(&wave_profile(&c, None, 16385).unwrap(), &c).unwrap();
        assert!((coarse - fine).abs() < 1e-6, "{coarse} vs {fine}");
    }

    #[test]
    fn profile_and_intrinsic_agree_for_synthetic_model() {
        let c = cubic(7.0);
        let intrinsic = lambda0_intrinsic(&c).unwrap();
        let profile = lambda0_profile(&wave_profile(&c, None, 8193).unwrap(), &c).unwrap();
        assert!(
            (intrinsic - profile).abs() / intrinsic < 1e-6,
            "{intrinsic} vs {profile}"
        );
    }

    #[test]
    fn narrow_window_is_rejected_as_unresolved() {
        let c = cubic(4.0);
        let p = wave_profile(&c, Some(1.0), 801).unwrap();
        assert!(matches!(
            lambda0_profile(&p, &c),
            Err(SharpError::TailUnresolved { .. })
        ));
    }
}
