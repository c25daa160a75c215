use super::{partition_function, RateModel, RatesError};
use crate::numerics::{adaptive_simpson, bisect, gauss_legendre_panel};

/// The three bracketed zeros of a bistable curve, with the derivative signs
/// verified: `f'(alpha-) < 0`, `f'(alpha*) > 0`, `f'(alpha+) < 0`.
#[derive(Debug, Clone, Copy)]
pub struct BistableZeros {
    pub alpha_minus: f64,
    pub alpha_star: f64,
    pub alpha_plus: f64,
    pub df_at_zeros: (f64, f64, f64),
}

/// Scan `[lo, hi]` for sign changes and bisect each; exactly three zeros
/// with the bistable derivative signature are required.
pub fn find_zeros<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<BistableZeros, RatesError> {
    const SCAN: usize = 4000;
    let width = hi - lo;
    assert!(width > 0.0);
    let mut brackets = Vec::new();
    let mut x_prev = lo;
    let mut f_prev = f(lo);
    for i in 1..=SCAN {
        let x = lo + width * i as f64 / SCAN as f64;
        let fx = f(x);
        if f_prev == 0.0 {
            brackets.push((x_prev, x_prev));
        } else if f_prev.signum() != fx.signum() && fx != 0.0 {
            brackets.push((x_prev, x));
        }
        x_prev = x;
        f_prev = fx;
    }
    if f_prev == 0.0 {
        brackets.push((x_prev, x_prev));
    }
    if brackets.len() != 3 {
        return Err(RatesError::BistabilityViolated {
            found: brackets.len(),
        });
    }
    let mut roots = [0.0f64; 3];
    for (i, &(a, b)) in brackets.iter().enumerate() {
        roots[i] = if a == b {
            a
        } else {
            bisect(f, a, b, 1e-15, 200)?
        };
    }
    let h = 1e-7 * width;
    let df = |x: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let signs = (df(roots[0]), df(roots[1]), df(roots[2]));
    if !(signs.0 < 0.0 && signs.1 > 0.0 && signs.2 < 0.0) {
        return Err(RatesError::BistabilityViolated { found: 3 });
    }
    Ok(BistableZeros {
        alpha_minus: roots[0],
        alpha_star: roots[1],
        alpha_plus: roots[2],
        df_at_zeros: signs,
    })
}

/// Balance residual `int_{alpha-}^{alpha+} f(rho) phi'(rho) drho`, evaluated
/// in fugacity space: the substitution `w = phi(rho)` turns the integral into
/// `int_{phi-}^{phi+} f(rho(w)) dw`, which needs no fugacity inversion.
/// Composite Gauss-Legendre with `panels` panels of order 20.
pub fn balance_residual_phi_space(
    model: &RateModel,
    a_star: f64,
    panels: usize,
) -> Result<f64, RatesError> {
    let spec = &model.glauber;
    let phi_lo = model.phi_of_r(spec.a_minus)?;
    let phi_hi = model.phi_of_r(spec.a_plus)?;
    let g = &model.g;
    let tol = model.trunc_tol;
    let c = spec.c;
    let (a_minus, a_plus) = (spec.a_minus, spec.a_plus);
    let integrand = |phi: f64| {
        let (z, _) = partition_function(g, phi, tol).expect("fugacity inside bracketed interval");
        let r = 1.0 - 1.0 / z;
        let v = if phi > 0.0 { (z - 1.0) / (phi * z) } else { 1.0 / g.g(1) };
        -c * v * (r - a_minus) * (r - a_star) * (r - a_plus)
    };
    let h = (phi_hi - phi_lo) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let a = phi_lo + p as f64 * h;
        total += gauss_legendre_panel(&integrand, a, a + h, 20);
    }
    Ok(total)
}

/// Independent evaluation of the same residual in density space:
/// adaptive Simpson of `f(rho) phi'(rho)` over `[alpha-, alpha+]` with the
/// exact per-point marginal computations.
pub fn balance_residual_rho_space(model: &RateModel, quad_tol: f64) -> Result<f64, RatesError> {
    let alpha_minus = model.alpha_of_a(model.glauber.a_minus)?;
    let alpha_plus = model.alpha_of_a(model.glauber.a_plus)?;
    let integrand = |rho: f64| {
        let m = model.marginal(rho).expect("marginal inside zero interval");
        let phi_prime = if m.phi == 0.0 {
            model.g.g(1)
        } else {
            m.phi / m.variance
        };
        model.reaction_f_from_marginal(&m) * phi_prime
    };
    Ok(adaptive_simpson(
        &integrand,
        alpha_minus,
        alpha_plus,
        quad_tol,
        quad_tol,
    )?)
}

/// Find `a*` in `(a-, a+)` making the reaction balanced:
/// `int f phi' drho = 0`. Bisection on `a*`, using the sign argument that the
/// residual is positive for `a*` near `a-` and negative near `a+`.
pub fn calibrate_balance(model_without_a_star: &RateModel) -> Result<f64, RatesError> {
    let spec = &model_without_a_star.glauber;
    let (a_lo, a_hi) = (spec.a_minus, spec.a_plus);
    let margin = 1e-9 * (a_hi - a_lo);
    let residual = |a_star: f64| -> f64 {
        let mut m = model_without_a_star.clone();
        m.glauber.a_star = a_star.clamp(a_lo + margin, a_hi - margin);
        balance_residual_phi_space(&m, a_star, 96).expect("residual quadrature")
    };
    let lo = a_lo + margin;
    let hi = a_hi - margin;
    let (f_lo, f_hi) = (residual(lo), residual(hi));
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(RatesError::NoSignChange { lo, hi });
    }
    bisect(&residual, lo, hi, 1e-15, 200).map_err(RatesError::from)
}
