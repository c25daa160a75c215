use super::{RateModel, RatesError};
use crate::numerics::CubicSpline;

/// Representation of a scalar curve on the working density interval.
#[derive(Debug, Clone)]
pub enum CurveRep {
    /// The identity, `phi(u) = u` (independent particles / synthetic runs).
    Identity,
    /// Balanced cubic `f(u) = -scale (u - a)(u - s)(u - p)`.
    Cubic { scale: f64, a: f64, s: f64, p: f64 },
    /// Memoized natural cubic spline of tabulated exact values.
    Spline(CubicSpline),
}

impl CurveRep {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            CurveRep::Identity => u,
            CurveRep::Cubic { scale, a, s, p } => -scale * (u - a) * (u - s) * (u - p),
            CurveRep::Spline(sp) => sp.eval(u),
        }
    }

    #[inline]
    pub fn deriv(&self, u: f64) -> f64 {
        match self {
            CurveRep::Identity => 1.0,
            CurveRep::Cubic { scale, a, s, p } => {
                -scale * ((u - s) * (u - p) + (u - a) * (u - p) + (u - a) * (u - s))
            }
            CurveRep::Spline(sp) => sp.deriv(u),
        }
    }

    #[inline]
    pub fn deriv2(&self, u: f64) -> f64 {
        match self {
            CurveRep::Identity => 0.0,
            CurveRep::Cubic { scale, a, s, p } => -scale * (6.0 * u - 2.0 * (a + s + p)),
            CurveRep::Spline(sp) => sp.deriv2(u),
        }
    }
}

/// The pair `(phi, f)` driving the hydrodynamic equation, with the bistable
/// zeros and the Lipschitz data needed by the integrator and the generation
/// estimates. Immutable after construction and cheap to evaluate.
#[derive(Debug, Clone)]
pub struct ModelCurves {
    pub phi: CurveRep,
    pub f: CurveRep,
    pub alpha_minus: f64,
    pub alpha_star: f64,
    pub alpha_plus: f64,
    /// `gamma = f'(alpha*) > 0`.
    pub gamma: f64,
    /// `gamma_bar = -min f'` over the working interval.
    pub gamma_bar: f64,
    /// `max phi'` over the working interval.
    pub phi_lip: f64,
    /// `max |f'|` over the working interval.
    pub f_lip: f64,
    pub max_abs_f: f64,
    /// Working interval; fields handed to the integrator must stay inside.
    pub domain: (f64, f64),
}

impl ModelCurves {
    /// Memoize a calibrated rate model on a working interval with `knots`
    /// spline knots (2048 by default elsewhere). `domain` defaults to a
    /// margin around `[alpha-, alpha+]`.
    pub fn from_rate_model(
        model: &RateModel,
        knots: usize,
        domain: Option<(f64, f64)>,
    ) -> Result<Self, RatesError> {
        let (alpha_minus, alpha_star, alpha_plus) = model.zeros()?;
        let width = alpha_plus - alpha_minus;
        let (lo, hi) = domain.unwrap_or((
            (alpha_minus - 0.75 * width).max(0.25 * alpha_minus),
            alpha_plus + 0.75 * width,
        ));
        assert!(lo > 0.0 && hi > lo);
        let mut phi_vals = Vec::with_capacity(knots);
        let mut f_vals = Vec::with_capacity(knots);
        for i in 0..knots {
            let u = lo + (hi - lo) * i as f64 / (knots - 1) as f64;
            let m = model.marginal(u)?;
            phi_vals.push(m.phi);
            f_vals.push(model.reaction_f_from_marginal(&m));
        }
        let phi = CurveRep::Spline(CubicSpline::from_uniform(lo, hi, phi_vals));
        let f = CurveRep::Spline(CubicSpline::from_uniform(lo, hi, f_vals));
        Ok(Self::finish(
            phi,
            f,
            alpha_minus,
            alpha_star,
            alpha_plus,
            (lo, hi),
        ))
    }

    /// Linear diffusion with a balanced cubic reaction; `alpha_star` must be
    /// the midpoint for the balance condition to hold exactly.
    pub fn synthetic_cubic(alpha_minus: f64, alpha_star: f64, alpha_plus: f64, scale: f64) -> Self {
        assert!(0.0 < alpha_minus && alpha_minus < alpha_star && alpha_star < alpha_plus);
        assert!(scale > 0.0);
        let width = alpha_plus - alpha_minus;
        let domain = (
            (alpha_minus - 0.75 * width).max(0.05 * alpha_minus),
            alpha_plus + 0.75 * width,
        );
        Self::finish(
            CurveRep::Identity,
            CurveRep::Cubic {
                scale,
                a: alpha_minus,
                s: alpha_star,
                p: alpha_plus,
            },
            alpha_minus,
            alpha_star,
            alpha_plus,
            domain,
        )
    }

    fn finish(
        phi: CurveRep,
        f: CurveRep,
        alpha_minus: f64,
        alpha_star: f64,
        alpha_plus: f64,
        domain: (f64, f64),
    ) -> Self {
        let gamma = f.deriv(alpha_star);
        let scan = 4096;
        let mut min_df = f64::INFINITY;
        let mut f_lip: f64 = 0.0;
        let mut phi_lip: f64 = 0.0;
        let mut max_abs_f: f64 = 0.0;
        for i in 0..=scan {
            let u = domain.0 + (domain.1 - domain.0) * i as f64 / scan as f64;
            let df = f.deriv(u);
            min_df = min_df.min(df);
            f_lip = f_lip.max(df.abs());
            phi_lip = phi_lip.max(phi.deriv(u));
            max_abs_f = max_abs_f.max(f.eval(u).abs());
        }
        Self {
            phi,
            f,
            alpha_minus,
            alpha_star,
            alpha_plus,
            gamma,
            gamma_bar: -min_df,
            phi_lip,
            f_lip,
            max_abs_f,
            domain,
        }
    }

    #[inline]
    pub fn phi_eval(&self, u: f64) -> f64 {
        self.phi.eval(u)
    }

    #[inline]
    pub fn phi_deriv(&self, u: f64) -> f64 {
        self.phi.deriv(u)
    }

    #[inline]
    pub fn f_eval(&self, u: f64) -> f64 {
        self.f.eval(u)
    }

    #[inline]
    pub fn f_deriv(&self, u: f64) -> f64 {
        self.f.deriv(u)
    }

    /// Generation horizon `t^N = log K / (2 gamma K)`.
    pub fn t_generation(&self, k: f64) -> f64 {
        assert!(k > 1.0);
        k.ln() / (2.0 * self.gamma * k)
    }
}
