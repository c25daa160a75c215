use super::SharpError;
use crate::numerics::{adaptive_simpson, gauss_legendre_panel};
use crate::rates::ModelCurves;

/// Spec-level potential `W(u) = int_u^{alpha+} f(s) phi'(s) ds`, by adaptive
/// quadrature at 1e-12 relative tolerance.
pub fn potential_w(curves: &ModelCurves, u: f64) -> Result<f64, SharpError> {
    if u < curves.alpha_minus - 1e-9 || u > curves.alpha_plus + 1e-9 {
        return Err(SharpError::InvalidInput(format!(
            "u={u} outside [alpha-, alpha+]"
        )));
    }
    let integrand = |s: f64| curves.f_eval(s) * curves.phi_deriv(s);
    Ok(adaptive_simpson(
        &integrand,
        u,
        curves.alpha_plus,
        1e-12,
        1e-15,
    )?)
}

const PANELS: usize = 256;
const GL_ORDER: usize = 12;

/// Fast two-branch evaluator for `W`.
///
/// The definition integrates from `alpha+`; under balance `W(alpha-) = 0` as
/// well, but only to quadrature/balance precision. Near `alpha-` that residual
/// would dominate the exact double zero, so the left branch integrates `-f phi'`
/// up from `alpha-` instead. The mid-profile seam between the branches is the
/// balance residual itself (~1e-15 relative), far below every tolerance used.
#[derive(Debug, Clone)]
pub struct PotentialW {
    alpha_minus: f64,
    alpha_star: f64,
    alpha_plus: f64,
    /// Suffix integrals of `f phi'` at right-branch panel edges (alpha* .. alpha+).
    right_suffix: Vec<f64>,
    /// Prefix integrals of `-f phi'` at left-branch panel edges (alpha- .. alpha*).
    left_prefix: Vec<f64>,
    f_phi: FPhi,
}

#[derive(Debug, Clone)]
struct FPhi {
    curves: ModelCurves,
}

impl FPhi {
    #[inline]
    fn eval(&self, s: f64) -> f64 {
        self.curves.f_eval(s) * self.curves.phi_deriv(s)
    }
}

impl PotentialW {
    pub fn new(curves: &ModelCurves) -> Result<Self, SharpError> {
        let f_phi = FPhi {
            curves: curves.clone(),
        };
        let (am, astar, ap) = (curves.alpha_minus, curves.alpha_star, curves.alpha_plus);

        let h_r = (ap - astar) / PANELS as f64;
        let mut right_suffix = vec![0.0; PANELS + 1];
        for j in (0..PANELS).rev() {
            let a = astar + j as f64 * h_r;
            let seg = gauss_legendre_panel(&|s| f_phi.eval(s), a, a + h_r, GL_ORDER);
            right_suffix[j] = right_suffix[j + 1] + seg;
        }

        let h_l = (astar - am) / PANELS as f64;
        let mut left_prefix = vec![0.0; PANELS + 1];
        for j in 0..PANELS {
            let a = am + j as f64 * h_l;
            let seg = gauss_legendre_panel(&|s| -f_phi.eval(s), a, a + h_l, GL_ORDER);
            left_prefix[j + 1] = left_prefix[j] + seg;
        }

        Ok(Self {
            alpha_minus: am,
            alpha_star: astar,
            alpha_plus: ap,
            right_suffix,
            left_prefix,
            f_phi,
        })
    }

    /// `W(u)`, clamped at zero against roundoff at the double zeros.
    pub fn eval(&self, u: f64) -> f64 {
        let w = if u >= self.alpha_star {
            let h = (self.alpha_plus - self.alpha_star) / PANELS as f64;
            let j = (((u - self.alpha_star) / h).floor() as usize).min(PANELS - 1);
            let edge = self.alpha_star + (j + 1) as f64 * h;
            let partial = gauss_legendre_panel(
                &|s| self.f_phi.eval(s),
                u,
                edge.min(self.alpha_plus),
                GL_ORDER,
            );
            partial + self.right_suffix[j + 1]
        } else {
            let h = (self.alpha_star - self.alpha_minus) / PANELS as f64;
            let j = (((u - self.alpha_minus) / h).floor() as usize).min(PANELS - 1);
            let edge = self.alpha_minus + j as f64 * h;
            let partial =
                gauss_legendre_panel(&|s| -self.f_phi.eval(s), edge.max(self.alpha_minus), u, GL_ORDER);
            self.left_prefix[j] + partial
        };
        w.max(0.0)
    }

    /// Mismatch of the two branches at `alpha*`; equals the balance residual.
    pub fn seam_mismatch(&self) -> f64 {
        self.right_suffix[0] - self.left_prefix[PANELS]
    }
}

/// `lambda0 = int phi' sqrt(W) du / int sqrt(W) du` over `[alpha-, alpha+]`.
pub fn lambda0_intrinsic(curves: &ModelCurves) -> Result<f64, SharpError> {
    let w = PotentialW::new(curves)?;
    let (am, ap) = (curves.alpha_minus, curves.alpha_plus);
    let num = adaptive_simpson(
        &|u: f64| curves.phi_deriv(u) * w.eval(u).sqrt(),
        am,
        ap,
        1e-12,
        1e-15,
    )?;
    let den = adaptive_simpson(&|u: f64| w.eval(u).sqrt(), am, ap, 1e-12, 1e-15)?;
    Ok(num / den)
}
