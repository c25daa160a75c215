use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fugacity, mean_density, partition_function, Marginal, JumpRate, RatesError};
use crate::sim::LatticeTorus;

/// The creation/annihilation rate family
///
/// ```text
/// c+(eta) = C/g(eta_0 + 1) * { (a- + a* + a+) 1(eta_e1 >= 1) 1(eta_e2 >= 1) + a- a* a+ }
/// c-(eta) = C/g(eta_e3 + 1) * { 1(eta_e1 >= 1) 1(eta_e2 >= 1) + (a- a* + a- a+ + a* a+) } 1(eta_0 >= 1)
/// ```
///
/// whose homogenization is `f(rho) = -C v(rho) (r - a-)(r - a*)(r - a+)`
/// with `r(rho) = P(eta_0 >= 1)` and `v = r / phi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlauberRateSpec {
    pub c: f64,
    pub a_minus: f64,
    pub a_star: f64,
    pub a_plus: f64,
    /// Three distinct nonzero lattice offsets `e1, e2, e3`.
    pub offsets: [Vec<i64>; 3],
}

impl GlauberRateSpec {
    pub fn new(
        c: f64,
        a_minus: f64,
        a_star: f64,
        a_plus: f64,
        offsets: [Vec<i64>; 3],
    ) -> Result<Self, RatesError> {
        if !(c > 0.0) {
            return Err(RatesError::InvalidRate(format!("C={c} must be > 0")));
        }
        if !(0.0 < a_minus && a_minus < a_star && a_star < a_plus && a_plus < 1.0) {
            return Err(RatesError::InvalidRate(format!(
                "need 0 < a-={a_minus} < a*={a_star} < a+={a_plus} < 1"
            )));
        }
        let d = offsets[0].len();
        if offsets.iter().any(|e| e.len() != d) {
            return Err(RatesError::InvalidRate("offset dimensions differ".into()));
        }
        if offsets.iter().any(|e| e.iter().all(|&x| x == 0)) {
            return Err(RatesError::InvalidRate("offsets must be nonzero".into()));
        }
        if offsets[0] == offsets[1] || offsets[0] == offsets[2] || offsets[1] == offsets[2] {
            return Err(RatesError::InvalidRate("offsets must be distinct".into()));
        }
        Ok(Self {
            c,
            a_minus,
            a_star,
            a_plus,
            offsets,
        })
    }

    /// Default offsets: `e1 = 1, e2 = 2, e3 = -1` in d = 1, coordinate unit
    /// vectors `e1 = (1,0,..), e2 = (0,1,..), e3 = (-1,0,..)` for d >= 2.
    pub fn default_offsets(d: usize) -> [Vec<i64>; 3] {
        if d == 1 {
            [vec![1], vec![2], vec![-1]]
        } else {
            let mut e1 = vec![0i64; d];
            e1[0] = 1;
            let mut e2 = vec![0i64; d];
            e2[1] = 1;
            let mut e3 = vec![0i64; d];
            e3[0] = -1;
            [e1, e2, e3]
        }
    }

    /// Elementary symmetric sums of `(a-, a*, a+)`.
    pub fn sums(&self) -> (f64, f64, f64) {
        let (am, asr, ap) = (self.a_minus, self.a_star, self.a_plus);
        (
            am + asr + ap,
            am * asr + am * ap + asr * ap,
            am * asr * ap,
        )
    }

    /// `c+` evaluated from the occupations at `(x, x+e1, x+e2)`.
    #[inline]
    pub fn c_plus(&self, g: &JumpRate, eta_x: u64, eta_e1: u64, eta_e2: u64) -> f64 {
        let (s1, _, p3) = self.sums();
        let ind = if eta_e1 >= 1 && eta_e2 >= 1 { 1.0 } else { 0.0 };
        self.c * (s1 * ind + p3) / g.g(eta_x + 1)
    }

    /// `c-` evaluated from the occupations at `(x, x+e1, x+e2, x+e3)`;
    /// vanishes on empty sites per the convention `c^{0,-}(0) = 0`.
    #[inline]
    pub fn c_minus(&self, g: &JumpRate, eta_x: u64, eta_e1: u64, eta_e2: u64, eta_e3: u64) -> f64 {
        if eta_x == 0 {
            return 0.0;
        }
        let (_, s2, _) = self.sums();
        let ind = if eta_e1 >= 1 && eta_e2 >= 1 { 1.0 } else { 0.0 };
        self.c * (ind + s2) / g.g(eta_e3 + 1)
    }

    /// Both Glauber rates at site `x` of a configuration on the torus.
    pub fn site_rates(
        &self,
        g: &JumpRate,
        torus: &LatticeTorus,
        eta: &[u64],
        x: usize,
    ) -> (f64, f64) {
        let e1 = eta[torus.offset(x, &self.offsets[0])];
        let e2 = eta[torus.offset(x, &self.offsets[1])];
        let e3 = eta[torus.offset(x, &self.offsets[2])];
        (
            self.c_plus(g, eta[x], e1, e2),
            self.c_minus(g, eta[x], e1, e2, e3),
        )
    }
}

/// A complete microscopic specification: jump rate plus Glauber rates, with
/// the truncation tolerance used for all equilibrium computations.
#[derive(Debug, Clone)]
pub struct RateModel {
    pub g: JumpRate,
    pub glauber: GlauberRateSpec,
    pub trunc_tol: f64,
}

impl RateModel {
    pub fn new(g: JumpRate, glauber: GlauberRateSpec) -> Self {
        Self {
            g,
            glauber,
            trunc_tol: 1e-12,
        }
    }

    pub fn marginal(&self, rho: f64) -> Result<Marginal, RatesError> {
        Marginal::from_density(&self.g, rho, self.trunc_tol)
    }

    pub fn phi(&self, rho: f64) -> Result<f64, RatesError> {
        fugacity(&self.g, rho, self.trunc_tol)
    }

    /// `phi'(rho) = phi / Var(eta_0)`.
    pub fn phi_prime(&self, rho: f64) -> Result<f64, RatesError> {
        let m = self.marginal(rho)?;
        if m.phi == 0.0 {
            // Limit phi'(0) = g(1) (one-particle dominance at vanishing density).
            return Ok(self.g.g(1));
        }
        Ok(m.phi / m.variance)
    }

    /// `r(rho) = P(eta_0 >= 1)`, strictly increasing from 0 to 1.
    pub fn r(&self, rho: f64) -> Result<f64, RatesError> {
        Ok(self.marginal(rho)?.prob_positive)
    }

    /// `v(rho) = E[1/g(eta_0+1)] = r/phi`, continuously extended at 0.
    pub fn v(&self, rho: f64) -> Result<f64, RatesError> {
        Ok(self.marginal(rho)?.mean_inv_g_next)
    }

    /// Closed-form reaction function `f(rho) = -C v (r-a-)(r-a*)(r-a+)`.
    pub fn reaction_f(&self, rho: f64) -> Result<f64, RatesError> {
        let m = self.marginal(rho)?;
        Ok(self.reaction_f_from_marginal(&m))
    }

    pub(crate) fn reaction_f_from_marginal(&self, m: &Marginal) -> f64 {
        let r = m.prob_positive;
        let v = m.mean_inv_g_next;
        let s = &self.glauber;
        -s.c * v * (r - s.a_minus) * (r - s.a_star) * (r - s.a_plus)
    }

    /// Reaction function parameterized by fugacity: avoids the inversion,
    /// using `r = 1 - 1/Z` and `v = (Z-1)/(phi Z)`.
    pub fn reaction_f_at_phi(&self, phi: f64) -> Result<f64, RatesError> {
        let (z, _) = partition_function(&self.g, phi, self.trunc_tol)?;
        let r = 1.0 - 1.0 / z;
        let v = if phi == 0.0 {
            1.0 / self.g.g(1)
        } else {
            (z - 1.0) / (phi * z)
        };
        let s = &self.glauber;
        Ok(-s.c * v * (r - s.a_minus) * (r - s.a_star) * (r - s.a_plus))
    }

    /// Closed-form ensemble average of `c+`:
    /// `E[c+] = C v (s1 r^2 + p3)` by product-measure factorization.
    pub fn c_plus_tilde(&self, rho: f64) -> Result<f64, RatesError> {
        let m = self.marginal(rho)?;
        let (s1, _, p3) = self.glauber.sums();
        let r = m.prob_positive;
        Ok(self.glauber.c * m.mean_inv_g_next * (s1 * r * r + p3))
    }

    /// Closed-form ensemble average of `c-`:
    /// `E[c-] = C v (r^2 + s2) r`.
    pub fn c_minus_tilde(&self, rho: f64) -> Result<f64, RatesError> {
        let m = self.marginal(rho)?;
        let (_, s2, _) = self.glauber.sums();
        let r = m.prob_positive;
        Ok(self.glauber.c * m.mean_inv_g_next * (r * r + s2) * r)
    }

    /// Density at which `r(rho) = a`, by monotone inversion.
    pub fn alpha_of_a(&self, a: f64) -> Result<f64, RatesError> {
        if !(0.0 < a && a < 1.0) {
            return Err(RatesError::InvalidRate(format!("level a={a} not in (0,1)")));
        }
        // Solve in fugacity space first (cheap direction), then map back.
        let phi = self.phi_of_r(a)?;
        mean_density(&self.g, phi, self.trunc_tol)
    }

    /// Fugacity at which `r = 1 - 1/Z(phi)` equals `a`.
    pub(crate) fn phi_of_r(&self, a: f64) -> Result<f64, RatesError> {
        let f = |phi: f64| match partition_function(&self.g, phi, self.trunc_tol) {
            Ok((z, _)) => 1.0 - 1.0 / z - a,
            Err(_) => 1.0 - a, // divergence: r -> 1
        };
        let phi_star = self.g.phi_star();
        let mut hi = if phi_star.is_finite() { 0.5 * phi_star } else { 1.0 };
        let mut guard = 0;
        while f(hi) < 0.0 {
            hi = if phi_star.is_finite() {
                0.5 * (hi + phi_star)
            } else {
                2.0 * hi
            };
            guard += 1;
            if guard > 200 {
                return Err(RatesError::NonConvergent(format!(
                    "failed to bracket r^-1({a})"
                )));
            }
        }
        Ok(crate::numerics::bisect(&f, 0.0, hi, 1e-15, 200)?)
    }

    /// The three zeros `(alpha-, alpha*, alpha+) = r^{-1}(a-, a*, a+)`.
    pub fn zeros(&self) -> Result<(f64, f64, f64), RatesError> {
        Ok((
            self.alpha_of_a(self.glauber.a_minus)?,
            self.alpha_of_a(self.glauber.a_star)?,
            self.alpha_of_a(self.glauber.a_plus)?,
        ))
    }
}

/// Evaluation strategy for [`ensemble_average`].
#[derive(Debug, Clone, Copy)]
pub enum AveragePath {
    /// Exact summation over the truncated product state space; errors with
    /// `WindowTooLarge` past the state budget.
    Exact { state_budget: u128 },
    /// Monte Carlo with a reported standard error.
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for AveragePath {
    fn default() -> Self {
        AveragePath::Exact {
            state_budget: 1 << 24,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AverageResult {
    pub value: f64,
    /// Standard error; `None` on the exact path.
    pub std_err: Option<f64>,
}

/// Ensemble average `E_{nu_rho}[h]` of a local function `h` on a finite
/// window of sites, under the product measure at density `rho`.
pub fn ensemble_average<H: Fn(&[u64]) -> f64>(
    g: &JumpRate,
    window_size: usize,
    h: H,
    rho: f64,
    tol: f64,
    path: AveragePath,
) -> Result<AverageResult, RatesError> {
    let m = Marginal::from_density(g, rho, tol)?;
    match path {
        AveragePath::Exact { state_budget } => {
            let base = m.k_trunc() as u128 + 1;
            let states = base.checked_pow(window_size as u32).unwrap_or(u128::MAX);
            if states > state_budget {
                return Err(RatesError::WindowTooLarge {
                    states,
                    budget: state_budget,
                });
            }
            let mut occ = vec![0u64; window_size];
            let mut value = 0.0;
            let total = states as u64;
            for code in 0..total {
                let mut c = code;
                let mut weight = 1.0;
                for slot in occ.iter_mut() {
                    let k = c % base as u64;
                    c /= base as u64;
                    *slot = k;
                    weight *= m.pmf(k);
                }
                if weight > 0.0 {
                    value += weight * h(&occ);
                }
            }
            Ok(AverageResult {
                value,
                std_err: None,
            })
        }
        AveragePath::MonteCarlo { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut occ = vec![0u64; window_size];
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            for _ in 0..samples {
                for slot in occ.iter_mut() {
                    *slot = m.sample(&mut rng);
                }
                let v = h(&occ);
                sum += v;
                sum2 += v * v;
            }
            let n = samples as f64;
            let mean = sum / n;
            let var = (sum2 / n - mean * mean).max(0.0);
            Ok(AverageResult {
                value: mean,
                std_err: Some((var / n).sqrt()),
            })
        }
    }
}

/// `f(rho)` recomputed as the window ensemble average of `c+ - c-` over
/// `{0, e1, e2, e3}`; the independent cross-check of the closed form.
pub fn reaction_f_via_average(
    model: &RateModel,
    rho: f64,
    path: AveragePath,
) -> Result<AverageResult, RatesError> {
    let spec = model.glauber.clone();
    let g = model.g.clone();
    // Window order: (eta_0, eta_e1, eta_e2, eta_e3).
    ensemble_average(
        &model.g,
        4,
        move |occ| {
            spec.c_plus(&g, occ[0], occ[1], occ[2]) - spec.c_minus(&g, occ[0], occ[1], occ[2], occ[3])
        },
        rho,
        model.trunc_tol,
        path,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(g: JumpRate) -> RateModel {
        let spec =
            GlauberRateSpec::new(1.0, 0.2, 0.5, 0.8, GlauberRateSpec::default_offsets(2)).unwrap();
        RateModel::new(g, spec)
    }

    #[test]
    fn spec_validation() {
        assert!(GlauberRateSpec::new(1.0, 0.5, 0.2, 0.8, GlauberRateSpec::default_offsets(2))
            .is_err());
        assert!(GlauberRateSpec::new(
            1.0,
            0.2,
            0.5,
            0.8,
            [vec![1, 0], vec![1, 0], vec![-1, 0]]
        )
        .is_err());
        assert!(GlauberRateSpec::new(
            1.0,
            0.2,
            0.5,
            0.8,
            [vec![0, 0], vec![0, 1], vec![-1, 0]]
        )
        .is_err());
    }

    #[test]
    fn trivial_averages() {
        let m = model(JumpRate::linear());
        let one = ensemble_average(&m.g, 1, |_| 1.0, 0.7, 1e-12, AveragePath::default()).unwrap();
        assert!((one.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn average_of_g_is_fugacity() {
        for g in [JumpRate::linear(), JumpRate::indicator()] {
            let m = model(g.clone());
            for rho in [0.5, 1.0, 2.0] {
                let phi = m.phi(rho).unwrap();
                let gg = g.clone();
                let avg = ensemble_average(
                    &g,
                    1,
                    move |occ| gg.g(occ[0]),
                    rho,
                    1e-12,
                    AveragePath::default(),
                )
                .unwrap();
                assert!((avg.value - phi).abs() < 1e-9, "rho={rho}");
            }
        }
    }

    #[test]
    fn poisson_tail_average() {
        // P(eta >= 1) = 1 - e^{-1} for the Poisson marginal at rho = 1.
        let g = JumpRate::linear();
        let avg = ensemble_average(
            &g,
            1,
            |occ| if occ[0] >= 1 { 1.0 } else { 0.0 },
            1.0,
            1e-12,
            AveragePath::default(),
        )
        .unwrap();
        assert!((avg.value - (1.0 - (-1.0f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn reaction_zero_at_a_star_level() {
        let m = model(JumpRate::linear());
        let alpha_star = m.alpha_of_a(0.5).unwrap();
        assert!(m.reaction_f(alpha_star).unwrap().abs() < 1e-10);
    }

    #[test]
    fn known_zero_for_poisson_family() {
        // r(rho) = 1 - e^{-rho}, so alpha- = -ln(1 - a-) = -ln(0.8).
        let m = model(JumpRate::linear());
        let alpha_minus = m.alpha_of_a(0.2).unwrap();
        assert!((alpha_minus - (-(0.8f64).ln())).abs() < 1e-9);
        assert!(m.reaction_f(alpha_minus).unwrap().abs() < 1e-10);
    }

    #[test]
    fn closed_form_matches_window_average() {
        let m = model(JumpRate::linear());
        for rho in [0.5, 1.0, 2.0] {
            let exact = reaction_f_via_average(&m, rho, AveragePath::default()).unwrap();
            let closed = m.reaction_f(rho).unwrap();
            assert!(
                (exact.value - closed).abs() < 1e-9,
                "rho={rho}: {} vs {closed}",
                exact.value
            );
        }
    }

    #[test]
    fn closed_form_matches_monte_carlo_within_error() {
        let m = model(JumpRate::indicator());
        for (i, rho) in [0.5, 1.0, 2.0].into_iter().enumerate() {
            let mc = reaction_f_via_average(
                &m,
                rho,
                AveragePath::MonteCarlo {
                    samples: 200_000,
                    seed: 7 + i as u64,
                },
            )
            .unwrap();
            let closed = m.reaction_f(rho).unwrap();
            let band = 5.0 * mc.std_err.unwrap();
            assert!(
                (mc.value - closed).abs() < band,
                "rho={rho}: {} vs {closed} (band {band})",
                mc.value
            );
        }
    }

    #[test]
    fn window_budget_is_enforced() {
        let g = JumpRate::linear();
        let err = ensemble_average(
            &g,
            4,
            |_| 1.0,
            2.0,
            1e-12,
            AveragePath::Exact { state_budget: 10 },
        );
        assert!(matches!(err, Err(RatesError::WindowTooLarge { .. })));
    }

    #[test]
    fn reaction_f_at_phi_consistent() {
        let m = model(JumpRate::indicator());
        for rho in [0.3, 1.0, 3.0] {
            let phi = m.phi(rho).unwrap();
            let a = m.reaction_f(rho).unwrap();
            let b = m.reaction_f_at_phi(phi).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
    }
}
