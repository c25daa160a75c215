use rand::Rng;

use super::{JumpRate, RatesError};

/// Hard cap on the truncation index of the marginal series.
pub const K_CAP: usize = 10_000;

/// Raw series pass: weights `w_k = phi^k / g(k)!` until the next term drops
/// below `tol` times the partial sum (and the terms are past their mode).
fn series_weights(g: &JumpRate, phi: f64, tol: f64) -> Result<Vec<f64>, RatesError> {
    if !(phi >= 0.0) || !phi.is_finite() {
        return Err(RatesError::InvalidRate(format!("fugacity phi={phi}")));
    }
    if !(tol > 0.0) {
        return Err(RatesError::InvalidRate(format!("tolerance tol={tol}")));
    }
    let mut weights = vec![1.0f64];
    if phi == 0.0 {
        return Ok(weights);
    }
    let mut sum = 1.0;
    let mut term = 1.0f64;
    for k in 1..=K_CAP {
        let next = term * phi / g.g(k as u64);
        if next < tol * sum && next <= term {
            return Ok(weights);
        }
        if !next.is_finite() {
            return Err(RatesError::NonConvergent(format!(
                "series term overflow at k={k}, phi={phi}"
            )));
        }
        weights.push(next);
        sum += next;
        term = next;
    }
    Err(RatesError::NonConvergent(format!(
        "series did not settle below cap K_CAP={K_CAP} at phi={phi} (phi* = {})",
        g.phi_star()
    )))
}

/// Truncated partition value `Z = sum_{k<=K} phi^k / g(k)!` with the first
/// omitted term below `tol * Z`. Returns `(Z, K_trunc)`.
pub fn partition_function(g: &JumpRate, phi: f64, tol: f64) -> Result<(f64, usize), RatesError> {
    let w = series_weights(g, phi, tol)?;
    Ok((w.iter().sum(), w.len() - 1))
}

/// Mean density under the truncated marginal at fugacity `phi`.
pub fn mean_density(g: &JumpRate, phi: f64, tol: f64) -> Result<f64, RatesError> {
    let w = series_weights(g, phi, tol)?;
    let z: f64 = w.iter().sum();
    Ok(w.iter().enumerate().map(|(k, v)| k as f64 * v).sum::<f64>() / z)
}

fn moments(g: &JumpRate, phi: f64, tol: f64) -> Result<(f64, f64), RatesError> {
    let w = series_weights(g, phi, tol)?;
    let z: f64 = w.iter().sum();
    let mean = w.iter().enumerate().map(|(k, v)| k as f64 * v).sum::<f64>() / z;
    let m2 = w
        .iter()
        .enumerate()
        .map(|(k, v)| (k as f64) * (k as f64) * v)
        .sum::<f64>()
        / z;
    Ok((mean, m2 - mean * mean))
}

/// The unique fugacity with `mean_density(phi) = rho`; strictly increasing
/// in `rho`. Monotone bisection refined by Newton steps using
/// `d rho / d phi = Var / phi`.
pub fn fugacity(g: &JumpRate, rho: f64, tol: f64) -> Result<f64, RatesError> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(RatesError::InvalidRate(format!("density rho={rho}")));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    let phi_star = g.phi_star();

    // Upper bracket: mean(hi) >= rho, treating evaluation failure near
    // phi* as divergence.
    let mean_or_inf = |phi: f64| mean_density(g, phi, tol).unwrap_or(f64::INFINITY);
    let mut hi = if phi_star.is_finite() {
        0.5 * phi_star
    } else {
        1.0f64.max(rho)
    };
    let mut guard = 0;
    while mean_or_inf(hi) < rho {
        hi = if phi_star.is_finite() {
            0.5 * (hi + phi_star)
        } else {
            2.0 * hi
        };
        guard += 1;
        if guard > 200 {
            return Err(RatesError::NonConvergent(format!(
                "failed to bracket fugacity for rho={rho}"
            )));
        }
    }

    let (mut lo, mut f_lo) = (0.0f64, -rho);
    let mut x = 0.5 * hi;
    for _ in 0..200 {
        let fx = mean_or_inf(x) - rho;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
        }
        if (hi - lo) <= 1e-15 * (1.0 + x) && fx.is_finite() && fx.abs() <= 1e-11 * (1.0 + rho) {
            return Ok(x);
        }
        // Newton step from the bracket side we just updated, if usable.
        let next = match moments(g, x, tol) {
            Ok((mean, var)) if var > 0.0 && x > 0.0 => {
                let step = x - (mean - rho) * x / var;
                if step > lo && step < hi {
                    step
                } else {
                    0.5 * (lo + hi)
                }
            }
            _ => 0.5 * (lo + hi),
        };
        x = next;
    }
    Ok(x)
}

/// One-site zero-range equilibrium at density `rho`: the truncated,
/// renormalized pmf `nu_rho(k) = phi^k / (Z g(k)!)` together with the moments
/// and the derived occupation functionals used by the Glauber rates.
#[derive(Debug, Clone)]
pub struct Marginal {
    pub rho: f64,
    pub phi: f64,
    pub z: f64,
    pub trunc_tol: f64,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    /// `r = P(eta >= 1)`.
    pub prob_positive: f64,
    /// `v = E[1 / g(eta + 1)]`, equal to `r / phi` with `v(0) = 1/g(1)`.
    pub mean_inv_g_next: f64,
}

impl Marginal {
    pub fn from_fugacity(g: &JumpRate, phi: f64, tol: f64) -> Result<Self, RatesError> {
        let w = series_weights(g, phi, tol)?;
        let z: f64 = w.iter().sum();
        let pmf: Vec<f64> = w.iter().map(|v| v / z).collect();
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let m2: f64 = pmf
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64) * (k as f64) * p)
            .sum();
        let mean_inv_g_next: f64 = pmf
            .iter()
            .enumerate()
            .map(|(k, p)| p / g.g(k as u64 + 1))
            .sum();
        Ok(Self {
            rho: mean,
            phi,
            z,
            trunc_tol: tol,
            prob_positive: 1.0 - pmf[0],
            mean_inv_g_next,
            pmf,
            cdf,
            mean,
            variance: m2 - mean * mean,
        })
    }

    pub fn from_density(g: &JumpRate, rho: f64, tol: f64) -> Result<Self, RatesError> {
        let phi = fugacity(g, rho, tol)?;
        let mut m = Self::from_fugacity(g, phi, tol)?;
        // Report the requested density, not its round trip.
        m.rho = rho;
        Ok(m)
    }

    /// `nu_rho(k)`, zero beyond the truncation window.
    pub fn pmf(&self, k: u64) -> f64 {
        self.pmf.get(k as usize).copied().unwrap_or(0.0)
    }

    pub fn pmf_table(&self) -> &[f64] {
        &self.pmf
    }

    pub fn k_trunc(&self) -> usize {
        self.pmf.len() - 1
    }

    /// Inverse-CDF draw from the truncated, renormalized pmf.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-12;

    #[test]
    fn partition_function_trivial_and_closed_forms() {
        let lin = JumpRate::linear();
        // phi = 0: only the k = 0 term survives.
        let (z, k) = partition_function(&lin, 0.0, TOL).unwrap();
        assert_eq!((z, k), (1.0, 0));
        // Poisson family: Z = e^phi.
        let (z, _) = partition_function(&lin, 1.0, TOL).unwrap();
        assert!((z - std::f64::consts::E).abs() < 1e-11);
        // Geometric family: Z = 1/(1 - phi).
        let ind = JumpRate::indicator();
        let (z, _) = partition_function(&ind, 0.5, TOL).unwrap();
        assert!((z - 2.0).abs() < 1e-11);
    }

    #[test]
    fn partition_function_rejects_supercritical_fugacity() {
        let ind = JumpRate::indicator();
        assert!(matches!(
            partition_function(&ind, 1.0, TOL),
            Err(RatesError::NonConvergent(_))
        ));
    }

    #[test]
    fn fugacity_closed_forms() {
        // Independent particles: phi(rho) = rho.
        let lin = JumpRate::linear();
        assert_eq!(fugacity(&lin, 0.0, TOL).unwrap(), 0.0);
        assert!((fugacity(&lin, 2.0, TOL).unwrap() - 2.0).abs() < 1e-10);
        // Indicator: phi(rho) = rho / (1 + rho).
        let ind = JumpRate::indicator();
        assert!((fugacity(&ind, 1.0, TOL).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn mean_density_closed_forms() {
        let lin = JumpRate::linear();
        assert_eq!(mean_density(&lin, 0.0, TOL).unwrap(), 0.0);
        let ind = JumpRate::indicator();
        // Geometric: rho = phi / (1 - phi).
        assert!((mean_density(&ind, 0.5, TOL).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn round_trip_inversion() {
        for g in [JumpRate::linear(), JumpRate::indicator(), JumpRate::capped(2)] {
            for rho in [0.1, 1.0, 5.0] {
                let phi = fugacity(&g, rho, TOL).unwrap();
                let back = mean_density(&g, phi, TOL).unwrap();
                assert!(
                    (back - rho).abs() < 1e-8,
                    "round trip failed: rho={rho}, got {back}"
                );
            }
        }
    }

    #[test]
    fn pmf_closed_forms() {
        // rho = 0 concentrates at k = 0.
        let lin = JumpRate::linear();
        let m = Marginal::from_density(&lin, 0.0, TOL).unwrap();
        assert_eq!(m.pmf(0), 1.0);
        assert_eq!(m.pmf(1), 0.0);
        // Poisson pmf at k = 0, rho = 2.
        let m = Marginal::from_density(&lin, 2.0, TOL).unwrap();
        assert!((m.pmf(0) - (-2.0f64).exp()).abs() < 1e-10);
        // Geometric (1 - phi) phi^k at rho = 1, k = 2.
        let ind = JumpRate::indicator();
        let m = Marginal::from_density(&ind, 1.0, TOL).unwrap();
        assert!((m.pmf(2) - 0.125).abs() < 1e-10);
    }

    #[test]
    fn marginal_invariants() {
        for g in [JumpRate::linear(), JumpRate::indicator(), JumpRate::capped(3)] {
            for rho in [0.3, 1.0, 4.0] {
                let m = Marginal::from_density(&g, rho, TOL).unwrap();
                let total: f64 = m.pmf_table().iter().sum();
                assert!((total - 1.0).abs() < TOL);
                assert!((m.mean - rho).abs() < 10.0 * TOL * (1.0 + rho));
                // phi = <g> identity.
                let mean_g: f64 = m
                    .pmf_table()
                    .iter()
                    .enumerate()
                    .map(|(k, p)| g.g(k as u64) * p)
                    .sum();
                assert!(
                    (mean_g - m.phi).abs() < 10.0 * TOL * (1.0 + m.phi),
                    "phi = <g> failed for rho={rho}"
                );
                // v = r / phi identity.
                assert!((m.mean_inv_g_next * m.phi - m.prob_positive).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampling_matches_moments() {
        let lin = JumpRate::linear();
        let m = Marginal::from_density(&lin, 3.0, TOL).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000usize;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += m.sample(&mut rng) as f64;
        }
        let mean = sum / n as f64;
        // Poisson(3): three standard errors of the mean.
        let band = 3.0 * (3.0f64 / n as f64).sqrt();
        assert!((mean - 3.0).abs() < band, "mean {mean} outside {band}");
    }

    #[test]
    fn sampling_at_zero_density_is_constant() {
        let m = Marginal::from_density(&JumpRate::linear(), 0.0, TOL).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(m.sample(&mut rng), 0);
        }
    }
}
