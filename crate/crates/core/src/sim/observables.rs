use std::collections::HashMap;

use rand::Rng;

use super::{Configuration, LatticeTorus};
use crate::rates::{JumpRate, Marginal, RatesError};

/// Draw an inhomogeneous product configuration with site means `u0`.
///
/// Marginals are cached per distinct density, so constant and two-phase
/// profiles build only a handful of tables.
pub fn init_product<R: Rng + ?Sized>(
    torus: LatticeTorus,
    u0: &[f64],
    g: &JumpRate,
    trunc_tol: f64,
    rng: &mut R,
) -> Result<Configuration, RatesError> {
    assert_eq!(u0.len(), torus.sites());
    let mut cache: HashMap<u64, Marginal> = HashMap::new();
    let mut eta = vec![0u64; torus.sites()];
    for (x, &rho) in u0.iter().enumerate() {
        let key = rho.to_bits();
        let marginal = match cache.get(&key) {
            Some(m) => m,
            None => {
                let m = Marginal::from_density(g, rho, trunc_tol)?;
                cache.entry(key).or_insert(m)
            }
        };
        eta[x] = marginal.sample(rng);
    }
    Ok(Configuration::new(torus, eta))
}

/// Pairing of the scaled empirical measure with a test function:
/// `<alpha^N, testfn> = N^{-d} sum_x eta_x testfn(x/N)`.
pub fn empirical_pairing<F: Fn(&[f64]) -> f64>(
    torus: &LatticeTorus,
    eta: &[u64],
    testfn: F,
) -> f64 {
    let scale = (torus.sites() as f64).recip();
    let d = torus.dim();
    let mut sum = 0.0;
    for (x, &k) in eta.iter().enumerate() {
        if k > 0 {
            let p = torus.position(x);
            sum += k as f64 * testfn(&p[..d]);
        }
    }
    sum * scale
}

/// Block average over the box `{z : max_i |z_i - x_i| <= ell}` with periodic
/// wrap: `(2 ell + 1)^{-d} sum eta_z`.
pub fn block_average(torus: &LatticeTorus, eta: &[u64], x: usize, ell: usize) -> f64 {
    assert!(2 * ell < torus.side(), "block must fit in the torus");
    let d = torus.dim();
    let side = 2 * ell + 1;
    let count = side.pow(d as u32);
    let mut sum = 0u64;
    let mut offset = vec![0i64; d];
    for code in 0..count {
        let mut c = code;
        for slot in offset.iter_mut() {
            *slot = (c % side) as i64 - ell as i64;
            c /= side;
        }
        sum += eta[torus.offset(x, &offset)];
    }
    sum as f64 / count as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_profile_draws_empty_configuration() {
        let torus = LatticeTorus::new(2, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = init_product(torus, &vec![0.0; 64], &JumpRate::linear(), 1e-12, &mut rng)
            .unwrap();
        assert_eq!(cfg.total, 0);
    }

    #[test]
    fn constant_profile_mean_is_within_clt_band() {
        let torus = LatticeTorus::new(2, 32);
        let rho = 1.5;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = init_product(
            torus,
            &vec![rho; torus.sites()],
            &JumpRate::linear(),
            1e-12,
            &mut rng,
        )
        .unwrap();
        let mean = cfg.total as f64 / torus.sites() as f64;
        // Poisson variance equals rho.
        let band = 3.0 * (rho / torus.sites() as f64).sqrt();
        assert!((mean - rho).abs() < band, "{mean} vs {rho} +- {band}");
    }

    #[test]
    fn two_phase_profile_halves_match() {
        let torus = LatticeTorus::new(1, 4096);
        let (lo, hi) = (0.3, 2.0);
        let u0: Vec<f64> = (0..4096)
            .map(|x| if x < 2048 { lo } else { hi })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cfg = init_product(torus, &u0, &JumpRate::linear(), 1e-12, &mut rng).unwrap();
        let left: u64 = cfg.eta[..2048].iter().sum();
        let right: u64 = cfg.eta[2048..].iter().sum();
        let band_lo = 3.0 * (lo / 2048.0).sqrt();
        let band_hi = 3.0 * (hi / 2048.0).sqrt();
        assert!((left as f64 / 2048.0 - lo).abs() < band_lo);
        assert!((right as f64 / 2048.0 - hi).abs() < band_hi);
    }

    #[test]
    fn pairing_with_unit_testfn_is_density() {
        let torus = LatticeTorus::new(2, 4);
        let eta = vec![2u64; 16];
        let v = empirical_pairing(&torus, &eta, |_| 1.0);
        assert!((v - 2.0 * 16.0 / 16.0).abs() < 1e-14);
    }

    #[test]
    fn pairing_of_constant_field_factorizes() {
        let torus = LatticeTorus::new(2, 8);
        let eta = vec![3u64; 64];
        let f = |p: &[f64]| (2.0 * std::f64::consts::PI * p[0]).cos() + 0.25;
        let direct = empirical_pairing(&torus, &eta, f);
        let mut sum = 0.0;
        for x in 0..64 {
            let p = torus.position(x);
            sum += f(&p[..2]);
        }
        assert!((direct - 3.0 * sum / 64.0).abs() < 1e-13);
    }

    #[test]
    fn block_average_edge_cases() {
        let torus = LatticeTorus::new(2, 8);
        let mut eta = vec![0u64; 64];
        eta[torus.index(&[3, 4])] = 5;
        // ell = 0 is the site itself.
        assert_eq!(block_average(&torus, &eta, torus.index(&[3, 4]), 0), 5.0);
        // Constant configurations average to the constant.
        let flat = vec![2u64; 64];
        assert_eq!(block_average(&torus, &flat, 11, 3), 2.0);
        // A single particle inside the box contributes (2l+1)^{-d}.
        let got = block_average(&torus, &eta, torus.index(&[4, 4]), 1);
        assert!((got - 5.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn block_average_wraps_periodically() {
        let torus = LatticeTorus::new(1, 6);
        let eta = vec![6u64, 0, 0, 0, 0, 0];
        let got = block_average(&torus, &eta, 5, 1);
        assert!((got - 2.0).abs() < 1e-14);
    }
}
