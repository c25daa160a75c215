use super::{RateModel, RatesError};
use crate::sim::LatticeTorus;

/// Closed forms of `L_ZR^{*,nu} 1` and `L_G^{*,nu} 1` at a configuration
/// `eta`, for the inhomogeneous product measure with site densities `u`.
///
/// ```text
/// L_ZR^{*,nu} 1 = sum_x [sum_{|e|=1} phi(u(x+e)) - 2d phi(u(x))] / phi(u(x)) * g(eta_x)
/// L_G^{*,nu} 1  = sum_x c_x^+(eta^{x,-}) g(eta_x)/phi(u(x))
///                     + c_x^-(eta^{x,+}) phi(u(x))/g(eta_x+1)
///                     - c_x^+(eta) - c_x^-(eta)
/// ```
///
/// Intended for tiny lattices; evaluation is exact but not optimized.
/// Requires `u(x) > 0` at every site.
pub fn adjoint_one(
    model: &RateModel,
    torus: &LatticeTorus,
    u: &[f64],
    eta: &[u64],
) -> Result<(f64, f64), RatesError> {
    assert_eq!(u.len(), torus.sites());
    assert_eq!(eta.len(), torus.sites());
    if u.iter().any(|&x| !(x > 0.0)) {
        return Err(RatesError::InvalidRate(
            "adjoint_one needs strictly positive site densities".into(),
        ));
    }
    let phis: Vec<f64> = u
        .iter()
        .map(|&rho| model.phi(rho))
        .collect::<Result<_, _>>()?;

    let d = torus.dim();
    let g = &model.g;
    let spec = &model.glauber;

    let mut zr = 0.0;
    let mut gl = 0.0;
    let mut scratch = eta.to_vec();
    for x in 0..torus.sites() {
        // Zero-range part: plain second difference of phi(u(.)) at x.
        let mut second_diff = -2.0 * d as f64 * phis[x];
        for axis in 0..d {
            second_diff += phis[torus.neighbor(x, axis, 1)] + phis[torus.neighbor(x, axis, -1)];
        }
        zr += second_diff / phis[x] * g.g(eta[x]);

        // Glauber part. Rates at modified configurations are evaluated on a
        // scratch copy so that offset aliasing on small tori stays exact.
        let (cp, cm) = spec.site_rates(g, torus, eta, x);
        let creation_term = if eta[x] >= 1 {
            scratch[x] = eta[x] - 1;
            let cp_down = spec.site_rates(g, torus, &scratch, x).0;
            scratch[x] = eta[x];
            cp_down * g.g(eta[x]) / phis[x]
        } else {
            0.0
        };
        scratch[x] = eta[x] + 1;
        let cm_up = spec.site_rates(g, torus, &scratch, x).1;
        scratch[x] = eta[x];
        let annihilation_term = cm_up * phis[x] / g.g(eta[x] + 1);

        gl += creation_term + annihilation_term - cp - cm;
    }
    Ok((zr, gl))
}
