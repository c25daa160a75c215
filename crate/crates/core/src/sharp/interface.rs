use super::SharpError;
use crate::pde::DensityField;

/// Level-set extraction result: edge-crossing points (for export), the
/// box-count area fraction of `{u > alpha*}`, its circular-mean centroid,
/// and the area-based radius estimate in d = 2.
#[derive(Debug, Clone)]
pub struct Interface {
    pub points: Vec<[f64; 3]>,
    pub area_fraction: f64,
    pub inside_sites: usize,
    pub centroid: [f64; 3],
    /// `sqrt(area / pi)`; only meaningful for a single disk in d = 2.
    pub radius_estimate: Option<f64>,
}

/// Find the `alpha*` level set of a lattice field: points where linear
/// interpolation along lattice edges crosses the level, plus the area-based
/// radius estimate (robust to pinched level sets).
pub fn extract_interface(field: &DensityField, alpha_star: f64) -> Result<Interface, SharpError> {
    let torus = &field.torus;
    let d = torus.dim();
    let n = torus.side();
    let sites = torus.sites();

    let mut points = Vec::new();
    let mut inside = 0usize;
    // Circular means per axis, so the centroid respects the torus topology.
    let mut cos_sum = [0.0f64; 3];
    let mut sin_sum = [0.0f64; 3];
    let two_pi = 2.0 * std::f64::consts::PI;

    for x in 0..sites {
        let ux = field.u[x] - alpha_star;
        if ux > 0.0 {
            inside += 1;
            let pos = torus.position(x);
            for axis in 0..d {
                cos_sum[axis] += (two_pi * pos[axis]).cos();
                sin_sum[axis] += (two_pi * pos[axis]).sin();
            }
        }
        for axis in 0..d {
            let y = torus.neighbor(x, axis, 1);
            let uy = field.u[y] - alpha_star;
            if ux == 0.0 {
                // A site exactly on the level contributes its own position once.
                if axis == 0 {
                    let p = torus.position(x);
                    points.push(p);
                }
                continue;
            }
            if ux * uy < 0.0 {
                let theta = ux / (ux - uy);
                let mut p = torus.position(x);
                p[axis] = (p[axis] + theta / n as f64).rem_euclid(1.0);
                points.push(p);
            }
        }
    }

    if inside == 0 || inside == sites {
        return Err(SharpError::NoCrossing);
    }

    let mut centroid = [0.0f64; 3];
    for axis in 0..d {
        let angle = sin_sum[axis].atan2(cos_sum[axis]);
        centroid[axis] = (angle / two_pi).rem_euclid(1.0);
    }
    let area_fraction = inside as f64 / sites as f64;
    let radius_estimate = if d == 2 {
        Some((area_fraction / std::f64::consts::PI).sqrt())
    } else {
        None
    };
    Ok(Interface {
        points,
        area_fraction,
        inside_sites: inside,
        centroid,
        radius_estimate,
    })
}

/// Signed distance from `v` to the circle of radius `r` about `center`, in
/// the torus metric (per-coordinate wrap to `[-1/2, 1/2)`); negative inside
/// the enclosed region.
pub fn signed_distance_circle(v: [f64; 2], center: [f64; 2], r: f64) -> f64 {
    assert!(r > 0.0);
    let wrap = |x: f64| {
        let mut y = (x + 0.5).rem_euclid(1.0) - 0.5;
        if y == -0.5 {
            y = 0.5;
        }
        y
    };
    let dx = wrap(v[0] - center[0]);
    let dy = wrap(v[1] - center[1]);
    (dx * dx + dy * dy).sqrt() - r
}
