use rayon::prelude::*;

use super::PdeError;
use crate::rates::ModelCurves;
use crate::sim::LatticeTorus;

/// Real-valued lattice density field at a point in time.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub torus: LatticeTorus,
    pub u: Vec<f64>,
    pub t: f64,
}

impl DensityField {
    pub fn new(torus: LatticeTorus, u: Vec<f64>) -> Self {
        assert_eq!(u.len(), torus.sites());
        assert!(u.iter().all(|v| v.is_finite() && *v >= 0.0));
        Self { torus, u, t: 0.0 }
    }

    pub fn constant(torus: LatticeTorus, value: f64) -> Self {
        Self::new(torus, vec![value; torus.sites()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeParams {
    /// Reaction speed `K`.
    pub k: f64,
    pub dt: f64,
    /// CFL factor in (0, 1].
    pub safety: f64,
}

impl PdeParams {
    /// Step size from the stability bound
    /// `dt = safety / (4 d N^2 phi_lip + K f_lip)`.
    pub fn from_cfl(torus: &LatticeTorus, k: f64, curves: &ModelCurves, safety: f64) -> Self {
        assert!(safety > 0.0 && safety <= 1.0);
        let dt = safety / Self::stiffness(torus, k, curves);
        Self { k, dt, safety }
    }

    fn stiffness(torus: &LatticeTorus, k: f64, curves: &ModelCurves) -> f64 {
        let n2 = (torus.side() * torus.side()) as f64;
        4.0 * torus.dim() as f64 * n2 * curves.phi_lip + k * curves.f_lip
    }

    pub fn cfl_bound(&self, torus: &LatticeTorus, curves: &ModelCurves) -> f64 {
        self.safety / Self::stiffness(torus, self.k, curves)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub t: f64,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldTrajectory {
    pub torus: LatticeTorus,
    pub dt: f64,
    pub snapshots: Vec<FieldSnapshot>,
}

/// Parallelize stencil passes only past this site count.
const PAR_THRESHOLD: usize = 1 << 12;

fn phi_pass(curves: &ModelCurves, u: &[f64], out: &mut Vec<f64>) {
    out.clear();
    if u.len() >= PAR_THRESHOLD {
        u.par_iter()
            .map(|&v| curves.phi_eval(v))
            .collect_into_vec(out);
    } else {
        out.extend(u.iter().map(|&v| curves.phi_eval(v)));
    }
}

fn laplacian_from_phi(torus: &LatticeTorus, phi: &[f64], out: &mut [f64]) {
    let d = torus.dim();
    let n2 = (torus.side() * torus.side()) as f64;
    let kernel = |x: usize, out_x: &mut f64| {
        let mut acc = -2.0 * d as f64 * phi[x];
        for axis in 0..d {
            acc += phi[torus.neighbor(x, axis, 1)] + phi[torus.neighbor(x, axis, -1)];
        }
        *out_x = n2 * acc;
    };
    if phi.len() >= PAR_THRESHOLD {
        out.par_iter_mut().enumerate().for_each(|(x, o)| kernel(x, o));
    } else {
        out.iter_mut().enumerate().for_each(|(x, o)| kernel(x, o));
    }
}

/// `lap_N phi(u)`: the discrete Laplacian of `phi` composed with the field,
/// `sum_i N^2 (phi(u(x+e_i)) + phi(u(x-e_i)) - 2 phi(u(x)))`, periodic wrap.
pub fn discrete_laplacian_phi(field: &DensityField, curves: &ModelCurves) -> Vec<f64> {
    let mut phi = Vec::with_capacity(field.u.len());
    phi_pass(curves, &field.u, &mut phi);
    let mut out = vec![0.0; field.u.len()];
    laplacian_from_phi(&field.torus, &phi, &mut out);
    out
}

fn step_in_place(
    torus: &LatticeTorus,
    curves: &ModelCurves,
    params: &PdeParams,
    u: &[f64],
    phi_buf: &mut Vec<f64>,
    out: &mut [f64],
) {
    phi_pass(curves, u, phi_buf);
    let d = torus.dim();
    let n2 = (torus.side() * torus.side()) as f64;
    let dt = params.dt;
    let k = params.k;
    let phi = &*phi_buf;
    let kernel = |x: usize, o: &mut f64| {
        let mut acc = -2.0 * d as f64 * phi[x];
        for axis in 0..d {
            acc += phi[torus.neighbor(x, axis, 1)] + phi[torus.neighbor(x, axis, -1)];
        }
        *o = u[x] + dt * (n2 * acc + k * curves.f_eval(u[x]));
    };
    if u.len() >= PAR_THRESHOLD {
        out.par_iter_mut().enumerate().for_each(|(x, o)| kernel(x, o));
    } else {
        out.iter_mut().enumerate().for_each(|(x, o)| kernel(x, o));
    }
}

/// One forward-Euler step `u' = u + dt (lap_N phi(u) + K f(u))`.
///
/// The CFL invariant is checked first; under it the update preserves the
/// discrete maximum principle, hence the invariant interval.
pub fn step_euler(
    field: &DensityField,
    params: &PdeParams,
    curves: &ModelCurves,
) -> Result<DensityField, PdeError> {
    let bound = params.cfl_bound(&field.torus, curves);
    if params.dt > bound * (1.0 + 1e-12) {
        return Err(PdeError::CflViolation {
            dt: params.dt,
            bound,
        });
    }
    let mut out = vec![0.0; field.u.len()];
    let mut phi_buf = Vec::with_capacity(field.u.len());
    step_in_place(&field.torus, curves, params, &field.u, &mut phi_buf, &mut out);
    Ok(DensityField {
        torus: field.torus,
        u: out,
        t: field.t + params.dt,
    })
}

/// Iterated Euler steps with snapshots at the given cadence (`None` records
/// every step). The final snapshot lands within `dt` of `t_end`.
pub fn solve(
    u0: &DensityField,
    params: &PdeParams,
    curves: &ModelCurves,
    t_end: f64,
    snapshot_every: Option<f64>,
) -> Result<FieldTrajectory, PdeError> {
    let bound = params.cfl_bound(&u0.torus, curves);
    if params.dt > bound * (1.0 + 1e-12) {
        return Err(PdeError::CflViolation {
            dt: params.dt,
            bound,
        });
    }
    let steps = (t_end / params.dt).ceil() as u64;
    let mut snapshots = vec![FieldSnapshot {
        t: u0.t,
        u: u0.u.clone(),
    }];
    let mut cur = u0.u.clone();
    let mut next = vec![0.0; cur.len()];
    let mut phi_buf = Vec::with_capacity(cur.len());
    let mut t = u0.t;
    let mut next_snap_at = snapshot_every.map(|s| {
        assert!(s > 0.0);
        u0.t + s
    });
    for _ in 0..steps {
        step_in_place(&u0.torus, curves, params, &cur, &mut phi_buf, &mut next);
        std::mem::swap(&mut cur, &mut next);
        t += params.dt;
        let record = match next_snap_at {
            None => true,
            Some(s) => t + 0.5 * params.dt >= s,
        };
        if record {
            snapshots.push(FieldSnapshot { t, u: cur.clone() });
            if let Some(s) = next_snap_at {
                let every = snapshot_every.unwrap();
                let mut bump = s;
                while t + 0.5 * params.dt >= bump {
                    bump += every;
                }
                next_snap_at = Some(bump);
            }
        }
    }
    if snapshots.last().map(|s| s.t) != Some(t) {
        snapshots.push(FieldSnapshot { t, u: cur });
    }
    Ok(FieldTrajectory {
        torus: u0.torus,
        dt: params.dt,
        snapshots,
    })
}

/// The step-function view `u^N(t, v)`: the value at the unique site whose
/// box `B(x/N, 1/N)` contains the macroscopic point `v` in `[0,1)^d`.
pub fn step_function_view(field: &DensityField, v: &[f64]) -> f64 {
    let torus = &field.torus;
    assert_eq!(v.len(), torus.dim());
    let n = torus.side();
    let mut coords = [0usize; 3];
    for (axis, &vi) in v.iter().enumerate() {
        debug_assert!((0.0..1.0).contains(&vi));
        coords[axis] = ((vi * n as f64 + 0.5).floor() as usize) % n;
    }
    field.u[torus.index(&coords[..torus.dim()])]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub t: f64,
    pub site: usize,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonReport {
    pub ordered: bool,
    pub first_violation: Option<Violation>,
}

/// Evolve an ordered pair of fields and verify that the ordering persists
/// sitewise at every snapshot, with a `1e-12` tie tolerance.
pub fn comparison_check(
    lower: &DensityField,
    upper: &DensityField,
    params: &PdeParams,
    curves: &ModelCurves,
    t_end: f64,
    snapshot_every: Option<f64>,
) -> Result<ComparisonReport, PdeError> {
    if lower
        .u
        .iter()
        .zip(&upper.u)
        .any(|(l, h)| *l > *h + 1e-12)
    {
        return Err(PdeError::InvalidInput(
            "initial fields are not ordered".into(),
        ));
    }
    let lo = solve(lower, params, curves, t_end, snapshot_every)?;
    let hi = solve(upper, params, curves, t_end, snapshot_every)?;
    for (snap_lo, snap_hi) in lo.snapshots.iter().zip(&hi.snapshots) {
        for (site, (l, h)) in snap_lo.u.iter().zip(&snap_hi.u).enumerate() {
            if *l > *h + 1e-12 {
                return Ok(ComparisonReport {
                    ordered: false,
                    first_violation: Some(Violation {
                        t: snap_lo.t,
                        site,
                        lower: *l,
                        upper: *h,
                    }),
                });
            }
        }
    }
    Ok(ComparisonReport {
        ordered: true,
        first_violation: None,
    })
}
