use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("adaptive quadrature failed to converge on [{a}, {b}] (depth limit {depth})")]
    NonConvergent { a: f64, b: f64, depth: usize },
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
///
/// Splits until the local Richardson estimate meets `abs_tol + rel_tol * |I|`,
/// where `|I|` is the running magnitude of the whole integral.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64, QuadError> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    // First-pass magnitude estimate for the relative tolerance.
    let scale = whole.abs().max(abs_tol);
    let mut out = 0.0;
    recurse(
        f,
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        rel_tol * scale + abs_tol,
        MAX_DEPTH,
        &mut out,
    )?;
    Ok(out)
}

const MAX_DEPTH: usize = 52;

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
    acc: &mut f64,
) -> Result<(), QuadError> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let err = left + right - whole;
    if err.abs() <= 15.0 * tol || (b - a).abs() < f64::EPSILON * (a.abs() + b.abs()) {
        *acc += left + right + err / 15.0;
        return Ok(());
    }
    if depth == 0 {
        return Err(QuadError::NonConvergent {
            a,
            b,
            depth: MAX_DEPTH,
        });
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, acc)?;
    recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, acc)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
///
/// Computed once per order by Newton iteration on the Legendre polynomial and
/// cached behind a lock.
pub fn gauss_legendre_nodes(n: usize) -> &'static [(f64, f64)] {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static [(f64, f64)]>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(n)
        .or_insert_with(|| Box::leak(compute_gl(n).into_boxed_slice()))
}

fn compute_gl(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 2);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Standard initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((-x, w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Fixed Gauss-Legendre quadrature of `f` on a single panel `[a, b]`.
pub fn gauss_legendre_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, order: usize) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = 0.0;
    for &(x, w) in gauss_legendre_nodes(order) {
        sum += w * f(mid + half * x);
    }
    sum * half
}
