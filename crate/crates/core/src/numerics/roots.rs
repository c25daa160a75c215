use thiserror::Error;

#[derive(Debug, Error)]
pub enum BracketError {
    #[error("no sign change on [{a}, {b}]: f(a)={fa}, f(b)={fb}")]
    NoSignChange { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("root finder failed to converge within {0} iterations")]
    IterationLimit(usize),
}

/// Bisection on a bracketing interval, to relative width `x_tol`.
pub fn bisect<F: Fn(f64) -> f64>(
    f: &F,
    mut a: f64,
    mut b: f64,
    x_tol: f64,
    max_iter: usize,
) -> Result<f64, BracketError> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(BracketError::NoSignChange { a, b, fa, fb });
    }
    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= x_tol * (1.0 + m.abs()) {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Newton iteration safeguarded by a bisection bracket.
///
/// `df` is the derivative; any Newton step leaving the current bracket (or a
/// vanishing derivative) falls back to bisection, so convergence is
/// guaranteed for a continuous `f` with a sign change on `[a, b]`.
pub fn newton_bisect<F, D>(
    f: &F,
    df: &D,
    mut a: f64,
    mut b: f64,
    x_tol: f64,
    max_iter: usize,
) -> Result<f64, BracketError>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(BracketError::NoSignChange { a, b, fa, fb });
    }
    let mut x = 0.5 * (a + b);
    let mut fx = f(x);
    for _ in 0..max_iter {
        if fx == 0.0 || (b - a).abs() <= x_tol * (1.0 + x.abs()) {
            return Ok(x);
        }
        // Maintain the bracket.
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        let d = df(x);
        let newton = x - fx / d;
        x = if d != 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        fx = f(x);
    }
    Ok(x)
}
