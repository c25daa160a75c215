use thiserror::Error;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("adaptive step size underflow at t={t}, h={h}")]
    StepUnderflow { t: f64, h: f64 },
}

/// Adaptive Cash-Karp Runge-Kutta 4(5) for the scalar autonomous ODE
/// `y' = f(y)`, integrated from 0 to `t_end`. Returns `y(t_end)`.
pub fn solve_scalar_ode<F: Fn(f64) -> f64>(
    f: &F,
    y0: f64,
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64, OdeError> {
    if t_end == 0.0 {
        return Ok(y0);
    }
    assert!(t_end > 0.0, "only forward integration is supported");
    let mut t = 0.0;
    let mut y = y0;
    let mut h = (t_end / 16.0).min(0.1).max(1e-8);
    let h_min = 1e-15 * t_end.max(1.0);
    let mut steps = 0usize;
    while t < t_end {
        if h < h_min {
            return Err(OdeError::StepUnderflow { t, h });
        }
        if t + h > t_end {
            h = t_end - t;
        }
        let (y_next, err) = cash_karp_step(f, y, h);
        let tol = abs_tol + rel_tol * y.abs().max(y_next.abs());
        if err <= tol || h <= h_min * 2.0 {
            t += h;
            y = y_next;
            // Grow cautiously after an accepted step.
            let factor = if err > 0.0 {
                0.9 * (tol / err).powf(0.2)
            } else {
                5.0
            };
            h *= factor.clamp(0.2, 5.0);
        } else {
            h *= (0.9 * (tol / err).powf(0.25)).clamp(0.1, 0.9);
        }
        steps += 1;
        if steps > 50_000_000 {
            return Err(OdeError::StepUnderflow { t, h });
        }
    }
    Ok(y)
}

/// One Cash-Karp step: returns the 5th-order value and an error estimate.
fn cash_karp_step<F: Fn(f64) -> f64>(f: &F, y: f64, h: f64) -> (f64, f64) {
    let k1 = f(y);
    let k2 = f(y + h * (0.2 * k1));
    let k3 = f(y + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2));
    let k4 = f(y + h * (0.3 * k1 - 0.9 * k2 + 1.2 * k3));
    let k5 = f(y + h * (-11.0 / 54.0 * k1 + 2.5 * k2 - 70.0 / 27.0 * k3 + 35.0 / 27.0 * k4));
    let k6 = f(y
        + h * (1631.0 / 55296.0 * k1
            + 175.0 / 512.0 * k2
            + 575.0 / 13824.0 * k3
            + 44275.0 / 110592.0 * k4
            + 253.0 / 4096.0 * k5));
    let y5 = y
        + h * (37.0 / 378.0 * k1 + 250.0 / 621.0 * k3 + 125.0 / 594.0 * k4 + 512.0 / 1771.0 * k6);
    let y4 = y
        + h * (2825.0 / 27648.0 * k1
            + 18575.0 / 48384.0 * k3
            + 13525.0 / 55296.0 * k4
            + 277.0 / 14336.0 * k5
            + 0.25 * k6);
    (y5, (y5 - y4).abs())
}
