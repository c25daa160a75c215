/// Clamped cubic spline on a uniform knot grid, with end slopes taken from
/// one-sided 5-point differences of the data (no natural-spline boundary
/// layer).
///
/// Built once from tabulated values; evaluation and first derivative are O(1)
/// per call. Queries outside the knot range are evaluated on the boundary
/// cubic (smooth extrapolation over small overshoots only).
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn from_uniform(x0: f64, x1: f64, y: Vec<f64>) -> Self {
        let n = y.len();
        assert!(n >= 6, "spline needs at least 6 knots");
        assert!(x1 > x0);
        let h = (x1 - x0) / (n - 1) as f64;

        // End slopes by 5-point one-sided differences, O(h^4).
        let slope_a = (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4])
            / (12.0 * h);
        let slope_b = (25.0 * y[n - 1] - 48.0 * y[n - 2] + 36.0 * y[n - 3] - 16.0 * y[n - 4]
            + 3.0 * y[n - 5])
            / (12.0 * h);

        // Tridiagonal system for the knot second derivatives, clamped rows
        // at both ends, Thomas algorithm.
        let mut diag = vec![4.0; n];
        let mut rhs = vec![0.0; n];
        diag[0] = 2.0;
        rhs[0] = 6.0 * ((y[1] - y[0]) / h - slope_a) / h;
        for i in 1..n - 1 {
            rhs[i] = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h);
        }
        diag[n - 1] = 2.0;
        rhs[n - 1] = 6.0 * (slope_b - (y[n - 1] - y[n - 2]) / h) / h;

        let mut c_prime = vec![0.0; n];
        let mut d_prime = vec![0.0; n];
        c_prime[0] = 1.0 / diag[0];
        d_prime[0] = rhs[0] / diag[0];
        for i in 1..n {
            let denom = diag[i] - c_prime[i - 1];
            c_prime[i] = 1.0 / denom;
            d_prime[i] = (rhs[i] - d_prime[i - 1]) / denom;
        }
        let mut m = vec![0.0; n];
        m[n - 1] = d_prime[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = d_prime[i] - c_prime[i] * m[i + 1];
        }
        Self { x0, h, y, m }
    }

    #[inline]
    fn segment(&self, x: f64) -> (usize, f64) {
        let n = self.y.len();
        let t = (x - self.x0) / self.h;
        let i = (t.floor() as isize).clamp(0, n as isize - 2) as usize;
        (i, x - (self.x0 + i as f64 * self.h))
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (i, dx) = self.segment(x);
        let h = self.h;
        let a = (self.y[i + 1] - self.y[i]) / h - h * (2.0 * self.m[i] + self.m[i + 1]) / 6.0;
        self.y[i] + dx * (a + dx * (self.m[i] / 2.0 + dx * (self.m[i + 1] - self.m[i]) / (6.0 * h)))
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let (i, dx) = self.segment(x);
        let h = self.h;
        let a = (self.y[i + 1] - self.y[i]) / h - h * (2.0 * self.m[i] + self.m[i + 1]) / 6.0;
        a + dx * (self.m[i] + dx * (self.m[i + 1] - self.m[i]) / (2.0 * h))
    }

    pub fn deriv2(&self, x: f64) -> f64 {
        let (i, dx) = self.segment(x);
        self.m[i] + dx * (self.m[i + 1] - self.m[i]) / self.h
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x0, self.x0 + self.h * (self.y.len() - 1) as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_smooth_function() {
        let n = 512;
        let (a, b) = (0.1, 2.3);
        let f = |x: f64| (1.5 * x).sin() + 0.25 * x * x;
        let df = |x: f64| 1.5 * (1.5 * x).cos() + 0.5 * x;
        let y: Vec<f64> = (0..n)
            .map(|i| f(a + (b - a) * i as f64 / (n - 1) as f64))
            .collect();
        let s = CubicSpline::from_uniform(a, b, y);
        for j in 0..1000 {
            let x = a + (b - a) * (j as f64 + 0.5) / 1000.0;
            assert!((s.eval(x) - f(x)).abs() < 1e-8, "value at {x}");
            assert!((s.deriv(x) - df(x)).abs() < 1e-5, "derivative at {x}");
        }
    }

    #[test]
    fn interpolates_knots_exactly() {
        let y = vec![1.0, -0.5, 2.0, 0.0, 3.0, 1.0];
        let s = CubicSpline::from_uniform(0.0, 5.0, y.clone());
        for (i, v) in y.iter().enumerate() {
            assert!((s.eval(i as f64) - v).abs() < 1e-12);
        }
    }
}
