use crate::error::{Error, Result};

/// Natural cubic spline through `(xs, ys)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n != ys.len() {
            return Err(Error::invalid(
                "spline abscissae and ordinates differ in length",
            ));
        }
        if n < 2 {
            return Err(Error::invalid("spline needs at least two knots"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("spline knots must be strictly increasing"));
        }

        // Thomas algorithm on the tridiagonal system for interior second derivatives.
        let mut m = vec![0.0; n];
        if n > 2 {
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            let mut upper = vec![0.0; k];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            }
            for i in 1..k {
                let lower = xs[i + 1] - xs[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self { xs, ys, m })
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    /// Evaluates the spline; outside the knot range the end values are held.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passes_through_knots() {
        let xs: Vec<f64> = (0..12).map(|i| i as f64 * 0.7).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x * 1.3).sin() + x).collect();
        let s = CubicSpline::new(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(s.eval(*x), *y);
        }
    }

    #[test]
    fn reproduces_linear_data() {
        let xs = vec![0.0, 1.0, 2.5, 4.0, 7.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        let s = CubicSpline::new(xs, ys).unwrap();
        for i in 0..70 {
            let x = i as f64 * 0.1;
            assert!((s.eval(x) - (3.0 - 2.0 * x)).abs() < 1e-12);
        }
    }

    #[test]
    fn converges_on_smooth_function() {
        let n = 200;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64 * 6.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.cos()).collect();
        let s = CubicSpline::new(xs, ys).unwrap();
        for i in 1..599 {
            let x = 0.5 + i as f64 * 0.0085;
            assert!((s.eval(x) - x.cos()).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_unsorted() {
        assert!(CubicSpline::new(vec![0.0, 2.0, 1.0], vec![0.0; 3]).is_err());
    }
}
