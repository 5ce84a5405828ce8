//! Natural cubic spline through uniformly spaced knots.

use crate::error::{invalid, Result};

/// Natural cubic spline with knots at 0, 1, ..., n-1.
#[derive(Debug, Clone)]
pub struct UniformSpline {
    values: Vec<f64>,
    /// Second derivatives at the knots; zero at both ends.
    curvature: Vec<f64>,
}

impl UniformSpline {
    pub fn fit(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 4 {
            return Err(invalid(format!("cubic spline needs at least 4 knots, got {n}")));
        }
        // Interior system: M[i-1] + 4 M[i] + M[i+1] = 6 (y[i+1] - 2 y[i] + y[i-1]), Thomas algorithm.
        let m = n - 2;
        let mut diag = vec![4.0; m];
        let mut rhs: Vec<f64> = (1..n - 1)
            .map(|i| 6.0 * (values[i + 1] - 2.0 * values[i] + values[i - 1]))
            .collect();
        for i in 1..m {
            let w = 1.0 / diag[i - 1];
            diag[i] -= w;
            rhs[i] -= w * rhs[i - 1];
        }
        let mut interior = vec![0.0; m];
        interior[m - 1] = rhs[m - 1] / diag[m - 1];
        for i in (0..m - 1).rev() {
            interior[i] = (rhs[i] - interior[i + 1]) / diag[i];
        }
        let mut curvature = Vec::with_capacity(n);
        curvature.push(0.0);
        curvature.extend(interior);
        curvature.push(0.0);
        Ok(UniformSpline {
            values: values.to_vec(),
            curvature,
        })
    }

    /// Evaluates at `x` in knot units; clamps to the knot range.
    pub fn eval(&self, x: f64) -> f64 {
        let last = self.values.len() - 1;
        let x = x.clamp(0.0, last as f64);
        let i = (x.floor() as usize).min(last - 1);
        let t = x - i as f64;
        self.eval_segment(i, t)
    }

    fn eval_segment(&self, i: usize, t: f64) -> f64 {
        let s = 1.0 - t;
        self.values[i]
            + t * (self.values[i + 1] - self.values[i])
            + ((s * s * s - s) * self.curvature[i] + (t * t * t - t) * self.curvature[i + 1]) / 6.0
    }

    /// Evaluates on a grid `factor` times denser than the knots, from the first
    /// knot to the last inclusive: `(n - 1) * factor + 1` points.
    pub fn resample(&self, factor: usize) -> Vec<f64> {
        let n = self.values.len();
        let mut out = Vec::with_capacity((n - 1) * factor + 1);
        for i in 0..n - 1 {
            out.push(self.values[i]);
            for k in 1..factor {
                out.push(self.eval_segment(i, k as f64 / factor as f64));
            }
        }
        out.push(self.values[n - 1]);
        out
    }
}
