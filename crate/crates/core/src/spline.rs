//! Natural cubic spline through integer-indexed knots.

use crate::error::{Error, Result};

/// Natural cubic spline (zero second derivative at both end knots).
#[derive(Debug, Clone)]
pub struct NaturalSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let k = xs.len();
        if k < 2 || ys.len() != k {
            return Err(Error::InvalidParam(format!(
                "spline needs at least 2 knots with matching values, got {k}"
            )));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParam("spline knots must be strictly increasing".into()));
        }
        let mut m = vec![0.0; k];
        if k > 2 {
            // Thomas algorithm on the interior equations
            // h[i-1] m[i-1] + 2(h[i-1] + h[i]) m[i] + h[i] m[i+1] = rhs[i]
            let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
            let n = k - 2;
            let mut diag = vec![0.0; n];
            let mut upper = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            for i in 0..n {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                upper[i] = h[i + 1];
                rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h[i + 1] - (ys[i + 1] - ys[i]) / h[i]);
            }
            for i in 1..n {
                let f = h[i] / diag[i - 1];
                diag[i] -= f * upper[i - 1];
                rhs[i] -= f * rhs[i - 1];
            }
            m[n] = rhs[n - 1] / diag[n - 1];
            for i in (0..n - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self { xs, ys, m })
    }

    fn eval_segment(&self, seg: usize, x: f64) -> f64 {
        let (x0, x1) = (self.xs[seg], self.xs[seg + 1]);
        let (y0, y1) = (self.ys[seg], self.ys[seg + 1]);
        let (m0, m1) = (self.m[seg], self.m[seg + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0
    }

    pub fn eval(&self, x: f64) -> f64 {
        let last = self.xs.len() - 2;
        let seg = match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p => (p - 1).min(last),
        };
        self.eval_segment(seg, x)
    }

    /// Evaluates at `0, 1, ..., len - 1` in one pass.
    pub fn eval_grid(&self, len: usize) -> Vec<f64> {
        let last = self.xs.len() - 2;
        let mut seg = 0;
        (0..len)
            .map(|i| {
                let x = i as f64;
                while seg < last && x > self.xs[seg + 1] {
                    seg += 1;
                }
                self.eval_segment(seg, x)
            })
            .collect()
    }
}

/// Natural cubic spline through `(index, value)` knots, sampled at every
/// integer index in `0..length`. Outside the knot span the end segments are
/// extended.
pub fn spline_envelope(knots: &[(usize, f64)], length: usize) -> Result<Vec<f64>> {
    if knots.len() < 2 {
        return Err(Error::InvalidParam(format!(
            "envelope needs at least 2 knots, got {}",
            knots.len()
        )));
    }
    if let Some(&(i, _)) = knots.iter().find(|(i, _)| *i >= length) {
        return Err(Error::InvalidParam(format!("knot index {i} outside 0..{length}")));
    }
    let xs = knots.iter().map(|(i, _)| *i as f64).collect();
    let ys = knots.iter().map(|(_, v)| *v).collect();
    Ok(NaturalSpline::new(xs, ys)?.eval_grid(length))
}
