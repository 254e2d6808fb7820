//! Savitzky-Golay least-squares polynomial smoothing.
//!
//! A degree-`order` polynomial is fitted by least squares to each window of
//! `frame = 2n + 1` samples and evaluated at the window center. The first and
//! last `n` samples are evaluated off-center against the first/last full
//! window, so polynomials of degree `<= order` pass through unchanged
//! everywhere, edges included.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SgParams {
    pub order: usize,
    pub frame: usize,
}

impl SgParams {
    /// Defaults for 360 Hz arrhythmia records.
    pub const DISEASE: SgParams = SgParams { order: 3, frame: 37 };
    /// Defaults for 128 Hz normal sinus rhythm records.
    pub const NORMAL: SgParams = SgParams { order: 3, frame: 13 };

    pub fn new(order: usize, frame: usize) -> Result<Self> {
        let p = SgParams { order, frame };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame < 3 || self.frame.is_multiple_of(2) {
            return Err(Error::InvalidParam(format!(
                "SG frame must be odd and >= 3, got {}",
                self.frame
            )));
        }
        if self.order >= self.frame {
            return Err(Error::InvalidParam(format!(
                "SG order {} must be below frame {}",
                self.order, self.frame
            )));
        }
        Ok(())
    }

    pub fn half_width(&self) -> usize {
        self.frame / 2
    }
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let m = b.len();
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::Degenerate("singular SG normal equations".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..m {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..m {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let s: f64 = (row + 1..m).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

/// Weights `w` (length `frame`) such that `sum w[j] f(j - n)` is the value at
/// `eval_offset` of the least-squares polynomial through `f(-n..=n)`.
pub fn sg_coefficients(params: SgParams, eval_offset: isize) -> Result<Vec<f64>> {
    params.validate()?;
    let n = params.half_width() as isize;
    if eval_offset.abs() > n {
        return Err(Error::InvalidParam(format!(
            "evaluation offset {eval_offset} outside [-{n}, {n}]"
        )));
    }
    let terms = params.order + 1;
    // Abscissae scaled to [-1, 1] keep the normal matrix well conditioned.
    let scale = n as f64;
    let xs: Vec<f64> = (-n..=n).map(|j| j as f64 / scale).collect();
    let mut gram = vec![vec![0.0; terms]; terms];
    for &x in &xs {
        let mut pow = vec![1.0; 2 * terms - 1];
        for k in 1..pow.len() {
            pow[k] = pow[k - 1] * x;
        }
        for (r, row) in gram.iter_mut().enumerate() {
            for (c, g) in row.iter_mut().enumerate() {
                *g += pow[r + c];
            }
        }
    }
    let x0 = eval_offset as f64 / scale;
    let basis: Vec<f64> = (0..terms).map(|k| x0.powi(k as i32)).collect();
    // w_j = phi(x_j)^T G^{-1} phi(x0); G is symmetric so solve G z = phi(x0).
    let z = solve_dense(gram, basis)?;
    Ok(xs
        .iter()
        .map(|&x| {
            let mut p = 1.0;
            let mut acc = 0.0;
            for zk in &z {
                acc += zk * p;
                p *= x;
            }
            acc
        })
        .collect())
}

pub fn sg_smooth(signal: &TimeSeries, params: SgParams) -> Result<TimeSeries> {
    let smoothed = sg_smooth_samples(signal.samples(), params)?;
    TimeSeries::new(smoothed, signal.sampling_hz())
}

pub fn sg_smooth_samples(x: &[f64], params: SgParams) -> Result<Vec<f64>> {
    params.validate()?;
    let frame = params.frame;
    let len = x.len();
    if len < frame {
        return Err(Error::TooShort {
            needed: frame,
            got: len,
        });
    }
    let n = params.half_width();
    let dot = |w: &[f64], start: usize| -> f64 {
        w.iter().zip(&x[start..start + frame]).map(|(a, b)| a * b).sum()
    };

    let mut out = vec![0.0; len];
    let center = sg_coefficients(params, 0)?;
    for i in n..len - n {
        out[i] = dot(&center, i - n);
    }
    let tail_start = len - frame;
    for i in 0..n {
        let head = sg_coefficients(params, i as isize - n as isize)?;
        out[i] = dot(&head, 0);
        let tail = sg_coefficients(params, n as isize - i as isize)?;
        out[len - 1 - i] = dot(&tail, tail_start);
    }
    Ok(out)
}
