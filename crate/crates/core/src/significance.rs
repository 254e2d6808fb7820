//! Significant-IMF selection by normalized correlation with the source.
//!
//! `C(x, c) = sum(x c) / sqrt(sum(x^2) sum(c^2))`; an IMF is significant when
//! `C >= max(C) / eta`. The comparison uses the signed correlation, so an
//! anti-correlated IMF is never significant.

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_ETA: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceReport {
    pub correlations: Vec<f64>,
    pub lambda: f64,
    pub eta: f64,
    pub significant: Vec<bool>,
}

pub fn imf_correlation(x: &[f64], c: &[f64]) -> Result<f64> {
    if x.len() != c.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: c.len(),
        });
    }
    let (mut xc, mut xx, mut cc) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(c) {
        xc += a * b;
        xx += a * a;
        cc += b * b;
    }
    if xx == 0.0 || cc == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    Ok((xc / (xx.sqrt() * cc.sqrt())).clamp(-1.0, 1.0))
}

pub fn select_significant<S: AsRef<[f64]>>(
    x: &[f64],
    imfs: &[S],
    eta: f64,
) -> Result<SignificanceReport> {
    if !(eta.is_finite() && eta > 1.0) {
        return Err(Error::InvalidParam(format!("eta must exceed 1, got {eta}")));
    }
    if imfs.is_empty() {
        return Err(Error::InvalidParam("no IMFs to rank".into()));
    }
    if x.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroEnergy);
    }
    let correlations = imfs
        .iter()
        .map(|c| imf_correlation(x, c.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    Ok(report_from_correlations(correlations, eta))
}

pub(crate) fn report_from_correlations(correlations: Vec<f64>, eta: f64) -> SignificanceReport {
    let c_max = correlations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lambda = c_max / eta;
    let significant = correlations.iter().map(|&c| c >= lambda).collect();
    SignificanceReport {
        correlations,
        lambda,
        eta,
        significant,
    }
}
