//! Empirical mode decomposition by envelope-mean sifting.
//!
//! Each sift builds upper and lower cubic-spline envelopes through the local
//! maxima and minima, then subtracts their mean. Sifting for one IMF stops
//! as soon as the sum-of-deviations statistic drops to `sd_max` or the
//! candidate passes the extrema/zero-crossing test, or after
//! `max_sift_iters` sifts.
//! Each IMF is subtracted from the running residue; decomposition ends when
//! the residue has fewer than two interior extrema, is flat to rounding, or
//! `max_imfs` is reached.
//!
//! By construction `signal == sum(imfs) + residue` up to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TimeSeries;
use crate::spline::spline_envelope;

/// Guard added to the SD denominator.
pub const SD_EPSILON: f64 = 1e-12;

/// A residue whose peak-to-peak range is below this fraction of the input's
/// peak magnitude is treated as constant (rounding noise, e.g. after
/// smoothing a flat signal).
pub const NEGLIGIBLE_RANGE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplineBoundary {
    /// Both series endpoints are appended to the maxima and the minima knots.
    ClampEndpoints,
    /// Knots are the extrema only; the end cubic segments extrapolate to the
    /// series edges. Needs two maxima and two minima.
    Extrapolate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SiftConfig {
    pub sd_max: f64,
    pub max_sift_iters: usize,
    pub max_imfs: usize,
    pub spline_boundary: SplineBoundary,
}

impl Default for SiftConfig {
    fn default() -> Self {
        Self {
            sd_max: 0.3,
            max_sift_iters: 150,
            max_imfs: 20,
            spline_boundary: SplineBoundary::ClampEndpoints,
        }
    }
}

impl SiftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sd_max > 0.0 && self.sd_max <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "sd_max must lie in (0, 1], got {}",
                self.sd_max
            )));
        }
        if self.max_sift_iters == 0 {
            return Err(Error::InvalidParam("max_sift_iters must be >= 1".into()));
        }
        if self.max_imfs == 0 {
            return Err(Error::InvalidParam("max_imfs must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Imf {
    pub samples: Vec<f64>,
    pub sift_count: usize,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub imfs: Vec<Imf>,
    pub residue: Vec<f64>,
    pub source_length: usize,
}

impl Decomposition {
    /// `sum(imfs) + residue`, sample by sample.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.residue.clone();
        for imf in &self.imfs {
            for (o, v) in out.iter_mut().zip(&imf.samples) {
                *o += v;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extrema {
    pub maxima: Vec<(usize, f64)>,
    pub minima: Vec<(usize, f64)>,
}

impl Extrema {
    pub fn count(&self) -> usize {
        self.maxima.len() + self.minima.len()
    }
}

/// Strict interior extrema. A plateau bordered on both sides by lower (higher)
/// values is reported once, at its first index.
pub fn find_extrema(x: &[f64]) -> Extrema {
    let mut ext = Extrema::default();
    let len = x.len();
    if len < 3 {
        return ext;
    }
    let mut i = 1;
    while i < len - 1 {
        let rising = x[i] > x[i - 1];
        let falling = x[i] < x[i - 1];
        if !(rising || falling) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < len && x[j + 1] == x[i] {
            j += 1;
        }
        if j + 1 < len {
            if rising && x[j + 1] < x[i] {
                ext.maxima.push((i, x[i]));
            } else if falling && x[j + 1] > x[i] {
                ext.minima.push((i, x[i]));
            }
        }
        i = j + 1;
    }
    ext
}

/// Number of sign changes, ignoring exact zeros (a run of zeros between
/// opposite signs counts as one crossing).
pub fn zero_crossings(x: &[f64]) -> usize {
    let mut count = 0;
    let mut last_sign = 0i8;
    for &v in x {
        let s = if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            continue;
        };
        if last_sign != 0 && s != last_sign {
            count += 1;
        }
        last_sign = s;
    }
    count
}

/// Extrema and zero-crossing counts differ by at most one, with at least two
/// extrema.
pub fn is_valid_imf(x: &[f64]) -> bool {
    let extrema = find_extrema(x).count();
    extrema >= 2 && extrema.abs_diff(zero_crossings(x)) <= 1
}

/// Sum of deviations between successive proto-IMFs.
pub fn sum_of_deviations(h_prev: &[f64], h_curr: &[f64]) -> Result<f64> {
    if h_prev.len() != h_curr.len() {
        return Err(Error::LengthMismatch {
            left: h_prev.len(),
            right: h_curr.len(),
        });
    }
    Ok(h_prev
        .iter()
        .zip(h_curr)
        .map(|(p, c)| (p - c).powi(2) / (p * p + SD_EPSILON))
        .sum())
}

pub fn sd_stop(h_prev: &[f64], h_curr: &[f64], sd_max: f64) -> Result<bool> {
    Ok(sum_of_deviations(h_prev, h_curr)? <= sd_max)
}

/// Outcome of one sifting step.
#[derive(Debug, Clone, PartialEq)]
pub enum Sift {
    Step { h_next: Vec<f64>, extrema_count: usize },
    /// Too few extrema for the boundary rule; nothing left to sift.
    Exhausted { extrema_count: usize },
}

/// Envelope knots for one side, with the boundary rule applied. `None` when
/// there are too few extrema to span the series.
fn envelope_knots(
    mut knots: Vec<(usize, f64)>,
    h: &[f64],
    boundary: SplineBoundary,
) -> Option<Vec<(usize, f64)>> {
    match boundary {
        SplineBoundary::ClampEndpoints => {
            if knots.is_empty() {
                return None;
            }
            let last = h.len() - 1;
            knots.insert(0, (0, h[0]));
            knots.push((last, h[last]));
            Some(knots)
        }
        SplineBoundary::Extrapolate => (knots.len() >= 2).then_some(knots),
    }
}

/// One sift: `h - (upper + lower) / 2`.
pub fn sift_once(h: &[f64], boundary: SplineBoundary) -> Result<Sift> {
    let ext = find_extrema(h);
    let extrema_count = ext.count();
    let (Some(max_knots), Some(min_knots)) = (
        envelope_knots(ext.maxima, h, boundary),
        envelope_knots(ext.minima, h, boundary),
    ) else {
        return Ok(Sift::Exhausted { extrema_count });
    };
    let upper = spline_envelope(&max_knots, h.len())?;
    let lower = spline_envelope(&min_knots, h.len())?;
    let h_next = h
        .iter()
        .zip(upper.iter().zip(&lower))
        .map(|(v, (u, l))| v - 0.5 * (u + l))
        .collect();
    Ok(Sift::Step {
        h_next,
        extrema_count,
    })
}

/// Sifts one IMF out of `residue`. `None` when the residue cannot be sifted.
fn extract_imf(residue: &[f64], config: &SiftConfig) -> Result<Option<Imf>> {
    let mut h = residue.to_vec();
    let mut sift_count = 0;
    while sift_count < config.max_sift_iters {
        let Sift::Step { h_next, .. } = sift_once(&h, config.spline_boundary)? else {
            break;
        };
        sift_count += 1;
        let done = sd_stop(&h, &h_next, config.sd_max)? || is_valid_imf(&h_next);
        h = h_next;
        if done {
            break;
        }
    }
    if sift_count == 0 {
        return Ok(None);
    }
    let valid = is_valid_imf(&h);
    Ok(Some(Imf {
        samples: h,
        sift_count,
        valid,
    }))
}

fn range(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    hi - lo
}

pub fn decompose(signal: &TimeSeries, config: &SiftConfig) -> Result<Decomposition> {
    decompose_samples(signal.samples(), config)
}

pub fn decompose_samples(x: &[f64], config: &SiftConfig) -> Result<Decomposition> {
    config.validate()?;
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut residue = x.to_vec();
    let mut imfs = Vec::new();
    while imfs.len() < config.max_imfs
        && range(&residue) > NEGLIGIBLE_RANGE * scale
        && find_extrema(&residue).count() >= 2
    {
        let Some(imf) = extract_imf(&residue, config)? else {
            break;
        };
        for (r, c) in residue.iter_mut().zip(&imf.samples) {
            *r -= c;
        }
        imfs.push(imf);
    }
    Ok(Decomposition {
        imfs,
        residue,
        source_length: x.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn extrema_basic() {
        let e = find_extrema(&[1.0, 3.0, 2.0]);
        assert_eq!(e.maxima, vec![(1, 3.0)]);
        assert!(e.minima.is_empty());
        assert_eq!(find_extrema(&[1.0, 2.0, 3.0, 4.0]), Extrema::default());
        assert_eq!(find_extrema(&[1.0, 2.0]), Extrema::default());
    }

    #[test]
    fn extrema_plateaus() {
        let e = find_extrema(&[0.0, 2.0, 2.0, 2.0, 1.0, 1.0, 3.0]);
        assert_eq!(e.maxima, vec![(1, 2.0)]);
        assert_eq!(e.minima, vec![(4, 1.0)]);
        // a step is not an extremum
        let e = find_extrema(&[0.0, 1.0, 1.0, 2.0]);
        assert_eq!(e.count(), 0);
        // plateau running to the end is not an extremum
        let e = find_extrema(&[0.0, 1.0, 1.0]);
        assert_eq!(e.count(), 0);
    }

    #[test]
    fn extrema_of_sine() {
        let x: Vec<f64> = (0..2000).map(|k| (2.0 * PI * k as f64 / 1000.0).sin()).collect();
        let e = find_extrema(&x);
        assert_eq!(e.maxima.len(), 2);
        assert_eq!(e.minima.len(), 2);
        let x: Vec<f64> = (0..1000).map(|k| (2.0 * PI * k as f64 / 1000.0).sin()).collect();
        let e = find_extrema(&x);
        assert_eq!(e.maxima.len(), 1);
        assert_eq!(e.minima.len(), 1);
        assert!(e.maxima[0].0.abs_diff(250) <= 1);
        assert!(e.minima[0].0.abs_diff(750) <= 1);
    }

    #[test]
    fn sd_examples() {
        assert!(sd_stop(&[1.0, 2.0], &[1.0, 2.0], 0.3).unwrap());
        assert_abs_diff_eq!(sum_of_deviations(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 2.0, epsilon = 1e-10);
        assert!(!sd_stop(&[1.0, 1.0], &[0.0, 0.0], 0.3).unwrap());
        let sd = sum_of_deviations(&[1.0; 4], &[0.9; 4]).unwrap();
        assert_abs_diff_eq!(sd, 0.04, epsilon = 1e-10);
        assert!(sd_stop(&[1.0; 4], &[0.9; 4], 0.3).unwrap());
        assert!(sd_stop(&[1.0; 3], &[1.0; 4], 0.3).is_err());
    }

    #[test]
    fn zero_crossing_counting() {
        assert_eq!(zero_crossings(&[1.0, -1.0, 1.0]), 2);
        assert_eq!(zero_crossings(&[1.0, 0.0, -1.0]), 1);
        assert_eq!(zero_crossings(&[1.0, 0.0, 0.0, 1.0]), 0);
        assert_eq!(zero_crossings(&[0.0, 0.0]), 0);
    }

    #[test]
    fn imf_validity() {
        let sine: Vec<f64> = (0..1000).map(|k| (2.0 * PI * k as f64 / 1000.0).sin()).collect();
        assert!(is_valid_imf(&sine));
        let ramp: Vec<f64> = (0..100).map(|k| k as f64).collect();
        assert!(!is_valid_imf(&ramp));
        let offset: Vec<f64> = (0..1000).map(|k| 10.0 + (2.0 * PI * k as f64 / 100.0).sin()).collect();
        assert!(!is_valid_imf(&offset));
    }

    #[test]
    fn sift_leaves_zero_mean_oscillation_nearly_unchanged() {
        let len = 4000;
        let x: Vec<f64> = (0..len).map(|k| (2.0 * PI * k as f64 / 80.0).sin()).collect();
        let Sift::Step { h_next, extrema_count } = sift_once(&x, SplineBoundary::ClampEndpoints).unwrap() else {
            panic!("expected a sift step");
        };
        assert_eq!(extrema_count, 100);
        for k in len / 10..len - len / 10 {
            assert!((h_next[k] - x[k]).abs() < 1e-3, "k={k}");
        }
    }

    #[test]
    fn sift_removes_offset() {
        let len = 2000;
        let base: Vec<f64> = (0..len).map(|k| (2.0 * PI * k as f64 / 100.0).sin()).collect();
        let h: Vec<f64> = base.iter().map(|v| v + 0.5).collect();
        let Sift::Step { h_next, .. } = sift_once(&h, SplineBoundary::ClampEndpoints).unwrap() else {
            panic!("expected a sift step");
        };
        for k in len / 10..len - len / 10 {
            assert!((h_next[k] - base[k]).abs() < 0.05, "k={k}");
        }
    }

    #[test]
    fn sift_exhausted() {
        let h = [0.0, 1.0, 0.5, 0.2];
        assert_eq!(sift_once(&h, SplineBoundary::ClampEndpoints).unwrap(), Sift::Exhausted { extrema_count: 1 });
    }

    #[test]
    fn extrapolate_needs_two_of_each() {
        let h = [0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0];
        assert_eq!(sift_once(&h, SplineBoundary::Extrapolate).unwrap(), Sift::Exhausted { extrema_count: 3 });
        assert!(matches!(sift_once(&h, SplineBoundary::ClampEndpoints).unwrap(), Sift::Step { .. }));
    }

    #[test]
    fn ramp_and_constant_yield_no_imfs() {
        let ramp: Vec<f64> = (0..300).map(|k| 0.1 * k as f64).collect();
        let d = decompose_samples(&ramp, &SiftConfig::default()).unwrap();
        assert!(d.imfs.is_empty());
        assert_eq!(d.residue, ramp);
        let d = decompose_samples(&[3.0; 64], &SiftConfig::default()).unwrap();
        assert!(d.imfs.is_empty());
        assert_eq!(d.residue, vec![3.0; 64]);
    }

    #[test]
    fn config_validation() {
        let mut c = SiftConfig { sd_max: 0.0, ..SiftConfig::default() };
        assert!(c.validate().is_err());
        c.sd_max = 1.5;
        assert!(c.validate().is_err());
        c = SiftConfig { max_sift_iters: 0, ..SiftConfig::default() };
        assert!(decompose_samples(&[1.0, 2.0, 1.0], &c).is_err());
    }
}
