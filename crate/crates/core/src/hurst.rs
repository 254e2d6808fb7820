//! Rescaled-range (R/S) estimation of the Hurst exponent.
//!
//! The series is cut into `d = floor(L / n)` contiguous blocks of length `n`
//! (remainder dropped). For each block the mean-adjusted cumulative sum gives
//! the range `R`, which is divided by the block standard deviation `S`. The
//! mean `R/S` over blocks is computed for a geometric grid of `n`, and `H` is
//! the OLS slope of `log(R/S)_n` against `log n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdConvention {
    /// Divide by `n`.
    Population,
    /// Divide by `n - 1`.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RsConfig {
    pub n_min: usize,
    pub n_max_fraction: f64,
    pub grid_points: usize,
    pub std_convention: StdConvention,
}

impl Default for RsConfig {
    fn default() -> Self {
        Self {
            n_min: 10,
            n_max_fraction: 0.5,
            grid_points: 20,
            std_convention: StdConvention::Population,
        }
    }
}

impl RsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_min < 8 {
            return Err(Error::InvalidParam(format!("n_min must be >= 8, got {}", self.n_min)));
        }
        if !(self.n_max_fraction > 0.0 && self.n_max_fraction <= 0.5) {
            return Err(Error::InvalidParam(format!(
                "n_max_fraction must lie in (0, 0.5], got {}",
                self.n_max_fraction
            )));
        }
        if self.grid_points < 4 {
            return Err(Error::InvalidParam(format!(
                "grid_points must be >= 4, got {}",
                self.grid_points
            )));
        }
        Ok(())
    }

    /// Distinct sub-series lengths, geometrically spaced from `n_min` to
    /// `floor(len * n_max_fraction)`.
    pub fn grid(&self, len: usize) -> Result<Vec<usize>> {
        self.validate()?;
        let n_max = (len as f64 * self.n_max_fraction).floor() as usize;
        if n_max <= self.n_min {
            return Err(Error::TooShort {
                needed: (self.n_min as f64 / self.n_max_fraction).ceil() as usize + 1,
                got: len,
            });
        }
        let ratio = n_max as f64 / self.n_min as f64;
        let steps = (self.grid_points - 1) as f64;
        let mut grid: Vec<usize> = (0..self.grid_points)
            .map(|k| (self.n_min as f64 * ratio.powf(k as f64 / steps)).round() as usize)
            .map(|n| n.clamp(self.n_min, n_max))
            .collect();
        grid.dedup();
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RsPoint {
    pub n: usize,
    pub rs_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RsCurve {
    pub points: Vec<RsPoint>,
    pub hurst: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

fn rescaled_range_with(z: &[f64], std: StdConvention) -> Result<f64> {
    let n = z.len();
    if n < 2 {
        return Err(Error::TooShort { needed: 2, got: n });
    }
    let mean = z.iter().sum::<f64>() / n as f64;
    let (mut cum, mut lo, mut hi, mut ss) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for v in z {
        let dev = v - mean;
        cum += dev;
        lo = lo.min(cum);
        hi = hi.max(cum);
        ss += dev * dev;
    }
    let denom = match std {
        StdConvention::Population => n as f64,
        StdConvention::Sample => (n - 1) as f64,
    };
    let s = (ss / denom).sqrt();
    // rounding in the mean can leave a nonzero S on a constant block
    if s == 0.0 || z.iter().all(|v| *v == z[0]) {
        return Err(Error::ConstantBlock);
    }
    Ok((hi - lo) / s)
}

/// R/S of one block with the population standard deviation.
pub fn rescaled_range(z: &[f64]) -> Result<f64> {
    rescaled_range_with(z, StdConvention::Population)
}

/// Mean R/S over non-constant blocks of length `n`; `None` if every block is
/// constant.
pub fn mean_rescaled_range(samples: &[f64], n: usize, std: StdConvention) -> Result<Option<f64>> {
    let mut total = 0.0;
    let mut kept = 0usize;
    for block in samples.chunks_exact(n) {
        match rescaled_range_with(block, std) {
            Ok(rs) => {
                total += rs;
                kept += 1;
            }
            Err(Error::ConstantBlock) => {}
            Err(e) => return Err(e),
        }
    }
    Ok((kept > 0).then(|| total / kept as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = intercept + slope x`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: xs.len() });
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::Degenerate("regression abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Fits `log(R/S) = log c + H log n` to precomputed points (natural logs).
pub fn fit_points(points: Vec<RsPoint>) -> Result<RsCurve> {
    if points.len() < 4 {
        return Err(Error::SparseCurve(points.len()));
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.rs_mean.ln()).collect();
    let fit = ols(&xs, &ys)?;
    if !fit.slope.is_finite() {
        return Err(Error::Degenerate("non-finite Hurst slope".into()));
    }
    Ok(RsCurve {
        points,
        hurst: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
    })
}

pub fn rs_curve(samples: &[f64], config: &RsConfig) -> Result<RsCurve> {
    config.validate()?;
    if samples.len() < 2 * config.n_min {
        return Err(Error::TooShort {
            needed: 2 * config.n_min,
            got: samples.len(),
        });
    }
    let mut points = Vec::new();
    for n in config.grid(samples.len())? {
        if let Some(rs_mean) = mean_rescaled_range(samples, n, config.std_convention)? {
            points.push(RsPoint { n, rs_mean });
        }
    }
    fit_points(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Persistence {
    AntiPersistent,
    RandomWalk,
    Persistent,
}

/// Half-width of the band around 0.5 read as a random walk.
pub const RANDOM_WALK_BAND: f64 = 0.01;

pub fn interpret_h(h: f64) -> Persistence {
    if h < 0.5 - RANDOM_WALK_BAND {
        Persistence::AntiPersistent
    } else if h > 0.5 + RANDOM_WALK_BAND {
        Persistence::Persistent
    } else {
        Persistence::RandomWalk
    }
}
