//! Cohort statistics: Welch's t-test, Pearson correlation, covariance
//! confidence ellipses, five-number summaries and age/gender subgroups.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{Cohort, Gender, RecordMeta};

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance (n - 1).
fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Lanczos approximation (g = 7, n = 9), relative error below 1e-15 for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta, modified Lentz evaluation.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-tailed p-value of Student's t with `df` degrees of freedom.
pub fn student_t_two_tailed(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(0.5 * df, 0.5, x).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p_two_tailed: f64,
}

pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: a.len().min(b.len()),
        });
    }
    let (va, vb) = (variance(a) / a.len() as f64, variance(b) / b.len() as f64);
    if va == 0.0 && vb == 0.0 {
        return Err(Error::Degenerate("both groups have zero variance".into()));
    }
    let se2 = va + vb;
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2
        / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    Ok(WelchResult {
        t,
        df,
        p_two_tailed: student_t_two_tailed(t, df),
    })
}

/// Pearson product-moment correlation with `n - 1` covariance.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: x.len() });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero standard deviation".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub const DEFAULT_ELLIPSE_CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipseParams {
    pub center: (f64, f64),
    pub semi_major: f64,
    pub semi_minor: f64,
    pub angle_rad: f64,
    pub confidence: f64,
    /// Covariance is rank-deficient; `semi_minor` is zero.
    pub degenerate: bool,
}

impl EllipseParams {
    /// Closed polyline of `points` vertices (first vertex repeated at the end
    /// is not included).
    pub fn polyline(&self, points: usize) -> Vec<(f64, f64)> {
        let (s, c) = self.angle_rad.sin_cos();
        (0..points)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / points as f64;
                let (u, v) = (self.semi_major * phi.cos(), self.semi_minor * phi.sin());
                (self.center.0 + u * c - v * s, self.center.1 + u * s + v * c)
            })
            .collect()
    }
}

/// Chi-square quantile with 2 degrees of freedom.
pub fn chi2_2df_quantile(p: f64) -> f64 {
    -2.0 * (1.0 - p).ln()
}

pub fn confidence_ellipse(points: &[(f64, f64)], confidence: f64) -> Result<EllipseParams> {
    if points.len() < 3 {
        return Err(Error::TooShort { needed: 3, got: points.len() });
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParam(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in points {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let (sxx, syy, sxy) = (sxx / (n - 1.0), syy / (n - 1.0), sxy / (n - 1.0));
    if sxx == 0.0 && syy == 0.0 {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let half_trace = 0.5 * (sxx + syy);
    let disc = (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
    let l1 = half_trace + disc;
    let l2 = (half_trace - disc).max(0.0);
    let angle_rad = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let q = chi2_2df_quantile(confidence);
    let degenerate = l2 <= l1 * 1e-12;
    Ok(EllipseParams {
        center: (mx, my),
        semi_major: (l1 * q).sqrt(),
        semi_minor: if degenerate { 0.0 } else { (l2 * q).sqrt() },
        angle_rad,
        confidence,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub q3: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
}

/// Linear-interpolation quantile of sorted data (type 7).
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn five_number(values: &[f64]) -> Result<GroupSummary> {
    if values.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(GroupSummary {
        count: values.len(),
        mean: mean(values),
        median: quantile_sorted(&sorted, 0.5),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        q1: quantile_sorted(&sorted, 0.25),
        q3: quantile_sorted(&sorted, 0.75),
        std: if values.len() > 1 { variance(values).sqrt() } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SubgroupScheme {
    AgeBins,
    Gender,
}

/// Half-open age bins `[lo, hi)`.
pub const AGE_BINS: [(u32, Option<u32>, &str); 4] = [
    (0, Some(30), "<30"),
    (30, Some(50), "30-50"),
    (50, Some(70), "50-70"),
    (70, None, ">=70"),
];

pub fn age_bin_label(age: u32) -> &'static str {
    AGE_BINS
        .iter()
        .find(|(lo, hi, _)| age >= *lo && hi.is_none_or(|h| age < h))
        .map(|(_, _, label)| *label)
        .unwrap_or(">=70")
}

/// Cohort plus group label, e.g. `disease/30-50`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub cohort: Cohort,
    pub group: String,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.cohort, self.group)
    }
}

/// Groups `(meta, h)` pairs by cohort and scheme. Records lacking the
/// attribute the scheme needs are left out.
pub fn subgroup(records: &[(RecordMeta, f64)], scheme: SubgroupScheme) -> BTreeMap<GroupKey, GroupSummary> {
    let mut groups: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
    for (meta, h) in records {
        let label = match scheme {
            SubgroupScheme::AgeBins => meta.age.map(age_bin_label),
            SubgroupScheme::Gender => meta.gender.map(Gender::as_str),
        };
        if let Some(label) = label {
            groups
                .entry(GroupKey {
                    cohort: meta.cohort,
                    group: label.to_string(),
                })
                .or_default()
                .push(*h);
        }
    }
    groups
        .into_iter()
        .filter_map(|(k, v)| five_number(&v).ok().map(|s| (k, s)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ln_gamma_known_values() {
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(5.0), 24f64.ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(ln_gamma(0.5), PI.sqrt().ln(), epsilon = 1e-14);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x; I_x(a, 1) = x^a
        assert_abs_diff_eq!(regularized_incomplete_beta(1.0, 1.0, 0.3), 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(regularized_incomplete_beta(3.0, 1.0, 0.4), 0.064, epsilon = 1e-14);
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 0.0), 0.0);
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 1.0), 1.0);
    }

    #[test]
    fn t_distribution_one_df_is_cauchy() {
        // P(|T| > t) = 1 - 2 atan(t) / pi
        for t in [0.1, 1.0, 3.0, 50.0] {
            let expected = 1.0 - 2.0 * f64::atan(t) / PI;
            assert_abs_diff_eq!(student_t_two_tailed(t, 1.0), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn welch_identical_groups() {
        let r = welch_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.t, 0.0);
        assert_abs_diff_eq!(r.p_two_tailed, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn welch_errors() {
        assert!(matches!(welch_t_test(&[0.0, 0.0], &[1.0, 1.0]), Err(Error::Degenerate(_))));
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 4.0, 2.0, 8.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert_abs_diff_eq!(pearson_r(&x, &y).unwrap(), 1.0, epsilon = 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(pearson_r(&x, &neg).unwrap(), -1.0, epsilon = 1e-15);
        assert!(pearson_r(&x, &[1.0; 5]).is_err());
        assert!(pearson_r(&x, &[1.0; 4]).is_err());
    }

    #[test]
    fn ellipse_isotropic_and_degenerate() {
        let circle: Vec<(f64, f64)> = (0..360)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 360.0;
                (a.cos(), a.sin())
            })
            .collect();
        let e = confidence_ellipse(&circle, 0.95).unwrap();
        assert_abs_diff_eq!(e.semi_major, e.semi_minor, epsilon = 1e-9);
        assert_abs_diff_eq!(e.center.0, 0.0, epsilon = 1e-12);

        let line: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, k as f64)).collect();
        let e = confidence_ellipse(&line, 0.95).unwrap();
        assert!(e.degenerate);
        assert_eq!(e.semi_minor, 0.0);
        assert_abs_diff_eq!(e.angle_rad, PI / 4.0, epsilon = 1e-12);
        assert!(confidence_ellipse(&line[..2], 0.95).is_err());
    }

    #[test]
    fn ellipse_semi_axes_use_chi2_quantile() {
        // var x = 4, var y = 1, no covariance
        let pts = [(-2.0, 0.0), (2.0, 0.0), (0.0, -1.0), (0.0, 1.0), (0.0, 0.0)];
        let e = confidence_ellipse(&pts, 0.95).unwrap();
        let q = chi2_2df_quantile(0.95);
        assert_abs_diff_eq!(q, 5.991464547107979, epsilon = 1e-12);
        assert_abs_diff_eq!(e.semi_major, (2.0 * q).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(e.semi_minor, (0.5 * q).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(e.angle_rad, 0.0, epsilon = 1e-12);
        assert_eq!(e.polyline(128).len(), 128);
    }

    #[test]
    fn five_number_examples() {
        let s = five_number(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        let s = five_number(&[7.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max, s.std), (7.0, 7.0, 7.0, 7.0, 7.0, 0.0));
        let s = five_number(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q1, 1.75);
        assert!(five_number(&[]).is_err());
    }

    #[test]
    fn age_bins_half_open() {
        assert_eq!(age_bin_label(0), "<30");
        assert_eq!(age_bin_label(29), "<30");
        assert_eq!(age_bin_label(30), "30-50");
        assert_eq!(age_bin_label(50), "50-70");
        assert_eq!(age_bin_label(70), ">=70");
        assert_eq!(age_bin_label(130), ">=70");
    }

    #[test]
    fn subgroup_skips_missing_attributes() {
        let mut a = RecordMeta::new("a", Cohort::Normal);
        a.age = Some(25);
        a.gender = Some(Gender::Female);
        let b = RecordMeta::new("b", Cohort::Normal);
        let mut c = RecordMeta::new("c", Cohort::Disease);
        c.age = Some(55);
        let recs = vec![(a, 0.8), (b, 0.9), (c, 1.0)];
        let ages = subgroup(&recs, SubgroupScheme::AgeBins);
        assert_eq!(ages.len(), 2);
        let key = GroupKey { cohort: Cohort::Disease, group: "50-70".into() };
        assert_eq!(ages[&key].count, 1);
        let genders = subgroup(&recs, SubgroupScheme::Gender);
        assert_eq!(genders.len(), 1);
        assert_eq!(genders.keys().next().unwrap().to_string(), "normal/female");
    }
}
