//! Per-record verdicts and cohort report assembly.
//!
//! A record runs through smoothing, decomposition, significance ranking and
//! R/S analysis of every IMF. The verdict comes from the Hurst exponent of the
//! first IMF: `disease` when `H >= h_threshold`, `normal` otherwise, and
//! `indeterminate` when the first IMF is missing or not significant.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emd::{decompose_samples, Decomposition, SiftConfig};
use crate::error::{Error, Result};
use crate::hurst::{rs_curve, RsConfig, RsCurve};
use crate::ingest::{load_record, Cohort, CohortManifest, RecordMeta, TimeSeries};
use crate::sgolay::{sg_smooth_samples, SgParams};
use crate::significance::{select_significant, SignificanceReport, DEFAULT_ETA};
use crate::stats::{
    confidence_ellipse, five_number, pearson_r, subgroup, welch_t_test, EllipseParams,
    GroupSummary, SubgroupScheme, WelchResult, DEFAULT_ELLIPSE_CONFIDENCE,
};

pub const DEFAULT_H_THRESHOLD: f64 = 0.93;
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub h_threshold: f64,
    pub eta: f64,
    pub sift: SiftConfig,
    pub sg_params_by_cohort: BTreeMap<Cohort, SgParams>,
    pub rs_config: RsConfig,
    pub smooth: bool,
    pub ellipse_confidence: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        let sg_params_by_cohort = BTreeMap::from([
            (Cohort::Disease, SgParams::DISEASE),
            (Cohort::Normal, SgParams::NORMAL),
            (Cohort::Unknown, SgParams::NORMAL),
        ]);
        Self {
            h_threshold: DEFAULT_H_THRESHOLD,
            eta: DEFAULT_ETA,
            sift: SiftConfig::default(),
            sg_params_by_cohort,
            rs_config: RsConfig::default(),
            smooth: true,
            ellipse_confidence: DEFAULT_ELLIPSE_CONFIDENCE,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_threshold > 0.0 && self.h_threshold <= 2.0) {
            return Err(Error::InvalidParam(format!(
                "h_threshold must lie in (0, 2], got {}",
                self.h_threshold
            )));
        }
        if !(self.eta.is_finite() && self.eta > 1.0) {
            return Err(Error::InvalidParam(format!("eta must exceed 1, got {}", self.eta)));
        }
        if !(self.ellipse_confidence > 0.0 && self.ellipse_confidence < 1.0) {
            return Err(Error::InvalidParam(format!(
                "ellipse_confidence must lie in (0, 1), got {}",
                self.ellipse_confidence
            )));
        }
        self.sift.validate()?;
        self.rs_config.validate()?;
        for p in self.sg_params_by_cohort.values() {
            p.validate()?;
        }
        Ok(())
    }

    pub fn sg_params(&self, cohort: Cohort) -> SgParams {
        self.sg_params_by_cohort
            .get(&cohort)
            .copied()
            .unwrap_or(SgParams::NORMAL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Disease,
    Normal,
    Indeterminate,
}

impl Verdict {
    fn matches(self, cohort: Cohort) -> Option<bool> {
        match (self, cohort) {
            (Verdict::Indeterminate, _) | (_, Cohort::Unknown) => None,
            (Verdict::Disease, Cohort::Disease) | (Verdict::Normal, Cohort::Normal) => Some(true),
            _ => Some(false),
        }
    }
}

/// Disease iff `h >= h_threshold`; a tie goes to disease.
pub fn classify_h(h: f64, config: &ClassifierConfig) -> Verdict {
    if h >= config.h_threshold {
        Verdict::Disease
    } else {
        Verdict::Normal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordSource {
    Signal,
    /// Precomputed first-IMF Hurst exponent.
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordReport {
    pub meta: RecordMeta,
    pub source: RecordSource,
    pub imf_count: usize,
    /// `None` where the R/S fit failed for that IMF.
    pub h_per_imf: Vec<Option<f64>>,
    pub significance: Option<SignificanceReport>,
    pub h_imf1: Option<f64>,
    pub verdict: Verdict,
}

/// Everything computed for one record; [`RecordReport`] is the summary.
#[derive(Debug, Clone)]
pub struct RecordAnalysis {
    pub smoothed: Vec<f64>,
    pub decomposition: Decomposition,
    pub curves: Vec<Option<RsCurve>>,
    pub report: RecordReport,
}

pub fn analyze_record(
    signal: &TimeSeries,
    meta: &RecordMeta,
    config: &ClassifierConfig,
) -> Result<RecordAnalysis> {
    analyze_inner(signal, meta, config).map_err(|e| e.for_record(&meta.record_id))
}

fn analyze_inner(
    signal: &TimeSeries,
    meta: &RecordMeta,
    config: &ClassifierConfig,
) -> Result<RecordAnalysis> {
    config.validate()?;
    let smoothed = if config.smooth {
        sg_smooth_samples(signal.samples(), config.sg_params(meta.cohort))?
    } else {
        signal.samples().to_vec()
    };
    let decomposition = decompose_samples(&smoothed, &config.sift)?;
    let imfs: Vec<&[f64]> = decomposition.imfs.iter().map(|c| c.samples.as_slice()).collect();

    let mut curve_results: Vec<Result<RsCurve>> =
        imfs.iter().map(|c| rs_curve(c, &config.rs_config)).collect();

    let significance = if imfs.is_empty() {
        None
    } else {
        Some(select_significant(&smoothed, &imfs, config.eta)?)
    };
    let first_significant = significance
        .as_ref()
        .is_some_and(|s| s.significant.first().copied().unwrap_or(false));
    if first_significant && curve_results[0].is_err() {
        return Err(curve_results.swap_remove(0).unwrap_err());
    }
    let curves: Vec<Option<RsCurve>> = curve_results.into_iter().map(Result::ok).collect();
    let h_per_imf: Vec<Option<f64>> = curves.iter().map(|c| c.as_ref().map(|c| c.hurst)).collect();
    let h_imf1 = if first_significant { h_per_imf[0] } else { None };
    let verdict = h_imf1.map_or(Verdict::Indeterminate, |h| classify_h(h, config));

    Ok(RecordAnalysis {
        report: RecordReport {
            meta: meta.clone(),
            source: RecordSource::Signal,
            imf_count: imfs.len(),
            h_per_imf,
            significance,
            h_imf1,
            verdict,
        },
        smoothed,
        decomposition,
        curves,
    })
}

pub fn run_record(signal: &TimeSeries, meta: &RecordMeta, config: &ClassifierConfig) -> Result<RecordReport> {
    analyze_record(signal, meta, config).map(|a| a.report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordFailure {
    pub record_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupRow {
    pub scheme: SubgroupScheme,
    pub cohort: Cohort,
    pub group: String,
    pub summary: GroupSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortStatistics {
    pub summaries: BTreeMap<Cohort, GroupSummary>,
    pub subgroups: Vec<SubgroupRow>,
    /// Disease minus normal.
    pub welch: Option<WelchResult>,
    pub pearson_by_cohort: BTreeMap<Cohort, f64>,
    pub ellipses: BTreeMap<Cohort, EllipseParams>,
    /// `(age, h_imf1)` pairs per cohort, the scatter behind the ellipses.
    pub age_h_pairs: BTreeMap<Cohort, Vec<(f64, f64)>>,
    pub total: usize,
    pub classified: usize,
    pub indeterminate: usize,
    pub correct: usize,
    /// Fraction of classified records with a known cohort whose verdict
    /// matches the label.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortReport {
    pub report_version: u32,
    pub h_threshold: f64,
    pub per_record: Vec<RecordReport>,
    pub failures: Vec<RecordFailure>,
    pub cohort_statistics: CohortStatistics,
    pub notices: Vec<String>,
}

/// Runs every manifest record (in parallel on the current rayon pool) and
/// aggregates. Per-record failures are collected, not fatal.
pub fn run_cohort(manifest: &CohortManifest, config: &ClassifierConfig) -> Result<CohortReport> {
    if manifest.is_empty() {
        return Err(Error::Manifest("manifest has no records".into()));
    }
    config.validate()?;
    let results: Vec<Result<RecordReport>> = manifest
        .entries
        .par_iter()
        .map(|e| {
            let signal = load_record(&e.path, e.sampling_hz)
                .map_err(|err| err.for_record(&e.meta.record_id))?;
            run_record(&signal, &e.meta, config)
        })
        .collect();
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (entry, r) in manifest.entries.iter().zip(results) {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e) => failures.push(RecordFailure {
                record_id: entry.meta.record_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    Ok(assemble_report(reports, failures, config))
}

/// A precomputed `(meta, h_imf1)` row.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureEntry {
    pub meta: RecordMeta,
    pub h_imf1: f64,
}

/// Parses `record_id,cohort,age,gender,h_imf1` CSV with a header row. Blank
/// age or gender means not recorded.
pub fn parse_fixture(text: &str) -> Result<Vec<FixtureEntry>> {
    let path = Path::new("<fixture>");
    let bad = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.trim().replace(' ', "") == "record_id,cohort,age,gender,h_imf1" => {}
        Some((i, _)) => return Err(bad(i + 1, "expected header record_id,cohort,age,gender,h_imf1".into())),
        None => return Ok(Vec::new()),
    }
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let f: Vec<&str> = line.trim_end_matches('\r').split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(bad(line_no, format!("expected 5 fields, found {}", f.len())));
        }
        let mut meta = RecordMeta::new(f[0], f[1].parse().map_err(|e: Error| bad(line_no, e.to_string()))?);
        if !seen.insert(meta.record_id.clone()) {
            return Err(bad(line_no, format!("duplicate record id '{}'", f[0])));
        }
        if !f[2].is_empty() {
            meta.age = Some(f[2].parse().map_err(|_| bad(line_no, format!("bad age '{}'", f[2])))?);
        }
        if !f[3].is_empty() {
            meta.gender = Some(f[3].parse().map_err(|e: Error| bad(line_no, e.to_string()))?);
        }
        meta.validate().map_err(|e| bad(line_no, e.to_string()))?;
        let h_imf1: f64 = f[4]
            .parse()
            .ok()
            .filter(|h: &f64| h.is_finite())
            .ok_or_else(|| bad(line_no, format!("bad h_imf1 '{}'", f[4])))?;
        out.push(FixtureEntry { meta, h_imf1 });
    }
    Ok(out)
}

pub fn load_fixture(path: impl AsRef<Path>) -> Result<Vec<FixtureEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fixture(&text).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        },
        other => other,
    })
}

/// Builds a cohort report from precomputed first-IMF Hurst exponents.
pub fn run_fixture(entries: &[FixtureEntry], config: &ClassifierConfig) -> Result<CohortReport> {
    if entries.is_empty() {
        return Err(Error::Manifest("fixture has no records".into()));
    }
    config.validate()?;
    let reports = entries
        .iter()
        .map(|e| RecordReport {
            meta: e.meta.clone(),
            source: RecordSource::Fixture,
            imf_count: 0,
            h_per_imf: Vec::new(),
            significance: None,
            h_imf1: Some(e.h_imf1),
            verdict: classify_h(e.h_imf1, config),
        })
        .collect();
    Ok(assemble_report(reports, Vec::new(), config))
}

/// Sorts by record id and computes cohort statistics in that order.
pub fn assemble_report(
    mut reports: Vec<RecordReport>,
    mut failures: Vec<RecordFailure>,
    config: &ClassifierConfig,
) -> CohortReport {
    reports.sort_by(|a, b| a.meta.record_id.cmp(&b.meta.record_id));
    failures.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    let mut notices = Vec::new();

    let classified: Vec<(&RecordMeta, f64)> = reports
        .iter()
        .filter_map(|r| r.h_imf1.map(|h| (&r.meta, h)))
        .collect();
    let values_for = |cohort: Cohort| -> Vec<f64> {
        classified
            .iter()
            .filter(|(m, _)| m.cohort == cohort)
            .map(|(_, h)| *h)
            .collect()
    };

    let mut summaries = BTreeMap::new();
    for cohort in [Cohort::Disease, Cohort::Normal, Cohort::Unknown] {
        let labelled = reports.iter().filter(|r| r.meta.cohort == cohort).count();
        let v = values_for(cohort);
        match five_number(&v) {
            Ok(s) => {
                summaries.insert(cohort, s);
            }
            Err(_) if labelled > 0 => notices.push(format!(
                "{cohort}: all {labelled} records indeterminate, statistics skipped"
            )),
            Err(_) => {}
        }
    }

    let (disease, normal) = (values_for(Cohort::Disease), values_for(Cohort::Normal));
    let welch = if disease.is_empty() || normal.is_empty() {
        notices.push("welch test skipped: needs both disease and normal values".into());
        None
    } else {
        welch_t_test(&disease, &normal)
            .map_err(|e| notices.push(format!("welch test skipped: {e}")))
            .ok()
    };

    let mut pearson_by_cohort = BTreeMap::new();
    let mut ellipses = BTreeMap::new();
    let mut age_h_pairs = BTreeMap::new();
    for cohort in [Cohort::Disease, Cohort::Normal] {
        let pairs: Vec<(f64, f64)> = classified
            .iter()
            .filter(|(m, _)| m.cohort == cohort)
            .filter_map(|(m, h)| m.age.map(|a| (a as f64, *h)))
            .collect();
        if pairs.is_empty() {
            continue;
        }
        let (ages, hs): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        match pearson_r(&ages, &hs) {
            Ok(r) => {
                pearson_by_cohort.insert(cohort, r);
            }
            Err(e) => notices.push(format!("{cohort}: pearson r skipped: {e}")),
        }
        match confidence_ellipse(&pairs, config.ellipse_confidence) {
            Ok(e) => {
                ellipses.insert(cohort, e);
            }
            Err(e) => notices.push(format!("{cohort}: confidence ellipse skipped: {e}")),
        }
        age_h_pairs.insert(cohort, pairs);
    }

    let owned: Vec<(RecordMeta, f64)> = classified.iter().map(|(m, h)| ((*m).clone(), *h)).collect();
    let mut subgroups = Vec::new();
    for scheme in [SubgroupScheme::AgeBins, SubgroupScheme::Gender] {
        for (key, summary) in subgroup(&owned, scheme) {
            subgroups.push(SubgroupRow {
                scheme,
                cohort: key.cohort,
                group: key.group,
                summary,
            });
        }
    }

    let judged: Vec<bool> = reports
        .iter()
        .filter_map(|r| r.verdict.matches(r.meta.cohort))
        .collect();
    let correct = judged.iter().filter(|ok| **ok).count();
    let accuracy = (!judged.is_empty()).then(|| correct as f64 / judged.len() as f64);
    let indeterminate = reports
        .iter()
        .filter(|r| r.verdict == Verdict::Indeterminate)
        .count();

    CohortReport {
        report_version: REPORT_VERSION,
        h_threshold: config.h_threshold,
        cohort_statistics: CohortStatistics {
            summaries,
            subgroups,
            welch,
            pearson_by_cohort,
            ellipses,
            age_h_pairs,
            total: reports.len(),
            classified: reports.len() - indeterminate,
            indeterminate,
            correct,
            accuracy,
        },
        per_record: reports,
        failures,
        notices,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Gender;

    #[test]
    fn threshold_rule() {
        let c = ClassifierConfig::default();
        assert_eq!(classify_h(0.8766, &c), Verdict::Normal);
        assert_eq!(classify_h(0.9630, &c), Verdict::Disease);
        assert_eq!(classify_h(0.93, &c), Verdict::Disease);
    }

    #[test]
    fn constant_signal_is_indeterminate() {
        let ts = TimeSeries::new(vec![0.25; 500], 128.0).unwrap();
        let meta = RecordMeta::new("flat", Cohort::Normal);
        let r = run_record(&ts, &meta, &ClassifierConfig::default()).unwrap();
        assert_eq!(r.imf_count, 0);
        assert_eq!(r.verdict, Verdict::Indeterminate);
        assert!(r.h_imf1.is_none());
    }

    #[test]
    fn errors_carry_record_id() {
        let ts = TimeSeries::new(vec![0.0, 1.0, 0.0, 1.0], 360.0).unwrap();
        let meta = RecordMeta::new("short-1", Cohort::Disease);
        let err = run_record(&ts, &meta, &ClassifierConfig::default()).unwrap_err();
        assert!(err.to_string().starts_with("record short-1:"), "{err}");
    }

    #[test]
    fn fixture_parsing() {
        let text = "record_id,cohort,age,gender,h_imf1\n100,disease,69,male,0.9630\n103,disease,,male,1.0072\n18177,normal,26,,0.9399\n";
        let rows = parse_fixture(text).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].meta.age, Some(69));
        assert_eq!(rows[1].meta.age, None);
        assert_eq!(rows[1].meta.gender, Some(Gender::Male));
        assert_eq!(rows[2].meta.gender, None);
        assert!(parse_fixture("id,h\n1,2\n").is_err());
        assert!(parse_fixture("record_id,cohort,age,gender,h_imf1\n1,normal,,,x\n").is_err());
        assert!(parse_fixture("record_id,cohort,age,gender,h_imf1\n1,normal,,,0.5\n1,normal,,,0.6\n").is_err());
    }

    #[test]
    fn single_record_cohort() {
        let mut meta = RecordMeta::new("19090", Cohort::Normal);
        meta.age = Some(45);
        let rep = run_fixture(&[FixtureEntry { meta, h_imf1: 0.8766 }], &ClassifierConfig::default()).unwrap();
        assert_eq!(rep.cohort_statistics.accuracy, Some(1.0));
        assert!(rep.cohort_statistics.welch.is_none());
        assert!(rep.notices.iter().any(|n| n.contains("welch")));
        assert!(run_fixture(&[], &ClassifierConfig::default()).is_err());
    }

    #[test]
    fn unknown_cohort_excluded_from_accuracy() {
        let rows = vec![
            FixtureEntry { meta: RecordMeta::new("a", Cohort::Unknown), h_imf1: 1.0 },
            FixtureEntry { meta: RecordMeta::new("b", Cohort::Disease), h_imf1: 0.5 },
        ];
        let rep = run_fixture(&rows, &ClassifierConfig::default()).unwrap();
        assert_eq!(rep.cohort_statistics.accuracy, Some(0.0));
        assert_eq!(rep.cohort_statistics.classified, 2);
    }

    #[test]
    fn config_validation() {
        let mut c = ClassifierConfig { h_threshold: 2.0, ..Default::default() };
        assert!(c.validate().is_ok());
        c.h_threshold = 0.0;
        assert!(c.validate().is_err());
        c = ClassifierConfig { eta: 1.0, ..Default::default() };
        assert!(c.validate().is_err());
        let json = r#"{"h_threshold": 0.9, "sift": {"sd_max": 0.2}}"#;
        let c: ClassifierConfig = serde_json::from_str(json).unwrap();
        assert_eq!(c.h_threshold, 0.9);
        assert_eq!(c.sift.sd_max, 0.2);
        assert_eq!(c.sift.max_sift_iters, 150);
        assert_eq!(c.sg_params(Cohort::Disease), SgParams::DISEASE);
    }
}
