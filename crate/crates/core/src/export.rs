//! File outputs: IMF dumps, R/S curves, plot data and the report JSON.
//!
//! Every numeric field is written with 12 significant digits and rows are
//! emitted in a fixed order, so repeated runs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::classify::CohortReport;
use crate::emd::Decomposition;
use crate::error::{Error, Result};
use crate::hurst::RsCurve;
use crate::ingest::fmt_sig12 as num;

/// Vertices in the ellipse polyline of `scatter_ellipse.csv`.
pub const ELLIPSE_POINTS: usize = 128;

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Columns `imf_1..imf_N,residue`, one row per sample.
pub fn imf_csv(d: &Decomposition) -> String {
    let mut out = String::new();
    let mut header: Vec<String> = (1..=d.imfs.len()).map(|k| format!("imf_{k}")).collect();
    header.push("residue".into());
    out.push_str(&header.join(","));
    out.push('\n');
    for t in 0..d.source_length {
        for imf in &d.imfs {
            out.push_str(&num(imf.samples[t]));
            out.push(',');
        }
        out.push_str(&num(d.residue[t]));
        out.push('\n');
    }
    out
}

pub fn write_imf_csv(path: impl AsRef<Path>, d: &Decomposition) -> Result<()> {
    write_text(path.as_ref(), &imf_csv(d))
}

/// Columns `n,rs_mean,log_n,log_rs` (natural logs).
pub fn rs_curve_csv(curve: &RsCurve) -> String {
    let mut out = String::from("n,rs_mean,log_n,log_rs\n");
    for p in &curve.points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.n,
            num(p.rs_mean),
            num((p.n as f64).ln()),
            num(p.rs_mean.ln())
        );
    }
    out
}

pub fn write_rs_curve_csv(path: impl AsRef<Path>, curve: &RsCurve) -> Result<()> {
    write_text(path.as_ref(), &rs_curve_csv(curve))
}

/// Columns `group,min,q1,median,q3,max`; cohorts first, then subgroups.
pub fn box_whisker_csv(report: &CohortReport) -> String {
    let stats = &report.cohort_statistics;
    let mut out = String::from("group,min,q1,median,q3,max\n");
    let mut row = |label: String, s: &crate::stats::GroupSummary| {
        let _ = writeln!(
            out,
            "{label},{},{},{},{},{}",
            num(s.min),
            num(s.q1),
            num(s.median),
            num(s.q3),
            num(s.max)
        );
    };
    for (cohort, s) in &stats.summaries {
        row(cohort.to_string(), s);
    }
    for g in &stats.subgroups {
        row(format!("{}/{}", g.cohort, g.group), &g.summary);
    }
    out
}

/// Columns `cohort,x,y,marker`: the `(age, H)` scatter (`marker = point`)
/// followed by the confidence-ellipse polyline (`marker = ellipse`).
pub fn scatter_ellipse_csv(report: &CohortReport) -> String {
    let stats = &report.cohort_statistics;
    let mut out = String::from("cohort,x,y,marker\n");
    for (cohort, pairs) in &stats.age_h_pairs {
        for (x, y) in pairs {
            let _ = writeln!(out, "{cohort},{},{},point", num(*x), num(*y));
        }
    }
    for (cohort, e) in &stats.ellipses {
        for (x, y) in e.polyline(ELLIPSE_POINTS) {
            let _ = writeln!(out, "{cohort},{},{},ellipse", num(x), num(y));
        }
    }
    out
}

/// One row per subgroup with the full summary.
pub fn subgroups_csv(report: &CohortReport) -> String {
    let mut out = String::from("scheme,cohort,group,count,mean,median,min,q1,q3,max,std\n");
    for g in &report.cohort_statistics.subgroups {
        let s = &g.summary;
        let scheme = match g.scheme {
            crate::stats::SubgroupScheme::AgeBins => "age_bins",
            crate::stats::SubgroupScheme::Gender => "gender",
        };
        let _ = writeln!(
            out,
            "{scheme},{},{},{},{},{},{},{},{},{},{}",
            g.cohort,
            g.group,
            s.count,
            num(s.mean),
            num(s.median),
            num(s.min),
            num(s.q1),
            num(s.q3),
            num(s.max),
            num(s.std)
        );
    }
    out
}

pub fn report_json(report: &CohortReport) -> Result<String> {
    serde_json::to_string_pretty(report)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::InvalidParam(format!("report serialization: {e}")))
}

/// Writes `report.json`, `box_whisker.csv`, `scatter_ellipse.csv` and
/// `subgroups.csv` into `dir`.
pub fn write_report_bundle(dir: impl AsRef<Path>, report: &CohortReport) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_text(&dir.join("report.json"), &report_json(report)?)?;
    write_text(&dir.join("box_whisker.csv"), &box_whisker_csv(report))?;
    write_text(&dir.join("scatter_ellipse.csv"), &scatter_ellipse_csv(report))?;
    write_text(&dir.join("subgroups.csv"), &subgroups_csv(report))?;
    Ok(())
}
