use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use ecg_hurst::classify::{
    analyze_record, classify_h, load_fixture, run_cohort, run_fixture, run_record, ClassifierConfig, Verdict,
};
use ecg_hurst::export::{box_whisker_csv, report_json, scatter_ellipse_csv, write_report_bundle};
use ecg_hurst::ingest::{
    gaussian_samples, load_manifest, load_record, synth_signal, write_record, Cohort, RecordMeta, SynthKind,
    TimeSeries,
};
use ecg_hurst::Error;
use proptest::prelude::*;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/cohort_imf1.csv")
}

fn tone(freq: f64, seed: u64, len: usize) -> TimeSeries {
    noisy_tone(freq, 0.2, seed, len)
}

fn noisy_tone(freq: f64, noise_amp: f64, seed: u64, len: usize) -> TimeSeries {
    let noise = gaussian_samples(len, seed);
    let x = (0..len)
        .map(|k| (2.0 * std::f64::consts::PI * freq * k as f64 / 360.0).sin() + noise_amp * noise[k])
        .collect();
    TimeSeries::new(x, 360.0).unwrap()
}

#[test]
fn gaussian_moments() {
    let mut all = Vec::new();
    for seed in 0..20 {
        all.extend(gaussian_samples(10_000, seed));
    }
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let kurt = all.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n / (var * var);
    assert!(mean.abs() < 0.01, "{mean}");
    assert!((var - 1.0).abs() < 0.01, "{var}");
    assert!((kurt - 3.0).abs() < 0.05, "{kurt}");
    assert_ne!(gaussian_samples(8, 1), gaussian_samples(8, 2));
    assert_eq!(gaussian_samples(8, 1)[..5], gaussian_samples(5, 1)[..]);
}

#[test]
fn record_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = synth_signal(SynthKind::GaussNoise, &BTreeMap::from([("sigma".into(), 3.0)]), 500, 1.0, 7).unwrap();
    let path = dir.path().join("n.csv");
    write_record(&path, &p).unwrap();
    let back = load_record(&path, 1.0).unwrap();
    for (a, b) in p.samples().iter().zip(back.samples()) {
        assert!((a - b).abs() <= 1e-11 * a.abs().max(1e-300));
    }
    let first = fs::read(&path).unwrap();
    write_record(&path, &back).unwrap();
    assert_eq!(first, fs::read(&path).unwrap());
}

#[test]
fn record_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "0,1.0\n1,2.0\n1,3.0\n").unwrap();
    match load_record(&path, 1.0) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    fs::write(&path, "1.0\nabc\n").unwrap();
    assert!(matches!(load_record(&path, 1.0), Err(Error::Parse { line: 2, .. })));
}

#[test]
fn threshold_is_monotone() {
    let entries = load_fixture(fixture()).unwrap();
    let mut previous = usize::MAX;
    for t in [0.5, 0.8, 0.9, 0.93, 0.95, 1.0, 1.1, 2.0] {
        let cfg = ClassifierConfig { h_threshold: t, ..ClassifierConfig::default() };
        let n = entries.iter().filter(|e| classify_h(e.h_imf1, &cfg) == Verdict::Disease).count();
        assert!(n <= previous);
        previous = n;
    }
    let cfg = ClassifierConfig::default();
    assert_eq!(classify_h(0.93, &cfg), Verdict::Disease);
    assert_eq!(classify_h(0.929_999, &cfg), Verdict::Normal);
}

#[test]
fn fixture_report_is_sorted_and_stable() {
    let entries = load_fixture(fixture()).unwrap();
    assert_eq!(entries.len(), 59);
    let mut reversed = entries.clone();
    reversed.reverse();
    let cfg = ClassifierConfig::default();
    let (a, b) = (run_fixture(&entries, &cfg).unwrap(), run_fixture(&reversed, &cfg).unwrap());
    assert_eq!(report_json(&a).unwrap(), report_json(&b).unwrap());
    let ids: Vec<&str> = a.per_record.iter().map(|r| r.meta.record_id.as_str()).collect();
    assert!(ids.windows(2).all(|w| w[0] < w[1]));
    assert!(box_whisker_csv(&a).starts_with("group,min,q1,median,q3,max\ndisease,"));
    let scatter = scatter_ellipse_csv(&a);
    assert_eq!(scatter.lines().filter(|l| l.ends_with(",ellipse")).count(), 2 * 128);
    // 39 disease and 18 normal records carry an age
    assert_eq!(scatter.lines().filter(|l| l.ends_with(",point")).count(), 57);
}

#[test]
fn tone_record_runs_end_to_end() {
    let sig = noisy_tone(5.0, 0.0, 3, 3600);
    let a = analyze_record(&sig, &RecordMeta::new("t1", Cohort::Normal), &ClassifierConfig::default()).unwrap();
    let r = &a.report;
    assert_eq!(r.imf_count, a.decomposition.imfs.len());
    assert_eq!(r.h_per_imf.len(), r.imf_count);
    let sig_report = r.significance.as_ref().unwrap();
    assert!(sig_report.significant[0]);
    assert_eq!(r.h_imf1, r.h_per_imf[0]);
    assert_ne!(r.verdict, Verdict::Indeterminate);
}

#[test]
fn failures_name_the_record() {
    let short = TimeSeries::new(vec![0.0, 1.0, 0.5, 0.2], 360.0).unwrap();
    let err = run_record(&short, &RecordMeta::new("r42", Cohort::Disease), &ClassifierConfig::default()).unwrap_err();
    assert!(err.to_string().contains("r42"), "{err}");
}

fn manifest_with(dir: &std::path::Path, records: &[(&str, &str, Option<u32>)]) -> PathBuf {
    let mut rows = Vec::new();
    for (i, (id, cohort, age)) in records.iter().enumerate() {
        let file = format!("{id}.csv");
        write_record(dir.join(&file), &tone(3.0 + i as f64, i as u64, 2000)).unwrap();
        let age = age.map_or("null".to_string(), |a| a.to_string());
        rows.push(format!(
            r#"{{"id":"{id}","path":"{file}","cohort":"{cohort}","sampling_hz":360.0,"age":{age},"lead":"MLII"}}"#
        ));
    }
    let path = dir.join("manifest.json");
    fs::write(&path, format!(r#"{{"description":"synthetic","records":[{}]}}"#, rows.join(","))).unwrap();
    path
}

#[test]
fn cohort_run_matches_single_thread_run() {
    let dir = tempfile::tempdir().unwrap();
    let ids = [("d1", "disease", Some(40)), ("n1", "normal", Some(35)), ("d2", "disease", Some(61)), ("n2", "normal", None), ("u1", "unknown", None)];
    let manifest = load_manifest(manifest_with(dir.path(), &ids)).unwrap();
    let cfg = ClassifierConfig::default();
    let pooled = run_cohort(&manifest, &cfg).unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_cohort(&manifest, &cfg).unwrap());
    assert_eq!(report_json(&pooled).unwrap(), report_json(&single).unwrap());
    assert_eq!(pooled.per_record.len() + pooled.failures.len(), 5);
    let out = dir.path().join("out");
    write_report_bundle(&out, &pooled).unwrap();
    for f in ["report.json", "box_whisker.csv", "scatter_ellipse.csv", "subgroups.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn unreadable_record_becomes_a_failure() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = manifest_with(dir.path(), &[("a", "disease", None), ("b", "normal", None)]);
    let manifest = load_manifest(&manifest_path).unwrap();
    fs::write(dir.path().join("b.csv"), "1.0\nnot-a-number\n").unwrap();
    let report = run_cohort(&manifest, &ClassifierConfig::default()).unwrap();
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].record_id, "b");
    assert!(report.failures[0].error.contains("line 2") || report.failures[0].error.contains(":2:"));
}

#[test]
fn manifest_problems_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = manifest_with(dir.path(), &[("a", "disease", None)]);
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, text.replace("a.csv", "missing.csv")).unwrap();
    let err = load_manifest(&path).unwrap_err().to_string();
    assert!(err.contains("'a'") && err.contains("missing.csv"), "{err}");
    fs::write(&path, text.replace("\"lead\"", "\"colour\":1,\"lead\"")).unwrap();
    assert!(load_manifest(&path).is_err());
    let dup = text.replace("]}", &format!(",{}]}}", &text[text.find("{\"id\"").unwrap()..text.rfind("]}").unwrap()]));
    fs::write(&path, dup).unwrap();
    assert!(load_manifest(&path).unwrap_err().to_string().contains("duplicate"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn verdict_is_a_threshold_function(h in 0.0f64..2.0, t in 0.01f64..2.0) {
        let cfg = ClassifierConfig { h_threshold: t, ..ClassifierConfig::default() };
        let v = classify_h(h, &cfg);
        prop_assert_eq!(v == Verdict::Disease, h >= t);
    }
}
