use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ecg_hurst::classify::{
    analyze_record, load_fixture, run_cohort, run_fixture, ClassifierConfig, CohortReport, RecordReport,
};
use ecg_hurst::emd::SplineBoundary;
use ecg_hurst::export::{rs_curve_csv, write_imf_csv, write_report_bundle, write_rs_curve_csv};
use ecg_hurst::hurst::{interpret_h, rs_curve, Persistence};
use ecg_hurst::ingest::{fmt_sig12, load_manifest, load_record, synth_signal, write_record, Cohort, Gender, RecordMeta, SynthKind};
use ecg_hurst::sgolay::{sg_smooth, SgParams};
use ecg_hurst::Error;

const DEFAULTS: &str = "Defaults: decision threshold H* = 0.93 (a tie counts as disease), \
significance ratio eta = 25, SD stop = 0.3, at most 150 sifts per IMF and 20 IMFs, \
Savitzky-Golay order 3 with frame 37 for disease records and frame 13 for normal and \
unlabelled records, R/S sub-series lengths from 10 to half the series on 20 geometric steps.";

#[derive(Parser)]
#[command(name = "ecg-hurst", version, about = "EMD and rescaled-range Hurst analysis of ECG records", after_help = DEFAULTS)]
struct Cli {
    /// Directory for output files [default: current directory].
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for `report` [default: machine parallelism].
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
    /// Treat per-record failures in `report` as fatal (exit 1).
    #[arg(long, global = true)]
    strict: bool,
    /// JSON file overriding the built-in defaults; command-line flags win.
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a deterministic synthetic signal.
    #[command(after_help = DEFAULTS)]
    Synth(SynthArgs),
    /// Savitzky-Golay smoothing of one record.
    #[command(after_help = DEFAULTS)]
    Smooth(SmoothArgs),
    /// Decompose one record into IMFs and estimate H for each.
    #[command(after_help = DEFAULTS)]
    Decompose(RecordArgs),
    /// R/S Hurst exponent of one series, without smoothing or EMD.
    #[command(after_help = DEFAULTS)]
    Hurst(HurstArgs),
    /// Run the full pipeline on one record and print its verdict.
    #[command(after_help = DEFAULTS)]
    Classify(ClassifyArgs),
    /// Cohort report from a manifest of raw records or a fixture of H values.
    #[command(after_help = DEFAULTS)]
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// sine | two_tone | gauss_noise | ramp
    #[arg(long)]
    kind: SynthKind,
    /// Samples to generate.
    #[arg(long)]
    len: usize,
    /// Sampling rate in Hz.
    #[arg(long, default_value_t = 256.0)]
    fs: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file [default: <out-dir>/<kind>.csv].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tone frequency in Hz (sine).
    #[arg(long)]
    freq: Option<f64>,
    /// Tone amplitude (sine).
    #[arg(long)]
    amp: Option<f64>,
    #[arg(long)]
    f1: Option<f64>,
    #[arg(long)]
    a1: Option<f64>,
    #[arg(long)]
    f2: Option<f64>,
    #[arg(long)]
    a2: Option<f64>,
    /// Noise standard deviation (gauss_noise).
    #[arg(long)]
    sigma: Option<f64>,
    /// Units per second (ramp).
    #[arg(long)]
    slope: Option<f64>,
}

#[derive(Args)]
struct InputArgs {
    /// Record file: one value per line, or `time,value` per line.
    #[arg(long)]
    input: PathBuf,
    /// Sampling rate in Hz.
    #[arg(long)]
    fs: f64,
    /// Cohort label; selects the default smoothing frame.
    #[arg(long, default_value = "unknown")]
    cohort: Cohort,
    /// Record id used in file names and messages [default: input file stem].
    #[arg(long)]
    id: Option<String>,
}

#[derive(Args)]
struct SmoothArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Polynomial order [default: 3].
    #[arg(long)]
    sg_order: Option<usize>,
    /// Odd window length [default: 37 disease, 13 otherwise].
    #[arg(long)]
    sg_frame: Option<usize>,
    /// Output file [default: <out-dir>/<id>_smoothed.csv].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Default)]
struct PipelineArgs {
    /// Decompose the raw record instead of the smoothed one.
    #[arg(long)]
    no_smooth: bool,
    /// Polynomial order for smoothing [default: 3].
    #[arg(long)]
    sg_order: Option<usize>,
    /// Smoothing window, applied to every cohort [default: 37 disease, 13 otherwise].
    #[arg(long)]
    sg_frame: Option<usize>,
    /// Sum-of-deviations stop, in (0, 1] [default: 0.3].
    #[arg(long)]
    sd_max: Option<f64>,
    /// Sift cap per IMF [default: 150].
    #[arg(long)]
    max_sift_iters: Option<usize>,
    /// IMF cap [default: 20].
    #[arg(long)]
    max_imfs: Option<usize>,
    /// Envelope end handling: clamp_endpoints | extrapolate [default: clamp_endpoints].
    #[arg(long, value_parser = parse_boundary)]
    boundary: Option<SplineBoundary>,
    /// Significance ratio: an IMF counts when C >= max(C) / eta [default: 25].
    #[arg(long)]
    eta: Option<f64>,
    /// Disease when H(IMF 1) >= threshold [default: 0.93].
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct RecordArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    record: RecordArgs,
    #[arg(long)]
    age: Option<u32>,
    /// male | female
    #[arg(long)]
    gender: Option<Gender>,
}

#[derive(Args)]
struct HurstArgs {
    /// Series file: one value per line, or `time,value` per line.
    #[arg(long)]
    input: PathBuf,
    /// Shortest sub-series [default: 10].
    #[arg(long)]
    n_min: Option<usize>,
    /// Longest sub-series as a fraction of the length [default: 0.5].
    #[arg(long)]
    n_max_fraction: Option<f64>,
    /// Grid points before de-duplication [default: 20].
    #[arg(long)]
    grid_points: Option<usize>,
}

#[derive(Args)]
#[group(id = "source", multiple = false, args = ["manifest", "fixture"])]
struct ReportArgs {
    /// Manifest JSON listing raw records [default: `manifest` from --config].
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// CSV of precomputed H values: record_id,cohort,age,gender,h_imf1.
    #[arg(long)]
    fixture: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

fn parse_boundary(s: &str) -> Result<SplineBoundary, String> {
    match s {
        "clamp_endpoints" => Ok(SplineBoundary::ClampEndpoints),
        "extrapolate" => Ok(SplineBoundary::Extrapolate),
        other => Err(format!("expected clamp_endpoints or extrapolate, got '{other}'")),
    }
}

/// `--config` file: classifier settings plus optional manifest and output
/// directory.
#[derive(Deserialize, Default)]
#[serde(default)]
struct RunConfig {
    #[serde(flatten)]
    classifier: ClassifierConfig,
    manifest: Option<PathBuf>,
    out_dir: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParam(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

struct Context {
    out_dir: PathBuf,
    strict: bool,
    config: ClassifierConfig,
    manifest: Option<PathBuf>,
}

impl Context {
    fn output(&self, name: &str) -> CliResult<PathBuf> {
        fs::create_dir_all(&self.out_dir)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", self.out_dir.display())))?;
        Ok(self.out_dir.join(name))
    }
}

fn load_run_config(cli: &Cli) -> CliResult<RunConfig> {
    let Some(path) = &cli.config else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn apply(p: &PipelineArgs, cfg: &mut ClassifierConfig) -> CliResult<()> {
    if p.no_smooth {
        cfg.smooth = false;
    }
    if p.sg_order.is_some() || p.sg_frame.is_some() {
        for params in cfg.sg_params_by_cohort.values_mut() {
            *params = SgParams::new(p.sg_order.unwrap_or(params.order), p.sg_frame.unwrap_or(params.frame))?;
        }
    }
    if let Some(v) = p.sd_max {
        cfg.sift.sd_max = v;
    }
    if let Some(v) = p.max_sift_iters {
        cfg.sift.max_sift_iters = v;
    }
    if let Some(v) = p.max_imfs {
        cfg.sift.max_imfs = v;
    }
    if let Some(v) = p.boundary {
        cfg.sift.spline_boundary = v;
    }
    if let Some(v) = p.eta {
        cfg.eta = v;
    }
    if let Some(v) = p.threshold {
        cfg.h_threshold = v;
    }
    cfg.validate()?;
    Ok(())
}

fn record_id(input: &InputArgs) -> String {
    input.id.clone().unwrap_or_else(|| {
        input
            .input
            .file_stem()
            .map_or_else(|| "record".to_string(), |s| s.to_string_lossy().into_owned())
    })
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let line = serde_json::to_string(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("{line}");
    Ok(())
}

fn cmd_synth(ctx: &Context, a: &SynthArgs) -> CliResult<()> {
    let optional = [
        ("freq", a.freq),
        ("amp", a.amp),
        ("f1", a.f1),
        ("a1", a.a1),
        ("f2", a.f2),
        ("a2", a.a2),
        ("sigma", a.sigma),
        ("slope", a.slope),
    ];
    let params: BTreeMap<String, f64> = optional
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
        .collect();
    let signal = synth_signal(a.kind, &params, a.len, a.fs, a.seed)?;
    let out = match &a.out {
        Some(p) => p.clone(),
        None => ctx.output(&format!("{}.csv", kind_name(a.kind)))?,
    };
    write_record(&out, &signal)?;
    Ok(())
}

fn kind_name(kind: SynthKind) -> &'static str {
    match kind {
        SynthKind::Sine => "sine",
        SynthKind::TwoTone => "two_tone",
        SynthKind::GaussNoise => "gauss_noise",
        SynthKind::Ramp => "ramp",
    }
}

fn cmd_smooth(ctx: &Context, a: &SmoothArgs) -> CliResult<()> {
    let signal = load_record(&a.input.input, a.input.fs)?;
    let base = ctx.config.sg_params(a.input.cohort);
    let params = SgParams::new(a.sg_order.unwrap_or(base.order), a.sg_frame.unwrap_or(base.frame))?;
    let id = record_id(&a.input);
    let smoothed = sg_smooth(&signal, params).map_err(|e| Failure::from(e.for_record(&id)))?;
    let out = match &a.out {
        Some(p) => p.clone(),
        None => ctx.output(&format!("{id}_smoothed.csv"))?,
    };
    write_record(&out, &smoothed)?;
    Ok(())
}

#[derive(Serialize)]
struct DecomposeSummary<'a> {
    record_id: &'a str,
    samples: usize,
    smoothed: bool,
    imf_count: usize,
    sift_counts: Vec<usize>,
    h_per_imf: Vec<Option<f64>>,
    correlations: Vec<f64>,
    significant: Vec<bool>,
    h_imf1: Option<f64>,
}

fn cmd_decompose(ctx: &Context, a: &RecordArgs) -> CliResult<()> {
    let mut cfg = ctx.config.clone();
    apply(&a.pipeline, &mut cfg)?;
    let id = record_id(&a.input);
    let signal = load_record(&a.input.input, a.input.fs)?;
    let meta = RecordMeta::new(id.clone(), a.input.cohort);
    let analysis = analyze_record(&signal, &meta, &cfg)?;

    write_imf_csv(ctx.output(&format!("{id}_imfs.csv"))?, &analysis.decomposition)?;
    let mut table = String::from("imf,hurst,intercept,r_squared,correlation,significant\n");
    let sig = analysis.report.significance.as_ref();
    for (k, curve) in analysis.curves.iter().enumerate() {
        let corr = sig.map_or(String::new(), |s| fmt_sig12(s.correlations[k]));
        let flag = sig.map_or(String::new(), |s| s.significant[k].to_string());
        match curve {
            Some(c) => {
                write_rs_curve_csv(ctx.output(&format!("{id}_rs_imf{}.csv", k + 1))?, c)?;
                table.push_str(&format!(
                    "{},{},{},{},{corr},{flag}\n",
                    k + 1,
                    fmt_sig12(c.hurst),
                    fmt_sig12(c.intercept),
                    fmt_sig12(c.r_squared)
                ));
            }
            None => table.push_str(&format!("{},,,,{corr},{flag}\n", k + 1)),
        }
    }
    let path = ctx.output(&format!("{id}_hurst.csv"))?;
    fs::write(&path, table).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;

    let r = &analysis.report;
    print_json(&DecomposeSummary {
        record_id: &id,
        samples: signal.len(),
        smoothed: cfg.smooth,
        imf_count: r.imf_count,
        sift_counts: analysis.decomposition.imfs.iter().map(|c| c.sift_count).collect(),
        h_per_imf: r.h_per_imf.clone(),
        correlations: sig.map(|s| s.correlations.clone()).unwrap_or_default(),
        significant: sig.map(|s| s.significant.clone()).unwrap_or_default(),
        h_imf1: r.h_imf1,
    })
}

#[derive(Serialize)]
struct HurstSummary {
    samples: usize,
    hurst: f64,
    intercept: f64,
    r_squared: f64,
    points: usize,
    persistence: Persistence,
}

fn cmd_hurst(ctx: &Context, a: &HurstArgs) -> CliResult<()> {
    let mut rs = ctx.config.rs_config;
    if let Some(v) = a.n_min {
        rs.n_min = v;
    }
    if let Some(v) = a.n_max_fraction {
        rs.n_max_fraction = v;
    }
    if let Some(v) = a.grid_points {
        rs.grid_points = v;
    }
    rs.validate()?;
    // the rate does not enter R/S analysis
    let series = load_record(&a.input, 1.0)?;
    let curve = rs_curve(series.samples(), &rs)?;
    let stem = a.input.file_stem().map_or_else(|| "series".into(), |s| s.to_string_lossy().into_owned());
    let path = ctx.output(&format!("{stem}_rs.csv"))?;
    fs::write(&path, rs_curve_csv(&curve)).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    print_json(&HurstSummary {
        samples: series.len(),
        hurst: curve.hurst,
        intercept: curve.intercept,
        r_squared: curve.r_squared,
        points: curve.points.len(),
        persistence: interpret_h(curve.hurst),
    })
}

fn cmd_classify(ctx: &Context, a: &ClassifyArgs) -> CliResult<()> {
    let mut cfg = ctx.config.clone();
    apply(&a.record.pipeline, &mut cfg)?;
    let input = &a.record.input;
    let mut meta = RecordMeta::new(record_id(input), input.cohort);
    meta.age = a.age;
    meta.gender = a.gender;
    meta.validate()?;
    let signal = load_record(&input.input, input.fs)?;
    let report: RecordReport = analyze_record(&signal, &meta, &cfg)?.report;
    print_json(&report)
}

fn cmd_report(ctx: &Context, a: &ReportArgs) -> CliResult<()> {
    let mut cfg = ctx.config.clone();
    apply(&a.pipeline, &mut cfg)?;
    let report: CohortReport = if let Some(fixture) = &a.fixture {
        run_fixture(&load_fixture(fixture)?, &cfg)?
    } else {
        let path = a.manifest.as_ref().or(ctx.manifest.as_ref()).ok_or_else(|| {
            Failure::Usage("one of --manifest or --fixture is required".into())
        })?;
        run_cohort(&load_manifest(path)?, &cfg)?
    };
    fs::create_dir_all(&ctx.out_dir).map_err(|e| Failure::Runtime(format!("{}: {e}", ctx.out_dir.display())))?;
    write_report_bundle(&ctx.out_dir, &report)?;
    for f in &report.failures {
        eprintln!("warning: record {}: {}", f.record_id, f.error);
    }
    for n in &report.notices {
        eprintln!("note: {n}");
    }
    let s = &report.cohort_statistics;
    match s.accuracy {
        Some(acc) => eprintln!("accuracy {acc:.4} ({} correct, {} indeterminate)", s.correct, s.indeterminate),
        None => eprintln!("accuracy unavailable: no labelled, classified records"),
    }
    if ctx.strict && !report.failures.is_empty() {
        return Err(Failure::Runtime(format!("{} record(s) failed (--strict)", report.failures.len())));
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let run_config = load_run_config(&cli)?;
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    let out_dir = cli
        .out_dir
        .clone()
        .or(run_config.out_dir)
        .unwrap_or_else(|| PathBuf::from("."));
    run_config.classifier.validate()?;
    let ctx = Context {
        out_dir,
        strict: cli.strict,
        config: run_config.classifier,
        manifest: run_config.manifest,
    };
    match &cli.command {
        Command::Synth(a) => cmd_synth(&ctx, a),
        Command::Smooth(a) => cmd_smooth(&ctx, a),
        Command::Decompose(a) => cmd_decompose(&ctx, a),
        Command::Hurst(a) => cmd_hurst(&ctx, a),
        Command::Classify(a) => cmd_classify(&ctx, a),
        Command::Report(a) => cmd_report(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
