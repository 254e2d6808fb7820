//! Record and manifest loading, plus deterministic synthetic signals.
//!
//! Record files hold one sample per line, optionally prefixed by a time
//! column (`time,value`). They carry no header and no sampling rate; the rate
//! comes from the caller or from the cohort manifest.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled real-valued signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    samples: Vec<f64>,
    sampling_hz: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, sampling_hz: f64) -> Result<Self> {
        if !(sampling_hz.is_finite() && sampling_hz > 0.0) {
            return Err(Error::InvalidParam(format!(
                "sampling rate must be positive, got {sampling_hz}"
            )));
        }
        if samples.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: samples.len(),
            });
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sampling_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sampling_hz(&self) -> f64 {
        self.sampling_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cohort {
    Disease,
    Normal,
    Unknown,
}

impl Cohort {
    pub fn as_str(self) -> &'static str {
        match self {
            Cohort::Disease => "disease",
            Cohort::Normal => "normal",
            Cohort::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Cohort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Cohort {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "disease" => Ok(Cohort::Disease),
            "normal" => Ok(Cohort::Normal),
            "unknown" | "" => Ok(Cohort::Unknown),
            other => Err(Error::InvalidParam(format!("unknown cohort '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl std::str::FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Gender::Male),
            "female" | "f" => Ok(Gender::Female),
            other => Err(Error::InvalidParam(format!("unknown gender '{other}'"))),
        }
    }
}

pub const MAX_AGE: u32 = 130;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordMeta {
    pub record_id: String,
    pub cohort: Cohort,
    pub age: Option<u32>,
    pub gender: Option<Gender>,
    pub lead: String,
}

impl RecordMeta {
    pub fn new(record_id: impl Into<String>, cohort: Cohort) -> Self {
        Self {
            record_id: record_id.into(),
            cohort,
            age: None,
            gender: None,
            lead: String::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.record_id.trim().is_empty() {
            return Err(Error::InvalidParam("empty record id".into()));
        }
        if let Some(age) = self.age {
            if age > MAX_AGE {
                return Err(Error::InvalidParam(format!(
                    "record {}: age {age} outside [0, {MAX_AGE}]",
                    self.record_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub meta: RecordMeta,
    pub path: PathBuf,
    pub sampling_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortManifest {
    pub description: String,
    pub entries: Vec<ManifestEntry>,
}

impl CohortManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn parse_value(field: &str, path: &Path, line: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("not a number: '{}'", field.trim()),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("non-finite value '{}'", field.trim()),
        });
    }
    Ok(v)
}

/// Parses record text (one value per line, or `time,value` per line).
pub fn parse_record(text: &str, path: &Path, sampling_hz: f64) -> Result<TimeSeries> {
    let mut samples = Vec::new();
    let mut last_time: Option<f64> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim_end_matches('\r').trim();
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        let value = match fields.as_slice() {
            [v] => parse_value(v, path, line)?,
            [t, v] => {
                let t = parse_value(t, path, line)?;
                if let Some(prev) = last_time {
                    if t <= prev {
                        return Err(Error::Parse {
                            path: path.to_path_buf(),
                            line,
                            message: format!("time column not increasing ({t} after {prev})"),
                        });
                    }
                }
                last_time = Some(t);
                parse_value(v, path, line)?
            }
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("expected 1 or 2 columns, found {}", fields.len()),
                })
            }
        };
        samples.push(value);
    }
    if samples.len() < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("need at least 2 samples, found {}", samples.len()),
        });
    }
    TimeSeries::new(samples, sampling_hz)
}

pub fn load_record(path: impl AsRef<Path>, sampling_hz: f64) -> Result<TimeSeries> {
    let path = path.as_ref();
    if !(sampling_hz.is_finite() && sampling_hz > 0.0) {
        return Err(Error::InvalidParam(format!(
            "sampling rate must be positive, got {sampling_hz}"
        )));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_record(&text, path, sampling_hz)
}

/// Formats a value with 12 significant digits.
pub fn fmt_sig12(v: f64) -> String {
    format!("{v:.11e}")
}

/// Writes samples one per line with 12 significant digits.
pub fn write_record(path: impl AsRef<Path>, series: &TimeSeries) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(series.len() * 20);
    for v in series.samples() {
        out.push_str(&fmt_sig12(*v));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    description: String,
    records: Vec<RawEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    id: String,
    path: String,
    cohort: Cohort,
    sampling_hz: f64,
    #[serde(default)]
    age: Option<f64>,
    #[serde(default)]
    gender: Option<Gender>,
    lead: String,
}

/// Parses manifest JSON. Relative record paths are resolved against `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<CohortManifest> {
    let raw: RawManifest =
        serde_json::from_str(text).map_err(|e| Error::Manifest(format!("schema: {e}")))?;
    let mut seen = HashSet::new();
    let mut entries = Vec::with_capacity(raw.records.len());
    for r in raw.records {
        let bad = |msg: String| Error::Manifest(format!("record '{}': {msg}", r.id));
        if r.id.trim().is_empty() {
            return Err(Error::Manifest("record with empty id".into()));
        }
        if !seen.insert(r.id.clone()) {
            return Err(bad("duplicate record id".into()));
        }
        if !(r.sampling_hz.is_finite() && r.sampling_hz > 0.0) {
            return Err(bad(format!("sampling_hz must be positive, got {}", r.sampling_hz)));
        }
        let age = match r.age {
            None => None,
            Some(a) if a >= 0.0 && a <= MAX_AGE as f64 && a.fract() == 0.0 => Some(a as u32),
            Some(a) => return Err(bad(format!("age {a} is not an integer in [0, {MAX_AGE}]"))),
        };
        let rel = PathBuf::from(&r.path);
        let path = if rel.is_absolute() {
            rel
        } else {
            base_dir.join(rel)
        };
        if !path.is_file() {
            return Err(bad(format!("file not found: {}", path.display())));
        }
        entries.push(ManifestEntry {
            meta: RecordMeta {
                record_id: r.id.clone(),
                cohort: r.cohort,
                age,
                gender: r.gender,
                lead: r.lead.clone(),
            },
            path,
            sampling_hz: r.sampling_hz,
        });
    }
    Ok(CohortManifest {
        description: raw.description,
        entries,
    })
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<CohortManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest(&text, base)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Sine,
    TwoTone,
    GaussNoise,
    Ramp,
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine" => Ok(SynthKind::Sine),
            "two_tone" => Ok(SynthKind::TwoTone),
            "gauss_noise" => Ok(SynthKind::GaussNoise),
            "ramp" => Ok(SynthKind::Ramp),
            other => Err(Error::InvalidParam(format!("unknown signal kind '{other}'"))),
        }
    }
}

/// Counter-based SplitMix64: output `k` for `seed` is the SplitMix64 finalizer
/// applied to `seed + (k + 1) * 0x9E3779B97F4A7C15`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    seed: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        let mut z = self
            .seed
            .wrapping_add(self.counter.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in (0, 1] with 53 bits of resolution.
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal pair by the Box-Muller transform.
    pub fn next_gauss_pair(&mut self) -> (f64, f64) {
        let u1 = self.next_open01();
        let u2 = self.next_open01();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        (r * theta.cos(), r * theta.sin())
    }
}

/// Standard normal samples from [`CounterRng`] and Box-Muller.
pub fn gaussian_samples(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = CounterRng::new(seed);
    let mut out = Vec::with_capacity(len + 1);
    while out.len() < len {
        let (a, b) = rng.next_gauss_pair();
        out.push(a);
        out.push(b);
    }
    out.truncate(len);
    out
}

fn param(params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    let v = *params
        .get(key)
        .ok_or_else(|| Error::InvalidParam(format!("missing parameter '{key}'")))?;
    if !v.is_finite() {
        return Err(Error::InvalidParam(format!("parameter '{key}' is not finite")));
    }
    Ok(v)
}

fn positive(params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    let v = param(params, key)?;
    if v <= 0.0 {
        return Err(Error::InvalidParam(format!("parameter '{key}' must be positive, got {v}")));
    }
    Ok(v)
}

/// Generates a deterministic test signal. Time of sample `k` is `k / sampling_hz`.
///
/// | kind | params | sample `k` |
/// |---|---|---|
/// | `sine` | `freq`, `amp` | `amp * sin(2π freq t)` |
/// | `two_tone` | `f1`, `a1`, `f2`, `a2` | sum of two sines |
/// | `gauss_noise` | `sigma` | `sigma * N(0, 1)` from [`gaussian_samples`] |
/// | `ramp` | `slope` | `slope * t` |
pub fn synth_signal(
    kind: SynthKind,
    params: &BTreeMap<String, f64>,
    length: usize,
    sampling_hz: f64,
    seed: u64,
) -> Result<TimeSeries> {
    if length == 0 {
        return Err(Error::InvalidParam("length must be positive".into()));
    }
    if !(sampling_hz.is_finite() && sampling_hz > 0.0) {
        return Err(Error::InvalidParam(format!(
            "sampling rate must be positive, got {sampling_hz}"
        )));
    }
    let t = |k: usize| k as f64 / sampling_hz;
    let samples: Vec<f64> = match kind {
        SynthKind::Sine => {
            let freq = positive(params, "freq")?;
            let amp = param(params, "amp")?;
            (0..length).map(|k| amp * (2.0 * PI * freq * t(k)).sin()).collect()
        }
        SynthKind::TwoTone => {
            let f1 = positive(params, "f1")?;
            let a1 = param(params, "a1")?;
            let f2 = positive(params, "f2")?;
            let a2 = param(params, "a2")?;
            (0..length)
                .map(|k| a1 * (2.0 * PI * f1 * t(k)).sin() + a2 * (2.0 * PI * f2 * t(k)).sin())
                .collect()
        }
        SynthKind::GaussNoise => {
            let sigma = positive(params, "sigma")?;
            gaussian_samples(length, seed)
                .into_iter()
                .map(|z| sigma * z)
                .collect()
        }
        SynthKind::Ramp => {
            let slope = param(params, "slope")?;
            (0..length).map(|k| slope * t(k)).collect()
        }
    };
    TimeSeries::new(samples, sampling_hz)
}
