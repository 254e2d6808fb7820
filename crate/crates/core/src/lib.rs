//! ECG analysis by empirical mode decomposition and rescaled-range Hurst
//! exponents.
//!
//! The pipeline smooths a record with a Savitzky-Golay filter
//! ([`sgolay`]), splits it into intrinsic mode functions ([`emd`]), ranks the
//! IMFs by correlation with the signal ([`significance`]), estimates the Hurst
//! exponent of each IMF by R/S analysis ([`hurst`]) and labels the record from
//! the first IMF's exponent ([`classify`]). [`stats`] holds the cohort-level
//! tests and summaries, and [`export`] the file formats.
//!
//! ```
//! use std::collections::BTreeMap;
//! use ecg_hurst::classify::{run_record, ClassifierConfig};
//! use ecg_hurst::ingest::{synth_signal, Cohort, RecordMeta, SynthKind};
//!
//! let params = BTreeMap::from([("freq".to_string(), 8.0), ("amp".to_string(), 5.0)]);
//! let tone = synth_signal(SynthKind::Sine, &params, 1024, 256.0, 0).unwrap();
//! let report = run_record(&tone, &RecordMeta::new("tone", Cohort::Unknown), &ClassifierConfig::default()).unwrap();
//! assert!(report.imf_count >= 1);
//! ```

pub mod classify;
pub mod emd;
pub mod error;
pub mod export;
pub mod hurst;
pub mod ingest;
pub mod sgolay;
pub mod significance;
pub mod spline;
pub mod stats;

pub use error::{Error, Result};

/// Book chapters compiled as doc-tests so their snippets stay in sync.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/pipeline.md")]
    pub struct Pipeline;
    #[doc = include_str!("../../../book/src/smoothing.md")]
    pub struct Smoothing;
    #[doc = include_str!("../../../book/src/emd.md")]
    pub struct Emd;
    #[doc = include_str!("../../../book/src/significance.md")]
    pub struct Significance;
    #[doc = include_str!("../../../book/src/hurst.md")]
    pub struct Hurst;
    #[doc = include_str!("../../../book/src/statistics.md")]
    pub struct Statistics;
    #[doc = include_str!("../../../book/src/classification.md")]
    pub struct Classification;
}
