//! Epoch storage, label schemes, featurization, and synthetic corpora.
//!
//! An [`EpochSet`] is a homogeneous collection of labeled multi-channel
//! epochs. Epochs come either from the deterministic synthetic generator
//! ([`synth::synth_generate`]) or from the on-disk format v1
//! ([`io::read_epochset`]). The [`features`] submodule turns epochs into
//! per-channel classifier instances.

pub mod features;
pub mod io;
pub mod label;
pub mod synth;

use thiserror::Error;

use crate::signal::{SignalError, TimeSeries};

pub use features::{
    build_arena, featurize, flatten, labeled_epochs, InstanceArena, InstanceTensor, ScalingMode,
    LOG_EPSILON,
};
pub use io::{read_epochset, write_epochset};
pub use label::{label_va4, label_valence3, LabelOutcome, LabelScheme, SchemeKind};
pub use synth::{synth_generate, Geometry, SynthConfig, DEFAULT_SNR};

/// Errors from corpus construction, labeling, featurization, and I/O.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{name} rating out of range [1, 9]: {value}")]
    RatingOutOfRange { name: &'static str, value: f64 },
    #[error("emotional epoch carries no valence rating")]
    MissingValence,
    #[error("epoch carries no ratings but the scheme requires them")]
    MissingRatings,
    #[error("record {record} has valence without arousal (or vice versa)")]
    PartialRatings { record: usize },
    #[error("epoch set contains no records")]
    EmptySet,
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("channel data length {got} does not equal channels x samples = {expected}")]
    BadChannelData { expected: usize, got: usize },
    #[error("unsupported class count {0}: supported are 2, 3 (valence bands), and 4 (quadrants)")]
    UnsupportedClassCount(u8),
    #[error("snr must be positive and finite, got {0}")]
    InvalidSnr(f64),
    #[error("per_class must be at least 1")]
    EmptyClass,
    #[error("unsupported format version {0}, expected 1")]
    UnsupportedVersion(u32),
    #[error("data file size mismatch: expected {expected} bytes, found {actual}")]
    SizeMismatch { expected: u64, actual: u64 },
    #[error("record {record} offset mismatch: manifest says {actual}, layout requires {expected}")]
    BadOffset {
        record: usize,
        expected: u64,
        actual: u64,
    },
    #[error("record count mismatch: manifest declares {declared} epochs but lists {listed} records")]
    RecordCount { declared: usize, listed: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("manifest error: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Self-assessment ratings on the 1-9 scale.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Ratings {
    pub valence: f64,
    pub arousal: f64,
}

impl Ratings {
    pub fn new(valence: f64, arousal: f64) -> Result<Self, CorpusError> {
        check_rating("valence", valence)?;
        check_rating("arousal", arousal)?;
        Ok(Self { valence, arousal })
    }
}

pub(crate) fn check_rating(name: &'static str, value: f64) -> Result<(), CorpusError> {
    if !(1.0..=9.0).contains(&value) || !value.is_finite() {
        return Err(CorpusError::RatingOutOfRange { name, value });
    }
    Ok(())
}

/// One labeled multi-channel epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub subject_id: u32,
    pub trial_id: u32,
    pub fs: f64,
    n_channels: usize,
    n_samples: usize,
    channels: Vec<f32>,
    pub ratings: Option<Ratings>,
    /// Pass-through class for corpora labeled at the source; the pipeline
    /// itself always derives labels from a [`LabelScheme`].
    pub discrete_label: Option<u8>,
    /// False marks a non-emotional epoch.
    pub emotional: bool,
}

impl EpochRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        subject_id: u32,
        trial_id: u32,
        fs: f64,
        n_channels: usize,
        n_samples: usize,
        channels: Vec<f32>,
        ratings: Option<Ratings>,
        emotional: bool,
    ) -> Result<Self, CorpusError> {
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(SignalError::InvalidSampleRate(fs).into());
        }
        if channels.len() != n_channels * n_samples || n_channels == 0 || n_samples == 0 {
            return Err(CorpusError::BadChannelData {
                expected: n_channels * n_samples,
                got: channels.len(),
            });
        }
        if let Some(r) = ratings {
            check_rating("valence", r.valence)?;
            check_rating("arousal", r.arousal)?;
        }
        Ok(Self {
            subject_id,
            trial_id,
            fs,
            n_channels,
            n_samples,
            channels,
            ratings,
            discrete_label: None,
            emotional,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        &self.channels[c * self.n_samples..(c + 1) * self.n_samples]
    }

    /// All samples, channel-major.
    pub fn samples(&self) -> &[f32] {
        &self.channels
    }

    /// One channel widened to the 64-bit DSP type.
    pub fn channel_series(&self, c: usize) -> Result<TimeSeries<f64>, SignalError> {
        TimeSeries::new(self.channel(c).iter().map(|&v| v as f64).collect(), self.fs)
    }
}

/// Homogeneous collection of epochs plus manifest metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    pub dataset_name: String,
    /// Label scheme the corpus was built for ("va4" or "valence3").
    pub scheme_name: String,
    /// Generator seed when synthetic.
    pub seed: Option<u64>,
    pub fs: f64,
    n_channels: usize,
    n_samples: usize,
    records: Vec<EpochRecord>,
}

impl EpochSet {
    pub fn new(
        dataset_name: impl Into<String>,
        scheme_name: impl Into<String>,
        seed: Option<u64>,
        fs: f64,
        n_channels: usize,
        n_samples: usize,
        records: Vec<EpochRecord>,
    ) -> Result<Self, CorpusError> {
        for (i, r) in records.iter().enumerate() {
            if r.n_channels != n_channels || r.n_samples != n_samples || r.fs != fs {
                return Err(CorpusError::GeometryMismatch(format!(
                    "record {i} has {}x{} @ {} Hz, set declares {}x{} @ {} Hz",
                    r.n_channels, r.n_samples, r.fs, n_channels, n_samples, fs
                )));
            }
        }
        Ok(Self {
            dataset_name: dataset_name.into(),
            scheme_name: scheme_name.into(),
            seed,
            fs,
            n_channels,
            n_samples,
            records,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}
