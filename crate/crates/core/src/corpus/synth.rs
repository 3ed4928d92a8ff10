//! Deterministic synthetic EEG corpora.
//!
//! Each class gets a band-limited oscillation at a class-specific center
//! frequency, amplitude-modulated at a slow per-epoch rate, over a 1/f
//! (pink) background at a configurable signal-to-noise ratio. Ratings are
//! drawn inside bands that make the active label scheme recover the
//! intended class. Every epoch and channel derives its own RNG stream, so
//! generation is order-independent and bitwise reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{CorpusError, EpochRecord, EpochSet, Ratings};
use crate::derive_seed;

/// Oscillation RMS over noise RMS. Chosen so class signatures are
/// recoverable but the background remains visible in the spectrum.
pub const DEFAULT_SNR: f64 = 1.0;

/// Dataset geometry: channels, samples per channel, sampling rate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase", tag = "name")]
pub enum Geometry {
    /// 32 channels x 8064 samples at 128 Hz.
    Deap,
    /// 62 channels x 16000 samples at 200 Hz.
    Seed,
    /// 128 channels x 1751 samples at 250 Hz.
    Dens,
    Custom {
        channels: usize,
        samples: usize,
        fs: f64,
    },
}

impl Geometry {
    /// (channels, samples, fs).
    pub fn dims(&self) -> (usize, usize, f64) {
        match *self {
            Geometry::Deap => (32, 8064, 128.0),
            Geometry::Seed => (62, 16000, 200.0),
            Geometry::Dens => (128, 1751, 250.0),
            Geometry::Custom {
                channels,
                samples,
                fs,
            } => (channels, samples, fs),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Geometry::Deap => "deap",
            Geometry::Seed => "seed",
            Geometry::Dens => "dens",
            Geometry::Custom { .. } => "custom",
        }
    }

    /// Trials folded under one subject id, for plausible metadata.
    fn trials_per_subject(&self) -> usize {
        match self {
            Geometry::Deap => 40,
            Geometry::Seed => 15,
            Geometry::Dens => 31,
            Geometry::Custom { .. } => 32,
        }
    }
}

/// Synthetic corpus configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    pub geometry: Geometry,
    pub classes: u8,
    pub per_class: usize,
    pub snr: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let (channels, samples, fs) = self.geometry.dims();
        if channels == 0 || samples == 0 || !(fs > 0.0) || !fs.is_finite() {
            return Err(CorpusError::GeometryMismatch(format!(
                "invalid geometry: {channels} channels x {samples} samples @ {fs} Hz"
            )));
        }
        if !(2..=4).contains(&self.classes) {
            return Err(CorpusError::UnsupportedClassCount(self.classes));
        }
        if self.per_class == 0 {
            return Err(CorpusError::EmptyClass);
        }
        if !(self.snr > 0.0) || !self.snr.is_finite() {
            return Err(CorpusError::InvalidSnr(self.snr));
        }
        Ok(())
    }

    /// Label scheme the generated ratings encode.
    pub fn scheme_name(&self) -> &'static str {
        match self.classes {
            3 => "valence3",
            _ => "va4",
        }
    }
}

/// Center frequency assigned to class `c`, evenly spread over 5-30 Hz.
pub fn class_center_hz(classes: u8, c: u8) -> f64 {
    if classes <= 1 {
        return 5.0;
    }
    5.0 + 25.0 * c as f64 / (classes - 1) as f64
}

/// Pink-noise generator: three-pole filter over uniform white noise
/// (Paul Kellet's economy filter).
struct PinkNoise {
    b0: f64,
    b1: f64,
    b2: f64,
}

impl PinkNoise {
    fn new() -> Self {
        Self {
            b0: 0.0,
            b1: 0.0,
            b2: 0.0,
        }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let white = rng.gen_range(-1.0..1.0);
        self.b0 = 0.99765 * self.b0 + white * 0.0990460;
        self.b1 = 0.96300 * self.b1 + white * 0.2965164;
        self.b2 = 0.57000 * self.b2 + white * 1.0526913;
        self.b0 + self.b1 + self.b2 + white * 0.1848
    }
}

fn rms(xs: &[f64]) -> f64 {
    (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Ratings consistent with class `c` under the scheme implied by the
/// class count (see [`SynthConfig::scheme_name`]).
fn draw_ratings(classes: u8, c: u8, rng: &mut ChaCha8Rng) -> (Option<Ratings>, bool) {
    let hi = |rng: &mut ChaCha8Rng| rng.gen_range(6.5..8.5);
    let lo = |rng: &mut ChaCha8Rng| rng.gen_range(1.5..3.5);
    let any = |rng: &mut ChaCha8Rng| rng.gen_range(1.5..8.5);
    match (classes, c) {
        // Quadrants (two-class corpora use the high-valence half).
        (2 | 4, 0) => (
            Some(Ratings {
                valence: hi(rng),
                arousal: hi(rng),
            }),
            true,
        ),
        (2 | 4, 1) => (
            Some(Ratings {
                valence: hi(rng),
                arousal: lo(rng),
            }),
            true,
        ),
        (4, 2) => (
            Some(Ratings {
                valence: lo(rng),
                arousal: hi(rng),
            }),
            true,
        ),
        (4, 3) => (
            Some(Ratings {
                valence: lo(rng),
                arousal: lo(rng),
            }),
            true,
        ),
        // Valence bands: low, neutral (non-emotional, no ratings), high.
        (3, 0) => (
            Some(Ratings {
                valence: lo(rng),
                arousal: any(rng),
            }),
            true,
        ),
        (3, 1) => (None, false),
        (3, 2) => (
            Some(Ratings {
                valence: hi(rng),
                arousal: any(rng),
            }),
            true,
        ),
        _ => unreachable!("validated class count"),
    }
}

/// Generates epoch `index` of the corpus described by `cfg`.
///
/// Deterministic in (cfg, index) alone, so callers may generate epochs in
/// any order or in parallel.
pub fn generate_epoch(cfg: &SynthConfig, index: usize) -> Result<EpochRecord, CorpusError> {
    cfg.validate()?;
    let (channels, samples, fs) = cfg.geometry.dims();
    let class = (index % cfg.classes as usize) as u8;
    let f_center = class_center_hz(cfg.classes, class);

    let mut epoch_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[1, index as u64]));
    let (ratings, emotional) = draw_ratings(cfg.classes, class, &mut epoch_rng);
    let f_mod = epoch_rng.gen_range(0.2..0.8);
    let mod_phase = epoch_rng.gen_range(0.0..std::f64::consts::TAU);

    let mut data = vec![0.0f32; channels * samples];
    for (ch, row) in data.chunks_mut(samples).enumerate() {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0, index as u64, ch as u64]));
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);

        let mut osc = Vec::with_capacity(samples);
        for t in 0..samples {
            let time = t as f64 / fs;
            let envelope = 1.0 + 0.3 * (std::f64::consts::TAU * f_mod * time + mod_phase).sin();
            osc.push(envelope * (std::f64::consts::TAU * f_center * time + phase).sin());
        }

        let mut pink = PinkNoise::new();
        let noise: Vec<f64> = (0..samples).map(|_| pink.next(&mut rng)).collect();
        let noise_scale = rms(&osc) / (cfg.snr * rms(&noise));

        for (out, (o, n)) in row.iter_mut().zip(osc.iter().zip(&noise)) {
            *out = (o + n * noise_scale) as f32;
        }
    }

    let trials = cfg.geometry.trials_per_subject();
    EpochRecord::new(
        (index / trials) as u32 + 1,
        (index % trials) as u32 + 1,
        fs,
        channels,
        samples,
        data,
        ratings,
        emotional,
    )
}

/// Generates the full corpus: `classes * per_class` epochs, classes
/// interleaved round-robin.
pub fn synth_generate(cfg: &SynthConfig) -> Result<EpochSet, CorpusError> {
    cfg.validate()?;
    let total = cfg.classes as usize * cfg.per_class;
    let records: Vec<EpochRecord> = (0..total)
        .into_par_iter()
        .map(|i| generate_epoch(cfg, i))
        .collect::<Result<_, _>>()?;
    let (channels, samples, fs) = cfg.geometry.dims();
    EpochSet::new(
        format!("synth-{}", cfg.geometry.name()),
        cfg.scheme_name(),
        Some(cfg.seed),
        fs,
        channels,
        samples,
        records,
    )
}
