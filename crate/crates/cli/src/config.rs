//! Optional JSON config file. Every key mirrors a command-line flag and
//! the flag wins when both are present.

use std::path::{Path, PathBuf};

use affect_core::corpus::ScalingMode;
use affect_core::eval::Bandpass;
use affect_core::signal::WindowKind;
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,

    // synth
    pub geometry: Option<String>,
    pub channels: Option<usize>,
    pub samples: Option<usize>,
    pub fs: Option<f64>,
    pub classes: Option<u8>,
    pub per_class: Option<usize>,
    pub snr: Option<f64>,

    // featurize and run
    pub scheme: Option<String>,
    pub frame_size: Option<usize>,
    pub hop: Option<usize>,
    pub window: Option<String>,
    pub scaling: Option<String>,
    pub bandpass: Option<Bandpass>,
    pub no_bandpass: Option<bool>,

    // run
    pub model: Option<String>,
    pub conv_filters: Option<[usize; 2]>,
    pub lstm_units: Option<[usize; 2]>,
    pub dropout: Option<f64>,
    pub pool_between_convs: Option<bool>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub val_fraction: Option<f64>,
    pub k: Option<usize>,
    pub repeats: Option<usize>,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig, Failure> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("bad config {}: {e}", path.display())))
}

pub fn parse_window(name: &str) -> Result<WindowKind, Failure> {
    match name.to_ascii_lowercase().as_str() {
        "hann" => Ok(WindowKind::Hann),
        "hamming" => Ok(WindowKind::Hamming),
        "rectangular" => Ok(WindowKind::Rectangular),
        other => Err(Failure::Config(format!(
            "unknown window {other:?} (expected hann, hamming, or rectangular)"
        ))),
    }
}

pub fn parse_scaling(name: &str) -> Result<ScalingMode, Failure> {
    let folded: String = name
        .chars()
        .filter(|c| *c != '-' && *c != '_')
        .collect::<String>()
        .to_ascii_lowercase();
    match folded.as_str() {
        "raw" => Ok(ScalingMode::Raw),
        "log" => Ok(ScalingMode::Log),
        "logminmax" => Ok(ScalingMode::LogMinMax),
        _ => Err(Failure::Config(format!(
            "unknown scaling {name:?} (expected raw, log, or log-min-max)"
        ))),
    }
}

/// "A,B" into a pair of counts, for conv filters and LSTM units.
pub fn parse_pair(s: &str) -> Result<(usize, usize), Failure> {
    let err = || Failure::Config(format!("expected two comma-separated counts, got {s:?}"));
    let (a, b) = s.split_once(',').ok_or_else(err)?;
    Ok((
        a.trim().parse().map_err(|_| err())?,
        b.trim().parse().map_err(|_| err())?,
    ))
}

/// "LOW:HIGH" into bandpass corners in Hz.
pub fn parse_corners(s: &str) -> Result<(f64, f64), Failure> {
    let err = || Failure::Config(format!("expected corners as LOW:HIGH in Hz, got {s:?}"));
    let (lo, hi) = s.split_once(':').ok_or_else(err)?;
    Ok((
        lo.trim().parse().map_err(|_| err())?,
        hi.trim().parse().map_err(|_| err())?,
    ))
}
