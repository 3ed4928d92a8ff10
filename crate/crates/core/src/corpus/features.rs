//! Channel flattening and spectrogram featurization.

use rayon::prelude::*;

use super::{CorpusError, EpochSet, LabelOutcome, LabelScheme};
use crate::signal::{
    apply_filter, log_normalize, spectrogram, stft, BiquadCascade, StftPlan, TimeSeries,
};

/// Epsilon added before the log in log-scaled modes.
pub const LOG_EPSILON: f64 = 1e-10;

/// Spectrogram scaling applied before the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    /// Raw power.
    Raw,
    /// log10(power + epsilon).
    Log,
    /// log10(power + epsilon) then per-instance min-max to [0, 1].
    #[default]
    LogMinMax,
}

/// One classifier input: a bins x frames x 3 tensor of 32-bit floats with
/// its class. The three channel planes are identical copies of the power
/// plane.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceTensor {
    values: Vec<f32>,
    bins: usize,
    frames: usize,
    label: u8,
}

impl InstanceTensor {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// (bins, frames, channels).
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.bins, self.frames, 3)
    }

    pub fn label(&self) -> u8 {
        self.label
    }

    /// Values laid out channels-last: `values[(k * frames + m) * 3 + c]`.
    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Featurizes one channel: STFT, power spectrogram, scaling, then
/// replication of the power plane into three identical channel planes.
pub fn featurize(
    ts: &TimeSeries<f64>,
    plan: &StftPlan,
    scaling: ScalingMode,
    label: u8,
) -> Result<InstanceTensor, CorpusError> {
    let sg = spectrogram(&stft(ts, plan)?);
    let sg = match scaling {
        ScalingMode::LogMinMax => log_normalize(&sg, LOG_EPSILON)?,
        ScalingMode::Raw | ScalingMode::Log => sg,
    };
    let (bins, frames) = (sg.bins(), sg.frames());
    let mut values = Vec::with_capacity(bins * frames * 3);
    for &p in sg.power() {
        // The log-only mode can go negative, so it is applied here rather
        // than stored back into the nonnegative spectrogram type.
        let v = match scaling {
            ScalingMode::Log => (p + LOG_EPSILON).log10() as f32,
            _ => p as f32,
        };
        values.extend_from_slice(&[v, v, v]);
    }
    Ok(InstanceTensor {
        values,
        bins,
        frames,
        label,
    })
}

/// Labeled epochs under a scheme: (epoch index, class), unlabelable epochs
/// dropped.
pub fn labeled_epochs(
    set: &EpochSet,
    scheme: &LabelScheme,
) -> Result<Vec<(usize, u8)>, CorpusError> {
    if set.is_empty() {
        return Err(CorpusError::EmptySet);
    }
    scheme.validate()?;
    let mut out = Vec::with_capacity(set.len());
    for (i, record) in set.records().iter().enumerate() {
        match scheme.label_epoch(record)? {
            LabelOutcome::Class(c) => out.push((i, c)),
            LabelOutcome::Unlabelable => {}
        }
    }
    Ok(out)
}

/// Flattens a set into per-channel instances, epoch-major then
/// channel-minor, each carrying its epoch's class.
pub fn flatten(
    set: &EpochSet,
    scheme: &LabelScheme,
) -> Result<Vec<(TimeSeries<f64>, u8)>, CorpusError> {
    let labeled = labeled_epochs(set, scheme)?;
    let mut out = Vec::with_capacity(labeled.len() * set.n_channels());
    for (idx, class) in labeled {
        let record = &set.records()[idx];
        for c in 0..record.n_channels() {
            out.push((record.channel_series(c)?, class));
        }
    }
    Ok(out)
}

/// Featurized corpus in one contiguous block, instance-major.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceArena {
    data: Vec<f32>,
    pub bins: usize,
    pub frames: usize,
    pub labels: Vec<u8>,
}

impl InstanceArena {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Length of one flattened instance (bins x frames x 3).
    pub fn instance_len(&self) -> usize {
        self.bins * self.frames * 3
    }

    pub fn instance(&self, i: usize) -> &[f32] {
        let n = self.instance_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Builds the full instance arena for a set: optional bandpass, then
/// featurization of every channel of every labeled epoch. Epochs are
/// processed in parallel; output order is epoch-major, channel-minor.
pub fn build_arena(
    set: &EpochSet,
    scheme: &LabelScheme,
    plan: &StftPlan,
    filter: Option<&BiquadCascade<f64>>,
    scaling: ScalingMode,
) -> Result<InstanceArena, CorpusError> {
    let labeled = labeled_epochs(set, scheme)?;
    let channels = set.n_channels();
    let frames = plan.frames_for_len(set.n_samples())?;
    let bins = plan.bins();
    let inst_len = bins * frames * 3;
    let epoch_block = channels * inst_len;

    let mut data = vec![0.0f32; labeled.len() * epoch_block];
    let mut labels = vec![0u8; labeled.len() * channels];

    let results: Vec<Result<(), CorpusError>> = data
        .par_chunks_mut(epoch_block)
        .zip(labels.par_chunks_mut(channels))
        .zip(labeled.par_iter())
        .map(|((block, label_row), &(idx, class))| {
            let record = &set.records()[idx];
            for c in 0..channels {
                let series = record.channel_series(c)?;
                let series = match filter {
                    Some(f) => apply_filter(f, &series)?,
                    None => series,
                };
                let tensor = featurize(&series, plan, scaling, class)?;
                block[c * inst_len..(c + 1) * inst_len].copy_from_slice(tensor.values());
                label_row[c] = class;
            }
            Ok(())
        })
        .collect();
    for r in results {
        r?;
    }

    Ok(InstanceArena {
        data,
        bins,
        frames,
        labels,
    })
}
