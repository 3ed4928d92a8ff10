//! The repeated K-fold experiment: featurize a corpus, train one model
//! per (repeat, fold) trial, and aggregate scores.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    confusion, make_folds, mean, sample_variance, Averaging, ConfusionMatrix, EvalError, FoldPlan,
    ScoreSet,
};
use crate::corpus::{build_arena, EpochSet, InstanceArena, LabelScheme, ScalingMode};
use crate::derive_seed;
use crate::nn::{train, ModelConfig, Network, TrainConfig};
use crate::signal::{design_bandpass, BiquadCascade, FilterSpec, StftPlan};

/// Bandpass settings without a sample rate; the rate comes from the
/// epoch set at run time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandpass {
    pub order: usize,
    pub low_hz: f64,
    pub high_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub k: usize,
    pub repeats: usize,
}

impl Default for FoldSpec {
    fn default() -> Self {
        Self { k: 5, repeats: 5 }
    }
}

/// Everything a run needs beyond the epoch set itself. Echoed into the
/// report so a run can be replayed exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSetup {
    pub scheme: LabelScheme,
    pub stft: StftPlan,
    pub bandpass: Option<Bandpass>,
    pub scaling: ScalingMode,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub folds: FoldSpec,
    pub seed: u64,
}

/// One (repeat, fold) trial's outcome. F1 values are percentages,
/// accuracy is a fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    /// 1-based position in repeat-major order.
    pub trial: usize,
    pub repeat: usize,
    pub fold: usize,
    pub seed: u64,
    pub f1_macro: f64,
    pub f1_micro: f64,
    pub f1_weighted: f64,
    pub accuracy: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_trials: usize,
    pub f1_macro_mean: f64,
    pub f1_macro_sd: f64,
    pub accuracy_mean: f64,
    pub accuracy_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub dataset_name: String,
    pub class_count: usize,
    pub n_instances: usize,
    pub bins: usize,
    pub frames: usize,
    pub setup: ExperimentSetup,
    pub trials: Vec<TrialResult>,
    pub summary: RunSummary,
}

impl RunReport {
    /// The per-trial macro-F1 scores in trial order.
    pub fn scores(&self) -> Result<ScoreSet, EvalError> {
        ScoreSet::new(self.trials.iter().map(|t| t.f1_macro).collect())
    }
}

pub(super) fn summarize(trials: &[TrialResult]) -> RunSummary {
    let f1: Vec<f64> = trials.iter().map(|t| t.f1_macro).collect();
    let acc: Vec<f64> = trials.iter().map(|t| t.accuracy).collect();
    RunSummary {
        n_trials: trials.len(),
        f1_macro_mean: mean(&f1),
        f1_macro_sd: sample_variance(&f1).sqrt(),
        accuracy_mean: mean(&acc),
        accuracy_sd: sample_variance(&acc).sqrt(),
    }
}

/// Runs the full repeated K-fold protocol on one epoch set.
///
/// Trials are independent and run in parallel; each derives its own
/// seeds from (master seed, repeat, fold), and results are aggregated
/// in trial order, so reports are identical regardless of scheduling.
pub fn run_experiment(set: &EpochSet, setup: &ExperimentSetup) -> Result<RunReport, EvalError> {
    setup.train.validate()?;
    let filter: Option<BiquadCascade<f64>> = match &setup.bandpass {
        Some(b) => Some(design_bandpass(&FilterSpec {
            order: b.order,
            low_hz: b.low_hz,
            high_hz: b.high_hz,
            fs: set.fs,
        })?),
        None => None,
    };
    let arena = build_arena(set, &setup.scheme, &setup.stft, filter.as_ref(), setup.scaling)?;
    let classes = setup.scheme.class_count();
    let folds = make_folds(
        arena.len(),
        setup.folds.k,
        setup.folds.repeats,
        derive_seed(setup.seed, &[0]),
    )?;

    let pairs: Vec<(usize, usize)> = (0..folds.repeats)
        .flat_map(|r| (0..folds.k).map(move |f| (r, f)))
        .collect();
    let trials = pairs
        .into_par_iter()
        .map(|(r, f)| run_trial(&arena, &folds, classes, setup, r, f))
        .collect::<Result<Vec<TrialResult>, EvalError>>()?;

    Ok(RunReport {
        format_version: 1,
        dataset_name: set.dataset_name.clone(),
        class_count: classes,
        n_instances: arena.len(),
        bins: arena.bins,
        frames: arena.frames,
        setup: setup.clone(),
        trials: trials.clone(),
        summary: summarize(&trials),
    })
}

fn run_trial(
    arena: &InstanceArena,
    folds: &FoldPlan,
    classes: usize,
    setup: &ExperimentSetup,
    repeat: usize,
    fold: usize,
) -> Result<TrialResult, EvalError> {
    let seed = derive_seed(setup.seed, &[1, repeat as u64, fold as u64]);
    let net: Network<f32> = Network::from_config(
        vec![arena.bins, arena.frames, 3],
        classes as u8,
        &setup.model,
        derive_seed(seed, &[0]),
    )?;
    let cfg = TrainConfig {
        seed: derive_seed(seed, &[1]),
        ..setup.train
    };
    let train_idx = folds.train_indices(repeat, fold);
    let (best, history) = train(net, arena, &train_idx, &cfg)?;

    let test_idx = folds.test_fold(repeat, fold);
    let mut predicted = Vec::with_capacity(test_idx.len());
    for chunk in test_idx.chunks(cfg.batch_size) {
        let (batch, _) = crate::nn::train::build_batch::<f32>(arena, chunk);
        predicted.extend(best.predict(batch)?);
    }
    let actual: Vec<u8> = test_idx.iter().map(|&i| arena.labels[i]).collect();
    let conf = confusion(&actual, &predicted, classes)?;

    Ok(TrialResult {
        trial: repeat * folds.k + fold + 1,
        repeat,
        fold,
        seed,
        f1_macro: conf.f1(Averaging::Macro),
        f1_micro: conf.f1(Averaging::Micro),
        f1_weighted: conf.f1(Averaging::Weighted),
        accuracy: conf.accuracy(),
        epochs_run: history.epochs.len(),
        best_epoch: history.best_epoch,
        stopped_early: history.stopped_early,
        confusion: conf,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::corpus::{synth_generate, Geometry, SynthConfig};
    use crate::nn::ModelVariant;
    use crate::signal::WindowKind;

    pub(crate) fn tiny_set(snr: f64, per_class: usize) -> EpochSet {
        synth_generate(&SynthConfig {
            geometry: Geometry::Custom {
                channels: 2,
                samples: 300,
                fs: 100.0,
            },
            classes: 3,
            per_class,
            snr,
            seed: 29,
        })
        .unwrap()
    }

    pub(crate) fn tiny_setup(seed: u64, max_epochs: usize) -> ExperimentSetup {
        ExperimentSetup {
            scheme: LabelScheme::valence3(),
            stft: StftPlan::for_sample_rate(100.0, WindowKind::Hann).unwrap(),
            bandpass: None,
            scaling: ScalingMode::LogMinMax,
            model: ModelConfig {
                variant: ModelVariant::Reduced {
                    conv_filters: (4, 4),
                    lstm_units: (8, 6),
                },
                ..ModelConfig::default()
            },
            train: TrainConfig {
                batch_size: 32,
                max_epochs,
                patience: max_epochs,
                val_fraction: 0.2,
                ..TrainConfig::default()
            },
            folds: FoldSpec { k: 3, repeats: 2 },
            seed,
        }
    }

    #[test]
    fn experiment_structure_and_determinism() {
        let set = tiny_set(10.0, 15);
        let setup = tiny_setup(17, 2);
        let report = run_experiment(&set, &setup).unwrap();

        assert_eq!(report.trials.len(), 6);
        assert_eq!(report.summary.n_trials, 6);
        assert_eq!(report.n_instances, 90);
        assert_eq!((report.bins, report.frames), (26, 11));
        assert_eq!(report.class_count, 3);
        let trials: Vec<usize> = report.trials.iter().map(|t| t.trial).collect();
        assert_eq!(trials, vec![1, 2, 3, 4, 5, 6]);
        for t in &report.trials {
            assert_eq!(t.confusion.total(), 30);
            assert!(t.f1_macro >= 0.0 && t.f1_macro <= 100.0);
            assert!(t.epochs_run <= 2 && t.best_epoch >= 1);
        }
        assert_eq!(report.scores().unwrap().len(), 6);

        let again = run_experiment(&set, &setup).unwrap();
        assert_eq!(report, again);

        let other = run_experiment(&set, &tiny_setup(18, 2)).unwrap();
        assert_ne!(report, other);
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let set = tiny_set(10.0, 15);
        let report = run_experiment(&set, &tiny_setup(17, 1)).unwrap();
        let mut seeds: Vec<u64> = report.trials.iter().map(|t| t.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), report.trials.len());
    }
}
