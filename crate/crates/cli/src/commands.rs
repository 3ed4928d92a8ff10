//! The five subcommands. Each resolves its settings from flags plus the
//! optional config file, runs the corresponding library call, and writes
//! outputs atomically.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use affect_core::corpus::io::write_atomic;
use affect_core::corpus::{
    build_arena, read_epochset, synth_generate, write_epochset, EpochRecord, EpochSet, Geometry,
    InstanceArena, LabelScheme, ScalingMode, SynthConfig, DEFAULT_SNR,
};
use affect_core::eval::{
    compare, compare_csv, read_report, run_experiment, write_report, Bandpass, ExperimentSetup,
    FoldSpec,
};
use affect_core::nn::{
    run_gradcheck, AdamConfig, FaultTarget, ModelConfig, ModelVariant, TrainConfig,
};
use affect_core::signal::{design_bandpass, FilterSpec, StftPlan};
use serde::Serialize;

use crate::config::{parse_corners, parse_pair, parse_scaling, parse_window, FileConfig};
use crate::{from_corpus, from_eval, Failure};
use crate::{CompareArgs, FeatureFlags, FeaturizeArgs, GradcheckArgs, RunArgs, SynthArgs};

const FEATURES_MANIFEST: &str = "features.json";
const FEATURES_DATA: &str = "features.f32le";

/// 62-channel 200 Hz recordings longer than this get cut to it, so
/// overlong sets in that geometry reduce to the canonical 80 s window.
const SEED_GEOMETRY_CAP: usize = 16000;

fn require_seed(seed: Option<u64>) -> Result<u64, Failure> {
    seed.ok_or_else(|| {
        Failure::Config("a --seed is required; nothing defaults to wall-clock entropy".into())
    })
}

fn require_out(out: Option<PathBuf>) -> Result<PathBuf, Failure> {
    out.ok_or_else(|| Failure::Config("an --out directory is required".into()))
}

pub fn synth(
    args: &SynthArgs,
    file: &FileConfig,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let out = require_out(out)?;
    let name = args
        .geometry
        .clone()
        .or_else(|| file.geometry.clone())
        .ok_or_else(|| {
            Failure::Config("a --geometry is required (deap, seed, dens, or custom)".into())
        })?;
    let custom_dims = args.channels.or(file.channels).is_some()
        || args.samples.or(file.samples).is_some()
        || args.fs.or(file.fs).is_some();
    let geometry = match name.as_str() {
        "deap" => Geometry::Deap,
        "seed" => Geometry::Seed,
        "dens" => Geometry::Dens,
        "custom" => {
            let missing =
                || Failure::Config("custom geometry needs --channels, --samples, and --fs".into());
            Geometry::Custom {
                channels: args.channels.or(file.channels).ok_or_else(missing)?,
                samples: args.samples.or(file.samples).ok_or_else(missing)?,
                fs: args.fs.or(file.fs).ok_or_else(missing)?,
            }
        }
        other => {
            return Err(Failure::Config(format!(
                "unknown geometry {other:?} (expected deap, seed, dens, or custom)"
            )))
        }
    };
    if !matches!(geometry, Geometry::Custom { .. }) && custom_dims {
        return Err(Failure::Config(
            "--channels, --samples, and --fs only apply to --geometry custom".into(),
        ));
    }
    let cfg = SynthConfig {
        geometry,
        classes: args.classes.or(file.classes).unwrap_or(3),
        per_class: args.per_class.or(file.per_class).unwrap_or(50),
        snr: args.snr.or(file.snr).unwrap_or(DEFAULT_SNR),
        seed: require_seed(seed)?,
    };
    cfg.validate().map_err(from_corpus)?;

    let set = synth_generate(&cfg).map_err(from_corpus)?;
    write_epochset(&set, &out).map_err(from_corpus)?;
    println!(
        "wrote {} epochs ({} channels × {} samples @ {} Hz, scheme {}) to {}",
        set.len(),
        set.n_channels(),
        set.n_samples(),
        set.fs,
        set.scheme_name,
        out.display()
    );
    Ok(())
}

fn load_set(path: &Path) -> Result<EpochSet, Failure> {
    let set = read_epochset(path)
        .map_err(|e| from_corpus(e).context(format_args!("epoch set {}", path.display())))?;
    truncate_long_seed_geometry(set).map_err(from_corpus)
}

fn truncate_long_seed_geometry(
    set: EpochSet,
) -> Result<EpochSet, affect_core::corpus::CorpusError> {
    if set.n_channels() != 62 || set.fs != 200.0 || set.n_samples() <= SEED_GEOMETRY_CAP {
        return Ok(set);
    }
    eprintln!(
        "note: truncating {}-sample epochs to the first {SEED_GEOMETRY_CAP} samples",
        set.n_samples()
    );
    let records = set
        .records()
        .iter()
        .map(|r| {
            let mut channels = Vec::with_capacity(r.n_channels() * SEED_GEOMETRY_CAP);
            for c in 0..r.n_channels() {
                channels.extend_from_slice(&r.channel(c)[..SEED_GEOMETRY_CAP]);
            }
            let mut cut = EpochRecord::new(
                r.subject_id,
                r.trial_id,
                r.fs,
                r.n_channels(),
                SEED_GEOMETRY_CAP,
                channels,
                r.ratings,
                r.emotional,
            )?;
            cut.discrete_label = r.discrete_label;
            Ok(cut)
        })
        .collect::<Result<Vec<_>, affect_core::corpus::CorpusError>>()?;
    EpochSet::new(
        set.dataset_name.clone(),
        set.scheme_name.clone(),
        set.seed,
        set.fs,
        set.n_channels(),
        SEED_GEOMETRY_CAP,
        records,
    )
}

/// Featurization settings shared by `featurize` and `run`.
struct FeatureSettings {
    scheme: LabelScheme,
    stft: StftPlan,
    scaling: ScalingMode,
    bandpass: Option<Bandpass>,
}

fn resolve_features(
    flags: &FeatureFlags,
    file: &FileConfig,
    set: &EpochSet,
) -> Result<FeatureSettings, Failure> {
    let scheme_name = flags
        .scheme
        .clone()
        .or_else(|| file.scheme.clone())
        .unwrap_or_else(|| set.scheme_name.clone());
    let scheme = LabelScheme::from_name(&scheme_name).ok_or_else(|| {
        Failure::Config(format!(
            "unknown label scheme {scheme_name:?} (expected va4 or valence3)"
        ))
    })?;

    let window = parse_window(
        flags
            .window
            .as_deref()
            .or(file.window.as_deref())
            .unwrap_or("hann"),
    )?;
    let default_plan = StftPlan::for_sample_rate(set.fs, window)
        .map_err(|e| Failure::Config(e.to_string()))?;
    let stft = StftPlan::new(
        flags
            .frame_size
            .or(file.frame_size)
            .unwrap_or(default_plan.frame_size_n),
        flags.hop.or(file.hop).unwrap_or(default_plan.hop_h),
        window,
    )
    .map_err(|e| Failure::Config(e.to_string()))?;

    let scaling = match flags.scaling.as_deref().or(file.scaling.as_deref()) {
        Some(name) => parse_scaling(name)?,
        None => ScalingMode::default(),
    };

    let bandpass = if flags.no_bandpass || file.no_bandpass == Some(true) {
        None
    } else {
        let mut band = file.bandpass.unwrap_or(Bandpass {
            order: 5,
            low_hz: 1.0,
            high_hz: 40.0,
        });
        if let Some(corners) = flags.bandpass.as_deref() {
            (band.low_hz, band.high_hz) = parse_corners(corners)?;
        }
        if let Some(order) = flags.bandpass_order {
            band.order = order;
        }
        Some(band)
    };

    Ok(FeatureSettings {
        scheme,
        stft,
        scaling,
        bandpass,
    })
}

#[derive(Serialize)]
struct FeatureManifest<'a> {
    format_version: u32,
    dataset_name: &'a str,
    scheme: &'a LabelScheme,
    stft: &'a StftPlan,
    bandpass: Option<Bandpass>,
    scaling: ScalingMode,
    n_instances: usize,
    bins: usize,
    frames: usize,
    channels: usize,
    data_file: &'a str,
    labels: &'a [u8],
}

pub fn featurize(
    args: &FeaturizeArgs,
    file: &FileConfig,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let out = require_out(out)?;
    let set = load_set(&args.set)?;
    let settings = resolve_features(&args.features, file, &set)?;
    let filter = settings
        .bandpass
        .map(|b| {
            design_bandpass(&FilterSpec {
                order: b.order,
                low_hz: b.low_hz,
                high_hz: b.high_hz,
                fs: set.fs,
            })
        })
        .transpose()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let arena = build_arena(
        &set,
        &settings.scheme,
        &settings.stft,
        filter.as_ref(),
        settings.scaling,
    )
    .map_err(from_corpus)?;

    write_features(&arena, &set, &settings, &out)?;
    println!(
        "{} instances of {}×{}×3",
        arena.len(),
        arena.bins,
        arena.frames
    );
    println!("features written to {}", out.display());
    Ok(())
}

/// Streams the tensor data to disk instance by instance; a full corpus
/// does not fit in memory twice.
fn write_features(
    arena: &InstanceArena,
    set: &EpochSet,
    settings: &FeatureSettings,
    dir: &Path,
) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(Failure::data)?;
    let data_path = dir.join(FEATURES_DATA);
    let tmp_path = dir.join("features.f32le.tmp");
    {
        let mut w = BufWriter::new(fs::File::create(&tmp_path).map_err(Failure::data)?);
        let mut buf = Vec::with_capacity(arena.instance_len() * 4);
        for i in 0..arena.len() {
            buf.clear();
            for v in arena.instance(i) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf).map_err(Failure::data)?;
        }
        w.flush().map_err(Failure::data)?;
    }
    fs::rename(&tmp_path, &data_path).map_err(Failure::data)?;

    let manifest = FeatureManifest {
        format_version: 1,
        dataset_name: &set.dataset_name,
        scheme: &settings.scheme,
        stft: &settings.stft,
        bandpass: settings.bandpass,
        scaling: settings.scaling,
        n_instances: arena.len(),
        bins: arena.bins,
        frames: arena.frames,
        channels: 3,
        data_file: FEATURES_DATA,
        labels: &arena.labels,
    };
    let mut json = serde_json::to_vec_pretty(&manifest).map_err(Failure::data)?;
    json.push(b'\n');
    write_atomic(&dir.join(FEATURES_MANIFEST), &json).map_err(Failure::data)?;
    Ok(())
}

pub fn run(
    args: &RunArgs,
    file: &FileConfig,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let seed = require_seed(seed)?;
    let out = require_out(out)?;
    let set = load_set(&args.set)?;
    let features = resolve_features(&args.features, file, &set)?;

    let setup = ExperimentSetup {
        scheme: features.scheme,
        stft: features.stft,
        bandpass: features.bandpass,
        scaling: features.scaling,
        model: resolve_model(args, file)?,
        train: resolve_train(args, file),
        folds: FoldSpec {
            k: args.k.or(file.k).unwrap_or(5),
            repeats: args.repeats.or(file.repeats).unwrap_or(5),
        },
        seed,
    };

    let report = run_experiment(&set, &setup).map_err(from_eval)?;
    write_report(&report, &out).map_err(from_eval)?;
    let s = &report.summary;
    println!(
        "{}: {} trials, macro-F1 {:.2}% (SD {:.2}), accuracy {:.4} (SD {:.4})",
        report.dataset_name, s.n_trials, s.f1_macro_mean, s.f1_macro_sd, s.accuracy_mean,
        s.accuracy_sd
    );
    println!("report written to {}", out.display());
    Ok(())
}

fn resolve_model(args: &RunArgs, file: &FileConfig) -> Result<ModelConfig, Failure> {
    let conv = args
        .conv_filters
        .as_deref()
        .map(parse_pair)
        .transpose()?
        .or_else(|| file.conv_filters.map(|[a, b]| (a, b)));
    let lstm = args
        .lstm_units
        .as_deref()
        .map(parse_pair)
        .transpose()?
        .or_else(|| file.lstm_units.map(|[a, b]| (a, b)));

    let name = args
        .model
        .clone()
        .or_else(|| file.model.clone())
        .unwrap_or_else(|| "reduced".into());
    let variant = match name.as_str() {
        "full" => {
            if conv.is_some() || lstm.is_some() {
                return Err(Failure::Config(
                    "--conv-filters and --lstm-units only apply to --model reduced".into(),
                ));
            }
            ModelVariant::Full
        }
        "reduced" => ModelVariant::Reduced {
            conv_filters: conv.unwrap_or((8, 16)),
            lstm_units: lstm.unwrap_or((32, 16)),
        },
        other => {
            return Err(Failure::Config(format!(
                "unknown model {other:?} (expected full or reduced)"
            )))
        }
    };
    Ok(ModelConfig {
        variant,
        dropout: args.dropout.or(file.dropout).unwrap_or(0.2),
        pool_between_convs: args.pool_between_convs || file.pool_between_convs == Some(true),
    })
}

fn resolve_train(args: &RunArgs, file: &FileConfig) -> TrainConfig {
    let d = TrainConfig::default();
    let max_epochs = args.max_epochs.or(file.max_epochs).unwrap_or(d.max_epochs);
    TrainConfig {
        adam: AdamConfig {
            lr: args
                .learning_rate
                .or(file.learning_rate)
                .unwrap_or(d.adam.lr),
            ..d.adam
        },
        batch_size: args.batch_size.or(file.batch_size).unwrap_or(d.batch_size),
        max_epochs,
        // Default patience clamps to max_epochs so short runs just work;
        // an explicit value still validates strictly.
        patience: args
            .patience
            .or(file.patience)
            .unwrap_or_else(|| d.patience.min(max_epochs)),
        val_fraction: args
            .val_fraction
            .or(file.val_fraction)
            .unwrap_or(d.val_fraction),
        // run_experiment derives the real per-trial seed from the master
        // seed, so the echoed value here stays constant.
        seed: 0,
    }
}

pub fn compare_runs(args: &CompareArgs, out: Option<PathBuf>) -> Result<(), Failure> {
    let out = require_out(out)?;
    let a = read_report(&args.report_a)
        .map_err(|e| from_eval(e).context(format_args!("report {}", args.report_a.display())))?;
    let b = read_report(&args.report_b)
        .map_err(|e| from_eval(e).context(format_args!("report {}", args.report_b.display())))?;
    let comparison = compare(&a, &b).map_err(from_eval)?;
    let csv = compare_csv(&a, &b).map_err(from_eval)?;

    fs::create_dir_all(&out).map_err(Failure::data)?;
    write_atomic(&out.join("compare.csv"), &csv).map_err(Failure::data)?;
    let mut json = serde_json::to_vec_pretty(&comparison).map_err(Failure::data)?;
    json.push(b'\n');
    write_atomic(&out.join("compare.json"), &json).map_err(Failure::data)?;

    print!("{}", comparison.table());
    println!("comparison written to {}", out.display());
    Ok(())
}

pub fn gradcheck(args: &GradcheckArgs) -> Result<(), Failure> {
    let fault = args
        .inject_fault
        .as_deref()
        .map(FaultTarget::from_str)
        .transpose()
        .map_err(Failure::Config)?;
    let report = run_gradcheck(fault);
    println!("{report}");
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Numeric("gradient check failed".into()))
    }
}
