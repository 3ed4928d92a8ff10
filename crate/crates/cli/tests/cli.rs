//! End-to-end checks of the `affect` binary: exit codes, determinism,
//! and the wiring between flags, config files, and outputs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn affect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affect"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

/// 30 epochs of 2 x 300 @ 100 Hz, three classes.
fn synth_small(dir: &Path, seed: &str) -> Output {
    affect(&[
        "synth",
        "--geometry",
        "custom",
        "--channels",
        "2",
        "--samples",
        "300",
        "--fs",
        "100",
        "--classes",
        "3",
        "--per-class",
        "10",
        "--seed",
        seed,
        "--out",
        dir.to_str().unwrap(),
    ])
}

/// A quick 3x2-fold run on the small set; extra flags appended.
fn run_small(set: &Path, out: &Path, extra: &[&str]) -> Output {
    run_small_repeats(set, out, "2", extra)
}

fn run_small_repeats(set: &Path, out: &Path, repeats: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        set.to_str().unwrap(),
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
        "--k",
        "3",
        "--repeats",
        repeats,
        "--max-epochs",
        "2",
        "--batch-size",
        "32",
        "--val-fraction",
        "0.2",
        "--patience",
        "2",
        "--no-bandpass",
        "--conv-filters",
        "2,2",
        "--lstm-units",
        "4,4",
    ];
    args.extend_from_slice(extra);
    affect(&args)
}

#[test]
fn synth_is_deterministic_and_reports_geometry() {
    let tmp = tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out = synth_small(&a, "11");
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("wrote 30 epochs"), "{text}");
    assert!(text.contains("2 channels × 300 samples @ 100 Hz"), "{text}");
    assert!(text.contains("valence3"), "{text}");

    assert_eq!(exit_code(&synth_small(&b, "11")), 0);
    for name in ["manifest.json", "data.f32le"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name} differs between identical synth invocations"
        );
    }

    let c = tmp.path().join("c");
    assert_eq!(exit_code(&synth_small(&c, "12")), 0);
    assert_ne!(
        fs::read(a.join("data.f32le")).unwrap(),
        fs::read(c.join("data.f32le")).unwrap(),
        "different seeds should give different corpora"
    );
}

#[test]
fn synth_argument_errors_exit_2() {
    let tmp = tempdir().unwrap();
    let out_dir = tmp.path().join("s");
    let out_str = out_dir.to_str().unwrap();

    let no_seed = affect(&["synth", "--geometry", "dens", "--out", out_str]);
    assert_eq!(exit_code(&no_seed), 2);
    assert!(stderr(&no_seed).contains("--seed"), "{}", stderr(&no_seed));

    let no_geom = affect(&["synth", "--seed", "1", "--out", out_str]);
    assert_eq!(exit_code(&no_geom), 2);

    let bad_geom = affect(&["synth", "--geometry", "emg", "--seed", "1", "--out", out_str]);
    assert_eq!(exit_code(&bad_geom), 2);
    assert!(stderr(&bad_geom).contains("emg"), "{}", stderr(&bad_geom));

    let stray_dims = affect(&[
        "synth",
        "--geometry",
        "dens",
        "--channels",
        "4",
        "--seed",
        "1",
        "--out",
        out_str,
    ]);
    assert_eq!(exit_code(&stray_dims), 2);

    let unknown_flag = affect(&["synth", "--geometry", "dens", "--seed", "1", "--frobnicate"]);
    assert_eq!(exit_code(&unknown_flag), 2);
}

#[test]
fn featurize_writes_dump_and_shape_line() {
    let tmp = tempdir().unwrap();
    let set = tmp.path().join("set");
    assert_eq!(exit_code(&synth_small(&set, "11")), 0);

    let feat = tmp.path().join("feat");
    let out = affect(&[
        "featurize",
        set.to_str().unwrap(),
        "--out",
        feat.to_str().unwrap(),
        "--no-bandpass",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(
        stdout(&out).contains("60 instances of 26×11×3"),
        "{}",
        stdout(&out)
    );

    // 60 instances x 26 bins x 11 frames x 3 channels x 4 bytes.
    let data = fs::read(feat.join("features.f32le")).unwrap();
    assert_eq!(data.len(), 60 * 26 * 11 * 3 * 4);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(feat.join("features.json")).unwrap()).unwrap();
    assert_eq!(manifest["n_instances"], 60);
    assert_eq!(manifest["bins"], 26);
    assert_eq!(manifest["frames"], 11);
    assert_eq!(manifest["labels"].as_array().unwrap().len(), 60);
    assert!(manifest["bandpass"].is_null());
    assert_eq!(manifest["stft"]["frame_size_n"], 50);
    assert!(!fs::exists(feat.join("features.f32le.tmp")).unwrap());
}

#[test]
fn featurize_truncates_long_62_channel_sets() {
    let tmp = tempdir().unwrap();
    let set = tmp.path().join("set");
    let synth = affect(&[
        "synth",
        "--geometry",
        "custom",
        "--channels",
        "62",
        "--samples",
        "17000",
        "--fs",
        "200",
        "--classes",
        "3",
        "--per-class",
        "1",
        "--seed",
        "5",
        "--out",
        set.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&synth), 0, "stderr: {}", stderr(&synth));

    let feat = tmp.path().join("feat");
    let out = affect(&[
        "featurize",
        set.to_str().unwrap(),
        "--out",
        feat.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(
        stdout(&out).contains("186 instances of 51×319×3"),
        "{}",
        stdout(&out)
    );
    assert!(
        stderr(&out).contains("truncating 17000-sample epochs to the first 16000"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn run_writes_report_and_reruns_byte_identically() {
    let tmp = tempdir().unwrap();
    let set = tmp.path().join("set");
    assert_eq!(exit_code(&synth_small(&set, "11")), 0);

    let (r1, r2) = (tmp.path().join("r1"), tmp.path().join("r2"));
    let out = run_small(&set, &r1, &[]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("6 trials"), "{}", stdout(&out));

    let scores = fs::read_to_string(r1.join("scores.csv")).unwrap();
    assert_eq!(scores.lines().count(), 7, "header plus six trials");
    assert!(scores.starts_with("trial,repeat,fold,"));

    assert_eq!(exit_code(&run_small(&set, &r2, &[])), 0);
    for name in ["report.json", "scores.csv"] {
        assert_eq!(
            fs::read(r1.join(name)).unwrap(),
            fs::read(r2.join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
}

#[test]
fn run_error_exit_codes() {
    let tmp = tempdir().unwrap();
    let set = tmp.path().join("set");
    assert_eq!(exit_code(&synth_small(&set, "11")), 0);
    let out_dir = tmp.path().join("r");

    let missing = run_small(Path::new("/no/such/set"), &out_dir, &[]);
    assert_eq!(exit_code(&missing), 3);
    assert!(stderr(&missing).contains("/no/such/set"), "{}", stderr(&missing));

    let no_seed = affect(&[
        "run",
        set.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&no_seed), 2);

    let full_with_sizes = run_small(&set, &out_dir, &["--model", "full"]);
    assert_eq!(exit_code(&full_with_sizes), 2, "{}", stderr(&full_with_sizes));

    let bad_window = run_small(&set, &out_dir, &["--window", "boxcar"]);
    assert_eq!(exit_code(&bad_window), 2);

    let band_conflict = run_small(&set, &out_dir, &["--bandpass", "1:40"]);
    assert_eq!(exit_code(&band_conflict), 2, "--bandpass with --no-bandpass");

    let zero_threads = run_small(&set, &out_dir, &["--threads", "0"]);
    assert_eq!(exit_code(&zero_threads), 2);
}

#[test]
fn run_with_short_max_epochs_uses_clamped_default_patience() {
    let tmp = tempdir().unwrap();
    let set = tmp.path().join("set");
    assert_eq!(exit_code(&synth_small(&set, "11")), 0);

    // No explicit --patience: the default (30) must not outlive a
    // 1-epoch budget and kill the run.
    let out = affect(&[
        "run",
        set.to_str().unwrap(),
        "--seed",
        "3",
        "--out",
        tmp.path().join("r").to_str().unwrap(),
        "--k",
        "3",
        "--repeats",
        "1",
        "--max-epochs",
        "1",
        "--batch-size",
        "32",
        "--val-fraction",
        "0.2",
        "--no-bandpass",
        "--conv-filters",
        "2,2",
        "--lstm-units",
        "4,4",
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
}

#[test]
fn compare_run_with_itself_is_null() {
    let tmp = tempdir().unwrap();
    let set = tmp.path().join("set");
    assert_eq!(exit_code(&synth_small(&set, "11")), 0);
    let r1 = tmp.path().join("r1");
    assert_eq!(exit_code(&run_small(&set, &r1, &[])), 0);

    let cmp = tmp.path().join("cmp");
    let out = affect(&[
        "compare",
        r1.to_str().unwrap(),
        r1.to_str().unwrap(),
        "--out",
        cmp.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("Welch t = 0.00"), "{text}");
    assert!(text.contains("p = 1.0000"), "{text}");
    assert!(text.contains("Cohen's d = 0.00"), "{text}");

    let csv = fs::read_to_string(cmp.join("compare.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(cmp.join("compare.json")).unwrap()).unwrap();
    assert_eq!(json["metric"], "f1_macro");
    assert_eq!(json["test"]["t"], 0.0);
}

#[test]
fn compare_rejects_mismatched_runs() {
    let tmp = tempdir().unwrap();
    let set = tmp.path().join("set");
    assert_eq!(exit_code(&synth_small(&set, "11")), 0);
    let (r1, r2) = (tmp.path().join("r1"), tmp.path().join("r2"));
    assert_eq!(exit_code(&run_small(&set, &r1, &[])), 0);
    assert_eq!(exit_code(&run_small_repeats(&set, &r2, "1", &[])), 0);

    let cmp = tmp.path().join("cmp");
    let out = affect(&[
        "compare",
        r1.to_str().unwrap(),
        r2.to_str().unwrap(),
        "--out",
        cmp.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 3);
    assert!(stderr(&out).contains("trial structure"), "{}", stderr(&out));

    let missing = affect(&[
        "compare",
        r1.to_str().unwrap(),
        "/no/such/report",
        "--out",
        cmp.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&missing), 3);
}

#[test]
fn gradcheck_passes_and_lists_every_layer_once() {
    let out = affect(&["gradcheck"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    for kind in [
        "Conv2D",
        "ReLU",
        "MaxPool2D",
        "Dropout",
        "Flatten",
        "RepeatVector",
        "LSTM",
        "Dense",
        "Softmax",
    ] {
        assert_eq!(
            text.matches(kind).count(),
            1,
            "{kind} should appear exactly once:\n{text}"
        );
    }
    assert!(text.contains("gradient check passed"), "{text}");
}

#[test]
fn gradcheck_fault_injection_exits_4() {
    let out = affect(&["gradcheck", "--inject-fault", "conv2d"]);
    assert_eq!(exit_code(&out), 4);
    assert!(stdout(&out).contains("gradient check FAILED"), "{}", stdout(&out));

    let bad = affect(&["gradcheck", "--inject-fault", "tanh"]);
    assert_eq!(exit_code(&bad), 2);
    assert!(stderr(&bad).contains("tanh"), "{}", stderr(&bad));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let tmp = tempdir().unwrap();
    let set = tmp.path().join("set");
    assert_eq!(exit_code(&synth_small(&set, "11")), 0);

    let cfg = tmp.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{
          "seed": 9,
          "k": 3,
          "repeats": 2,
          "max_epochs": 1,
          "batch_size": 32,
          "patience": 1,
          "val_fraction": 0.2,
          "no_bandpass": true,
          "conv_filters": [2, 2],
          "lstm_units": [4, 4]
        }"#,
    )
    .unwrap();

    let r = tmp.path().join("r");
    let out = affect(&[
        "run",
        set.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        r.to_str().unwrap(),
        "--repeats",
        "1",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(r.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["setup"]["seed"], 9, "seed from the config file");
    assert_eq!(report["setup"]["folds"]["k"], 3);
    assert_eq!(report["setup"]["folds"]["repeats"], 1, "flag beats file");
    assert_eq!(report["trials"].as_array().unwrap().len(), 3);

    let bad_cfg = tmp.path().join("bad.json");
    fs::write(&bad_cfg, r#"{"frobnicate": true}"#).unwrap();
    let rejected = affect(&[
        "run",
        set.to_str().unwrap(),
        "--config",
        bad_cfg.to_str().unwrap(),
        "--out",
        r.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&rejected), 2);
    assert!(stderr(&rejected).contains("frobnicate"), "{}", stderr(&rejected));
}
