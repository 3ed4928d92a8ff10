//! Central-difference verification of backpropagation, layer by layer.
//!
//! A fixed battery runs every layer type both inside one small network
//! and in an isolated stack, comparing analytic gradients (weights and
//! stack input) against (f(x+h) - f(x-h)) / 2h at h = 1e-5 in f64.
//! Dropout masks stay fixed across difference evaluations by cloning the
//! RNG before every forward pass.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    build_layer, layers_backward, layers_forward, loss_ce, make_onehot, output_shape, Layer,
    LayerSpec, Tensor,
};

pub const FD_STEP: f64 = 1e-5;
pub const REL_THRESHOLD: f64 = 1e-4;

/// Deliberate gradient corruption, used to prove the checker can catch a
/// wrong backward pass. Scales the named layer kind's analytic weight
/// gradients by 1.01.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultTarget {
    Conv2d,
    Lstm,
    Dense,
}

impl FaultTarget {
    pub fn kind_name(self) -> &'static str {
        match self {
            FaultTarget::Conv2d => "Conv2D",
            FaultTarget::Lstm => "LSTM",
            FaultTarget::Dense => "Dense",
        }
    }
}

impl FromStr for FaultTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "conv2d" => Ok(FaultTarget::Conv2d),
            "lstm" => Ok(FaultTarget::Lstm),
            "dense" => Ok(FaultTarget::Dense),
            other => Err(format!(
                "unknown fault target {other:?} (expected conv2d, lstm, or dense)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    pub layer_kind: String,
    pub max_rel_err: f64,
    pub checks: usize,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub threshold: f64,
    pub entries: Vec<GradCheckEntry>,
    pub pass: bool,
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(
                f,
                "{:<13} max rel err {:.3e}  ({:>5} checks)  {}",
                e.layer_kind,
                e.max_rel_err,
                e.checks,
                if e.pass { "ok" } else { "FAIL" }
            )?;
        }
        write!(
            f,
            "gradient check {} (threshold {:.0e})",
            if self.pass { "passed" } else { "FAILED" },
            self.threshold
        )
    }
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

type Tally = BTreeMap<&'static str, (f64, usize)>;

fn record(tally: &mut Tally, kind: &'static str, err: f64) {
    let e = tally.entry(kind).or_insert((0.0, 0));
    e.0 = e.0.max(err);
    e.1 += 1;
}

/// Builds an f64 layer stack for a per-instance input shape.
fn stack(input: &[usize], specs: &[LayerSpec], seed: u64) -> Vec<Layer<f64>> {
    let mut shape = input.to_vec();
    let mut layers = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let out = output_shape(spec, i, &shape).expect("battery stack is well formed");
        layers.push(build_layer(spec, i, &shape, seed).expect("battery stack is well formed"));
        shape = out;
    }
    layers
}

/// Random input bounded away from zero so ReLU kinks sit outside the
/// difference step.
fn battery_input(shape: Vec<usize>, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = shape.iter().product();
    let values = (0..len)
        .map(|_| {
            let mag = 0.1 + 0.9 * rng.gen::<f64>();
            if rng.gen::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect();
    Tensor::from_parts(shape, values)
}

fn set_param(layers: &mut [Layer<f64>], li: usize, pi: usize, j: usize, v: f64) {
    layers[li].params_mut()[pi].values_mut()[j] = v;
}

/// Checks one stack. Weight-gradient comparisons are attributed to the
/// owning layer's kind; input-gradient comparisons to `input_kind`.
fn run_check(
    input_kind: &'static str,
    mut layers: Vec<Layer<f64>>,
    input: Tensor<f64>,
    classes: usize,
    fault: Option<FaultTarget>,
    seed: u64,
    tally: &mut Tally,
) {
    let batch = input.shape()[0];
    let labels: Vec<u8> = (0..batch).map(|r| (r % classes) as u8).collect();
    let onehot = make_onehot::<f64>(&labels, classes);
    let base = ChaCha8Rng::seed_from_u64(seed);

    let loss_of = |layers: &[Layer<f64>], x: &Tensor<f64>| -> f64 {
        let mut rng = base.clone();
        let (probs, _) = layers_forward(layers, x.clone(), true, &mut rng).expect("forward");
        loss_ce(&probs, &onehot).expect("loss")
    };

    let mut rng = base.clone();
    let (probs, caches) = layers_forward(&layers, input.clone(), true, &mut rng).expect("forward");
    let (mut grads, dinput) = layers_backward(&layers, &caches, &probs, &onehot);

    if let Some(f) = fault {
        for (i, l) in layers.iter().enumerate() {
            if l.kind_name() == f.kind_name() {
                for g in &mut grads.layers[i] {
                    for v in g.values_mut() {
                        *v *= 1.01;
                    }
                }
            }
        }
    }

    for li in 0..layers.len() {
        let kind = layers[li].kind_name();
        for pi in 0..layers[li].params().len() {
            for j in 0..layers[li].params()[pi].len() {
                let orig = layers[li].params()[pi].values()[j];
                set_param(&mut layers, li, pi, j, orig + FD_STEP);
                let lp = loss_of(&layers, &input);
                set_param(&mut layers, li, pi, j, orig - FD_STEP);
                let lm = loss_of(&layers, &input);
                set_param(&mut layers, li, pi, j, orig);
                let numeric = (lp - lm) / (2.0 * FD_STEP);
                record(tally, kind, rel_err(grads.layers[li][pi].values()[j], numeric));
            }
        }
    }

    let mut x = input;
    for j in 0..x.len() {
        let orig = x.values()[j];
        x.values_mut()[j] = orig + FD_STEP;
        let lp = loss_of(&layers, &x);
        x.values_mut()[j] = orig - FD_STEP;
        let lm = loss_of(&layers, &x);
        x.values_mut()[j] = orig;
        let numeric = (lp - lm) / (2.0 * FD_STEP);
        record(tally, input_kind, rel_err(dinput.values()[j], numeric));
    }
}

/// Runs the full battery. With `fault` set, the corresponding analytic
/// gradients are corrupted before comparison, so the report must fail at
/// that layer kind.
pub fn run_gradcheck(fault: Option<FaultTarget>) -> GradCheckReport {
    let mut tally = Tally::new();
    let drop = |rate: f64| LayerSpec::Dropout { rate };
    let lstm = |units: usize, seq: bool| LayerSpec::Lstm {
        units,
        return_sequences: seq,
    };
    let dense = |units: usize| LayerSpec::Dense { units };

    // Every layer type in one network.
    let whole = [
        LayerSpec::conv(2),
        LayerSpec::Relu,
        LayerSpec::maxpool(),
        drop(0.2),
        LayerSpec::Flatten,
        LayerSpec::RepeatVector { n: 4 },
        lstm(5, true),
        drop(0.2),
        lstm(4, false),
        drop(0.2),
        dense(6),
        LayerSpec::Relu,
        drop(0.2),
        dense(3),
        LayerSpec::Softmax,
    ];
    run_check(
        "Conv2D",
        stack(&[8, 6, 3], &whole, 41),
        battery_input(vec![2, 8, 6, 3], 1041),
        3,
        fault,
        2041,
        &mut tally,
    );

    // Isolated stacks, one per layer type.
    let checks: [(&'static str, &[usize], Vec<LayerSpec>); 9] = [
        (
            "Conv2D",
            &[5, 4, 2],
            vec![
                LayerSpec::conv(2),
                LayerSpec::Flatten,
                dense(3),
                LayerSpec::Softmax,
            ],
        ),
        ("ReLU", &[6], vec![LayerSpec::Relu, dense(3), LayerSpec::Softmax]),
        (
            "MaxPool2D",
            &[6, 6, 2],
            vec![
                LayerSpec::maxpool(),
                LayerSpec::Flatten,
                dense(3),
                LayerSpec::Softmax,
            ],
        ),
        ("Dropout", &[10], vec![drop(0.3), dense(3), LayerSpec::Softmax]),
        (
            "Flatten",
            &[3, 4, 2],
            vec![LayerSpec::Flatten, dense(3), LayerSpec::Softmax],
        ),
        (
            "RepeatVector",
            &[5],
            vec![
                LayerSpec::RepeatVector { n: 4 },
                LayerSpec::Flatten,
                dense(3),
                LayerSpec::Softmax,
            ],
        ),
        (
            "LSTM",
            &[3, 4],
            vec![
                lstm(4, true),
                LayerSpec::Flatten,
                dense(3),
                LayerSpec::Softmax,
            ],
        ),
        ("Dense", &[7], vec![dense(5), dense(3), LayerSpec::Softmax]),
        ("Softmax", &[4], vec![dense(3), LayerSpec::Softmax]),
    ];
    for (i, (kind, in_shape, specs)) in checks.into_iter().enumerate() {
        let mut batch_shape = vec![2];
        batch_shape.extend_from_slice(in_shape);
        let salt = 100 + i as u64;
        run_check(
            kind,
            stack(in_shape, &specs, salt),
            battery_input(batch_shape, 1000 + salt),
            3,
            fault,
            2000 + salt,
            &mut tally,
        );
    }
    // The non-sequence LSTM path, reached in the whole-net check, gets an
    // isolated run too.
    run_check(
        "LSTM",
        stack(
            &[3, 4],
            &[lstm(3, false), dense(3), LayerSpec::Softmax],
            77,
        ),
        battery_input(vec![2, 3, 4], 1077),
        3,
        fault,
        2077,
        &mut tally,
    );

    let order = [
        "Conv2D",
        "ReLU",
        "MaxPool2D",
        "Dropout",
        "Flatten",
        "RepeatVector",
        "LSTM",
        "Dense",
        "Softmax",
    ];
    let entries: Vec<GradCheckEntry> = order
        .iter()
        .map(|kind| {
            let (max_rel_err, checks) = tally.get(kind).copied().unwrap_or((f64::INFINITY, 0));
            GradCheckEntry {
                layer_kind: (*kind).to_string(),
                max_rel_err,
                checks,
                pass: checks > 0 && max_rel_err < REL_THRESHOLD,
            }
        })
        .collect();
    let pass = entries.iter().all(|e| e.pass);
    GradCheckReport {
        threshold: REL_THRESHOLD,
        entries,
        pass,
    }
}
