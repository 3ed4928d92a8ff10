//! Mini-batch training: Adam updates, early stopping on validation loss,
//! checkpointing on validation accuracy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{loss_ce, make_onehot, Gradients, Network, NnError, Tensor};
use crate::corpus::InstanceArena;
use crate::derive_seed;
use crate::num::{fl, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-loss improvement before stopping.
    pub patience: usize,
    /// Fraction of the training data carved out for validation.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 256,
            max_epochs: 100,
            patience: 30,
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.val_fraction > 0.0 && self.val_fraction < 0.5) {
            return Err(NnError::BadConfig(format!(
                "val_fraction must be in (0, 0.5), got {}",
                self.val_fraction
            )));
        }
        if self.patience == 0 || self.patience > self.max_epochs {
            return Err(NnError::BadConfig(format!(
                "patience must be in [1, max_epochs = {}], got {}",
                self.max_epochs, self.patience
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(NnError::BadConfig(
                "batch_size and max_epochs must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Adam moment accumulators, one pair per weight tensor.
#[derive(Debug, Clone)]
pub struct AdamState<F> {
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
    step: u64,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(net: &Network<F>) -> Self {
        let shapes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
        Self {
            m: shapes.iter().map(|&n| vec![F::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![F::zero(); n]).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update: p -= lr_t * m_hat / (sqrt(v_hat) + eps), with the bias
    /// corrections folded into the step size.
    pub fn apply(&mut self, net: &mut Network<F>, grads: &Gradients<F>, cfg: &AdamConfig) {
        self.step += 1;
        let t = self.step as i32;
        let lr_t = fl::<F>(cfg.lr * (1.0 - cfg.beta2.powi(t)).sqrt() / (1.0 - cfg.beta1.powi(t)));
        let b1 = fl::<F>(cfg.beta1);
        let b2 = fl::<F>(cfg.beta2);
        let one_b1 = F::one() - b1;
        let one_b2 = F::one() - b2;
        let eps = fl::<F>(cfg.epsilon);

        let params = net.params_mut();
        let flat = grads.flat();
        assert_eq!(params.len(), flat.len(), "gradient/parameter mismatch");
        for ((p, g), (m, v)) in params
            .into_iter()
            .zip(flat)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for ((pv, &gv), (mv, vv)) in p
                .values_mut()
                .iter_mut()
                .zip(g.values())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mv = b1 * *mv + one_b1 * gv;
                *vv = b2 * *vv + one_b2 * gv * gv;
                *pv -= lr_t * *mv / (vv.sqrt() + eps);
            }
        }
    }
}

/// Stop when the monitored loss has not improved for `patience`
/// consecutive observations.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    best: f64,
    since_improve: usize,
    patience: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        Self {
            best: f64::INFINITY,
            since_improve: 0,
            patience,
        }
    }

    /// Feeds one epoch's validation loss; returns true when it is time to
    /// stop.
    pub fn observe(&mut self, val_loss: f64) -> bool {
        if val_loss < self.best {
            self.best = val_loss;
            self.since_improve = 0;
            false
        } else {
            self.since_improve += 1;
            self.since_improve >= self.patience
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    /// Hash of all weights after this epoch's updates.
    pub weights_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
    /// 1-based epoch whose weights were returned (best val accuracy).
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Copies the selected instances into a batch tensor plus their labels.
pub(crate) fn build_batch<F: Scalar>(data: &InstanceArena, idx: &[usize]) -> (Tensor<F>, Vec<u8>) {
    let inst = data.instance_len();
    let mut values = Vec::with_capacity(idx.len() * inst);
    let mut labels = Vec::with_capacity(idx.len());
    for &i in idx {
        values.extend(data.instance(i).iter().map(|&v| fl::<F>(v as f64)));
        labels.push(data.labels[i]);
    }
    (
        Tensor::from_parts(vec![idx.len(), data.bins, data.frames, 3], values),
        labels,
    )
}

fn accuracy<F: Scalar>(probs: &Tensor<F>, labels: &[u8]) -> usize {
    let classes = probs.shape()[1];
    probs
        .values()
        .chunks_exact(classes)
        .zip(labels)
        .filter(|(row, &l)| {
            let mut best = 0usize;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best == l as usize
        })
        .count()
}

/// Loss and accuracy over a full index list, inference mode.
fn evaluate<F: Scalar>(
    net: &Network<F>,
    data: &InstanceArena,
    idx: &[usize],
    batch_size: usize,
) -> Result<(f64, f64), NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for chunk in idx.chunks(batch_size) {
        let (batch, labels) = build_batch::<F>(data, chunk);
        let onehot = make_onehot::<F>(&labels, net.class_count() as usize);
        let (probs, _) = net.forward(batch, false, &mut rng)?;
        loss_sum += loss_ce(&probs, &onehot)? * chunk.len() as f64;
        correct += accuracy(&probs, &labels);
    }
    Ok((
        loss_sum / idx.len() as f64,
        correct as f64 / idx.len() as f64,
    ))
}

/// Stratified validation carve-out: per class, a seeded shuffle then the
/// first floor(fraction * n) instances (always leaving at least one for
/// training). Errors if any class is absent.
fn split_train_val(
    data: &InstanceArena,
    indices: &[usize],
    classes: usize,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), NnError> {
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for &i in indices {
        let label = data.labels[i] as usize;
        if label >= classes {
            return Err(NnError::BadConfig(format!(
                "label {label} outside the {classes}-class range"
            )));
        }
        per_class[label].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (c, mut members) in per_class.into_iter().enumerate() {
        if members.is_empty() {
            return Err(NnError::ClassMissing(c as u8));
        }
        members.shuffle(&mut rng);
        let take = ((fraction * members.len() as f64).floor() as usize).min(members.len() - 1);
        val.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    if val.is_empty() {
        return Err(NnError::BadConfig(
            "validation split is empty; provide more instances per class".into(),
        ));
    }
    Ok((train, val))
}

/// Trains on `indices` into `data`, returning the checkpointed network
/// (best validation accuracy) and the per-epoch history.
pub fn train<F: Scalar>(
    net: Network<F>,
    data: &InstanceArena,
    indices: &[usize],
    cfg: &TrainConfig,
) -> Result<(Network<F>, History), NnError> {
    cfg.validate()?;
    let classes = net.class_count() as usize;
    let (mut train_idx, val_idx) =
        split_train_val(data, indices, classes, cfg.val_fraction, cfg.seed)?;

    let mut net = net;
    let mut adam = AdamState::new(&net);
    let mut stopper = EarlyStopper::new(cfg.patience);
    let mut history = History {
        epochs: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    let mut best: Option<(f64, Network<F>)> = None;

    for epoch in 1..=cfg.max_epochs {
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[1, epoch as u64]));
        train_idx.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (bi, chunk) in train_idx.chunks(cfg.batch_size).enumerate() {
            let (batch, labels) = build_batch::<F>(data, chunk);
            let onehot = make_onehot::<F>(&labels, classes);
            let mut drop_rng =
                ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[2, epoch as u64, bi as u64]));
            let (probs, cache) = net.forward(batch, true, &mut drop_rng)?;
            loss_sum += loss_ce(&probs, &onehot)? * chunk.len() as f64;
            correct += accuracy(&probs, &labels);
            let grads = net.backward(&cache, &onehot);
            adam.apply(&mut net, &grads, &cfg.adam);
        }

        let (val_loss, val_accuracy) = evaluate(&net, data, &val_idx, cfg.batch_size)?;
        history.epochs.push(EpochStats {
            epoch,
            train_loss: loss_sum / train_idx.len() as f64,
            train_accuracy: correct as f64 / train_idx.len() as f64,
            val_loss,
            val_accuracy,
            weights_sha256: net.weights_sha256(),
        });

        if best.as_ref().is_none_or(|(acc, _)| val_accuracy > *acc) {
            best = Some((val_accuracy, net.clone()));
            history.best_epoch = epoch;
        }
        if stopper.observe(val_loss) {
            history.stopped_early = true;
            break;
        }
    }

    let (_, best_net) = best.expect("at least one epoch ran");
    Ok((best_net, history))
}
