//! From-scratch CNN-LSTM classifier: tensors, layers, training, gradient
//! checking, and a binary weight format.
//!
//! The default stack is two 3x3 convolutions, a 2x2 max-pool, a repeat
//! vector feeding two LSTM layers, and two dense layers ending in softmax,
//! with inverted dropout throughout. All arithmetic is generic over the
//! scalar type: training runs in f32, gradient checks in f64.

pub mod gradcheck;
pub mod layers;
pub mod train;
pub mod weights_io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::derive_seed;
use crate::num::{fl, Scalar};
pub use gradcheck::{run_gradcheck, FaultTarget, GradCheckEntry, GradCheckReport, REL_THRESHOLD};
pub use layers::LayerCache;
pub use train::{train, AdamConfig, AdamState, EarlyStopper, EpochStats, History, TrainConfig};
pub use weights_io::{load_weights, load_weights_into, save_weights};

/// Numerical floor inside the cross-entropy log.
pub const CE_EPSILON: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("layer {layer} ({kind}): expected input shape {expected}, got {actual}")]
    ShapeMismatch {
        layer: usize,
        kind: &'static str,
        expected: String,
        actual: String,
    },
    #[error("layer {layer} ({kind}) produced a non-finite activation")]
    NonFinite { layer: usize, kind: &'static str },
    #[error("tensor shape {shape:?} does not hold {len} values")]
    TensorShape { shape: Vec<usize>, len: usize },
    #[error("bad architecture: {0}")]
    BadArchitecture(String),
    #[error("class {0} has no instances in the training data")]
    ClassMissing(u8),
    #[error("bad training config: {0}")]
    BadConfig(String),
    #[error("weight file does not match this architecture")]
    FingerprintMismatch,
    #[error("weight file format: {0}")]
    WeightFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("architecture serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    values: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn new(shape: Vec<usize>, values: Vec<F>) -> Result<Self, NnError> {
        if shape.is_empty() || shape.iter().product::<usize>() != values.len() {
            return Err(NnError::TensorShape {
                shape,
                len: values.len(),
            });
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            values: vec![F::zero(); len],
        }
    }

    pub(crate) fn from_parts(shape: Vec<usize>, values: Vec<F>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Self { shape, values }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [F] {
        &mut self.values
    }

    /// Same storage under a new shape of equal element count.
    pub(crate) fn reshaped(self, shape: Vec<usize>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), self.values.len());
        Self {
            shape,
            values: self.values,
        }
    }

    /// Lossy cast between scalar widths (f32 <-> f64).
    pub fn cast<G: Scalar>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|v| fl(v.to_f64_lossy())).collect(),
        }
    }
}

/// Architecture description of one layer, without weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        filters: usize,
        kernel_h: usize,
        kernel_w: usize,
    },
    Relu,
    MaxPool2d {
        pool_h: usize,
        pool_w: usize,
        stride: usize,
    },
    Dropout {
        rate: f64,
    },
    Flatten,
    RepeatVector {
        n: usize,
    },
    Lstm {
        units: usize,
        return_sequences: bool,
    },
    Dense {
        units: usize,
    },
    Softmax,
}

impl LayerSpec {
    /// 3x3 valid convolution with `filters` output channels.
    pub fn conv(filters: usize) -> Self {
        LayerSpec::Conv2d {
            filters,
            kernel_h: 3,
            kernel_w: 3,
        }
    }

    /// 2x2 max-pool with stride 2.
    pub fn maxpool() -> Self {
        LayerSpec::MaxPool2d {
            pool_h: 2,
            pool_w: 2,
            stride: 2,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "Conv2D",
            LayerSpec::Relu => "ReLU",
            LayerSpec::MaxPool2d { .. } => "MaxPool2D",
            LayerSpec::Dropout { .. } => "Dropout",
            LayerSpec::Flatten => "Flatten",
            LayerSpec::RepeatVector { .. } => "RepeatVector",
            LayerSpec::Lstm { .. } => "LSTM",
            LayerSpec::Dense { .. } => "Dense",
            LayerSpec::Softmax => "Softmax",
        }
    }
}

/// One layer with its weight tensors.
#[derive(Debug, Clone)]
pub enum Layer<F> {
    Conv2d { weights: Tensor<F>, bias: Tensor<F> },
    Relu,
    MaxPool2d,
    Dropout { rate: f64 },
    Flatten,
    RepeatVector { n: usize },
    Lstm {
        wx: Tensor<F>,
        wh: Tensor<F>,
        bias: Tensor<F>,
        units: usize,
        return_sequences: bool,
    },
    Dense { weights: Tensor<F>, bias: Tensor<F> },
    Softmax,
}

impl<F: Scalar> Layer<F> {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Conv2d { .. } => "Conv2D",
            Layer::Relu => "ReLU",
            Layer::MaxPool2d => "MaxPool2D",
            Layer::Dropout { .. } => "Dropout",
            Layer::Flatten => "Flatten",
            Layer::RepeatVector { .. } => "RepeatVector",
            Layer::Lstm { .. } => "LSTM",
            Layer::Dense { .. } => "Dense",
            Layer::Softmax => "Softmax",
        }
    }

    /// Weight tensors in a fixed order (matched by gradients and Adam).
    pub fn params(&self) -> Vec<&Tensor<F>> {
        match self {
            Layer::Conv2d { weights, bias } | Layer::Dense { weights, bias } => {
                vec![weights, bias]
            }
            Layer::Lstm { wx, wh, bias, .. } => vec![wx, wh, bias],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<F>> {
        match self {
            Layer::Conv2d { weights, bias } | Layer::Dense { weights, bias } => {
                vec![weights, bias]
            }
            Layer::Lstm { wx, wh, bias, .. } => vec![wx, wh, bias],
            _ => vec![],
        }
    }
}

fn glorot<F: Scalar>(shape: Vec<usize>, fan_in: usize, fan_out: usize, seed: u64) -> Tensor<F> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = shape.iter().product();
    let values = (0..len)
        .map(|_| fl(rng.gen_range(-limit..limit)))
        .collect();
    Tensor::from_parts(shape, values)
}

/// Output shape of `spec` for a per-instance input shape, or why not.
fn output_shape(spec: &LayerSpec, index: usize, input: &[usize]) -> Result<Vec<usize>, NnError> {
    let bad = |expected: String| NnError::ShapeMismatch {
        layer: index,
        kind: spec.kind_name(),
        expected,
        actual: format!("{input:?}"),
    };
    match spec {
        LayerSpec::Conv2d {
            filters,
            kernel_h,
            kernel_w,
        } => {
            let &[h, w, _c] = input else {
                return Err(bad("(h, w, c)".into()));
            };
            if h < *kernel_h || w < *kernel_w {
                return Err(bad(format!("(>={kernel_h}, >={kernel_w}, c)")));
            }
            Ok(vec![h - kernel_h + 1, w - kernel_w + 1, *filters])
        }
        LayerSpec::Relu | LayerSpec::Dropout { .. } => Ok(input.to_vec()),
        LayerSpec::MaxPool2d { .. } => {
            let &[h, w, c] = input else {
                return Err(bad("(h, w, c)".into()));
            };
            if h < 2 || w < 2 {
                return Err(bad("(>=2, >=2, c)".into()));
            }
            Ok(vec![(h - 2) / 2 + 1, (w - 2) / 2 + 1, c])
        }
        LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        LayerSpec::RepeatVector { n } => {
            let &[d] = input else {
                return Err(bad("(features,)".into()));
            };
            Ok(vec![*n, d])
        }
        LayerSpec::Lstm {
            units,
            return_sequences,
        } => {
            let &[t, _d] = input else {
                return Err(bad("(steps, features)".into()));
            };
            if *return_sequences {
                Ok(vec![t, *units])
            } else {
                Ok(vec![*units])
            }
        }
        LayerSpec::Dense { units } => {
            let &[_d] = input else {
                return Err(bad("(features,)".into()));
            };
            Ok(vec![*units])
        }
        LayerSpec::Softmax => {
            let &[d] = input else {
                return Err(bad("(classes,)".into()));
            };
            Ok(vec![d])
        }
    }
}

/// Builds a weighted layer for `spec`, Glorot-uniform seeded, with the
/// LSTM forget-gate bias at 1.
fn build_layer<F: Scalar>(
    spec: &LayerSpec,
    index: usize,
    input: &[usize],
    seed: u64,
) -> Result<Layer<F>, NnError> {
    let pseed = |p: u64| derive_seed(seed, &[index as u64, p]);
    Ok(match spec {
        LayerSpec::Conv2d {
            filters,
            kernel_h,
            kernel_w,
        } => {
            let cin = input[2];
            let rf = kernel_h * kernel_w;
            Layer::Conv2d {
                weights: glorot(
                    vec![*filters, *kernel_h, *kernel_w, cin],
                    rf * cin,
                    rf * filters,
                    pseed(0),
                ),
                bias: Tensor::zeros(vec![*filters]),
            }
        }
        LayerSpec::Relu => Layer::Relu,
        LayerSpec::MaxPool2d {
            pool_h,
            pool_w,
            stride,
        } => {
            if (*pool_h, *pool_w, *stride) != (2, 2, 2) {
                return Err(NnError::BadArchitecture(format!(
                    "layer {index}: only 2x2 stride-2 max-pooling is supported"
                )));
            }
            Layer::MaxPool2d
        }
        LayerSpec::Dropout { rate } => {
            if !(0.0..1.0).contains(rate) {
                return Err(NnError::BadArchitecture(format!(
                    "layer {index}: dropout rate {rate} outside [0, 1)"
                )));
            }
            Layer::Dropout { rate: *rate }
        }
        LayerSpec::Flatten => Layer::Flatten,
        LayerSpec::RepeatVector { n } => {
            if *n == 0 {
                return Err(NnError::BadArchitecture(format!(
                    "layer {index}: repeat count must be positive"
                )));
            }
            Layer::RepeatVector { n: *n }
        }
        LayerSpec::Lstm {
            units,
            return_sequences,
        } => {
            let d = input[1];
            let u = *units;
            if u == 0 {
                return Err(NnError::BadArchitecture(format!(
                    "layer {index}: lstm units must be positive"
                )));
            }
            let mut bias = Tensor::zeros(vec![4 * u]);
            for v in &mut bias.values_mut()[u..2 * u] {
                *v = F::one();
            }
            Layer::Lstm {
                wx: glorot(vec![d, 4 * u], d, 4 * u, pseed(0)),
                wh: glorot(vec![u, 4 * u], u, 4 * u, pseed(1)),
                bias,
                units: u,
                return_sequences: *return_sequences,
            }
        }
        LayerSpec::Dense { units } => {
            let d = input[0];
            if *units == 0 {
                return Err(NnError::BadArchitecture(format!(
                    "layer {index}: dense units must be positive"
                )));
            }
            Layer::Dense {
                weights: glorot(vec![d, *units], d, *units, pseed(0)),
                bias: Tensor::zeros(vec![*units]),
            }
        }
        LayerSpec::Softmax => Layer::Softmax,
    })
}

/// Serialized architecture identity; its hash is the weight-file
/// fingerprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchDescriptor {
    pub input_shape: Vec<usize>,
    pub class_count: u8,
    pub layers: Vec<LayerSpec>,
}

/// Model size variant: the full-size stack or a reduced one for quick
/// experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ModelVariant {
    Full,
    Reduced {
        conv_filters: (usize, usize),
        lstm_units: (usize, usize),
    },
}

impl ModelVariant {
    fn sizes(&self) -> ((usize, usize), (usize, usize)) {
        match *self {
            ModelVariant::Full => ((32, 64), (256, 128)),
            ModelVariant::Reduced {
                conv_filters,
                lstm_units,
            } => (conv_filters, lstm_units),
        }
    }
}

/// Classifier stack configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: ModelVariant,
    /// Dropout rate used at every dropout site.
    pub dropout: f64,
    /// Move the max-pool between the two convolutions instead of after
    /// them.
    pub pool_between_convs: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: ModelVariant::Full,
            dropout: 0.2,
            pool_between_convs: false,
        }
    }
}

impl ModelConfig {
    /// The layer stack for `class_count` output classes.
    pub fn layer_specs(&self, class_count: u8) -> Vec<LayerSpec> {
        let ((c1, c2), (u1, u2)) = self.variant.sizes();
        let drop = LayerSpec::Dropout { rate: self.dropout };
        let mut specs = vec![LayerSpec::conv(c1), LayerSpec::Relu];
        if self.pool_between_convs {
            specs.push(LayerSpec::maxpool());
        }
        specs.extend([LayerSpec::conv(c2), LayerSpec::Relu]);
        if !self.pool_between_convs {
            specs.push(LayerSpec::maxpool());
        }
        specs.extend([
            drop.clone(),
            LayerSpec::Flatten,
            LayerSpec::RepeatVector { n: 4 },
            LayerSpec::Lstm {
                units: u1,
                return_sequences: true,
            },
            drop.clone(),
            LayerSpec::Lstm {
                units: u2,
                return_sequences: false,
            },
            drop.clone(),
            LayerSpec::Dense { units: 64 },
            LayerSpec::Relu,
            drop,
            LayerSpec::Dense {
                units: class_count as usize,
            },
            LayerSpec::Softmax,
        ]);
        specs
    }
}

/// Everything backward needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    pub layer_caches: Vec<LayerCache<F>>,
    pub probs: Tensor<F>,
}

/// Per-layer weight gradients, aligned with [`Layer::params`] order.
#[derive(Debug, Clone)]
pub struct Gradients<F> {
    pub layers: Vec<Vec<Tensor<F>>>,
}

impl<F: Scalar> Gradients<F> {
    /// Flat view in network parameter order.
    pub fn flat(&self) -> Vec<&Tensor<F>> {
        self.layers.iter().flatten().collect()
    }
}

/// A classifier: an ordered layer stack ending in Dense(classes) then
/// Softmax.
#[derive(Debug, Clone)]
pub struct Network<F> {
    layers: Vec<Layer<F>>,
    specs: Vec<LayerSpec>,
    input_shape: Vec<usize>,
    class_count: u8,
}

impl<F: Scalar> Network<F> {
    /// Builds and initializes a network. `input_shape` is per-instance
    /// (bins, frames, channels); the spec list must end with
    /// Dense(class_count) followed by Softmax.
    pub fn new(
        input_shape: Vec<usize>,
        class_count: u8,
        specs: Vec<LayerSpec>,
        seed: u64,
    ) -> Result<Self, NnError> {
        if input_shape.len() != 3 || input_shape.contains(&0) {
            return Err(NnError::BadArchitecture(format!(
                "input shape must be (bins, frames, channels) with no zero dim, got {input_shape:?}"
            )));
        }
        if !(3..=4).contains(&class_count) {
            return Err(NnError::BadArchitecture(format!(
                "class count must be 3 or 4, got {class_count}"
            )));
        }
        match specs.as_slice() {
            [.., LayerSpec::Dense { units }, LayerSpec::Softmax]
                if *units == class_count as usize => {}
            _ => {
                return Err(NnError::BadArchitecture(format!(
                    "stack must end with Dense({class_count}) then Softmax"
                )))
            }
        }
        if specs[..specs.len() - 1]
            .iter()
            .any(|s| matches!(s, LayerSpec::Softmax))
        {
            return Err(NnError::BadArchitecture(
                "softmax may only appear as the final layer".into(),
            ));
        }

        let mut layers = Vec::with_capacity(specs.len());
        let mut shape = input_shape.clone();
        for (i, spec) in specs.iter().enumerate() {
            // Shape validation first: building indexes into the input
            // shape and relies on it being well formed.
            let out = output_shape(spec, i, &shape)?;
            layers.push(build_layer(spec, i, &shape, seed)?);
            shape = out;
        }
        Ok(Self {
            layers,
            specs,
            input_shape,
            class_count,
        })
    }

    pub fn from_config(
        input_shape: Vec<usize>,
        class_count: u8,
        config: &ModelConfig,
        seed: u64,
    ) -> Result<Self, NnError> {
        Self::new(
            input_shape,
            class_count,
            config.layer_specs(class_count),
            seed,
        )
    }

    pub fn class_count(&self) -> u8 {
        self.class_count
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layers(&self) -> &[Layer<F>] {
        &self.layers
    }

    pub fn arch(&self) -> ArchDescriptor {
        ArchDescriptor {
            input_shape: self.input_shape.clone(),
            class_count: self.class_count,
            layers: self.specs.clone(),
        }
    }

    /// SHA-256 of the serialized architecture.
    pub fn fingerprint(&self) -> [u8; 32] {
        let json = serde_json::to_vec(&self.arch()).expect("arch serializes");
        let mut h = Sha256::new();
        h.update(&json);
        h.finalize().into()
    }

    /// Hex SHA-256 over all weight values, for history records.
    pub fn weights_sha256(&self) -> String {
        let mut h = Sha256::new();
        for p in self.params() {
            for v in p.values() {
                h.update(v.to_f64_lossy().to_le_bytes());
            }
        }
        to_hex(&h.finalize())
    }

    pub fn params(&self) -> Vec<&Tensor<F>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<F>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    /// Forward pass over a batch shaped (B, bins, frames, channels).
    /// Dropout fires only when `training` is true; with it false the pass
    /// never touches `rng`.
    pub fn forward(
        &self,
        batch: Tensor<F>,
        training: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Tensor<F>, ForwardCache<F>), NnError> {
        if batch.shape().len() != 4 || &batch.shape()[1..] != self.input_shape.as_slice() {
            return Err(NnError::ShapeMismatch {
                layer: 0,
                kind: "input",
                expected: format!("(batch, {:?})", self.input_shape),
                actual: format!("{:?}", batch.shape()),
            });
        }
        let (probs, layer_caches) = layers_forward(&self.layers, batch, training, rng)?;
        Ok((
            probs.clone(),
            ForwardCache {
                layer_caches,
                probs,
            },
        ))
    }

    /// Gradients for every weight tensor, from a training-mode cache.
    pub fn backward(&self, cache: &ForwardCache<F>, onehot: &Tensor<F>) -> Gradients<F> {
        layers_backward(&self.layers, &cache.layer_caches, &cache.probs, onehot).0
    }

    /// Argmax classes for a batch; ties break to the lowest index.
    pub fn predict(&self, batch: Tensor<F>) -> Result<Vec<u8>, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (probs, _) = self.forward(batch, false, &mut rng)?;
        let classes = self.class_count as usize;
        Ok(probs
            .values()
            .chunks_exact(classes)
            .map(|row| {
                let mut best = 0usize;
                for (i, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = i;
                    }
                }
                best as u8
            })
            .collect())
    }
}

pub fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs `input` through a layer slice, checking for non-finite
/// activations after every layer.
pub fn layers_forward<F: Scalar>(
    layers: &[Layer<F>],
    input: Tensor<F>,
    training: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(Tensor<F>, Vec<LayerCache<F>>), NnError> {
    let mut caches = Vec::with_capacity(layers.len());
    let mut current = input;
    for (i, layer) in layers.iter().enumerate() {
        let (out, cache) = layers::forward(layer, i, current, training, rng)?;
        if out.values().iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite {
                layer: i,
                kind: layer.kind_name(),
            });
        }
        caches.push(cache);
        current = out;
    }
    Ok((current, caches))
}

/// Backward pass for a stack ending in Dense then Softmax, seeded with
/// the fused softmax/cross-entropy gradient (p - y) / B at the logits.
/// Returns weight gradients and the gradient at the stack input.
pub fn layers_backward<F: Scalar>(
    layers: &[Layer<F>],
    caches: &[LayerCache<F>],
    probs: &Tensor<F>,
    onehot: &Tensor<F>,
) -> (Gradients<F>, Tensor<F>) {
    assert!(
        matches!(layers.last(), Some(Layer::Softmax)),
        "backward requires a softmax tail"
    );
    assert_eq!(layers.len(), caches.len(), "stale cache");
    let batch = probs.shape()[0];
    let inv_b = F::one() / fl::<F>(batch as f64);
    let mut dcur = Tensor::from_parts(
        probs.shape().to_vec(),
        probs
            .values()
            .iter()
            .zip(onehot.values())
            .map(|(&p, &y)| (p - y) * inv_b)
            .collect(),
    );

    let mut per_layer = vec![Vec::new(); layers.len()];
    for i in (0..layers.len() - 1).rev() {
        let (grads, dprev) = layers::backward(&layers[i], &caches[i], dcur);
        per_layer[i] = grads;
        dcur = dprev;
    }
    (Gradients { layers: per_layer }, dcur)
}

/// Mean categorical cross-entropy, computed in f64.
pub fn loss_ce<F: Scalar>(probs: &Tensor<F>, onehot: &Tensor<F>) -> Result<f64, NnError> {
    if probs.shape() != onehot.shape() || probs.shape().len() != 2 {
        return Err(NnError::TensorShape {
            shape: onehot.shape().to_vec(),
            len: probs.len(),
        });
    }
    let batch = probs.shape()[0];
    let mut total = 0.0f64;
    for (&p, &y) in probs.values().iter().zip(onehot.values()) {
        if y != F::zero() {
            total -= y.to_f64_lossy() * (p.to_f64_lossy() + CE_EPSILON).ln();
        }
    }
    Ok(total / batch as f64)
}

/// One-hot encodes labels as a (batch, classes) tensor.
pub fn make_onehot<F: Scalar>(labels: &[u8], classes: usize) -> Tensor<F> {
    let mut values = vec![F::zero(); labels.len() * classes];
    for (r, &l) in labels.iter().enumerate() {
        values[r * classes + l as usize] = F::one();
    }
    Tensor::from_parts(vec![labels.len(), classes], values)
}
