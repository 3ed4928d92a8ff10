//! Per-layer forward and backward kernels.
//!
//! Every forward consumes its input tensor and stashes whatever backward
//! needs in a [`LayerCache`]. Loops run in a fixed order so results are
//! bit-reproducible for a given seed.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Layer, NnError, Tensor};
use crate::num::{fl, Scalar};

/// Intermediates captured during a training-mode forward pass.
#[derive(Debug, Clone)]
pub enum LayerCache<F> {
    Conv { input: Tensor<F> },
    Relu { output: Tensor<F> },
    Pool { argmax: Vec<u32>, in_shape: Vec<usize> },
    /// Inverted-dropout mask; `None` when the pass ran in inference mode.
    Dropout { mask: Option<Vec<F>> },
    Flatten { in_shape: Vec<usize> },
    Repeat,
    Lstm { x: Tensor<F>, gates: Tensor<F>, c: Tensor<F>, h: Tensor<F> },
    Dense { input: Tensor<F> },
    Softmax { probs: Tensor<F> },
}

fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// out[r, :] += x[r, :] @ w, with x (rows, m) and w (m, n).
fn matmul_acc<F: Scalar>(out: &mut [F], x: &[F], rows: usize, m: usize, w: &[F], n: usize) {
    for r in 0..rows {
        let xr = &x[r * m..(r + 1) * m];
        let or = &mut out[r * n..(r + 1) * n];
        for (k, &xv) in xr.iter().enumerate() {
            let wr = &w[k * n..(k + 1) * n];
            for (o, &wv) in or.iter_mut().zip(wr) {
                *o += xv * wv;
            }
        }
    }
}

/// dw += x^T @ dz, with x (rows, m) and dz (rows, n).
fn matmul_xt_acc<F: Scalar>(dw: &mut [F], x: &[F], rows: usize, m: usize, dz: &[F], n: usize) {
    for r in 0..rows {
        let dzr = &dz[r * n..(r + 1) * n];
        for k in 0..m {
            let xv = x[r * m + k];
            let dwr = &mut dw[k * n..(k + 1) * n];
            for (d, &g) in dwr.iter_mut().zip(dzr) {
                *d += xv * g;
            }
        }
    }
}

/// dx[r, k] = dz[r, :] . w[k, :], with dz (rows, n) and w (m, n).
fn matmul_bt<F: Scalar>(dx: &mut [F], dz: &[F], rows: usize, n: usize, w: &[F], m: usize) {
    for r in 0..rows {
        let dzr = &dz[r * n..(r + 1) * n];
        for k in 0..m {
            let wr = &w[k * n..(k + 1) * n];
            dx[r * m + k] = dzr.iter().zip(wr).map(|(&a, &b)| a * b).sum();
        }
    }
}

fn shape_err(layer: usize, kind: &'static str, expected: String, actual: &[usize]) -> NnError {
    NnError::ShapeMismatch {
        layer,
        kind,
        expected,
        actual: format!("{actual:?}"),
    }
}

pub(super) fn forward<F: Scalar>(
    layer: &Layer<F>,
    index: usize,
    input: Tensor<F>,
    training: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(Tensor<F>, LayerCache<F>), NnError> {
    match layer {
        Layer::Conv2d { weights, bias } => conv_forward(index, weights, bias, input),
        Layer::Relu => {
            let mut out = input;
            for v in out.values_mut() {
                if *v < F::zero() {
                    *v = F::zero();
                }
            }
            let cache = LayerCache::Relu { output: out.clone() };
            Ok((out, cache))
        }
        Layer::MaxPool2d => pool_forward(index, input),
        Layer::Dropout { rate } => {
            if !training {
                return Ok((input, LayerCache::Dropout { mask: None }));
            }
            // One draw per layer per call keeps the caller's stream layout
            // independent of tensor sizes.
            let mut mrng = ChaCha8Rng::seed_from_u64(rng.next_u64());
            let keep = fl::<F>(1.0 / (1.0 - rate));
            let mut out = input;
            let mask: Vec<F> = out
                .values()
                .iter()
                .map(|_| {
                    if mrng.gen::<f64>() < *rate {
                        F::zero()
                    } else {
                        keep
                    }
                })
                .collect();
            for (v, &m) in out.values_mut().iter_mut().zip(&mask) {
                *v *= m;
            }
            Ok((out, LayerCache::Dropout { mask: Some(mask) }))
        }
        Layer::Flatten => {
            let in_shape = input.shape().to_vec();
            if in_shape.len() < 2 {
                return Err(shape_err(index, "Flatten", "rank >= 2".into(), &in_shape));
            }
            let batch = in_shape[0];
            let rest: usize = in_shape[1..].iter().product();
            let out = input.reshaped(vec![batch, rest]);
            Ok((out, LayerCache::Flatten { in_shape }))
        }
        Layer::RepeatVector { n } => {
            let &[batch, dim] = input.shape() else {
                return Err(shape_err(
                    index,
                    "RepeatVector",
                    "(batch, features)".into(),
                    input.shape(),
                ));
            };
            let mut values = Vec::with_capacity(batch * n * dim);
            for r in 0..batch {
                let row = &input.values()[r * dim..(r + 1) * dim];
                for _ in 0..*n {
                    values.extend_from_slice(row);
                }
            }
            Ok((
                Tensor::from_parts(vec![batch, *n, dim], values),
                LayerCache::Repeat,
            ))
        }
        Layer::Lstm {
            wx,
            wh,
            bias,
            units,
            return_sequences,
        } => lstm_forward(index, wx, wh, bias, *units, *return_sequences, input),
        Layer::Dense { weights, bias } => {
            let (m, n) = (weights.shape()[0], weights.shape()[1]);
            let &[batch, in_dim] = input.shape() else {
                return Err(shape_err(
                    index,
                    "Dense",
                    format!("(batch, {m})"),
                    input.shape(),
                ));
            };
            if in_dim != m {
                return Err(shape_err(
                    index,
                    "Dense",
                    format!("(batch, {m})"),
                    input.shape(),
                ));
            }
            let mut values = Vec::with_capacity(batch * n);
            for _ in 0..batch {
                values.extend_from_slice(bias.values());
            }
            matmul_acc(&mut values, input.values(), batch, m, weights.values(), n);
            Ok((
                Tensor::from_parts(vec![batch, n], values),
                LayerCache::Dense { input },
            ))
        }
        Layer::Softmax => {
            let &[batch, classes] = input.shape() else {
                return Err(shape_err(
                    index,
                    "Softmax",
                    "(batch, classes)".into(),
                    input.shape(),
                ));
            };
            let mut out = input;
            for r in 0..batch {
                let row = &mut out.values_mut()[r * classes..(r + 1) * classes];
                let max = row.iter().cloned().fold(F::neg_infinity(), F::max);
                let mut sum = F::zero();
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                for v in row.iter_mut() {
                    *v /= sum;
                }
            }
            let cache = LayerCache::Softmax { probs: out.clone() };
            Ok((out, cache))
        }
    }
}

/// Backward through one layer: upstream gradient in, (weight gradients,
/// input gradient) out. Weight gradients follow the layer's `params()`
/// order; weightless layers return an empty list.
pub(super) fn backward<F: Scalar>(
    layer: &Layer<F>,
    cache: &LayerCache<F>,
    dout: Tensor<F>,
) -> (Vec<Tensor<F>>, Tensor<F>) {
    match (layer, cache) {
        (Layer::Conv2d { weights, .. }, LayerCache::Conv { input }) => {
            conv_backward(weights, input, dout)
        }
        (Layer::Relu, LayerCache::Relu { output }) => {
            let mut dx = dout;
            for (d, &o) in dx.values_mut().iter_mut().zip(output.values()) {
                if o <= F::zero() {
                    *d = F::zero();
                }
            }
            (vec![], dx)
        }
        (Layer::MaxPool2d, LayerCache::Pool { argmax, in_shape }) => {
            let mut dx = Tensor::zeros(in_shape.clone());
            let (w, c) = (in_shape[2], in_shape[3]);
            let out_px = dout.len() / c;
            for px in 0..out_px {
                let b = px / (dout.shape()[1] * dout.shape()[2]);
                for ci in 0..c {
                    let flat = argmax[px * c + ci] as usize;
                    let (y, x) = (flat / w, flat % w);
                    dx.values_mut()[((b * in_shape[1] + y) * w + x) * c + ci] +=
                        dout.values()[px * c + ci];
                }
            }
            (vec![], dx)
        }
        (Layer::Dropout { .. }, LayerCache::Dropout { mask }) => {
            let mask = mask
                .as_ref()
                .expect("dropout backward requires a training-mode cache");
            let mut dx = dout;
            for (d, &m) in dx.values_mut().iter_mut().zip(mask) {
                *d *= m;
            }
            (vec![], dx)
        }
        (Layer::Flatten, LayerCache::Flatten { in_shape }) => {
            (vec![], dout.reshaped(in_shape.clone()))
        }
        (Layer::RepeatVector { n }, LayerCache::Repeat) => {
            let &[batch, _, dim] = dout.shape() else {
                unreachable!("repeat output is rank 3")
            };
            let mut dx = Tensor::zeros(vec![batch, dim]);
            for r in 0..batch {
                for t in 0..*n {
                    let src = &dout.values()[(r * n + t) * dim..(r * n + t + 1) * dim];
                    let dst = &mut dx.values_mut()[r * dim..(r + 1) * dim];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
            (vec![], dx)
        }
        (
            Layer::Lstm {
                wx,
                wh,
                units,
                return_sequences,
                ..
            },
            LayerCache::Lstm { x, gates, c, h },
        ) => lstm_backward(wx, wh, *units, *return_sequences, x, gates, c, h, dout),
        (Layer::Dense { weights, .. }, LayerCache::Dense { input }) => {
            let (m, n) = (weights.shape()[0], weights.shape()[1]);
            let batch = input.shape()[0];
            let mut dw = Tensor::zeros(vec![m, n]);
            let mut db = Tensor::zeros(vec![n]);
            matmul_xt_acc(dw.values_mut(), input.values(), batch, m, dout.values(), n);
            for r in 0..batch {
                for (b, &g) in db
                    .values_mut()
                    .iter_mut()
                    .zip(&dout.values()[r * n..(r + 1) * n])
                {
                    *b += g;
                }
            }
            let mut dx = Tensor::zeros(vec![batch, m]);
            matmul_bt(dx.values_mut(), dout.values(), batch, n, weights.values(), m);
            (vec![dw, db], dx)
        }
        (Layer::Softmax, LayerCache::Softmax { .. }) => {
            // Softmax only appears fused with cross-entropy; the chain is
            // seeded at the logits, so this is never reached.
            unreachable!("softmax gradient is fused with the loss")
        }
        _ => unreachable!("cache kind matches layer kind by construction"),
    }
}

fn conv_forward<F: Scalar>(
    index: usize,
    weights: &Tensor<F>,
    bias: &Tensor<F>,
    input: Tensor<F>,
) -> Result<(Tensor<F>, LayerCache<F>), NnError> {
    let &[f, kh, kw, cin] = weights.shape() else {
        unreachable!("conv weights are rank 4")
    };
    let &[batch, h, w, c] = input.shape() else {
        return Err(shape_err(
            index,
            "Conv2D",
            format!("(batch, h, w, {cin})"),
            input.shape(),
        ));
    };
    if c != cin || h < kh || w < kw {
        return Err(shape_err(
            index,
            "Conv2D",
            format!("(batch, >={kh}, >={kw}, {cin})"),
            input.shape(),
        ));
    }
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let mut out = vec![F::zero(); batch * oh * ow * f];
    let xv = input.values();
    let wv = weights.values();
    for b in 0..batch {
        for y in 0..oh {
            for x in 0..ow {
                let opx = &mut out[((b * oh + y) * ow + x) * f..][..f];
                opx.copy_from_slice(bias.values());
                for (fi, o) in opx.iter_mut().enumerate() {
                    let mut acc = F::zero();
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let ipx = &xv[((b * h + y + ky) * w + x + kx) * cin..][..cin];
                            let wpx = &wv[((fi * kh + ky) * kw + kx) * cin..][..cin];
                            for (&iv, &wvv) in ipx.iter().zip(wpx) {
                                acc += iv * wvv;
                            }
                        }
                    }
                    *o += acc;
                }
            }
        }
    }
    Ok((
        Tensor::from_parts(vec![batch, oh, ow, f], out),
        LayerCache::Conv { input },
    ))
}

fn conv_backward<F: Scalar>(
    weights: &Tensor<F>,
    input: &Tensor<F>,
    dout: Tensor<F>,
) -> (Vec<Tensor<F>>, Tensor<F>) {
    let &[f, kh, kw, cin] = weights.shape() else {
        unreachable!()
    };
    let &[batch, h, w, _] = input.shape() else {
        unreachable!()
    };
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let mut dw = Tensor::zeros(vec![f, kh, kw, cin]);
    let mut db = Tensor::zeros(vec![f]);
    let mut dx = Tensor::zeros(input.shape().to_vec());
    let xv = input.values();
    let wv = weights.values();
    for b in 0..batch {
        for y in 0..oh {
            for x in 0..ow {
                let gpx = &dout.values()[((b * oh + y) * ow + x) * f..][..f];
                for (fi, &g) in gpx.iter().enumerate() {
                    db.values_mut()[fi] += g;
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let base = ((b * h + y + ky) * w + x + kx) * cin;
                            let wbase = ((fi * kh + ky) * kw + kx) * cin;
                            for ci in 0..cin {
                                dw.values_mut()[wbase + ci] += g * xv[base + ci];
                                dx.values_mut()[base + ci] += g * wv[wbase + ci];
                            }
                        }
                    }
                }
            }
        }
    }
    (vec![dw, db], dx)
}

fn pool_forward<F: Scalar>(
    index: usize,
    input: Tensor<F>,
) -> Result<(Tensor<F>, LayerCache<F>), NnError> {
    let &[batch, h, w, c] = input.shape() else {
        return Err(shape_err(
            index,
            "MaxPool2D",
            "(batch, h, w, c)".into(),
            input.shape(),
        ));
    };
    if h < 2 || w < 2 {
        return Err(shape_err(
            index,
            "MaxPool2D",
            "(batch, >=2, >=2, c)".into(),
            input.shape(),
        ));
    }
    let (oh, ow) = ((h - 2) / 2 + 1, (w - 2) / 2 + 1);
    let mut out = vec![F::zero(); batch * oh * ow * c];
    let mut argmax = vec![0u32; out.len()];
    let xv = input.values();
    for b in 0..batch {
        for oy in 0..oh {
            for ox in 0..ow {
                for ci in 0..c {
                    let mut best = F::neg_infinity();
                    let mut best_at = 0u32;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let (y, x) = (2 * oy + dy, 2 * ox + dx);
                            let v = xv[((b * h + y) * w + x) * c + ci];
                            if v > best {
                                best = v;
                                best_at = (y * w + x) as u32;
                            }
                        }
                    }
                    let o = ((b * oh + oy) * ow + ox) * c + ci;
                    out[o] = best;
                    argmax[o] = best_at;
                }
            }
        }
    }
    Ok((
        Tensor::from_parts(vec![batch, oh, ow, c], out),
        LayerCache::Pool {
            argmax,
            in_shape: input.shape().to_vec(),
        },
    ))
}

fn lstm_forward<F: Scalar>(
    index: usize,
    wx: &Tensor<F>,
    wh: &Tensor<F>,
    bias: &Tensor<F>,
    units: usize,
    return_sequences: bool,
    input: Tensor<F>,
) -> Result<(Tensor<F>, LayerCache<F>), NnError> {
    let d = wx.shape()[0];
    let u = units;
    let &[batch, steps, in_dim] = input.shape() else {
        return Err(shape_err(
            index,
            "LSTM",
            format!("(batch, steps, {d})"),
            input.shape(),
        ));
    };
    if in_dim != d || steps == 0 {
        return Err(shape_err(
            index,
            "LSTM",
            format!("(batch, steps >= 1, {d})"),
            input.shape(),
        ));
    }

    let mut gates = vec![F::zero(); batch * steps * 4 * u];
    let mut cs = vec![F::zero(); batch * steps * u];
    let mut hs = vec![F::zero(); batch * steps * u];
    let mut h_prev = vec![F::zero(); batch * u];
    let mut c_prev = vec![F::zero(); batch * u];
    let mut z = vec![F::zero(); batch * 4 * u];

    for t in 0..steps {
        for r in 0..batch {
            z[r * 4 * u..(r + 1) * 4 * u].copy_from_slice(bias.values());
        }
        for r in 0..batch {
            let xr = &input.values()[(r * steps + t) * d..][..d];
            let zr = &mut z[r * 4 * u..(r + 1) * 4 * u];
            for (k, &xv) in xr.iter().enumerate() {
                let wr = &wx.values()[k * 4 * u..(k + 1) * 4 * u];
                for (o, &wvv) in zr.iter_mut().zip(wr) {
                    *o += xv * wvv;
                }
            }
        }
        matmul_acc(&mut z, &h_prev, batch, u, wh.values(), 4 * u);
        for r in 0..batch {
            for j in 0..u {
                let zi = sigmoid(z[r * 4 * u + j]);
                let zf = sigmoid(z[r * 4 * u + u + j]);
                let zg = z[r * 4 * u + 2 * u + j].tanh();
                let zo = sigmoid(z[r * 4 * u + 3 * u + j]);
                let c_new = zf * c_prev[r * u + j] + zi * zg;
                let h_new = zo * c_new.tanh();
                let gb = (r * steps + t) * 4 * u;
                gates[gb + j] = zi;
                gates[gb + u + j] = zf;
                gates[gb + 2 * u + j] = zg;
                gates[gb + 3 * u + j] = zo;
                cs[(r * steps + t) * u + j] = c_new;
                hs[(r * steps + t) * u + j] = h_new;
                c_prev[r * u + j] = c_new;
                h_prev[r * u + j] = h_new;
            }
        }
    }

    let out = if return_sequences {
        Tensor::from_parts(vec![batch, steps, u], hs.clone())
    } else {
        let mut last = Vec::with_capacity(batch * u);
        for r in 0..batch {
            last.extend_from_slice(&hs[(r * steps + steps - 1) * u..][..u]);
        }
        Tensor::from_parts(vec![batch, u], last)
    };
    let cache = LayerCache::Lstm {
        x: input,
        gates: Tensor::from_parts(vec![batch, steps, 4 * u], gates),
        c: Tensor::from_parts(vec![batch, steps, u], cs),
        h: Tensor::from_parts(vec![batch, steps, u], hs),
    };
    Ok((out, cache))
}

#[allow(clippy::too_many_arguments)]
fn lstm_backward<F: Scalar>(
    wx: &Tensor<F>,
    wh: &Tensor<F>,
    units: usize,
    return_sequences: bool,
    x: &Tensor<F>,
    gates: &Tensor<F>,
    c: &Tensor<F>,
    h: &Tensor<F>,
    dout: Tensor<F>,
) -> (Vec<Tensor<F>>, Tensor<F>) {
    let u = units;
    let &[batch, steps, d] = x.shape() else {
        unreachable!()
    };
    let mut dwx = Tensor::zeros(vec![d, 4 * u]);
    let mut dwh = Tensor::zeros(vec![u, 4 * u]);
    let mut db = Tensor::zeros(vec![4 * u]);
    let mut dx = Tensor::zeros(vec![batch, steps, d]);
    let mut dh_next = vec![F::zero(); batch * u];
    let mut dc_next = vec![F::zero(); batch * u];
    let mut dz = vec![F::zero(); batch * 4 * u];

    for t in (0..steps).rev() {
        for r in 0..batch {
            for j in 0..u {
                let upstream = if return_sequences {
                    dout.values()[(r * steps + t) * u + j]
                } else if t == steps - 1 {
                    dout.values()[r * u + j]
                } else {
                    F::zero()
                };
                let dh = dh_next[r * u + j] + upstream;
                let gb = (r * steps + t) * 4 * u;
                let (zi, zf, zg, zo) = (
                    gates.values()[gb + j],
                    gates.values()[gb + u + j],
                    gates.values()[gb + 2 * u + j],
                    gates.values()[gb + 3 * u + j],
                );
                let c_t = c.values()[(r * steps + t) * u + j];
                let tc = c_t.tanh();
                let c_prev = if t > 0 {
                    c.values()[(r * steps + t - 1) * u + j]
                } else {
                    F::zero()
                };
                let d_o = dh * tc;
                let dc = dh * zo * (F::one() - tc * tc) + dc_next[r * u + j];
                let d_f = dc * c_prev;
                let d_i = dc * zg;
                let d_g = dc * zi;
                dz[r * 4 * u + j] = d_i * zi * (F::one() - zi);
                dz[r * 4 * u + u + j] = d_f * zf * (F::one() - zf);
                dz[r * 4 * u + 2 * u + j] = d_g * (F::one() - zg * zg);
                dz[r * 4 * u + 3 * u + j] = d_o * zo * (F::one() - zo);
                dc_next[r * u + j] = dc * zf;
            }
        }

        for r in 0..batch {
            let dzr = &dz[r * 4 * u..(r + 1) * 4 * u];
            let xr = &x.values()[(r * steps + t) * d..][..d];
            for (k, &xv) in xr.iter().enumerate() {
                let dwr = &mut dwx.values_mut()[k * 4 * u..(k + 1) * 4 * u];
                for (dw, &g) in dwr.iter_mut().zip(dzr) {
                    *dw += xv * g;
                }
            }
            if t > 0 {
                let hr = &h.values()[(r * steps + t - 1) * u..][..u];
                for (k, &hv) in hr.iter().enumerate() {
                    let dwr = &mut dwh.values_mut()[k * 4 * u..(k + 1) * 4 * u];
                    for (dw, &g) in dwr.iter_mut().zip(dzr) {
                        *dw += hv * g;
                    }
                }
            }
            for (b, &g) in db.values_mut().iter_mut().zip(dzr) {
                *b += g;
            }
            let dxr = &mut dx.values_mut()[(r * steps + t) * d..][..d];
            for (k, o) in dxr.iter_mut().enumerate() {
                let wr = &wx.values()[k * 4 * u..(k + 1) * 4 * u];
                *o = dzr.iter().zip(wr).map(|(&a, &b)| a * b).sum();
            }
            let dhr = &mut dh_next[r * u..(r + 1) * u];
            for (k, o) in dhr.iter_mut().enumerate() {
                let wr = &wh.values()[k * 4 * u..(k + 1) * 4 * u];
                *o = dzr.iter().zip(wr).map(|(&a, &b)| a * b).sum();
            }
        }
    }
    (vec![dwx, dwh, db], dx)
}
