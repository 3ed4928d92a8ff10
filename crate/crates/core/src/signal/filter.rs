//! Butterworth bandpass design and second-order-section filtering.
//!
//! Design follows the classical analog-prototype route: Butterworth poles
//! on the unit circle, lowpass-to-bandpass transform, then the bilinear
//! transform with frequency prewarping. The digital zeros, poles, and gain
//! are paired into biquad sections for numerically robust application.
//! Design arithmetic is always `f64`; coefficients are narrowed to the
//! target scalar at the end.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::{SignalError, TimeSeries};
use crate::num::{fl, Scalar};

/// Butterworth bandpass specification.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FilterSpec {
    /// Analog prototype order; the digital bandpass has twice as many poles.
    pub order: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub fs: f64,
}

impl FilterSpec {
    pub fn validate(&self) -> Result<(), SignalError> {
        if self.order < 1 {
            return Err(SignalError::InvalidCutoffs(format!(
                "order must be >= 1, got {}",
                self.order
            )));
        }
        if !(self.fs > 0.0) || !self.fs.is_finite() {
            return Err(SignalError::InvalidSampleRate(self.fs));
        }
        if !(self.low_hz > 0.0) {
            return Err(SignalError::InvalidCutoffs(format!(
                "low_hz must be > 0, got {}",
                self.low_hz
            )));
        }
        if !(self.low_hz < self.high_hz) {
            return Err(SignalError::InvalidCutoffs(format!(
                "low_hz ({}) must be < high_hz ({})",
                self.low_hz, self.high_hz
            )));
        }
        let nyquist = self.fs / 2.0;
        if !(self.high_hz < nyquist) {
            return Err(SignalError::InvalidCutoffs(format!(
                "high_hz ({}) must be < fs/2 ({})",
                self.high_hz, nyquist
            )));
        }
        Ok(())
    }
}

/// One second-order section: numerator `(b0, b1, b2)`, denominator
/// `(1, a1, a2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad<F: Scalar> {
    pub b0: F,
    pub b1: F,
    pub b2: F,
    pub a1: F,
    pub a2: F,
}

/// Cascade of biquad sections with a single overall gain.
#[derive(Debug, Clone, PartialEq)]
pub struct BiquadCascade<F: Scalar> {
    pub sections: Vec<Biquad<F>>,
    pub gain: F,
    pub fs: f64,
}

impl<F: Scalar> BiquadCascade<F> {
    /// Poles of every section, from the quadratic roots of each
    /// denominator.
    pub fn poles(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.sections.len() * 2);
        for s in &self.sections {
            let a1 = s.a1.to_f64_lossy();
            let a2 = s.a2.to_f64_lossy();
            if a2 == 0.0 {
                // Degenerate first-order section: z + a1 = 0.
                if a1 != 0.0 || s.b2.to_f64_lossy() != 0.0 {
                    out.push(Complex64::new(-a1, 0.0));
                }
                continue;
            }
            let half = Complex64::new(-a1 / 2.0, 0.0);
            let disc = (Complex64::new(a1 * a1 / 4.0 - a2, 0.0)).sqrt();
            out.push(half + disc);
            out.push(half - disc);
        }
        out
    }

    /// Complex frequency response at `f_hz`, evaluated in `f64`.
    pub fn response(&self, f_hz: f64) -> Complex64 {
        let omega = 2.0 * PI * f_hz / self.fs;
        let z1 = Complex64::new(0.0, -omega).exp();
        let z2 = z1 * z1;
        let mut h = Complex64::new(self.gain.to_f64_lossy(), 0.0);
        for s in &self.sections {
            let num = Complex64::new(s.b0.to_f64_lossy(), 0.0)
                + z1 * s.b1.to_f64_lossy()
                + z2 * s.b2.to_f64_lossy();
            let den =
                Complex64::new(1.0, 0.0) + z1 * s.a1.to_f64_lossy() + z2 * s.a2.to_f64_lossy();
            h *= num / den;
        }
        h
    }

    /// Magnitude response at `f_hz`.
    pub fn magnitude(&self, f_hz: f64) -> f64 {
        self.response(f_hz).norm()
    }
}

/// Digital zeros, poles, and gain; intermediate design representation.
#[derive(Debug, Clone)]
struct Zpk {
    z: Vec<Complex64>,
    p: Vec<Complex64>,
    k: f64,
}

/// Analog Butterworth prototype: unit-circle poles, no zeros, unit gain.
fn butter_prototype(order: usize) -> Zpk {
    let n = order as f64;
    let p = (0..order)
        .map(|i| {
            let m = -n + 1.0 + 2.0 * i as f64;
            -(Complex64::i() * PI * m / (2.0 * n)).exp()
        })
        .collect();
    Zpk {
        z: Vec::new(),
        p,
        k: 1.0,
    }
}

/// Lowpass-to-bandpass transform at center `wo` with bandwidth `bw`.
fn lp2bp(zpk: Zpk, wo: f64, bw: f64) -> Zpk {
    let degree = zpk.p.len() - zpk.z.len();
    let scale = |c: Complex64| c * (bw / 2.0);
    let split = |c: Complex64| {
        let s = (c * c - wo * wo).sqrt();
        (c + s, c - s)
    };

    let mut z = Vec::with_capacity(zpk.z.len() * 2 + degree);
    let mut p = Vec::with_capacity(zpk.p.len() * 2);
    let (mut z_hi, mut z_lo) = (Vec::new(), Vec::new());
    for &zz in &zpk.z {
        let (a, b) = split(scale(zz));
        z_hi.push(a);
        z_lo.push(b);
    }
    z.extend(z_hi);
    z.extend(z_lo);
    z.extend(std::iter::repeat(Complex64::new(0.0, 0.0)).take(degree));

    let (mut p_hi, mut p_lo) = (Vec::new(), Vec::new());
    for &pp in &zpk.p {
        let (a, b) = split(scale(pp));
        p_hi.push(a);
        p_lo.push(b);
    }
    p.extend(p_hi);
    p.extend(p_lo);

    Zpk {
        z,
        p,
        k: zpk.k * bw.powi(degree as i32),
    }
}

/// Bilinear transform mapping the analog plane to the unit disc,
/// at internal sampling rate `fs`.
fn bilinear(zpk: Zpk, fs: f64) -> Zpk {
    let fs2 = 2.0 * fs;
    let degree = zpk.p.len() - zpk.z.len();

    let num: Complex64 = zpk
        .z
        .iter()
        .map(|&z| Complex64::new(fs2, 0.0) - z)
        .product();
    let den: Complex64 = zpk
        .p
        .iter()
        .map(|&p| Complex64::new(fs2, 0.0) - p)
        .product();
    let k = zpk.k * (num / den).re;

    let map = |c: Complex64| (Complex64::new(fs2, 0.0) + c) / (Complex64::new(fs2, 0.0) - c);
    let mut z: Vec<Complex64> = zpk.z.iter().copied().map(map).collect();
    z.extend(std::iter::repeat(Complex64::new(-1.0, 0.0)).take(degree));
    let p = zpk.p.iter().copied().map(map).collect();

    Zpk { z, p, k }
}

/// Groups values into conjugate pairs (returned as the upper-half member)
/// plus leftover reals, within tolerance `tol`.
fn split_conjugates(values: &[Complex64], tol: f64) -> (Vec<Complex64>, Vec<f64>) {
    let mut reals: Vec<f64> = Vec::new();
    let mut upper: Vec<Complex64> = Vec::new();
    let mut lower: Vec<Complex64> = Vec::new();
    for &v in values {
        if v.im.abs() <= tol * (1.0 + v.norm()) {
            reals.push(v.re);
        } else if v.im > 0.0 {
            upper.push(v);
        } else {
            lower.push(v);
        }
    }
    let key = |c: &Complex64| (c.re, c.im.abs());
    upper.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
    lower.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
    debug_assert_eq!(upper.len(), lower.len());
    reals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (upper, reals)
}

/// Designs a digital Butterworth bandpass as a biquad cascade.
///
/// Passband edges are prewarped so the digital magnitude is exactly
/// -3 dB at `low_hz` and `high_hz`.
pub fn design_bandpass<F: Scalar>(spec: &FilterSpec) -> Result<BiquadCascade<F>, SignalError> {
    spec.validate()?;

    // Normalized edges in (0, 1), then prewarped at internal fs = 2.
    let fs_int = 2.0;
    let warp = |f_hz: f64| {
        let wn = f_hz / (spec.fs / 2.0);
        2.0 * fs_int * (PI * wn / fs_int).tan()
    };
    let (w1, w2) = (warp(spec.low_hz), warp(spec.high_hz));
    let wo = (w1 * w2).sqrt();
    let bw = w2 - w1;

    let zpk = bilinear(lp2bp(butter_prototype(spec.order), wo, bw), fs_int);

    // Pair poles into sections: conjugate pairs first, then reals two at a
    // time. A Butterworth bandpass always has zeros at +1 and -1 in equal
    // number, so every section's numerator is z^2 - 1 (or z -+ 1 for a
    // leftover first-order section).
    let tol = 1e-9;
    let (pairs, reals) = split_conjugates(&zpk.p, tol);
    let mut pole_sections: Vec<(f64, f64)> = Vec::new();
    for p in &pairs {
        // (1 - p z^-1)(1 - conj(p) z^-1) => a1 = -2 Re(p), a2 = |p|^2.
        pole_sections.push((-2.0 * p.re, p.norm_sqr()));
    }
    let mut rit = reals.chunks_exact(2);
    for pair in &mut rit {
        pole_sections.push((-(pair[0] + pair[1]), pair[0] * pair[1]));
    }
    let leftover_real = rit.remainder().first().copied();

    let mut zeros_pos = zpk
        .z
        .iter()
        .filter(|z| (z.re - 1.0).abs() <= tol && z.im.abs() <= tol)
        .count();
    let mut zeros_neg = zpk.z.len() - zeros_pos;

    // Sections ordered by pole magnitude so the near-unit-circle poles sit
    // at the end of the cascade.
    pole_sections.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());

    let mut sections: Vec<Biquad<f64>> = Vec::new();
    for (a1, a2) in pole_sections {
        let (b0, b1, b2) = if zeros_pos >= 1 && zeros_neg >= 1 {
            zeros_pos -= 1;
            zeros_neg -= 1;
            (1.0, 0.0, -1.0)
        } else if zeros_pos >= 2 {
            zeros_pos -= 2;
            (1.0, -2.0, 1.0)
        } else if zeros_neg >= 2 {
            zeros_neg -= 2;
            (1.0, 2.0, 1.0)
        } else {
            (1.0, 0.0, 0.0)
        };
        sections.push(Biquad { b0, b1, b2, a1, a2 });
    }
    if let Some(r) = leftover_real {
        let b1 = if zeros_pos >= 1 {
            -1.0
        } else if zeros_neg >= 1 {
            1.0
        } else {
            0.0
        };
        sections.push(Biquad {
            b0: 1.0,
            b1,
            b2: 0.0,
            a1: -r,
            a2: 0.0,
        });
    }

    let cascade = BiquadCascade {
        sections: sections
            .iter()
            .map(|s| Biquad {
                b0: fl::<F>(s.b0),
                b1: fl::<F>(s.b1),
                b2: fl::<F>(s.b2),
                a1: fl::<F>(s.a1),
                a2: fl::<F>(s.a2),
            })
            .collect(),
        gain: fl::<F>(zpk.k),
        fs: spec.fs,
    };

    for p in cascade.poles() {
        if p.norm() >= 1.0 {
            return Err(SignalError::UnstableDesign(p.norm()));
        }
    }
    Ok(cascade)
}

/// Runs the cascade over a signal: one causal forward pass from zero
/// initial state. Output length equals input length.
pub fn apply_filter<F: Scalar>(
    filter: &BiquadCascade<F>,
    x: &TimeSeries<F>,
) -> Result<TimeSeries<F>, SignalError> {
    let mut buf: Vec<F> = x.samples().iter().map(|&s| s * filter.gain).collect();
    for s in &filter.sections {
        // Transposed direct form II.
        let mut s1 = F::zero();
        let mut s2 = F::zero();
        for v in &mut buf {
            let xin = *v;
            let y = s.b0 * xin + s1;
            s1 = s.b1 * xin - s.a1 * y + s2;
            s2 = s.b2 * xin - s.a2 * y;
            *v = y;
        }
    }
    TimeSeries::new(buf, x.fs())
}
