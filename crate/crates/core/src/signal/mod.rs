//! DSP kernel: windowed STFT, spectrograms, and IIR bandpass filtering.
//!
//! Frame arithmetic follows the usual overlapping-window convention:
//! `frames = floor((L - N) / H) + 1` and `bins = floor(N / 2) + 1`, with
//! trailing samples that do not fill a frame dropped. All transforms are
//! plain direct summation over a precomputed table of roots of unity; no
//! FFT, so any frame size works and the arithmetic is easy to audit.

pub mod filter;

use num_complex::Complex;
use thiserror::Error;

use crate::num::{fl, Scalar};

pub use filter::{apply_filter, design_bandpass, Biquad, BiquadCascade, FilterSpec};

/// Errors from signal construction, transforms, and filter design.
#[derive(Debug, Error)]
pub enum SignalError {
    #[error("time series must contain at least one sample")]
    EmptySignal,
    #[error("sampling rate must be positive and finite, got {0}")]
    InvalidSampleRate(f64),
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("frame size must be at least 2, got {0}")]
    FrameTooShort(usize),
    #[error("hop must satisfy 1 <= hop <= frame size, got hop {hop} for frame size {frame}")]
    InvalidHop { hop: usize, frame: usize },
    #[error("signal shorter than frame: {len} samples < frame size {frame}")]
    SignalShorterThanFrame { len: usize, frame: usize },
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("invalid cutoffs: {0}")]
    InvalidCutoffs(String),
    #[error("filter design produced an unstable section (pole magnitude {0} >= 1)")]
    UnstableDesign(f64),
}

/// One channel of sampled signal, amplitudes in arbitrary units.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<F: Scalar> {
    samples: Vec<F>,
    fs: f64,
}

impl<F: Scalar> TimeSeries<F> {
    /// Builds a series, rejecting empty input, bad sampling rates, and
    /// non-finite samples.
    pub fn new(samples: Vec<F>, fs: f64) -> Result<Self, SignalError> {
        if samples.is_empty() {
            return Err(SignalError::EmptySignal);
        }
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(SignalError::InvalidSampleRate(fs));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(SignalError::NonFiniteSample(i));
        }
        Ok(Self { samples, fs })
    }

    pub fn samples(&self) -> &[F] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }
}

/// Analysis window applied to each frame before the transform.
///
/// Periodic (DFT-even) forms, the standard choice for spectrogram
/// estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hann,
    Rectangular,
    Hamming,
}

impl WindowKind {
    /// Window coefficients of length `n`.
    pub fn coefficients<F: Scalar>(self, n: usize) -> Vec<F> {
        let tau = F::TAU();
        let nf = fl::<F>(n as f64);
        (0..n)
            .map(|i| {
                let phase = tau * fl::<F>(i as f64) / nf;
                match self {
                    WindowKind::Rectangular => F::one(),
                    WindowKind::Hann => fl::<F>(0.5) * (F::one() - phase.cos()),
                    WindowKind::Hamming => fl::<F>(0.54) - fl::<F>(0.46) * phase.cos(),
                }
            })
            .collect()
    }
}

/// Frame size, hop, and window for an STFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct StftPlan {
    pub frame_size_n: usize,
    pub hop_h: usize,
    pub window: WindowKind,
}

impl StftPlan {
    pub fn new(frame_size_n: usize, hop_h: usize, window: WindowKind) -> Result<Self, SignalError> {
        if frame_size_n < 2 {
            return Err(SignalError::FrameTooShort(frame_size_n));
        }
        if hop_h < 1 || hop_h > frame_size_n {
            return Err(SignalError::InvalidHop {
                hop: hop_h,
                frame: frame_size_n,
            });
        }
        Ok(Self {
            frame_size_n,
            hop_h,
            window,
        })
    }

    /// Plan with a 0.5 s frame and 0.25 s hop for the given sampling rate,
    /// rounding half away from zero (250 Hz gives N=125, H=63).
    pub fn for_sample_rate(fs: f64, window: WindowKind) -> Result<Self, SignalError> {
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(SignalError::InvalidSampleRate(fs));
        }
        let n = (0.5 * fs).round() as usize;
        let h = (0.25 * fs).round() as usize;
        Self::new(n, h, window)
    }

    pub fn bins(&self) -> usize {
        self.frame_size_n / 2 + 1
    }

    /// Frame count for a signal of length `len`, or an error if no frame fits.
    pub fn frames_for_len(&self, len: usize) -> Result<usize, SignalError> {
        if len < self.frame_size_n {
            return Err(SignalError::SignalShorterThanFrame {
                len,
                frame: self.frame_size_n,
            });
        }
        Ok((len - self.frame_size_n) / self.hop_h + 1)
    }
}

/// Complex STFT coefficients `S(m, k)`, frame index `m`, bin index `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexStft<F: Scalar> {
    coefficients: Vec<Complex<F>>,
    frames: usize,
    bins: usize,
    pub frame_size_n: usize,
    pub hop_h: usize,
    pub fs: f64,
}

impl<F: Scalar> ComplexStft<F> {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn at(&self, m: usize, k: usize) -> Complex<F> {
        self.coefficients[m * self.bins + k]
    }

    /// Coefficients of frame `m`, one per bin.
    pub fn frame(&self, m: usize) -> &[Complex<F>] {
        &self.coefficients[m * self.bins..(m + 1) * self.bins]
    }
}

/// Nonnegative power matrix, bins by frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<F: Scalar> {
    power: Vec<F>,
    bins: usize,
    frames: usize,
    /// Hz per bin.
    pub df: f64,
    /// Seconds per frame hop.
    pub dt: f64,
}

impl<F: Scalar> Spectrogram<F> {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn at(&self, k: usize, m: usize) -> F {
        self.power[k * self.frames + m]
    }

    /// Power values, bin-major: `power[k * frames + m]`.
    pub fn power(&self) -> &[F] {
        &self.power
    }
}

/// Roots-of-unity table for frame size `n`: entry `j` is `e^{-i 2 pi j / n}`.
///
/// Both [`dft`] and [`stft`] read their twiddle factors from this table
/// (index `(k * n) mod N`), so the two agree bit for bit on identical
/// frames.
struct TwiddleTable<F: Scalar> {
    re: Vec<F>,
    im: Vec<F>,
}

impl<F: Scalar> TwiddleTable<F> {
    fn new(n: usize) -> Self {
        let tau = F::TAU();
        let nf = fl::<F>(n as f64);
        let mut re = Vec::with_capacity(n);
        let mut im = Vec::with_capacity(n);
        for j in 0..n {
            let angle = -tau * fl::<F>(j as f64) / nf;
            re.push(angle.cos());
            im.push(angle.sin());
        }
        Self { re, im }
    }

    /// Copies the twiddle row for bin `k` (`table[(k * j) mod n]`) into
    /// contiguous scratch.
    fn fill_row(&self, k: usize, row_re: &mut [F], row_im: &mut [F]) {
        let n = self.re.len();
        for j in 0..n {
            let idx = (k * j) % n;
            row_re[j] = self.re[idx];
            row_im[j] = self.im[idx];
        }
    }
}

/// Dot product of a frame against one twiddle row, four-way split
/// accumulation. Shared by [`dft`] and [`stft`]; the fixed summation order
/// is what makes their outputs bitwise identical.
#[inline]
fn twiddle_dot<F: Scalar>(x: &[F], re: &[F], im: &[F]) -> Complex<F> {
    let mut ar = [F::zero(); 4];
    let mut ai = [F::zero(); 4];
    let mut xi = x.chunks_exact(4);
    let mut ri = re.chunks_exact(4);
    let mut ii = im.chunks_exact(4);
    for ((xc, rc), ic) in (&mut xi).zip(&mut ri).zip(&mut ii) {
        ar[0] += xc[0] * rc[0];
        ar[1] += xc[1] * rc[1];
        ar[2] += xc[2] * rc[2];
        ar[3] += xc[3] * rc[3];
        ai[0] += xc[0] * ic[0];
        ai[1] += xc[1] * ic[1];
        ai[2] += xc[2] * ic[2];
        ai[3] += xc[3] * ic[3];
    }
    let (xr, rr, ir) = (xi.remainder(), ri.remainder(), ii.remainder());
    for j in 0..xr.len() {
        ar[j] += xr[j] * rr[j];
        ai[j] += xr[j] * ir[j];
    }
    Complex::new(
        (ar[0] + ar[1]) + (ar[2] + ar[3]),
        (ai[0] + ai[1]) + (ai[2] + ai[3]),
    )
}

/// Direct-summation DFT of one frame, keeping the nonnegative-frequency
/// bins `k = 0 ..= floor(N/2)`.
pub fn dft<F: Scalar>(frame: &[F]) -> Result<Vec<Complex<F>>, SignalError> {
    let n = frame.len();
    if n < 2 {
        return Err(SignalError::FrameTooShort(n));
    }
    let table = TwiddleTable::new(n);
    let bins = n / 2 + 1;
    let mut row_re = vec![F::zero(); n];
    let mut row_im = vec![F::zero(); n];
    let mut out = Vec::with_capacity(bins);
    for k in 0..bins {
        table.fill_row(k, &mut row_re, &mut row_im);
        out.push(twiddle_dot(frame, &row_re, &row_im));
    }
    Ok(out)
}

/// Short-time Fourier transform over overlapping windowed frames.
pub fn stft<F: Scalar>(x: &TimeSeries<F>, plan: &StftPlan) -> Result<ComplexStft<F>, SignalError> {
    let n = plan.frame_size_n;
    let frames = plan.frames_for_len(x.len())?;
    let bins = plan.bins();
    let window: Vec<F> = plan.window.coefficients(n);
    let table = TwiddleTable::new(n);

    // Per-bin twiddle rows expanded once so every frame reuses them.
    let mut rows_re = vec![F::zero(); bins * n];
    let mut rows_im = vec![F::zero(); bins * n];
    for k in 0..bins {
        table.fill_row(k, &mut rows_re[k * n..(k + 1) * n], &mut rows_im[k * n..(k + 1) * n]);
    }

    let samples = x.samples();
    let mut coefficients = Vec::with_capacity(frames * bins);
    let mut wframe = vec![F::zero(); n];
    for m in 0..frames {
        let start = m * plan.hop_h;
        for (w, (&s, &wc)) in wframe
            .iter_mut()
            .zip(samples[start..start + n].iter().zip(window.iter()))
        {
            *w = s * wc;
        }
        for k in 0..bins {
            coefficients.push(twiddle_dot(
                &wframe,
                &rows_re[k * n..(k + 1) * n],
                &rows_im[k * n..(k + 1) * n],
            ));
        }
    }

    Ok(ComplexStft {
        coefficients,
        frames,
        bins,
        frame_size_n: n,
        hop_h: plan.hop_h,
        fs: x.fs(),
    })
}

/// Squared magnitude of every STFT cell, stored bins by frames.
pub fn spectrogram<F: Scalar>(s: &ComplexStft<F>) -> Spectrogram<F> {
    let (frames, bins) = (s.frames, s.bins);
    let mut power = vec![F::zero(); bins * frames];
    for m in 0..frames {
        for k in 0..bins {
            let c = s.coefficients[m * bins + k];
            power[k * frames + m] = c.re * c.re + c.im * c.im;
        }
    }
    Spectrogram {
        power,
        bins,
        frames,
        df: s.fs / s.frame_size_n as f64,
        dt: s.hop_h as f64 / s.fs,
    }
}

/// `log10(x + epsilon)` followed by a min-max rescale to `[0, 1]`.
///
/// A constant input (min equals max after the log) maps to all zeros.
pub fn log_normalize<F: Scalar>(
    sg: &Spectrogram<F>,
    epsilon: f64,
) -> Result<Spectrogram<F>, SignalError> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(SignalError::InvalidEpsilon(epsilon));
    }
    let eps = fl::<F>(epsilon);
    let mut power: Vec<F> = sg.power.iter().map(|&p| (p + eps).log10()).collect();
    let mut lo = F::infinity();
    let mut hi = F::neg_infinity();
    for &v in &power {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi > lo {
        let span = hi - lo;
        for v in &mut power {
            *v = (*v - lo) / span;
        }
    } else {
        for v in &mut power {
            *v = F::zero();
        }
    }
    Ok(Spectrogram {
        power,
        bins: sg.bins,
        frames: sg.frames,
        df: sg.df,
        dt: sg.dt,
    })
}

#[cfg(test)]
mod tests;
