//! End-to-end EEG affect classification at desk scale.
//!
//! The pipeline: bandpass-filter multi-channel epochs, turn each channel
//! into an STFT power spectrogram, train a small CNN-LSTM on the resulting
//! instances under a repeated K-fold protocol, and compare runs with a
//! Welch t-test. Everything is deterministic given the seeds in the
//! configuration.
//!
//! Numeric kernels are generic over the scalar type (see [`num::Scalar`]);
//! the aliases below pin the concrete types used by the shipped pipeline:
//! `f64` for DSP, `f32` for training, with `f64` networks reserved for
//! gradient checking.

pub mod corpus;
pub mod eval;
pub mod nn;
pub mod num;
pub mod signal;

pub type TimeSeries32 = signal::TimeSeries<f32>;
pub type TimeSeries64 = signal::TimeSeries<f64>;
pub type Spectrogram64 = signal::Spectrogram<f64>;
pub type BiquadCascade64 = signal::BiquadCascade<f64>;
pub type Tensor32 = nn::Tensor<f32>;
pub type Tensor64 = nn::Tensor<f64>;
pub type Network32 = nn::Network<f32>;
pub type Network64 = nn::Network<f64>;

/// Mixes a master seed with stream labels into a derived sub-seed.
///
/// SplitMix64-style finalizer; used everywhere a component needs its own
/// deterministic RNG stream (per repeat, per fold, per batch).
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    let mut state = master ^ 0x9E37_79B9_7F4A_7C15;
    for &l in labels {
        state = state.wrapping_add(l.wrapping_mul(0xBF58_476D_1CE4_E5B9));
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        state = z ^ (z >> 31);
    }
    state
}
