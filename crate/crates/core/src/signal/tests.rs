use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

/// Naive direct-summation reference: same modular angle indexing, but
/// trig evaluated per element instead of via the shared table.
fn dft_oracle(frame: &[f64]) -> Vec<Complex64> {
    let n = frame.len();
    (0..n / 2 + 1)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &x) in frame.iter().enumerate() {
                let angle = -2.0 * std::f64::consts::PI * ((k * j) % n) as f64 / n as f64;
                acc += Complex64::new(x * angle.cos(), x * angle.sin());
            }
            acc
        })
        .collect()
}

/// Full-spectrum reference (all N bins), used only for Parseval checks.
fn full_dft(frame: &[f64]) -> Vec<Complex64> {
    let n = frame.len();
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &x) in frame.iter().enumerate() {
                let angle = -2.0 * std::f64::consts::PI * (k as f64) * (j as f64) / n as f64;
                acc += Complex64::new(x * angle.cos(), x * angle.sin());
            }
            acc
        })
        .collect()
}

fn assert_bins_close(got: &[Complex<f64>], want: &[Complex64], tol: f64) {
    assert_eq!(got.len(), want.len());
    let scale = want.iter().map(|c| c.norm()).fold(1.0_f64, f64::max);
    for (g, w) in got.iter().zip(want) {
        let diff = Complex64::new(g.re - w.re, g.im - w.im).norm();
        assert!(
            diff <= tol * scale,
            "bin mismatch: got {g}, want {w}, diff {diff:e}, scale {scale:e}"
        );
    }
}

#[test]
fn window_values_match_references() {
    // Periodic 8-point windows.
    let hann: Vec<f64> = WindowKind::Hann.coefficients(8);
    let want_hann = [
        0.0,
        0.1464466094067262,
        0.49999999999999994,
        0.8535533905932737,
        1.0,
        0.8535533905932738,
        0.5000000000000001,
        0.14644660940672632,
    ];
    for (h, w) in hann.iter().zip(want_hann) {
        assert_relative_eq!(h, &w, max_relative = 1e-12, epsilon = 1e-15);
    }
    let hamming: Vec<f64> = WindowKind::Hamming.coefficients(8);
    let want_hamming = [
        0.08000000000000002,
        0.21473088065418816,
        0.54,
        0.8652691193458119,
        1.0,
        0.865269119345812,
        0.5400000000000001,
        0.21473088065418822,
    ];
    for (h, w) in hamming.iter().zip(want_hamming) {
        assert_relative_eq!(h, &w, max_relative = 1e-12);
    }
    let rect: Vec<f64> = WindowKind::Rectangular.coefficients(5);
    assert_eq!(rect, vec![1.0; 5]);
}

#[test]
fn dft_dc_signal() {
    let out = dft(&[1.0_f64; 8]).unwrap();
    assert_eq!(out.len(), 5);
    assert_relative_eq!(out[0].re, 8.0, max_relative = 1e-12);
    assert!(out[0].im.abs() < 1e-12);
    for b in &out[1..] {
        assert!(b.norm() < 1e-12, "leakage {b}");
    }
}

#[test]
fn dft_single_bin_cosine() {
    let n = 16;
    let frame: Vec<f64> = (0..n)
        .map(|i| (2.0 * std::f64::consts::PI * 2.0 * i as f64 / n as f64).cos())
        .collect();
    let out = dft(&frame).unwrap();
    assert_relative_eq!(out[2].norm(), 8.0, max_relative = 1e-9);
    for (k, b) in out.iter().enumerate() {
        if k != 2 {
            assert!(b.norm() <= 1e-9, "bin {k} leakage {}", b.norm());
        }
    }
}

#[test]
fn dft_matches_direct_summation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let frame: Vec<f64> = (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let got = dft(&frame).unwrap();
    let want = dft_oracle(&frame);
    assert_bins_close(&got, &want, 1e-9);
}

#[test]
fn dft_rejects_short_frames() {
    assert!(matches!(
        dft(&[1.0_f64]),
        Err(SignalError::FrameTooShort(1))
    ));
}

#[test]
fn stft_shapes_reproduce_known_geometries() {
    let cases = [
        (8064, 128.0, 64, 32, 251, 33),
        (16000, 200.0, 100, 50, 319, 51),
        (1751, 250.0, 125, 63, 26, 63),
    ];
    for (len, fs, n, h, frames, bins) in cases {
        let plan = StftPlan::for_sample_rate(fs, WindowKind::Hann).unwrap();
        assert_eq!((plan.frame_size_n, plan.hop_h), (n, h), "plan for fs={fs}");
        let x = TimeSeries::new(vec![0.25_f64; len], fs).unwrap();
        let s = stft(&x, &plan).unwrap();
        assert_eq!((s.frames(), s.bins()), (frames, bins), "shape for fs={fs}");
    }
}

#[test]
fn stft_spectrogram_matches_reference_values() {
    // 12-sample signal, N=8, H=2; power values computed with an
    // independent FFT implementation.
    let x = TimeSeries::new(
        vec![
            0.1, -0.4, 0.25, 0.9, -0.6, 0.3, 0.55, -0.2, 0.05, 0.7, -0.35, 0.15,
        ],
        8.0,
    )
    .unwrap();
    let cases: [(WindowKind, [[f64; 5]; 3]); 3] = [
        (
            WindowKind::Rectangular,
            [
                [
                    0.8099999999999998,
                    0.32838528392512906,
                    2.3300000000000005,
                    4.231614716074873,
                    0.0899999999999999,
                ],
                [
                    3.8025000000000007,
                    0.6026367260523491,
                    1.9125000000000003,
                    3.162363273947652,
                    2.102499999999999,
                ],
                [
                    0.3600000000000001,
                    0.6063677861752863,
                    1.6650000000000003,
                    2.423632213824714,
                    1.6899999999999995,
                ],
            ],
        ),
        (
            WindowKind::Hann,
            [
                [
                    0.5422792206135788,
                    0.07138564286262744,
                    1.2931370849898476,
                    2.163589103967956,
                    1.2913961030678924,
                ],
                [
                    0.35363230674770124,
                    0.19773764580702843,
                    0.8386212120245875,
                    0.8486974202047106,
                    0.0019954012266027504,
                ],
                [
                    0.41303458691207956,
                    0.0991652688751984,
                    0.6268607950922033,
                    0.9979268122701854,
                    0.11742798519428145,
                ],
            ],
        ),
        (
            WindowKind::Hamming,
            [
                [
                    0.5617268880617676,
                    0.07775501901387213,
                    1.364541007645913,
                    2.303107889436996,
                    1.143796913548142,
                ],
                [
                    0.49434443657741434,
                    0.12149003143932485,
                    0.90354603626763,
                    0.9789598501499394,
                    0.02467925406585402,
                ],
                [
                    0.4086577661352441,
                    0.11437569951716946,
                    0.668878886003613,
                    1.0474349923088846,
                    0.17578184550963627,
                ],
            ],
        ),
    ];
    for (window, want) in cases {
        let plan = StftPlan::new(8, 2, window).unwrap();
        let sg = spectrogram(&stft(&x, &plan).unwrap());
        assert_eq!((sg.bins(), sg.frames()), (5, 3));
        for (m, frame) in want.iter().enumerate() {
            for (k, w) in frame.iter().enumerate() {
                assert_relative_eq!(
                    sg.at(k, m),
                    *w,
                    max_relative = 1e-10,
                    epsilon = 1e-12
                );
            }
        }
    }
}

#[test]
fn stft_with_unit_hop_rectangular_equals_per_frame_dft_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let samples: Vec<f64> = (0..100).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let x = TimeSeries::new(samples.clone(), 50.0).unwrap();
    let plan = StftPlan::new(16, 16, WindowKind::Rectangular).unwrap();
    let s = stft(&x, &plan).unwrap();
    for m in 0..s.frames() {
        let frame_dft = dft(&samples[m * 16..(m + 1) * 16]).unwrap();
        for (k, want) in frame_dft.iter().enumerate() {
            let got = s.at(m, k);
            assert_eq!(got.re.to_bits(), want.re.to_bits(), "frame {m} bin {k}");
            assert_eq!(got.im.to_bits(), want.im.to_bits(), "frame {m} bin {k}");
        }
    }
}

#[test]
fn parseval_holds_per_rectangular_frame() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for n in [8, 13, 32] {
        let frame: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let time_energy: f64 = frame.iter().map(|x| x * x).sum();
        let freq_energy: f64 =
            full_dft(&frame).iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
        assert_relative_eq!(time_energy, freq_energy, max_relative = 1e-12);

        // And the retained half-spectrum comes from the same transform.
        let half = dft(&frame).unwrap();
        let full = full_dft(&frame);
        assert_bins_close(&half, &full[..n / 2 + 1], 1e-12);
    }
}

#[test]
fn stft_rejects_short_signals() {
    let x = TimeSeries::new(vec![0.0_f64; 10], 10.0).unwrap();
    let plan = StftPlan::new(16, 4, WindowKind::Hann).unwrap();
    assert!(matches!(
        stft(&x, &plan),
        Err(SignalError::SignalShorterThanFrame { len: 10, frame: 16 })
    ));
}

#[test]
fn spectrogram_squares_magnitudes() {
    let x = TimeSeries::new(vec![0.5_f64; 40], 20.0).unwrap();
    let plan = StftPlan::new(8, 4, WindowKind::Hann).unwrap();
    let s = stft(&x, &plan).unwrap();
    let sg = spectrogram(&s);
    for m in 0..s.frames() {
        for k in 0..s.bins() {
            let c = s.at(m, k);
            let want = c.re * c.re + c.im * c.im;
            assert_eq!(sg.at(k, m), want);
            assert!(sg.at(k, m) >= 0.0);
        }
    }
    assert_relative_eq!(sg.df, 20.0 / 8.0);
    assert_relative_eq!(sg.dt, 4.0 / 20.0);
}

#[test]
fn spectrogram_of_three_four_cell() {
    // |3 + 4i|^2 = 25, checked through a handmade STFT.
    let s = ComplexStft {
        coefficients: vec![Complex::new(3.0_f64, 4.0)],
        frames: 1,
        bins: 1,
        frame_size_n: 2,
        hop_h: 1,
        fs: 4.0,
    };
    assert_relative_eq!(spectrogram(&s).at(0, 0), 25.0);
}

#[test]
fn spectrogram_invariant_under_sign_flip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let flipped: Vec<f64> = samples.iter().map(|&s| -s).collect();
    let plan = StftPlan::new(16, 8, WindowKind::Hann).unwrap();
    let a = spectrogram(&stft(&TimeSeries::new(samples, 32.0).unwrap(), &plan).unwrap());
    let b = spectrogram(&stft(&TimeSeries::new(flipped, 32.0).unwrap(), &plan).unwrap());
    assert_eq!(a.power(), b.power());
}

#[test]
fn log_normalize_behaviour() {
    let x = TimeSeries::new(vec![0.3_f64; 24], 12.0).unwrap();
    let plan = StftPlan::new(8, 4, WindowKind::Hann).unwrap();
    let sg = spectrogram(&stft(&x, &plan).unwrap());

    // Rejects a bad epsilon.
    assert!(matches!(
        log_normalize(&sg, 0.0),
        Err(SignalError::InvalidEpsilon(_))
    ));

    // Non-constant input maps endpoints to exactly 0 and 1.
    let norm = log_normalize(&sg, 1e-10).unwrap();
    let lo = norm.power().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = norm
        .power()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(lo, 0.0);
    assert_eq!(hi, 1.0);

    // Constant input maps to all zeros.
    let flat = Spectrogram {
        power: vec![2.5_f64; 6],
        bins: 2,
        frames: 3,
        df: 1.0,
        dt: 1.0,
    };
    let out = log_normalize(&flat, 1e-10).unwrap();
    assert!(out.power().iter().all(|&v| v == 0.0));
}

#[test]
fn log_normalize_preserves_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let power: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..1e4)).collect();
    let sg = Spectrogram {
        power: power.clone(),
        bins: 5,
        frames: 10,
        df: 1.0,
        dt: 1.0,
    };
    let out = log_normalize(&sg, 1e-10).unwrap();
    for i in 0..power.len() {
        for j in 0..power.len() {
            if power[i] < power[j] {
                assert!(out.power()[i] <= out.power()[j]);
            }
        }
    }
}

#[test]
fn time_series_validation() {
    assert!(matches!(
        TimeSeries::<f64>::new(vec![], 1.0),
        Err(SignalError::EmptySignal)
    ));
    assert!(matches!(
        TimeSeries::new(vec![1.0_f64], 0.0),
        Err(SignalError::InvalidSampleRate(_))
    ));
    assert!(matches!(
        TimeSeries::new(vec![1.0_f64, f64::NAN], 1.0),
        Err(SignalError::NonFiniteSample(1))
    ));
}

// Filter design oracle: zeros/poles/gain and the response grid for a
// fifth-order 1-40 Hz design at 128 Hz were computed with an independent
// filter-design implementation.

#[test]
fn bandpass_design_gain_and_poles_match_reference() {
    let spec = FilterSpec {
        order: 5,
        low_hz: 1.0,
        high_hz: 40.0,
        fs: 128.0,
    };
    let cascade = design_bandpass::<f64>(&spec).unwrap();
    assert_eq!(cascade.sections.len(), 5);
    assert_relative_eq!(cascade.gain, 0.11527677766147836, max_relative = 1e-12);

    let mut poles = cascade.poles();
    poles.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    let want = [
        (-0.29760322019791674, -0.6907464721431555),
        (-0.29760322019791674, 0.6907464721431555),
        (-0.20881683765282164, -0.3208379810256606),
        (-0.20881683765282164, 0.3208379810256606),
        (-0.18255941389019867, 0.0),
        (0.9504656946489661, 0.0),
        (0.9602675870660102, -0.028964127228024113),
        (0.9602675870660102, 0.028964127228024113),
        (0.9842615838221209, -0.046264881571819634),
        (0.9842615838221209, 0.046264881571819634),
    ];
    let mut want: Vec<Complex64> = want.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
    want.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    assert_eq!(poles.len(), want.len());
    for (p, w) in poles.iter().zip(&want) {
        assert!((p - w).norm() < 1e-9, "pole {p} vs {w}");
    }
}

#[test]
fn bandpass_response_matches_reference_grid() {
    let spec = FilterSpec {
        order: 5,
        low_hz: 1.0,
        high_hz: 40.0,
        fs: 128.0,
    };
    let cascade = design_bandpass::<f64>(&spec).unwrap();
    let grid = [
        (0.25, 0.0009028253751324554),
        (0.5, 0.02933205693440171),
        (1.0, 0.7071067811865428),
        (2.0, 0.9997098666889825),
        (5.0, 0.9999999997254355),
        (10.0, 0.9999999999984786),
        (20.0, 0.9999949708728032),
        (30.0, 0.9975319979103169),
        (40.0, 0.7071067811865475),
        (45.0, 0.22789456623955281),
        (50.0, 0.04146902292627744),
        (60.0, 6.417841795588783e-5),
    ];
    for (f, want) in grid {
        assert_relative_eq!(cascade.magnitude(f), want, max_relative = 1e-8);
    }
}

#[test]
fn bandpass_edges_sit_at_minus_three_db() {
    let spec = FilterSpec {
        order: 5,
        low_hz: 1.0,
        high_hz: 40.0,
        fs: 250.0,
    };
    let cascade = design_bandpass::<f64>(&spec).unwrap();
    let target = std::f64::consts::FRAC_1_SQRT_2;
    assert_relative_eq!(cascade.magnitude(1.0), target, max_relative = 1e-9);
    assert_relative_eq!(cascade.magnitude(40.0), target, max_relative = 1e-9);
    assert_relative_eq!(cascade.magnitude(20.0), 0.9998971845623164, max_relative = 1e-8);
}

#[test]
fn bandpass_rejects_bad_cutoffs() {
    let base = FilterSpec {
        order: 5,
        low_hz: 40.0,
        high_hz: 1.0,
        fs: 250.0,
    };
    let err = design_bandpass::<f64>(&base).unwrap_err();
    assert!(err.to_string().contains("low_hz (40) must be < high_hz (1)"));

    let err = design_bandpass::<f64>(&FilterSpec {
        low_hz: 1.0,
        high_hz: 130.0,
        ..base
    })
    .unwrap_err();
    assert!(err.to_string().contains("must be < fs/2"));

    let err = design_bandpass::<f64>(&FilterSpec {
        low_hz: 0.0,
        high_hz: 40.0,
        ..base
    })
    .unwrap_err();
    assert!(err.to_string().contains("low_hz must be > 0"));
}

#[test]
fn designs_are_stable_up_to_order_ten() {
    for order in 1..=10 {
        for (low, high, fs) in [(1.0, 40.0, 128.0), (0.5, 45.0, 250.0), (4.0, 30.0, 200.0)] {
            let cascade = design_bandpass::<f64>(&FilterSpec {
                order,
                low_hz: low,
                high_hz: high,
                fs,
            })
            .unwrap();
            for p in cascade.poles() {
                assert!(p.norm() < 1.0, "order {order} pole {p}");
            }
        }
    }
}

/// Reference filter application: evaluate each section's difference
/// equation in direct form I with explicit input/output history.
fn filter_oracle(cascade: &BiquadCascade<f64>, x: &[f64]) -> Vec<f64> {
    let mut buf: Vec<f64> = x.iter().map(|&v| v * cascade.gain).collect();
    for s in &cascade.sections {
        let mut out = vec![0.0; buf.len()];
        for i in 0..buf.len() {
            let x0 = buf[i];
            let x1 = if i >= 1 { buf[i - 1] } else { 0.0 };
            let x2 = if i >= 2 { buf[i - 2] } else { 0.0 };
            let y1 = if i >= 1 { out[i - 1] } else { 0.0 };
            let y2 = if i >= 2 { out[i - 2] } else { 0.0 };
            out[i] = s.b0 * x0 + s.b1 * x1 + s.b2 * x2 - s.a1 * y1 - s.a2 * y2;
        }
        buf = out;
    }
    buf
}

#[test]
fn apply_filter_matches_difference_equation_oracle() {
    let spec = FilterSpec {
        order: 5,
        low_hz: 1.0,
        high_hz: 40.0,
        fs: 128.0,
    };
    let cascade = design_bandpass::<f64>(&spec).unwrap();

    // Impulse response.
    let mut impulse = vec![0.0_f64; 200];
    impulse[0] = 1.0;
    let got = apply_filter(&cascade, &TimeSeries::new(impulse.clone(), 128.0).unwrap()).unwrap();
    let want = filter_oracle(&cascade, &impulse);
    for (g, w) in got.samples().iter().zip(&want) {
        assert_relative_eq!(g, w, max_relative = 1e-9, epsilon = 1e-12);
    }

    // Arbitrary signal.
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let noise: Vec<f64> = (0..300).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let got = apply_filter(&cascade, &TimeSeries::new(noise.clone(), 128.0).unwrap()).unwrap();
    let want = filter_oracle(&cascade, &noise);
    for (g, w) in got.samples().iter().zip(&want) {
        assert_relative_eq!(g, w, max_relative = 1e-9, epsilon = 1e-12);
    }
}

#[test]
fn apply_filter_is_linear_and_preserves_length() {
    let spec = FilterSpec {
        order: 5,
        low_hz: 1.0,
        high_hz: 40.0,
        fs: 250.0,
    };
    let cascade = design_bandpass::<f64>(&spec).unwrap();

    let zeros = TimeSeries::new(vec![0.0_f64; 100], 250.0).unwrap();
    let out = apply_filter(&cascade, &zeros).unwrap();
    assert_eq!(out.len(), 100);
    assert!(out.samples().iter().all(|&v| v == 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let x: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let doubled: Vec<f64> = x.iter().map(|&v| 2.0 * v).collect();
    let y1 = apply_filter(&cascade, &TimeSeries::new(x, 250.0).unwrap()).unwrap();
    let y2 = apply_filter(&cascade, &TimeSeries::new(doubled, 250.0).unwrap()).unwrap();
    for (a, b) in y1.samples().iter().zip(y2.samples()) {
        assert_relative_eq!(2.0 * a, b, max_relative = 1e-12, epsilon = 1e-300);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frame_arithmetic_never_overruns(len in 2usize..4096, n in 2usize..256, h in 1usize..256) {
        let h = h.min(n);
        let plan = StftPlan::new(n, h, WindowKind::Rectangular).unwrap();
        match plan.frames_for_len(len) {
            Ok(frames) => {
                prop_assert!(len >= n);
                prop_assert_eq!(frames, (len - n) / h + 1);
                prop_assert!((frames - 1) * h + n - 1 < len);
                // One more frame would overrun.
                prop_assert!(frames * h + n - 1 >= len);
            }
            Err(_) => prop_assert!(len < n),
        }
    }

    #[test]
    fn stft_agrees_with_oracle_on_random_input(
        seed in 0u64..1000,
        n in 4usize..48,
        h_raw in 1usize..48,
        extra in 0usize..200,
    ) {
        let h = h_raw.min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = n + extra;
        let samples: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = TimeSeries::new(samples.clone(), 100.0).unwrap();
        let plan = StftPlan::new(n, h, WindowKind::Rectangular).unwrap();
        let s = stft(&x, &plan).unwrap();
        for m in 0..s.frames() {
            let frame = &samples[m * h..m * h + n];
            let want = dft_oracle(frame);
            let scale = want.iter().map(|c| c.norm()).fold(1.0_f64, f64::max);
            for (k, w) in want.iter().enumerate() {
                let g = s.at(m, k);
                let diff = Complex64::new(g.re - w.re, g.im - w.im).norm();
                prop_assert!(diff <= 1e-9 * scale);
            }
        }
    }
}
