//! Welch's t-test and Cohen's d, on top of a self-contained
//! t-distribution CDF (regularized incomplete beta via Lentz's
//! continued fraction).

use serde::{Deserialize, Serialize};

use super::{EvalError, ScoreSet};

/// Lanczos coefficients, g = 7, 9 terms.
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta, modified Lentz method.
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const FPMIN: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn betai(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let bt =
        (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        bt * betacf(a, b, x) / a
    } else {
        1.0 - bt * betacf(b, a, 1.0 - x) / b
    }
}

/// P(T <= t) for Student's t with `df` degrees of freedom.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    if t == 0.0 {
        return 0.5;
    }
    let ib = betai(0.5 * df, 0.5, df / (df + t * t));
    if t > 0.0 {
        1.0 - 0.5 * ib
    } else {
        0.5 * ib
    }
}

/// Two-sided survival probability, evaluated without the cancellation
/// that `2 * (1 - t_cdf(|t|))` would hit for large |t|.
fn two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        betai(0.5 * df, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    /// Welch-Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// Pooled-SD convention, sign follows mean(a) - mean(b).
    pub cohen_d: f64,
    /// 95% interval for d via the large-sample normal approximation.
    pub ci95_d: (f64, f64),
}

/// Welch's unequal-variance t-test between two score sets.
pub fn welch_t(a: &ScoreSet, b: &ScoreSet) -> Result<TTestResult, EvalError> {
    let (na, nb) = (a.len(), b.len());
    if na < 2 || nb < 2 {
        return Err(EvalError::TooFewScores(na.min(nb)));
    }
    let (ma, va) = (a.mean(), a.variance());
    let (mb, vb) = (b.mean(), b.variance());
    if va == 0.0 && vb == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    let (fa, fb) = (na as f64, nb as f64);
    let sea = va / fa;
    let seb = vb / fb;
    let se2 = sea + seb;
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sea * sea / (fa - 1.0) + seb * seb / (fb - 1.0));
    let d = (ma - mb) / ((va + vb) / 2.0).sqrt();
    let se_d = ((fa + fb) / (fa * fb) + d * d / (2.0 * (fa + fb - 2.0))).sqrt();
    Ok(TTestResult {
        t,
        df,
        p: two_sided_p(t, df),
        cohen_d: d,
        ci95_d: (d - 1.96 * se_d, d + 1.96 * se_d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        // Gamma(0.5) = sqrt(pi), Gamma(1) = 1, Gamma(5) = 24
        assert!((ln_gamma(0.5) - 0.572_364_942_924_700_1).abs() < 1e-12);
        assert!(ln_gamma(1.0).abs() < 1e-12);
        assert!((ln_gamma(5.0) - 24.0_f64.ln()).abs() < 1e-12);
        // reflection path
        assert!((ln_gamma(0.25) - 1.288_022_524_698_077_3).abs() < 1e-10);
    }

    #[test]
    fn incomplete_beta_endpoints_and_symmetry() {
        assert_eq!(betai(2.0, 3.0, 0.0), 0.0);
        assert_eq!(betai(2.0, 3.0, 1.0), 1.0);
        // I_x(a,b) = 1 - I_{1-x}(b,a)
        for &(a, b, x) in &[(2.0, 3.0, 0.3), (0.5, 0.5, 0.7), (12.0, 0.5, 0.9)] {
            let lhs = betai(a, b, x);
            let rhs = 1.0 - betai(b, a, 1.0 - x);
            assert!((lhs - rhs).abs() < 1e-12, "a={a} b={b} x={x}");
        }
        // I_x(1,1) = x
        assert!((betai(1.0, 1.0, 0.42) - 0.42).abs() < 1e-12);
    }

    #[test]
    fn t_cdf_matches_table_values() {
        let table = [
            (1.0, [0.5, 0.750_000_000_000_000_2, 0.852_416_382_349_566_7, 0.897_583_617_650_433_3]),
            (5.0, [0.5, 0.818_391_266_175_438_7, 0.949_030_260_585_070_9, 0.984_950_376_051_268_8]),
            (10.0, [0.5, 0.829_553_433_848_97, 0.963_305_982_614_629_7, 0.993_328_172_488_715_2]),
            (30.0, [0.5, 0.837_345_692_286_985_1, 0.972_687_477_518_508_5, 0.997_305_017_967_174]),
        ];
        for (df, row) in table {
            for (t, want) in row.iter().enumerate() {
                let got = t_cdf(t as f64, df);
                assert!(
                    (got - want).abs() < 1e-9,
                    "df={df} t={t}: got {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn t_cdf_is_symmetric() {
        for &df in &[1.0, 4.0, 17.5, 100.0] {
            for &t in &[0.1, 0.7, 1.5, 3.0, 8.0] {
                let hi = t_cdf(t, df);
                let lo = t_cdf(-t, df);
                assert!((hi + lo - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn welch_reproduces_reference_statistics() {
        // two summary-statistic pairs with known closed-form results
        let a = ScoreSet::with_stats(95.65, 0.38, 25).unwrap();
        let b = ScoreSet::with_stats(96.82, 0.18, 25).unwrap();
        let r = welch_t(&a, &b).unwrap();
        assert!((r.t - -13.912_806_204_018_803).abs() < 1e-9);
        assert!((r.df - 34.253_853_684_195_15).abs() < 1e-9);
        assert!((r.p / 1.178_293_257_101_843e-15 - 1.0).abs() < 1e-6);
        assert!((r.cohen_d - -3.935_135_844_878_385_7).abs() < 1e-9);
        assert!((r.ci95_d.0 - -4.897_943_122_032_626).abs() < 1e-9);
        assert!((r.ci95_d.1 - -2.972_328_567_724_145).abs() < 1e-9);

        let c = ScoreSet::with_stats(95.65, 0.37, 25).unwrap();
        let d = ScoreSet::with_stats(97.68, 0.13, 25).unwrap();
        let r = welch_t(&c, &d).unwrap();
        assert!((r.t - -25.881_406_533_672_955).abs() < 1e-9);
        assert!((r.df - 29.836_547_850_920_947).abs() < 1e-9);
        assert!((r.p / 5.363_692_563_979_226e-22 - 1.0).abs() < 1e-6);
        assert!((r.cohen_d - -7.320_367_226_642_386).abs() < 1e-9);
    }

    #[test]
    fn welch_is_antisymmetric() {
        let a = ScoreSet::new(vec![81.0, 84.5, 79.25, 88.0, 83.125]).unwrap();
        let b = ScoreSet::new(vec![90.0, 87.5, 92.75, 89.0]).unwrap();
        let ab = welch_t(&a, &b).unwrap();
        let ba = welch_t(&b, &a).unwrap();
        assert!((ab.t + ba.t).abs() < 1e-12);
        assert!((ab.cohen_d + ba.cohen_d).abs() < 1e-12);
        assert!((ab.df - ba.df).abs() < 1e-12);
        assert!((ab.p - ba.p).abs() < 1e-12);
        assert!((ab.ci95_d.0 + ba.ci95_d.1).abs() < 1e-12);
    }

    #[test]
    fn welch_degenerate_inputs() {
        let a = ScoreSet::new(vec![80.0, 81.0, 82.0]).unwrap();
        let same = welch_t(&a, &a).unwrap();
        assert_eq!(same.t, 0.0);
        assert_eq!(same.p, 1.0);
        assert_eq!(same.cohen_d, 0.0);

        let flat = ScoreSet::new(vec![90.0, 90.0, 90.0]).unwrap();
        assert!(matches!(
            welch_t(&flat, &flat),
            Err(EvalError::ZeroVariance)
        ));
        // one flat set is fine
        assert!(welch_t(&a, &flat).is_ok());

        let short = ScoreSet::new(vec![50.0]).unwrap();
        assert!(matches!(
            welch_t(&short, &a),
            Err(EvalError::TooFewScores(1))
        ));
    }
}
