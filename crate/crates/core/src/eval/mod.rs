//! Repeated K-fold evaluation: fold planning, confusion matrices with
//! precision/recall/F1, score aggregation, and Welch-t comparison of two
//! runs.

pub mod experiment;
pub mod report;
pub mod ttest;

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::derive_seed;
use crate::nn::NnError;
use crate::signal::SignalError;
pub use experiment::{
    run_experiment, Bandpass, ExperimentSetup, FoldSpec, RunReport, RunSummary, TrialResult,
};
pub use report::{compare, compare_csv, read_report, write_report, Comparison};
pub use ttest::{betai, ln_gamma, t_cdf, welch_t, TTestResult};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("bad fold plan: {0}")]
    BadFolds(String),
    #[error("confusion matrix needs at least 2 classes, got {0}")]
    BadClassCount(usize),
    #[error("label {label} out of range for {classes} classes")]
    LabelRange { label: u8, classes: usize },
    #[error("actual and predicted lengths differ: {actual} vs {predicted}")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("score {0} is not a percentage in [0, 100]")]
    ScoreRange(f64),
    #[error("need at least 2 scores per set, got {0}")]
    TooFewScores(usize),
    #[error("both score sets have zero variance")]
    ZeroVariance,
    #[error("reports are not comparable: {0}")]
    StructureMismatch(String),
    #[error("malformed report: {0}")]
    MalformedReport(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("report encoding: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv encoding: {0}")]
    Csv(#[from] csv::Error),
}

/// Fold assignments for repeated K-fold cross-validation.
///
/// `assignments[r][f]` holds the test-instance indices of fold `f` in
/// repeat `r`; the remaining folds of that repeat form the training set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    pub instance_count: usize,
    pub assignments: Vec<Vec<Vec<usize>>>,
}

impl FoldPlan {
    pub fn test_fold(&self, repeat: usize, fold: usize) -> &[usize] {
        &self.assignments[repeat][fold]
    }

    /// All indices outside the given fold, in fold order.
    pub fn train_indices(&self, repeat: usize, fold: usize) -> Vec<usize> {
        self.assignments[repeat]
            .iter()
            .enumerate()
            .filter(|(f, _)| *f != fold)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect()
    }
}

/// True when there are at least `need` distinct permutations of `n` items.
fn enough_permutations(n: usize, need: usize) -> bool {
    let mut count: u128 = 1;
    for i in 0..n {
        count = count.saturating_mul((n - i) as u128);
        if count >= need as u128 {
            return true;
        }
    }
    count >= need as u128
}

/// Plans `repeats` independent K-fold splits of `n` instances.
///
/// Per repeat the folds partition a fresh shuffle of `0..n` with sizes
/// differing by at most one; repeats are guaranteed to use distinct
/// permutations. Deterministic for a given seed.
pub fn make_folds(n: usize, k: usize, repeats: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    if k < 2 {
        return Err(EvalError::BadFolds(format!("k must be at least 2, got {k}")));
    }
    if repeats == 0 {
        return Err(EvalError::BadFolds("repeats must be positive".into()));
    }
    if n < k {
        return Err(EvalError::BadFolds(format!(
            "need at least k = {k} instances, got {n}"
        )));
    }
    if !enough_permutations(n, repeats) {
        return Err(EvalError::BadFolds(format!(
            "{n} instances admit fewer than {repeats} distinct permutations"
        )));
    }

    let mut seen: HashSet<Vec<usize>> = HashSet::with_capacity(repeats);
    let mut assignments = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let mut attempt = 0u64;
        let perm = loop {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(seed, &[r as u64, attempt]));
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(&mut rng);
            if seen.insert(p.clone()) {
                break p;
            }
            attempt += 1;
        };

        let base = n / k;
        let rem = n % k;
        let mut folds = Vec::with_capacity(k);
        let mut start = 0;
        for f in 0..k {
            let size = base + usize::from(f < rem);
            folds.push(perm[start..start + size].to_vec());
            start += size;
        }
        assignments.push(folds);
    }
    Ok(FoldPlan {
        k,
        repeats,
        seed,
        instance_count: n,
        assignments,
    })
}

/// F1 averaging across classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    Macro,
    Micro,
    Weighted,
}

impl std::str::FromStr for Averaging {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "macro" => Ok(Averaging::Macro),
            "micro" => Ok(Averaging::Micro),
            "weighted" => Ok(Averaging::Weighted),
            other => Err(format!(
                "unknown averaging '{other}' (expected macro, micro, or weighted)"
            )),
        }
    }
}

/// Class-by-class prediction counts; rows are actual labels, columns are
/// predicted labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Result<Self, EvalError> {
        if classes < 2 {
            return Err(EvalError::BadClassCount(classes));
        }
        Ok(Self {
            classes,
            counts: vec![0; classes * classes],
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn record(&mut self, actual: u8, predicted: u8) -> Result<(), EvalError> {
        for label in [actual, predicted] {
            if label as usize >= self.classes {
                return Err(EvalError::LabelRange {
                    label,
                    classes: self.classes,
                });
            }
        }
        self.counts[actual as usize * self.classes + predicted as usize] += 1;
        Ok(())
    }

    pub fn count(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.classes + predicted]
    }

    /// One row of counts for the given actual class.
    pub fn row(&self, actual: usize) -> &[u64] {
        &self.counts[actual * self.classes..(actual + 1) * self.classes]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Instances whose actual label is `c` (row sum).
    pub fn support(&self, c: usize) -> u64 {
        self.row(c).iter().sum()
    }

    /// Instances predicted as `c` (column sum).
    pub fn predicted_total(&self, c: usize) -> u64 {
        (0..self.classes).map(|a| self.count(a, c)).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let trace: u64 = (0..self.classes).map(|c| self.count(c, c)).sum();
        trace as f64 / total as f64
    }

    /// Correct predictions of `c` over all predictions of `c`; 0 when the
    /// class was never predicted.
    pub fn precision(&self, c: usize) -> f64 {
        ratio(self.count(c, c), self.predicted_total(c))
    }

    /// Correct predictions of `c` over all actual `c`; 0 when the class
    /// never occurs.
    pub fn recall(&self, c: usize) -> f64 {
        ratio(self.count(c, c), self.support(c))
    }

    /// Per-class F1 in [0, 1]; 0 whenever precision + recall is 0.
    pub fn f1_class(&self, c: usize) -> f64 {
        let p = self.precision(c);
        let r = self.recall(c);
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Averaged F1 as a percentage.
    pub fn f1(&self, averaging: Averaging) -> f64 {
        let score = match averaging {
            Averaging::Macro => {
                (0..self.classes).map(|c| self.f1_class(c)).sum::<f64>() / self.classes as f64
            }
            // single-label micro-F1 collapses to accuracy
            Averaging::Micro => self.accuracy(),
            Averaging::Weighted => {
                let total = self.total();
                if total == 0 {
                    0.0
                } else {
                    (0..self.classes)
                        .map(|c| self.f1_class(c) * self.support(c) as f64)
                        .sum::<f64>()
                        / total as f64
                }
            }
        };
        100.0 * score
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Builds a confusion matrix from parallel label slices.
pub fn confusion(
    actual: &[u8],
    predicted: &[u8],
    classes: usize,
) -> Result<ConfusionMatrix, EvalError> {
    if actual.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    let mut m = ConfusionMatrix::new(classes)?;
    for (&a, &p) in actual.iter().zip(predicted) {
        m.record(a, p)?;
    }
    Ok(m)
}

/// A set of per-trial scores, stored as percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    values: Vec<f64>,
}

impl ScoreSet {
    pub fn new(values: Vec<f64>) -> Result<Self, EvalError> {
        for &v in &values {
            if !v.is_finite() || !(0.0..=100.0).contains(&v) {
                return Err(EvalError::ScoreRange(v));
            }
        }
        Ok(Self { values })
    }

    /// A set with exactly the requested sample mean and SD: symmetric
    /// pairs around the mean, plus the mean itself when `n` is odd.
    pub fn with_stats(mean: f64, sd: f64, n: usize) -> Result<Self, EvalError> {
        if n < 2 {
            return Err(EvalError::TooFewScores(n));
        }
        let pairs = n / 2;
        let c = sd * ((n - 1) as f64 / (2 * pairs) as f64).sqrt();
        let mut values = Vec::with_capacity(n);
        for _ in 0..pairs {
            values.push(mean + c);
            values.push(mean - c);
        }
        if n % 2 == 1 {
            values.push(mean);
        }
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    /// Sample variance (n - 1 denominator); 0 for fewer than two values.
    pub fn variance(&self) -> f64 {
        sample_variance(&self.values)
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub(crate) fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}
