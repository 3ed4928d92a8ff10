//! Run-report files and run-to-run comparison.
//!
//! A report directory holds `report.json` (config echo + per-trial
//! results), `scores.csv` (one row per trial, full precision), and one
//! `confusion_NN.csv` per trial with recall and precision margins.

use std::fs;
use std::path::{Path, PathBuf};

use super::ttest::{welch_t, TTestResult};
use super::{Averaging, ConfusionMatrix, EvalError, RunReport};
use crate::corpus::io::write_atomic;

pub const REPORT_JSON: &str = "report.json";
pub const SCORES_CSV: &str = "scores.csv";

/// Writes `report.json`, `scores.csv`, and per-trial confusion CSVs into
/// `dir`, creating it if needed. All files are written atomically.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<(), EvalError> {
    fs::create_dir_all(dir)?;
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');
    write_atomic(&dir.join(REPORT_JSON), &json)?;
    write_atomic(&dir.join(SCORES_CSV), &scores_csv(report)?)?;
    for t in &report.trials {
        let name = format!("confusion_{:02}.csv", t.trial);
        write_atomic(&dir.join(name), &confusion_csv(&t.confusion))?;
    }
    Ok(())
}

fn scores_csv(report: &RunReport) -> Result<Vec<u8>, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["trial", "repeat", "fold", "f1_macro", "f1_micro", "accuracy"])?;
    for t in &report.trials {
        w.write_record([
            t.trial.to_string(),
            t.repeat.to_string(),
            t.fold.to_string(),
            t.f1_macro.to_string(),
            t.f1_micro.to_string(),
            t.accuracy.to_string(),
        ])?;
    }
    w.into_inner()
        .map_err(|e| EvalError::Io(e.into_error()))
}

/// Counts with margins: rows are actual classes ending in that class's
/// recall; the final row carries per-column precision and, in the
/// corner, overall accuracy.
fn confusion_csv(m: &ConfusionMatrix) -> Vec<u8> {
    let c = m.classes();
    let mut out = String::new();
    out.push_str("actual\\predicted");
    for p in 0..c {
        out.push_str(&format!(",pred_{p}"));
    }
    out.push_str(",recall\n");
    for a in 0..c {
        out.push_str(&format!("actual_{a}"));
        for p in 0..c {
            out.push_str(&format!(",{}", m.count(a, p)));
        }
        out.push_str(&format!(",{}\n", m.recall(a)));
    }
    out.push_str("precision");
    for p in 0..c {
        out.push_str(&format!(",{}", m.precision(p)));
    }
    out.push_str(&format!(",{}\n", m.accuracy()));
    out.into_bytes()
}

/// Reads a report from a directory (expecting `report.json` inside) or
/// from a JSON file directly, and cross-checks the stored scores and
/// summary against the raw confusion counts.
pub fn read_report(path: &Path) -> Result<RunReport, EvalError> {
    let file: PathBuf = if path.is_dir() {
        path.join(REPORT_JSON)
    } else {
        path.to_path_buf()
    };
    let bytes = fs::read(&file)?;
    let report: RunReport = serde_json::from_slice(&bytes)?;
    if report.format_version != 1 {
        return Err(EvalError::MalformedReport(format!(
            "unsupported format version {}",
            report.format_version
        )));
    }
    if report.trials.is_empty() {
        return Err(EvalError::MalformedReport("no trials".into()));
    }
    if report.trials.len() != report.setup.folds.k * report.setup.folds.repeats {
        return Err(EvalError::MalformedReport(format!(
            "{} trials but folds declare {}x{}",
            report.trials.len(),
            report.setup.folds.k,
            report.setup.folds.repeats
        )));
    }
    for t in &report.trials {
        let checks = [
            (t.f1_macro, t.confusion.f1(Averaging::Macro), "f1_macro"),
            (t.f1_micro, t.confusion.f1(Averaging::Micro), "f1_micro"),
            (t.accuracy, t.confusion.accuracy(), "accuracy"),
        ];
        for (stored, raw, what) in checks {
            if (stored - raw).abs() > 1e-9 {
                return Err(EvalError::MalformedReport(format!(
                    "trial {}: stored {what} {stored} disagrees with confusion counts ({raw})",
                    t.trial
                )));
            }
        }
    }
    Ok(report)
}

/// Welch comparison of two runs on their macro-F1 score sets.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Comparison {
    pub metric: String,
    pub a_name: String,
    pub b_name: String,
    pub a_mean: f64,
    pub a_sd: f64,
    pub b_mean: f64,
    pub b_sd: f64,
    pub test: TTestResult,
    pub notes: Vec<String>,
}

pub fn compare(a: &RunReport, b: &RunReport) -> Result<Comparison, EvalError> {
    if a.setup.folds != b.setup.folds || a.trials.len() != b.trials.len() {
        return Err(EvalError::StructureMismatch(format!(
            "trial structure differs: {}x{} ({} trials) vs {}x{} ({} trials)",
            a.setup.folds.repeats,
            a.setup.folds.k,
            a.trials.len(),
            b.setup.folds.repeats,
            b.setup.folds.k,
            b.trials.len()
        )));
    }
    let sa = a.scores()?;
    let sb = b.scores()?;
    let test = welch_t(&sa, &sb)?;
    Ok(Comparison {
        metric: "f1_macro".into(),
        a_name: a.dataset_name.clone(),
        b_name: b.dataset_name.clone(),
        a_mean: sa.mean(),
        a_sd: sa.sd(),
        b_mean: sb.mean(),
        b_sd: sb.sd(),
        test,
        notes: vec!["Cohen's d uses the pooled-SD convention.".into()],
    })
}

fn format_p(p: f64) -> String {
    if p < 1e-4 {
        format!("{p:.3e}")
    } else {
        format!("{p:.4}")
    }
}

impl Comparison {
    /// Rendered summary table, percentages at two decimal places.
    pub fn table(&self) -> String {
        let width = self.a_name.len().max(self.b_name.len()).max(3);
        let mut out = String::new();
        out.push_str(&format!(
            "{:<width$}  mean F1 (%)     SD\n",
            "run",
            width = width
        ));
        for (name, mean, sd) in [
            (&self.a_name, self.a_mean, self.a_sd),
            (&self.b_name, self.b_mean, self.b_sd),
        ] {
            out.push_str(&format!(
                "{:<width$}  {:>11.2}  {:>5.2}\n",
                name,
                mean,
                sd,
                width = width
            ));
        }
        out.push_str(&format!(
            "Welch t = {:.2}, df = {:.2}, p = {}\n",
            self.test.t,
            self.test.df,
            format_p(self.test.p)
        ));
        out.push_str(&format!(
            "Cohen's d = {:.2} (95% CI {:.2} to {:.2})\n",
            self.test.cohen_d, self.test.ci95_d.0, self.test.ci95_d.1
        ));
        for note in &self.notes {
            out.push_str(&format!("note: {note}\n"));
        }
        out
    }
}

/// Per-trial score series for the two runs, one row per trial.
pub fn compare_csv(a: &RunReport, b: &RunReport) -> Result<Vec<u8>, EvalError> {
    if a.trials.len() != b.trials.len() {
        return Err(EvalError::StructureMismatch(format!(
            "trial counts differ: {} vs {}",
            a.trials.len(),
            b.trials.len()
        )));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["trial", "repeat", "fold", "f1_a", "f1_b"])?;
    for (ta, tb) in a.trials.iter().zip(&b.trials) {
        w.write_record([
            ta.trial.to_string(),
            ta.repeat.to_string(),
            ta.fold.to_string(),
            ta.f1_macro.to_string(),
            tb.f1_macro.to_string(),
        ])?;
    }
    w.into_inner()
        .map_err(|e| EvalError::Io(e.into_error()))
}
