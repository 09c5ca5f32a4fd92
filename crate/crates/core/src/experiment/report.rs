//! Experiment report and its text, CSV and JSON renderings.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::classify::ClassifierKind;
use crate::error::{Error, Result};
use crate::features::FeatureMethod;
use crate::metrics::Confusion;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub protocol: Protocol,
    /// Separation quality per block length, ascending.
    pub sir: Vec<SirRow>,
    /// One entry per (block length, method, classifier).
    pub cells: Vec<Cell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub trials: usize,
    pub train_trials: Vec<usize>,
    pub test_trials: Vec<usize>,
    pub failed_trials: Vec<FailedTrial>,
    pub trial_seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedTrial {
    pub trial: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SirRow {
    pub block_length: usize,
    pub mean_sir_db: f64,
    pub converged_fraction: f64,
    pub mean_iterations: f64,
    /// Mean aligned SIR of each successful trial.
    pub trial_sir_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub block_length: usize,
    pub method: FeatureMethod,
    pub classifier: ClassifierKind,
    /// Percentage of correctly classified test channels; absent when the cell could not be evaluated.
    pub accuracy: Option<f64>,
    pub confusion: Confusion,
    /// Fraction of test trials in which every drone channel was detected.
    pub drone_trials_detected: Option<f64>,
    pub error: Option<String>,
}

/// Wall-clock seconds per stage, summed over trials.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub synthesis_s: f64,
    pub separation_s: f64,
    pub features_s: f64,
    pub classification_s: f64,
}

impl ExperimentReport {
    pub fn cell(
        &self,
        block_length: usize,
        method: FeatureMethod,
        classifier: ClassifierKind,
    ) -> Option<&Cell> {
        self.cells.iter().find(|c| {
            c.block_length == block_length && c.method == method && c.classifier == classifier
        })
    }

    pub fn sir_row(&self, block_length: usize) -> Option<&SirRow> {
        self.sir.iter().find(|r| r.block_length == block_length)
    }
}

/// Reference accuracies (%) for the default protocol: block length, then
/// (SVM, KNN) for PSD, RMS-PSD and MFCC.
pub const REFERENCE_TABLE: [(usize, [(f64, f64); 3]); 4] = [
    (10000, [(92.57, 97.9), (96.1, 99.1), (88.2, 97.4)]),
    (7000, [(91.0, 97.2), (94.9, 98.3), (87.6, 97.0)]),
    (4000, [(90.3, 96.7), (94.1, 98.0), (87.0, 96.7)]),
    (1000, [(89.7, 96.0), (93.3, 97.1), (86.8, 95.3)]),
];

pub fn reference_accuracy(
    block_length: usize,
    method: FeatureMethod,
    classifier: ClassifierKind,
) -> Option<f64> {
    let (_, row) = REFERENCE_TABLE.iter().find(|(l, _)| *l == block_length)?;
    let m = FeatureMethod::ALL.iter().position(|&x| x == method)?;
    Some(match classifier {
        ClassifierKind::Svm => row[m].0,
        ClassifierKind::Knn => row[m].1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Text, ReportFormat::Csv, ReportFormat::Json];

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Text => "txt",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::param(format!(
                "unknown report format '{other}' (expected text, csv or json)"
            ))),
        }
    }
}

pub fn render(report: &ExperimentReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Text => Ok(render_text(report)),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.1}"))
}

fn render_text(r: &ExperimentReport) -> String {
    let cfg = &r.config;
    let kinds = &cfg.classifiers;
    let mut out = String::new();
    let _ = writeln!(out, "Drone detection accuracy (%) on separated channels");
    let _ = writeln!(out);
    let mut header = format!("{:>8}  {:<8}", "L", "Method");
    for k in kinds {
        let _ = write!(header, "  {:>7}", k.title());
    }
    for k in kinds {
        let _ = write!(header, "  {:>9}", format!("ref {}", k.title()));
    }
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "{}", "-".repeat(header.len()));
    for sir in r.sir.iter().rev() {
        let l = sir.block_length;
        for &m in &cfg.methods {
            let mut line = format!("{l:>8}  {:<8}", m.title());
            for &k in kinds {
                let _ = write!(
                    line,
                    "  {:>7}",
                    pct(r.cell(l, m, k).and_then(|c| c.accuracy))
                );
            }
            for &k in kinds {
                let _ = write!(line, "  {:>9}", pct(reference_accuracy(l, m, k)));
            }
            let _ = writeln!(out, "{line}");
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Separation quality");
    let _ = writeln!(
        out,
        "{:>8}  {:>12}  {:>10}  {:>10}",
        "L", "mean SIR dB", "converged", "iterations"
    );
    for s in r.sir.iter().rev() {
        let _ = writeln!(
            out,
            "{:>8}  {:>12.2}  {:>9.0}%  {:>10.1}",
            s.block_length,
            s.mean_sir_db,
            100.0 * s.converged_fraction,
            s.mean_iterations
        );
    }
    let errors: Vec<&super::Cell> = r.cells.iter().filter(|c| c.error.is_some()).collect();
    if !errors.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "Cells not evaluated");
        for c in errors {
            let _ = writeln!(
                out,
                "  L={} {} {}: {}",
                c.block_length,
                c.method.title(),
                c.classifier.title(),
                c.error.as_deref().unwrap_or_default()
            );
        }
    }
    let p = &r.protocol;
    let _ = writeln!(out);
    let _ = writeln!(out, "Protocol");
    let _ = writeln!(
        out,
        "  seed {}, {} trials, {} failed",
        cfg.seed,
        p.trials,
        p.failed_trials.len()
    );
    let _ = writeln!(
        out,
        "  split by trial: {} training, {} test (train fraction {})",
        p.train_trials.len(),
        p.test_trials.len(),
        cfg.train_fraction
    );
    let labels: Vec<&str> = cfg.source_specs.iter().map(|s| s.label.name()).collect();
    let _ = writeln!(out, "  sources: {}", labels.join(", "));
    let _ = writeln!(
        out,
        "  sample rate {} Hz, {:?} mixing, fundamental jitter {}",
        cfg.sample_rate, cfg.mixing, cfg.fundamental_jitter
    );
    let _ = writeln!(
        out,
        "  FastICA {} contrast, tolerance {:e}, at most {} iterations; SVM C = {}; KNN k = {}",
        cfg.fastica.contrast,
        cfg.fastica.tolerance,
        cfg.fastica.max_iterations,
        cfg.classifier.svm.c,
        cfg.classifier.k
    );
    if let Some(t) = &r.timing {
        let _ = writeln!(
            out,
            "  time (s): synthesis {:.3}, separation {:.3}, features {:.3}, classification {:.3}",
            t.synthesis_s, t.separation_s, t.features_s, t.classification_s
        );
    }
    out
}

fn render_csv(r: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "block_length",
        "method",
        "classifier",
        "accuracy",
        "reference_accuracy",
        "true_positive",
        "false_positive",
        "true_negative",
        "false_negative",
        "drone_trials_detected",
        "mean_sir_db",
        "converged_fraction",
        "seed",
        "trials",
        "train_trials",
        "test_trials",
        "failed_trials",
        "error",
    ])?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for c in &r.cells {
        let sir = r.sir_row(c.block_length);
        w.write_record([
            c.block_length.to_string(),
            c.method.name().to_string(),
            c.classifier.to_string(),
            opt(c.accuracy),
            opt(reference_accuracy(c.block_length, c.method, c.classifier)),
            c.confusion.true_positive.to_string(),
            c.confusion.false_positive.to_string(),
            c.confusion.true_negative.to_string(),
            c.confusion.false_negative.to_string(),
            opt(c.drone_trials_detected),
            opt(sir.map(|s| s.mean_sir_db)),
            opt(sir.map(|s| s.converged_fraction)),
            r.config.seed.to_string(),
            r.protocol.trials.to_string(),
            r.protocol.train_trials.len().to_string(),
            r.protocol.test_trials.len().to_string(),
            r.protocol.failed_trials.len().to_string(),
            c.error.clone().unwrap_or_default(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Experiment(format!("CSV buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Experiment(format!("CSV encoding: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_lookup() {
        assert_eq!(
            reference_accuracy(10000, FeatureMethod::RmsPsd9, ClassifierKind::Knn),
            Some(99.1)
        );
        assert_eq!(
            reference_accuracy(1000, FeatureMethod::Psd9, ClassifierKind::Svm),
            Some(89.7)
        );
        assert_eq!(
            reference_accuracy(2000, FeatureMethod::Psd9, ClassifierKind::Svm),
            None
        );
    }

    #[test]
    fn format_names() {
        for f in ReportFormat::ALL {
            assert_eq!(f.extension().parse::<ReportFormat>().unwrap(), f);
        }
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
