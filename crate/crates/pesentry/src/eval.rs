//! Metrics, experiment runners and report rendering.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{build_dataset, DatasetSpec, FeatureCache, ManifestEntry, Task};
use crate::matrix::Matrix;
use crate::pipeline::{
    benchmark_predict_batch, bilayer_predict_batch, save_benchmark, save_bilayer, train_benchmark,
    train_bilayer, train_model, TrainedModel, TrainerSettings,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("label lengths differ: {truths} truths vs {predictions} predictions")]
    LengthMismatch { truths: usize, predictions: usize },
    #[error("positive class {0:?} is not in the class list")]
    UnknownPositiveClass(String),
    #[error("cannot evaluate an empty label set")]
    Empty,
}

/// Rows are true classes, columns predicted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_labels(classes: &[String], truths: &[usize], predictions: &[usize]) -> Self {
        let c = classes.len();
        let mut counts = vec![vec![0u64; c]; c];
        for (&t, &p) in truths.iter().zip(predictions) {
            counts[t][p] += 1;
        }
        Self {
            classes: classes.to_vec(),
            counts,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|row| row[j]).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for c in &self.classes {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (i, row) in self.counts.iter().enumerate() {
            out.push_str(&self.classes[i]);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub topology: String,
    pub model_family: String,
    pub dataset_digest: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub f1_macro: f64,
    pub per_class: Vec<ClassMetrics>,
    /// FN/(FN+TP) for the designated positive class; binary tasks only.
    pub fnr: Option<f64>,
    pub confusion: ConfusionMatrix,
    pub metadata: RunMetadata,
}

/// Accuracy, macro-F1, per-class precision/recall/F1 and, when a positive
/// class is named, the false-negative rate for it.
pub fn compute_metrics(
    truths: &[usize],
    predictions: &[usize],
    classes: &[String],
    positive_class: Option<&str>,
) -> Result<EvalReport, EvalError> {
    if truths.len() != predictions.len() {
        return Err(EvalError::LengthMismatch {
            truths: truths.len(),
            predictions: predictions.len(),
        });
    }
    if truths.is_empty() {
        return Err(EvalError::Empty);
    }
    let positive = match positive_class {
        Some(name) => Some(
            classes
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| EvalError::UnknownPositiveClass(name.to_string()))?,
        ),
        None => None,
    };
    let confusion = ConfusionMatrix::from_labels(classes, truths, predictions);
    let total = confusion.total() as f64;
    let accuracy = confusion.trace() as f64 / total;
    let per_class: Vec<ClassMetrics> = (0..classes.len())
        .map(|i| {
            let tp = confusion.counts[i][i] as f64;
            let predicted = confusion.col_sum(i) as f64;
            let actual = confusion.row_sum(i) as f64;
            let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
            let recall = if actual > 0.0 { tp / actual } else { 0.0 };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                class: classes[i].clone(),
                precision,
                recall,
                f1,
            }
        })
        .collect();
    let f1_macro = per_class.iter().map(|m| m.f1).sum::<f64>() / per_class.len() as f64;
    let fnr = positive.map(|i| {
        let actual = confusion.row_sum(i) as f64;
        if actual > 0.0 {
            1.0 - per_class[i].recall
        } else {
            0.0
        }
    });
    Ok(EvalReport {
        accuracy,
        f1_macro,
        per_class,
        fnr,
        confusion,
        metadata: RunMetadata::default(),
    })
}

/// Human-readable report in the shape of the result tables: a metrics
/// block followed by the confusion matrix with true-class rows.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "topology={} family={} seed={} dataset={}",
        report.metadata.topology,
        report.metadata.model_family,
        report.metadata.seed,
        report.metadata.dataset_digest
    );
    let _ = writeln!(out, "accuracy  {:.4}", report.accuracy);
    let _ = writeln!(out, "f1_macro  {:.4}", report.f1_macro);
    if let Some(fnr) = report.fnr {
        let _ = writeln!(out, "fnr       {:.6}", fnr);
    }
    let _ = writeln!(out, "\nclass metrics (precision / recall / f1):");
    for m in &report.per_class {
        let _ = writeln!(
            out,
            "  {:<16} {:.4}  {:.4}  {:.4}",
            m.class, m.precision, m.recall, m.f1
        );
    }
    let _ = writeln!(out, "\nconfusion matrix (rows = true class):");
    let width = report
        .confusion
        .classes
        .iter()
        .map(|c| c.len())
        .max()
        .unwrap_or(0)
        .max(8);
    let _ = write!(out, "  {:<w$}", "", w = width + 2);
    for c in &report.confusion.classes {
        let _ = write!(out, "{c:>w$}", w = width + 2);
    }
    out.push('\n');
    for (i, row) in report.confusion.counts.iter().enumerate() {
        let _ = write!(out, "  {:<w$}", report.confusion.classes[i], w = width + 2);
        for v in row {
            let _ = write!(out, "{v:>w$}", w = width + 2);
        }
        out.push('\n');
    }
    out
}

fn argmax_labels(model: &TrainedModel, features: &Matrix) -> Result<Vec<usize>, anyhow::Error> {
    let probs = model.predict_proba(features)?;
    Ok((0..probs.rows)
        .map(|i| {
            let row = probs.row(i);
            let mut best = 0;
            for (j, &p) in row.iter().enumerate().skip(1) {
                if p > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect())
}

fn write_report_files(dir: &Path, name: &str, report: &EvalReport) -> Result<(), anyhow::Error> {
    let suffix = if name.is_empty() {
        String::new()
    } else {
        format!("_{name}")
    };
    std::fs::write(
        dir.join(format!("report{suffix}.json")),
        serde_json::to_string_pretty(report)?,
    )?;
    std::fs::write(dir.join(format!("report{suffix}.txt")), render_report(report))?;
    std::fs::write(
        dir.join(format!("confusion{suffix}.csv")),
        report.confusion.to_csv(),
    )?;
    Ok(())
}

/// Train per the task's design, evaluate on the held-out test split only,
/// and write all artifacts under `run_dir`. `bilayer_eval` yields two
/// reports over the identical test split, cascade first.
pub fn run_experiment(
    entries: &[ManifestEntry],
    cache: &FeatureCache,
    spec: &DatasetSpec,
    settings: &TrainerSettings,
    run_dir: &Path,
) -> Result<Vec<EvalReport>, anyhow::Error> {
    std::fs::create_dir_all(run_dir)?;
    let dataset = build_dataset(entries, spec, cache)?;
    std::fs::write(
        run_dir.join("spec.json"),
        serde_json::to_string_pretty(spec)?,
    )?;
    let metadata = RunMetadata {
        topology: String::new(),
        model_family: settings.family.name().to_string(),
        dataset_digest: spec.digest(),
        seed: settings.seed,
    };

    let reports = match spec.task {
        Task::BilayerEval => {
            let bilayer = train_bilayer(&dataset.train.features, &dataset.train.labels, settings)?;
            let benchmark =
                train_benchmark(&dataset.train.features, &dataset.train.labels, settings)?;
            save_bilayer(&bilayer, &run_dir.join("bilayer"))?;
            save_benchmark(&benchmark, &run_dir.join("benchmark"))?;
            let bi_pred: Vec<usize> = bilayer_predict_batch(&bilayer, &dataset.test.features)?
                .iter()
                .map(|v| v.label.index())
                .collect();
            let bench_pred: Vec<usize> = benchmark_predict_batch(&benchmark, &dataset.test.features)?
                .iter()
                .map(|v| v.label.index())
                .collect();
            let mut bi_report =
                compute_metrics(&dataset.test.labels, &bi_pred, &dataset.class_names, None)?;
            bi_report.metadata = RunMetadata {
                topology: "bilayer".into(),
                ..metadata.clone()
            };
            let mut bench_report =
                compute_metrics(&dataset.test.labels, &bench_pred, &dataset.class_names, None)?;
            bench_report.metadata = RunMetadata {
                topology: "benchmark".into(),
                ..metadata
            };
            write_report_files(run_dir, "bilayer", &bi_report)?;
            write_report_files(run_dir, "benchmark", &bench_report)?;
            vec![bi_report, bench_report]
        }
        _ => {
            let (model, _) = train_model(
                &dataset.train.features,
                &dataset.train.labels,
                dataset.class_names.clone(),
                settings,
                Some((&dataset.val.features, &dataset.val.labels)),
            )?;
            std::fs::write(run_dir.join("model.json"), model.to_json())?;
            let predictions = argmax_labels(&model, &dataset.test.features)?;
            let mut report = compute_metrics(
                &dataset.test.labels,
                &predictions,
                &dataset.class_names,
                spec.task.positive_class(),
            )?;
            report.metadata = RunMetadata {
                topology: "flat".into(),
                ..metadata
            };
            write_report_files(run_dir, "", &report)?;
            vec![report]
        }
    };
    Ok(reports)
}
