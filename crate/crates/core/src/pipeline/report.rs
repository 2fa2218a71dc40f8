use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::ConfusionMatrix;
use crate::error::{Error, Result};
use crate::forest::AxisProvenance;

use super::formats::csv_error;

/// Scores of one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    /// Digit of each class index.
    pub labels: Vec<usize>,
    pub samples: usize,
    /// `[output][target]`
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    pub precision: Vec<Option<f64>>,
    pub recall: Vec<Option<f64>>,
}

impl EvalReport {
    pub fn new(split: &str, labels: &[usize], m: &ConfusionMatrix) -> Self {
        EvalReport {
            split: split.to_string(),
            labels: labels.to_vec(),
            samples: m.total(),
            confusion: m.counts.clone(),
            accuracy: m.accuracy(),
            precision: (0..m.n()).map(|i| m.precision(i)).collect(),
            recall: (0..m.n()).map(|i| m.recall(i)).collect(),
        }
    }
}

/// Everything a pipeline run produced except wall-clock timing, which lives
/// in its own file so reruns give identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: String,
    pub labels: Vec<usize>,
    pub axes_generated: usize,
    pub exhausted: bool,
    pub feature_dim: usize,
    pub axes: Vec<AxisProvenance>,
    pub train: EvalReport,
    pub test: EvalReport,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// `(stage, seconds)` in execution order.
    pub stages: Vec<(String, f64)>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::format("json", e.to_string()))?;
    text.push('\n');
    super::formats::write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = super::formats::read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format("json", e.to_string()))
}

fn fraction(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| x.to_string())
}

/// Counts with precision in the last column and recall plus accuracy in the
/// last row.
pub fn write_confusion_csv(path: &Path, labels: &[usize], m: &ConfusionMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["output\\target".to_string()];
    header.extend(labels.iter().map(|l| l.to_string()));
    header.push("precision".into());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (i, row) in m.counts.iter().enumerate() {
        let mut rec = vec![labels[i].to_string()];
        rec.extend(row.iter().map(|c| c.to_string()));
        rec.push(fraction(m.precision(i)));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    let mut last = vec!["recall".to_string()];
    last.extend((0..m.n()).map(|j| fraction(m.recall(j))));
    last.push(m.accuracy().to_string());
    w.write_record(&last).map_err(|e| csv_error(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Counts from a confusion CSV written by [`write_confusion_csv`].
pub fn read_confusion_csv(path: &Path) -> Result<ConfusionMatrix> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut counts = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if rec.get(0) == Some("recall") {
            break;
        }
        let n = rec.len().saturating_sub(2);
        let row = (1..=n)
            .map(|k| {
                rec[k]
                    .parse()
                    .map_err(|_| Error::format("confusion csv", format!("bad count `{}`", &rec[k])))
            })
            .collect::<Result<Vec<usize>>>()?;
        counts.push(row);
    }
    Ok(ConfusionMatrix { counts })
}

pub const HISTOGRAM_BINS: usize = 50;

/// Per-class counts of one feature coordinate over equal-width bins.
pub fn write_histogram_csv(path: &Path, labels: &[usize], values: &[f64], classes: &[usize]) -> Result<()> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / HISTOGRAM_BINS as f64 } else { 1.0 };
    let mut counts = vec![vec![0usize; labels.len()]; HISTOGRAM_BINS];
    for (&v, &c) in values.iter().zip(classes) {
        let b = (((v - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
        counts[b][c] += 1;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["bin_lo".to_string(), "bin_hi".to_string()];
    header.extend(labels.iter().map(|l| l.to_string()));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (b, row) in counts.iter().enumerate() {
        let mut rec = vec![
            (lo + b as f64 * width).to_string(),
            (lo + (b + 1) as f64 * width).to_string(),
        ];
        rec.extend(row.iter().map(|c| c.to_string()));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
