use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::task::POSITIVE;
use crate::{Error, Result};

/// Confusion counts: PT (predicted positive, actually positive), PF
/// (predicted positive, actually negative), NT (predicted negative,
/// actually negative) and NF (predicted negative, actually positive).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub pt: u64,
    pub pf: u64,
    pub nt: u64,
    pub nf: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.pt + self.pf + self.nt + self.nf
    }
}

/// Tallies binary predictions against labels (1 = positive).
pub fn confusion_counts(predictions: &[usize], labels: &[usize]) -> Result<Confusion> {
    if predictions.len() != labels.len() {
        return Err(Error::arg(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut c = Confusion::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p == POSITIVE, y == POSITIVE) {
            (true, true) => c.pt += 1,
            (true, false) => c.pf += 1,
            (false, false) => c.nt += 1,
            (false, true) => c.nf += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(flatten)]
    pub counts: Confusion,
    /// Percent.
    pub accuracy: f64,
    /// Fraction; 0 when nothing was predicted positive.
    pub precision: f64,
    /// Fraction; 0 when there were no positives.
    pub recall: f64,
    /// Percent; harmonic mean of precision and recall, 0 when both are 0.
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

/// Accuracy `(PT + NT) / total * 100` and the harmonic-mean F1 score.
pub fn compute_metrics(pt: u64, pf: u64, nt: u64, nf: u64) -> Result<Metrics> {
    let counts = Confusion { pt, pf, nt, nf };
    let total = counts.total();
    if total == 0 {
        return Err(Error::arg("cannot compute metrics from all-zero counts"));
    }
    let ratio = |num: u64, den: u64| if den == 0 { (0.0, true) } else { (num as f64 / den as f64, false) };
    let (precision, precision_undefined) = ratio(pt, pt + pf);
    let (recall, recall_undefined) = ratio(pt, pt + nf);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall) * 100.0
    };
    Ok(Metrics {
        counts,
        accuracy: (pt + nt) as f64 / total as f64 * 100.0,
        precision,
        recall,
        f1,
        precision_undefined,
        recall_undefined,
    })
}

/// Clip-level evaluation of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task_id: u32,
    pub task_name: String,
    pub features: String,
    pub clips: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tasks: Vec<TaskReport>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Aligned plain-text table, one row per task.
    pub fn to_table(&self) -> String {
        let header = [
            "task", "name", "features", "clips", "PT", "PF", "NT", "NF", "accuracy", "f1",
        ];
        let rows: Vec<Vec<String>> = self
            .tasks
            .iter()
            .map(|t| {
                let m = &t.metrics;
                vec![
                    t.task_id.to_string(),
                    t.task_name.clone(),
                    t.features.clone(),
                    t.clips.to_string(),
                    m.counts.pt.to_string(),
                    m.counts.pf.to_string(),
                    m.counts.nt.to_string(),
                    m.counts.nf.to_string(),
                    format!("{:.2}", m.accuracy),
                    format!("{:.2}", m.f1),
                ]
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let line = |cells: Vec<&str>, out: &mut String| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 1 || i == 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(header.to_vec(), &mut out);
        for r in &rows {
            line(r.iter().map(String::as_str).collect(), &mut out);
        }
        out
    }
}
