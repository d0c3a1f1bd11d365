//! Confusion matrices and classification metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Display names for 3- and 5-class label spaces; other sizes get numbers.
pub fn class_names(k: usize) -> Vec<String> {
    match k {
        3 => ["negative", "neutral", "positive"].map(String::from).to_vec(),
        5 => ["-2", "-1", "0", "1", "2"].map(String::from).to_vec(),
        _ => (0..k).map(|i| i.to_string()).collect(),
    }
}

/// `counts[gold][pred]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub k: usize,
    pub counts: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub total: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

pub fn confusion(golds: &[usize], preds: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if golds.len() != preds.len() {
        return Err(Error::Shape(format!(
            "{} gold labels but {} predictions",
            golds.len(),
            preds.len()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one class".into()));
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&g, &p) in golds.iter().zip(preds) {
        if g >= k || p >= k {
            return Err(Error::InvalidArgument(format!("label {} outside 0..{k}", g.max(p))));
        }
        counts[g][p] += 1;
    }
    Ok(ConfusionMatrix { k, counts })
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.k).map(|i| self.counts[i][i]).sum()
    }

    /// Precision, recall and F1 per class, with 0/0 taken as 0.
    pub fn metrics(&self) -> Result<Metrics> {
        if self.total() == 0 {
            return Err(Error::Empty("confusion matrix has no examples".into()));
        }
        let per_class: Vec<ClassMetrics> = (0..self.k)
            .map(|c| {
                let tp = self.counts[c][c];
                let gold: u64 = self.counts[c].iter().sum();
                let pred: u64 = self.counts.iter().map(|row| row[c]).sum();
                let precision = ratio(tp, pred);
                let recall = ratio(tp, gold);
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassMetrics {
                    precision,
                    recall,
                    f1,
                    support: gold,
                }
            })
            .collect();
        Ok(Metrics {
            total: self.total(),
            accuracy: ratio(self.correct(), self.total()),
            macro_f1: per_class.iter().map(|m| m.f1).sum::<f64>() / self.k as f64,
            per_class,
        })
    }

    /// Header row of predicted class names, one row per gold class.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::from("gold\\pred");
        for n in names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (name, row) in names.iter().zip(&self.counts) {
            out.push_str(name);
            for c in row {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Everything written out by an evaluation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

impl EvalReport {
    pub fn new(golds: &[usize], preds: &[usize], k: usize) -> Result<Self> {
        let confusion = confusion(golds, preds, k)?;
        Ok(EvalReport {
            class_names: class_names(k),
            metrics: confusion.metrics()?,
            confusion,
        })
    }

    /// `class,precision,recall,f1,support` rows plus accuracy and macro-F1.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("class,precision,recall,f1,support\n");
        for (name, m) in self.class_names.iter().zip(&self.metrics.per_class) {
            out.push_str(&format!("{name},{},{},{},{}\n", m.precision, m.recall, m.f1, m.support));
        }
        out.push_str(&format!("accuracy,,,{},{}\n", self.metrics.accuracy, self.metrics.total));
        out.push_str(&format!("macro_f1,,,{},{}\n", self.metrics.macro_f1, self.metrics.total));
        out
    }
}
