use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Precision, recall and F1 with one class taken as positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub positive_class: Label,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Both classes in index order (true, false).
    pub per_class: [ClassMetrics; 2],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

impl MetricsReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize, positive_class: Label) -> Result<Self> {
        let total = tp + fp + fn_ + tn;
        if total == 0 {
            return Err(Error::Size("metrics over an empty set".into()));
        }
        let (precision, recall, f1) = prf(tp, fp, fn_);
        // Swapping the positive class swaps TP with TN and FP with FN.
        let (np, nr, nf) = prf(tn, fn_, fp);
        let this = ClassMetrics {
            class: positive_class,
            precision,
            recall,
            f1,
        };
        let other_class = match positive_class {
            Label::True => Label::False,
            Label::False => Label::True,
        };
        let other = ClassMetrics {
            class: other_class,
            precision: np,
            recall: nr,
            f1: nf,
        };
        let per_class = if positive_class == Label::True {
            [this, other]
        } else {
            [other, this]
        };
        Ok(MetricsReport {
            positive_class,
            tp,
            fp,
            fn_,
            tn,
            accuracy: ratio(tp + tn, total),
            precision,
            recall,
            f1,
            macro_precision: (per_class[0].precision + per_class[1].precision) / 2.0,
            macro_recall: (per_class[0].recall + per_class[1].recall) / 2.0,
            macro_f1: (per_class[0].f1 + per_class[1].f1) / 2.0,
            per_class,
        })
    }

    /// Confusion counts from class indices.
    pub fn from_predictions(predicted: &[usize], actual: &[usize], positive_class: Label) -> Result<Self> {
        if predicted.len() != actual.len() {
            return Err(Error::Contract(format!(
                "{} predictions for {} labels",
                predicted.len(),
                actual.len()
            )));
        }
        let pos = positive_class.index();
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p == pos, a == pos) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        MetricsReport::from_counts(tp, fp, fn_, tn, positive_class)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}
