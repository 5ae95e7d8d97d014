//! Per-class and micro-averaged detection metrics, confusion matrices.
//!
//! A matched pair whose classes differ is a false positive for the predicted
//! class and a false negative for the true class.

use crate::detector::ParkingClass;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One prediction/truth outcome: `(predicted class, true class)`, either side absent for FP/FN.
pub type Outcome = (Option<ParkingClass>, Option<ParkingClass>);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ClassCounts {
    pub fn add(&mut self, o: ClassCounts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Score {
    #[serde(flatten)]
    pub counts: ClassCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when `TP + FP = 0`; precision is then reported as 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub precision_undefined: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub recall_undefined: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub f1_undefined: bool,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn f1(precision: f64, recall: f64) -> Option<f64> {
    let s = precision + recall;
    (s > 0.0).then(|| 2.0 * precision * recall / s)
}

impl Score {
    pub fn from_counts(counts: ClassCounts) -> Self {
        let (precision, precision_undefined) = ratio(counts.tp, counts.tp + counts.fp);
        let (recall, recall_undefined) = ratio(counts.tp, counts.tp + counts.fn_);
        let (f1, f1_undefined) = match f1(precision, recall) {
            Some(v) => (v, false),
            None => (0.0, true),
        };
        Self { counts, precision, recall, f1, precision_undefined, recall_undefined, f1_undefined }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub per_class: BTreeMap<ParkingClass, Score>,
    pub micro: Score,
}

/// Tallies outcomes per class. Classes in `classes` always appear, even with zero counts.
pub fn metrics(outcomes: &[Outcome], classes: &[ParkingClass]) -> ClassMetrics {
    let mut counts: BTreeMap<ParkingClass, ClassCounts> = classes.iter().map(|&c| (c, ClassCounts::default())).collect();
    for &(pred, truth) in outcomes {
        match (pred, truth) {
            (Some(p), Some(t)) if p == t => counts.entry(p).or_default().tp += 1,
            (p, t) => {
                if let Some(p) = p {
                    counts.entry(p).or_default().fp += 1;
                }
                if let Some(t) = t {
                    counts.entry(t).or_default().fn_ += 1;
                }
            }
        }
    }
    let mut total = ClassCounts::default();
    for c in counts.values() {
        total.add(*c);
    }
    ClassMetrics {
        per_class: counts.into_iter().map(|(k, v)| (k, Score::from_counts(v))).collect(),
        micro: Score::from_counts(total),
    }
}

/// Rows are true classes, columns predicted classes; the last row and column stand for "none".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub cells: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    const NONE: usize = ParkingClass::ALL.len();

    pub fn get(&self, truth: Option<ParkingClass>, pred: Option<ParkingClass>) -> u64 {
        self.cells[truth.map_or(Self::NONE, ParkingClass::index)][pred.map_or(Self::NONE, ParkingClass::index)]
    }

    pub fn row_sum(&self, truth: Option<ParkingClass>) -> u64 {
        self.cells[truth.map_or(Self::NONE, ParkingClass::index)].iter().sum()
    }

    pub fn col_sum(&self, pred: Option<ParkingClass>) -> u64 {
        let j = pred.map_or(Self::NONE, ParkingClass::index);
        self.cells.iter().map(|r| r[j]).sum()
    }
}

pub fn confusion_matrix(outcomes: &[Outcome]) -> ConfusionMatrix {
    let n = ParkingClass::ALL.len() + 1;
    let mut cells = vec![vec![0u64; n]; n];
    for &(pred, truth) in outcomes {
        if pred.is_none() && truth.is_none() {
            continue;
        }
        cells[truth.map_or(n - 1, ParkingClass::index)][pred.map_or(n - 1, ParkingClass::index)] += 1;
    }
    let mut labels: Vec<String> = ParkingClass::ALL.iter().map(|c| c.name().to_string()).collect();
    labels.push("none".into());
    ConfusionMatrix { labels, cells }
}
