//! Prediction to ground-truth matching.

use super::hungarian::hungarian;
use super::{iou, IouMode, Shape};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub pred: usize,
    pub truth: usize,
    pub iou: f64,
}

/// Indices into the prediction and truth lists handed to [`match_detections`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchPair>,
    pub unmatched_preds: Vec<usize>,
    pub unmatched_truths: Vec<usize>,
}

/// Minimal union-find over `n` items.
struct Components(Vec<usize>);

impl Components {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Hungarian assignment on `1 - IoU`; assigned pairs below `iou_thresh` become one FP and one FN.
///
/// The problem is solved independently on each connected component of the
/// overlap graph.
pub fn match_detections(preds: &[Shape], truths: &[Shape], iou_thresh: f64, mode: IouMode) -> MatchResult {
    let (np, nt) = (preds.len(), truths.len());
    let ious: Vec<Vec<f64>> = preds.iter().map(|p| truths.iter().map(|t| iou(p, t, mode)).collect()).collect();
    let mut comp = Components((0..np + nt).collect());
    for (i, row) in ious.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v > 0.0 {
                comp.union(i, np + j);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, (Vec<usize>, Vec<usize>)> = Default::default();
    for i in 0..np {
        let r = comp.find(i);
        groups.entry(r).or_default().0.push(i);
    }
    for j in 0..nt {
        let r = comp.find(np + j);
        groups.entry(r).or_default().1.push(j);
    }

    let mut result = MatchResult::default();
    let mut pred_used = vec![false; np];
    let mut truth_used = vec![false; nt];
    for (rows, cols) in groups.values() {
        if rows.is_empty() || cols.is_empty() {
            continue;
        }
        let cost: Vec<Vec<f64>> = rows.iter().map(|&i| cols.iter().map(|&j| 1.0 - ious[i][j]).collect()).collect();
        for (r, c) in hungarian(&cost).pairs {
            let (i, j) = (rows[r], cols[c]);
            let v = ious[i][j];
            if v >= iou_thresh && v > 0.0 {
                result.pairs.push(MatchPair { pred: i, truth: j, iou: v });
                pred_used[i] = true;
                truth_used[j] = true;
            }
        }
    }
    result.pairs.sort_by_key(|p| (p.pred, p.truth));
    result.unmatched_preds = (0..np).filter(|&i| !pred_used[i]).collect();
    result.unmatched_truths = (0..nt).filter(|&j| !truth_used[j]).collect();
    result
}
