//! Width agreement between predictions and a reference.
//!
//! Differences are signed `prediction - reference`, so positive values mean
//! overestimation. Standard deviations are sample deviations (`n - 1`).

use crate::detector::ParkingClass;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthSample {
    #[serde(rename = "class")]
    pub cls: ParkingClass,
    pub pred_px: f64,
    pub ref_px: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WidthStats {
    pub count: usize,
    /// Pairs dropped because the reference width was 0.
    pub excluded_zero_reference: usize,
    pub mean_diff_px: f64,
    pub sd_px: f64,
    pub mean_diff_pct: f64,
    pub sd_pct: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WidthSummary {
    pub per_class: BTreeMap<ParkingClass, WidthStats>,
    pub total: WidthStats,
}

/// Mean and sample standard deviation; the deviation is 0 below two values.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

fn stats<'a>(samples: impl Iterator<Item = &'a WidthSample>) -> WidthStats {
    let mut px = Vec::new();
    let mut pct = Vec::new();
    let mut excluded = 0;
    for s in samples {
        if s.ref_px == 0.0 {
            excluded += 1;
            continue;
        }
        px.push(s.pred_px - s.ref_px);
        pct.push((s.pred_px - s.ref_px) / s.ref_px * 100.0);
    }
    let (mean_diff_px, sd_px) = mean_sd(&px);
    let (mean_diff_pct, sd_pct) = mean_sd(&pct);
    WidthStats { count: px.len(), excluded_zero_reference: excluded, mean_diff_px, sd_px, mean_diff_pct, sd_pct }
}

/// Per-class and overall statistics of paired widths. Pairs are grouped by the reference class.
pub fn width_compare(samples: &[WidthSample]) -> WidthSummary {
    let mut classes: Vec<ParkingClass> = samples.iter().map(|s| s.cls).collect();
    classes.sort();
    classes.dedup();
    WidthSummary {
        per_class: classes.into_iter().map(|c| (c, stats(samples.iter().filter(|s| s.cls == c)))).collect(),
        total: stats(samples.iter()),
    }
}
