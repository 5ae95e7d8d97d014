//! Newline-delimited prediction records and the per-image evaluation drivers.
//!
//! ```text
//! {"image_id": 3, "class": "dp_one_aisle", "bbox": [x, y, w, h], "confidence": 0.91, "width_px": 57.2}
//! {"image_id": 3, "class": "one_aisle", "obb": [cx, cy, length, width, theta], "confidence": 0.55}
//! ```

use super::coco::Dataset;
use super::matching::match_detections;
use super::metrics::Outcome;
use super::width::WidthSample;
use super::{EvalError, IouMode, Shape};
use crate::detector::ParkingClass;
use crate::geometry::{BBox, OrientedBox};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub image_id: u64,
    #[serde(rename = "class")]
    pub cls: ParkingClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obb: Option<OrientedBox>,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_px: Option<f64>,
}

impl PredictionRecord {
    pub fn shape(&self) -> Shape {
        match (self.obb, self.bbox) {
            (Some(o), _) => Shape::Obb(o),
            (None, Some(b)) => Shape::Box(b),
            (None, None) => unreachable!("validated on read"),
        }
    }
}

pub fn parse_predictions(reader: impl BufRead) -> Result<Vec<PredictionRecord>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| EvalError::Record { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord =
            serde_json::from_str(&line).map_err(|e| EvalError::Record { line: line_no, message: e.to_string() })?;
        if rec.bbox.is_none() && rec.obb.is_none() {
            return Err(EvalError::Record { line: line_no, message: "record needs `bbox` or `obb`".into() });
        }
        if !(0.0..=1.0).contains(&rec.confidence) {
            return Err(EvalError::Record { line: line_no, message: "confidence outside [0, 1]".into() });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>, EvalError> {
    let f = std::fs::File::open(path).map_err(|source| EvalError::Io { path: path.display().to_string(), source })?;
    parse_predictions(std::io::BufReader::new(f))
}

pub fn write_predictions(records: &[PredictionRecord]) -> String {
    records.iter().map(|r| serde_json::to_string(r).expect("serializable") + "\n").collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub iou: f64,
    pub mode: IouMode,
    /// Drop these truth classes and predictions before matching.
    #[serde(skip)]
    pub exclude: &'static [ParkingClass],
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { iou: 0.5, mode: IouMode::Envelope, exclude: &[ParkingClass::AccessAisle] }
    }
}

fn group<T>(items: impl Iterator<Item = (u64, T)>) -> BTreeMap<u64, Vec<T>> {
    let mut m: BTreeMap<u64, Vec<T>> = BTreeMap::new();
    for (k, v) in items {
        m.entry(k).or_default().push(v);
    }
    m
}

/// Matches predictions to truths image by image and returns one outcome per pair, FP or FN.
pub fn detection_outcomes(preds: &[PredictionRecord], truth: &Dataset, opts: &EvalOptions) -> Vec<Outcome> {
    let keep = |c: ParkingClass| !opts.exclude.contains(&c);
    let p_by = group(preds.iter().filter(|p| keep(p.cls)).map(|p| (p.image_id, p)));
    let t_by = group(truth.objects.iter().filter(|t| keep(t.cls)).map(|t| (t.image_id, t)));
    let mut ids: Vec<u64> = p_by.keys().chain(t_by.keys()).copied().collect();
    ids.sort();
    ids.dedup();
    let mut out = Vec::new();
    for id in ids {
        let ps = p_by.get(&id).map(Vec::as_slice).unwrap_or(&[]);
        let ts = t_by.get(&id).map(Vec::as_slice).unwrap_or(&[]);
        let pshapes: Vec<Shape> = ps.iter().map(|p| p.shape()).collect();
        let tshapes: Vec<Shape> = ts.iter().map(|t| t.shape()).collect();
        let m = match_detections(&pshapes, &tshapes, opts.iou, opts.mode);
        out.extend(m.pairs.iter().map(|pr| (Some(ps[pr.pred].cls), Some(ts[pr.truth].cls))));
        out.extend(m.unmatched_preds.iter().map(|&i| (Some(ps[i].cls), None)));
        out.extend(m.unmatched_truths.iter().map(|&j| (None, Some(ts[j].cls))));
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WidthPairing {
    pub samples: Vec<WidthSample>,
    /// Matched pairs where either side lacked `width_px`.
    pub missing_width: usize,
    pub unmatched_preds: usize,
    pub unmatched_refs: usize,
}

/// Pairs two prediction files by per-image matching and collects their widths.
pub fn pair_widths(preds: &[PredictionRecord], refs: &[PredictionRecord], opts: &EvalOptions) -> WidthPairing {
    let p_by = group(preds.iter().map(|p| (p.image_id, p)));
    let r_by = group(refs.iter().map(|r| (r.image_id, r)));
    let mut ids: Vec<u64> = p_by.keys().chain(r_by.keys()).copied().collect();
    ids.sort();
    ids.dedup();
    let mut out = WidthPairing::default();
    for id in ids {
        let ps = p_by.get(&id).map(Vec::as_slice).unwrap_or(&[]);
        let rs = r_by.get(&id).map(Vec::as_slice).unwrap_or(&[]);
        let pshapes: Vec<Shape> = ps.iter().map(|p| p.shape()).collect();
        let rshapes: Vec<Shape> = rs.iter().map(|r| r.shape()).collect();
        let m = match_detections(&pshapes, &rshapes, opts.iou, opts.mode);
        out.unmatched_preds += m.unmatched_preds.len();
        out.unmatched_refs += m.unmatched_truths.len();
        for pr in &m.pairs {
            let (p, r) = (ps[pr.pred], rs[pr.truth]);
            match (p.width_px, r.width_px) {
                (Some(pw), Some(rw)) => out.samples.push(WidthSample { cls: r.cls, pred_px: pw, ref_px: rw }),
                _ => out.missing_width += 1,
            }
        }
    }
    out
}
