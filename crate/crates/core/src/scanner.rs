//! Four-pass sliding-window scan over a tile mosaic.
//!
//! The mosaic is cut into non-overlapping squares of 2x2 tiles. Each square is
//! scanned with four 512 px windows offset by half a window:
//!
//! ```text
//!   pass 1: square itself          pass 2: shifted right
//!   pass 3: shifted down           pass 4: shifted right and down
//! ```
//!
//! A detection is kept only if its centroid falls in the keep-region of the
//! pass that produced it. With margin `m`, square side `S` and square-local
//! coordinates `(u, v)`, the interior band is `I = [m, S - m]` and the seam band
//! is `E = (S - m, S + m)`; pass 1 keeps `I x I`, pass 2 `E x I`, pass 3 `I x E`
//! and pass 4 `E x E`. The interior band starts at 0 on the left and top edges
//! of the region, where no neighbor square covers the margin. An object no
//! larger than `2m` is therefore seen whole by exactly one owning pass.

use crate::detector::{Detector, ImageKey, ParkingClass, WINDOW_SIZE};
use crate::geo::TileCoord;
use crate::geometry::BBox;
use crate::imagery::{Mosaic, MOSAIC_TILE_SIZE};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_MARGIN: f64 = 50.0;
pub const DEFAULT_DEDUP_IOU: f64 = 0.5;
/// Largest object side the four-pass guarantee covers.
pub const MAX_OBJECT_PX: f64 = 2.0 * DEFAULT_MARGIN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pass {
    #[serde(rename = "1")]
    Interior,
    #[serde(rename = "2")]
    VerticalSeam,
    #[serde(rename = "3")]
    HorizontalSeam,
    #[serde(rename = "4")]
    Corner,
}

impl Pass {
    pub const ALL: [Pass; 4] = [Pass::Interior, Pass::VerticalSeam, Pass::HorizontalSeam, Pass::Corner];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    /// Window offset from the square's top-left corner, in pixels.
    pub fn offset(self) -> (i64, i64) {
        let h = i64::from(MOSAIC_TILE_SIZE);
        match self {
            Pass::Interior => (0, 0),
            Pass::VerticalSeam => (h, 0),
            Pass::HorizontalSeam => (0, h),
            Pass::Corner => (h, h),
        }
    }

    fn from_bands(u_seam: bool, v_seam: bool) -> Pass {
        match (u_seam, v_seam) {
            (false, false) => Pass::Interior,
            (true, false) => Pass::VerticalSeam,
            (false, true) => Pass::HorizontalSeam,
            (true, true) => Pass::Corner,
        }
    }
}

/// Where a square sits in the region, which decides the shape of its responsibility area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareContext {
    /// The square's left edge is the region's left edge.
    pub left_edge: bool,
    pub top_edge: bool,
    /// Distance from the square's left/top edge to the region's right/bottom edge.
    pub limit_u: f64,
    pub limit_v: f64,
    pub margin: f64,
}

impl SquareContext {
    /// A square with neighbors on every side.
    pub fn interior(margin: f64) -> Self {
        Self { left_edge: false, top_edge: false, limit_u: f64::INFINITY, limit_v: f64::INFINITY, margin }
    }
}

/// Which band a square-local coordinate falls in: `Some(false)` interior, `Some(true)` seam.
fn band(t: f64, region_edge: bool, limit: f64, m: f64) -> Option<bool> {
    let side = f64::from(WINDOW_SIZE);
    if t < 0.0 || t >= limit {
        return None;
    }
    let lo = if region_edge { 0.0 } else { m };
    if t >= lo && t <= side - m {
        Some(false)
    } else if t > side - m && t < side + m {
        Some(true)
    } else {
        None
    }
}

/// The pass owning a centroid at square-local `(u, v)`, if the square is responsible for it.
pub fn ownership(u: f64, v: f64, ctx: &SquareContext) -> Option<Pass> {
    let bu = band(u, ctx.left_edge, ctx.limit_u, ctx.margin)?;
    let bv = band(v, ctx.top_edge, ctx.limit_v, ctx.margin)?;
    Some(Pass::from_bands(bu, bv))
}

/// A 2x2 tile square; `a` is its top-left tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowSquare {
    pub a: TileCoord,
}

impl WindowSquare {
    pub fn origin_px(&self) -> (i64, i64) {
        let ts = i64::from(MOSAIC_TILE_SIZE);
        (i64::from(self.a.x) * ts, i64::from(self.a.y) * ts)
    }

    pub fn window_origin(&self, pass: Pass) -> (i64, i64) {
        let (x, y) = self.origin_px();
        let (dx, dy) = pass.offset();
        (x + dx, y + dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub square: WindowSquare,
    pub pass: Pass,
}

/// A locator detection in world pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalDetection {
    #[serde(rename = "class")]
    pub cls: ParkingClass,
    pub bbox: BBox,
    pub confidence: f64,
    pub provenance: Provenance,
}

impl GlobalDetection {
    pub fn centroid(&self) -> (f64, f64) {
        let c = self.bbox.center();
        (c.x, c.y)
    }
}

/// A window the backend failed on; its objects are missing from the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedWindow {
    pub key: String,
    pub pass: Pass,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub margin: f64,
    pub dedup_iou: f64,
    /// Squares scanned concurrently; 0 uses the global thread pool.
    pub workers: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { margin: DEFAULT_MARGIN, dedup_iou: DEFAULT_DEDUP_IOU, workers: 0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SquareScan {
    pub detections: Vec<GlobalDetection>,
    pub skipped: Vec<SkippedWindow>,
    pub backend_calls: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionScan {
    pub detections: Vec<GlobalDetection>,
    pub skipped: Vec<SkippedWindow>,
    pub squares: usize,
    pub backend_calls: usize,
    /// Kept boxes with a side longer than the scan guarantee covers.
    pub suspected_oversize: usize,
}

fn context_for(mosaic: &Mosaic, square: &WindowSquare, margin: f64) -> SquareContext {
    let (sx, sy) = square.origin_px();
    let (x0, y0, x1, y1) = mosaic.extent_px();
    SquareContext {
        left_edge: sx == x0,
        top_edge: sy == y0,
        limit_u: (x1 - sx) as f64,
        limit_v: (y1 - sy) as f64,
        margin,
    }
}

/// Runs the four passes over one square. Backend failures skip the window and are recorded.
pub fn scan_square(mosaic: &Mosaic, square: WindowSquare, detector: &Detector, margin: f64) -> SquareScan {
    let ctx = context_for(mosaic, &square, margin);
    let (sx, sy) = square.origin_px();
    let (mx0, my0, mx1, my1) = mosaic.extent_px();
    let region = BBox::from_corners(mx0 as f64, my0 as f64, mx1 as f64, my1 as f64);
    let mut out = SquareScan::default();
    for pass in Pass::ALL {
        let (wx, wy) = square.window_origin(pass);
        let key = ImageKey::new(mosaic.zoom(), (wx, wy));
        let (image, _) = mosaic.extract(wx, wy, WINDOW_SIZE, WINDOW_SIZE);
        out.backend_calls += 1;
        let dets = match detector.locate(&key, &image) {
            Ok(d) => d,
            Err(e) => {
                log::warn!("window {key} (pass {}) skipped: {e}", pass.number());
                out.skipped.push(SkippedWindow { key: key.to_string(), pass, error: e.to_string() });
                continue;
            }
        };
        for d in dets {
            let Some(bbox) = d.bbox.translate(wx as f64, wy as f64).intersection(&region) else {
                continue;
            };
            let c = bbox.center();
            if ownership(c.x - sx as f64, c.y - sy as f64, &ctx) == Some(pass) {
                out.detections.push(GlobalDetection {
                    cls: d.cls,
                    bbox,
                    confidence: d.confidence,
                    provenance: Provenance { square, pass },
                });
            }
        }
    }
    out
}

/// Squares tiling the mosaic with a stride of two tiles, row-major.
pub fn squares(mosaic: &Mosaic) -> Vec<WindowSquare> {
    let o = mosaic.origin;
    (0..mosaic.rows)
        .step_by(2)
        .flat_map(|r| (0..mosaic.cols).step_by(2).map(move |c| (c, r)))
        .map(|(c, r)| WindowSquare { a: TileCoord { x: o.x + c, y: o.y + r, z: o.z } })
        .collect()
}

/// Scans every square of the mosaic, deduplicates and sorts by centroid `(y, x)`.
pub fn scan_region(mosaic: &Mosaic, detector: &Detector, opts: &ScanOptions) -> RegionScan {
    let sq = squares(mosaic);
    let run = || -> Vec<SquareScan> {
        sq.par_iter().map(|&s| scan_square(mosaic, s, detector, opts.margin)).collect()
    };
    let per_square = if opts.workers > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(opts.workers).build().expect("scan pool").install(run)
    } else {
        run()
    };
    let mut report = RegionScan { squares: sq.len(), ..Default::default() };
    let mut all = Vec::new();
    for s in per_square {
        report.backend_calls += s.backend_calls;
        report.skipped.extend(s.skipped);
        all.extend(s.detections);
    }
    let mut kept = dedup(all, opts.dedup_iou);
    sort_by_centroid(&mut kept);
    report.suspected_oversize = kept.iter().filter(|d| d.bbox.w > MAX_OBJECT_PX || d.bbox.h > MAX_OBJECT_PX).count();
    report.detections = kept;
    report
}

pub fn sort_by_centroid(dets: &mut [GlobalDetection]) {
    dets.sort_by(|a, b| {
        let (ca, cb) = (a.bbox.center(), b.bbox.center());
        ca.y.total_cmp(&cb.y)
            .then(ca.x.total_cmp(&cb.x))
            .then(b.confidence.total_cmp(&a.confidence))
            .then(a.cls.cmp(&b.cls))
    });
}

pub fn bbox_iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection(b).map_or(0.0, |i| i.area());
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Greedy class-agnostic non-maximum suppression.
///
/// Detections are visited by descending confidence; one is kept iff its IoU with
/// every already-kept detection is below `iou_thresh`. Equal confidences are
/// visited in input order.
pub fn dedup(dets: Vec<GlobalDetection>, iou_thresh: f64) -> Vec<GlobalDetection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| dets[j].confidence.total_cmp(&dets[i].confidence).then(i.cmp(&j)));
    let mut kept: Vec<GlobalDetection> = Vec::new();
    for i in order {
        if kept.iter().all(|k| bbox_iou(&k.bbox, &dets[i].bbox) < iou_thresh) {
            kept.push(dets[i]);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_ownership_examples() {
        let ctx = SquareContext::interior(DEFAULT_MARGIN);
        assert_eq!(ownership(256.0, 256.0, &ctx), Some(Pass::Interior));
        assert_eq!(ownership(512.0 - 30.0, 256.0, &ctx), Some(Pass::VerticalSeam));
        assert_eq!(ownership(256.0, 512.0 - 30.0, &ctx), Some(Pass::HorizontalSeam));
        assert_eq!(ownership(482.0, 482.0, &ctx), Some(Pass::Corner));
        assert_eq!(ownership(30.0, 256.0, &ctx), None);
    }

    #[test]
    fn margin_ties_go_to_lower_pass() {
        let ctx = SquareContext::interior(DEFAULT_MARGIN);
        assert_eq!(ownership(462.0, 256.0, &ctx), Some(Pass::Interior));
        assert_eq!(ownership(50.0, 50.0, &ctx), Some(Pass::Interior));
        assert_eq!(ownership(49.999, 256.0, &ctx), None);
        assert_eq!(ownership(562.0, 256.0, &ctx), None);
    }

    #[test]
    fn region_edges_waive_left_top_margin() {
        let ctx = SquareContext { left_edge: true, top_edge: true, ..SquareContext::interior(DEFAULT_MARGIN) };
        assert_eq!(ownership(0.0, 10.0, &ctx), Some(Pass::Interior));
        let bounded = SquareContext { limit_u: 512.0, ..SquareContext::interior(DEFAULT_MARGIN) };
        assert_eq!(ownership(500.0, 256.0, &bounded), Some(Pass::VerticalSeam));
        assert_eq!(ownership(512.0, 256.0, &bounded), None);
    }

    fn det(x: f64, y: f64, w: f64, h: f64, conf: f64) -> GlobalDetection {
        GlobalDetection {
            cls: ParkingClass::DpOneAisle,
            bbox: BBox::new(x, y, w, h),
            confidence: conf,
            provenance: Provenance {
                square: WindowSquare { a: TileCoord { x: 0, y: 0, z: 1 } },
                pass: Pass::Interior,
            },
        }
    }

    #[test]
    fn nms_examples() {
        let kept = dedup(vec![det(0.0, 0.0, 10.0, 10.0, 0.8), det(0.0, 0.0, 10.0, 10.0, 0.9)], 0.5);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].confidence, 0.9);
        assert_eq!(dedup(vec![det(0.0, 0.0, 1.0, 1.0, 0.5), det(5.0, 5.0, 1.0, 1.0, 0.5)], 0.5).len(), 2);
        // A overlaps B, B overlaps C, A and C disjoint
        let a = det(0.0, 0.0, 10.0, 10.0, 0.9);
        let b = det(2.0, 0.0, 10.0, 10.0, 0.8);
        let c = det(11.0, 0.0, 10.0, 10.0, 0.7);
        let kept = dedup(vec![a, b, c], 0.5);
        assert_eq!(kept, vec![a, c]);
    }
}
