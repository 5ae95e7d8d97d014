//! Ground-truth ingestion, matching, metrics and dataset utilities.

pub mod coco;
pub mod dataset;
pub mod hungarian;
pub mod interchange;
pub mod matching;
pub mod metrics;
pub mod report;
pub mod width;

use crate::geometry::{clip_polygon, is_convex, polygon_area, BBox, OrientedBox, Vec2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coco::{load_coco, parse_coco, Dataset, GroundTruthObject, ImageInfo};
pub use hungarian::{hungarian, Assignment};
pub use matching::{match_detections, MatchPair, MatchResult};
pub use metrics::{confusion_matrix, metrics, ClassCounts, ClassMetrics, ConfusionMatrix, Score};
pub use width::{width_compare, WidthSample, WidthStats, WidthSummary};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed COCO file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown category `{name}` (id {id})")]
    UnknownCategory { id: u64, name: String },
    #[error("annotation {annotation} references undeclared category id {category_id}")]
    MissingCategory { annotation: u64, category_id: u64 },
    #[error("annotation {annotation} references missing image {image_id}")]
    MissingImage { annotation: u64, image_id: u64 },
    #[error("annotation {annotation} has no usable polygon or bbox")]
    NoGeometry { annotation: u64 },
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("quota for region `{region}` is {quota} but its pool holds {available} images")]
    QuotaExceedsPool { region: String, quota: usize, available: usize },
}

/// A geometry taking part in IoU computations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Box(BBox),
    Obb(OrientedBox),
    Polygon(Vec<Vec2>),
}

impl Shape {
    pub fn envelope(&self) -> BBox {
        match self {
            Shape::Box(b) => *b,
            Shape::Obb(o) => o.envelope(),
            Shape::Polygon(p) => BBox::envelope(p).unwrap_or(BBox::new(0.0, 0.0, 0.0, 0.0)),
        }
    }

    pub fn ring(&self) -> Vec<Vec2> {
        match self {
            Shape::Box(b) => b.corners().to_vec(),
            Shape::Obb(o) => o.corners().to_vec(),
            Shape::Polygon(p) => p.clone(),
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Shape::Box(b) => b.area(),
            Shape::Obb(o) => o.area(),
            Shape::Polygon(p) => polygon_area(p),
        }
    }

    fn is_convex(&self) -> bool {
        match self {
            Shape::Box(_) | Shape::Obb(_) => true,
            Shape::Polygon(p) => is_convex(p),
        }
    }
}

/// How two shapes are compared.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IouMode {
    /// Compare axis-aligned envelopes.
    #[default]
    Envelope,
    /// Exact area overlap; needs at least one convex operand, otherwise envelopes are used.
    Polygon,
}

pub fn bbox_iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection(b).map_or(0.0, |i| i.area());
    let union = a.area() + b.area() - inter;
    if union <= 0.0 || inter <= 0.0 {
        0.0
    } else {
        (inter / union).min(1.0)
    }
}

/// Exact IoU of two polygons, `clip` being convex.
pub fn polygon_iou(subject: &[Vec2], clip: &[Vec2]) -> f64 {
    let (a, b) = (polygon_area(subject), polygon_area(clip));
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    let inter = polygon_area(&clip_polygon(subject, clip));
    let union = a + b - inter;
    if union <= 0.0 || inter <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Intersection over union; zero-area geometry scores 0.
pub fn iou(a: &Shape, b: &Shape, mode: IouMode) -> f64 {
    match mode {
        IouMode::Envelope => bbox_iou(&a.envelope(), &b.envelope()),
        IouMode::Polygon => {
            if let (Shape::Box(x), Shape::Box(y)) = (a, b) {
                bbox_iou(x, y)
            } else if b.is_convex() {
                polygon_iou(&a.ring(), &b.ring())
            } else if a.is_convex() {
                polygon_iou(&b.ring(), &a.ring())
            } else {
                bbox_iou(&a.envelope(), &b.envelope())
            }
        }
    }
}
