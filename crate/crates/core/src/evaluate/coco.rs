//! COCO-style ground truth.
//!
//! Category names are normalized (lowercase, `-` and spaces become `_`) and
//! mapped onto [`ParkingClass`]. Categories that no annotation uses are
//! tolerated, since exported datasets often carry an unused umbrella category.

use super::{EvalError, Shape};
use crate::detector::ParkingClass;
use crate::geometry::{polygon_area, BBox, Vec2};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: u64,
    #[serde(default)]
    pub file_name: String,
    #[serde(default)]
    pub width: u32,
    #[serde(default)]
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub id: u64,
    pub image_id: u64,
    #[serde(rename = "class")]
    pub cls: ParkingClass,
    pub polygon: Vec<Vec2>,
}

impl GroundTruthObject {
    pub fn shape(&self) -> Shape {
        Shape::Polygon(self.polygon.clone())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub images: Vec<ImageInfo>,
    pub objects: Vec<GroundTruthObject>,
}

impl Dataset {
    pub fn class_histogram(&self) -> BTreeMap<ParkingClass, usize> {
        let mut h = BTreeMap::new();
        for o in &self.objects {
            *h.entry(o.cls).or_insert(0) += 1;
        }
        h
    }

    pub fn objects_by_image(&self) -> BTreeMap<u64, Vec<&GroundTruthObject>> {
        let mut m: BTreeMap<u64, Vec<&GroundTruthObject>> = self.images.iter().map(|i| (i.id, Vec::new())).collect();
        for o in &self.objects {
            m.entry(o.image_id).or_default().push(o);
        }
        m
    }
}

#[derive(Deserialize)]
struct RawCoco {
    images: Vec<ImageInfo>,
    #[serde(default)]
    annotations: Vec<RawAnnotation>,
    categories: Vec<RawCategory>,
}

#[derive(Deserialize)]
struct RawCategory {
    id: u64,
    name: String,
}

#[derive(Deserialize)]
struct RawAnnotation {
    id: u64,
    image_id: u64,
    category_id: u64,
    #[serde(default)]
    segmentation: serde_json::Value,
    #[serde(default)]
    bbox: Option<[f64; 4]>,
}

pub fn normalize_category(name: &str) -> String {
    name.trim().to_lowercase().replace(['-', ' '], "_")
}

/// First polygon ring of a segmentation with at least three vertices and positive area.
fn first_ring(seg: &serde_json::Value) -> Option<Vec<Vec2>> {
    seg.as_array()?.iter().find_map(|ring| {
        let nums: Vec<f64> = ring.as_array()?.iter().map(|v| v.as_f64()).collect::<Option<_>>()?;
        if nums.len() < 6 || !nums.len().is_multiple_of(2) {
            return None;
        }
        let pts: Vec<Vec2> = nums.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect();
        (polygon_area(&pts) > 0.0).then_some(pts)
    })
}

pub fn parse_coco(text: &str) -> Result<Dataset, EvalError> {
    let raw: RawCoco = serde_json::from_str(text)?;
    let categories: HashMap<u64, &str> = raw.categories.iter().map(|c| (c.id, c.name.as_str())).collect();
    let image_ids: std::collections::HashSet<u64> = raw.images.iter().map(|i| i.id).collect();
    let mut objects = Vec::with_capacity(raw.annotations.len());
    for a in &raw.annotations {
        let name = categories
            .get(&a.category_id)
            .ok_or(EvalError::MissingCategory { annotation: a.id, category_id: a.category_id })?;
        let cls: ParkingClass = normalize_category(name)
            .parse()
            .map_err(|_| EvalError::UnknownCategory { id: a.category_id, name: name.to_string() })?;
        if !image_ids.contains(&a.image_id) {
            return Err(EvalError::MissingImage { annotation: a.id, image_id: a.image_id });
        }
        let polygon = match first_ring(&a.segmentation) {
            Some(p) => p,
            None => match a.bbox {
                Some([x, y, w, h]) if w > 0.0 && h > 0.0 => BBox::new(x, y, w, h).corners().to_vec(),
                _ => return Err(EvalError::NoGeometry { annotation: a.id }),
            },
        };
        objects.push(GroundTruthObject { id: a.id, image_id: a.image_id, cls, polygon });
    }
    Ok(Dataset { images: raw.images, objects })
}

pub fn load_coco(path: &Path) -> Result<Dataset, EvalError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| EvalError::Io { path: path.display().to_string(), source })?;
    parse_coco(&text)
}
