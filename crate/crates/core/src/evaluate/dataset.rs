//! Dataset construction: hint-pool sampling and crop export.

use super::coco::{Dataset, GroundTruthObject};
use super::EvalError;
use crate::detector::{ParkingClass, DEFAULT_CONFIDENCE};
use crate::geometry::{clip_polygon, polygon_area, BBox, Vec2};
use crate::imagery::crop_origin;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Hint-model output for one candidate image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintImage {
    pub image: String,
    pub region: String,
    /// Confidences of every hint detection in the image.
    pub confidences: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionPools {
    pub may_contain: Vec<String>,
    pub may_not_contain: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSample {
    pub seed: u64,
    pub conf_thresh: f64,
    pub pools: BTreeMap<String, RegionPools>,
    /// Sampled may-contain images per region, sorted.
    pub sampled: BTreeMap<String, Vec<String>>,
}

pub const DEFAULT_HINT_THRESHOLD: f64 = DEFAULT_CONFIDENCE;

/// Splits images into pools (any hint confidence strictly above `conf_thresh`
/// means "may contain") and draws `quotas[region]` images from each region's
/// may-contain pool without replacement.
pub fn sample_pools(
    hints: &[HintImage],
    conf_thresh: f64,
    quotas: &BTreeMap<String, usize>,
    seed: u64,
) -> Result<PoolSample, EvalError> {
    let mut pools: BTreeMap<String, RegionPools> = BTreeMap::new();
    for h in hints {
        let p = pools.entry(h.region.clone()).or_default();
        if h.confidences.iter().any(|&c| c > conf_thresh) {
            p.may_contain.push(h.image.clone());
        } else {
            p.may_not_contain.push(h.image.clone());
        }
    }
    for p in pools.values_mut() {
        p.may_contain.sort();
        p.may_contain.dedup();
        p.may_not_contain.sort();
        p.may_not_contain.dedup();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled = BTreeMap::new();
    for (region, &quota) in quotas {
        let pool = pools.get(region).map(|p| p.may_contain.as_slice()).unwrap_or(&[]);
        if quota > pool.len() {
            return Err(EvalError::QuotaExceedsPool { region: region.clone(), quota, available: pool.len() });
        }
        let mut pick: Vec<String> = pool.choose_multiple(&mut rng, quota).cloned().collect();
        pick.sort();
        sampled.insert(region.clone(), pick);
    }
    Ok(PoolSample { seed, conf_thresh, pools, sampled })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropLabel {
    #[serde(rename = "class")]
    pub cls: ParkingClass,
    pub source_id: u64,
    /// Polygon in crop pixels, clipped to the crop.
    pub polygon: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropRecord {
    pub image_id: u64,
    /// Annotation the crop is centered on.
    pub object_id: u64,
    /// Crop top-left in image pixels.
    pub origin: (i64, i64),
    pub size: u32,
    /// The crop reaches past the image edge.
    pub padded: bool,
    pub labels: Vec<CropLabel>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CropExport {
    /// Crops usable for every split.
    pub crops: Vec<CropRecord>,
    /// Crops that need padding; kept out of test splits.
    pub padded: Vec<CropRecord>,
}

fn crop_labels(objects: &[&GroundTruthObject], origin: (i64, i64), size: u32) -> Vec<CropLabel> {
    let win = BBox::new(origin.0 as f64, origin.1 as f64, f64::from(size), f64::from(size));
    let ring = win.corners();
    let shift = Vec2::new(-win.x, -win.y);
    objects
        .iter()
        .filter_map(|o| {
            let clipped = clip_polygon(&o.polygon, &ring);
            (clipped.len() >= 3 && polygon_area(&clipped) > 0.0).then(|| CropLabel {
                cls: o.cls,
                source_id: o.id,
                polygon: clipped.into_iter().map(|p| p + shift).collect(),
            })
        })
        .collect()
}

/// One `size x size` crop per parking object (every class but access aisles),
/// centered on the object's envelope, with every overlapping label clipped to
/// the crop and translated into crop pixels.
pub fn export_crops(dataset: &Dataset, size: u32) -> CropExport {
    let by_image = dataset.objects_by_image();
    let dims: BTreeMap<u64, (u32, u32)> = dataset.images.iter().map(|i| (i.id, (i.width, i.height))).collect();
    let mut out = CropExport::default();
    for (image_id, objects) in &by_image {
        let (w, h) = dims.get(image_id).copied().unwrap_or((0, 0));
        for o in objects.iter().filter(|o| o.cls != ParkingClass::AccessAisle) {
            let Some(env) = BBox::envelope(&o.polygon) else { continue };
            let c = env.center();
            let origin = crop_origin((c.x, c.y), size);
            let padded = origin.0 < 0
                || origin.1 < 0
                || origin.0 + i64::from(size) > i64::from(w)
                || origin.1 + i64::from(size) > i64::from(h);
            let rec = CropRecord {
                image_id: *image_id,
                object_id: o.id,
                origin,
                size,
                padded,
                labels: crop_labels(objects, origin, size),
            };
            if padded {
                out.padded.push(rec);
            } else {
                out.crops.push(rec);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::coco::ImageInfo;

    fn hints(n: usize, region: &str, conf: f64) -> Vec<HintImage> {
        (0..n)
            .map(|i| HintImage { image: format!("{region}-{i:05}"), region: region.into(), confidences: vec![conf] })
            .collect()
    }

    #[test]
    fn low_confidence_pool_is_empty() {
        let s = sample_pools(&hints(10, "a", 0.2), 0.3, &BTreeMap::new(), 1).unwrap();
        assert!(s.pools["a"].may_contain.is_empty());
        assert_eq!(s.pools["a"].may_not_contain.len(), 10);
    }

    #[test]
    fn quota_errors_and_determinism() {
        let h = hints(20, "a", 0.9);
        let q: BTreeMap<String, usize> = [("a".to_string(), 7)].into();
        let s1 = sample_pools(&h, 0.3, &q, 42).unwrap();
        let s2 = sample_pools(&h, 0.3, &q, 42).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.sampled["a"].len(), 7);
        let too_many: BTreeMap<String, usize> = [("a".to_string(), 21)].into();
        assert!(matches!(sample_pools(&h, 0.3, &too_many, 42), Err(EvalError::QuotaExceedsPool { .. })));
    }

    fn square(id: u64, cls: ParkingClass, x: f64, y: f64, s: f64) -> GroundTruthObject {
        GroundTruthObject { id, image_id: 1, cls, polygon: BBox::new(x, y, s, s).corners().to_vec() }
    }

    #[test]
    fn crops_center_and_edge_rule() {
        let ds = Dataset {
            images: vec![ImageInfo { id: 1, file_name: "a.png".into(), width: 512, height: 512 }],
            objects: vec![
                square(1, ParkingClass::DpOneAisle, 236.0, 236.0, 40.0),
                square(2, ParkingClass::OneAisle, 2.0, 200.0, 16.0),
            ],
        };
        let e = export_crops(&ds, 100);
        assert_eq!(e.crops.len(), 1);
        assert_eq!(e.crops[0].origin, (206, 206));
        let env = BBox::envelope(&e.crops[0].labels[0].polygon).unwrap();
        assert_eq!(env.center(), Vec2::new(50.0, 50.0));
        assert_eq!(e.padded.len(), 1);
        assert_eq!(e.padded[0].object_id, 2);
    }
}
