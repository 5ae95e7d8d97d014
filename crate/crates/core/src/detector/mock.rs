//! Scriptable backend used for desk-scale verification.
//!
//! A scenario can script replies per [`ImageKey`], describe a whole scene in
//! world pixels, or both. Scripted keys win; otherwise the scene is rendered
//! through a perfect detector: `locate` reports every object intersecting the
//! window with its box clipped to the window, and `orient` reports the space
//! and aisle boxes of every object touching the crop.

use super::{Backend, BackendError, Detection, ImageKey, ObbDetection, ObbKind, ParkingClass};
use crate::geometry::{BBox, OrientedBox, Vec2};
use crate::imagery::RasterImage;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub locate: BTreeMap<String, Vec<Detection>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub orient: BTreeMap<String, Vec<ObbDetection>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<Scene>,
}

/// Ground-truth scene in world pixels at one zoom level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub zoom: u8,
    pub objects: Vec<SceneObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    #[serde(rename = "class")]
    pub cls: ParkingClass,
    pub confidence: f64,
    pub space: OrientedBox,
    #[serde(default)]
    pub aisles: Vec<OrientedBox>,
}

impl SceneObject {
    /// Axis-aligned envelope of the space and its aisles.
    pub fn envelope(&self) -> BBox {
        let mut pts: Vec<Vec2> = self.space.corners().to_vec();
        for a in &self.aisles {
            pts.extend(a.corners());
        }
        BBox::envelope(&pts).expect("non-empty")
    }
}

/// Gaussian jitter applied to every returned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    pub sigma_px: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    scenario: Scenario,
    locate: BTreeMap<ImageKey, Vec<Detection>>,
    orient: BTreeMap<ImageKey, Vec<ObbDetection>>,
    noise: Option<Noise>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("malformed scenario: {0}")]
    Key(String),
    #[error("jitter sigma must be finite and non-negative, got {0}")]
    Sigma(f64),
}

impl MockBackend {
    pub fn new(scenario: Scenario, noise: Option<Noise>) -> Result<Self, ScenarioError> {
        if let Some(n) = noise {
            if !(n.sigma_px >= 0.0 && n.sigma_px.is_finite()) {
                return Err(ScenarioError::Sigma(n.sigma_px));
            }
        }
        let locate = scenario
            .locate
            .iter()
            .map(|(k, v)| Ok((k.parse::<ImageKey>().map_err(ScenarioError::Key)?, v.clone())))
            .collect::<Result<_, ScenarioError>>()?;
        let orient = scenario
            .orient
            .iter()
            .map(|(k, v)| Ok((k.parse::<ImageKey>().map_err(ScenarioError::Key)?, v.clone())))
            .collect::<Result<_, ScenarioError>>()?;
        Ok(Self { scenario, locate, orient, noise })
    }

    pub fn from_scene(scene: Scene) -> Self {
        Self::new(Scenario { scene: Some(scene), ..Default::default() }, None).expect("scene-only scenario")
    }

    pub fn from_json(text: &str, noise: Option<Noise>) -> Result<Self, ScenarioError> {
        Self::new(serde_json::from_str(text)?, noise)
    }

    pub fn from_file(path: &Path, noise: Option<Noise>) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text, noise)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    fn rng(&self, task: &str, key: &ImageKey, index: usize) -> Option<(ChaCha8Rng, Normal<f64>)> {
        let n = self.noise.filter(|n| n.sigma_px > 0.0)?;
        let mut h = Sha256::new();
        h.update(n.seed.to_le_bytes());
        h.update(task.as_bytes());
        h.update(key.to_string().as_bytes());
        h.update((index as u64).to_le_bytes());
        let digest = h.finalize();
        let seed = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
        Some((ChaCha8Rng::seed_from_u64(seed), Normal::new(0.0, n.sigma_px).expect("valid sigma")))
    }

    fn jitter_bbox(&self, key: &ImageKey, i: usize, mut b: BBox) -> BBox {
        if let Some((mut rng, normal)) = self.rng("locate", key, i) {
            let c = b.center();
            let (cx, cy) = (c.x + normal.sample(&mut rng), c.y + normal.sample(&mut rng));
            let w = (b.w + normal.sample(&mut rng)).max(1.0);
            let h = (b.h + normal.sample(&mut rng)).max(1.0);
            b = BBox::new(cx - w / 2.0, cy - h / 2.0, w, h);
        }
        b
    }

    fn jitter_obb(&self, key: &ImageKey, i: usize, o: OrientedBox) -> OrientedBox {
        match self.rng("orient", key, i) {
            Some((mut rng, normal)) => {
                let c = Vec2::new(o.center.x + normal.sample(&mut rng), o.center.y + normal.sample(&mut rng));
                let l = (o.length + normal.sample(&mut rng)).max(1.0);
                let w = (o.width + normal.sample(&mut rng)).max(1.0);
                OrientedBox::new(c, l, w, o.theta)
            }
            None => o,
        }
    }

    fn scene_locate(&self, key: &ImageKey, size: u32) -> Vec<Detection> {
        let Some(scene) = self.scenario.scene.as_ref().filter(|s| s.zoom == key.z) else {
            return Vec::new();
        };
        let window = BBox::new(key.origin.0 as f64, key.origin.1 as f64, f64::from(size), f64::from(size));
        scene
            .objects
            .iter()
            .filter_map(|o| {
                let clipped = o.envelope().intersection(&window)?;
                Some(Detection {
                    cls: o.cls,
                    bbox: clipped.translate(-window.x, -window.y),
                    confidence: o.confidence,
                })
            })
            .collect()
    }

    fn scene_orient(&self, key: &ImageKey, size: u32) -> Vec<ObbDetection> {
        let Some(scene) = self.scenario.scene.as_ref().filter(|s| s.zoom == key.z) else {
            return Vec::new();
        };
        let crop = BBox::new(key.origin.0 as f64, key.origin.1 as f64, f64::from(size), f64::from(size));
        let shift = Vec2::new(-crop.x, -crop.y);
        let mut out = Vec::new();
        for o in &scene.objects {
            if o.space.envelope().intersection(&crop).is_some() {
                out.push(ObbDetection { kind: ObbKind::Space, obb: o.space.translate(shift), confidence: o.confidence });
            }
            for a in &o.aisles {
                if a.envelope().intersection(&crop).is_some() {
                    out.push(ObbDetection { kind: ObbKind::Aisle, obb: a.translate(shift), confidence: o.confidence });
                }
            }
        }
        out
    }
}

impl Backend for MockBackend {
    fn locate(&self, key: &ImageKey, image: &RasterImage) -> Result<Vec<Detection>, BackendError> {
        let dets = match self.locate.get(key) {
            Some(d) => d.clone(),
            None => self.scene_locate(key, image.width()),
        };
        Ok(dets
            .into_iter()
            .enumerate()
            .map(|(i, d)| Detection { bbox: self.jitter_bbox(key, i, d.bbox), ..d })
            .collect())
    }

    fn orient(&self, key: &ImageKey, image: &RasterImage) -> Result<Vec<ObbDetection>, BackendError> {
        let dets = match self.orient.get(key) {
            Some(d) => d.clone(),
            None => self.scene_orient(key, image.width()),
        };
        Ok(dets
            .into_iter()
            .enumerate()
            .map(|(i, d)| ObbDetection { obb: self.jitter_obb(key, i, d.obb), ..d })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::RgbImage;

    fn window() -> RgbImage {
        RgbImage::new(512, 512)
    }

    #[test]
    fn empty_script_gives_nothing() {
        let m = MockBackend::new(Scenario::default(), None).unwrap();
        assert!(m.locate(&ImageKey::new(20, (0, 0)), &window()).unwrap().is_empty());
        assert!(m.orient(&ImageKey::new(20, (0, 0)), &RgbImage::new(100, 100)).unwrap().is_empty());
    }

    #[test]
    fn scripted_key_is_echoed() {
        let text = r#"{"locate": {"20/4/5:0,0": [{"class": "dp_one_aisle", "bbox": [10, 20, 30, 50], "confidence": 0.9}]}}"#;
        let m = MockBackend::from_json(text, None).unwrap();
        let d = m.locate(&ImageKey::new(20, (4 * 256, 5 * 256)), &window()).unwrap();
        assert_eq!(d, vec![Detection { cls: ParkingClass::DpOneAisle, bbox: BBox::new(10.0, 20.0, 30.0, 50.0), confidence: 0.9 }]);
        assert!(m.locate(&ImageKey::new(20, (0, 0)), &window()).unwrap().is_empty());
    }

    #[test]
    fn malformed_scenarios_rejected() {
        assert!(matches!(MockBackend::from_json("{\"locate\": 3}", None), Err(ScenarioError::Parse(_))));
        assert!(matches!(
            MockBackend::from_json(r#"{"locate": {"nope": []}}"#, None),
            Err(ScenarioError::Key(_))
        ));
        assert!(MockBackend::new(Scenario::default(), Some(Noise { sigma_px: -1.0, seed: 0 })).is_err());
    }

    #[test]
    fn scene_clips_partial_objects() {
        let obj = SceneObject {
            cls: ParkingClass::OneAisle,
            confidence: 0.8,
            space: OrientedBox::new(Vec2::new(500.0, 100.0), 40.0, 20.0, 0.0),
            aisles: vec![],
        };
        let m = MockBackend::from_scene(Scene { zoom: 18, objects: vec![obj] });
        let d = m.locate(&ImageKey::new(18, (0, 0)), &window()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].bbox, BBox::new(480.0, 90.0, 32.0, 20.0));
        let shifted = m.locate(&ImageKey::new(18, (256, 0)), &window()).unwrap();
        assert_eq!(shifted[0].bbox, BBox::new(224.0, 90.0, 40.0, 20.0));
        assert!(m.locate(&ImageKey::new(19, (0, 0)), &window()).unwrap().is_empty());
    }

    #[test]
    fn seeded_jitter_is_reproducible() {
        let text = r#"{"locate": {"20/0/0:0,0": [{"class": "one_aisle", "bbox": [100, 100, 30, 50], "confidence": 0.9}]}}"#;
        let noise = Some(Noise { sigma_px: 2.0, seed: 11 });
        let a = MockBackend::from_json(text, noise).unwrap();
        let b = MockBackend::from_json(text, noise).unwrap();
        let k = ImageKey::new(20, (0, 0));
        let ra = a.locate(&k, &window()).unwrap();
        assert_eq!(ra, b.locate(&k, &window()).unwrap());
        assert_eq!(ra, a.locate(&k, &window()).unwrap());
        assert_ne!(ra[0].bbox, BBox::new(100.0, 100.0, 30.0, 50.0));
    }
}
