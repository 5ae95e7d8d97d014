//! Detection backends.
//!
//! A [`Backend`] answers two tasks: `locate` finds parking objects in a 512 px
//! window and `orient` fits oriented boxes to spaces and aisles in a 100 px crop.
//! [`Detector`] wraps any backend and applies the confidence thresholds and the
//! class filter, so every backend is filtered the same way.

pub mod mock;
pub mod protocol;
pub mod sidecar;

use crate::geometry::BBox;
use crate::imagery::{RasterImage, MOSAIC_TILE_SIZE};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

pub use crate::geometry::OrientedBox;
pub use mock::{MockBackend, Noise, Scenario, Scene, SceneObject};
pub use sidecar::{Endpoint, SidecarClient};

/// Side of the square window handed to `locate`.
pub const WINDOW_SIZE: u32 = 2 * MOSAIC_TILE_SIZE;
/// Side of the crop handed to `orient`.
pub const CROP_SIZE: u32 = 100;
pub const DEFAULT_CONFIDENCE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParkingClass {
    AccessAisle,
    Curbside,
    DpNoAisle,
    DpOneAisle,
    DpTwoAisle,
    OneAisle,
    TwoAisle,
}

impl ParkingClass {
    pub const ALL: [ParkingClass; 7] = [
        ParkingClass::AccessAisle,
        ParkingClass::Curbside,
        ParkingClass::DpNoAisle,
        ParkingClass::DpOneAisle,
        ParkingClass::DpTwoAisle,
        ParkingClass::OneAisle,
        ParkingClass::TwoAisle,
    ];

    /// The six classes the locator predicts.
    pub const LOCATABLE: [ParkingClass; 6] = [
        ParkingClass::Curbside,
        ParkingClass::DpNoAisle,
        ParkingClass::DpOneAisle,
        ParkingClass::DpTwoAisle,
        ParkingClass::OneAisle,
        ParkingClass::TwoAisle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParkingClass::AccessAisle => "access_aisle",
            ParkingClass::Curbside => "curbside",
            ParkingClass::DpNoAisle => "dp_no_aisle",
            ParkingClass::DpOneAisle => "dp_one_aisle",
            ParkingClass::DpTwoAisle => "dp_two_aisle",
            ParkingClass::OneAisle => "one_aisle",
            ParkingClass::TwoAisle => "two_aisle",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ParkingClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown parking class `{0}`")]
pub struct UnknownClass(pub String);

impl FromStr for ParkingClass {
    type Err = UnknownClass;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParkingClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| UnknownClass(s.to_string()))
    }
}

/// Axis-aligned detection in window pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "class")]
    pub cls: ParkingClass,
    pub bbox: BBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObbKind {
    Space,
    Aisle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObbDetection {
    pub kind: ObbKind,
    pub obb: OrientedBox,
    pub confidence: f64,
}

/// Identifies an image handed to a backend: the tile holding its top-left
/// pixel plus the pixel offset inside that tile. Rendered as `z/x/y:dx,dy`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ImageKey {
    pub z: u8,
    /// World pixel coordinates of the image's top-left corner.
    pub origin: (i64, i64),
}

impl ImageKey {
    pub fn new(z: u8, origin: (i64, i64)) -> Self {
        Self { z, origin }
    }

    fn split(v: i64) -> (i64, i64) {
        let ts = i64::from(MOSAIC_TILE_SIZE);
        (v.div_euclid(ts), v.rem_euclid(ts))
    }
}

impl fmt::Display for ImageKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (tx, dx) = Self::split(self.origin.0);
        let (ty, dy) = Self::split(self.origin.1);
        write!(f, "{}/{}/{}:{},{}", self.z, tx, ty, dx, dy)
    }
}

impl FromStr for ImageKey {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("malformed image key `{s}` (expected z/x/y:dx,dy)");
        let (tile, offset) = s.split_once(':').unwrap_or((s, "0,0"));
        let mut parts = tile.split('/');
        let z: u8 = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let tx: i64 = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let ty: i64 = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        let (dx, dy) = offset.split_once(',').ok_or_else(bad)?;
        let dx: i64 = dx.trim().parse().map_err(|_| bad())?;
        let dy: i64 = dy.trim().parse().map_err(|_| bad())?;
        let ts = i64::from(MOSAIC_TILE_SIZE);
        Ok(ImageKey { z, origin: (tx * ts + dx, ty * ts + dy) })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error("request {id} timed out")]
    Timeout { id: String },
    #[error("protocol violation in reply to {}: {message}", id.as_deref().unwrap_or("<unknown id>"))]
    Protocol { id: Option<String>, message: String },
    #[error("backend reported an error for {id}: {message}")]
    Remote { id: String, message: String },
    #[error("invalid input image: {0}")]
    BadInput(String),
}

/// A detection model, local or remote. Must accept concurrent calls.
pub trait Backend: Send + Sync {
    fn locate(&self, key: &ImageKey, image: &RasterImage) -> Result<Vec<Detection>, BackendError>;
    fn orient(&self, key: &ImageKey, image: &RasterImage) -> Result<Vec<ObbDetection>, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn locate(&self, key: &ImageKey, image: &RasterImage) -> Result<Vec<Detection>, BackendError> {
        (**self).locate(key, image)
    }
    fn orient(&self, key: &ImageKey, image: &RasterImage) -> Result<Vec<ObbDetection>, BackendError> {
        (**self).orient(key, image)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub locate: f64,
    pub orient: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { locate: DEFAULT_CONFIDENCE, orient: DEFAULT_CONFIDENCE }
    }
}

/// Backend-agnostic client: enforces input sizes, thresholds and the locator class set.
#[derive(Clone)]
pub struct Detector {
    backend: Arc<dyn Backend>,
    pub thresholds: Thresholds,
}

impl Detector {
    pub fn new(backend: Arc<dyn Backend>, thresholds: Thresholds) -> Self {
        Self { backend, thresholds }
    }

    pub fn backend(&self) -> &Arc<dyn Backend> {
        &self.backend
    }

    pub fn locate(&self, key: &ImageKey, image: &RasterImage) -> Result<Vec<Detection>, BackendError> {
        expect_square(image, WINDOW_SIZE)?;
        let mut dets = self.backend.locate(key, image)?;
        dets.retain(|d| d.cls != ParkingClass::AccessAisle && d.confidence >= self.thresholds.locate);
        Ok(dets)
    }

    pub fn orient(&self, key: &ImageKey, image: &RasterImage) -> Result<Vec<ObbDetection>, BackendError> {
        expect_square(image, CROP_SIZE)?;
        let mut dets = self.backend.orient(key, image)?;
        dets.retain(|d| d.confidence >= self.thresholds.orient);
        Ok(dets)
    }
}

fn expect_square(image: &RasterImage, size: u32) -> Result<(), BackendError> {
    if image.width() != size || image.height() != size {
        return Err(BackendError::BadInput(format!(
            "expected {size}x{size}, got {}x{}",
            image.width(),
            image.height()
        )));
    }
    Ok(())
}
