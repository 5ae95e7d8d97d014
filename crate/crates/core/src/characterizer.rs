//! Accessible-width characterization from the oriented boxes of one crop.
//!
//! The width of a space is its short-axis extent plus, on each long side, the
//! distance from the midpoint of that long edge to the farthest point where the
//! outward normal ray leaves an associated access aisle. Aisle area overlapping
//! the space is never counted because the ray starts on the space edge.

use crate::detector::{ObbDetection, ObbKind, ParkingClass, CROP_SIZE};
use crate::geo::{self, GeoPoint, GlobalTilePoint};
use crate::geometry::{ray_obb_far_hit, segment_box_distance, OrientedBox, Vec2};
use crate::imagery::MOSAIC_TILE_SIZE;
use serde::{Deserialize, Serialize};

/// Fraction of the space's long edge an aisle must run along.
pub const MIN_EDGE_OVERLAP: f64 = 0.4;
/// Largest gap between an aisle and the long edge it serves, in pixels.
pub const MAX_EDGE_GAP_PX: f64 = 20.0;
/// Length/width ratio below which the long axis is considered ambiguous.
pub const NEAR_SQUARE_RATIO: f64 = 1.05;

pub fn crop_center() -> Vec2 {
    let h = f64::from(CROP_SIZE) / 2.0;
    Vec2::new(h, h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    /// The `+short_axis` side of the space.
    Right,
}

impl Side {
    /// Outward unit normal of this side's long edge.
    pub fn normal(self, space: &OrientedBox) -> Vec2 {
        match self {
            Side::Right => space.short_axis(),
            Side::Left => -space.short_axis(),
        }
    }

    /// The long edge on this side as a segment.
    pub fn edge(self, space: &OrientedBox) -> (Vec2, Vec2) {
        let mid = self.edge_midpoint(space);
        let half = space.long_axis().scale(space.length / 2.0);
        (mid - half, mid + half)
    }

    pub fn edge_midpoint(self, space: &OrientedBox) -> Vec2 {
        space.center + self.normal(space).scale(space.width / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideAssociation {
    pub side: Side,
    pub aisles: Vec<ObbDetection>,
    pub extent_px: f64,
}

/// Highest-confidence space box containing `center`. Ties keep the earlier box.
pub fn select_center_space(obbs: &[ObbDetection], center: Vec2) -> Option<ObbDetection> {
    obbs.iter()
        .filter(|o| o.kind == ObbKind::Space && o.obb.contains(center))
        .fold(None, |best: Option<&ObbDetection>, o| match best {
            Some(b) if b.confidence >= o.confidence => Some(b),
            _ => Some(o),
        })
        .copied()
}

/// Length of the overlap between the aisle's projection on the space's long axis and the long edge.
pub fn long_axis_overlap(space: &OrientedBox, aisle: &OrientedBox) -> f64 {
    let d = space.long_axis();
    let (lo, hi) = aisle
        .corners()
        .iter()
        .map(|c| (*c - space.center).dot(d))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p), hi.max(p)));
    let half = space.length / 2.0;
    (hi.min(half) - lo.max(-half)).max(0.0)
}

/// The side an aisle would serve, from the sign of its centroid's short-axis offset.
pub fn side_of(space: &OrientedBox, aisle: &OrientedBox) -> Side {
    if (aisle.center - space.center).dot(space.short_axis()) >= 0.0 {
        Side::Right
    } else {
        Side::Left
    }
}

/// Whether `aisle` runs along enough of the long edge on its side and lies close enough to it.
pub fn aisle_qualifies(space: &OrientedBox, aisle: &OrientedBox) -> bool {
    if long_axis_overlap(space, aisle) < MIN_EDGE_OVERLAP * space.length {
        return false;
    }
    let (a, b) = side_of(space, aisle).edge(space);
    segment_box_distance(a, b, aisle) <= MAX_EDGE_GAP_PX
}

/// Splits the qualifying aisles into `(left, right)` lists, preserving input order.
pub fn associate_aisles(space: &OrientedBox, obbs: &[ObbDetection]) -> (Vec<ObbDetection>, Vec<ObbDetection>) {
    let mut left = Vec::new();
    let mut right = Vec::new();
    for o in obbs.iter().filter(|o| o.kind == ObbKind::Aisle) {
        if aisle_qualifies(space, &o.obb) {
            match side_of(space, &o.obb) {
                Side::Left => left.push(*o),
                Side::Right => right.push(*o),
            }
        }
    }
    (left, right)
}

/// Farthest exit of the outward edge-midpoint ray through any of `aisles`; 0 without a hit.
pub fn aisle_extent(space: &OrientedBox, side: Side, aisles: &[ObbDetection]) -> f64 {
    let origin = side.edge_midpoint(space);
    let dir = side.normal(space);
    aisles
        .iter()
        .filter_map(|a| ray_obb_far_hit(origin, dir, &a.obb))
        .fold(0.0, f64::max)
}

pub fn total_width(space: &OrientedBox, left: &SideAssociation, right: &SideAssociation) -> f64 {
    space.width + left.extent_px + right.extent_px
}

/// EPSG:3857 length of a pixel span at zoom `z`, optionally scaled to ground by `cos(lat)`.
pub fn width_to_meters(width_px: f64, centroid: GeoPoint, z: u8, ground_corrected: bool) -> f64 {
    let m = width_px * geo::mercator_meters_per_pixel(z, MOSAIC_TILE_SIZE);
    if ground_corrected {
        m * geo::ground_scale_correction(centroid.lat)
    } else {
        m
    }
}

/// Geometry of one characterized space in crop pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropWidth {
    pub space: ObbDetection,
    pub left: SideAssociation,
    pub right: SideAssociation,
    pub space_width_px: f64,
    pub total_width_px: f64,
    pub near_square: bool,
}

/// Center-space selection, aisle association and width for one crop's boxes.
pub fn characterize_crop(obbs: &[ObbDetection]) -> Option<CropWidth> {
    let space = select_center_space(obbs, crop_center())?;
    let (l, r) = associate_aisles(&space.obb, obbs);
    let left = SideAssociation { side: Side::Left, extent_px: aisle_extent(&space.obb, Side::Left, &l), aisles: l };
    let right = SideAssociation { side: Side::Right, extent_px: aisle_extent(&space.obb, Side::Right, &r), aisles: r };
    let total = total_width(&space.obb, &left, &right);
    Some(CropWidth {
        space,
        space_width_px: space.obb.width,
        total_width_px: total,
        near_square: space.obb.length / space.obb.width < NEAR_SQUARE_RATIO,
        left,
        right,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceFlags {
    pub padded_crop: bool,
    pub suspected_oversize: bool,
    pub ground_corrected: bool,
    pub uncharacterized: bool,
    pub near_square: bool,
    pub boundary_adjacent: bool,
}

impl SpaceFlags {
    pub fn names(&self) -> Vec<&'static str> {
        [
            (self.padded_crop, "padded_crop"),
            (self.suspected_oversize, "suspected_oversize"),
            (self.ground_corrected, "ground_corrected"),
            (self.uncharacterized, "uncharacterized"),
            (self.near_square, "near_square"),
            (self.boundary_adjacent, "boundary_adjacent"),
        ]
        .into_iter()
        .filter_map(|(on, n)| on.then_some(n))
        .collect()
    }
}

/// Per-side width summary in pixels and meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Widths {
    pub space_width_px: f64,
    pub left: SideAssociation,
    pub right: SideAssociation,
    pub total_width_px: f64,
    pub space_width_m: f64,
    pub aisle_width_m_left: f64,
    pub aisle_width_m_right: f64,
    pub total_width_m: f64,
}

/// One located parking space with its width and position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizedSpace {
    pub id: String,
    #[serde(rename = "class")]
    pub cls: ParkingClass,
    pub confidence: f64,
    /// Locator box in world pixels.
    pub bbox: crate::geometry::BBox,
    /// World pixel position of the crop's top-left corner.
    pub crop_origin: (i64, i64),
    /// Selected space box in crop pixels; absent when uncharacterized.
    pub space_obb: Option<OrientedBox>,
    /// Centroid in world pixels.
    pub centroid_px: (f64, f64),
    pub centroid: GeoPoint,
    /// Footprint ring (4 corners, WGS84).
    pub footprint: Vec<GeoPoint>,
    pub widths: Option<Widths>,
    pub flags: SpaceFlags,
}

/// World pixel position to WGS84.
pub fn world_px_to_lonlat(p: Vec2, z: u8) -> GeoPoint {
    geo::global_to_lonlat(GlobalTilePoint::from_global_px(p.x, p.y, z, MOSAIC_TILE_SIZE))
}

pub struct CharacterizeInput<'a> {
    pub id: String,
    pub cls: ParkingClass,
    pub confidence: f64,
    pub bbox: crate::geometry::BBox,
    pub crop_origin: (i64, i64),
    pub padded_crop: bool,
    pub obbs: &'a [ObbDetection],
    pub zoom: u8,
    pub ground_corrected: bool,
}

/// Builds the georeferenced record for one located object; falls back to the
/// locator box when no space box contains the crop center.
pub fn characterize(input: CharacterizeInput<'_>) -> CharacterizedSpace {
    let z = input.zoom;
    let shift = Vec2::new(input.crop_origin.0 as f64, input.crop_origin.1 as f64);
    let mut flags = SpaceFlags {
        padded_crop: input.padded_crop,
        suspected_oversize: input.bbox.w > crate::scanner::MAX_OBJECT_PX || input.bbox.h > crate::scanner::MAX_OBJECT_PX,
        ground_corrected: input.ground_corrected,
        ..Default::default()
    };
    let crop = characterize_crop(input.obbs);
    let (center, ring, widths, space_obb) = match crop {
        Some(cw) => {
            flags.near_square = cw.near_square;
            let world = cw.space.obb.translate(shift);
            let centroid = world_px_to_lonlat(world.center, z);
            let to_m = |px: f64| width_to_meters(px, centroid, z, input.ground_corrected);
            let widths = Widths {
                space_width_px: cw.space_width_px,
                total_width_px: cw.total_width_px,
                space_width_m: to_m(cw.space_width_px),
                aisle_width_m_left: to_m(cw.left.extent_px),
                aisle_width_m_right: to_m(cw.right.extent_px),
                total_width_m: to_m(cw.total_width_px),
                left: cw.left,
                right: cw.right,
            };
            (world.center, world.corners().to_vec(), Some(widths), Some(cw.space.obb))
        }
        None => {
            flags.uncharacterized = true;
            (input.bbox.center(), input.bbox.corners().to_vec(), None, None)
        }
    };
    CharacterizedSpace {
        id: input.id,
        cls: input.cls,
        confidence: input.confidence,
        bbox: input.bbox,
        crop_origin: input.crop_origin,
        space_obb,
        centroid_px: (center.x, center.y),
        centroid: world_px_to_lonlat(center, z),
        footprint: ring.into_iter().map(|p| world_px_to_lonlat(p, z)).collect(),
        widths,
        flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn space(conf: f64, obb: OrientedBox) -> ObbDetection {
        ObbDetection { kind: ObbKind::Space, obb, confidence: conf }
    }

    fn aisle(obb: OrientedBox) -> ObbDetection {
        ObbDetection { kind: ObbKind::Aisle, obb, confidence: 0.9 }
    }

    // space along x: long edges at y = 35 (left, -n) and y = 65 (right, +n)
    fn horizontal_space() -> OrientedBox {
        OrientedBox::new(Vec2::new(50.0, 50.0), 55.0, 30.0, 0.0)
    }

    #[test]
    fn picks_highest_confidence_space_at_center() {
        let a = space(0.7, OrientedBox::new(Vec2::new(50.0, 50.0), 55.0, 30.0, FRAC_PI_2));
        let b = space(0.9, OrientedBox::new(Vec2::new(52.0, 50.0), 50.0, 30.0, FRAC_PI_2));
        assert_eq!(select_center_space(&[a, b], crop_center()), Some(b));
        let off = space(0.9, OrientedBox::new(Vec2::new(10.0, 10.0), 10.0, 5.0, 0.0));
        assert_eq!(select_center_space(&[off], crop_center()), None);
    }

    #[test]
    fn flush_aisle_extent() {
        let s = horizontal_space();
        let a = aisle(OrientedBox::new(Vec2::new(50.0, 65.0 + 7.5), 55.0, 15.0, 0.0));
        let (l, r) = associate_aisles(&s, &[a]);
        assert!(l.is_empty());
        assert_eq!(r.len(), 1);
        assert!((aisle_extent(&s, Side::Right, &r) - 15.0).abs() < 1e-9);
    }

    #[test]
    fn association_thresholds() {
        let s = horizontal_space();
        let short = aisle(OrientedBox::new(Vec2::new(50.0 - 27.5 + 0.15 * 55.0, 72.5), 0.3 * 55.0, 15.0, 0.0));
        assert!(!aisle_qualifies(&s, &short.obb));
        let far = aisle(OrientedBox::new(Vec2::new(50.0, 65.0 + 25.0 + 7.5), 55.0, 15.0, 0.0));
        assert!(!aisle_qualifies(&s, &far.obb));
        let near = aisle(OrientedBox::new(Vec2::new(50.0, 65.0 + 20.0 + 7.5), 55.0, 15.0, 0.0));
        assert!(aisle_qualifies(&s, &near.obb));
    }

    #[test]
    fn aisle_inside_space_adds_nothing() {
        let s = horizontal_space();
        let inner = aisle(OrientedBox::new(Vec2::new(50.0, 58.0), 40.0, 10.0, 0.0));
        let (_, r) = associate_aisles(&s, &[inner]);
        assert_eq!(r.len(), 1);
        assert_eq!(aisle_extent(&s, Side::Right, &r), 0.0);
    }

    #[test]
    fn width_sum() {
        let s = horizontal_space();
        let obbs = [
            space(0.8, s),
            aisle(OrientedBox::new(Vec2::new(50.0, 72.5), 55.0, 15.0, 0.0)),
            aisle(OrientedBox::new(Vec2::new(50.0, 29.0), 55.0, 12.0, 0.0)),
        ];
        let cw = characterize_crop(&obbs).unwrap();
        assert!((cw.total_width_px - 57.0).abs() < 1e-9);
        assert!((cw.left.extent_px - 12.0).abs() < 1e-9);
    }
}
