//! Coordinate math for the slippy tile system.
//!
//! Three spaces are involved:
//!
//! * tile space: integer [`TileCoord`]s and fractional [`GlobalTilePoint`]s at a zoom level,
//! * WGS84 longitude/latitude ([`GeoPoint`]),
//! * EPSG:3857 pseudo-mercator meters ([`MercatorPoint`]), where widths are measured.
//!
//! Pixel positions follow the pixel-center convention: pixel `(row, col)` of a tile covers
//! `[col, col + 1) x [row, row + 1)` and its center sits at `+0.5`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// WGS84 semi-major axis used by EPSG:3857.
pub const EARTH_RADIUS_M: f64 = 6_378_137.0;

/// Half the EPSG:3857 world extent, `pi * R`.
pub const MERCATOR_HALF_EXTENT_M: f64 = PI * EARTH_RADIUS_M;

/// Latitude limit of the square Web Mercator world, `atan(sinh(pi))` in degrees.
pub const MAX_LATITUDE: f64 = 85.051_128_779_806_59;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("tile ({x}, {y}) is outside the 2^{z} grid")]
    TileOutOfRange { x: u32, y: u32, z: u8 },
    #[error("pixel ({row}, {col}) is outside a {tile_size}px tile")]
    PixelOutOfTile { row: u32, col: u32, tile_size: u32 },
    #[error("latitude {0} is outside the Web Mercator bounds")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0} is outside [-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error("zoom {0} is not supported (max 30)")]
    ZoomOutOfRange(u8),
}

pub const MAX_ZOOM: u8 = 30;

/// Number of tiles along one axis at zoom `z`.
#[inline]
pub fn tiles_per_axis(z: u8) -> f64 {
    (1u64 << z) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileCoord {
    pub x: u32,
    pub y: u32,
    pub z: u8,
}

impl TileCoord {
    pub fn new(x: u32, y: u32, z: u8) -> Result<Self, GeoError> {
        if z > MAX_ZOOM {
            return Err(GeoError::ZoomOutOfRange(z));
        }
        let n = 1u64 << z;
        if u64::from(x) >= n || u64::from(y) >= n {
            return Err(GeoError::TileOutOfRange { x, y, z });
        }
        Ok(Self { x, y, z })
    }

    /// Offset by whole tiles, `None` when the result leaves the grid.
    pub fn offset(&self, dx: i64, dy: i64) -> Option<TileCoord> {
        let n = 1i64 << self.z;
        let x = i64::from(self.x) + dx;
        let y = i64::from(self.y) + dy;
        if (0..n).contains(&x) && (0..n).contains(&y) {
            Some(TileCoord { x: x as u32, y: y as u32, z: self.z })
        } else {
            None
        }
    }
}

impl std::fmt::Display for TileCoord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/{}", self.z, self.x, self.y)
    }
}

/// Fractional tile-space position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalTilePoint {
    pub x: f64,
    pub y: f64,
    pub z: u8,
}

impl GlobalTilePoint {
    /// Position from global pixel coordinates (continuous, tile-size units per tile).
    pub fn from_global_px(px: f64, py: f64, z: u8, tile_size: u32) -> Self {
        Self { x: px / f64::from(tile_size), y: py / f64::from(tile_size), z }
    }

    pub fn to_global_px(&self, tile_size: u32) -> (f64, f64) {
        (self.x * f64::from(tile_size), self.y * f64::from(tile_size))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Result<Self, GeoError> {
        if !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::LongitudeOutOfRange(lon));
        }
        if lat.is_nan() || lat.abs() > MAX_LATITUDE {
            return Err(GeoError::LatitudeOutOfRange(lat));
        }
        Ok(Self { lon, lat })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MercatorPoint {
    pub x: f64,
    pub y: f64,
}

/// Maps a pixel of `tile` to its center in fractional tile space.
pub fn pixel_to_global(
    tile: TileCoord,
    row: u32,
    col: u32,
    tile_size: u32,
) -> Result<GlobalTilePoint, GeoError> {
    if row >= tile_size || col >= tile_size {
        return Err(GeoError::PixelOutOfTile { row, col, tile_size });
    }
    let ts = f64::from(tile_size);
    Ok(GlobalTilePoint {
        x: f64::from(tile.x) + (f64::from(col) + 0.5) / ts,
        y: f64::from(tile.y) + (f64::from(row) + 0.5) / ts,
        z: tile.z,
    })
}

/// Inverse of [`pixel_to_global`]: the tile and `(row, col)` of the pixel containing `p`.
pub fn global_to_pixel(p: GlobalTilePoint, tile_size: u32) -> Result<(TileCoord, u32, u32), GeoError> {
    let ts = f64::from(tile_size);
    let gx = (p.x * ts).floor();
    let gy = (p.y * ts).floor();
    if gx < 0.0 || gy < 0.0 {
        return Err(GeoError::TileOutOfRange { x: 0, y: 0, z: p.z });
    }
    let tx = (gx / ts).floor();
    let ty = (gy / ts).floor();
    let tile = TileCoord::new(tx as u32, ty as u32, p.z)?;
    Ok((tile, (gy - ty * ts) as u32, (gx - tx * ts) as u32))
}

pub fn global_to_lonlat(p: GlobalTilePoint) -> GeoPoint {
    let n = tiles_per_axis(p.z);
    let lon = p.x / n * 360.0 - 180.0;
    let lat = (PI - 2.0 * PI * p.y / n).sinh().atan().to_degrees().clamp(-MAX_LATITUDE, MAX_LATITUDE);
    GeoPoint { lon, lat }
}

pub fn lonlat_to_global(g: GeoPoint, z: u8) -> Result<GlobalTilePoint, GeoError> {
    if g.lat.is_nan() || g.lat.abs() > MAX_LATITUDE {
        return Err(GeoError::LatitudeOutOfRange(g.lat));
    }
    if z > MAX_ZOOM {
        return Err(GeoError::ZoomOutOfRange(z));
    }
    let n = tiles_per_axis(z);
    let x = (g.lon + 180.0) / 360.0 * n;
    let y = (1.0 - g.lat.to_radians().tan().asinh() / PI) / 2.0 * n;
    Ok(GlobalTilePoint { x, y, z })
}

pub fn lonlat_to_mercator(g: GeoPoint) -> MercatorPoint {
    let lat = g.lat.to_radians();
    MercatorPoint {
        x: EARTH_RADIUS_M * g.lon.to_radians(),
        // asinh(tan(lat)) equals ln(tan(pi/4 + lat/2)) and is exact at the equator
        y: EARTH_RADIUS_M * lat.tan().asinh(),
    }
}

/// Direct tile-space to EPSG:3857 mapping; the projection is affine in tile space.
pub fn global_to_mercator(p: GlobalTilePoint) -> MercatorPoint {
    let n = tiles_per_axis(p.z);
    MercatorPoint {
        x: (2.0 * p.x / n - 1.0) * MERCATOR_HALF_EXTENT_M,
        y: (1.0 - 2.0 * p.y / n) * MERCATOR_HALF_EXTENT_M,
    }
}

pub fn mercator_distance(a: MercatorPoint, b: MercatorPoint) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// `cos(lat)`: factor turning EPSG:3857 lengths into approximate ground lengths.
pub fn ground_scale_correction(lat_deg: f64) -> f64 {
    lat_deg.to_radians().cos()
}

/// EPSG:3857 meters spanned by one pixel at zoom `z` (uniform across the projection).
pub fn mercator_meters_per_pixel(z: u8, tile_size: u32) -> f64 {
    2.0 * MERCATOR_HALF_EXTENT_M / (tiles_per_axis(z) * f64::from(tile_size))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tile_midpoint_lands_on_half_offsets() {
        // the midpoint of the tile, shared by pixels 127 and 128, is at .5
        let g = GlobalTilePoint::from_global_px(168_046.0 * 256.0 + 128.0, 366_004.0 * 256.0 + 128.0, 20, 256);
        assert_eq!((g.x, g.y), (168_046.5, 366_004.5));
        // pixel index 128 is sampled at its center, half a pixel further
        let t = TileCoord::new(168_046, 366_004, 20).unwrap();
        let p = pixel_to_global(t, 128, 128, 256).unwrap();
        assert_eq!((p.x, p.y), (168_046.0 + 128.5 / 256.0, 366_004.0 + 128.5 / 256.0));
    }

    #[test]
    fn first_pixel_of_first_tile() {
        let g = pixel_to_global(TileCoord::new(0, 0, 1).unwrap(), 0, 0, 256).unwrap();
        assert_eq!(g.x, 0.5 / 256.0);
        assert_eq!(g.y, 0.5 / 256.0);
    }

    #[test]
    fn pixel_round_trip() {
        let t = TileCoord::new(5, 9, 4).unwrap();
        for (r, c) in [(0, 0), (255, 255), (17, 200)] {
            let g = pixel_to_global(t, r, c, 256).unwrap();
            assert_eq!(global_to_pixel(g, 256).unwrap(), (t, r, c));
        }
    }

    #[test]
    fn pixel_outside_tile_rejected() {
        let t = TileCoord::new(0, 0, 1).unwrap();
        assert!(matches!(pixel_to_global(t, 256, 0, 256), Err(GeoError::PixelOutOfTile { .. })));
        assert!(TileCoord::new(2, 0, 1).is_err());
    }

    #[test]
    fn projection_center() {
        let n = tiles_per_axis(20) / 2.0;
        let g = global_to_lonlat(GlobalTilePoint { x: n, y: n, z: 20 });
        assert_eq!(g.lon, 0.0);
        assert!(g.lat.abs() < 1e-12);
        let back = lonlat_to_global(GeoPoint { lon: 0.0, lat: 0.0 }, 20).unwrap();
        assert_eq!((back.x, back.y), (n, n));
    }

    #[test]
    fn latitude_outside_mercator_rejected() {
        assert!(lonlat_to_global(GeoPoint { lon: 0.0, lat: 86.0 }, 20).is_err());
        assert!(GeoPoint::new(0.0, -89.0).is_err());
        assert!(GeoPoint::new(181.0, 0.0).is_err());
    }

    #[test]
    fn mercator_origin_and_distance() {
        let o = lonlat_to_mercator(GeoPoint { lon: 0.0, lat: 0.0 });
        assert_eq!((o.x, o.y), (0.0, 0.0));
        assert_eq!(mercator_distance(o, o), 0.0);
        let d = mercator_distance(MercatorPoint { x: 0.0, y: 0.0 }, MercatorPoint { x: 3.0, y: 4.0 });
        assert_eq!(d, 5.0);
    }

    #[test]
    fn ground_scale() {
        assert_eq!(ground_scale_correction(0.0), 1.0);
        assert!((ground_scale_correction(60.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn direct_mercator_matches_lonlat_chain() {
        let p = GlobalTilePoint { x: 168_046.5, y: 366_004.5, z: 20 };
        let a = global_to_mercator(p);
        let b = lonlat_to_mercator(global_to_lonlat(p));
        assert!((a.x - b.x).abs() < 1e-6 && (a.y - b.y).abs() < 1e-6);
    }

    #[test]
    fn tile_offset_stays_in_grid() {
        let t = TileCoord::new(0, 0, 2).unwrap();
        assert_eq!(t.offset(3, 3), Some(TileCoord { x: 3, y: 3, z: 2 }));
        assert_eq!(t.offset(-1, 0), None);
        assert_eq!(t.offset(4, 0), None);
    }
}
