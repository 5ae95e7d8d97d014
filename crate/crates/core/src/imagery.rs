//! Tile acquisition, the on-disk tile cache, stitching, resampling and crops.
//!
//! Every mosaic is built from 256 px tiles. Sources that serve 512 px tiles are
//! normalized with a Lanczos-3 resize as soon as they are loaded.

use crate::geo::{self, GeoError, GeoPoint, TileCoord};
use image::{imageops, Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;
use thiserror::Error;

pub type RasterImage = RgbImage;

/// Tile size every pipeline stage works with.
pub const MOSAIC_TILE_SIZE: u32 = 256;

/// Environment variable holding the tile-source API key.
pub const API_KEY_ENV: &str = "DPARK_TILE_API_KEY";

#[derive(Debug, Error)]
pub enum ImageryError {
    #[error("bounding box is inverted: top-left must be north-west of bottom-right")]
    InvertedBBox,
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("tile size {0} is not supported (expected 256 or 512)")]
    UnsupportedTileSize(u32),
    #[error("url template `{0}` must contain {{x}}, {{y}} and {{z}}")]
    BadTemplate(String),
    #[error("failed to decode tile {tile}: {source}")]
    Decode { tile: TileCoord, source: image::ImageError },
    #[error("tile {tile} is {got}x{got2}, expected {expected}x{expected}")]
    WrongTileDims { tile: TileCoord, got: u32, got2: u32, expected: u32 },
    #[error("transport failure for tile {tile} after {attempts} attempts: {message}")]
    Transport { tile: TileCoord, attempts: u32, message: String },
    #[error("http tile sources are not available in this build")]
    HttpDisabled,
    #[error("stitch inputs must share one square size")]
    SizeMismatch,
    #[error("crop center ({0}, {1}) is outside the mosaic")]
    CenterOutsideMosaic(f64, f64),
    #[error("i/o error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("png encoding failed: {0}")]
    Encode(image::ImageError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceKind {
    UrlTemplate {
        template: String,
        /// Header name carrying the key read from [`API_KEY_ENV`].
        #[serde(default, skip_serializing_if = "Option::is_none")]
        api_key_header: Option<String>,
    },
    LocalDirectory { root: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileSource {
    #[serde(flatten)]
    pub kind: SourceKind,
    #[serde(default = "default_tile_size")]
    pub tile_size: u32,
    /// Highest zoom the source serves.
    pub native_zoom: u8,
    /// Nominal ground resolution, when the provider publishes one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution_cm_per_px: Option<f64>,
}

fn default_tile_size() -> u32 {
    256
}

impl TileSource {
    pub fn validate(&self) -> Result<(), ImageryError> {
        if self.tile_size != 256 && self.tile_size != 512 {
            return Err(ImageryError::UnsupportedTileSize(self.tile_size));
        }
        if let SourceKind::UrlTemplate { template, .. } = &self.kind {
            if !(template.contains("{x}") && template.contains("{y}") && template.contains("{z}")) {
                return Err(ImageryError::BadTemplate(template.clone()));
            }
        }
        Ok(())
    }

    pub fn url_for(&self, t: TileCoord) -> Option<String> {
        match &self.kind {
            SourceKind::UrlTemplate { template, .. } => Some(
                template
                    .replace("{x}", &t.x.to_string())
                    .replace("{y}", &t.y.to_string())
                    .replace("{z}", &t.z.to_string()),
            ),
            SourceKind::LocalDirectory { .. } => None,
        }
    }
}

/// Outcome of fetching one tile.
#[derive(Debug, Clone, PartialEq)]
pub enum TileFetch {
    Tile(RasterImage),
    /// The source has no imagery for this tile.
    Missing,
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub attempts: u32,
    pub backoff: Duration,
    pub timeout: Duration,
    /// Maximum number of tiles in flight.
    pub parallelism: usize,
}

impl Default for FetchOptions {
    fn default() -> Self {
        Self { attempts: 3, backoff: Duration::from_millis(200), timeout: Duration::from_secs(30), parallelism: 8 }
    }
}

/// Tiles whose extents intersect the box spanned by two corners, row-major.
pub fn enumerate_tiles(
    top_left: GeoPoint,
    bottom_right: GeoPoint,
    z: u8,
) -> Result<Vec<TileCoord>, ImageryError> {
    let (x_range, y_range) = tile_ranges(top_left, bottom_right, z)?;
    let mut out = Vec::with_capacity(x_range.clone().count() * y_range.clone().count());
    for y in y_range {
        for x in x_range.clone() {
            out.push(TileCoord { x, y, z });
        }
    }
    Ok(out)
}

/// Column and row ranges covered by a bounding box.
pub fn tile_ranges(
    top_left: GeoPoint,
    bottom_right: GeoPoint,
    z: u8,
) -> Result<(std::ops::RangeInclusive<u32>, std::ops::RangeInclusive<u32>), ImageryError> {
    if top_left.lat < bottom_right.lat || top_left.lon > bottom_right.lon {
        return Err(ImageryError::InvertedBBox);
    }
    let a = geo::lonlat_to_global(top_left, z)?;
    let b = geo::lonlat_to_global(bottom_right, z)?;
    let max_index = (1u64 << z) - 1;
    let span = |lo: f64, hi: f64| -> std::ops::RangeInclusive<u32> {
        let first = lo.floor();
        // a box edge lying exactly on a tile seam does not pull in the next tile
        let last = if hi > lo { hi.ceil() - 1.0 } else { first };
        let clamp = |v: f64| v.clamp(0.0, max_index as f64) as u32;
        clamp(first)..=clamp(last.max(first))
    };
    Ok((span(a.x, b.x), span(a.y, b.y)))
}

pub fn stitch_2x2(
    tl: &RasterImage,
    tr: &RasterImage,
    bl: &RasterImage,
    br: &RasterImage,
) -> Result<RasterImage, ImageryError> {
    let n = tl.width();
    if [tl, tr, bl, br].iter().any(|t| t.width() != n || t.height() != n) {
        return Err(ImageryError::SizeMismatch);
    }
    let mut out = RgbImage::new(2 * n, 2 * n);
    imageops::replace(&mut out, tl, 0, 0);
    imageops::replace(&mut out, tr, i64::from(n), 0);
    imageops::replace(&mut out, bl, 0, i64::from(n));
    imageops::replace(&mut out, br, i64::from(n), i64::from(n));
    Ok(out)
}

/// Lanczos-3 resize to a `target x target` square.
pub fn resample(img: &RasterImage, target: u32) -> RasterImage {
    assert!(target >= 1, "resample target must be at least 1 px");
    if img.width() == target && img.height() == target {
        return img.clone();
    }
    imageops::resize(img, target, target, imageops::FilterType::Lanczos3)
}

pub fn cache_path(root: &Path, t: TileCoord) -> PathBuf {
    root.join(t.z.to_string()).join(t.x.to_string()).join(format!("{}.png", t.y))
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ImageryError + '_ {
    move |source| ImageryError::Io { path: path.to_path_buf(), source }
}

/// Writes `img` as PNG via a temp file and rename, so concurrent writers never expose partial files.
pub fn write_png_atomic(path: &Path, img: &RasterImage) -> Result<(), ImageryError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let tmp = dir.join(format!(
        ".{}.{}.{}.tmp",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("tile"),
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    let bytes = encode_png(img)?;
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn encode_png(img: &RasterImage) -> Result<Vec<u8>, ImageryError> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png).map_err(ImageryError::Encode)?;
    Ok(buf.into_inner())
}

fn decode(tile: TileCoord, bytes: &[u8]) -> Result<RasterImage, ImageryError> {
    image::load_from_memory(bytes)
        .map(|d| d.to_rgb8())
        .map_err(|source| ImageryError::Decode { tile, source })
}

fn check_dims(tile: TileCoord, img: &RasterImage, expected: u32) -> Result<(), ImageryError> {
    if img.width() != expected || img.height() != expected {
        return Err(ImageryError::WrongTileDims { tile, got: img.width(), got2: img.height(), expected });
    }
    Ok(())
}

/// Fetches one tile at the source's native size.
///
/// URL sources go through the cache at `<cache>/<z>/<x>/<y>.png`; a cache hit never
/// touches the network. Local-directory sources read `<root>/<z>/<x>/<y>.png` directly.
pub fn fetch_tile(
    src: &TileSource,
    t: TileCoord,
    cache: &Path,
    opts: &FetchOptions,
) -> Result<TileFetch, ImageryError> {
    match &src.kind {
        SourceKind::LocalDirectory { root } => {
            let path = cache_path(root, t);
            match std::fs::read(&path) {
                Ok(bytes) => {
                    let img = decode(t, &bytes)?;
                    check_dims(t, &img, src.tile_size)?;
                    Ok(TileFetch::Tile(img))
                }
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(TileFetch::Missing),
                Err(e) => Err(ImageryError::Io { path, source: e }),
            }
        }
        SourceKind::UrlTemplate { api_key_header, .. } => {
            let path = cache_path(cache, t);
            if let Ok(bytes) = std::fs::read(&path) {
                if let Ok(img) = decode(t, &bytes) {
                    return Ok(TileFetch::Tile(img));
                }
                log::warn!("discarding undecodable cache entry {}", path.display());
            }
            let url = src.url_for(t).expect("url source");
            let key = api_key_header
                .as_ref()
                .and_then(|h| std::env::var(API_KEY_ENV).ok().map(|k| (h.clone(), k)));
            match http_get_with_retry(&url, key.as_ref(), t, opts)? {
                None => Ok(TileFetch::Missing),
                Some(bytes) => {
                    let img = decode(t, &bytes)?;
                    check_dims(t, &img, src.tile_size)?;
                    write_png_atomic(&path, &img)?;
                    Ok(TileFetch::Tile(img))
                }
            }
        }
    }
}

/// `Ok(None)` for a 404/410, `Ok(Some(body))` on success.
#[cfg(feature = "http")]
fn http_get_with_retry(
    url: &str,
    key: Option<&(String, String)>,
    tile: TileCoord,
    opts: &FetchOptions,
) -> Result<Option<Vec<u8>>, ImageryError> {
    let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(opts.timeout)).build().into();
    let attempts = opts.attempts.max(1);
    let mut last = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(opts.backoff * 2u32.pow(attempt - 1));
        }
        let mut req = agent.get(url);
        if let Some((h, k)) = key {
            req = req.header(h.as_str(), k.as_str());
        }
        match req.call() {
            Ok(mut resp) => match resp.body_mut().with_config().limit(64 << 20).read_to_vec() {
                Ok(body) => return Ok(Some(body)),
                Err(e) => last = e.to_string(),
            },
            Err(ureq::Error::StatusCode(404 | 410)) => return Ok(None),
            Err(e) => last = e.to_string(),
        }
        log::debug!("tile {tile} attempt {} failed: {last}", attempt + 1);
    }
    Err(ImageryError::Transport { tile, attempts, message: last })
}

#[cfg(not(feature = "http"))]
fn http_get_with_retry(
    _url: &str,
    _key: Option<&(String, String)>,
    _tile: TileCoord,
    _opts: &FetchOptions,
) -> Result<Option<Vec<u8>>, ImageryError> {
    Err(ImageryError::HttpDisabled)
}

/// Rectangular grid of 256 px tiles; `None` entries are tiles the source lacked.
#[derive(Debug, Clone)]
pub struct Mosaic {
    pub origin: TileCoord,
    pub cols: u32,
    pub rows: u32,
    tiles: Vec<Option<RasterImage>>,
}

/// What a window or crop extraction had to fill with black.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Coverage {
    pub outside_mosaic: bool,
    pub missing_tile: bool,
}

impl Coverage {
    pub fn padded(&self) -> bool {
        self.outside_mosaic || self.missing_tile
    }
}

impl Mosaic {
    pub fn new(origin: TileCoord, cols: u32, rows: u32, tiles: Vec<Option<RasterImage>>) -> Result<Self, ImageryError> {
        assert_eq!(tiles.len(), (cols * rows) as usize, "tile grid size");
        for t in tiles.iter().flatten() {
            if t.width() != MOSAIC_TILE_SIZE || t.height() != MOSAIC_TILE_SIZE {
                return Err(ImageryError::SizeMismatch);
            }
        }
        Ok(Self { origin, cols, rows, tiles })
    }

    /// Mosaic with every tile black and present.
    pub fn blank(origin: TileCoord, cols: u32, rows: u32) -> Self {
        let tile = RgbImage::new(MOSAIC_TILE_SIZE, MOSAIC_TILE_SIZE);
        Self { origin, cols, rows, tiles: vec![Some(tile); (cols * rows) as usize] }
    }

    pub fn zoom(&self) -> u8 {
        self.origin.z
    }

    pub fn tile(&self, col: u32, row: u32) -> Option<&RasterImage> {
        if col >= self.cols || row >= self.rows {
            return None;
        }
        self.tiles[(row * self.cols + col) as usize].as_ref()
    }

    pub fn tile_mut(&mut self, col: u32, row: u32) -> Option<&mut RasterImage> {
        if col >= self.cols || row >= self.rows {
            return None;
        }
        self.tiles[(row * self.cols + col) as usize].as_mut()
    }

    pub fn missing_tiles(&self) -> Vec<TileCoord> {
        let mut out = Vec::new();
        for row in 0..self.rows {
            for col in 0..self.cols {
                if self.tiles[(row * self.cols + col) as usize].is_none() {
                    out.push(TileCoord { x: self.origin.x + col, y: self.origin.y + row, z: self.origin.z });
                }
            }
        }
        out
    }

    /// World pixel coordinates of the mosaic's top-left corner.
    pub fn origin_px(&self) -> (i64, i64) {
        let ts = i64::from(MOSAIC_TILE_SIZE);
        (i64::from(self.origin.x) * ts, i64::from(self.origin.y) * ts)
    }

    /// World pixel extent `[x0, x1) x [y0, y1)`.
    pub fn extent_px(&self) -> (i64, i64, i64, i64) {
        let (x0, y0) = self.origin_px();
        let ts = i64::from(MOSAIC_TILE_SIZE);
        (x0, y0, x0 + i64::from(self.cols) * ts, y0 + i64::from(self.rows) * ts)
    }

    pub fn pixel(&self, gx: i64, gy: i64) -> Option<Rgb<u8>> {
        let (x0, y0, x1, y1) = self.extent_px();
        if gx < x0 || gy < y0 || gx >= x1 || gy >= y1 {
            return None;
        }
        let ts = i64::from(MOSAIC_TILE_SIZE);
        let (lx, ly) = (gx - x0, gy - y0);
        self.tile((lx / ts) as u32, (ly / ts) as u32)
            .map(|t| *t.get_pixel((lx % ts) as u32, (ly % ts) as u32))
    }

    /// Copies the world-pixel rectangle at `(gx, gy)` of size `w x h`, black where no imagery exists.
    pub fn extract(&self, gx: i64, gy: i64, w: u32, h: u32) -> (RasterImage, Coverage) {
        let mut out = RgbImage::new(w, h);
        let mut cov = Coverage::default();
        let (mx0, my0, mx1, my1) = self.extent_px();
        let (wx1, wy1) = (gx + i64::from(w), gy + i64::from(h));
        if gx < mx0 || gy < my0 || wx1 > mx1 || wy1 > my1 {
            cov.outside_mosaic = true;
        }
        let ts = i64::from(MOSAIC_TILE_SIZE);
        let ix0 = gx.max(mx0);
        let iy0 = gy.max(my0);
        let ix1 = wx1.min(mx1);
        let iy1 = wy1.min(my1);
        if ix0 >= ix1 || iy0 >= iy1 {
            return (out, cov);
        }
        let c0 = (ix0 - mx0) / ts;
        let c1 = (ix1 - 1 - mx0) / ts;
        let r0 = (iy0 - my0) / ts;
        let r1 = (iy1 - 1 - my0) / ts;
        for row in r0..=r1 {
            for col in c0..=c1 {
                let tx0 = mx0 + col * ts;
                let ty0 = my0 + row * ts;
                let sx0 = ix0.max(tx0);
                let sy0 = iy0.max(ty0);
                let sx1 = ix1.min(tx0 + ts);
                let sy1 = iy1.min(ty0 + ts);
                match self.tile(col as u32, row as u32) {
                    None => cov.missing_tile = true,
                    Some(tile) => {
                        let n = 3 * (sx1 - sx0) as usize;
                        for y in sy0..sy1 {
                            let src = 3 * ((y - ty0) as usize * ts as usize + (sx0 - tx0) as usize);
                            let dst = 3 * ((y - gy) as usize * w as usize + (sx0 - gx) as usize);
                            out.as_mut()[dst..dst + n].copy_from_slice(&tile.as_raw()[src..src + n]);
                        }
                    }
                }
            }
        }
        (out, cov)
    }

    /// The full stitched mosaic as a single image.
    pub fn to_image(&self) -> RasterImage {
        let (x0, y0, _, _) = self.extent_px();
        self.extract(x0, y0, self.cols * MOSAIC_TILE_SIZE, self.rows * MOSAIC_TILE_SIZE).0
    }

    /// `size x size` crop whose center pixel contains world pixel position `center`.
    pub fn crop_centered(&self, center: (f64, f64), size: u32) -> Result<Crop, ImageryError> {
        let (x0, y0, x1, y1) = self.extent_px();
        let (cx, cy) = center;
        if !(cx >= x0 as f64 && cy >= y0 as f64 && cx < x1 as f64 && cy < y1 as f64) {
            return Err(ImageryError::CenterOutsideMosaic(cx, cy));
        }
        let (ox, oy) = crop_origin(center, size);
        let (image, coverage) = self.extract(ox, oy, size, size);
        Ok(Crop { image, origin: (ox, oy), padded: coverage.padded() })
    }
}

/// Integer top-left corner putting `center` within half a pixel of the crop's midpoint.
pub fn crop_origin(center: (f64, f64), size: u32) -> (i64, i64) {
    let half = f64::from(size) / 2.0;
    ((center.0 - half).round() as i64, (center.1 - half).round() as i64)
}

#[derive(Debug, Clone)]
pub struct Crop {
    pub image: RasterImage,
    /// World pixel coordinates of the crop's top-left corner.
    pub origin: (i64, i64),
    pub padded: bool,
}

/// Loads tile grid `cols x rows` from `origin`, normalizing 512 px tiles to 256 px.
///
/// Tiles the source lacks become `None` (rendered black). Transport and decode
/// failures are returned as errors.
pub fn fetch_mosaic(
    src: &TileSource,
    origin: TileCoord,
    cols: u32,
    rows: u32,
    cache: &Path,
    opts: &FetchOptions,
) -> Result<Mosaic, ImageryError> {
    src.validate()?;
    let coords: Vec<TileCoord> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (c, r)))
        .map(|(c, r)| TileCoord { x: origin.x + c, y: origin.y + r, z: origin.z })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallelism.max(1))
        .build()
        .expect("fetch pool");
    let results: Vec<Result<TileFetch, ImageryError>> = pool.install(|| {
        use rayon::prelude::*;
        coords.par_iter().map(|&t| fetch_tile(src, t, cache, opts)).collect()
    });
    let mut tiles = Vec::with_capacity(results.len());
    for r in results {
        tiles.push(match r? {
            TileFetch::Tile(img) if img.width() != MOSAIC_TILE_SIZE => Some(resample(&img, MOSAIC_TILE_SIZE)),
            TileFetch::Tile(img) => Some(img),
            TileFetch::Missing => None,
        });
    }
    Mosaic::new(origin, cols, rows, tiles)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solid(n: u32, c: [u8; 3]) -> RgbImage {
        RgbImage::from_pixel(n, n, Rgb(c))
    }

    #[test]
    fn point_bbox_is_one_tile() {
        let p = GeoPoint { lon: -122.3, lat: 47.6 };
        assert_eq!(enumerate_tiles(p, p, 20).unwrap().len(), 1);
    }

    #[test]
    fn seam_spanning_bbox_is_two_tiles() {
        let z = 16;
        let seam = geo::global_to_lonlat(geo::GlobalTilePoint { x: 10_000.0, y: 20_000.5, z });
        let left = GeoPoint { lon: seam.lon - 1e-4, lat: seam.lat };
        let right = GeoPoint { lon: seam.lon + 1e-4, lat: seam.lat };
        let tiles = enumerate_tiles(left, right, z).unwrap();
        assert_eq!(tiles, vec![TileCoord { x: 9_999, y: 20_000, z }, TileCoord { x: 10_000, y: 20_000, z }]);
    }

    #[test]
    fn inverted_bbox_rejected() {
        let a = GeoPoint { lon: -122.3, lat: 47.6 };
        let b = GeoPoint { lon: -122.2, lat: 47.7 };
        assert!(matches!(enumerate_tiles(a, b, 18), Err(ImageryError::InvertedBBox)));
    }

    #[test]
    fn stitch_places_quadrants() {
        let out = stitch_2x2(&solid(4, [1, 0, 0]), &solid(4, [2, 0, 0]), &solid(4, [3, 0, 0]), &solid(4, [4, 0, 0]))
            .unwrap();
        assert_eq!(out.dimensions(), (8, 8));
        assert_eq!(out.get_pixel(3, 3).0[0], 1);
        assert_eq!(out.get_pixel(4, 3).0[0], 2);
        assert_eq!(out.get_pixel(3, 4).0[0], 3);
        assert_eq!(out.get_pixel(4, 4).0[0], 4);
        assert!(matches!(
            stitch_2x2(&solid(4, [0; 3]), &solid(5, [0; 3]), &solid(4, [0; 3]), &solid(4, [0; 3])),
            Err(ImageryError::SizeMismatch)
        ));
    }

    #[test]
    fn resample_identity_and_dc() {
        let mut img = RgbImage::new(16, 16);
        for (x, y, p) in img.enumerate_pixels_mut() {
            *p = Rgb([(x * 13 + y) as u8, 7, 200]);
        }
        assert_eq!(resample(&img, 16), img);
        let flat = solid(512, [90, 120, 33]);
        let small = resample(&flat, 256);
        assert_eq!(small.dimensions(), (256, 256));
        assert!(small.pixels().all(|p| p.0 == [90, 120, 33]));
    }

    #[test]
    fn crop_interior_and_corner() {
        let m = Mosaic::blank(TileCoord { x: 10, y: 10, z: 5 }, 2, 2);
        let (x0, y0) = m.origin_px();
        let c = m.crop_centered((x0 as f64 + 256.0, y0 as f64 + 256.0), 100).unwrap();
        assert!(!c.padded);
        assert_eq!(c.origin, (x0 + 206, y0 + 206));
        let corner = m.crop_centered((x0 as f64, y0 as f64), 100).unwrap();
        assert!(corner.padded);
        assert!(m.crop_centered((x0 as f64 - 1.0, y0 as f64), 100).is_err());
    }

    #[test]
    fn missing_tile_reads_black_and_flags() {
        let mut tiles = vec![Some(solid(256, [9, 9, 9])); 4];
        tiles[3] = None;
        let m = Mosaic::new(TileCoord { x: 0, y: 0, z: 3 }, 2, 2, tiles).unwrap();
        let (img, cov) = m.extract(200, 200, 100, 100);
        assert!(cov.missing_tile && !cov.outside_mosaic);
        assert_eq!(img.get_pixel(0, 0).0, [9, 9, 9]);
        assert_eq!(img.get_pixel(99, 99).0, [0, 0, 0]);
        assert_eq!(m.missing_tiles(), vec![TileCoord { x: 1, y: 1, z: 3 }]);
    }

    #[test]
    fn template_validation() {
        let mut s = TileSource {
            kind: SourceKind::UrlTemplate { template: "http://h/{z}/{x}.png".into(), api_key_header: None },
            tile_size: 256,
            native_zoom: 20,
            resolution_cm_per_px: None,
        };
        assert!(matches!(s.validate(), Err(ImageryError::BadTemplate(_))));
        s.kind = SourceKind::UrlTemplate { template: "http://h/{z}/{x}/{y}.png".into(), api_key_header: None };
        assert!(s.validate().is_ok());
        assert_eq!(s.url_for(TileCoord { x: 1, y: 2, z: 3 }).unwrap(), "http://h/3/1/2.png");
        s.tile_size = 300;
        assert!(s.validate().is_err());
    }
}
