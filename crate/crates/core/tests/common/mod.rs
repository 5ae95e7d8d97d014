//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use dpark::detector::{MockBackend, ParkingClass, Scene, SceneObject};
use dpark::geo::{self, GlobalTilePoint, TileCoord};
use dpark::geometry::{BBox, OrientedBox, Vec2};
use dpark::imagery::{Mosaic, MOSAIC_TILE_SIZE};
use dpark::pipeline::{RegionReport, RunConfig};
use dpark::scanner::Pass;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

pub const Z: u8 = 20;
/// A 6 x 6 tile region in central Seattle.
pub const REGION_ORIGIN: (u32, u32) = (168_040, 366_000);
pub const REGION_TILES: u32 = 6;
/// Clear space kept between object envelopes.
pub const SEPARATION_PX: f64 = 21.0;

pub fn region_origin() -> TileCoord {
    TileCoord { x: REGION_ORIGIN.0, y: REGION_ORIGIN.1, z: Z }
}

pub fn region_origin_px() -> Vec2 {
    let ts = f64::from(MOSAIC_TILE_SIZE);
    Vec2::new(f64::from(REGION_ORIGIN.0) * ts, f64::from(REGION_ORIGIN.1) * ts)
}

pub fn region_size_px() -> f64 {
    f64::from(REGION_TILES * MOSAIC_TILE_SIZE)
}

pub fn blank_region() -> Mosaic {
    Mosaic::blank(region_origin(), REGION_TILES, REGION_TILES)
}

pub fn aisle_count(cls: ParkingClass) -> usize {
    match cls {
        ParkingClass::Curbside | ParkingClass::DpNoAisle | ParkingClass::AccessAisle => 0,
        ParkingClass::DpOneAisle | ParkingClass::OneAisle => 1,
        ParkingClass::DpTwoAisle | ParkingClass::TwoAisle => 2,
    }
}

/// A space with flush, full-length aisles on one or both long sides.
pub fn flush_object(cls: ParkingClass, confidence: f64, center: Vec2, l: f64, w: f64, theta: f64, aisles: &[(i8, f64)]) -> SceneObject {
    let space = OrientedBox::new(center, l, w, theta);
    let n = space.short_axis();
    let aisles = aisles
        .iter()
        .map(|&(side, a)| OrientedBox::new(center + n.scale(f64::from(side) * (w + a) / 2.0), l, a, theta))
        .collect();
    SceneObject { cls, confidence, space, aisles }
}

/// Random object whose envelope fits in 100 px and whose envelope center lies well inside its space.
pub fn random_object(rng: &mut ChaCha8Rng, center: Vec2) -> SceneObject {
    loop {
        let cls = ParkingClass::LOCATABLE[rng.random_range(0..ParkingClass::LOCATABLE.len())];
        let w = rng.random_range(12.0..28.0);
        let l = rng.random_range(1.3 * w..70.0f64.max(1.4 * w));
        let theta = rng.random_range(0.0..PI);
        let sides: &[i8] = match aisle_count(cls) {
            0 => &[],
            1 => {
                if rng.random_bool(0.5) {
                    &[1]
                } else {
                    &[-1]
                }
            }
            _ => &[-1, 1],
        };
        let aisles: Vec<(i8, f64)> = sides.iter().map(|&s| (s, rng.random_range(0.3 * w..0.8 * w))).collect();
        let o = flush_object(cls, rng.random_range(0.4..1.0), center, l, w, theta, &aisles);
        let env = o.envelope();
        if env.w <= 100.0 && env.h <= 100.0 {
            return o;
        }
    }
}

/// Total width of a flush object: space plus every aisle.
pub fn flush_total_width(o: &SceneObject) -> f64 {
    o.space.width + o.aisles.iter().map(|a| a.width).sum::<f64>()
}

fn separated(a: &BBox, b: &BBox, gap: f64) -> bool {
    a.x1() + gap < b.x || b.x1() + gap < a.x || a.y1() + gap < b.y || b.y1() + gap < a.y
}

/// Places up to `n` objects in the square `[lo, hi]^2` (world px), keeping envelopes apart.
///
/// `anchors` are tried first as object centers; afterwards centers are uniform.
/// With `inside`, envelopes stay within `[lo, hi]^2`.
pub fn random_scene(rng: &mut ChaCha8Rng, lo: Vec2, hi: Vec2, n: usize, anchors: &[Vec2], inside: bool) -> Scene {
    let mut objects: Vec<SceneObject> = Vec::new();
    let mut attempts = 0;
    let mut anchor = anchors.iter();
    while objects.len() < n && attempts < 50 * n {
        attempts += 1;
        let c = match anchor.next() {
            Some(&a) => a + Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)),
            None => Vec2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y)),
        };
        let o = random_object(rng, c);
        let env = o.envelope();
        if inside && !(env.x > lo.x && env.y > lo.y && env.x1() < hi.x && env.y1() < hi.y) {
            continue;
        }
        if objects.iter().all(|p| separated(&p.envelope(), &env, SEPARATION_PX)) {
            objects.push(o);
        }
    }
    Scene { zoom: Z, objects }
}

/// Points on the window seams and corners of the region, relative to the region origin.
pub fn seam_anchors() -> Vec<Vec2> {
    let o = region_origin_px();
    let s = region_size_px();
    let mut out = Vec::new();
    let mut k = 256.0;
    while k < s {
        out.push(o + Vec2::new(k, 100.0 + k / 3.0));
        out.push(o + Vec2::new(150.0 + k / 4.0, k));
        out.push(o + Vec2::new(k, k));
        k += 256.0;
    }
    out
}

/// Keep regions written directly in each pass's window coordinates.
pub fn keep_regions_containing(u: f64, v: f64, m: f64) -> Vec<Pass> {
    let interior = |w: f64| (m..=512.0 - m).contains(&w);
    let seam = |w: f64| w > 256.0 - m && w < 256.0 + m;
    let mut out = Vec::new();
    for pass in [Pass::Interior, Pass::VerticalSeam, Pass::HorizontalSeam, Pass::Corner] {
        let (ox, oy) = pass.offset();
        let (wu, wv) = (u - ox as f64, v - oy as f64);
        let ok_u = if ox == 0 { interior(wu) } else { seam(wu) };
        let ok_v = if oy == 0 { interior(wv) } else { seam(wv) };
        if ok_u && ok_v {
            out.push(pass);
        }
    }
    out
}

/// Minimum over all injective row/column assignments, by enumeration.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return 0.0;
    }
    if n > m {
        let t: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| cost[i][j]).collect()).collect();
        return brute_force_assignment(&t);
    }
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == cost.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                go(cost, row + 1, used, acc + cost[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; m], 0.0, &mut best);
    best
}

/// Far end of the ray's overlap with `bx` found with nothing but point containment.
///
/// `t_inside` is a parameter known to lie in the box; random samples raise it,
/// bisection against `t_max` sharpens the bracket.
pub fn containment_far_hit(rng: &mut ChaCha8Rng, origin: Vec2, dir: Vec2, bx: &OrientedBox, t_inside: f64, t_max: f64) -> f64 {
    let inside = |t: f64| bx.contains(origin + dir.scale(t));
    assert!(inside(t_inside), "seed parameter must lie in the box");
    let mut lo = t_inside;
    for _ in 0..400 {
        let t = rng.random_range(0.0..t_max);
        if t > lo && inside(t) {
            lo = t;
        }
    }
    let mut hi = t_max;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Config for a mock run over the shared region; the box is inset half a pixel from the tile grid.
pub fn region_config(scenario: &Path, tiles_root: &Path, workers: usize) -> RunConfig {
    let o = region_origin_px();
    let s = region_size_px();
    let to_ll = |x: f64, y: f64| geo::global_to_lonlat(GlobalTilePoint::from_global_px(x, y, Z, MOSAIC_TILE_SIZE));
    let tl = to_ll(o.x + 0.5, o.y + 0.5);
    let br = to_ll(o.x + s - 0.5, o.y + s - 0.5);
    let text = serde_json::json!({
        "source": {"kind": "local_directory", "root": tiles_root, "native_zoom": Z},
        "zoom": Z,
        "bbox": {"top_left": tl, "bottom_right": br},
        "backend": {"kind": "mock", "scenario": scenario},
        "seed": 7,
        "workers": workers,
    });
    RunConfig::from_json(&text.to_string()).expect("valid config")
}

/// Runs the pipeline over a blank region with a scene-driven mock.
pub fn run_scene(scene: &Scene, workers: usize) -> RegionReport {
    let config = region_config(Path::new("unused-scenario.json"), Path::new("unused-tiles"), workers);
    dpark::pipeline::run_on_mosaic(&config, &blank_region(), Arc::new(MockBackend::from_scene(scene.clone())))
}

/// Writes 256 px gray PNG tiles for the shared region under `root`.
pub fn write_region_tiles(root: &Path) {
    let img = image::RgbImage::from_pixel(256, 256, image::Rgb([90, 90, 90]));
    for dy in 0..REGION_TILES {
        for dx in 0..REGION_TILES {
            let t = TileCoord { x: REGION_ORIGIN.0 + dx, y: REGION_ORIGIN.1 + dy, z: Z };
            dpark::imagery::write_png_atomic(&dpark::imagery::cache_path(root, t), &img).unwrap();
        }
    }
}

/// Report JSON with the timing block removed.
pub fn report_without_timing(report: &RegionReport) -> String {
    let mut r = report.clone();
    r.timing = None;
    dpark::pipeline::report_json(&r)
}

/// Compares a report against the scene it was produced from, returning the first mismatch.
pub fn check_oracle_identity(report: &RegionReport, scene: &Scene) -> Result<(), String> {
    if report.spaces.len() != scene.objects.len() {
        return Err(format!("{} spaces for {} objects", report.spaces.len(), scene.objects.len()));
    }
    let mut unused: Vec<&SceneObject> = scene.objects.iter().collect();
    for s in &report.spaces {
        let (cx, cy) = s.centroid_px;
        let idx = unused
            .iter()
            .position(|o| (o.space.center.x - cx).hypot(o.space.center.y - cy) <= 1.0)
            .ok_or_else(|| format!("{} at ({cx}, {cy}) matches no object", s.id))?;
        let o = unused.swap_remove(idx);
        if s.cls != o.cls {
            return Err(format!("{}: class {} != {}", s.id, s.cls, o.cls));
        }
        let w = s.widths.as_ref().ok_or_else(|| format!("{} uncharacterized", s.id))?;
        let want = flush_total_width(o);
        if (w.total_width_px - want).abs() > 1e-6 {
            return Err(format!("{}: total width {} != {}", s.id, w.total_width_px, want));
        }
        if (w.space_width_px - o.space.width).abs() > 1e-6 {
            return Err(format!("{}: space width {} != {}", s.id, w.space_width_px, o.space.width));
        }
    }
    Ok(())
}
