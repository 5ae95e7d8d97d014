#![allow(clippy::excessive_precision)]

use dpark::geo::{self, GeoPoint, GlobalTilePoint, TileCoord};
use dpark::imagery::tile_ranges;
use proptest::prelude::*;

// Reference values computed with 50-digit arithmetic.
const MAX_LAT: f64 = 85.051_128_779_806_592_377_796_715_521_924_69;
const WORKED_LON: f64 = -122.305_812_835_693_359_375;
const WORKED_LAT: f64 = 47.653_247_216_758_510_470_18;
const X_AT_180: f64 = 20_037_508.342_789_243_076_588_4;
const Y_AT_45: f64 = 5_621_521.486_192_067_092_328;
const COS_47_6: f64 = 0.674_302_387_583_723_393_27;
const M_PER_PX_Z20: f64 = 0.149_291_070_869_484_86;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn reference_values() {
    assert!(close(geo::MAX_LATITUDE, MAX_LAT, 1e-15));
    let p = geo::global_to_lonlat(GlobalTilePoint { x: 168_046.5, y: 366_004.5, z: 20 });
    assert!(close(p.lon, WORKED_LON, 1e-14), "{}", p.lon);
    assert!(close(p.lat, WORKED_LAT, 1e-13), "{}", p.lat);
    assert!(close(geo::lonlat_to_mercator(GeoPoint { lon: 180.0, lat: 0.0 }).x, X_AT_180, 1e-15));
    assert!(close(geo::lonlat_to_mercator(GeoPoint { lon: 0.0, lat: 45.0 }).y, Y_AT_45, 1e-14));
    assert!(close(geo::ground_scale_correction(47.6), COS_47_6, 1e-14));
    assert!(close(geo::mercator_meters_per_pixel(20, 256), M_PER_PX_Z20, 1e-15));
    assert!(close(100.0 * geo::mercator_meters_per_pixel(20, 256), 14.929_107_086_948_486, 1e-14));
}

#[test]
fn seattle_box_tile_count() {
    let tl = GeoPoint::new(-122.4489, 47.9572).unwrap();
    let br = GeoPoint::new(-122.1551, 47.4091).unwrap();
    let (xs, ys) = tile_ranges(tl, br, 20).unwrap();
    assert_eq!((*xs.start(), *xs.end()), (167_629, 168_485));
    assert_eq!((*ys.start(), *ys.end()), (364_686, 367_057));
    assert_eq!(xs.count() * ys.count(), 2_032_804);
}

#[test]
fn worked_pixel_from_tile_pixel_index() {
    let t = TileCoord::new(168_046, 366_004, 20).unwrap();
    let g = geo::pixel_to_global(t, 128, 128, 256).unwrap();
    assert_eq!(g.x, 168_046.0 + 128.5 / 256.0);
    assert_eq!(geo::global_to_pixel(g, 256).unwrap(), (t, 128, 128));
}

#[test]
fn out_of_range_inputs_are_errors() {
    assert!(TileCoord::new(4, 0, 2).is_err());
    assert!(GeoPoint::new(181.0, 0.0).is_err());
    assert!(geo::lonlat_to_global(GeoPoint { lon: 0.0, lat: 86.0 }, 10).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn global_lonlat_round_trip(z in 0u8..=22, fx in 0.0f64..1.0, fy in 0.0f64..1.0) {
        let n = geo::tiles_per_axis(z);
        let p = GlobalTilePoint { x: fx * n, y: fy * n, z };
        let back = geo::lonlat_to_global(geo::global_to_lonlat(p), z).unwrap();
        let tol = 1e-14 * n.max(1.0);
        prop_assert!((back.x - p.x).abs() < tol && (back.y - p.y).abs() < tol);
    }

    #[test]
    fn pixel_round_trip(z in 1u8..=20, fx in 0.0f64..1.0, fy in 0.0f64..1.0, row in 0u32..256, col in 0u32..256) {
        let n = (1u64 << z) as f64;
        let t = TileCoord::new((fx * n) as u32, (fy * n) as u32, z).unwrap();
        let g = geo::pixel_to_global(t, row, col, 256).unwrap();
        prop_assert_eq!(geo::global_to_pixel(g, 256).unwrap(), (t, row, col));
    }

    #[test]
    fn mercator_paths_agree(z in 10u8..=20, fx in 0.0f64..1.0, fy in 0.05f64..0.95) {
        let n = geo::tiles_per_axis(z);
        let p = GlobalTilePoint { x: fx * n, y: fy * n, z };
        let a = geo::global_to_mercator(p);
        let b = geo::lonlat_to_mercator(geo::global_to_lonlat(p));
        prop_assert!(geo::mercator_distance(a, b) < 1e-6);
    }

    #[test]
    fn mercator_x_is_linear_in_tile_x(z in 10u8..=20, fx in 0.0f64..1.0, dx in 0.0f64..100.0) {
        let n = geo::tiles_per_axis(z);
        let a = GlobalTilePoint { x: fx * (n - 100.0), y: n / 2.0, z };
        let b = GlobalTilePoint { x: a.x + dx, ..a };
        let d = geo::mercator_distance(geo::global_to_mercator(a), geo::global_to_mercator(b));
        prop_assert!((d - dx * 256.0 * geo::mercator_meters_per_pixel(z, 256)).abs() < 1e-6);
    }
}

#[test]
fn world_edges_round_trip() {
    for z in [0u8, 12, 22] {
        let n = geo::tiles_per_axis(z);
        for y in [0.0, n] {
            let p = geo::global_to_lonlat(GlobalTilePoint { x: 0.0, y, z });
            assert!(p.lat.abs() <= geo::MAX_LATITUDE);
            let back = geo::lonlat_to_global(p, z).unwrap();
            assert!((back.y - y).abs() < 1e-6);
        }
    }
}
