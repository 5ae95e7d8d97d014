//! Browser bindings for the scan ownership rule, the width geometry and pixel georeferencing.

use dpark::characterizer::characterize_crop;
use dpark::detector::{ObbDetection, WINDOW_SIZE};
use dpark::geo::{self, TileCoord};
use dpark::scanner::{ownership, Pass, SquareContext};
use wasm_bindgen::prelude::*;

/// Cell value for positions no square keeps.
pub const UNOWNED: u8 = 255;
/// Cell value for positions kept more than once.
pub const CONTESTED: u8 = 254;

fn pass_code(p: Pass) -> u8 {
    match p {
        Pass::Interior => 0,
        Pass::VerticalSeam => 1,
        Pass::HorizontalSeam => 2,
        Pass::Corner => 3,
    }
}

fn context(index: u32, squares: u32) -> (bool, f64) {
    let side = f64::from(WINDOW_SIZE);
    (index == 0, f64::from(squares - index) * side)
}

/// Owners of region position `(x, y)` in a region of `squares x squares` squares,
/// as `(square column, square row, pass)`.
pub fn owners(x: f64, y: f64, squares: u32, margin: f64) -> Vec<(u32, u32, Pass)> {
    let side = f64::from(WINDOW_SIZE);
    let near = |t: f64| {
        let k = (t / side).floor() as i64;
        [k - 1, k].into_iter().filter(|&i| i >= 0 && i < i64::from(squares)).map(|i| i as u32)
    };
    let mut out = Vec::new();
    for sy in near(y) {
        for sx in near(x) {
            let (left_edge, limit_u) = context(sx, squares);
            let (top_edge, limit_v) = context(sy, squares);
            let ctx = SquareContext { left_edge, top_edge, limit_u, limit_v, margin };
            if let Some(p) = ownership(x - f64::from(sx) * side, y - f64::from(sy) * side, &ctx) {
                out.push((sx, sy, p));
            }
        }
    }
    out
}

/// Ownership raster sampled every `step` pixels: one byte per cell holding the
/// owning pass (0 to 3), [`CONTESTED`] or [`UNOWNED`].
#[wasm_bindgen]
pub fn ownership_map(squares: u32, margin: f64, step: u32) -> Vec<u8> {
    let step = step.max(1);
    let n = squares * WINDOW_SIZE / step;
    let mut cells = Vec::with_capacity((n * n) as usize);
    for j in 0..n {
        for i in 0..n {
            let (x, y) = (f64::from(i * step) + 0.5, f64::from(j * step) + 0.5);
            cells.push(match owners(x, y, squares, margin).as_slice() {
                [] => UNOWNED,
                [(_, _, p)] => pass_code(*p),
                _ => CONTESTED,
            });
        }
    }
    cells
}

/// Owners of one position as JSON, e.g. `[{"square":[0,1],"pass":"2"}]`.
#[wasm_bindgen]
pub fn owners_json(x: f64, y: f64, squares: u32, margin: f64) -> String {
    let v: Vec<serde_json::Value> = owners(x, y, squares, margin)
        .into_iter()
        .map(|(sx, sy, p)| serde_json::json!({"square": [sx, sy], "pass": p}))
        .collect();
    serde_json::Value::from(v).to_string()
}

/// Width of the space at the center of a 100 px crop, from a JSON array of oriented boxes.
#[wasm_bindgen]
pub fn characterize_json(obbs: &str) -> Result<String, JsError> {
    let obbs: Vec<ObbDetection> = serde_json::from_str(obbs)?;
    Ok(match characterize_crop(&obbs) {
        Some(cw) => serde_json::to_string(&cw)?,
        None => "null".into(),
    })
}

/// WGS84 position and pixel scale of pixel `(row, col)` of a 256 px tile.
#[wasm_bindgen]
pub fn pixel_lonlat_json(z: u8, x: u32, y: u32, row: u32, col: u32) -> Result<String, JsError> {
    let t = TileCoord::new(x, y, z)?;
    let p = geo::global_to_lonlat(geo::pixel_to_global(t, row, col, 256)?);
    let m = geo::mercator_meters_per_pixel(z, 256);
    Ok(serde_json::json!({
        "lon": p.lon,
        "lat": p.lat,
        "mercator_m_per_px": m,
        "ground_m_per_px": m * geo::ground_scale_correction(p.lat),
    })
    .to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_sampled_position_has_one_owner() {
        for squares in 1..4 {
            let map = ownership_map(squares, 50.0, 7);
            assert!(map.iter().all(|&c| c < 4), "{squares} squares");
        }
    }

    #[test]
    fn flush_aisle_width() {
        let obbs = r#"[
            {"kind": "space", "obb": [50, 50, 55, 30, 0], "confidence": 0.9},
            {"kind": "aisle", "obb": [50, 72.5, 55, 15, 0], "confidence": 0.8}
        ]"#;
        let v: serde_json::Value = serde_json::from_str(&characterize_json(obbs).unwrap()).unwrap();
        assert!((v["total_width_px"].as_f64().unwrap() - 45.0).abs() < 1e-9);
        assert_eq!(characterize_json("[]").unwrap(), "null");
    }

    #[test]
    fn pixel_center() {
        let v: serde_json::Value = serde_json::from_str(&pixel_lonlat_json(20, 168_046, 366_004, 128, 128).unwrap()).unwrap();
        assert!((v["lon"].as_f64().unwrap() + 122.3058).abs() < 1e-4);
        assert!((v["mercator_m_per_px"].as_f64().unwrap() - 0.149_291_070_869_484_86).abs() < 1e-15);
    }
}
