//! Newline-delimited JSON wire protocol spoken with inference sidecars.
//!
//! ```text
//! -> {"hello": 1}
//! <- {"hello": 1, "tasks": ["locate", "orient"]}
//! -> {"id": "r1", "task": "locate", "image_png_base64": "..."}
//! <- {"id": "r1", "detections": [{"class": "dp_one_aisle", "bbox": [x, y, w, h], "confidence": 0.9}]}
//! -> {"id": "r2", "task": "orient", "image_png_base64": "..."}
//! <- {"id": "r2", "detections": [{"kind": "space", "obb": [cx, cy, length, width, theta], "confidence": 0.8}]}
//! <- {"id": "r3", "error": "model failed"}
//! ```
//!
//! `obb` may also carry eight numbers, the four corners in ring order; these are
//! normalized into the `(center, length, width, theta)` form.

use super::{BackendError, Detection, ObbDetection, ObbKind, ParkingClass};
use crate::geometry::{BBox, OrientedBox, Vec2};
use crate::imagery::{encode_png, RasterImage};
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Locate,
    Orient,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Locate => "locate",
            Task::Orient => "orient",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: String,
    pub task: Task,
    pub image_png_base64: String,
}

impl Request {
    pub fn new(id: String, task: Task, image: &RasterImage) -> Result<Self, BackendError> {
        let png = encode_png(image).map_err(|e| BackendError::BadInput(e.to_string()))?;
        Ok(Self { id, task, image_png_base64: base64::engine::general_purpose::STANDARD.encode(png) })
    }

    pub fn decode_image(&self) -> Result<RasterImage, String> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(&self.image_png_base64)
            .map_err(|e| format!("bad base64: {e}"))?;
        image::load_from_memory(&bytes).map(|d| d.to_rgb8()).map_err(|e| format!("bad png: {e}"))
    }
}

pub const HELLO_REQUEST: &str = r#"{"hello":1}"#;
pub const HELLO_REPLY: &str = r#"{"hello":1,"tasks":["locate","orient"]}"#;

/// Checks a handshake reply advertises both tasks.
pub fn check_hello(v: &Value) -> Result<(), BackendError> {
    if v.get("hello").and_then(Value::as_u64) != Some(1) {
        return Err(BackendError::Handshake(format!("unexpected handshake reply {v}")));
    }
    let tasks: Vec<&str> = v
        .get("tasks")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_str).collect())
        .unwrap_or_default();
    for needed in [Task::Locate, Task::Orient] {
        if !tasks.contains(&needed.name()) {
            return Err(BackendError::Handshake(format!("sidecar does not offer `{}`", needed.name())));
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct LocateReply<'a> {
    id: &'a str,
    detections: &'a [Detection],
}

#[derive(Debug, Serialize)]
struct OrientReply<'a> {
    id: &'a str,
    detections: &'a [ObbDetection],
}

pub fn locate_reply(id: &str, detections: &[Detection]) -> String {
    serde_json::to_string(&LocateReply { id, detections }).expect("serializable")
}

pub fn orient_reply(id: &str, detections: &[ObbDetection]) -> String {
    serde_json::to_string(&OrientReply { id, detections }).expect("serializable")
}

pub fn error_reply(id: &str, message: &str) -> String {
    serde_json::json!({"id": id, "error": message}).to_string()
}

/// Extracts the reply id, if the record has a string one.
pub fn reply_id(v: &Value) -> Option<&str> {
    v.get("id").and_then(Value::as_str)
}

fn violation(id: &str, message: impl Into<String>) -> BackendError {
    BackendError::Protocol { id: Some(id.to_string()), message: message.into() }
}

fn detections_array<'a>(id: &str, v: &'a Value) -> Result<&'a Vec<Value>, BackendError> {
    if let Some(msg) = v.get("error") {
        return Err(BackendError::Remote {
            id: id.to_string(),
            message: msg.as_str().map(str::to_string).unwrap_or_else(|| msg.to_string()),
        });
    }
    v.get("detections")
        .and_then(Value::as_array)
        .ok_or_else(|| violation(id, "missing `detections` array"))
}

fn numbers(id: &str, v: Option<&Value>, field: &str) -> Result<Vec<f64>, BackendError> {
    let arr = v.and_then(Value::as_array).ok_or_else(|| violation(id, format!("missing `{field}` array")))?;
    arr.iter()
        .map(|x| x.as_f64().filter(|f| f.is_finite()))
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| violation(id, format!("`{field}` must hold finite numbers")))
}

fn confidence(id: &str, d: &Value) -> Result<f64, BackendError> {
    d.get("confidence")
        .and_then(Value::as_f64)
        .filter(|c| (0.0..=1.0).contains(c))
        .ok_or_else(|| violation(id, "`confidence` must be a number in [0, 1]"))
}

/// Parses a `locate` reply whose id has already been matched.
pub fn parse_locate(id: &str, v: &Value) -> Result<Vec<Detection>, BackendError> {
    detections_array(id, v)?
        .iter()
        .map(|d| {
            let name = d.get("class").and_then(Value::as_str).ok_or_else(|| violation(id, "missing `class`"))?;
            let cls: ParkingClass = name.parse().map_err(|e: super::UnknownClass| violation(id, e.to_string()))?;
            let b = numbers(id, d.get("bbox"), "bbox")?;
            if b.len() != 4 || b[2] <= 0.0 || b[3] <= 0.0 {
                return Err(violation(id, "`bbox` must be [x, y, w, h] with positive size"));
            }
            Ok(Detection { cls, bbox: BBox::new(b[0], b[1], b[2], b[3]), confidence: confidence(id, d)? })
        })
        .collect()
}

/// Parses an `orient` reply whose id has already been matched.
pub fn parse_orient(id: &str, v: &Value) -> Result<Vec<ObbDetection>, BackendError> {
    detections_array(id, v)?
        .iter()
        .map(|d| {
            let kind: ObbKind = d
                .get("kind")
                .cloned()
                .and_then(|k| serde_json::from_value(k).ok())
                .ok_or_else(|| violation(id, "`kind` must be \"space\" or \"aisle\""))?;
            let o = numbers(id, d.get("obb"), "obb")?;
            let obb = match o.len() {
                5 if o[2] > 0.0 && o[3] > 0.0 => OrientedBox::new(Vec2::new(o[0], o[1]), o[2], o[3], o[4]),
                8 => {
                    let c = [
                        Vec2::new(o[0], o[1]),
                        Vec2::new(o[2], o[3]),
                        Vec2::new(o[4], o[5]),
                        Vec2::new(o[6], o[7]),
                    ];
                    let b = OrientedBox::from_corners(c);
                    if b.width.is_nan() || b.width <= 0.0 {
                        return Err(violation(id, "degenerate `obb` corners"));
                    }
                    b
                }
                _ => return Err(violation(id, "`obb` must be [cx, cy, length, width, theta] or 4 corners")),
            };
            Ok(ObbDetection { kind, obb, confidence: confidence(id, d)? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn locate_round_trip() {
        let dets = vec![Detection { cls: ParkingClass::OneAisle, bbox: BBox::new(1.0, 2.0, 30.0, 50.0), confidence: 0.7 }];
        let line = locate_reply("r7", &dets);
        let v: Value = serde_json::from_str(&line).unwrap();
        assert_eq!(reply_id(&v), Some("r7"));
        assert_eq!(parse_locate("r7", &v).unwrap(), dets);
    }

    #[test]
    fn orient_corner_form_is_normalized() {
        let v = json!({"id": "a", "detections": [
            {"kind": "aisle", "obb": [0, 0, 0, 10, 40, 10, 40, 0], "confidence": 0.5}
        ]});
        let d = parse_orient("a", &v).unwrap();
        assert_eq!(d[0].kind, ObbKind::Aisle);
        assert!((d[0].obb.length - 40.0).abs() < 1e-12 && (d[0].obb.width - 10.0).abs() < 1e-12);
        assert!(d[0].obb.theta.abs() < 1e-12);
    }

    #[test]
    fn violations_name_the_id() {
        let bad = json!({"id": "q9", "detections": [{"class": "dp_one_aisle", "bbox": [1, 2, 3], "confidence": 0.5}]});
        match parse_locate("q9", &bad) {
            Err(BackendError::Protocol { id, .. }) => assert_eq!(id.as_deref(), Some("q9")),
            other => panic!("unexpected {other:?}"),
        }
        let bad_class = json!({"id": "q1", "detections": [{"class": "truck", "bbox": [1, 2, 3, 4], "confidence": 0.5}]});
        assert!(matches!(parse_locate("q1", &bad_class), Err(BackendError::Protocol { .. })));
        let bad_conf = json!({"id": "q2", "detections": [{"kind": "space", "obb": [1, 2, 3, 4, 0], "confidence": 1.5}]});
        assert!(matches!(parse_orient("q2", &bad_conf), Err(BackendError::Protocol { .. })));
        assert!(matches!(parse_orient("q3", &json!({"id": "q3"})), Err(BackendError::Protocol { .. })));
    }

    #[test]
    fn error_reply_is_remote() {
        let v: Value = serde_json::from_str(&error_reply("z", "boom")).unwrap();
        assert_eq!(
            parse_locate("z", &v),
            Err(BackendError::Remote { id: "z".into(), message: "boom".into() })
        );
    }

    #[test]
    fn hello_constants() {
        check_hello(&serde_json::from_str(HELLO_REPLY).unwrap()).unwrap();
        assert!(check_hello(&json!({"hello": 1, "tasks": ["locate"]})).is_err());
        assert!(check_hello(&json!({"hello": 2, "tasks": ["locate", "orient"]})).is_err());
    }
}
