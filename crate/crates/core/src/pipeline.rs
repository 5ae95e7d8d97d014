//! End-to-end region run: fetch, scan, crop, characterize, georeference, serialize.

use crate::characterizer::{characterize, CharacterizeInput, CharacterizedSpace};
use crate::detector::{
    Backend, BackendError, Detector, Endpoint, ImageKey, MockBackend, Noise, SidecarClient, Thresholds, CROP_SIZE,
};
use crate::geo::{GeoPoint, TileCoord};
use crate::geometry::{polygon_signed_area, Vec2};
use crate::imagery::{self, FetchOptions, ImageryError, Mosaic, TileSource};
use crate::scanner::{self, ScanOptions, SkippedWindow};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot read config {path}: {source}")]
    ConfigIo { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    ConfigParse(#[from] serde_json::Error),
    #[error(transparent)]
    Imagery(#[from] ImageryError),
    #[error(transparent)]
    Scenario(#[from] crate::detector::mock::ScenarioError),
    #[error("backend unreachable: {0}")]
    Backend(#[from] BackendError),
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionBBox {
    pub top_left: GeoPoint,
    pub bottom_right: GeoPoint,
}

impl RegionBBox {
    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lon >= self.top_left.lon
            && p.lon <= self.bottom_right.lon
            && p.lat <= self.top_left.lat
            && p.lat >= self.bottom_right.lat
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Mock {
        scenario: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        noise: Option<Noise>,
    },
    Sidecar {
        endpoint: Endpoint,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

fn default_timeout_ms() -> u64 {
    30_000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunThresholds {
    pub locate: f64,
    pub orient: f64,
    pub dedup_iou: f64,
}

impl Default for RunThresholds {
    fn default() -> Self {
        let t = Thresholds::default();
        Self { locate: t.locate, orient: t.orient, dedup_iou: scanner::DEFAULT_DEDUP_IOU }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geojson: Option<PathBuf>,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_workers() -> usize {
    8
}

fn default_cache() -> PathBuf {
    PathBuf::from("tile-cache")
}

/// A run configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema: u32,
    pub source: TileSource,
    pub zoom: u8,
    pub bbox: RegionBBox,
    pub backend: BackendSpec,
    #[serde(default)]
    pub thresholds: RunThresholds,
    #[serde(default)]
    pub ground_corrected: bool,
    #[serde(default)]
    pub output: OutputPaths,
    #[serde(default = "default_cache")]
    pub cache_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let c: RunConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Loads a config file; relative paths inside it are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| PipelineError::ConfigIo { path: path.display().to_string(), source })?;
        let mut c = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        c.resolve_paths(base);
        Ok(c)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let imagery::SourceKind::LocalDirectory { root } = &mut self.source.kind {
            fix(root);
        }
        if let BackendSpec::Mock { scenario, .. } = &mut self.backend {
            fix(scenario);
        }
        fix(&mut self.cache_dir);
        if let Some(p) = &mut self.output.json {
            fix(p);
        }
        if let Some(p) = &mut self.output.geojson {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.schema != SCHEMA_VERSION {
            return bad(format!("unsupported schema {} (expected {SCHEMA_VERSION})", self.schema));
        }
        self.source.validate()?;
        if self.zoom > self.source.native_zoom {
            return bad(format!("zoom {} exceeds the source's native zoom {}", self.zoom, self.source.native_zoom));
        }
        let t = &self.thresholds;
        for (name, v) in [("locate", t.locate), ("orient", t.orient), ("dedup_iou", t.dedup_iou)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("threshold `{name}` = {v} is outside [0, 1]"));
            }
        }
        for p in [self.bbox.top_left, self.bbox.bottom_right] {
            GeoPoint::new(p.lon, p.lat).map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        Ok(())
    }

    pub fn build_backend(&self) -> Result<Arc<dyn Backend>, PipelineError> {
        Ok(match &self.backend {
            BackendSpec::Mock { scenario, noise } => Arc::new(MockBackend::from_file(scenario, *noise)?),
            BackendSpec::Sidecar { endpoint, timeout_ms } => {
                Arc::new(SidecarClient::connect(endpoint, Duration::from_millis(*timeout_ms))?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionGrid {
    pub origin: TileCoord,
    pub cols: u32,
    pub rows: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientFailure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    /// Tiles the source had no imagery for (rendered black), as `z/x/y`.
    pub missing_tiles: Vec<String>,
    /// Windows the locator failed on.
    pub skipped_windows: Vec<SkippedWindow>,
    pub orient_failures: Vec<OrientFailure>,
    pub uncharacterized: usize,
    pub suspected_oversize: usize,
    /// Spaces whose centroid falls outside the configured box (the mosaic is tile-aligned).
    pub boundary_adjacent: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub squares: usize,
    pub locate_calls: usize,
    pub orient_calls: usize,
    pub located: usize,
    pub characterized: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub schema: u32,
    /// `epsg3857` or `ground_cos_lat`.
    pub width_units: String,
    pub config: RunConfig,
    pub region: RegionGrid,
    pub spaces: Vec<CharacterizedSpace>,
    pub coverage: Coverage,
    pub counts: Counts,
    /// Wall-clock figures; the only field that differs between identical runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

/// Tile grid covering the configured box.
pub fn region_grid(config: &RunConfig) -> Result<RegionGrid, PipelineError> {
    let (xs, ys) = imagery::tile_ranges(config.bbox.top_left, config.bbox.bottom_right, config.zoom)?;
    Ok(RegionGrid {
        origin: TileCoord { x: *xs.start(), y: *ys.start(), z: config.zoom },
        cols: xs.end() - xs.start() + 1,
        rows: ys.end() - ys.start() + 1,
    })
}

/// Runs the full pipeline, fetching imagery and connecting to the configured backend.
pub fn run(config: &RunConfig) -> Result<RegionReport, PipelineError> {
    config.validate()?;
    let grid = region_grid(config)?;
    let opts = FetchOptions { parallelism: config.workers, ..Default::default() };
    let mosaic = imagery::fetch_mosaic(&config.source, grid.origin, grid.cols, grid.rows, &config.cache_dir, &opts)?;
    let backend = config.build_backend()?;
    Ok(run_on_mosaic(config, &mosaic, backend))
}

/// Pipeline stages after imagery acquisition.
pub fn run_on_mosaic(config: &RunConfig, mosaic: &Mosaic, backend: Arc<dyn Backend>) -> RegionReport {
    let started = Instant::now();
    let t = &config.thresholds;
    let detector = Detector::new(backend, Thresholds { locate: t.locate, orient: t.orient });
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.workers.max(1)).build().expect("worker pool");
    let scan_opts = ScanOptions { dedup_iou: t.dedup_iou, workers: 0, ..Default::default() };
    let scan = pool.install(|| scanner::scan_region(mosaic, &detector, &scan_opts));
    let z = mosaic.zoom();

    let results: Vec<(CharacterizedSpace, Option<String>)> = pool.install(|| {
        scan.detections
            .par_iter()
            .enumerate()
            .map(|(i, d)| {
                let c = d.bbox.center();
                let crop = mosaic
                    .crop_centered((c.x, c.y), CROP_SIZE)
                    .unwrap_or_else(|_| {
                        let origin = imagery::crop_origin((c.x, c.y), CROP_SIZE);
                        let (image, _) = mosaic.extract(origin.0, origin.1, CROP_SIZE, CROP_SIZE);
                        imagery::Crop { image, origin, padded: true }
                    });
                let key = ImageKey::new(z, crop.origin);
                let (obbs, err) = match detector.orient(&key, &crop.image) {
                    Ok(o) => (o, None),
                    Err(e) => (Vec::new(), Some(e.to_string())),
                };
                let space = characterize(CharacterizeInput {
                    id: format!("det-{i}"),
                    cls: d.cls,
                    confidence: d.confidence,
                    bbox: d.bbox,
                    crop_origin: crop.origin,
                    padded_crop: crop.padded,
                    obbs: &obbs,
                    zoom: z,
                    ground_corrected: config.ground_corrected,
                });
                (space, err)
            })
            .collect()
    });

    let mut coverage = Coverage {
        missing_tiles: mosaic.missing_tiles().iter().map(ToString::to_string).collect(),
        skipped_windows: scan.skipped.clone(),
        suspected_oversize: scan.suspected_oversize,
        ..Default::default()
    };
    let mut spaces: Vec<(CharacterizedSpace, Option<String>)> = results;
    spaces.sort_by(|(a, _), (b, _)| {
        b.centroid
            .lat
            .total_cmp(&a.centroid.lat)
            .then(a.centroid.lon.total_cmp(&b.centroid.lon))
            .then(a.cls.cmp(&b.cls))
            .then(b.confidence.total_cmp(&a.confidence))
    });
    let mut out = Vec::with_capacity(spaces.len());
    for (i, (mut s, err)) in spaces.into_iter().enumerate() {
        s.id = format!("space-{:05}", i + 1);
        if let Some(error) = err {
            coverage.orient_failures.push(OrientFailure { id: s.id.clone(), error });
        }
        if !config.bbox.contains(s.centroid) {
            s.flags.boundary_adjacent = true;
            coverage.boundary_adjacent += 1;
        }
        out.push(s);
    }
    coverage.uncharacterized = out.iter().filter(|s| s.flags.uncharacterized).count();
    let counts = Counts {
        squares: scan.squares,
        locate_calls: scan.backend_calls,
        orient_calls: out.len(),
        located: out.len(),
        characterized: out.len() - coverage.uncharacterized,
    };
    RegionReport {
        schema: SCHEMA_VERSION,
        width_units: if config.ground_corrected { "ground_cos_lat" } else { "epsg3857" }.into(),
        config: config.clone(),
        region: RegionGrid { origin: mosaic.origin, cols: mosaic.cols, rows: mosaic.rows },
        spaces: out,
        coverage,
        counts,
        timing: Some(Timing { elapsed_ms: started.elapsed().as_millis() as u64 }),
    }
}

pub fn report_json(report: &RegionReport) -> String {
    serde_json::to_string_pretty(report).expect("serializable") + "\n"
}

/// Closed counter-clockwise `[lon, lat]` ring.
fn ring(points: &[GeoPoint]) -> Vec<[f64; 2]> {
    let mut pts: Vec<GeoPoint> = points.to_vec();
    let v: Vec<Vec2> = pts.iter().map(|p| Vec2::new(p.lon, p.lat)).collect();
    if polygon_signed_area(&v) < 0.0 {
        pts.reverse();
    }
    let mut r: Vec<[f64; 2]> = pts.iter().map(|p| [p.lon, p.lat]).collect();
    if let Some(&first) = r.first() {
        r.push(first);
    }
    r
}

pub fn geojson(report: &RegionReport) -> Value {
    let features: Vec<Value> = report
        .spaces
        .iter()
        .map(|s| {
            let w = s.widths.as_ref();
            json!({
                "type": "Feature",
                "id": s.id,
                "geometry": {"type": "Polygon", "coordinates": [ring(&s.footprint)]},
                "properties": {
                    "class": s.cls,
                    "confidence": s.confidence,
                    "space_width_m": w.map(|w| w.space_width_m),
                    "aisle_width_m_left": w.map(|w| w.aisle_width_m_left),
                    "aisle_width_m_right": w.map(|w| w.aisle_width_m_right),
                    "total_width_m": w.map(|w| w.total_width_m),
                    "flags": s.flags.names(),
                }
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

fn write_file(path: &Path, text: &str) -> Result<(), PipelineError> {
    let err = |source| PipelineError::Output { path: path.display().to_string(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(err)?;
    }
    std::fs::write(path, text).map_err(err)
}

/// Writes the report JSON and GeoJSON to the configured paths.
pub fn write_outputs(report: &RegionReport, paths: &OutputPaths) -> Result<(), PipelineError> {
    if let Some(p) = &paths.json {
        write_file(p, &report_json(report))?;
    }
    if let Some(p) = &paths.geojson {
        write_file(p, &(serde_json::to_string_pretty(&geojson(report)).expect("serializable") + "\n"))?;
    }
    Ok(())
}
