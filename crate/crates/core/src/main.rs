//! `dpark` command-line interface.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dpark::detector::ParkingClass;
use dpark::evaluate::dataset::{export_crops, sample_pools, HintImage, DEFAULT_HINT_THRESHOLD};
use dpark::evaluate::interchange::{detection_outcomes, load_predictions, pair_widths, EvalOptions};
use dpark::evaluate::report::{confusion_table, metrics_table, width_table};
use dpark::evaluate::{confusion_matrix, load_coco, metrics, width_compare, IouMode};
use dpark::imagery::{self, FetchOptions};
use dpark::pipeline::{self, RunConfig};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "dpark", version, about = "Disability parking detection in aerial imagery")]
struct Cli {
    /// Emit log records as JSON lines on stderr.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the detection pipeline over a bounding box.
    Detect(DetectArgs),
    /// Score predictions.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Dataset construction helpers.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Tile acquisition.
    #[command(subcommand)]
    Tiles(TilesCommand),
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    zoom: Option<u8>,
    /// Write the JSON report here.
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Write the GeoJSON FeatureCollection here.
    #[arg(long)]
    out_geojson: Option<PathBuf>,
    #[arg(long)]
    locate_threshold: Option<f64>,
    #[arg(long)]
    orient_threshold: Option<f64>,
    #[arg(long)]
    dedup_iou: Option<f64>,
    /// Scale widths by cos(latitude) to approximate ground meters.
    #[arg(long)]
    ground_corrected: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum EvalCommand {
    /// Precision, recall and F1 against COCO ground truth.
    Detections(EvalDetectionsArgs),
    /// Width differences between two prediction files.
    Width(EvalWidthArgs),
}

#[derive(Args, Debug)]
struct EvalDetectionsArgs {
    /// Predictions as JSON lines.
    #[arg(long)]
    preds: PathBuf,
    /// COCO ground truth.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    #[arg(long, value_enum, default_value_t = IouModeArg::Envelope)]
    iou_mode: IouModeArg,
    /// Score access aisles as a detection class too.
    #[arg(long)]
    include_access_aisle: bool,
}

#[derive(Args, Debug)]
struct EvalWidthArgs {
    #[arg(long)]
    preds: PathBuf,
    /// Reference widths as JSON lines in the prediction format.
    #[arg(long)]
    reference: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    #[arg(long, value_enum, default_value_t = IouModeArg::Envelope)]
    iou_mode: IouModeArg,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum IouModeArg {
    Envelope,
    Polygon,
}

impl From<IouModeArg> for IouMode {
    fn from(m: IouModeArg) -> Self {
        match m {
            IouModeArg::Envelope => IouMode::Envelope,
            IouModeArg::Polygon => IouMode::Polygon,
        }
    }
}

#[derive(Subcommand, Debug)]
enum DatasetCommand {
    /// Split hint-model outputs into pools and sample per-region quotas.
    SamplePools(SamplePoolsArgs),
    /// Cut one labelled crop per parking object.
    ExportCrops(ExportCropsArgs),
}

#[derive(Args, Debug)]
struct SamplePoolsArgs {
    /// JSON array of {image, region, confidences}.
    #[arg(long)]
    hints: PathBuf,
    /// Per-region quota, `region=count`; repeatable.
    #[arg(long = "quota", value_parser = parse_quota)]
    quotas: Vec<(String, usize)>,
    #[arg(long, default_value_t = DEFAULT_HINT_THRESHOLD)]
    conf_thresh: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_quota(s: &str) -> Result<(String, usize), String> {
    let (region, n) = s.split_once('=').ok_or_else(|| format!("expected region=count, got `{s}`"))?;
    let n = n.parse().map_err(|e| format!("bad count in `{s}`: {e}"))?;
    Ok((region.to_string(), n))
}

#[derive(Args, Debug)]
struct ExportCropsArgs {
    /// COCO annotations.
    #[arg(long)]
    coco: PathBuf,
    #[arg(long, default_value_t = dpark::detector::CROP_SIZE)]
    size: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum TilesCommand {
    /// Download the tiles a config's bounding box needs into the cache.
    Fetch(TilesFetchArgs),
}

#[derive(Args, Debug)]
struct TilesFetchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    zoom: Option<u8>,
    /// Also write the stitched mosaic as a PNG.
    #[arg(long)]
    mosaic: Option<PathBuf>,
}

fn init_logging(json: bool) {
    let mut b = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    if json {
        b.format(|buf, record| {
            let line = serde_json::json!({
                "level": record.level().as_str(),
                "target": record.target(),
                "message": record.args().to_string(),
            });
            writeln!(buf, "{line}")
        });
    }
    b.init();
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn detect(a: DetectArgs) -> Result<()> {
    let mut config = RunConfig::load(&a.config)?;
    let cwd = std::env::current_dir()?;
    if let Some(z) = a.zoom {
        config.zoom = z;
    }
    if let Some(p) = a.out_json {
        config.output.json = Some(cwd.join(p));
    }
    if let Some(p) = a.out_geojson {
        config.output.geojson = Some(cwd.join(p));
    }
    if let Some(v) = a.locate_threshold {
        config.thresholds.locate = v;
    }
    if let Some(v) = a.orient_threshold {
        config.thresholds.orient = v;
    }
    if let Some(v) = a.dedup_iou {
        config.thresholds.dedup_iou = v;
    }
    if a.ground_corrected {
        config.ground_corrected = true;
    }
    if let Some(w) = a.workers {
        config.workers = w;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    config.validate()?;
    let report = pipeline::run(&config)?;
    let cov = &report.coverage;
    if !cov.missing_tiles.is_empty() {
        log::warn!("{} tiles missing from the source (coverage loss)", cov.missing_tiles.len());
    }
    if !cov.skipped_windows.is_empty() {
        log::warn!("{} windows skipped after backend errors", cov.skipped_windows.len());
    }
    if report.spaces.is_empty() {
        log::info!("no parking spaces detected");
    }
    pipeline::write_outputs(&report, &config.output)?;
    if config.output.json.is_none() && config.output.geojson.is_none() {
        println!("{}", pipeline::report_json(&report));
    } else {
        log::info!("{} spaces written", report.spaces.len());
    }
    Ok(())
}

fn eval_detections(a: EvalDetectionsArgs) -> Result<()> {
    let preds = load_predictions(&a.preds)?;
    let truth = load_coco(&a.truth)?;
    let mut opts = EvalOptions { iou: a.iou, mode: a.iou_mode.into(), ..Default::default() };
    let classes: &[ParkingClass] = if a.include_access_aisle {
        opts.exclude = &[];
        &ParkingClass::ALL
    } else {
        &ParkingClass::LOCATABLE
    };
    let outcomes = detection_outcomes(&preds, &truth, &opts);
    let m = metrics(&outcomes, classes);
    print!("{}\n{}", metrics_table(&m), confusion_table(&confusion_matrix(&outcomes)));
    Ok(())
}

fn eval_width(a: EvalWidthArgs) -> Result<()> {
    let preds = load_predictions(&a.preds)?;
    let refs = load_predictions(&a.reference)?;
    let opts = EvalOptions { iou: a.iou, mode: a.iou_mode.into(), exclude: &[] };
    let pairing = pair_widths(&preds, &refs, &opts);
    let summary = width_compare(&pairing.samples);
    if summary.total.excluded_zero_reference > 0 {
        log::warn!("{} pairs with zero reference width excluded from percentages", summary.total.excluded_zero_reference);
    }
    print!("{}", width_table(&summary));
    println!(
        "matched {}  missing width {}  unmatched preds {}  unmatched refs {}",
        pairing.samples.len(),
        pairing.missing_width,
        pairing.unmatched_preds,
        pairing.unmatched_refs
    );
    Ok(())
}

fn sample(a: SamplePoolsArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.hints).with_context(|| format!("reading {}", a.hints.display()))?;
    let hints: Vec<HintImage> = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.hints.display()))?;
    let mut quotas = BTreeMap::new();
    for (region, n) in a.quotas {
        if quotas.insert(region.clone(), n).is_some() {
            bail!("quota for region `{region}` given twice");
        }
    }
    let s = sample_pools(&hints, a.conf_thresh, &quotas, a.seed)?;
    emit(a.out.as_deref(), &(serde_json::to_string_pretty(&s)? + "\n"))
}

fn crops(a: ExportCropsArgs) -> Result<()> {
    let ds = load_coco(&a.coco)?;
    let e = export_crops(&ds, a.size);
    log::info!("{} crops, {} needing padding", e.crops.len(), e.padded.len());
    emit(a.out.as_deref(), &(serde_json::to_string_pretty(&e)? + "\n"))
}

fn fetch(a: TilesFetchArgs) -> Result<()> {
    let mut config = RunConfig::load(&a.config)?;
    if let Some(z) = a.zoom {
        config.zoom = z;
        config.validate()?;
    }
    let grid = pipeline::region_grid(&config)?;
    let opts = FetchOptions { parallelism: config.workers, ..Default::default() };
    let mosaic =
        imagery::fetch_mosaic(&config.source, grid.origin, grid.cols, grid.rows, &config.cache_dir, &opts)?;
    let missing = mosaic.missing_tiles();
    println!("{} tiles ({} x {}), {} missing", grid.cols * grid.rows, grid.cols, grid.rows, missing.len());
    for t in &missing {
        log::warn!("missing tile {}/{}/{}", t.z, t.x, t.y);
    }
    if let Some(p) = a.mosaic {
        imagery::write_png_atomic(&p, &mosaic.to_image())?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    init_logging(cli.json);
    match cli.command {
        Command::Detect(a) => detect(a),
        Command::Eval(EvalCommand::Detections(a)) => eval_detections(a),
        Command::Eval(EvalCommand::Width(a)) => eval_width(a),
        Command::Dataset(DatasetCommand::SamplePools(a)) => sample(a),
        Command::Dataset(DatasetCommand::ExportCrops(a)) => crops(a),
        Command::Tiles(TilesCommand::Fetch(a)) => fetch(a),
    }
}
