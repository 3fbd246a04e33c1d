//! `delmap`: run the damage localization pipeline, or any single stage of it, on files.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Variable holding the log filter, e.g. `info` or `delmap=debug`.
const LOG_ENV: &str = "DELMAP_LOG";

#[derive(Parser)]
#[command(
    name = "delmap",
    version,
    about = "Damage estimation and localization from oblique aerial imagery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

// parsed once per process, so the size spread between variants is irrelevant
#[allow(clippy::large_enum_variant)]
#[derive(Subcommand)]
enum Command {
    /// Rotate a reconstruction so the fitted ground plane is horizontal.
    Align(AlignArgs),
    /// Estimate image-to-ground homographies from an aligned reconstruction.
    Georef(GeorefArgs),
    /// Turn a feature tensor into damage polygons in pixel coordinates.
    Cam(CamArgs),
    /// Project pixel polygons of one image onto the ground as GeoJSON.
    Project(ProjectArgs),
    /// Compute image footprints and apply the area and aspect-ratio filters.
    Filter(FilterArgs),
    /// Score an estimate GeoJSON against truth inside a boundary.
    Evaluate(EvaluateArgs),
    /// Aggregate worker votes into binary image labels.
    Labels(LabelsArgs),
    /// Write a synthetic scene with known ground truth.
    Synth(SynthArgs),
    /// Run the whole pipeline.
    Run(RunArgs),
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long)]
    reconstruction: PathBuf,
    /// Aligned reconstruction output.
    #[arg(long)]
    out: PathBuf,
    /// Also write the alignment report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    plane: PlaneArgs,
}

#[derive(Args, Clone)]
struct PlaneArgs {
    /// Plane RANSAC inlier distance, reconstruction units.
    #[arg(long, allow_negative_numbers = true)]
    plane_inlier_dist: Option<f64>,
    #[arg(long)]
    plane_max_iters: Option<usize>,
}

#[derive(Args, Clone)]
struct HomographyArgs {
    /// Homography RANSAC inlier distance on the ground, meters.
    #[arg(long, allow_negative_numbers = true)]
    homography_inlier_dist: Option<f64>,
    #[arg(long)]
    homography_max_iters: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    homography_confidence: Option<f64>,
}

#[derive(Args, Clone)]
struct FilterThresholds {
    #[arg(long, allow_negative_numbers = true)]
    max_area_km2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    max_aspect_ratio: Option<f64>,
}

#[derive(Args)]
struct GeorefArgs {
    /// Aligned reconstruction; every shot is georeferenced.
    #[arg(
        long,
        required_unless_present = "correspondences",
        conflicts_with = "correspondences"
    )]
    reconstruction: Option<PathBuf>,
    /// Single image from a `u,v,x,y` CSV instead of a reconstruction.
    #[arg(long, requires = "image_id")]
    correspondences: Option<PathBuf>,
    #[arg(long)]
    image_id: Option<String>,
    /// JSON object mapping image id to its result.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    ransac: HomographyArgs,
    /// Exit with status 2 if any image fails.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct CamArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    /// Image size the activation map is upsampled to.
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    tau: f64,
    #[arg(long, default_value_t = 25)]
    min_region_px: usize,
    /// JSON array of traced polygons.
    #[arg(long)]
    out: PathBuf,
    /// Also write the thresholded mask as a P2 graymap.
    #[arg(long)]
    mask: Option<PathBuf>,
}

#[derive(Args)]
struct ProjectArgs {
    /// Output of `georef`.
    #[arg(long)]
    georef: PathBuf,
    /// Output of `cam`.
    #[arg(long)]
    polygons: PathBuf,
    #[arg(long)]
    image_id: String,
    /// Reconstruction supplying the origin and the camera of the image.
    #[arg(long)]
    reconstruction: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    georef: PathBuf,
    #[arg(long)]
    reconstruction: PathBuf,
    #[command(flatten)]
    thresholds: FilterThresholds,
    /// Footprints of retained images as GeoJSON.
    #[arg(long)]
    out: PathBuf,
    /// Per-image verdicts as JSON.
    #[arg(long)]
    verdicts: Option<PathBuf>,
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    estimate: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    boundary: PathBuf,
    /// gps (point features), footprint or cam.
    #[arg(long)]
    method: String,
    /// Local frame origin: a reconstruction file...
    #[arg(long, required_unless_present = "origin", conflicts_with = "origin")]
    reconstruction: Option<PathBuf>,
    /// ...or `lat,lon[,alt]`.
    #[arg(long, allow_hyphen_values = true)]
    origin: Option<String>,
    /// Report JSON; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LabelsArgs {
    /// CSV with `image_id,votes,workers`.
    #[arg(long)]
    votes: PathBuf,
    /// A, B or C.
    #[arg(long)]
    scheme: String,
    /// CSV with `image_id,label`; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// TOML file with scene parameters; missing keys take defaults.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    cameras: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    outlier_fraction: Option<f64>,
    /// Add one camera looking above the horizon.
    #[arg(long)]
    horizon_camera: bool,
    /// Zero noise and no outliers.
    #[arg(long)]
    noiseless: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline config TOML; flags below override its values.
    #[arg(long, required_unless_present = "reconstruction")]
    config: Option<PathBuf>,
    /// Output directory for estimates, report and manifest.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    reconstruction: Option<PathBuf>,
    #[arg(long)]
    features_dir: Option<PathBuf>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    boundary: Option<PathBuf>,
    #[arg(long)]
    metadata: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all CPUs.
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    thresholds: FilterThresholds,
    #[command(flatten)]
    plane: PlaneArgs,
    #[command(flatten)]
    ransac: HomographyArgs,
    #[arg(long, allow_negative_numbers = true)]
    tau: Option<f64>,
    #[arg(long)]
    min_region_px: Option<usize>,
    /// Exit with status 2 if any image hits a hard failure.
    #[arg(long)]
    strict: bool,
}

fn init_logging() {
    let mut b = env_logger::Builder::new();
    b.filter_level(log::LevelFilter::Warn);
    if let Ok(filters) = std::env::var(LOG_ENV) {
        b.parse_filters(&filters);
    }
    b.init();
}

/// The error and its causes, skipping causes the library already folded into the message.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !msg.contains(&c) {
            msg = format!("{msg}: {c}");
        }
    }
    msg
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    init_logging();
    match commands::dispatch(cli.command) {
        Ok(commands::Status::Ok) => ExitCode::SUCCESS,
        Ok(commands::Status::HardFailures(n)) => {
            eprintln!("error: {n} image(s) failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
    }
}
