use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use delmap::align::{align_reconstruction, PlaneRansacParams};
use delmap::cam::{compute_cam, extract_polygons, threshold_mask, upsample, ImagePolygon};
use delmap::eval::{area_precision, gps_precision, Method};
use delmap::footprint::{image_footprint, verdict, FilterConfig, FilterVerdict, FootprintError};
use delmap::geo::{GeoPoint, Point2, Polygon2D};
use delmap::homography::{estimate_ransac, retain_gate, GeorefResult, HomographyError, HomographyRansacParams};
use delmap::io::{self, GeoFeature};
use delmap::labels::{aggregate, Scheme};
use delmap::pipeline::{georeference_all, project_cam_polygons, run_pipeline, InputPaths, PipelineConfig};
use delmap::recon::Reconstruction;
use delmap::seed::derive_seed;
use delmap::synth::{generate_scene, SynthParams};

use crate::{
    AlignArgs, CamArgs, Command, EvaluateArgs, FilterArgs, FilterThresholds, GeorefArgs, HomographyArgs, LabelsArgs,
    PlaneArgs, ProjectArgs, RunArgs, SynthArgs,
};

pub enum Status {
    Ok,
    /// Only reported under `--strict`.
    HardFailures(usize),
}

fn status(strict: bool, failures: usize) -> Status {
    if strict && failures > 0 {
        Status::HardFailures(failures)
    } else {
        Status::Ok
    }
}

pub fn dispatch(cmd: Command) -> Result<Status> {
    match cmd {
        Command::Align(a) => align(a),
        Command::Georef(a) => georef(a),
        Command::Cam(a) => cam(a),
        Command::Project(a) => project(a),
        Command::Filter(a) => filter(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Labels(a) => labels(a),
        Command::Synth(a) => synth(a),
        Command::Run(a) => run(a),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

impl PlaneArgs {
    fn apply(&self, p: &mut PlaneRansacParams) {
        if let Some(v) = self.plane_inlier_dist {
            p.inlier_dist = v;
        }
        if let Some(v) = self.plane_max_iters {
            p.max_iters = v;
        }
    }
}

impl HomographyArgs {
    fn apply(&self, p: &mut HomographyRansacParams) {
        if let Some(v) = self.homography_inlier_dist {
            p.inlier_dist = v;
        }
        if let Some(v) = self.homography_max_iters {
            p.max_iters = v;
        }
        if let Some(v) = self.homography_confidence {
            p.confidence = v;
        }
    }
}

impl FilterThresholds {
    fn apply(&self, f: &mut FilterConfig) {
        if let Some(v) = self.max_area_km2 {
            f.max_area_km2 = v;
        }
        if let Some(v) = self.max_aspect_ratio {
            f.max_aspect_ratio = v;
        }
    }
}

fn align(a: AlignArgs) -> Result<Status> {
    let recon = io::load_reconstruction(&a.reconstruction)?;
    let mut params = PlaneRansacParams::default();
    a.plane.apply(&mut params);
    if !(params.inlier_dist > 0.0) || params.max_iters == 0 {
        bail!("plane inlier distance and iteration count must be positive");
    }
    let (aligned, report) = align_reconstruction(&recon, &params, a.seed)
        .with_context(|| format!("aligning {}", a.reconstruction.display()))?;
    io::save_reconstruction(&a.out, &aligned)?;
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    log::info!("{} of {} points on the ground plane", report.inliers, report.points);
    Ok(Status::Ok)
}

/// One image's entry in the `georef` output.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GeorefEntry {
    Ok(GeorefResult),
    Failed { error: String },
}

fn georef(a: GeorefArgs) -> Result<Status> {
    let mut params = HomographyRansacParams::default();
    a.ransac.apply(&mut params);
    if !(params.inlier_dist > 0.0) || params.max_iters == 0 || !(params.confidence > 0.0 && params.confidence < 1.0) {
        bail!("homography inlier distance and iterations must be positive, confidence in (0, 1)");
    }
    let results = match (&a.reconstruction, &a.correspondences) {
        (Some(r), _) => georeference_all(&io::load_reconstruction(r)?, &params, a.seed),
        (None, Some(c)) => {
            let id = a.image_id.clone().expect("clap requires image_id");
            let corrs = io::read_correspondences(c)?;
            let r = estimate_ransac(&id, &corrs, &params, derive_seed(a.seed, &id));
            BTreeMap::from([(id, r)])
        }
        (None, None) => unreachable!("clap requires an input"),
    };
    let mut failures = 0;
    let out: BTreeMap<String, GeorefEntry> = results
        .into_iter()
        .map(|(id, r)| {
            let e = match r {
                Ok(g) => GeorefEntry::Ok(g),
                Err(e) => {
                    log::warn!("{id}: {e}");
                    failures += 1;
                    GeorefEntry::Failed { error: e.to_string() }
                }
            };
            (id, e)
        })
        .collect();
    write_json(&a.out, &out)?;
    Ok(status(a.strict, failures))
}

fn cam(a: CamArgs) -> Result<Status> {
    let features = io::load_tensor(&a.features)?;
    let weights = io::load_weights(&a.weights)?;
    if !a.tau.is_finite() {
        bail!("tau must be finite");
    }
    let polys = extract_polygons(&features, &weights, a.width, a.height, a.tau, a.min_region_px)?;
    if let Some(m) = &a.mask {
        let full = upsample(&compute_cam(&features, &weights)?, a.width, a.height)?;
        io::write_pgm(m, &threshold_mask(&full, a.tau))?;
    }
    write_json(&a.out, &polys)?;
    Ok(Status::Ok)
}

fn georef_entry(path: &Path, id: &str) -> Result<GeorefResult> {
    let mut all: BTreeMap<String, GeorefEntry> = read_json(path)?;
    match all.remove(id) {
        Some(GeorefEntry::Ok(g)) => Ok(g),
        Some(GeorefEntry::Failed { error }) => bail!("{id} was not georeferenced: {error}"),
        None => bail!("{id} not found in {}", path.display()),
    }
}

fn camera<'a>(recon: &'a Reconstruction, id: &str) -> Result<&'a delmap::recon::CameraModel> {
    recon
        .camera_of(id)
        .ok_or_else(|| anyhow!("{id} is not a shot of the reconstruction"))
}

fn project(a: ProjectArgs) -> Result<Status> {
    let geo = georef_entry(&a.georef, &a.image_id)?;
    let recon = io::load_reconstruction(&a.reconstruction)?;
    let polys: Vec<ImagePolygon> = read_json(&a.polygons)?;
    let fp = image_footprint(&a.image_id, &geo.homography, camera(&recon, &a.image_id)?)
        .with_context(|| format!("footprint of {}", a.image_id))?;
    let world = project_cam_polygons(&polys, &geo.homography, &fp.polygon)?;
    let features: Vec<GeoFeature> = world
        .into_iter()
        .map(|polygon| GeoFeature {
            image_id: Some(a.image_id.clone()),
            method: Method::Cam.as_str().into(),
            polygon,
        })
        .collect();
    io::write_geojson(&a.out, &io::features_to_geojson(&features, &recon.origin))?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct Verdict {
    outcome: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    area_km2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    aspect_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn filter(a: FilterArgs) -> Result<Status> {
    let entries: BTreeMap<String, GeorefEntry> = read_json(&a.georef)?;
    let recon = io::load_reconstruction(&a.reconstruction)?;
    let mut cfg = FilterConfig::default();
    a.thresholds.apply(&mut cfg);
    cfg.validate().map_err(|e| anyhow!(e))?;
    let mut verdicts = BTreeMap::new();
    let mut retained = Vec::new();
    let mut failures = 0;
    let plain = |outcome, error: Option<String>| Verdict {
        outcome,
        area_km2: None,
        aspect_ratio: None,
        error,
    };
    for (id, entry) in entries {
        let v = match entry {
            GeorefEntry::Failed { error } => {
                failures += 1;
                plain("georef_failed", Some(error))
            }
            GeorefEntry::Ok(g) if !retain_gate(&g) => plain("gated_out", None),
            GeorefEntry::Ok(g) => match image_footprint(&id, &g.homography, camera(&recon, &id)?) {
                Err(FootprintError::Projection(HomographyError::Horizon)) => plain("horizon", None),
                Err(e) => {
                    failures += 1;
                    plain("footprint_failed", Some(e.to_string()))
                }
                Ok(fp) => {
                    let outcome = match verdict(&fp, &cfg) {
                        FilterVerdict::Retained => "retained",
                        FilterVerdict::AreaExceeded => "filtered_area",
                        FilterVerdict::AspectExceeded => "filtered_aspect",
                    };
                    let v = Verdict {
                        outcome,
                        area_km2: Some(fp.area_km2),
                        aspect_ratio: Some(fp.aspect_ratio),
                        error: None,
                    };
                    if outcome == "retained" {
                        retained.push(GeoFeature {
                            image_id: Some(id.clone()),
                            method: Method::Footprint.as_str().into(),
                            polygon: fp.polygon,
                        });
                    }
                    v
                }
            },
        };
        verdicts.insert(id, v);
    }
    io::write_geojson(&a.out, &io::features_to_geojson(&retained, &recon.origin))?;
    if let Some(p) = &a.verdicts {
        write_json(p, &verdicts)?;
    }
    Ok(status(a.strict, failures))
}

fn parse_origin(s: &str) -> Result<GeoPoint> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("origin {s:?} must be lat,lon[,alt]"))?;
    match parts[..] {
        [lat, lon] => Ok(GeoPoint::new(lat, lon, 0.0)?),
        [lat, lon, alt] => Ok(GeoPoint::new(lat, lon, alt)?),
        _ => bail!("origin {s:?} must be lat,lon[,alt]"),
    }
}

fn evaluate(a: EvaluateArgs) -> Result<Status> {
    let origin = match (&a.reconstruction, &a.origin) {
        (Some(r), _) => io::load_reconstruction(r)?.origin,
        (None, Some(o)) => parse_origin(o)?,
        (None, None) => unreachable!("clap requires an origin"),
    };
    let truth = io::read_multipolygon(&a.truth, &origin)?;
    let boundary = io::read_multipolygon(&a.boundary, &origin)?;
    let report = match a.method.to_ascii_lowercase().as_str() {
        "gps" => {
            let pts: Vec<Point2> = io::read_points(&a.estimate, &origin)?
                .into_iter()
                .map(|(_, p)| p)
                .collect();
            gps_precision(&pts, &truth, &boundary)?
        }
        m @ ("footprint" | "cam") => {
            let method = if m == "cam" { Method::Cam } else { Method::Footprint };
            let per_image: Vec<Vec<Polygon2D>> = io::read_image_polygons(&a.estimate, &origin)?
                .into_iter()
                .map(|(_, p)| p)
                .collect();
            area_precision(method, &per_image, &truth, &boundary)?
        }
        other => bail!("unknown method {other:?}, expected gps, footprint or cam"),
    };
    match &a.out {
        Some(p) => write_json(p, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(Status::Ok)
}

fn labels(a: LabelsArgs) -> Result<Status> {
    let scheme: Scheme = a.scheme.parse().map_err(|e: String| anyhow!(e))?;
    let records = io::read_votes(&a.votes)?;
    let labels = aggregate(&records, scheme)?;
    let sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["image_id", "label"])?;
    for (id, label) in &labels {
        w.write_record([id.as_str(), if *label { "1" } else { "0" }])?;
    }
    w.flush()?;
    Ok(Status::Ok)
}

fn synth(a: SynthArgs) -> Result<Status> {
    let mut params = match &a.params {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None if a.noiseless => SynthParams::noiseless(),
        None => SynthParams::default(),
    };
    if let Some(n) = a.cameras {
        params.cameras = n;
    }
    if let Some(f) = a.outlier_fraction {
        params.outlier_fraction = f;
    }
    params.horizon_camera |= a.horizon_camera;
    let scene = generate_scene(&params, a.seed)?;
    scene.write_to_dir(&a.out, a.seed)?;
    println!("{}", a.out.join("config.toml").display());
    Ok(Status::Ok)
}

fn run(a: RunArgs) -> Result<Status> {
    let mut cfg = match &a.config {
        Some(p) => PipelineConfig::load(p)?,
        None => {
            let mut c = PipelineConfig::for_directory(Path::new("."), 0);
            c.paths = InputPaths {
                reconstruction: a.reconstruction.clone().expect("clap requires a reconstruction"),
                features_dir: None,
                weights: None,
                truth: None,
                boundary: None,
                metadata: None,
            };
            c
        }
    };
    let p = &mut cfg.paths;
    if let Some(v) = &a.reconstruction {
        p.reconstruction = v.clone();
    }
    for (slot, flag) in [
        (&mut p.features_dir, &a.features_dir),
        (&mut p.weights, &a.weights),
        (&mut p.truth, &a.truth),
        (&mut p.boundary, &a.boundary),
        (&mut p.metadata, &a.metadata),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = a.threads {
        cfg.threads = t;
    }
    a.thresholds.apply(&mut cfg.filter);
    a.plane.apply(&mut cfg.plane_ransac);
    a.ransac.apply(&mut cfg.homography_ransac);
    if let Some(t) = a.tau {
        cfg.cam.tau = t;
    }
    if let Some(m) = a.min_region_px {
        cfg.cam.min_region_px = m;
    }
    let out = run_pipeline(&cfg)?;
    out.write(&a.out)?;
    let c = &out.manifest.counts;
    println!(
        "{} images: {} reconstructed, {} gated, {} flood and gated, {} retained, {} hard failures",
        c.images, c.reconstructed, c.gated, c.flood_and_gated, c.retained, c.hard_failures
    );
    if let Some(e) = &out.manifest.alignment_error {
        log::error!("alignment failed: {e}");
    }
    Ok(status(a.strict, c.hard_failures))
}
