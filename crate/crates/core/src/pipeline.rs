//! End-to-end orchestration: align → per-image georeference → 20% gate →
//! footprint and filters → CAM polygons projected and clipped to the
//! footprint → dissolve and evaluate.
//!
//! Per-image work runs on a bounded rayon pool over immutable inputs; all
//! results are merged in image-id order afterwards, so the output does not
//! depend on the thread count.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::align::{align_reconstruction, AlignmentReport, PlaneRansacParams};
use crate::cam::{extract_polygons, ClassWeights, ImagePolygon};
use crate::eval::{area_precision, gps_precision, Method, PrecisionReport, SweepImage};
use crate::footprint::{image_footprint, verdict, FilterConfig, FilterVerdict, Footprint, FootprintError};
use crate::geo::{geodetic_to_enu, intersect_polygons, GeoPoint, MultiPolygon2D, Point2, Polygon2D};
use crate::homography::{
    estimate_ransac, project_polygon, retain_gate, Correspondence, GeorefResult, Homography, HomographyError,
    HomographyRansacParams,
};
use crate::io::{self, GeoFeature, ImageMeta, IoError};
use crate::recon::Reconstruction;
use crate::seed::derive_seed;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Input(#[from] IoError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub reconstruction: PathBuf,
    /// Directory of `<image_id>.delt` feature tensors.
    #[serde(default)]
    pub features_dir: Option<PathBuf>,
    #[serde(default)]
    pub weights: Option<PathBuf>,
    #[serde(default)]
    pub truth: Option<PathBuf>,
    #[serde(default)]
    pub boundary: Option<PathBuf>,
    /// `image_id,flood[,lat,lon]`; without it every reconstructed image counts as flood.
    #[serde(default)]
    pub metadata: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CamParams {
    pub tau: f64,
    pub min_region_px: usize,
}

impl Default for CamParams {
    fn default() -> Self {
        CamParams {
            tau: 0.0,
            min_region_px: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 picks the number of CPUs.
    #[serde(default)]
    pub threads: usize,
    pub paths: InputPaths,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub plane_ransac: PlaneRansacParams,
    #[serde(default)]
    pub homography_ransac: HomographyRansacParams,
    #[serde(default)]
    pub cam: CamParams,
}

impl PipelineConfig {
    /// The file layout written by [`crate::synth::SynthScene::write_to_dir`], with relative paths.
    pub fn for_directory(_dir: &Path, seed: u64) -> Self {
        PipelineConfig {
            seed,
            threads: 0,
            paths: InputPaths {
                reconstruction: "reconstruction.json".into(),
                features_dir: Some("features".into()),
                weights: Some("weights.delt".into()),
                truth: Some("truth.geojson".into()),
                boundary: Some("boundary.geojson".into()),
                metadata: Some("metadata.csv".into()),
            },
            filter: FilterConfig::default(),
            plane_ransac: PlaneRansacParams::default(),
            homography_ransac: HomographyRansacParams::default(),
            cam: CamParams::default(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Reads a TOML config; relative paths are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text, path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_relative(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        fix(&mut paths.reconstruction);
        for p in [
            &mut paths.features_dir,
            &mut paths.weights,
            &mut paths.truth,
            &mut paths.boundary,
            &mut paths.metadata,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.filter.validate().map_err(ConfigError::Invalid)?;
        let pr = &self.plane_ransac;
        if !(pr.inlier_dist > 0.0) || pr.max_iters == 0 {
            return bad("plane_ransac.inlier_dist and max_iters must be positive".into());
        }
        let hr = &self.homography_ransac;
        if !(hr.inlier_dist > 0.0) || hr.max_iters == 0 || !(hr.confidence > 0.0 && hr.confidence < 1.0) {
            return bad("homography_ransac needs positive inlier_dist and max_iters, confidence in (0, 1)".into());
        }
        if !self.cam.tau.is_finite() {
            return bad("cam.tau must be finite".into());
        }
        if self.paths.features_dir.is_some() != self.paths.weights.is_some() {
            return bad("paths.features_dir and paths.weights must be given together".into());
        }
        if self.paths.truth.is_some() != self.paths.boundary.is_some() {
            return bad("paths.truth and paths.boundary must be given together".into());
        }
        Ok(())
    }
}

/// What happened to one image, in funnel order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disposition {
    /// Classified as flood but absent from the reconstruction: estimated, not localized.
    NotReconstructed,
    AlignmentFailed,
    GeorefFailed,
    /// Fewer than 20% of matches agree with the homography.
    GatedOut,
    /// Reconstructed and georeferenced, but not classified as flood.
    NotFlood,
    /// The image border crosses the horizon.
    Horizon,
    FootprintFailed,
    FilteredArea,
    FilteredAspect,
    Retained,
}

impl Disposition {
    /// Failures of a processing stage, as opposed to outcomes of a selection rule.
    pub fn is_hard_failure(self) -> bool {
        matches!(
            self,
            Disposition::AlignmentFailed | Disposition::GeorefFailed | Disposition::FootprintFailed
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub flood: bool,
    pub reconstructed: bool,
    pub disposition: Disposition,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correspondences: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inlier_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rms_error_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub footprint_area_km2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aspect_ratio: Option<f64>,
    /// Projected CAM polygons after clipping; absent when CAM was not run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cam_polygons: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cam_error: Option<String>,
}

impl ImageRecord {
    fn new(image_id: &str, flood: bool, reconstructed: bool, disposition: Disposition) -> Self {
        ImageRecord {
            image_id: image_id.to_string(),
            flood,
            reconstructed,
            disposition,
            correspondences: None,
            inlier_ratio: None,
            rms_error_m: None,
            footprint_area_km2: None,
            aspect_ratio: None,
            cam_polygons: None,
            error: None,
            cam_error: None,
        }
    }

    pub fn is_hard_failure(&self) -> bool {
        self.disposition.is_hard_failure() || self.cam_error.is_some()
    }
}

/// Image counts at each stage. `reconstructed ≥ gated ≥ flood_and_gated ≥ retained`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelCounts {
    pub images: usize,
    pub flood_classified: usize,
    pub reconstructed: usize,
    pub georeferenced: usize,
    pub gated: usize,
    pub flood_and_gated: usize,
    pub footprint_ok: usize,
    pub retained: usize,
    pub cam_localized: usize,
    pub not_localized: usize,
    pub hard_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub filter: FilterConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alignment: Option<AlignmentReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alignment_error: Option<String>,
    pub counts: FunnelCounts,
    pub images: Vec<ImageRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MethodOutcome {
    Report(PrecisionReport),
    Error { error: String },
}

impl MethodOutcome {
    pub fn report(&self) -> Option<&PrecisionReport> {
        match self {
            MethodOutcome::Report(r) => Some(r),
            MethodOutcome::Error { .. } => None,
        }
    }
}

/// Everything a run produces. All polygons are in aligned ENU meters.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub manifest: Manifest,
    pub origin: GeoPoint,
    /// GPS tags of flood-classified images.
    pub gps_points: Vec<(String, Point2)>,
    /// Footprints of retained images.
    pub footprints: Vec<Footprint>,
    /// Projected, clipped CAM polygons of retained images.
    pub cam_polygons: Vec<(String, Polygon2D)>,
    /// Flood images with a valid footprint, before filtering; input to a threshold sweep.
    pub sweep_images: Vec<SweepImage>,
    /// Present when truth and boundary were configured.
    pub reports: Option<BTreeMap<Method, MethodOutcome>>,
}

impl PipelineOutput {
    pub fn geojson(&self, method: Method) -> Value {
        match method {
            Method::Gps => io::points_to_geojson(&self.gps_points, Method::Gps.as_str(), &self.origin),
            Method::Footprint => {
                let f: Vec<GeoFeature> = self
                    .footprints
                    .iter()
                    .map(|f| GeoFeature {
                        image_id: Some(f.image_id.clone()),
                        method: Method::Footprint.as_str().into(),
                        polygon: f.polygon.clone(),
                    })
                    .collect();
                io::features_to_geojson(&f, &self.origin)
            }
            Method::Cam => {
                let f: Vec<GeoFeature> = self
                    .cam_polygons
                    .iter()
                    .map(|(id, p)| GeoFeature {
                        image_id: Some(id.clone()),
                        method: Method::Cam.as_str().into(),
                        polygon: p.clone(),
                    })
                    .collect();
                io::features_to_geojson(&f, &self.origin)
            }
        }
    }

    pub fn manifest_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn report_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.reports).expect("report serializes");
        s.push('\n');
        s
    }

    /// `estimate_{gps,footprint,cam}.geojson`, `report.json` and `manifest.json`.
    pub fn write(&self, dir: &Path) -> Result<(), IoError> {
        for m in [Method::Gps, Method::Footprint, Method::Cam] {
            io::write_geojson(&dir.join(format!("estimate_{}.geojson", m.as_str())), &self.geojson(m))?;
        }
        let write =
            |name: &str, s: String| std::fs::write(dir.join(name), s).map_err(|e| IoError::io(&dir.join(name), e));
        write("report.json", self.report_json())?;
        write("manifest.json", self.manifest_json())
    }
}

/// Pixel ↔ ground-plane matches of one image from its observations.
pub fn image_correspondences(recon: &Reconstruction, image_id: &str) -> Vec<Correspondence> {
    recon
        .observations
        .get(image_id)
        .map(|obs| {
            obs.iter()
                .map(|o| {
                    let p = &recon.points[o.point];
                    Correspondence {
                        image: o.pixel,
                        ground: Point2::new(p.x, p.y),
                    }
                })
                .collect()
        })
        .unwrap_or_default()
}

/// Homography of every shot of an aligned reconstruction, in id order.
pub fn georeference_all(
    aligned: &Reconstruction,
    params: &HomographyRansacParams,
    seed: u64,
) -> BTreeMap<String, Result<GeorefResult, HomographyError>> {
    use rayon::prelude::*;
    let ids: Vec<&String> = aligned.shots.keys().collect();
    let results: Vec<_> = ids
        .par_iter()
        .map(|id| {
            let corrs = image_correspondences(aligned, id);
            estimate_ransac(id, &corrs, params, derive_seed(seed, id))
        })
        .collect();
    ids.into_iter().cloned().zip(results).collect()
}

struct Inputs {
    recon: Reconstruction,
    meta: Option<BTreeMap<String, ImageMeta>>,
    weights: Option<ClassWeights>,
    truth: Option<MultiPolygon2D>,
    boundary: Option<MultiPolygon2D>,
}

fn load_inputs(cfg: &PipelineConfig) -> Result<Inputs, ConfigError> {
    let p = &cfg.paths;
    let recon = io::load_reconstruction(&p.reconstruction)?;
    let meta = p.metadata.as_deref().map(io::read_metadata).transpose()?;
    let weights = p.weights.as_deref().map(io::load_weights).transpose()?;
    let truth = p
        .truth
        .as_deref()
        .map(|t| io::read_multipolygon(t, &recon.origin))
        .transpose()?;
    let boundary = p
        .boundary
        .as_deref()
        .map(|b| io::read_multipolygon(b, &recon.origin))
        .transpose()?;
    Ok(Inputs {
        recon,
        meta,
        weights,
        truth,
        boundary,
    })
}

/// Result of the per-image worker, merged afterwards.
struct ImageWork {
    record: ImageRecord,
    sweep: Option<SweepImage>,
}

fn process_image(
    id: &str,
    flood: bool,
    aligned: &Reconstruction,
    cfg: &PipelineConfig,
    weights: Option<&ClassWeights>,
) -> ImageWork {
    let mut rec = ImageRecord::new(id, flood, true, Disposition::GeorefFailed);
    let corrs = image_correspondences(aligned, id);
    rec.correspondences = Some(corrs.len());
    let geo = match estimate_ransac(id, &corrs, &cfg.homography_ransac, derive_seed(cfg.seed, id)) {
        Ok(g) => g,
        Err(e) => {
            rec.error = Some(e.to_string());
            return ImageWork {
                record: rec,
                sweep: None,
            };
        }
    };
    rec.inlier_ratio = Some(geo.inlier_ratio);
    rec.rms_error_m = Some(geo.rms_error);
    if !retain_gate(&geo) {
        rec.disposition = Disposition::GatedOut;
        return ImageWork {
            record: rec,
            sweep: None,
        };
    }
    if !flood {
        rec.disposition = Disposition::NotFlood;
        return ImageWork {
            record: rec,
            sweep: None,
        };
    }
    let cam_model = aligned.camera_of(id).expect("validated reconstruction");
    let fp = match image_footprint(id, &geo.homography, cam_model) {
        Ok(f) => f,
        Err(FootprintError::Projection(HomographyError::Horizon)) => {
            rec.disposition = Disposition::Horizon;
            rec.error = Some(HomographyError::Horizon.to_string());
            return ImageWork {
                record: rec,
                sweep: None,
            };
        }
        Err(e) => {
            rec.disposition = Disposition::FootprintFailed;
            rec.error = Some(e.to_string());
            return ImageWork {
                record: rec,
                sweep: None,
            };
        }
    };
    rec.footprint_area_km2 = Some(fp.area_km2);
    rec.aspect_ratio = Some(fp.aspect_ratio);
    rec.disposition = match verdict(&fp, &cfg.filter) {
        FilterVerdict::Retained => Disposition::Retained,
        FilterVerdict::AreaExceeded => Disposition::FilteredArea,
        FilterVerdict::AspectExceeded => Disposition::FilteredAspect,
    };

    let mut cam_polygons = Vec::new();
    if let (Some(dir), Some(w)) = (cfg.paths.features_dir.as_deref(), weights) {
        match cam_world_polygons(id, dir, w, cfg, cam_model, &geo, &fp) {
            Ok(p) => {
                rec.cam_polygons = Some(p.len());
                cam_polygons = p;
            }
            Err(e) => rec.cam_error = Some(e),
        }
    }
    ImageWork {
        record: rec,
        sweep: Some(SweepImage {
            footprint: fp,
            cam_polygons,
        }),
    }
}

fn cam_world_polygons(
    id: &str,
    dir: &Path,
    weights: &ClassWeights,
    cfg: &PipelineConfig,
    cam_model: &crate::recon::CameraModel,
    geo: &GeorefResult,
    fp: &Footprint,
) -> Result<Vec<Polygon2D>, String> {
    let features = io::load_tensor(&dir.join(format!("{id}.delt"))).map_err(|e| e.to_string())?;
    let polys = extract_polygons(
        &features,
        weights,
        cam_model.width as usize,
        cam_model.height as usize,
        cfg.cam.tau,
        cfg.cam.min_region_px,
    )
    .map_err(|e| e.to_string())?;
    project_cam_polygons(&polys, &geo.homography, &fp.polygon).map_err(|e| e.to_string())
}

/// Maps image-space CAM polygons to the ground and clips them to the image footprint.
pub fn project_cam_polygons(
    polys: &[ImagePolygon],
    h: &Homography,
    footprint: &Polygon2D,
) -> Result<Vec<Polygon2D>, HomographyError> {
    let mut out = Vec::new();
    for p in polys {
        let world = project_polygon(h, &p.polygon)?;
        out.extend(intersect_polygons(&world, footprint));
    }
    Ok(out)
}

fn evaluate(
    gps: &[(String, Point2)],
    footprints: &[Footprint],
    cams: &[(String, Polygon2D)],
    truth: &MultiPolygon2D,
    boundary: &MultiPolygon2D,
) -> BTreeMap<Method, MethodOutcome> {
    let outcome = |r: Result<PrecisionReport, crate::eval::EvalError>| match r {
        Ok(r) => MethodOutcome::Report(r),
        Err(e) => MethodOutcome::Error { error: e.to_string() },
    };
    let pts: Vec<Point2> = gps.iter().map(|(_, p)| *p).collect();
    let fps: Vec<Vec<Polygon2D>> = footprints.iter().map(|f| vec![f.polygon.clone()]).collect();
    let mut by_image: BTreeMap<&str, Vec<Polygon2D>> = BTreeMap::new();
    for (id, p) in cams {
        by_image.entry(id).or_default().push(p.clone());
    }
    let cam: Vec<Vec<Polygon2D>> = by_image.into_values().collect();
    let mut out = BTreeMap::new();
    out.insert(Method::Gps, outcome(gps_precision(&pts, truth, boundary)));
    out.insert(
        Method::Footprint,
        outcome(area_precision(Method::Footprint, &fps, truth, boundary)),
    );
    out.insert(Method::Cam, outcome(area_precision(Method::Cam, &cam, truth, boundary)));
    out
}

/// Loads every input named by the config and runs the full pipeline.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput, ConfigError> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    Ok(run_loaded(cfg, inputs))
}

fn run_loaded(cfg: &PipelineConfig, inputs: Inputs) -> PipelineOutput {
    let Inputs {
        recon,
        meta,
        weights,
        truth,
        boundary,
    } = inputs;
    let origin = recon.origin;
    let is_flood = |id: &str| meta.as_ref().is_none_or(|m| m.get(id).is_some_and(|v| v.flood));

    let mut ids: BTreeSet<String> = recon.shots.keys().cloned().collect();
    if let Some(m) = &meta {
        ids.extend(m.keys().cloned());
    }

    let (aligned, alignment, alignment_error) = if recon.shots.is_empty() {
        (None, None, None)
    } else {
        match align_reconstruction(&recon, &cfg.plane_ransac, cfg.seed) {
            Ok((a, r)) => (Some(a), Some(r), None),
            Err(e) => (None, None, Some(e.to_string())),
        }
    };
    log::info!("{} images, {} reconstructed", ids.len(), recon.shots.len());

    let work: Vec<ImageWork> = {
        let recon_ids: Vec<&String> = recon.shots.keys().collect();
        let run = || {
            use rayon::prelude::*;
            recon_ids
                .par_iter()
                .map(|id| match &aligned {
                    Some(a) => process_image(id, is_flood(id), a, cfg, weights.as_ref()),
                    None => {
                        let mut r = ImageRecord::new(id, is_flood(id), true, Disposition::AlignmentFailed);
                        r.error = alignment_error.clone();
                        ImageWork { record: r, sweep: None }
                    }
                })
                .collect()
        };
        match rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        }
    };

    // single merge point
    let mut by_id: BTreeMap<String, ImageWork> = work.into_iter().map(|w| (w.record.image_id.clone(), w)).collect();
    let mut records = Vec::with_capacity(ids.len());
    let mut gps_points = Vec::new();
    let mut footprints = Vec::new();
    let mut cam_polygons = Vec::new();
    let mut sweep_images = Vec::new();
    let mut counts = FunnelCounts::default();
    for id in &ids {
        let flood = is_flood(id);
        let gps_tag = meta
            .as_ref()
            .and_then(|m| m.get(id))
            .and_then(|m| m.gps)
            .or_else(|| recon.shots.get(id).map(|s| s.gps));
        if flood {
            if let Some(g) = gps_tag {
                if let Ok(e) = geodetic_to_enu(&GeoPoint { alt: origin.alt, ..g }, &origin) {
                    gps_points.push((id.clone(), Point2::new(e.e, e.n)));
                }
            }
        }
        let Some(w) = by_id.remove(id) else {
            if flood {
                counts.not_localized += 1;
            }
            let d = if flood {
                Disposition::NotReconstructed
            } else {
                Disposition::NotFlood
            };
            records.push(ImageRecord::new(id, flood, false, d));
            continue;
        };
        let rec = w.record;
        counts.reconstructed += 1;
        if rec.inlier_ratio.is_some() {
            counts.georeferenced += 1;
        }
        let passed_gate = !matches!(
            rec.disposition,
            Disposition::AlignmentFailed | Disposition::GeorefFailed | Disposition::GatedOut
        );
        if passed_gate {
            counts.gated += 1;
            if flood {
                counts.flood_and_gated += 1;
            }
        }
        if let Some(s) = w.sweep {
            counts.footprint_ok += 1;
            if rec.disposition == Disposition::Retained {
                counts.retained += 1;
                footprints.push(s.footprint.clone());
                if !s.cam_polygons.is_empty() {
                    counts.cam_localized += 1;
                }
                cam_polygons.extend(s.cam_polygons.iter().map(|p| (id.clone(), p.clone())));
            }
            sweep_images.push(s);
        }
        if rec.is_hard_failure() {
            counts.hard_failures += 1;
        }
        records.push(rec);
    }
    counts.images = ids.len();
    counts.flood_classified = ids.iter().filter(|id| is_flood(id)).count();

    let reports = match (&truth, &boundary) {
        (Some(t), Some(b)) => Some(evaluate(&gps_points, &footprints, &cam_polygons, t, b)),
        _ => None,
    };
    log::info!(
        "reconstructed {} → gated {} → flood∩gated {} → retained {}",
        counts.reconstructed,
        counts.gated,
        counts.flood_and_gated,
        counts.retained
    );
    PipelineOutput {
        manifest: Manifest {
            seed: cfg.seed,
            filter: cfg.filter,
            alignment,
            alignment_error,
            counts,
            images: records,
        },
        origin,
        gps_points,
        footprints,
        cam_polygons,
        sweep_images,
        reports,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_validation() {
        let cfg = PipelineConfig::for_directory(Path::new("."), 42);
        let back = PipelineConfig::from_toml(&cfg.to_toml(), Path::new("c.toml")).unwrap();
        assert_eq!(back, cfg);
        let mut bad = cfg.clone();
        bad.filter.max_area_km2 = 0.0;
        assert!(matches!(bad.validate(), Err(ConfigError::Invalid(_))));
        let mut bad = cfg.clone();
        bad.paths.weights = None;
        assert!(bad.validate().is_err());
        assert!(PipelineConfig::from_toml(
            "seed = 1\n[paths]\nreconstruction = 'r.json'\nbogus = 1\n",
            Path::new("c")
        )
        .is_err());
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = PipelineConfig::from_toml("[paths]\nreconstruction = 'r.json'\n", Path::new("c")).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.filter, FilterConfig::default());
        assert_eq!(cfg.cam.min_region_px, 25);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let mut cfg = PipelineConfig::for_directory(Path::new("."), 1);
        cfg.resolve_relative(Path::new("/data/run"));
        assert_eq!(cfg.paths.reconstruction, PathBuf::from("/data/run/reconstruction.json"));
        assert_eq!(cfg.paths.features_dir, Some(PathBuf::from("/data/run/features")));
    }
}
