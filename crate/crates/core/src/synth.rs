//! Synthetic scenes with known answers: a flat ground plane, a concave flood
//! polygon, oblique pinhole cameras on a near-collinear track, a tilted sparse
//! reconstruction with planted wrong matches, and feature maps whose CAM is the
//! signed pixel distance to the projected flood polygon.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Matrix3, Point3, Rotation3, Unit, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::apply_alignment;
use crate::cam::{ClassWeights, FeatureMap};
use crate::geo::{enu_to_geodetic, point_in_polygon, EnuPoint, GeoPoint, Point2, Polygon2D};
use crate::homography::{Correspondence, Homography};
use crate::io::{self, GeoFeature, IoError};
use crate::recon::{CameraModel, Observation, Reconstruction, Shot};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("flood polygon leaves the field of view of {0}")]
    FloodOutOfView(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub cameras: usize,
    pub points: usize,
    /// Fraction of observations re-pointed at a random wrong 3D point.
    pub outlier_fraction: f64,
    /// Fraction of 3D points placed above the ground (buildings, trees).
    pub off_plane_fraction: f64,
    /// Pixel noise σ on observations.
    pub pixel_noise: f64,
    /// Height noise σ of ground points, meters.
    pub ground_noise: f64,
    /// Tilt of the delivered reconstruction away from the true vertical, degrees.
    pub tilt_deg: f64,
    /// Adds one low camera pitched above the horizon.
    pub horizon_camera: bool,
    pub image_width: u32,
    pub image_height: u32,
    pub focal_px: f64,
    pub altitude: f64,
    pub channels: usize,
    pub grid_width: usize,
    pub grid_height: usize,
    pub flood_radius: f64,
    pub origin: GeoPoint,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            cameras: 12,
            points: 500,
            outlier_fraction: 0.2,
            off_plane_fraction: 0.05,
            pixel_noise: 0.3,
            ground_noise: 0.05,
            tilt_deg: 4.0,
            horizon_camera: false,
            image_width: 640,
            image_height: 480,
            focal_px: 500.0,
            altitude: 300.0,
            channels: 8,
            grid_width: 72,
            grid_height: 54,
            flood_radius: 110.0,
            origin: GeoPoint {
                lat: 30.45,
                lon: -91.15,
                alt: 0.0,
            },
        }
    }
}

impl SynthParams {
    /// No noise, no outliers, no off-plane points.
    pub fn noiseless() -> Self {
        SynthParams {
            outlier_fraction: 0.0,
            off_plane_fraction: 0.0,
            pixel_noise: 0.0,
            ground_noise: 0.0,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Params(m.into()));
        if self.cameras == 0 || self.points < 10 {
            return bad("need at least one camera and ten points");
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) || !(0.0..0.5).contains(&self.off_plane_fraction) {
            return bad("outlier_fraction must be in [0, 1) and off_plane_fraction in [0, 0.5)");
        }
        if self.pixel_noise < 0.0 || self.ground_noise < 0.0 || !(self.tilt_deg.abs() < 60.0) {
            return bad("noise must be non-negative and tilt below 60 degrees");
        }
        if self.channels < 2 || self.grid_width < 2 || self.grid_height < 2 {
            return bad("feature maps need at least 2 channels and a 2x2 grid");
        }
        if self.image_width < 2 || self.image_height < 2 || !(self.focal_px > 0.0) || !(self.altitude > 0.0) {
            return bad("camera intrinsics and altitude must be positive");
        }
        if !(self.flood_radius > 0.0) {
            return bad("flood_radius must be positive");
        }
        Ok(())
    }
}

/// Generated inputs together with the ground truth they were generated from.
/// World coordinates are ENU meters around `params.origin` with the ground at `z = 0`.
#[derive(Debug, Clone)]
pub struct SynthScene {
    pub params: SynthParams,
    /// Reconstruction as delivered to the pipeline: tilted and with planted outliers.
    pub reconstruction: Reconstruction,
    /// Untilted reconstruction in the true world frame.
    pub world: Reconstruction,
    /// True image-to-ground homographies.
    pub homographies: BTreeMap<String, Homography>,
    /// Pixel-to-ground matches in the world frame, outliers included.
    pub correspondences: BTreeMap<String, Vec<Correspondence>>,
    /// Indices into `correspondences` (and observations) of planted wrong matches.
    pub outliers: BTreeMap<String, Vec<usize>>,
    pub flood: Polygon2D,
    pub boundary: Polygon2D,
    pub features: BTreeMap<String, FeatureMap>,
    pub weights: ClassWeights,
    pub metadata: BTreeMap<String, io::ImageMeta>,
    pub horizon_image: Option<String>,
    /// Tilt applied to the world to obtain the delivered reconstruction.
    pub tilt: Rotation3<f64>,
    pub tilt_pivot: Point3<f64>,
}

/// World-to-camera rotation looking from `eye` at `target`, x right and y down in the image.
fn look_at(eye: &Point3<f64>, target: &Point3<f64>, roll: f64) -> Rotation3<f64> {
    let z = (target - eye).normalize();
    let x = z.cross(&Vector3::z()).normalize();
    let y = z.cross(&x);
    let r = Rotation3::from_matrix_unchecked(Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]));
    Rotation3::from_axis_angle(&Vector3::z_axis(), roll) * r
}

fn ground_homography(shot: &Shot, cam: &CameraModel) -> Homography {
    let r = shot.rotation.to_rotation_matrix();
    let k = Matrix3::new(cam.focal_px, 0.0, cam.cx, 0.0, cam.focal_px, cam.cy, 0.0, 0.0, 1.0);
    let m = r.matrix();
    let g = k * Matrix3::from_columns(&[m.column(0).into_owned(), m.column(1).into_owned(), shot.translation]);
    Homography::from_matrix(g.try_inverse().expect("camera off the ground plane")).expect("invertible")
}

fn flood_polygon(rng: &mut ChaCha8Rng, center: Point2, radius: f64) -> Polygon2D {
    let n = 24;
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let pts = (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            let r = radius * (1.0 + 0.25 * (3.0 * a + phase).sin()) + rng.random_range(-0.04..0.04) * radius;
            center + nalgebra::Vector2::new(a.cos(), a.sin()) * r
        })
        .collect();
    Polygon2D::new(pts).expect("star polygon is valid")
}

fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Positive inside, negative outside, in pixels.
fn signed_distance(p: Point2, poly: &Polygon2D) -> f64 {
    let d = poly
        .edges()
        .map(|(a, b)| segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min);
    if point_in_polygon(p, poly) {
        d
    } else {
        -d
    }
}

/// Feature channels and weights whose weighted sum at each grid node equals
/// `target` evaluated at the pixel center that node is upsampled onto.
fn feature_map(
    rng: &mut ChaCha8Rng,
    weights: &[f32],
    params: &SynthParams,
    target: impl Fn(Point2) -> f64,
) -> FeatureMap {
    let (k, gw, gh) = (params.channels, params.grid_width, params.grid_height);
    let n = gw * gh;
    let mut data = vec![0.0f32; k * n];
    for v in data[..(k - 1) * n].iter_mut() {
        *v = rng.random_range(0.0..1.0);
    }
    let sx = (params.image_width - 1) as f64 / (gw - 1) as f64;
    let sy = (params.image_height - 1) as f64 / (gh - 1) as f64;
    let last = f64::from(weights[k - 1]);
    for j in 0..gh {
        for i in 0..gw {
            let idx = j * gw + i;
            let p = Point2::new(i as f64 * sx + 0.5, j as f64 * sy + 0.5);
            let partial: f64 = (0..k - 1)
                .map(|c| f64::from(weights[c]) * f64::from(data[c * n + idx]))
                .sum();
            data[(k - 1) * n + idx] = ((target(p) - partial) / last) as f32;
        }
    }
    FeatureMap::new(k, gh, gw, data).expect("finite features")
}

fn image_id(i: usize) -> String {
    format!("img_{i:03}")
}

pub fn generate_scene(params: &SynthParams, seed: u64) -> Result<SynthScene, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flood_center = Point2::new(0.0, 150.0);
    let flood = flood_polygon(&mut rng, flood_center, params.flood_radius);
    let target = Point3::new(flood_center.x, flood_center.y, 0.0);

    let cam = CameraModel {
        width: params.image_width,
        height: params.image_height,
        focal_px: params.focal_px,
        cx: params.image_width as f64 / 2.0,
        cy: params.image_height as f64 / 2.0,
    };
    let mut cameras = BTreeMap::new();
    cameras.insert("cam0".to_string(), cam);

    // near-collinear track south of the flood
    let mut poses: Vec<(String, Point3<f64>, Rotation3<f64>)> = Vec::new();
    let span = 40.0 * (params.cameras.saturating_sub(1)) as f64;
    for i in 0..params.cameras {
        let x = -span / 2.0 + 40.0 * i as f64 + rng.random_range(-3.0..3.0);
        let eye = Point3::new(
            x,
            -100.0 + rng.random_range(-4.0..4.0),
            params.altitude + rng.random_range(-5.0..5.0),
        );
        let aim = target + Vector3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), 0.0);
        poses.push((image_id(i), eye, look_at(&eye, &aim, rng.random_range(-0.03..0.03))));
    }
    let horizon_image = params
        .horizon_camera
        .then(|| format!("img_{:03}_horizon", params.cameras));
    if let Some(id) = &horizon_image {
        let eye = Point3::new(0.0, -160.0, 60.0);
        // 75° from nadir: the upper image rows look above the horizon
        let pitch = 75f64.to_radians();
        let aim = eye + Vector3::new(0.0, pitch.sin(), -pitch.cos()) * 100.0;
        poses.push((id.clone(), eye, look_at(&eye, &aim, 0.0)));
    }

    let mut shots = BTreeMap::new();
    for (id, eye, rot) in &poses {
        let t = -(rot * eye.coords);
        let gps = enu_to_geodetic(&EnuPoint::new(eye.x, eye.y, eye.z), &params.origin)
            .map_err(|e| SynthError::Params(e.to_string()))?;
        shots.insert(
            id.clone(),
            Shot {
                camera: "cam0".into(),
                rotation: UnitQuaternion::from_rotation_matrix(rot),
                translation: t,
                gps,
            },
        );
    }

    // ground features, a few lifted off the plane
    let n_off = (params.points as f64 * params.off_plane_fraction).round() as usize;
    let mut points = Vec::with_capacity(params.points);
    for i in 0..params.points {
        let (x, y) = (rng.random_range(-450.0..450.0), rng.random_range(-60.0..620.0));
        let z = if i < n_off {
            rng.random_range(4.0..25.0)
        } else {
            params.ground_noise * rng.sample::<f64, _>(StandardNormal)
        };
        points.push(Point3::new(x, y, z));
    }
    let on_plane = &points[n_off..];
    let pivot = Point3::from(on_plane.iter().map(|p| p.coords).sum::<Vector3<f64>>() / on_plane.len() as f64);

    let mut observations = BTreeMap::new();
    let mut correspondences = BTreeMap::new();
    let mut outliers = BTreeMap::new();
    let mut homographies = BTreeMap::new();
    let (w, h) = (cam.width as f64, cam.height as f64);
    for (id, shot) in &shots {
        homographies.insert(id.clone(), ground_homography(shot, &cam));
        let mut obs = Vec::new();
        for (pi, p) in points.iter().enumerate() {
            if let Some(px) = shot.project(&cam, p) {
                let noisy = px
                    + nalgebra::Vector2::new(
                        rng.sample::<f64, _>(StandardNormal),
                        rng.sample::<f64, _>(StandardNormal),
                    ) * params.pixel_noise;
                if noisy.x >= 0.0 && noisy.x <= w && noisy.y >= 0.0 && noisy.y <= h {
                    obs.push(Observation {
                        pixel: noisy,
                        point: pi,
                    });
                }
            }
        }
        let mut bad = Vec::new();
        for (oi, o) in obs.iter_mut().enumerate() {
            if rng.random_bool(params.outlier_fraction) {
                let mut wrong = rng.random_range(0..points.len());
                while wrong == o.point {
                    wrong = rng.random_range(0..points.len());
                }
                o.point = wrong;
                bad.push(oi);
            }
        }
        let corrs = obs
            .iter()
            .map(|o| Correspondence {
                image: o.pixel,
                ground: Point2::new(points[o.point].x, points[o.point].y),
            })
            .collect();
        correspondences.insert(id.clone(), corrs);
        outliers.insert(id.clone(), bad);
        observations.insert(id.clone(), obs);
    }

    let world = Reconstruction {
        origin: params.origin,
        cameras,
        shots,
        points,
        observations,
    };
    let axis = Unit::new_normalize(Vector3::new(1.0, 0.6, 0.0));
    let tilt = Rotation3::from_axis_angle(&axis, params.tilt_deg.to_radians());
    let reconstruction = apply_alignment(&world, &tilt, &pivot);

    // CAM features: signed distance to the projected flood
    let weights: Vec<f32> = (0..params.channels)
        .map(|k| {
            if k + 1 == params.channels {
                0.5
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect();
    let mut features = BTreeMap::new();
    let mut metadata = BTreeMap::new();
    for (id, shot) in &world.shots {
        let projected: Option<Vec<Point2>> = flood
            .vertices()
            .iter()
            .map(|v| shot.project(&cam, &Point3::new(v.x, v.y, 0.0)))
            .collect();
        let is_horizon = horizon_image.as_deref() == Some(id.as_str());
        let fmap = match projected.map(Polygon2D::new) {
            Some(Ok(img_poly)) => {
                let inside = img_poly
                    .vertices()
                    .iter()
                    .all(|p| p.x > 1.0 && p.x < w - 1.0 && p.y > 1.0 && p.y < h - 1.0);
                if !inside && !is_horizon {
                    return Err(SynthError::FloodOutOfView(id.clone()));
                }
                feature_map(&mut rng, &weights, params, |p| signed_distance(p, &img_poly))
            }
            _ if is_horizon => feature_map(&mut rng, &weights, params, |_| -1.0),
            _ => return Err(SynthError::FloodOutOfView(id.clone())),
        };
        features.insert(id.clone(), fmap);
        metadata.insert(id.clone(), io::ImageMeta { flood: true, gps: None });
    }

    let boundary = Polygon2D::from_coords(&[
        [-1500.0, -1000.0],
        [1500.0, -1000.0],
        [1500.0, 2000.0],
        [-1500.0, 2000.0],
    ])
    .expect("rectangle");
    Ok(SynthScene {
        params: params.clone(),
        reconstruction,
        world,
        homographies,
        correspondences,
        outliers,
        flood,
        boundary,
        features,
        weights: ClassWeights::new(weights).expect("finite weights"),
        metadata,
        horizon_image,
        tilt,
        tilt_pivot: pivot,
    })
}

#[derive(Serialize)]
struct TruthRecord<'a> {
    seed: u64,
    params: &'a SynthParams,
    flood_enu: Vec<[f64; 2]>,
    homographies: BTreeMap<&'a str, [[f64; 3]; 3]>,
    outliers: &'a BTreeMap<String, Vec<usize>>,
    horizon_image: &'a Option<String>,
    tilt: [[f64; 3]; 3],
    tilt_pivot: [f64; 3],
}

impl SynthScene {
    /// Writes all pipeline inputs plus `truth.json` and a `config.toml`
    /// (paths relative to `dir`) that runs the pipeline on them.
    pub fn write_to_dir(&self, dir: &Path, seed: u64) -> Result<(), SynthError> {
        let origin = &self.params.origin;
        io::save_reconstruction(&dir.join("reconstruction.json"), &self.reconstruction)?;
        for (id, f) in &self.features {
            io::save_tensor(&dir.join("features").join(format!("{id}.delt")), f)?;
        }
        io::save_weights(&dir.join("weights.delt"), &self.weights)?;
        let region = |poly: &Polygon2D, method: &str| {
            io::features_to_geojson(
                &[GeoFeature {
                    image_id: None,
                    method: method.into(),
                    polygon: poly.clone(),
                }],
                origin,
            )
        };
        io::write_geojson(&dir.join("truth.geojson"), &region(&self.flood, "truth"))?;
        io::write_geojson(&dir.join("boundary.geojson"), &region(&self.boundary, "boundary"))?;
        io::write_metadata(&dir.join("metadata.csv"), &self.metadata)?;

        let m = |h: &Homography| -> [[f64; 3]; 3] { (*h).into() };
        let t = self.tilt.matrix();
        let truth = TruthRecord {
            seed,
            params: &self.params,
            flood_enu: self.flood.vertices().iter().map(|p| [p.x, p.y]).collect(),
            homographies: self.homographies.iter().map(|(k, h)| (k.as_str(), m(h))).collect(),
            outliers: &self.outliers,
            horizon_image: &self.horizon_image,
            tilt: [
                [t[(0, 0)], t[(0, 1)], t[(0, 2)]],
                [t[(1, 0)], t[(1, 1)], t[(1, 2)]],
                [t[(2, 0)], t[(2, 1)], t[(2, 2)]],
            ],
            tilt_pivot: [self.tilt_pivot.x, self.tilt_pivot.y, self.tilt_pivot.z],
        };
        let text = serde_json::to_string_pretty(&truth).expect("truth serializes");
        std::fs::write(dir.join("truth.json"), text).map_err(|e| IoError::io(&dir.join("truth.json"), e))?;

        let cfg = crate::pipeline::PipelineConfig::for_directory(dir, seed);
        std::fs::write(dir.join("config.toml"), cfg.to_toml()).map_err(|e| IoError::io(&dir.join("config.toml"), e))?;
        Ok(())
    }
}
