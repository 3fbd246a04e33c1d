use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Point3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{read_bytes, write_bytes, IoError};
use crate::geo::{GeoPoint, Point2};
use crate::recon::{CameraModel, Observation, Reconstruction, Shot};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCamera {
    width: u32,
    height: u32,
    focal_px: f64,
    cx: f64,
    cy: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawShot {
    camera: String,
    /// `[w, x, y, z]`
    q: [f64; 4],
    t: [f64; 3],
    gps: GeoPoint,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecon {
    origin: GeoPoint,
    cameras: BTreeMap<String, RawCamera>,
    shots: BTreeMap<String, RawShot>,
    points: Vec<[f64; 3]>,
    #[serde(default)]
    observations: BTreeMap<String, Vec<(f64, f64, usize)>>,
}

impl From<&Reconstruction> for RawRecon {
    fn from(r: &Reconstruction) -> Self {
        RawRecon {
            origin: r.origin,
            cameras: r
                .cameras
                .iter()
                .map(|(id, c)| {
                    (
                        id.clone(),
                        RawCamera {
                            width: c.width,
                            height: c.height,
                            focal_px: c.focal_px,
                            cx: c.cx,
                            cy: c.cy,
                        },
                    )
                })
                .collect(),
            shots: r
                .shots
                .iter()
                .map(|(id, s)| {
                    let q = s.rotation.quaternion();
                    (
                        id.clone(),
                        RawShot {
                            camera: s.camera.clone(),
                            q: [q.w, q.i, q.j, q.k],
                            t: [s.translation.x, s.translation.y, s.translation.z],
                            gps: s.gps,
                        },
                    )
                })
                .collect(),
            points: r.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            observations: r
                .observations
                .iter()
                .map(|(id, obs)| {
                    (
                        id.clone(),
                        obs.iter().map(|o| (o.pixel.x, o.pixel.y, o.point)).collect(),
                    )
                })
                .collect(),
        }
    }
}

impl From<RawRecon> for Reconstruction {
    fn from(raw: RawRecon) -> Self {
        Reconstruction {
            origin: raw.origin,
            cameras: raw
                .cameras
                .into_iter()
                .map(|(id, c)| {
                    (
                        id,
                        CameraModel {
                            width: c.width,
                            height: c.height,
                            focal_px: c.focal_px,
                            cx: c.cx,
                            cy: c.cy,
                        },
                    )
                })
                .collect(),
            shots: raw
                .shots
                .into_iter()
                .map(|(id, s)| {
                    let [w, x, y, z] = s.q;
                    // stored as given so that save/load is bit-exact; validate() checks the norm
                    let rotation = UnitQuaternion::new_unchecked(Quaternion::new(w, x, y, z));
                    (
                        id,
                        Shot {
                            camera: s.camera,
                            rotation,
                            translation: Vector3::from(s.t),
                            gps: s.gps,
                        },
                    )
                })
                .collect(),
            points: raw.points.into_iter().map(Point3::from).collect(),
            observations: raw
                .observations
                .into_iter()
                .map(|(id, obs)| {
                    let obs = obs
                        .into_iter()
                        .map(|(u, v, point)| Observation {
                            pixel: Point2::new(u, v),
                            point,
                        })
                        .collect();
                    (id, obs)
                })
                .collect(),
        }
    }
}

/// Parses and validates a reconstruction document. `path` is used for diagnostics only.
pub fn reconstruction_from_json(text: &str, path: &Path) -> Result<Reconstruction, IoError> {
    let raw: RawRecon = serde_json::from_str(text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let recon = Reconstruction::from(raw);
    recon.validate().map_err(|source| IoError::Recon {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(recon)
}

pub fn reconstruction_to_json(recon: &Reconstruction) -> String {
    serde_json::to_string_pretty(&RawRecon::from(recon)).expect("reconstruction serializes")
}

pub fn load_reconstruction(path: &Path) -> Result<Reconstruction, IoError> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|_| IoError::schema(path, "not valid UTF-8"))?;
    reconstruction_from_json(&text, path)
}

pub fn save_reconstruction(path: &Path, recon: &Reconstruction) -> Result<(), IoError> {
    write_bytes(path, reconstruction_to_json(recon).as_bytes())
}
