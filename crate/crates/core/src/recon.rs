//! Sparse reconstruction: cameras, posed shots, ENU points and pixel observations.

use std::collections::BTreeMap;

use nalgebra::{Point3, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::geo::{GeoPoint, Point2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconError {
    #[error("camera `{0}`: {1}")]
    Camera(String, String),
    #[error("shot `{0}`: {1}")]
    Shot(String, String),
    #[error("shot `{shot}` observation {index}: point index {point} out of range ({count} points)")]
    DanglingPoint {
        shot: String,
        index: usize,
        point: usize,
        count: usize,
    },
    #[error("observations reference unknown shot `{0}`")]
    UnknownShot(String),
    #[error("reconstruction needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

/// Distortion-free pinhole camera. Pixel (i, j) covers `[i, i+1) × [j, j+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub width: u32,
    pub height: u32,
    pub focal_px: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), String> {
        if self.width == 0 || self.height == 0 {
            return Err("image dimensions must be positive".into());
        }
        if !(self.focal_px.is_finite() && self.focal_px > 0.0) {
            return Err(format!("focal length {} must be positive", self.focal_px));
        }
        if !(self.cx >= 0.0 && self.cx <= self.width as f64 && self.cy >= 0.0 && self.cy <= self.height as f64) {
            return Err(format!("principal point ({}, {}) outside the image", self.cx, self.cy));
        }
        Ok(())
    }

    /// Image corners in pixel coordinates, clockwise in the y-down image frame.
    pub fn corners(&self) -> [Point2; 4] {
        let (w, h) = (self.width as f64, self.height as f64);
        [
            Point2::new(0.0, 0.0),
            Point2::new(w, 0.0),
            Point2::new(w, h),
            Point2::new(0.0, h),
        ]
    }
}

/// One posed image. `rotation` and `translation` map world to camera:
/// `x_cam = R x_world + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Shot {
    pub camera: String,
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
    pub gps: GeoPoint,
}

impl Shot {
    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.rotation.inverse() * self.translation))
    }

    pub fn to_camera(&self, x: &Point3<f64>) -> Vector3<f64> {
        self.rotation * x.coords + self.translation
    }

    /// Pixel coordinates of a world point, `None` behind the camera.
    pub fn project(&self, cam: &CameraModel, x: &Point3<f64>) -> Option<Point2> {
        let c = self.to_camera(x);
        if c.z <= 0.0 {
            return None;
        }
        Some(Point2::new(
            cam.focal_px * c.x / c.z + cam.cx,
            cam.focal_px * c.y / c.z + cam.cy,
        ))
    }
}

/// A pixel observation of a reconstructed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub pixel: Point2,
    pub point: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub origin: GeoPoint,
    pub cameras: BTreeMap<String, CameraModel>,
    pub shots: BTreeMap<String, Shot>,
    pub points: Vec<Point3<f64>>,
    pub observations: BTreeMap<String, Vec<Observation>>,
}

impl Reconstruction {
    pub fn validate(&self) -> Result<(), ReconError> {
        self.origin
            .validate()
            .map_err(|e| ReconError::NonFinite(format!("origin ({e})")))?;
        for (id, cam) in &self.cameras {
            cam.validate().map_err(|m| ReconError::Camera(id.clone(), m))?;
        }
        for (id, shot) in &self.shots {
            if !self.cameras.contains_key(&shot.camera) {
                return Err(ReconError::Shot(
                    id.clone(),
                    format!("unknown camera `{}`", shot.camera),
                ));
            }
            if !shot.translation.iter().all(|v| v.is_finite()) {
                return Err(ReconError::Shot(id.clone(), "non-finite translation".into()));
            }
            let norm = shot.rotation.quaternion().norm();
            if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
                return Err(ReconError::Shot(id.clone(), format!("quaternion norm {norm} is not 1")));
            }
            shot.gps
                .validate()
                .map_err(|e| ReconError::Shot(id.clone(), format!("gps: {e}")))?;
        }
        // an empty image set is valid; alignment needs a plane otherwise
        if !self.shots.is_empty() && self.points.len() < 3 {
            return Err(ReconError::TooFewPoints(self.points.len()));
        }
        if let Some(i) = self.points.iter().position(|p| !p.coords.iter().all(|v| v.is_finite())) {
            return Err(ReconError::NonFinite(format!("points[{i}]")));
        }
        for (shot, obs) in &self.observations {
            if !self.shots.contains_key(shot) {
                return Err(ReconError::UnknownShot(shot.clone()));
            }
            for (index, o) in obs.iter().enumerate() {
                if o.point >= self.points.len() {
                    return Err(ReconError::DanglingPoint {
                        shot: shot.clone(),
                        index,
                        point: o.point,
                        count: self.points.len(),
                    });
                }
                if !(o.pixel.x.is_finite() && o.pixel.y.is_finite()) {
                    return Err(ReconError::NonFinite(format!("observations.{shot}[{index}]")));
                }
            }
        }
        Ok(())
    }

    pub fn camera_of(&self, shot_id: &str) -> Option<&CameraModel> {
        self.shots.get(shot_id).and_then(|s| self.cameras.get(&s.camera))
    }

    pub fn camera_centers(&self) -> Vec<Point3<f64>> {
        self.shots.values().map(Shot::center).collect()
    }

    /// Reprojection residuals (pixels) of every observation of `shot_id`.
    pub fn reprojection_residuals(&self, shot_id: &str) -> Vec<Option<f64>> {
        let (Some(shot), Some(cam)) = (self.shots.get(shot_id), self.camera_of(shot_id)) else {
            return Vec::new();
        };
        self.observations
            .get(shot_id)
            .map(|obs| {
                obs.iter()
                    .map(|o| shot.project(cam, &self.points[o.point]).map(|p| (p - o.pixel).norm()))
                    .collect()
            })
            .unwrap_or_default()
    }
}
