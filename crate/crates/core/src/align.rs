//! Gravity alignment of a reconstruction.
//!
//! The ground is assumed roughly flat: a plane is fitted through the sparse
//! points with RANSAC, the normal pointing toward the cameras is taken as the
//! up-vector, and the reconstruction is rigidly rotated so that it becomes +z.

use nalgebra::{Matrix3, Point3, Rotation3, SymmetricEigen, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recon::{Reconstruction, Shot};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignError {
    #[error("plane fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("points are collinear; no unique plane")]
    Collinear,
    #[error("no camera centers given")]
    NoCameras,
    #[error("cameras lie in the ground plane; up direction is ambiguous")]
    AmbiguousUp,
    #[error("non-finite input")]
    NonFinite,
}

/// Plane `normal · x = offset` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    pub fn signed_distance(&self, x: &Point3<f64>) -> f64 {
        self.normal.dot(&x.coords) - self.offset
    }

    pub fn flipped(&self) -> Plane {
        Plane {
            normal: -self.normal,
            offset: -self.offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneRansacParams {
    pub inlier_dist: f64,
    pub max_iters: usize,
}

impl Default for PlaneRansacParams {
    fn default() -> Self {
        PlaneRansacParams {
            inlier_dist: 2.0,
            max_iters: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit {
    pub plane: Plane,
    pub inliers: Vec<usize>,
    pub centroid: Point3<f64>,
}

fn centroid_of(points: &[Point3<f64>], idx: &[usize]) -> Point3<f64> {
    let s = idx.iter().fold(Vector3::zeros(), |acc, &i| acc + points[i].coords);
    Point3::from(s / idx.len() as f64)
}

/// Total least squares plane through the given points: the normal is the
/// direction of least spread of the centered cloud. Returns the eigenvalues
/// (ascending) alongside for degeneracy checks.
fn least_squares_plane(points: &[Point3<f64>], idx: &[usize]) -> (Plane, Point3<f64>, [f64; 3]) {
    let c = centroid_of(points, idx);
    let mut cov = Matrix3::zeros();
    for &i in idx {
        let d = points[i] - c;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let normal = eig.eigenvectors.column(order[0]).normalize();
    let evals = [
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    ];
    (
        Plane {
            normal,
            offset: normal.dot(&c.coords),
        },
        c,
        evals,
    )
}

fn classify(points: &[Point3<f64>], plane: &Plane, dist: f64) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| plane.signed_distance(&points[i]).abs() <= dist)
        .collect()
}

/// RANSAC plane fit followed by least-squares refinement on the consensus set.
///
/// Refinement alternates refit and reclassification until the inlier set is
/// stable, so the returned set is exactly the set of points within
/// `inlier_dist` of the returned plane.
pub fn fit_plane_ransac(points: &[Point3<f64>], params: &PlaneRansacParams, seed: u64) -> Result<PlaneFit, AlignError> {
    if points.len() < 3 {
        return Err(AlignError::TooFewPoints(points.len()));
    }
    if points.iter().any(|p| !p.coords.iter().all(|v| v.is_finite())) {
        return Err(AlignError::NonFinite);
    }
    let all: Vec<usize> = (0..points.len()).collect();
    let (_, _, evals) = least_squares_plane(points, &all);
    if evals[1] <= 1e-12 * evals[2].max(f64::MIN_POSITIVE) {
        return Err(AlignError::Collinear);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, Plane)> = None;
    for _ in 0..params.max_iters.max(1) {
        let s = sample(&mut rng, points.len(), 3);
        let (a, b, c) = (points[s.index(0)], points[s.index(1)], points[s.index(2)]);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len <= 1e-12 * (b - a).norm() * (c - a).norm() || len == 0.0 {
            continue;
        }
        let normal = n / len;
        let plane = Plane {
            normal,
            offset: normal.dot(&a.coords),
        };
        let count = points
            .iter()
            .filter(|p| plane.signed_distance(p).abs() <= params.inlier_dist)
            .count();
        if best.as_ref().is_none_or(|(k, _)| count > *k) {
            best = Some((count, plane));
        }
    }
    let (_, seed_plane) = best.ok_or(AlignError::Collinear)?;

    let mut inliers = classify(points, &seed_plane, params.inlier_dist);
    let mut plane = seed_plane;
    let mut centroid = centroid_of(points, &inliers);
    for _ in 0..20 {
        if inliers.len() < 3 {
            break;
        }
        let (p, c, _) = least_squares_plane(points, &inliers);
        let next = classify(points, &p, params.inlier_dist);
        plane = p;
        centroid = c;
        if next == inliers {
            break;
        }
        inliers = next;
    }
    let inliers = classify(points, &plane, params.inlier_dist);
    Ok(PlaneFit {
        plane,
        inliers,
        centroid,
    })
}

/// Picks whichever of ±normal points from the plane toward the mean camera center.
///
/// The least-squares plane passes through its inlier centroid, so the sign of
/// `n · (c̄ − centroid)` equals the sign of `n · c̄ − d`.
pub fn select_up_vector(plane: &Plane, camera_centers: &[Point3<f64>]) -> Result<Vector3<f64>, AlignError> {
    if camera_centers.is_empty() {
        return Err(AlignError::NoCameras);
    }
    let mean = camera_centers.iter().fold(Vector3::zeros(), |acc, c| acc + c.coords) / camera_centers.len() as f64;
    let side = plane.normal.dot(&mean) - plane.offset;
    if !side.is_finite() {
        return Err(AlignError::NonFinite);
    }
    if side == 0.0 {
        return Err(AlignError::AmbiguousUp);
    }
    Ok(if side > 0.0 { plane.normal } else { -plane.normal })
}

/// Minimal rotation taking `up` onto +z. The antipodal case rotates 180° about +x.
pub fn alignment_rotation(up: &Vector3<f64>) -> Rotation3<f64> {
    let v = up.normalize();
    let z = Vector3::z();
    let c = v.dot(&z);
    let k = v.cross(&z);
    let s = k.norm();
    if s == 0.0 {
        return if c > 0.0 {
            Rotation3::identity()
        } else {
            Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI)
        };
    }
    if 1.0 + c > 1e-8 {
        // R = I + [k]x + [k]x² / (1 + c), exact for unit v
        let kx = k.cross_matrix();
        let m = Matrix3::identity() + kx + kx * kx / (1.0 + c);
        Rotation3::from_matrix_unchecked(m)
    } else {
        let axis = nalgebra::Unit::new_normalize(k);
        Rotation3::from_axis_angle(&axis, s.atan2(c))
    }
}

/// Rotates the reconstruction about `pivot`. Shot poses are updated so every
/// observation keeps its reprojection residual.
pub fn apply_alignment(recon: &Reconstruction, rotation: &Rotation3<f64>, pivot: &Point3<f64>) -> Reconstruction {
    let mut out = recon.clone();
    let p = pivot.coords;
    for x in out.points.iter_mut() {
        *x = Point3::from(rotation * (x.coords - p) + p);
    }
    let rq = nalgebra::UnitQuaternion::from_rotation_matrix(rotation);
    for shot in out.shots.values_mut() {
        let old: Shot = shot.clone();
        // x_cam = R_s x + t = R_s Rᵀ x' + (t + R_s p − R_s Rᵀ p)
        let new_rot = old.rotation * rq.inverse();
        shot.translation = old.translation + old.rotation * p - new_rot * p;
        shot.rotation = nalgebra::UnitQuaternion::new_normalize(*new_rot.quaternion());
    }
    out
}

/// Summary of a full alignment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub up: [f64; 3],
    pub plane_normal: [f64; 3],
    pub plane_offset: f64,
    pub pivot: [f64; 3],
    pub rotation: [[f64; 3]; 3],
    pub inliers: usize,
    pub points: usize,
}

/// Fit, select up, rotate about the inlier centroid.
pub fn align_reconstruction(
    recon: &Reconstruction,
    params: &PlaneRansacParams,
    seed: u64,
) -> Result<(Reconstruction, AlignmentReport), AlignError> {
    let fit = fit_plane_ransac(&recon.points, params, seed)?;
    let up = select_up_vector(&fit.plane, &recon.camera_centers())?;
    let rot = alignment_rotation(&up);
    let aligned = apply_alignment(recon, &rot, &fit.centroid);
    let m = rot.matrix();
    let report = AlignmentReport {
        up: [up.x, up.y, up.z],
        plane_normal: [fit.plane.normal.x, fit.plane.normal.y, fit.plane.normal.z],
        plane_offset: fit.plane.offset,
        pivot: [fit.centroid.x, fit.centroid.y, fit.centroid.z],
        rotation: [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ],
        inliers: fit.inliers.len(),
        points: recon.points.len(),
    };
    Ok((aligned, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn exact_plane() {
        let pts: Vec<_> = (0..30)
            .map(|i| Point3::new((i % 6) as f64, (i / 6) as f64 * 1.5, 0.0))
            .collect();
        let fit = fit_plane_ransac(&pts, &PlaneRansacParams::default(), 1).unwrap();
        assert!((fit.plane.normal.z.abs() - 1.0).abs() < 1e-12);
        assert!(fit.plane.offset.abs() < 1e-12);
        assert_eq!(fit.inliers.len(), 30);
    }

    #[test]
    fn too_few_and_collinear() {
        let two = [Point3::origin(), Point3::new(1.0, 0.0, 0.0)];
        assert_eq!(
            fit_plane_ransac(&two, &PlaneRansacParams::default(), 0),
            Err(AlignError::TooFewPoints(2))
        );
        let line: Vec<_> = (0..10).map(|i| Point3::new(i as f64, 2.0 * i as f64, 0.5)).collect();
        assert_eq!(
            fit_plane_ransac(&line, &PlaneRansacParams::default(), 0),
            Err(AlignError::Collinear)
        );
    }

    #[test]
    fn noisy_plane_with_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut pts = Vec::new();
        for _ in 0..70 {
            let z: f64 = rng.sample(StandardNormal);
            pts.push(Point3::new(
                rng.random_range(0.0..50.0),
                rng.random_range(0.0..50.0),
                2.0 + 0.05 * z,
            ));
        }
        for _ in 0..30 {
            pts.push(Point3::new(
                rng.random_range(0.0..50.0),
                rng.random_range(0.0..50.0),
                rng.random_range(0.0..50.0),
            ));
        }
        let fit = fit_plane_ransac(&pts, &PlaneRansacParams::default(), 5).unwrap();
        let angle = fit.plane.normal.z.abs().clamp(-1.0, 1.0).acos().to_degrees();
        assert!(angle < 1.0, "{angle}");
        let recovered = fit.inliers.iter().filter(|&&i| i < 70).count();
        assert!(recovered >= 65, "{recovered}");
    }

    #[test]
    fn up_vector_follows_cameras() {
        let plane = Plane {
            normal: Vector3::z(),
            offset: 0.0,
        };
        let above = [Point3::new(0.0, 0.0, 1000.0)];
        let below = [Point3::new(0.0, 0.0, -1000.0)];
        assert_eq!(select_up_vector(&plane, &above).unwrap(), Vector3::z());
        assert_eq!(select_up_vector(&plane.flipped(), &above).unwrap(), Vector3::z());
        assert_eq!(select_up_vector(&plane, &below).unwrap(), -Vector3::z());
        assert_eq!(select_up_vector(&plane.flipped(), &below).unwrap(), -Vector3::z());
        assert_eq!(
            select_up_vector(&plane, &[Point3::new(5.0, 1.0, 0.0)]),
            Err(AlignError::AmbiguousUp)
        );
        assert_eq!(select_up_vector(&plane, &[]), Err(AlignError::NoCameras));
    }

    #[test]
    fn rotation_special_cases() {
        let r = alignment_rotation(&Vector3::z());
        assert_eq!(r, Rotation3::identity());

        let r = alignment_rotation(&Vector3::x());
        assert!((r * Vector3::x() - Vector3::z()).norm() < 1e-12);
        assert!((r * Vector3::y() - Vector3::y()).norm() < 1e-12);
        // 90° about −y, built by hand
        let expected = Matrix3::new(0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0);
        assert!((r.matrix() - expected).norm() < 1e-12);

        let r = alignment_rotation(&-Vector3::z());
        let expected = Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI);
        assert!((r.matrix() - expected.matrix()).norm() < 1e-12);
        assert!((r * -Vector3::z() - Vector3::z()).norm() < 1e-12);
    }
}
