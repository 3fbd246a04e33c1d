//! Image-to-ground projective transformations.
//!
//! Pixels of an image of a flat scene relate to ground-plane coordinates by a
//! homography. It is estimated from image↔world matches with the normalized
//! DLT inside RANSAC, using a reprojection threshold measured in world meters.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{Point2, Polygon2D};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomographyError {
    #[error("need at least 4 correspondences, got {0}")]
    TooFewCorrespondences(usize),
    #[error("degenerate correspondence configuration")]
    Degenerate,
    #[error("no model reached 4 inliers")]
    NoConsensus,
    #[error("point maps to or beyond the horizon")]
    Horizon,
    #[error("non-finite input")]
    NonFinite,
}

/// One image↔ground match: pixel coordinates and ENU ground coordinates in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub image: Point2,
    pub ground: Point2,
}

impl Correspondence {
    pub fn new(u: f64, v: f64, x: f64, y: f64) -> Self {
        Correspondence {
            image: Point2::new(u, v),
            ground: Point2::new(x, y),
        }
    }
}

/// 3×3 projective map, kept at unit Frobenius norm with a positive bottom-right entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, HomographyError> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(HomographyError::NonFinite);
        }
        let norm = m.norm();
        if norm == 0.0 {
            return Err(HomographyError::Degenerate);
        }
        let mut n = m / norm;
        let sign_ref = if n[(2, 2)] != 0.0 {
            n[(2, 2)]
        } else {
            n.iter().copied().find(|v| *v != 0.0).unwrap_or(1.0)
        };
        if sign_ref < 0.0 {
            n = -n;
        }
        if n.determinant().abs() <= 1e-12 {
            return Err(HomographyError::Degenerate);
        }
        Ok(Homography(n))
    }

    pub fn identity() -> Self {
        Homography::from_matrix(Matrix3::identity()).expect("identity is regular")
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Result<Self, HomographyError> {
        let inv = self.0.try_inverse().ok_or(HomographyError::Degenerate)?;
        Homography::from_matrix(inv)
    }

    fn w(&self, p: &Point2) -> f64 {
        self.0[(2, 0)] * p.x + self.0[(2, 1)] * p.y + self.0[(2, 2)]
    }

    fn horizon_tol(&self, p: &Point2) -> f64 {
        1e-10 * self.0.norm() * (p.x * p.x + p.y * p.y + 1.0).sqrt()
    }
}

impl From<[[f64; 3]; 3]> for Homography {
    fn from(r: [[f64; 3]; 3]) -> Self {
        let m = Matrix3::new(
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        );
        Homography::from_matrix(m).unwrap_or(Homography(m))
    }
}

impl From<Homography> for [[f64; 3]; 3] {
    fn from(h: Homography) -> Self {
        let m = h.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }
}

pub fn project_point(h: &Homography, p: Point2) -> Result<Point2, HomographyError> {
    let w = h.w(&p);
    if w.abs() < h.horizon_tol(&p) {
        return Err(HomographyError::Horizon);
    }
    let m = h.matrix();
    Ok(Point2::new(
        (m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)]) / w,
        (m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)]) / w,
    ))
}

/// Maps every vertex. Straight edges stay straight under a projective map, so
/// the polygon is valid as long as it does not cross the horizon line `w = 0`.
pub fn project_polygon(h: &Homography, poly: &Polygon2D) -> Result<Polygon2D, HomographyError> {
    let mut sign = 0.0;
    for p in poly.vertices() {
        let w = h.w(p);
        if w.abs() < h.horizon_tol(p) {
            return Err(HomographyError::Horizon);
        }
        if sign == 0.0 {
            sign = w.signum();
        } else if w.signum() != sign {
            return Err(HomographyError::Horizon);
        }
    }
    let pts = poly
        .vertices()
        .iter()
        .map(|p| project_point(h, *p))
        .collect::<Result<Vec<_>, _>>()?;
    Polygon2D::from_vertices_dedup(pts).map_err(|_| HomographyError::Degenerate)
}

/// Similarity moving the centroid to the origin with mean distance √2.
fn normalizing_transform(pts: &[Point2]) -> Result<Matrix3<f64>, HomographyError> {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
    let (cx, cy) = (sx / n, sy / n);
    let mean_dist = pts.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / n;
    if !(mean_dist > 0.0 && mean_dist.is_finite()) {
        return Err(HomographyError::Degenerate);
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn apply(m: &Matrix3<f64>, p: &Point2) -> Point2 {
    let v = m * Vector3::new(p.x, p.y, 1.0);
    Point2::new(v.x / v.z, v.y / v.z)
}

/// Normalized DLT. The solution is the right singular vector of the 2n×9
/// design matrix with the smallest singular value.
pub fn estimate_dlt(corrs: &[Correspondence]) -> Result<Homography, HomographyError> {
    if corrs.len() < 4 {
        return Err(HomographyError::TooFewCorrespondences(corrs.len()));
    }
    if corrs
        .iter()
        .any(|c| !(c.image.x.is_finite() && c.image.y.is_finite() && c.ground.x.is_finite() && c.ground.y.is_finite()))
    {
        return Err(HomographyError::NonFinite);
    }
    let img: Vec<Point2> = corrs.iter().map(|c| c.image).collect();
    let gnd: Vec<Point2> = corrs.iter().map(|c| c.ground).collect();
    let t_img = normalizing_transform(&img)?;
    let t_gnd = normalizing_transform(&gnd)?;

    let rows = (2 * corrs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (p, q)) in img.iter().zip(&gnd).enumerate() {
        let p = apply(&t_img, p);
        let q = apply(&t_gnd, q);
        let (u, v, x, y) = (p.x, p.y, q.x, q.y);
        let r = 2 * i;
        a.row_mut(r)
            .copy_from_slice(&[0.0, 0.0, 0.0, -u, -v, -1.0, y * u, y * v, y]);
        a.row_mut(r + 1)
            .copy_from_slice(&[u, v, 1.0, 0.0, 0.0, 0.0, -x * u, -x * v, -x]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(HomographyError::Degenerate)?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let smallest = order[8];
    if sv[order[7]] <= 1e-8 * sv[order[0]] {
        return Err(HomographyError::Degenerate);
    }
    let h = v_t.row(smallest);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_gnd_inv = t_gnd.try_inverse().ok_or(HomographyError::Degenerate)?;
    Homography::from_matrix(t_gnd_inv * hn * t_img)
}

fn transfer_error(h: &Homography, c: &Correspondence) -> f64 {
    match project_point(h, c.image) {
        Ok(p) => (p - c.ground).norm(),
        Err(_) => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomographyRansacParams {
    /// Inlier threshold on transfer error, in world meters.
    pub inlier_dist: f64,
    pub max_iters: usize,
    /// Confidence for the adaptive iteration bound.
    pub confidence: f64,
}

impl Default for HomographyRansacParams {
    fn default() -> Self {
        HomographyRansacParams {
            inlier_dist: 5.0,
            max_iters: 2000,
            confidence: 0.999,
        }
    }
}

/// Outcome of robust estimation for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeorefResult {
    pub image_id: String,
    pub homography: Homography,
    pub inlier_ratio: f64,
    pub inlier_count: usize,
    pub correspondence_count: usize,
    /// RMS transfer error over the inliers, meters.
    pub rms_error: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inliers: Vec<usize>,
}

fn collinear(a: &Point2, b: &Point2, c: &Point2) -> bool {
    let ab = b - a;
    let ac = c - a;
    let cross = ab.x * ac.y - ab.y * ac.x;
    cross.abs() <= 1e-9 * ab.norm_squared().max(ac.norm_squared())
}

fn sample_is_degenerate(pts: [&Point2; 4]) -> bool {
    let [a, b, c, d] = pts;
    collinear(a, b, c) || collinear(a, b, d) || collinear(a, c, d) || collinear(b, c, d)
}

fn inliers_of(h: &Homography, corrs: &[Correspondence], dist: f64) -> (Vec<usize>, f64) {
    let mut idx = Vec::new();
    let mut sse = 0.0;
    for (i, c) in corrs.iter().enumerate() {
        let e = transfer_error(h, c);
        if e <= dist {
            idx.push(i);
            sse += e * e;
        }
    }
    (idx, sse)
}

/// RANSAC over minimal 4-point DLT samples, then DLT refit on the consensus set
/// (repeated until the inlier set stops changing).
pub fn estimate_ransac(
    image_id: &str,
    corrs: &[Correspondence],
    params: &HomographyRansacParams,
    seed: u64,
) -> Result<GeorefResult, HomographyError> {
    let n = corrs.len();
    if n < 4 {
        return Err(HomographyError::TooFewCorrespondences(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Homography, usize, f64)> = None;
    let mut needed = params.max_iters;
    let mut iter = 0;
    while iter < needed.min(params.max_iters) {
        iter += 1;
        let s = sample(&mut rng, n, 4);
        let sel: Vec<Correspondence> = s.iter().map(|i| corrs[i]).collect();
        if sample_is_degenerate([&sel[0].image, &sel[1].image, &sel[2].image, &sel[3].image])
            || sample_is_degenerate([&sel[0].ground, &sel[1].ground, &sel[2].ground, &sel[3].ground])
        {
            continue;
        }
        let Ok(h) = estimate_dlt(&sel) else { continue };
        let (idx, sse) = inliers_of(&h, corrs, params.inlier_dist);
        let better = match &best {
            None => true,
            Some((_, k, e)) => idx.len() > *k || (idx.len() == *k && sse < *e),
        };
        if better {
            let w = idx.len() as f64 / n as f64;
            best = Some((h, idx.len(), sse));
            let p_good = w.powi(4);
            needed = if p_good >= 1.0 {
                iter
            } else if p_good <= 0.0 {
                params.max_iters
            } else {
                let k = (1.0 - params.confidence).ln() / (1.0 - p_good).ln();
                if k.is_finite() {
                    k.ceil().max(1.0) as usize
                } else {
                    params.max_iters
                }
            };
        }
    }
    let (mut h, count, _) = best.ok_or(HomographyError::NoConsensus)?;
    if count < 4 {
        return Err(HomographyError::NoConsensus);
    }
    let (mut inliers, _) = inliers_of(&h, corrs, params.inlier_dist);
    for _ in 0..10 {
        let subset: Vec<Correspondence> = inliers.iter().map(|&i| corrs[i]).collect();
        let Ok(refit) = estimate_dlt(&subset) else { break };
        let (next, _) = inliers_of(&refit, corrs, params.inlier_dist);
        if next.len() < 4 || next.len() < inliers.len() {
            break;
        }
        h = refit;
        let done = next == inliers;
        inliers = next;
        if done {
            break;
        }
    }
    let sse: f64 = inliers.iter().map(|&i| transfer_error(&h, &corrs[i]).powi(2)).sum();
    Ok(GeorefResult {
        image_id: image_id.to_string(),
        homography: h,
        inlier_ratio: inliers.len() as f64 / n as f64,
        inlier_count: inliers.len(),
        correspondence_count: n,
        rms_error: (sse / inliers.len() as f64).sqrt(),
        inliers,
    })
}

/// Minimum inlier fraction for an image to be kept.
pub const RETAIN_MIN_INLIER_RATIO: f64 = 0.20;

/// True when at least 20% of the matches are inliers.
pub fn retain_gate(r: &GeorefResult) -> bool {
    r.inlier_ratio >= RETAIN_MIN_INLIER_RATIO
}
