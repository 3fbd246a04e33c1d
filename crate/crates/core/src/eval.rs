//! Precision of flood estimates against a truth region inside an administrative boundary.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::footprint::{verdict, FilterConfig, FilterVerdict, Footprint};
use crate::geo::{point_in_multipolygon, MultiPolygon2D, Overlay, Point2, Polygon2D};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no estimate points fall inside the boundary")]
    NoPointsInBoundary,
    #[error("estimate has zero area inside the boundary")]
    ZeroArea,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gps,
    Footprint,
    Cam,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Gps => "gps",
            Method::Footprint => "footprint",
            Method::Cam => "cam",
        }
    }
}

/// `numerator / denominator`; point counts for [`Method::Gps`], km² otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionReport {
    pub method: Method,
    pub precision: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub image_count: usize,
}

/// Fraction of image positions inside the boundary that are also inside the truth region.
pub fn gps_precision(
    points: &[Point2],
    truth: &MultiPolygon2D,
    boundary: &MultiPolygon2D,
) -> Result<PrecisionReport, EvalError> {
    let inside: Vec<&Point2> = points.iter().filter(|p| point_in_multipolygon(**p, boundary)).collect();
    if inside.is_empty() {
        return Err(EvalError::NoPointsInBoundary);
    }
    let hits = inside.iter().filter(|p| point_in_multipolygon(***p, truth)).count();
    Ok(PrecisionReport {
        method: Method::Gps,
        precision: hits as f64 / inside.len() as f64,
        numerator: hits as f64,
        denominator: inside.len() as f64,
        image_count: inside.len(),
    })
}

/// Overlap areas of the dissolved estimate, in m²: `(U∩B∩T, U∩B)`.
fn dissolved_areas(polys: &[&Polygon2D], truth: &MultiPolygon2D, boundary: &MultiPolygon2D) -> (f64, f64) {
    let mut ov = Overlay::new();
    let t = ov.add_multipolygon(truth);
    let b = ov.add_multipolygon(boundary);
    let first = ov.operand_count();
    for p in polys {
        ov.add_polygon(p);
    }
    let any = |s: &[bool]| s[first..].iter().any(|&v| v);
    let num = |s: &[bool]| any(s) && s[b] && s[t];
    let den = |s: &[bool]| any(s) && s[b];
    let r = ov.measure(&[&num, &den]);
    (r[0], r[1])
}

/// Area precision of the union of all estimate polygons, clipped to the boundary.
/// Overlapping images are counted once.
pub fn area_precision(
    method: Method,
    per_image: &[Vec<Polygon2D>],
    truth: &MultiPolygon2D,
    boundary: &MultiPolygon2D,
) -> Result<PrecisionReport, EvalError> {
    let polys: Vec<&Polygon2D> = per_image.iter().flatten().collect();
    let (num, den) = dissolved_areas(&polys, truth, boundary);
    if !(den > 0.0) {
        return Err(EvalError::ZeroArea);
    }
    Ok(PrecisionReport {
        method,
        precision: (num / den).clamp(0.0, 1.0),
        numerator: num / 1e6,
        denominator: den / 1e6,
        image_count: per_image.iter().filter(|p| !p.is_empty()).count(),
    })
}

/// Intersection over union of a dissolved estimate against a reference region.
pub fn dissolved_iou(polys: &[Polygon2D], reference: &MultiPolygon2D) -> f64 {
    let mut ov = Overlay::new();
    let r = ov.add_multipolygon(reference);
    let first = ov.operand_count();
    for p in polys {
        ov.add_polygon(p);
    }
    let any = |s: &[bool]| s[first..].iter().any(|&v| v);
    let inter = |s: &[bool]| any(s) && s[r];
    let union = |s: &[bool]| any(s) || s[r];
    let a = ov.measure(&[&inter, &union]);
    if a[1] > 0.0 {
        a[0] / a[1]
    } else {
        0.0
    }
}

/// Per-image inputs of a threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepImage {
    pub footprint: Footprint,
    /// Projected CAM polygons, already clipped to the footprint.
    pub cam_polygons: Vec<Polygon2D>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub max_aspect_ratio: f64,
    pub max_area_km2: f64,
    pub retained: usize,
    pub footprint: Option<PrecisionReport>,
    pub cam: Option<PrecisionReport>,
}

/// Rows follow `aspect_ratios`, columns follow `areas_km2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub aspect_ratios: Vec<f64>,
    pub areas_km2: Vec<f64>,
    pub cells: Vec<Vec<SweepCell>>,
}

impl SweepTable {
    pub fn cell(&self, row: usize, col: usize) -> &SweepCell {
        &self.cells[row][col]
    }
}

/// Re-applies the footprint filters for every threshold pair and scores both
/// the footprint and the CAM estimate. Cells are evaluated in parallel.
pub fn precision_sweep(
    images: &[SweepImage],
    truth: &MultiPolygon2D,
    boundary: &MultiPolygon2D,
    aspect_ratios: &[f64],
    areas_km2: &[f64],
) -> SweepTable {
    use rayon::prelude::*;
    let cells = aspect_ratios
        .iter()
        .map(|&ratio| {
            areas_km2
                .par_iter()
                .map(|&area| {
                    let cfg = FilterConfig {
                        max_area_km2: area,
                        max_aspect_ratio: ratio,
                    };
                    let kept: Vec<&SweepImage> = images
                        .iter()
                        .filter(|im| verdict(&im.footprint, &cfg) == FilterVerdict::Retained)
                        .collect();
                    let fps: Vec<Vec<Polygon2D>> = kept.iter().map(|im| vec![im.footprint.polygon.clone()]).collect();
                    let cams: Vec<Vec<Polygon2D>> = kept.iter().map(|im| im.cam_polygons.clone()).collect();
                    SweepCell {
                        max_aspect_ratio: ratio,
                        max_area_km2: area,
                        retained: kept.len(),
                        footprint: area_precision(Method::Footprint, &fps, truth, boundary).ok(),
                        cam: area_precision(Method::Cam, &cams, truth, boundary).ok(),
                    }
                })
                .collect()
        })
        .collect();
    SweepTable {
        aspect_ratios: aspect_ratios.to_vec(),
        areas_km2: areas_km2.to_vec(),
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(x: f64, y: f64, s: f64) -> Polygon2D {
        Polygon2D::from_coords(&[[x, y], [x + s, y], [x + s, y + s], [x, y + s]]).unwrap()
    }

    fn world() -> MultiPolygon2D {
        sq(-1000.0, -1000.0, 3000.0).into()
    }

    #[test]
    fn gps_examples() {
        let truth: MultiPolygon2D = sq(0.0, 0.0, 10.0).into();
        let pts = [Point2::new(1.0, 1.0), Point2::new(5.0, 5.0)];
        assert_eq!(gps_precision(&pts, &truth, &world()).unwrap().precision, 1.0);
        let out = [Point2::new(100.0, 1.0), Point2::new(50.0, 5.0)];
        assert_eq!(gps_precision(&out, &truth, &world()).unwrap().precision, 0.0);
        let far = [Point2::new(1e5, 0.0)];
        assert_eq!(
            gps_precision(&far, &truth, &world()),
            Err(EvalError::NoPointsInBoundary)
        );
    }

    #[test]
    fn area_examples() {
        let truth: MultiPolygon2D = sq(0.0, 0.0, 10.0).into();
        let inside = vec![vec![sq(1.0, 1.0, 2.0)]];
        let r = area_precision(Method::Cam, &inside, &truth, &world()).unwrap();
        assert!((r.precision - 1.0).abs() < 1e-12);
        let outside = vec![vec![sq(20.0, 1.0, 2.0)]];
        assert_eq!(
            area_precision(Method::Cam, &outside, &truth, &world())
                .unwrap()
                .precision,
            0.0
        );
        let half_truth: MultiPolygon2D = Polygon2D::from_coords(&[[0.0, 0.0], [0.5, 0.0], [0.5, 1.0], [0.0, 1.0]])
            .unwrap()
            .into();
        let r = area_precision(Method::Footprint, &[vec![sq(0.0, 0.0, 1.0)]], &half_truth, &world()).unwrap();
        assert!((r.precision - 0.5).abs() < 1e-12);
        assert_eq!(
            area_precision(Method::Cam, &[], &truth, &world()),
            Err(EvalError::ZeroArea)
        );
    }

    #[test]
    fn overlapping_images_counted_once() {
        let truth: MultiPolygon2D = sq(0.0, 0.0, 1.0).into();
        // two images each covering [0,2]x[0,1]; partitioned or duplicated, same answer
        let a = Polygon2D::from_coords(&[[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]]).unwrap();
        let dup = area_precision(Method::Cam, &[vec![a.clone()], vec![a.clone()]], &truth, &world()).unwrap();
        let halves = area_precision(
            Method::Cam,
            &[
                vec![sq(0.0, 0.0, 1.0)],
                vec![Polygon2D::from_coords(&[[1.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0]]).unwrap()],
            ],
            &truth,
            &world(),
        )
        .unwrap();
        assert!((dup.precision - 0.5).abs() < 1e-12);
        assert!((halves.precision - 0.5).abs() < 1e-12);
    }

    #[test]
    fn boundary_clips_estimate() {
        let truth: MultiPolygon2D = sq(0.0, 0.0, 1.0).into();
        let boundary: MultiPolygon2D = sq(0.0, 0.0, 1.0).into();
        let r = area_precision(Method::Cam, &[vec![sq(0.0, 0.0, 4.0)]], &truth, &boundary).unwrap();
        assert!((r.precision - 1.0).abs() < 1e-12);
        assert!((r.denominator - 1e-6).abs() < 1e-15);
    }

    #[test]
    fn iou_of_identical_regions() {
        let t = sq(0.0, 0.0, 3.0);
        assert!((dissolved_iou(std::slice::from_ref(&t), &t.clone().into()) - 1.0).abs() < 1e-12);
        assert!((dissolved_iou(&[sq(0.0, 0.0, 1.0)], &sq(0.0, 0.0, 2.0).into()) - 0.25).abs() < 1e-12);
    }
}
