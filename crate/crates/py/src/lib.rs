//! Python bindings for `delmap`.
//!
//! Geometry is exchanged as plain lists of `(x, y)` tuples; polygons get a thin
//! wrapper so area and rectangle queries stay on the Rust side.

use std::path::PathBuf;

use delmap::align::{fit_plane_ransac, PlaneRansacParams};
use delmap::cam::{extract_polygons, ClassWeights, FeatureMap};
use delmap::geo::{self, intersect_polygons, min_area_rect};
use delmap::homography::{self as hg, Correspondence, HomographyRansacParams};
use delmap::labels::{aggregate, Scheme, VoteRecord};
use delmap::pipeline::{run_pipeline as run, PipelineConfig};
use delmap::synth::{generate_scene as generate, SynthParams};
use delmap::{EnuPoint, GeoPoint, Point2, Polygon2D};
use nalgebra::{Matrix3, Point3};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn geo_point(p: (f64, f64, f64)) -> PyResult<GeoPoint> {
    GeoPoint::new(p.0, p.1, p.2).map_err(value_err)
}

/// Simple polygon in a planar metric frame.
#[pyclass(name = "Polygon", frozen, from_py_object)]
#[derive(Clone)]
struct PyPolygon(Polygon2D);

#[pymethods]
impl PyPolygon {
    #[new]
    fn new(coords: Vec<(f64, f64)>) -> PyResult<Self> {
        let pts = coords.into_iter().map(|(x, y)| Point2::new(x, y)).collect();
        Polygon2D::new(pts).map(PyPolygon).map_err(value_err)
    }

    fn vertices(&self) -> Vec<(f64, f64)> {
        self.0.vertices().iter().map(|p| (p.x, p.y)).collect()
    }

    #[getter]
    fn area(&self) -> f64 {
        self.0.area()
    }

    fn is_simple(&self) -> bool {
        self.0.is_simple()
    }

    /// `(area, aspect_ratio)` of the minimum-area bounding rectangle.
    fn min_area_rect(&self) -> PyResult<(f64, f64)> {
        let r = min_area_rect(&self.0).map_err(value_err)?;
        Ok((r.area(), r.aspect_ratio()))
    }

    fn intersection(&self, other: &PyPolygon) -> Vec<PyPolygon> {
        intersect_polygons(&self.0, &other.0)
            .into_iter()
            .map(PyPolygon)
            .collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Polygon(vertices={}, area={})", self.0.len(), self.0.area())
    }
}

/// Projective map from image pixels to ground meters.
#[pyclass(name = "Homography", frozen, from_py_object)]
#[derive(Clone)]
struct PyHomography(hg::Homography);

#[pymethods]
impl PyHomography {
    #[new]
    fn new(rows: [[f64; 3]; 3]) -> PyResult<Self> {
        let m = Matrix3::from_fn(|i, j| rows[i][j]);
        hg::Homography::from_matrix(m).map(PyHomography).map_err(value_err)
    }

    fn matrix(&self) -> [[f64; 3]; 3] {
        let m = self.0.matrix();
        std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
    }

    fn project(&self, u: f64, v: f64) -> PyResult<(f64, f64)> {
        let p = hg::project_point(&self.0, Point2::new(u, v)).map_err(value_err)?;
        Ok((p.x, p.y))
    }

    fn project_polygon(&self, poly: &PyPolygon) -> PyResult<PyPolygon> {
        hg::project_polygon(&self.0, &poly.0).map(PyPolygon).map_err(value_err)
    }

    fn inverse(&self) -> PyResult<PyHomography> {
        self.0.inverse().map(PyHomography).map_err(value_err)
    }
}

#[pyclass(name = "GeorefResult", frozen, get_all)]
struct PyGeorefResult {
    image_id: String,
    homography: PyHomography,
    inlier_ratio: f64,
    inlier_count: usize,
    correspondence_count: usize,
    rms_error: f64,
    /// Whether the image passes the inlier-ratio gate.
    retained: bool,
}

fn correspondences(rows: Vec<(f64, f64, f64, f64)>) -> Vec<Correspondence> {
    rows.into_iter()
        .map(|(u, v, x, y)| Correspondence::new(u, v, x, y))
        .collect()
}

#[pyfunction]
fn geodetic_to_enu(point: (f64, f64, f64), origin: (f64, f64, f64)) -> PyResult<(f64, f64, f64)> {
    let e = geo::geodetic_to_enu(&geo_point(point)?, &geo_point(origin)?).map_err(value_err)?;
    Ok((e.e, e.n, e.u))
}

#[pyfunction]
fn enu_to_geodetic(point: (f64, f64, f64), origin: (f64, f64, f64)) -> PyResult<(f64, f64, f64)> {
    let g = geo::enu_to_geodetic(&EnuPoint::new(point.0, point.1, point.2), &geo_point(origin)?).map_err(value_err)?;
    Ok((g.lat, g.lon, g.alt))
}

/// Exact DLT fit through `(u, v, x, y)` rows.
#[pyfunction]
fn estimate_dlt(rows: Vec<(f64, f64, f64, f64)>) -> PyResult<PyHomography> {
    hg::estimate_dlt(&correspondences(rows))
        .map(PyHomography)
        .map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (rows, image_id = "image", inlier_dist = 5.0, max_iters = 2000, confidence = 0.999, seed = 0))]
fn estimate_homography(
    py: Python<'_>,
    rows: Vec<(f64, f64, f64, f64)>,
    image_id: &str,
    inlier_dist: f64,
    max_iters: usize,
    confidence: f64,
    seed: u64,
) -> PyResult<PyGeorefResult> {
    let corrs = correspondences(rows);
    let params = HomographyRansacParams {
        inlier_dist,
        max_iters,
        confidence,
    };
    let r = py
        .detach(|| hg::estimate_ransac(image_id, &corrs, &params, seed))
        .map_err(value_err)?;
    Ok(PyGeorefResult {
        retained: hg::retain_gate(&r),
        image_id: r.image_id,
        homography: PyHomography(r.homography),
        inlier_ratio: r.inlier_ratio,
        inlier_count: r.inlier_count,
        correspondence_count: r.correspondence_count,
        rms_error: r.rms_error,
    })
}

type PlaneFitTuple = ((f64, f64, f64), f64, Vec<usize>);

/// Returns `(normal, offset, inlier_indices)` with `normal . x = offset` on the plane.
#[pyfunction]
#[pyo3(signature = (points, inlier_dist = 2.0, max_iters = 1000, seed = 0))]
fn fit_plane(points: Vec<(f64, f64, f64)>, inlier_dist: f64, max_iters: usize, seed: u64) -> PyResult<PlaneFitTuple> {
    let pts: Vec<Point3<f64>> = points.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect();
    let fit = fit_plane_ransac(&pts, &PlaneRansacParams { inlier_dist, max_iters }, seed).map_err(value_err)?;
    let n = fit.plane.normal;
    Ok(((n.x, n.y, n.z), fit.plane.offset, fit.inliers))
}

/// CAM polygons in pixel coordinates from a channel-major feature tensor.
///
/// Returns `(polygon, pixel_area)` pairs.
#[pyfunction]
#[pyo3(signature = (features, shape, weights, image_size, tau = 0.0, min_region_px = 25))]
fn cam_polygons(
    features: Vec<f32>,
    shape: (usize, usize, usize),
    weights: Vec<f32>,
    image_size: (usize, usize),
    tau: f64,
    min_region_px: usize,
) -> PyResult<Vec<(PyPolygon, usize)>> {
    let f = FeatureMap::new(shape.0, shape.1, shape.2, features).map_err(value_err)?;
    let w = ClassWeights::new(weights).map_err(value_err)?;
    let polys = extract_polygons(&f, &w, image_size.0, image_size.1, tau, min_region_px).map_err(value_err)?;
    Ok(polys
        .into_iter()
        .map(|p| (PyPolygon(p.polygon), p.pixel_area))
        .collect())
}

/// Binary labels from `(image_id, votes, workers)` rows under scheme A, B or C.
#[pyfunction]
fn aggregate_labels<'py>(py: Python<'py>, rows: Vec<(String, u32, u32)>, scheme: &str) -> PyResult<Bound<'py, PyDict>> {
    let scheme: Scheme = scheme.parse().map_err(PyValueError::new_err)?;
    let records = rows
        .into_iter()
        .map(|(id, v, w)| VoteRecord::new(id, v, w))
        .collect::<Result<Vec<_>, _>>()
        .map_err(value_err)?;
    let labels = aggregate(&records, scheme).map_err(value_err)?;
    let d = PyDict::new(py);
    for (k, v) in labels {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// Writes a synthetic scene to `out_dir` and returns the path of its config.
#[pyfunction]
#[pyo3(signature = (out_dir, seed = 0, noiseless = false, horizon_camera = false))]
fn generate_scene(out_dir: PathBuf, seed: u64, noiseless: bool, horizon_camera: bool) -> PyResult<PathBuf> {
    let mut params = if noiseless {
        SynthParams::noiseless()
    } else {
        SynthParams::default()
    };
    params.horizon_camera = horizon_camera;
    let scene = generate(&params, seed).map_err(value_err)?;
    scene
        .write_to_dir(&out_dir, seed)
        .map_err(|e| PyOSError::new_err(e.to_string()))?;
    Ok(out_dir.join("config.toml"))
}

/// Runs the pipeline from a config file. Returns `(manifest, report)` as
/// parsed JSON; outputs are also written when `out_dir` is given.
#[pyfunction]
#[pyo3(signature = (config, out_dir = None))]
fn run_pipeline<'py>(
    py: Python<'py>,
    config: PathBuf,
    out_dir: Option<PathBuf>,
) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let out = py
        .detach(|| {
            let cfg = PipelineConfig::load(&config)?;
            run(&cfg)
        })
        .map_err(value_err)?;
    if let Some(dir) = out_dir {
        out.write(&dir).map_err(|e| PyOSError::new_err(e.to_string()))?;
    }
    let json = py.import("json")?;
    let manifest = json.call_method1("loads", (out.manifest_json(),))?;
    let report = json.call_method1("loads", (out.report_json(),))?;
    Ok((manifest, report))
}

#[pymodule]
fn delmap_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPolygon>()?;
    m.add_class::<PyHomography>()?;
    m.add_class::<PyGeorefResult>()?;
    m.add_function(wrap_pyfunction!(geodetic_to_enu, m)?)?;
    m.add_function(wrap_pyfunction!(enu_to_geodetic, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_dlt, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_homography, m)?)?;
    m.add_function(wrap_pyfunction!(fit_plane, m)?)?;
    m.add_function(wrap_pyfunction!(cam_polygons, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_labels, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scene, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
