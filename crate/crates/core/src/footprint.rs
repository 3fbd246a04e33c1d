//! Ground footprints of georeferenced images and the two retention heuristics
//! (total footprint area and aspect ratio of its minimum-area rectangle) used
//! to drop images that are too oblique for a plane-to-plane map.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{min_area_rect, polygon_area, GeoError, Polygon2D};
use crate::homography::{project_polygon, Homography, HomographyError};
use crate::recon::CameraModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FootprintError {
    #[error(transparent)]
    Projection(#[from] HomographyError),
    #[error("degenerate footprint: {0}")]
    Geometry(#[from] GeoError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub image_id: String,
    pub polygon: Polygon2D,
    pub area_km2: f64,
    pub aspect_ratio: f64,
}

/// Retention thresholds. An image is rejected only when a value strictly exceeds its limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub max_area_km2: f64,
    pub max_aspect_ratio: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            max_area_km2: 5.0,
            max_aspect_ratio: 4.0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.max_area_km2 > 0.0) || !(self.max_aspect_ratio > 0.0) {
            return Err("filter thresholds must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterVerdict {
    Retained,
    AreaExceeded,
    AspectExceeded,
}

pub fn image_footprint(image_id: &str, h: &Homography, cam: &CameraModel) -> Result<Footprint, FootprintError> {
    let corners = Polygon2D::new(cam.corners().to_vec())?;
    let polygon = project_polygon(h, &corners)?;
    let area_km2 = polygon_area(&polygon) / 1e6;
    let aspect_ratio = min_area_rect(&polygon)?.aspect_ratio();
    Ok(Footprint {
        image_id: image_id.to_string(),
        polygon,
        area_km2,
        aspect_ratio,
    })
}

pub fn verdict(fp: &Footprint, cfg: &FilterConfig) -> FilterVerdict {
    if fp.area_km2 > cfg.max_area_km2 {
        FilterVerdict::AreaExceeded
    } else if fp.aspect_ratio > cfg.max_aspect_ratio {
        FilterVerdict::AspectExceeded
    } else {
        FilterVerdict::Retained
    }
}

pub fn apply_filters(footprints: &[Footprint], cfg: &FilterConfig) -> Vec<Footprint> {
    footprints
        .iter()
        .filter(|f| verdict(f, cfg) == FilterVerdict::Retained)
        .cloned()
        .collect()
}
