//! Geodetic conversion and planar polygon geometry.

mod clip;
mod geodetic;
mod hull;
mod overlay;
mod polygon;

pub use clip::{intersect_polygons, intersection_area};
pub use geodetic::{
    ecef_to_geodetic, enu_to_geodetic, geodetic_to_ecef, geodetic_to_enu, EnuPoint, GeoPoint, WGS84_A, WGS84_E2,
    WGS84_F,
};
pub use hull::{convex_hull, min_area_rect, MinAreaRect};
pub use overlay::{union_area, Overlay};
pub use polygon::{
    point_in_multipolygon, point_in_polygon, polygon_area, signed_area, MultiPolygon2D, Point2, Polygon2D,
    PolygonWithHoles,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("consecutive duplicate vertex at index {0}")]
    DuplicateVertex(usize),
    #[error("all points are collinear")]
    Collinear,
    #[error("degenerate polygon with zero area")]
    ZeroArea,
}
