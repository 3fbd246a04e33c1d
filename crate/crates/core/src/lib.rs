//! Damage estimation and localization (DEL) from sparse, oblique aerial imagery.
//!
//! The crate is organized along the two pipelines that meet at projection time:
//!
//! ```text
//! reconstruction ─→ align ─→ per-image homography ─→ 20% gate ─┐
//!                                                               ├─→ project ─→ footprint filters ─→ dissolve ─→ evaluate
//! feature maps ──→ CAM ─→ upsample ─→ threshold ─→ trace ───────┘
//! ```
//!
//! * [`geo`] holds geodetic conversion and the planar polygon kernel.
//! * [`align`] fits the ground plane and rotates the reconstruction upright.
//! * [`homography`] estimates image-to-ground projective maps.
//! * [`cam`] turns class activation maps into image-space polygons.
//! * [`footprint`] projects image borders and applies the retention heuristics.
//! * [`eval`] scores estimates against a truth region.
//! * [`labels`] aggregates crowdsourced votes.
//! * [`io`], [`synth`] and [`pipeline`] cover file formats, synthetic scenes and orchestration.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod cam;
pub mod eval;
pub mod footprint;
pub mod geo;
pub mod homography;
pub mod io;
pub mod labels;
pub mod pipeline;
pub mod recon;
pub mod seed;
pub mod synth;

pub use geo::{EnuPoint, GeoPoint, MultiPolygon2D, Point2, Polygon2D, PolygonWithHoles};
