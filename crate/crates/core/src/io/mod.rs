//! File formats: reconstruction JSON, binary feature tensors, GeoJSON, CSV tables and PGM masks.

mod geojson;
mod pgm;
mod recon_json;
mod tables;
mod tensor;

pub use geojson::{
    features_to_geojson, points_to_geojson, read_image_polygons, read_multipolygon, read_points, write_geojson,
    GeoFeature, ImagePolygons,
};
pub use pgm::{read_pgm, write_pgm};
pub use recon_json::{load_reconstruction, reconstruction_from_json, reconstruction_to_json, save_reconstruction};
pub use tables::{
    read_correspondences, read_metadata, read_votes, write_correspondences, write_metadata, write_votes, ImageMeta,
};
pub use tensor::{decode_tensor, encode_tensor, load_tensor, load_weights, save_tensor, save_weights};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::cam::CamError;
use crate::recon::ReconError;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {msg}")]
    Schema { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Recon {
        path: PathBuf,
        #[source]
        source: ReconError,
    },
    #[error("{path}: {source}")]
    Tensor {
        path: PathBuf,
        #[source]
        source: CamError,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn schema(path: &Path, msg: impl Into<String>) -> Self {
        IoError::Schema {
            path: path.to_path_buf(),
            msg: msg.into(),
        }
    }
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|e| IoError::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}
