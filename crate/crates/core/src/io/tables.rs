//! CSV tables: image metadata (`image_id,flood[,lat,lon]`), worker votes
//! (`image_id,votes,workers`) and correspondences (`u,v,x,y`).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{write_bytes, IoError};
use crate::geo::GeoPoint;
use crate::homography::Correspondence;
use crate::labels::VoteRecord;

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    rdr.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    }
    let bytes = w.into_inner().map_err(|e| IoError::io(path, e.into_error()))?;
    write_bytes(path, &bytes)
}

#[derive(Serialize, Deserialize)]
struct MetaRow {
    image_id: String,
    flood: bool,
    #[serde(default)]
    lat: Option<f64>,
    #[serde(default)]
    lon: Option<f64>,
}

/// Classifier output for one image, with its GPS tag when known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageMeta {
    pub flood: bool,
    pub gps: Option<GeoPoint>,
}

pub fn read_metadata(path: &Path) -> Result<BTreeMap<String, ImageMeta>, IoError> {
    let rows: Vec<MetaRow> = read_rows(path)?;
    let mut out = BTreeMap::new();
    for r in rows {
        let gps = match (r.lat, r.lon) {
            (Some(lat), Some(lon)) => {
                Some(GeoPoint::new(lat, lon, 0.0).map_err(|e| IoError::schema(path, format!("{}: {e}", r.image_id)))?)
            }
            (None, None) => None,
            _ => {
                return Err(IoError::schema(
                    path,
                    format!("{}: lat and lon must be given together", r.image_id),
                ))
            }
        };
        let meta = ImageMeta { flood: r.flood, gps };
        if out.insert(r.image_id.clone(), meta).is_some() {
            return Err(IoError::schema(path, format!("duplicate image id {:?}", r.image_id)));
        }
    }
    Ok(out)
}

pub fn write_metadata(path: &Path, meta: &BTreeMap<String, ImageMeta>) -> Result<(), IoError> {
    write_rows(
        path,
        meta.iter().map(|(id, m)| MetaRow {
            image_id: id.clone(),
            flood: m.flood,
            lat: m.gps.map(|g| g.lat),
            lon: m.gps.map(|g| g.lon),
        }),
    )
}

pub fn read_votes(path: &Path) -> Result<Vec<VoteRecord>, IoError> {
    let rows: Vec<VoteRecord> = read_rows(path)?;
    for r in &rows {
        r.validate().map_err(|e| IoError::schema(path, e.to_string()))?;
    }
    Ok(rows)
}

pub fn write_votes(path: &Path, votes: &[VoteRecord]) -> Result<(), IoError> {
    write_rows(path, votes)
}

#[derive(Serialize, Deserialize)]
struct CorrRow {
    u: f64,
    v: f64,
    x: f64,
    y: f64,
}

pub fn read_correspondences(path: &Path) -> Result<Vec<Correspondence>, IoError> {
    let rows: Vec<CorrRow> = read_rows(path)?;
    if rows.iter().any(|r| ![r.u, r.v, r.x, r.y].iter().all(|v| v.is_finite())) {
        return Err(IoError::schema(path, "non-finite correspondence"));
    }
    Ok(rows
        .into_iter()
        .map(|r| Correspondence::new(r.u, r.v, r.x, r.y))
        .collect())
}

pub fn write_correspondences(path: &Path, corrs: &[Correspondence]) -> Result<(), IoError> {
    write_rows(
        path,
        corrs.iter().map(|c| CorrRow {
            u: c.image.x,
            v: c.image.y,
            x: c.ground.x,
            y: c.ground.y,
        }),
    )
}
