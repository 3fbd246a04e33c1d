//! GeoJSON (RFC 7946) in geographic coordinates; geometry is converted to and
//! from local ENU meters around the reconstruction origin.

use std::path::Path;

use serde_json::{json, Value};

use super::{read_bytes, write_bytes, IoError};
use crate::geo::{
    enu_to_geodetic, geodetic_to_enu, signed_area, EnuPoint, GeoPoint, MultiPolygon2D, Point2, Polygon2D,
    PolygonWithHoles,
};

/// One output polygon with the properties written alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoFeature {
    pub image_id: Option<String>,
    pub method: String,
    pub polygon: Polygon2D,
}

fn to_lonlat(p: &Point2, origin: &GeoPoint) -> Value {
    let g = enu_to_geodetic(&EnuPoint::new(p.x, p.y, 0.0), origin).expect("finite ENU coordinates");
    json!([g.lon, g.lat])
}

/// Closed ring, counterclockwise as RFC 7946 asks for exterior rings.
fn ring_coords(poly: &Polygon2D, origin: &GeoPoint) -> Value {
    let poly = if signed_area(poly) < 0.0 {
        poly.reversed()
    } else {
        poly.clone()
    };
    let mut ring: Vec<Value> = poly.vertices().iter().map(|p| to_lonlat(p, origin)).collect();
    ring.push(ring[0].clone());
    Value::Array(ring)
}

pub fn features_to_geojson(features: &[GeoFeature], origin: &GeoPoint) -> Value {
    let feats: Vec<Value> = features
        .iter()
        .map(|f| {
            json!({
                "type": "Feature",
                "properties": {
                    "image_id": f.image_id,
                    "method": f.method,
                    "area_km2": f.polygon.area() / 1e6,
                },
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [ring_coords(&f.polygon, origin)],
                },
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": feats })
}

/// Point features, e.g. image GPS tags.
pub fn points_to_geojson(points: &[(String, Point2)], method: &str, origin: &GeoPoint) -> Value {
    let feats: Vec<Value> = points
        .iter()
        .map(|(id, p)| {
            json!({
                "type": "Feature",
                "properties": { "image_id": id, "method": method },
                "geometry": { "type": "Point", "coordinates": to_lonlat(p, origin) },
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": feats })
}

pub fn write_geojson(path: &Path, value: &Value) -> Result<(), IoError> {
    let mut s = serde_json::to_string_pretty(value).expect("GeoJSON serializes");
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

fn parse_position(c: &Value, origin: &GeoPoint, path: &Path) -> Result<Point2, IoError> {
    let pair = c
        .as_array()
        .filter(|a| a.len() >= 2)
        .and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?)))
        .ok_or_else(|| IoError::schema(path, "position must be [lon, lat]"))?;
    let g = GeoPoint::new(pair.1, pair.0, origin.alt).map_err(|e| IoError::schema(path, e.to_string()))?;
    let e = geodetic_to_enu(&g, origin).map_err(|e| IoError::schema(path, e.to_string()))?;
    Ok(Point2::new(e.e, e.n))
}

fn parse_ring(v: &Value, origin: &GeoPoint, path: &Path) -> Result<Polygon2D, IoError> {
    let coords = v
        .as_array()
        .ok_or_else(|| IoError::schema(path, "ring is not an array"))?;
    let pts = coords
        .iter()
        .map(|c| parse_position(c, origin, path))
        .collect::<Result<Vec<_>, _>>()?;
    Polygon2D::new(pts).map_err(|e| IoError::schema(path, format!("invalid ring: {e}")))
}

fn parse_polygon(v: &Value, origin: &GeoPoint, path: &Path) -> Result<PolygonWithHoles, IoError> {
    let rings = v
        .as_array()
        .filter(|r| !r.is_empty())
        .ok_or_else(|| IoError::schema(path, "polygon needs at least one ring"))?;
    let exterior = parse_ring(&rings[0], origin, path)?;
    let holes = rings[1..]
        .iter()
        .map(|r| parse_ring(r, origin, path))
        .collect::<Result<_, _>>()?;
    Ok(PolygonWithHoles::new(exterior, holes))
}

fn collect_geometry(v: &Value, origin: &GeoPoint, path: &Path, out: &mut Vec<PolygonWithHoles>) -> Result<(), IoError> {
    let kind = v.get("type").and_then(Value::as_str).unwrap_or_default();
    match kind {
        "FeatureCollection" => {
            let feats = v
                .get("features")
                .and_then(Value::as_array)
                .ok_or_else(|| IoError::schema(path, "FeatureCollection without features"))?;
            for f in feats {
                collect_geometry(f, origin, path, out)?;
            }
        }
        "Feature" => {
            let g = v
                .get("geometry")
                .ok_or_else(|| IoError::schema(path, "Feature without geometry"))?;
            if !g.is_null() {
                collect_geometry(g, origin, path, out)?;
            }
        }
        "Polygon" => out.push(parse_polygon(&v["coordinates"], origin, path)?),
        "MultiPolygon" => {
            let polys = v["coordinates"]
                .as_array()
                .ok_or_else(|| IoError::schema(path, "MultiPolygon coordinates must be an array"))?;
            for p in polys {
                out.push(parse_polygon(p, origin, path)?);
            }
        }
        other => return Err(IoError::schema(path, format!("unsupported GeoJSON type {other:?}"))),
    }
    Ok(())
}

/// All polygonal geometry of a GeoJSON document, in ENU meters around `origin`.
pub fn read_multipolygon(path: &Path, origin: &GeoPoint) -> Result<MultiPolygon2D, IoError> {
    let v = parse_json(path)?;
    let mut polys = Vec::new();
    collect_geometry(&v, origin, path, &mut polys)?;
    Ok(MultiPolygon2D::new(polys))
}

fn parse_json(path: &Path) -> Result<Value, IoError> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn features<'a>(v: &'a Value, path: &Path) -> Result<&'a Vec<Value>, IoError> {
    if v.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(IoError::schema(path, "expected a FeatureCollection"));
    }
    v.get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| IoError::schema(path, "FeatureCollection without features"))
}

fn image_id_of(f: &Value) -> Option<String> {
    f.pointer("/properties/image_id")
        .and_then(Value::as_str)
        .map(str::to_string)
}

/// Point features with their `image_id` property, as written by [`points_to_geojson`].
pub fn read_points(path: &Path, origin: &GeoPoint) -> Result<Vec<(Option<String>, Point2)>, IoError> {
    let v = parse_json(path)?;
    let mut out = Vec::new();
    for f in features(&v, path)? {
        let g = &f["geometry"];
        if g.get("type").and_then(Value::as_str) != Some("Point") {
            return Err(IoError::schema(path, "expected Point geometry"));
        }
        let p = parse_position(&g["coordinates"], origin, path)?;
        out.push((image_id_of(f), p));
    }
    Ok(out)
}

/// Polygons of one image, keyed by its id when the features carry one.
pub type ImagePolygons = (Option<String>, Vec<Polygon2D>);

/// Hole-free polygon features grouped by their `image_id` property (features
/// without one form their own group each), as written by [`features_to_geojson`].
pub fn read_image_polygons(path: &Path, origin: &GeoPoint) -> Result<Vec<ImagePolygons>, IoError> {
    let v = parse_json(path)?;
    let mut out: Vec<(Option<String>, Vec<Polygon2D>)> = Vec::new();
    for f in features(&v, path)? {
        let mut polys = Vec::new();
        collect_geometry(f, origin, path, &mut polys)?;
        let mut rings = Vec::with_capacity(polys.len());
        for p in polys {
            if !p.holes.is_empty() {
                return Err(IoError::schema(path, "estimate polygons must not have holes"));
            }
            rings.push(p.exterior);
        }
        let id = image_id_of(f);
        match out.iter_mut().find(|(k, _)| id.is_some() && *k == id) {
            Some((_, v)) => v.extend(rings),
            None => out.push((id, rings)),
        }
    }
    Ok(out)
}
