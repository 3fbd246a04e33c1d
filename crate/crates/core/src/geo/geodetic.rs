use serde::{Deserialize, Serialize};

use super::GeoError;

/// WGS84 semi-major axis in meters.
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
/// First eccentricity squared.
pub const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);

/// A WGS84 geodetic position. Angles in degrees, altitude in meters above the ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
    pub alt: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64, alt: f64) -> Result<Self, GeoError> {
        let p = GeoPoint { lat, lon, alt };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if !(self.lat.is_finite() && self.lon.is_finite() && self.alt.is_finite()) {
            return Err(GeoError::NonFinite);
        }
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(GeoError::Latitude(self.lat));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(GeoError::Longitude(self.lon));
        }
        Ok(())
    }
}

/// East-North-Up offset in meters from some origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnuPoint {
    pub e: f64,
    pub n: f64,
    pub u: f64,
}

impl EnuPoint {
    pub fn new(e: f64, n: f64, u: f64) -> Self {
        EnuPoint { e, n, u }
    }

    fn is_finite(&self) -> bool {
        self.e.is_finite() && self.n.is_finite() && self.u.is_finite()
    }
}

pub fn geodetic_to_ecef(p: &GeoPoint) -> [f64; 3] {
    let (sin_lat, cos_lat) = p.lat.to_radians().sin_cos();
    let (sin_lon, cos_lon) = p.lon.to_radians().sin_cos();
    let n = WGS84_A / (1.0 - WGS84_E2 * sin_lat * sin_lat).sqrt();
    [
        (n + p.alt) * cos_lat * cos_lon,
        (n + p.alt) * cos_lat * sin_lon,
        (n * (1.0 - WGS84_E2) + p.alt) * sin_lat,
    ]
}

/// Iterative inversion; converges to machine precision in a handful of steps
/// for any point outside the ellipsoid's core.
pub fn ecef_to_geodetic(xyz: [f64; 3]) -> GeoPoint {
    let [x, y, z] = xyz;
    let p = x.hypot(y);
    let lon = y.atan2(x);
    let height = |lat: f64| {
        let sin_lat = lat.sin();
        let n = WGS84_A / (1.0 - WGS84_E2 * sin_lat * sin_lat).sqrt();
        // The cosine form loses precision near the poles, the sine form near the equator.
        let h = if lat.abs() < std::f64::consts::FRAC_PI_4 {
            p / lat.cos() - n
        } else {
            z / sin_lat - n * (1.0 - WGS84_E2)
        };
        (n, h)
    };
    let mut lat = z.atan2(p * (1.0 - WGS84_E2));
    for _ in 0..32 {
        let (n, h) = height(lat);
        let next = z.atan2(p * (1.0 - WGS84_E2 * n / (n + h)));
        let done = (next - lat).abs() < 1e-15;
        lat = next;
        if done {
            break;
        }
    }
    GeoPoint {
        lat: lat.to_degrees(),
        lon: lon.to_degrees(),
        alt: height(lat).1,
    }
}

/// Rows are the east, north and up unit vectors at `origin`, expressed in ECEF.
fn enu_basis(origin: &GeoPoint) -> [[f64; 3]; 3] {
    let (sin_lat, cos_lat) = origin.lat.to_radians().sin_cos();
    let (sin_lon, cos_lon) = origin.lon.to_radians().sin_cos();
    [
        [-sin_lon, cos_lon, 0.0],
        [-sin_lat * cos_lon, -sin_lat * sin_lon, cos_lat],
        [cos_lat * cos_lon, cos_lat * sin_lon, sin_lat],
    ]
}

pub fn geodetic_to_enu(p: &GeoPoint, origin: &GeoPoint) -> Result<EnuPoint, GeoError> {
    p.validate()?;
    origin.validate()?;
    let a = geodetic_to_ecef(p);
    let o = geodetic_to_ecef(origin);
    let d = [a[0] - o[0], a[1] - o[1], a[2] - o[2]];
    let b = enu_basis(origin);
    let dot = |r: [f64; 3]| r[0] * d[0] + r[1] * d[1] + r[2] * d[2];
    Ok(EnuPoint {
        e: dot(b[0]),
        n: dot(b[1]),
        u: dot(b[2]),
    })
}

pub fn enu_to_geodetic(p: &EnuPoint, origin: &GeoPoint) -> Result<GeoPoint, GeoError> {
    if !p.is_finite() {
        return Err(GeoError::NonFinite);
    }
    origin.validate()?;
    let o = geodetic_to_ecef(origin);
    let b = enu_basis(origin);
    let mut xyz = o;
    for (i, v) in xyz.iter_mut().enumerate() {
        *v += b[0][i] * p.e + b[1][i] * p.n + b[2][i] * p.u;
    }
    let g = ecef_to_geodetic(xyz);
    if !(g.lat.is_finite() && g.lon.is_finite() && g.alt.is_finite()) {
        return Err(GeoError::NonFinite);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baton_rouge() -> GeoPoint {
        GeoPoint::new(30.45, -91.15, 0.0).unwrap()
    }

    #[test]
    fn origin_maps_to_zero() {
        let o = baton_rouge();
        let e = geodetic_to_enu(&o, &o).unwrap();
        assert_eq!((e.e, e.n, e.u), (0.0, 0.0, 0.0));
        let back = enu_to_geodetic(&EnuPoint::new(0.0, 0.0, 0.0), &o).unwrap();
        assert!((back.lat - o.lat).abs() < 1e-12);
        assert!((back.lon - o.lon).abs() < 1e-12);
        assert!(back.alt.abs() < 1e-6);
    }

    /// Meridional radius of curvature gives the north offset of a tiny latitude step
    /// without going through ECEF at all.
    #[test]
    fn small_latitude_step_matches_meridional_arc() {
        let o = baton_rouge();
        let p = GeoPoint::new(o.lat + 1e-5, o.lon, 0.0).unwrap();
        let enu = geodetic_to_enu(&p, &o).unwrap();
        let s = o.lat.to_radians().sin();
        let m = WGS84_A * (1.0 - WGS84_E2) / (1.0 - WGS84_E2 * s * s).powf(1.5);
        let expected_n = m * 1e-5_f64.to_radians();
        assert!((enu.n - expected_n).abs() < 1e-6, "{} vs {}", enu.n, expected_n);
        assert!((enu.n - 1.105).abs() < 5e-3);
        assert!(enu.e.abs() < 1e-9);
        assert!(enu.u.abs() < 1e-4);

        let back = enu_to_geodetic(&enu, &o).unwrap();
        assert!((back.lat - p.lat).abs() < 1e-9);
        assert!((back.lon - p.lon).abs() < 1e-9);
    }

    #[test]
    fn far_east_offset_stays_finite() {
        let o = baton_rouge();
        let p = EnuPoint::new(1e7, 0.0, 0.0);
        let g = enu_to_geodetic(&p, &o).unwrap();
        let again = geodetic_to_enu(&g, &o).unwrap();
        assert!((again.e - p.e).abs() < 1e-3);
        assert!(again.n.abs() < 1e-3);
        assert!(again.u.abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(GeoPoint::new(91.0, 0.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, 181.0, 0.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0, 0.0).is_err());
        let o = baton_rouge();
        assert_eq!(
            enu_to_geodetic(&EnuPoint::new(f64::INFINITY, 0.0, 0.0), &o),
            Err(GeoError::NonFinite)
        );
    }

    #[test]
    fn polar_round_trip() {
        let o = GeoPoint::new(89.9, 10.0, 50.0).unwrap();
        let p = GeoPoint::new(89.95, -170.0, 120.0).unwrap();
        let e = geodetic_to_enu(&p, &o).unwrap();
        let back = enu_to_geodetic(&e, &o).unwrap();
        assert!((back.lat - p.lat).abs() < 1e-9);
        assert!((back.alt - p.alt).abs() < 1e-6);
    }
}
