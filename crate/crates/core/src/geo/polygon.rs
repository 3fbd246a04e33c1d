use serde::{Deserialize, Serialize};

use super::GeoError;

pub type Point2 = nalgebra::Point2<f64>;

/// Simple polygon stored as an open ring (the closing vertex is implicit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Polygon2D {
    vertices: Vec<Point2>,
}

impl Polygon2D {
    /// Validates the ring. A trailing vertex equal to the first one is dropped so
    /// closed GeoJSON-style rings are accepted as-is.
    pub fn new(mut vertices: Vec<Point2>) -> Result<Self, GeoError> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(GeoError::TooFewVertices(vertices.len()));
        }
        if vertices.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(GeoError::NonFinite);
        }
        for i in 0..vertices.len() {
            if vertices[i] == vertices[(i + 1) % vertices.len()] {
                return Err(GeoError::DuplicateVertex(i));
            }
        }
        Ok(Polygon2D { vertices })
    }

    /// Like [`Polygon2D::new`] but drops consecutive duplicates instead of failing.
    pub fn from_vertices_dedup(vertices: Vec<Point2>) -> Result<Self, GeoError> {
        let mut out: Vec<Point2> = Vec::with_capacity(vertices.len());
        for p in vertices {
            if out.last() != Some(&p) {
                out.push(p);
            }
        }
        while out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
        Polygon2D::new(out)
    }

    pub fn from_coords(coords: &[[f64; 2]]) -> Result<Self, GeoError> {
        Polygon2D::new(coords.iter().map(|c| Point2::new(c[0], c[1])).collect())
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Directed edges `(v[i], v[i+1])`, wrapping around.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        polygon_area(self)
    }

    pub fn map<F: Fn(&Point2) -> Point2>(&self, f: F) -> Result<Self, GeoError> {
        Polygon2D::new(self.vertices.iter().map(f).collect())
    }

    pub fn bbox(&self) -> (Point2, Point2) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for p in &self.vertices[1..] {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    pub fn centroid(&self) -> Point2 {
        let a = signed_area(self);
        let n = self.vertices.len();
        if a.abs() < f64::MIN_POSITIVE {
            let s = self
                .vertices
                .iter()
                .fold(nalgebra::Vector2::zeros(), |acc, p| acc + p.coords);
            return Point2::from(s / n as f64);
        }
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in self.edges() {
            let c = p.x * q.y - q.x * p.y;
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
        }
        Point2::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    /// O(n²) check that no two non-adjacent edges touch.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        let e: Vec<_> = self.edges().collect();
        for i in 0..n {
            for j in (i + 1)..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                if segments_touch(e[i].0, e[i].1, e[j].0, e[j].1) {
                    return false;
                }
            }
        }
        true
    }

    pub fn reversed(&self) -> Self {
        let mut v = self.vertices.clone();
        v.reverse();
        Polygon2D { vertices: v }
    }
}

impl TryFrom<Vec<[f64; 2]>> for Polygon2D {
    type Error = GeoError;
    fn try_from(v: Vec<[f64; 2]>) -> Result<Self, Self::Error> {
        Polygon2D::from_coords(&v)
    }
}

impl From<Polygon2D> for Vec<[f64; 2]> {
    fn from(p: Polygon2D) -> Self {
        p.vertices.iter().map(|v| [v.x, v.y]).collect()
    }
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_touch(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Shoelace sum; positive for counter-clockwise rings in a y-up frame.
pub fn signed_area(poly: &Polygon2D) -> f64 {
    let v = &poly.vertices;
    let o = v[0];
    // Relative to the first vertex to keep cancellation down for far-from-origin rings.
    let mut s = 0.0;
    for i in 1..v.len() - 1 {
        let a = v[i] - o;
        let b = v[i + 1] - o;
        s += a.x * b.y - b.x * a.y;
    }
    0.5 * s
}

pub fn polygon_area(poly: &Polygon2D) -> f64 {
    signed_area(poly).abs()
}

/// Exterior ring plus holes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonWithHoles {
    pub exterior: Polygon2D,
    #[serde(default)]
    pub holes: Vec<Polygon2D>,
}

impl PolygonWithHoles {
    pub fn new(exterior: Polygon2D, holes: Vec<Polygon2D>) -> Self {
        PolygonWithHoles { exterior, holes }
    }

    pub fn area(&self) -> f64 {
        self.exterior.area() - self.holes.iter().map(Polygon2D::area).sum::<f64>()
    }

    pub fn rings(&self) -> impl Iterator<Item = &Polygon2D> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }
}

impl From<Polygon2D> for PolygonWithHoles {
    fn from(p: Polygon2D) -> Self {
        PolygonWithHoles::new(p, Vec::new())
    }
}

/// Collection of non-overlapping polygons, each with optional holes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MultiPolygon2D {
    pub polygons: Vec<PolygonWithHoles>,
}

impl MultiPolygon2D {
    pub fn new(polygons: Vec<PolygonWithHoles>) -> Self {
        MultiPolygon2D { polygons }
    }

    pub fn empty() -> Self {
        MultiPolygon2D::default()
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.polygons.iter().map(PolygonWithHoles::area).sum()
    }

    pub fn rings(&self) -> impl Iterator<Item = &Polygon2D> {
        self.polygons.iter().flat_map(PolygonWithHoles::rings)
    }
}

impl From<Polygon2D> for MultiPolygon2D {
    fn from(p: Polygon2D) -> Self {
        MultiPolygon2D::new(vec![p.into()])
    }
}

impl FromIterator<Polygon2D> for MultiPolygon2D {
    fn from_iter<I: IntoIterator<Item = Polygon2D>>(iter: I) -> Self {
        MultiPolygon2D::new(iter.into_iter().map(Into::into).collect())
    }
}

/// Absolute tolerance for the on-boundary test.
const BOUNDARY_EPS: f64 = 1e-9;

fn on_boundary(p: Point2, poly: &Polygon2D) -> bool {
    poly.edges().any(|(a, b)| {
        let ab = b - a;
        let len2 = ab.norm_squared();
        let t = if len2 > 0.0 {
            ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (a + ab * t - p).norm() <= BOUNDARY_EPS
    })
}

/// Even-odd ray casting. Points on the boundary count as inside.
pub fn point_in_polygon(p: Point2, poly: &Polygon2D) -> bool {
    if on_boundary(p, poly) {
        return true;
    }
    crossing_parity(p, poly)
}

fn crossing_parity(p: Point2, poly: &Polygon2D) -> bool {
    let mut inside = false;
    for (a, b) in poly.edges() {
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

pub fn point_in_multipolygon(p: Point2, mp: &MultiPolygon2D) -> bool {
    mp.polygons.iter().any(|part| {
        point_in_polygon(p, &part.exterior) && !part.holes.iter().any(|h| crossing_parity(p, h) && !on_boundary(p, h))
    })
}
