use serde::{Deserialize, Serialize};

use super::polygon::{polygon_area, Point2, Polygon2D};
use super::GeoError;

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Andrew's monotone chain. Returns a counter-clockwise hull without collinear
/// vertices; fails when fewer than three points are in general position.
pub fn convex_hull(points: &[Point2]) -> Result<Polygon2D, GeoError> {
    if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(GeoError::NonFinite);
    }
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Err(GeoError::Collinear);
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() < 3 {
        return Err(GeoError::Collinear);
    }
    Polygon2D::new(hull)
}

/// Oriented bounding rectangle of minimum area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinAreaRect {
    pub rect: Polygon2D,
    pub long_side: f64,
    pub short_side: f64,
}

impl MinAreaRect {
    pub fn area(&self) -> f64 {
        self.long_side * self.short_side
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.long_side / self.short_side
    }
}

/// Minimum-area enclosing rectangle of a polygon's vertices.
///
/// The optimal rectangle has a side collinear with some hull edge, so it is
/// enough to evaluate the extent of the hull in each hull-edge frame.
pub fn min_area_rect(poly: &Polygon2D) -> Result<MinAreaRect, GeoError> {
    let hull = convex_hull(poly.vertices())?;
    if polygon_area(&hull) <= 0.0 {
        return Err(GeoError::ZeroArea);
    }
    let v = hull.vertices();
    let origin = v[0];
    let mut best: Option<(f64, [f64; 4], nalgebra::Vector2<f64>)> = None;
    for (a, b) in hull.edges() {
        let d = b - a;
        let len = d.norm();
        if len == 0.0 {
            continue;
        }
        let u = d / len;
        let w = nalgebra::Vector2::new(-u.y, u.x);
        let (mut u0, mut u1, mut w0, mut w1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in v {
            let r = p - origin;
            let pu = r.dot(&u);
            let pw = r.dot(&w);
            u0 = u0.min(pu);
            u1 = u1.max(pu);
            w0 = w0.min(pw);
            w1 = w1.max(pw);
        }
        let area = (u1 - u0) * (w1 - w0);
        if best.as_ref().is_none_or(|(a, _, _)| area < *a) {
            best = Some((area, [u0, u1, w0, w1], u));
        }
    }
    let (_, [u0, u1, w0, w1], u) = best.ok_or(GeoError::ZeroArea)?;
    let w = nalgebra::Vector2::new(-u.y, u.x);
    let corner = |s: f64, t: f64| origin + u * s + w * t;
    let rect = Polygon2D::new(vec![corner(u0, w0), corner(u1, w0), corner(u1, w1), corner(u0, w1)])?;
    let (s1, s2) = (u1 - u0, w1 - w0);
    if s1.min(s2) <= 0.0 {
        return Err(GeoError::ZeroArea);
    }
    Ok(MinAreaRect {
        rect,
        long_side: s1.max(s2),
        short_side: s1.min(s2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(w: f64, h: f64, theta_deg: f64) -> Polygon2D {
        let (s, c) = theta_deg.to_radians().sin_cos();
        Polygon2D::new(
            [[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]]
                .iter()
                .map(|p| Point2::new(c * p[0] - s * p[1] + 3.0, s * p[0] + c * p[1] - 1.0))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn hull_of_square_corners() {
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.5, 0.5),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.5, 0.0),
        ];
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.len(), 4);
        assert_eq!(polygon_area(&h), 1.0);
    }

    #[test]
    fn hull_rejects_collinear() {
        let pts: Vec<_> = (0..5).map(|i| Point2::new(i as f64, 2.0 * i as f64)).collect();
        assert_eq!(convex_hull(&pts), Err(GeoError::Collinear));
    }

    #[test]
    fn axis_aligned_rectangle_is_its_own_mar() {
        let r = min_area_rect(&rect(2.0, 1.0, 0.0)).unwrap();
        assert!((r.area() - 2.0).abs() < 1e-12);
        assert!((r.aspect_ratio() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rotated_rectangle_area_recovered() {
        let r = min_area_rect(&rect(2.0, 1.0, 37.0)).unwrap();
        assert!((r.area() - 2.0).abs() < 2.0 * 0.005);
        assert!((r.aspect_ratio() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn unit_square_ratio_one() {
        let r = min_area_rect(&rect(1.0, 1.0, 12.0)).unwrap();
        assert!((r.aspect_ratio() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rect_contains_all_vertices() {
        let p = Polygon2D::from_coords(&[[0.0, 0.0], [4.0, 1.0], [5.0, 3.0], [2.0, 2.0], [1.0, 4.0]]).unwrap();
        let r = min_area_rect(&p).unwrap();
        let rv = r.rect.vertices();
        for v in p.vertices() {
            for i in 0..4 {
                assert!(cross(rv[i], rv[(i + 1) % 4], *v) >= -1e-9);
            }
        }
        assert!(r.area() >= polygon_area(&convex_hull(p.vertices()).unwrap()) - 1e-12);
    }
}
