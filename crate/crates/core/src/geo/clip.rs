//! Greiner–Hormann clipping of simple polygons.
//!
//! Degenerate configurations (a vertex on the other polygon's boundary, or
//! overlapping collinear edges) are removed by translating the clip polygon by
//! a tiny amount in a fixed direction and retrying. The translation starts at
//! 1e-9 m and grows with the coordinate magnitude; it is the only source of
//! inexactness in the clipper.

use super::polygon::{polygon_area, MultiPolygon2D, Point2, Polygon2D};

#[derive(Debug, Clone)]
struct Node {
    p: Point2,
    next: usize,
    prev: usize,
    neighbor: usize,
    intersect: bool,
    entry: bool,
    visited: bool,
}

struct Crossing {
    subject_edge: usize,
    subject_alpha: f64,
    clip_edge: usize,
    clip_alpha: f64,
    p: Point2,
}

fn cross2(a: nalgebra::Vector2<f64>, b: nalgebra::Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// All proper edge crossings, or `None` if any degeneracy is detected.
fn find_crossings(subject: &[Point2], clip: &[Point2], tol: f64) -> Option<Vec<Crossing>> {
    let mut out = Vec::new();
    let ns = subject.len();
    let nc = clip.len();
    for i in 0..ns {
        let p = subject[i];
        let r = subject[(i + 1) % ns] - p;
        let rlen = r.norm();
        let (plo, phi) = (p.x.min(p.x + r.x) - tol, p.x.max(p.x + r.x) + tol);
        let (qlo_y, qhi_y) = (p.y.min(p.y + r.y) - tol, p.y.max(p.y + r.y) + tol);
        for j in 0..nc {
            let q = clip[j];
            let s = clip[(j + 1) % nc] - q;
            if q.x.max(q.x + s.x) < plo
                || q.x.min(q.x + s.x) > phi
                || q.y.max(q.y + s.y) < qlo_y
                || q.y.min(q.y + s.y) > qhi_y
            {
                continue;
            }
            let slen = s.norm();
            let qp = q - p;
            let denom = cross2(r, s);
            if denom.abs() <= 1e-14 * rlen * slen {
                // parallel: only a problem when the edges are collinear and overlap
                if cross2(qp, r).abs() <= tol * rlen {
                    let t0 = qp.dot(&r) / (rlen * rlen);
                    let t1 = (qp + s).dot(&r) / (rlen * rlen);
                    let e = tol / rlen;
                    if t0.max(t1) >= -e && t0.min(t1) <= 1.0 + e {
                        return None;
                    }
                }
                continue;
            }
            let t = cross2(qp, s) / denom;
            let u = cross2(qp, r) / denom;
            let et = tol / rlen;
            let eu = tol / slen;
            if t < -et || t > 1.0 + et || u < -eu || u > 1.0 + eu {
                continue;
            }
            if t <= et || t >= 1.0 - et || u <= eu || u >= 1.0 - eu {
                return None;
            }
            out.push(Crossing {
                subject_edge: i,
                subject_alpha: t,
                clip_edge: j,
                clip_alpha: u,
                p: p + r * t,
            });
        }
    }
    Some(out)
}

fn parity(p: Point2, ring: &[Point2]) -> bool {
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn link_ring(nodes: &mut [Node], seq: &[usize]) {
    let n = seq.len();
    for k in 0..n {
        nodes[seq[k]].next = seq[(k + 1) % n];
        nodes[seq[k]].prev = seq[(k + n - 1) % n];
    }
}

fn vertex_node(p: Point2) -> Node {
    Node {
        p,
        next: 0,
        prev: 0,
        neighbor: usize::MAX,
        intersect: false,
        entry: false,
        visited: false,
    }
}

fn clip_once(subject: &[Point2], clip: &[Point2], crossings: Vec<Crossing>) -> Vec<Polygon2D> {
    if crossings.is_empty() {
        if parity(subject[0], clip) {
            return vec![Polygon2D::new(subject.to_vec()).expect("valid input ring")];
        }
        if parity(clip[0], subject) {
            return vec![Polygon2D::new(clip.to_vec()).expect("valid input ring")];
        }
        return Vec::new();
    }

    let ns = subject.len();
    let nc = clip.len();
    let mut nodes: Vec<Node> = subject.iter().chain(clip.iter()).map(|&p| vertex_node(p)).collect();
    let mut subject_edges: Vec<Vec<(f64, usize)>> = vec![Vec::new(); ns];
    let mut clip_edges: Vec<Vec<(f64, usize)>> = vec![Vec::new(); nc];
    for c in &crossings {
        let si = nodes.len();
        let ci = si + 1;
        let mut a = vertex_node(c.p);
        a.intersect = true;
        a.neighbor = ci;
        let mut b = a.clone();
        b.neighbor = si;
        nodes.push(a);
        nodes.push(b);
        subject_edges[c.subject_edge].push((c.subject_alpha, si));
        clip_edges[c.clip_edge].push((c.clip_alpha, ci));
    }

    let build_seq = |offset: usize, edges: &mut [Vec<(f64, usize)>]| {
        let mut seq = Vec::new();
        for (i, e) in edges.iter_mut().enumerate() {
            seq.push(offset + i);
            e.sort_by(|x, y| x.0.total_cmp(&y.0));
            seq.extend(e.iter().map(|&(_, id)| id));
        }
        seq
    };
    let subject_seq = build_seq(0, &mut subject_edges);
    let clip_seq = build_seq(ns, &mut clip_edges);
    link_ring(&mut nodes, &subject_seq);
    link_ring(&mut nodes, &clip_seq);

    let mut inside = parity(subject[0], clip);
    for &id in &subject_seq {
        if nodes[id].intersect {
            nodes[id].entry = !inside;
            inside = !inside;
        }
    }
    let mut inside = parity(clip[0], subject);
    for &id in &clip_seq {
        if nodes[id].intersect {
            nodes[id].entry = !inside;
            inside = !inside;
        }
    }

    let mut out = Vec::new();
    let budget = 2 * nodes.len() + 8;
    for &start in &subject_seq {
        if !nodes[start].intersect || nodes[start].visited {
            continue;
        }
        let mut ring = Vec::new();
        let mut cur = start;
        let mut steps = 0;
        loop {
            nodes[cur].visited = true;
            let nb = nodes[cur].neighbor;
            nodes[nb].visited = true;
            ring.push(nodes[cur].p);
            let forward = nodes[cur].entry;
            loop {
                cur = if forward { nodes[cur].next } else { nodes[cur].prev };
                steps += 1;
                if nodes[cur].intersect || steps > budget {
                    break;
                }
                ring.push(nodes[cur].p);
            }
            cur = nodes[cur].neighbor;
            if nodes[cur].visited || steps > budget {
                break;
            }
        }
        if let Ok(poly) = Polygon2D::from_vertices_dedup(ring) {
            if polygon_area(&poly) > 0.0 {
                out.push(poly);
            }
        }
    }
    out
}

fn bbox_overlap(a: &Polygon2D, b: &Polygon2D) -> bool {
    let (alo, ahi) = a.bbox();
    let (blo, bhi) = b.bbox();
    alo.x <= bhi.x && blo.x <= ahi.x && alo.y <= bhi.y && blo.y <= ahi.y
}

/// Boolean intersection of two simple polygons. The result is a set of simple
/// polygons (the intersection of two simply connected regions has no holes).
pub fn intersect_polygons(subject: &Polygon2D, clip: &Polygon2D) -> Vec<Polygon2D> {
    if !bbox_overlap(subject, clip) {
        return Vec::new();
    }
    let s = subject.vertices();
    let scale = s
        .iter()
        .chain(clip.vertices())
        .fold(1.0_f64, |m, p| m.max(p.x.abs()).max(p.y.abs()));
    let tol = scale * 1.5e-14;
    let base = 1e-9_f64.max(scale * 1e-12);
    let mut shifted: Vec<Point2> = clip.vertices().to_vec();
    for attempt in 0..12 {
        if let Some(crossings) = find_crossings(s, &shifted, tol) {
            return clip_once(s, &shifted, crossings);
        }
        let angle = 0.618_033_988_75 + 1.324_717_957 * (attempt as f64);
        let delta = base * 8f64.powi(attempt);
        let shift = nalgebra::Vector2::new(angle.cos(), angle.sin()) * delta;
        shifted = clip.vertices().iter().map(|p| p + shift).collect();
    }
    log::warn!("polygon clipping stayed degenerate after perturbation; result dropped");
    Vec::new()
}

fn simple_intersection_area(a: &Polygon2D, b: &Polygon2D) -> f64 {
    intersect_polygons(a, b).iter().map(polygon_area).sum()
}

/// Area of the boolean intersection of two multipolygons.
///
/// Member polygons are assumed pairwise disjoint and holes are assumed to be
/// disjoint and inside their exterior, so holes are handled by
/// inclusion–exclusion over simple-polygon intersections.
pub fn intersection_area(a: &MultiPolygon2D, b: &MultiPolygon2D) -> f64 {
    let mut total = 0.0;
    for pa in &a.polygons {
        for pb in &b.polygons {
            if !bbox_overlap(&pa.exterior, &pb.exterior) {
                continue;
            }
            let mut area = simple_intersection_area(&pa.exterior, &pb.exterior);
            for h in &pa.holes {
                area -= simple_intersection_area(h, &pb.exterior);
            }
            for k in &pb.holes {
                area -= simple_intersection_area(&pa.exterior, k);
            }
            for h in &pa.holes {
                for k in &pb.holes {
                    area += simple_intersection_area(h, k);
                }
            }
            total += area.max(0.0);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::PolygonWithHoles;

    fn sq(x: f64, y: f64, s: f64) -> Polygon2D {
        Polygon2D::from_coords(&[[x, y], [x + s, y], [x + s, y + s], [x, y + s]]).unwrap()
    }

    #[test]
    fn offset_unit_squares() {
        let a: MultiPolygon2D = sq(0.0, 0.0, 1.0).into();
        let b: MultiPolygon2D = sq(0.5, 0.5, 1.0).into();
        assert!((intersection_area(&a, &b) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn disjoint_is_zero() {
        let a: MultiPolygon2D = sq(0.0, 0.0, 1.0).into();
        let b: MultiPolygon2D = sq(5.0, 0.0, 1.0).into();
        assert_eq!(intersection_area(&a, &b), 0.0);
        assert_eq!(intersection_area(&a, &MultiPolygon2D::empty()), 0.0);
    }

    #[test]
    fn containment_without_crossings() {
        let big = sq(0.0, 0.0, 10.0);
        let small = sq(2.0, 3.0, 1.0);
        let r = intersect_polygons(&big, &small);
        assert_eq!(r.len(), 1);
        assert!((r[0].area() - 1.0).abs() < 1e-12);
        let r = intersect_polygons(&small, &big);
        assert!((r[0].area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shared_edges_handled_by_perturbation() {
        // identical squares: every vertex and edge is degenerate
        let a = sq(0.0, 0.0, 1.0);
        let area: f64 = intersect_polygons(&a, &a).iter().map(polygon_area).sum();
        assert!((area - 1.0).abs() < 1e-7, "{area}");
        // half-overlapping, sharing two edge lines
        let b = Polygon2D::from_coords(&[[0.0, 0.0], [0.5, 0.0], [0.5, 1.0], [0.0, 1.0]]).unwrap();
        let area: f64 = intersect_polygons(&a, &b).iter().map(polygon_area).sum();
        assert!((area - 0.5).abs() < 1e-7, "{area}");
    }

    #[test]
    fn concave_pair_gives_multiple_pieces() {
        // U shape against a bar crossing both arms
        let u = Polygon2D::from_coords(&[
            [0.0, 0.0],
            [3.0, 0.0],
            [3.0, 3.0],
            [2.0, 3.0],
            [2.0, 1.0],
            [1.0, 1.0],
            [1.0, 3.0],
            [0.0, 3.0],
        ])
        .unwrap();
        let bar = Polygon2D::from_coords(&[[-1.0, 2.0], [4.0, 2.0], [4.0, 2.5], [-1.0, 2.5]]).unwrap();
        let pieces = intersect_polygons(&u, &bar);
        assert_eq!(pieces.len(), 2);
        let area: f64 = pieces.iter().map(polygon_area).sum();
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn holes_are_subtracted() {
        let annulus = MultiPolygon2D::new(vec![PolygonWithHoles::new(sq(0.0, 0.0, 4.0), vec![sq(1.0, 1.0, 2.0)])]);
        let probe: MultiPolygon2D = sq(0.5, 0.5, 2.0).into();
        // probe covers [0.5,2.5]^2 = 4, hole part [1,2.5]^2 = 2.25
        assert!((intersection_area(&annulus, &probe) - 1.75).abs() < 1e-9);
        assert!((intersection_area(&probe, &annulus) - 1.75).abs() < 1e-9);
        let both_holed = intersection_area(&annulus, &annulus);
        assert!((both_holed - 12.0).abs() < 1e-6);
    }
}
