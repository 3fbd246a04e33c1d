//! Exact-area evaluation of boolean combinations of many polygon sets.
//!
//! The plane is cut into vertical slabs at every vertex and every edge
//! crossing. Inside a slab no two edges cross, so the covered length along a
//! vertical line is linear in x and the slab area is its midline length times
//! the slab width. This handles overlapping, touching and coincident inputs
//! without special cases, which is what dissolving many per-image polygons
//! needs.

use super::polygon::{MultiPolygon2D, Point2, Polygon2D};

#[derive(Debug, Clone, Copy)]
struct Edge {
    a: Point2,
    b: Point2,
    operand: usize,
}

impl Edge {
    fn y_at(&self, x: f64) -> f64 {
        let t = (x - self.a.x) / (self.b.x - self.a.x);
        self.a.y + t * (self.b.y - self.a.y)
    }
}

/// Test on the per-operand inside flags of a point.
pub type Predicate<'a> = &'a dyn Fn(&[bool]) -> bool;

/// A set of operands; each operand is a region defined by even-odd parity over its rings.
#[derive(Debug, Clone, Default)]
pub struct Overlay {
    edges: Vec<Edge>,
    operands: usize,
}

impl Overlay {
    pub fn new() -> Self {
        Overlay::default()
    }

    pub fn operand_count(&self) -> usize {
        self.operands
    }

    fn push_ring(&mut self, ring: &Polygon2D, operand: usize) {
        for (p, q) in ring.edges() {
            if p.x == q.x {
                continue;
            }
            let (a, b) = if p.x < q.x { (p, q) } else { (q, p) };
            self.edges.push(Edge { a, b, operand });
        }
    }

    /// Adds a region bounded by the even-odd parity of `rings`; returns its operand index.
    pub fn add_rings<'a, I: IntoIterator<Item = &'a Polygon2D>>(&mut self, rings: I) -> usize {
        let id = self.operands;
        self.operands += 1;
        for r in rings {
            self.push_ring(r, id);
        }
        id
    }

    pub fn add_polygon(&mut self, poly: &Polygon2D) -> usize {
        self.add_rings(std::iter::once(poly))
    }

    pub fn add_multipolygon(&mut self, mp: &MultiPolygon2D) -> usize {
        self.add_rings(mp.rings())
    }

    fn slab_xs(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = Vec::with_capacity(self.edges.len() * 2);
        for e in &self.edges {
            xs.push(e.a.x);
            xs.push(e.b.x);
        }
        // pairwise crossings by a sweep over x-extents
        let mut order: Vec<usize> = (0..self.edges.len()).collect();
        order.sort_by(|&i, &j| self.edges[i].a.x.total_cmp(&self.edges[j].a.x));
        let mut active: Vec<usize> = Vec::new();
        for &i in &order {
            let e = self.edges[i];
            active.retain(|&j| self.edges[j].b.x >= e.a.x);
            let (elo, ehi) = (e.a.y.min(e.b.y), e.a.y.max(e.b.y));
            for &j in &active {
                let f = self.edges[j];
                if f.a.y.min(f.b.y) > ehi || f.a.y.max(f.b.y) < elo {
                    continue;
                }
                if let Some(x) = crossing_x(&e, &f) {
                    xs.push(x);
                }
            }
            active.push(i);
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }

    /// Measures the area of each predicate region. Each predicate receives the
    /// per-operand inside flags for a point.
    pub fn measure(&self, predicates: &[Predicate<'_>]) -> Vec<f64> {
        let mut totals = vec![0.0; predicates.len()];
        if self.edges.is_empty() {
            return totals;
        }
        let xs = self.slab_xs();
        let mut order: Vec<usize> = (0..self.edges.len()).collect();
        order.sort_by(|&i, &j| self.edges[i].a.x.total_cmp(&self.edges[j].a.x));
        let mut next = 0;
        let mut active: Vec<usize> = Vec::new();
        let mut hits: Vec<(f64, usize)> = Vec::new();
        let mut inside = vec![false; self.operands];
        for w in xs.windows(2) {
            let (x0, x1) = (w[0], w[1]);
            if x1 <= x0 {
                continue;
            }
            while next < order.len() && self.edges[order[next]].a.x <= x0 {
                active.push(order[next]);
                next += 1;
            }
            active.retain(|&j| self.edges[j].b.x > x0);
            let xm = 0.5 * (x0 + x1);
            hits.clear();
            hits.extend(
                active
                    .iter()
                    .filter(|&&j| self.edges[j].b.x >= x1)
                    .map(|&j| (self.edges[j].y_at(xm), self.edges[j].operand)),
            );
            if hits.is_empty() {
                continue;
            }
            hits.sort_by(|p, q| p.0.total_cmp(&q.0));
            inside.iter_mut().for_each(|v| *v = false);
            let width = x1 - x0;
            for k in 0..hits.len() - 1 {
                let op = hits[k].1;
                inside[op] = !inside[op];
                let len = hits[k + 1].0 - hits[k].0;
                if len <= 0.0 {
                    continue;
                }
                for (t, pred) in totals.iter_mut().zip(predicates) {
                    if pred(&inside) {
                        *t += len * width;
                    }
                }
            }
        }
        totals
    }

    pub fn area_where<F: Fn(&[bool]) -> bool>(&self, pred: F) -> f64 {
        self.measure(&[&pred])[0]
    }
}

fn crossing_x(e: &Edge, f: &Edge) -> Option<f64> {
    let r = e.b - e.a;
    let s = f.b - f.a;
    let denom = r.x * s.y - r.y * s.x;
    if denom == 0.0 {
        return None;
    }
    let qp = f.a - e.a;
    let t = (qp.x * s.y - qp.y * s.x) / denom;
    let u = (qp.x * r.y - qp.y * r.x) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        let x = e.a.x + t * r.x;
        if x > e.a.x && x < e.b.x {
            return Some(x);
        }
    }
    None
}

/// Area of the union of a set of polygons.
pub fn union_area(polys: &[Polygon2D]) -> f64 {
    let mut ov = Overlay::new();
    for p in polys {
        ov.add_polygon(p);
    }
    ov.area_where(|inside| inside.iter().any(|&b| b))
}
