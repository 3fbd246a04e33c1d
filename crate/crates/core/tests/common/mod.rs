//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use delmap::cam::{BinaryMask, ClassWeights, FeatureMap};
use delmap::geo::{Point2, Polygon2D};
use rand::Rng;

/// Random star-shaped (hence simple) polygon around `center`. Angles are
/// jittered around `n` even steps so no gap reaches half a turn.
pub fn star_polygon<R: Rng>(rng: &mut R, center: Point2, r_min: f64, r_max: f64, n: usize) -> Polygon2D {
    let step = std::f64::consts::TAU / n as f64;
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let pts = (0..n)
        .map(|i| {
            let a = phase + (i as f64 + rng.random_range(0.05..0.95)) * step;
            let r = rng.random_range(r_min..r_max);
            Point2::new(center.x + r * a.cos(), center.y + r * a.sin())
        })
        .collect();
    Polygon2D::new(pts).unwrap()
}

/// x-coordinates where the horizontal line `y` crosses the ring, sorted (even-odd spans).
fn crossings(poly: &Polygon2D, y: f64) -> Vec<f64> {
    let mut xs = Vec::new();
    for (a, b) in poly.edges() {
        if (a.y > y) != (b.y > y) {
            xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
        }
    }
    xs.sort_by(f64::total_cmp);
    xs
}

/// Number of pixel centers in `[x0, x0 + n·h)` that lie inside every span list.
fn count_in_spans(spans: &[Vec<f64>], x0: f64, h: f64, n: usize) -> usize {
    let mut cover = vec![0u8; n];
    for (k, xs) in spans.iter().enumerate() {
        for pair in xs.chunks(2) {
            if pair.len() < 2 {
                continue;
            }
            // first center ≥ pair[0] and last center < pair[1]
            let lo = ((pair[0] - x0) / h - 0.5).ceil().max(0.0) as usize;
            let hi = ((pair[1] - x0) / h - 0.5).ceil().clamp(0.0, n as f64) as usize;
            for c in cover.iter_mut().take(hi).skip(lo) {
                if *c as usize == k {
                    *c += 1;
                }
            }
        }
    }
    cover.iter().filter(|&&c| c as usize == spans.len()).count()
}

/// Area of the intersection of all `polys`, by counting centers of a `res × res`
/// grid over their common bounding box.
pub fn raster_intersection_area(polys: &[&Polygon2D], res: usize) -> f64 {
    let (mut lo, mut hi) = polys[0].bbox();
    for p in &polys[1..] {
        let (a, b) = p.bbox();
        lo = Point2::new(lo.x.min(a.x), lo.y.min(a.y));
        hi = Point2::new(hi.x.max(b.x), hi.y.max(b.y));
    }
    let hx = (hi.x - lo.x) / res as f64;
    let hy = (hi.y - lo.y) / res as f64;
    let mut count = 0;
    for j in 0..res {
        let y = lo.y + (j as f64 + 0.5) * hy;
        let spans: Vec<Vec<f64>> = polys.iter().map(|p| crossings(p, y)).collect();
        count += count_in_spans(&spans, lo.x, hx, res);
    }
    count as f64 * hx * hy
}

/// Minimum bounding-box area over rotations in `step_deg` steps.
pub fn brute_force_min_rect_area(pts: &[Point2], step_deg: f64) -> f64 {
    let steps = (90.0 / step_deg).round() as usize;
    let mut best = f64::INFINITY;
    for s in 0..steps {
        let (sn, cs) = (s as f64 * step_deg).to_radians().sin_cos();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in pts {
            let x = cs * p.x + sn * p.y;
            let y = -sn * p.x + cs * p.y;
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        best = best.min((x1 - x0) * (y1 - y0));
    }
    best
}

/// 8-connected component label per pixel via union-find; components are
/// numbered by their smallest raster index.
pub fn union_find_components(mask: &BinaryMask) -> (Vec<Option<usize>>, usize) {
    let (w, h) = (mask.width, mask.height);
    let mut parent: Vec<usize> = (0..w * h).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let i = y * w + x;
            // neighbors already visited in raster order
            let prev: [(i64, i64); 4] = [(-1, 0), (-1, -1), (0, -1), (1, -1)];
            for (dx, dy) in prev {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < w && mask.get(nx as usize, ny as usize) {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, ny as usize * w + nx as usize));
                    let (a, b) = (a.min(b), a.max(b));
                    parent[b] = a;
                }
            }
        }
    }
    let mut ids = std::collections::BTreeMap::new();
    let mut labels = vec![None; w * h];
    for (i, label) in labels.iter_mut().enumerate() {
        if mask.data[i] {
            let r = find(&mut parent, i);
            let n = ids.len();
            *label = Some(*ids.entry(r).or_insert(n));
        }
    }
    (labels, ids.len())
}

/// `M(x, y) = Σ_k w_k f_k(x, y)` by explicit index arithmetic.
pub fn scalar_cam(f: &FeatureMap, w: &ClassWeights) -> Vec<f64> {
    let (k, h, wd) = (f.channels(), f.height(), f.width());
    let data = f.data();
    let mut out = vec![0.0; h * wd];
    for y in 0..h {
        for x in 0..wd {
            let mut s = 0.0;
            for c in 0..k {
                s += w.as_slice()[c] as f64 * data[c * h * wd + y * wd + x] as f64;
            }
            out[y * wd + x] = s;
        }
    }
    out
}

pub fn random_mask<R: Rng>(rng: &mut R, w: usize, h: usize) -> BinaryMask {
    let density = rng.random_range(0.1..0.7);
    let data = (0..w * h).map(|_| rng.random_bool(density)).collect();
    BinaryMask::new(h, w, data).unwrap()
}

/// Blobby mask: a few random discs and rectangles.
pub fn blob_mask<R: Rng>(rng: &mut R, w: usize, h: usize) -> BinaryMask {
    let mut data = vec![false; w * h];
    for _ in 0..rng.random_range(1..8) {
        let (cx, cy) = (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
        let r = rng.random_range(1.0..(w as f64 / 4.0));
        let disc = rng.random_bool(0.5);
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                let inside = if disc {
                    dx * dx + dy * dy <= r * r
                } else {
                    dx.abs() <= r && dy.abs() <= r * 0.5
                };
                if inside {
                    data[y * w + x] = !data[y * w + x] || disc;
                }
            }
        }
    }
    BinaryMask::new(h, w, data).unwrap()
}

pub fn perimeter(poly: &Polygon2D) -> f64 {
    poly.edges().map(|(a, b)| (b - a).norm()).sum()
}

/// Even-odd test of many pixel centers `(x + 0.5, y + 0.5)` against one ring,
/// one scanline at a time. Returns the pixels found outside.
pub fn centers_outside(poly: &Polygon2D, pixels: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut rows: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for &(x, y) in pixels {
        rows.entry(y).or_default().push(x);
    }
    let mut out = Vec::new();
    for (y, xs) in rows {
        let cross = crossings(poly, y as f64 + 0.5);
        for x in xs {
            let cx = x as f64 + 0.5;
            if cross.iter().filter(|&&c| c < cx).count() % 2 == 0 {
                out.push((x, y));
            }
        }
    }
    out
}

/// Pixel count of a component together with everything it encloses: pixels
/// that cannot reach the outside of its bounding box through 4-connected
/// non-component pixels.
pub fn filled_count(labels: &[Option<usize>], width: usize, label: usize) -> usize {
    let (mut x0, mut x1, mut y0, mut y1) = (usize::MAX, 0, usize::MAX, 0);
    for (i, l) in labels.iter().enumerate() {
        if *l == Some(label) {
            let (x, y) = (i % width, i / width);
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    // padded box so the outside is connected
    let (bw, bh) = (x1 - x0 + 3, y1 - y0 + 3);
    let member = |bx: usize, by: usize| {
        bx >= 1
            && by >= 1
            && bx - 1 + x0 <= x1
            && by - 1 + y0 <= y1
            && labels[(by - 1 + y0) * width + bx - 1 + x0] == Some(label)
    };
    let mut seen = vec![false; bw * bh];
    let mut stack = vec![(0usize, 0usize)];
    seen[0] = true;
    let mut outside = 0;
    while let Some((x, y)) = stack.pop() {
        outside += 1;
        let mut push = |nx: usize, ny: usize| {
            if !seen[ny * bw + nx] && !member(nx, ny) {
                seen[ny * bw + nx] = true;
                stack.push((nx, ny));
            }
        };
        if x > 0 {
            push(x - 1, y);
        }
        if x + 1 < bw {
            push(x + 1, y);
        }
        if y > 0 {
            push(x, y - 1);
        }
        if y + 1 < bh {
            push(x, y + 1);
        }
    }
    bw * bh - outside
}
