//! Outer-border following for 8-connected foreground regions.
//!
//! The border is followed along pixel edges (cracks) keeping the region on the
//! right; at a corner where only the diagonal pixel continues the region the
//! walk turns toward it, which is what makes the traversal 8-connected. Each
//! crack contributes its midpoint as a polygon vertex. The result is the 0.5
//! level line between foreground and background pixel centers: a simple ring
//! that strictly contains every pixel center of the region, even for one-pixel
//! regions and one-pixel-wide strokes. Holes are not traced.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::BinaryMask;
use crate::geo::{Point2, Polygon2D};

/// Traced region in pixel coordinates (pixel (i, j) spans `[i, i+1] × [j, j+1]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePolygon {
    pub polygon: Polygon2D,
    /// Number of mask pixels in the traced component.
    pub pixel_area: usize,
}

/// 8-connected labeling. Labels start at 1 and follow raster order of each
/// component's first pixel; returns the label image and component sizes.
pub fn label_components(mask: &BinaryMask) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = (mask.width, mask.height);
    let mut labels = vec![0u32; w * h];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.data[start] || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if (dx, dy) == (0, 0) || !mask.get_signed(nx, ny) {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if labels[j] == 0 {
                        labels[j] = label;
                        queue.push_back(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

const DIRS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

/// Pixels left and right of the crack leaving corner `(cx, cy)` in direction `d`.
fn crack_sides(cx: i64, cy: i64, d: usize) -> ((i64, i64), (i64, i64)) {
    match d {
        0 => ((cx, cy - 1), (cx, cy)),
        1 => ((cx, cy), (cx - 1, cy)),
        2 => ((cx - 1, cy), (cx - 1, cy - 1)),
        _ => ((cx - 1, cy - 1), (cx, cy - 1)),
    }
}

/// Crack midpoints in doubled integer coordinates.
fn follow_border(mask: &BinaryMask, px: i64, py: i64) -> Vec<(i64, i64)> {
    let start = (px, py, 0usize);
    let (mut cx, mut cy, mut d) = start;
    let mut out = Vec::new();
    loop {
        let (dx, dy) = DIRS[d];
        out.push((2 * cx + dx, 2 * cy + dy));
        cx += dx;
        cy += dy;
        let (left, right) = crack_sides(cx, cy, d);
        d = if mask.get_signed(left.0, left.1) {
            (d + 3) % 4
        } else if mask.get_signed(right.0, right.1) {
            d
        } else {
            (d + 1) % 4
        };
        if (cx, cy, d) == start {
            break;
        }
    }
    out
}

fn drop_collinear(pts: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    let cross = |a: (i64, i64), b: (i64, i64), c: (i64, i64)| (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    let mut out: Vec<(i64, i64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while out.len() >= 2 && cross(out[out.len() - 2], out[out.len() - 1], p) == 0 {
            out.pop();
        }
        out.push(p);
    }
    // wrap-around at the seam
    loop {
        let n = out.len();
        if n > 3 && cross(out[n - 2], out[n - 1], out[0]) == 0 {
            out.pop();
        } else if n > 3 && cross(out[n - 1], out[0], out[1]) == 0 {
            out.remove(0);
        } else {
            break;
        }
    }
    out
}

/// One polygon per 8-connected foreground component, ordered by the raster
/// position of each component's first pixel.
pub fn trace_polygons(mask: &BinaryMask) -> Vec<ImagePolygon> {
    let (labels, sizes) = label_components(mask);
    let mut seen = vec![false; sizes.len()];
    let mut out = Vec::with_capacity(sizes.len());
    for (i, &l) in labels.iter().enumerate() {
        if l == 0 || seen[(l - 1) as usize] {
            continue;
        }
        seen[(l - 1) as usize] = true;
        let (x, y) = ((i % mask.width) as i64, (i / mask.width) as i64);
        let ring = drop_collinear(follow_border(mask, x, y));
        let vertices = ring
            .into_iter()
            .map(|(a, b)| Point2::new(a as f64 * 0.5, b as f64 * 0.5))
            .collect();
        let polygon = Polygon2D::new(vertices).expect("crack midpoints form a valid ring");
        out.push(ImagePolygon {
            polygon,
            pixel_area: sizes[(l - 1) as usize],
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::point_in_polygon;

    fn mask_from(rows: &[&str]) -> BinaryMask {
        let h = rows.len();
        let w = rows[0].len();
        let data = rows.iter().flat_map(|r| r.chars().map(|c| c == '#')).collect();
        BinaryMask::new(h, w, data).unwrap()
    }

    #[test]
    fn empty_mask() {
        let m = BinaryMask::new(4, 4, vec![false; 16]).unwrap();
        assert!(trace_polygons(&m).is_empty());
    }

    #[test]
    fn single_pixel_is_a_diamond() {
        let m = mask_from(&["...", ".#.", "..."]);
        let p = trace_polygons(&m);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].pixel_area, 1);
        assert_eq!(p[0].polygon.len(), 4);
        assert!((p[0].polygon.area() - 0.5).abs() < 1e-12);
        assert!(point_in_polygon(Point2::new(1.5, 1.5), &p[0].polygon));
    }

    #[test]
    fn filled_rectangle() {
        let mut data = vec![false; 20 * 12];
        for y in 3..8 {
            for x in 4..14 {
                data[y * 20 + x] = true;
            }
        }
        let m = BinaryMask::new(12, 20, data).unwrap();
        let p = trace_polygons(&m);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].pixel_area, 50);
        // four chamfered corners of 1/8 each
        assert!((p[0].polygon.area() - 49.5).abs() < 1e-12);
        assert_eq!(p[0].polygon.len(), 8);
        assert!(p[0].polygon.is_simple());
    }

    #[test]
    fn diagonal_pixels_are_one_component() {
        let m = mask_from(&["#..", ".#.", "..#"]);
        let p = trace_polygons(&m);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].pixel_area, 3);
        assert!(p[0].polygon.is_simple());
        for c in [(0.5, 0.5), (1.5, 1.5), (2.5, 2.5)] {
            assert!(point_in_polygon(Point2::new(c.0, c.1), &p[0].polygon));
        }
    }

    #[test]
    fn two_blobs_ordered_by_raster_scan() {
        let m = mask_from(&["....##", "#...##", "##....", "##...."]);
        let p = trace_polygons(&m);
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].pixel_area, 4);
        assert_eq!(p[1].pixel_area, 5);
        assert!(p[0].polygon.bbox().0.x > 3.0);
    }

    #[test]
    fn ring_traces_outer_border_only() {
        let m = mask_from(&["#####", "#...#", "#...#", "#####"]);
        let p = trace_polygons(&m);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].pixel_area, 14);
        assert!(point_in_polygon(Point2::new(2.5, 1.5), &p[0].polygon));
    }

    #[test]
    fn thin_stroke_is_simple() {
        let m = mask_from(&[".......", ".#####.", "...#...", "...#...", "......."]);
        let p = trace_polygons(&m);
        assert_eq!(p.len(), 1);
        assert!(p[0].polygon.is_simple());
    }
}
