//! Supersampled scanline coverage and point-in-path queries.

use crate::document::FillRule;
use crate::geometry::Point2D;

/// Sample counts per pixel over a pixel-aligned window.
#[derive(Clone, Debug, PartialEq)]
pub struct Coverage {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
    /// Covered samples per pixel, row-major over the window.
    pub counts: Vec<u16>,
}

impl Coverage {
    pub fn get(&self, x: usize, y: usize) -> u16 {
        if x < self.x0 || y < self.y0 || x >= self.x0 + self.width || y >= self.y0 + self.height {
            return 0;
        }
        self.counts[(y - self.y0) * self.width + (x - self.x0)]
    }
}

/// Coverage of closed `rings` on a `w × h` pixel grid with `ss × ss` samples
/// per pixel at offsets `(i + ½)/ss`.
///
/// Edges are half-open in y, so a sample exactly on a shared edge is counted
/// once.
pub fn coverage(rings: &[Vec<Point2D>], rule: FillRule, w: usize, h: usize, ss: usize) -> Coverage {
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    for p in rings.iter().flatten() {
        xmin = xmin.min(p.x);
        xmax = xmax.max(p.x);
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    let empty = Coverage { x0: 0, y0: 0, width: 0, height: 0, counts: Vec::new() };
    if !(ymin < ymax) || !(xmin < xmax) || ymax <= 0.0 || xmax <= 0.0 || ymin >= h as f64 || xmin >= w as f64 {
        return empty;
    }
    let px0 = xmin.floor().max(0.0) as usize;
    let px1 = (xmax.ceil() as usize).min(w);
    let py0 = ymin.floor().max(0.0) as usize;
    let py1 = (ymax.ceil() as usize).min(h);
    let (cw, ch) = (px1 - px0, py1 - py0);
    let mut counts = vec![0u16; cw * ch];

    // Edges bucketed by the pixel rows they span.
    struct Edge {
        a: Point2D,
        b: Point2D,
        dir: i32,
    }
    let mut edges = Vec::new();
    for ring in rings {
        let n = ring.len();
        for i in 0..n {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            if a.y == b.y {
                continue;
            }
            let (lo, hi, dir) = if a.y < b.y { (a, b, 1) } else { (b, a, -1) };
            edges.push(Edge { a: lo, b: hi, dir });
        }
    }
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); ch];
    for (i, e) in edges.iter().enumerate() {
        let r0 = (e.a.y.floor().max(py0 as f64) as usize).max(py0);
        let r1 = (e.b.y.ceil().min(py1 as f64) as usize).min(py1);
        for r in r0..r1 {
            buckets[r - py0].push(i);
        }
    }

    let ssf = ss as f64;
    let mut xs: Vec<(f64, i32)> = Vec::new();
    for row in py0..py1 {
        let bucket = &buckets[row - py0];
        if bucket.is_empty() {
            continue;
        }
        for s in 0..ss {
            let sy = row as f64 + (s as f64 + 0.5) / ssf;
            xs.clear();
            for &i in bucket {
                let e = &edges[i];
                if e.a.y <= sy && sy < e.b.y {
                    let t = (sy - e.a.y) / (e.b.y - e.a.y);
                    xs.push((e.a.x + t * (e.b.x - e.a.x), e.dir));
                }
            }
            if xs.is_empty() {
                continue;
            }
            xs.sort_by(|p, q| p.0.total_cmp(&q.0));
            let mut wind = 0;
            for k in 0..xs.len() - 1 {
                wind += xs[k].1;
                if !rule.is_inside(wind) {
                    continue;
                }
                // Sample columns m with (m + ½)/ss in [xa, xb).
                let (xa, xb) = (xs[k].0, xs[k + 1].0);
                let m0 = ((xa * ssf - 0.5).ceil().max((px0 * ss) as f64)) as usize;
                let m1 = ((xb * ssf - 0.5).ceil().min((px1 * ss) as f64).max(0.0)) as usize;
                let base = (row - py0) * cw;
                for m in m0..m1.max(m0) {
                    counts[base + m / ss - px0] += 1;
                }
            }
        }
    }
    Coverage { x0: px0, y0: py0, width: cw, height: ch, counts }
}

/// Winding number of `p` with respect to closed `rings` (y-half-open edges).
pub fn winding_number(rings: &[Vec<Point2D>], p: Point2D) -> i32 {
    let mut wind = 0;
    for ring in rings {
        let n = ring.len();
        for i in 0..n {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            if a.y <= p.y && p.y < b.y {
                if (b - a).cross(p - a) > 0.0 {
                    wind += 1;
                }
            } else if b.y <= p.y && p.y < a.y && (b - a).cross(p - a) < 0.0 {
                wind -= 1;
            }
        }
    }
    wind
}
