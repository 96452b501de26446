//! Boundary tracing of binarized bitmaps.
//!
//! Foreground pixels are 4-connected. The boundary is followed along pixel
//! cracks, so vertices are integer pixel corners and the traced area equals
//! the component's pixel count exactly (minus holes).

use std::collections::{HashMap, VecDeque};

use super::{clean_ring, DocumentError, Polygon, RasterImage};
use crate::geometry::{signed_area, Point2D};

/// Whiteness above which an opaque pixel counts as background.
const WHITE_CUTOFF: f64 = 0.98;

#[derive(Clone, Debug)]
pub struct TraceResult {
    pub polygon: Polygon,
    /// Number of 4-connected foreground components found.
    pub components: usize,
    /// Pixel count of the traced component.
    pub pixel_count: usize,
}

/// Binarizes `image` and traces the largest foreground component.
///
/// Pixels with alpha above `alpha_threshold` are foreground. A fully opaque
/// image has no usable alpha, so its non-white pixels are taken instead.
pub fn trace_bitmap(image: &RasterImage, alpha_threshold: f64) -> Result<TraceResult, DocumentError> {
    let mask = binarize(image, alpha_threshold);
    let (w, h) = (image.width, image.height);

    let mut label = vec![usize::MAX; w * h];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask[start] || label[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut count = 0;
        label[start] = id;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            count += 1;
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if mask[j] && label[j] == usize::MAX {
                    label[j] = id;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        sizes.push(count);
    }
    if sizes.is_empty() {
        return Err(DocumentError::EmptySilhouette(format!(
            "no pixel exceeds alpha threshold {alpha_threshold}"
        )));
    }
    // Largest component; earliest in scan order on ties.
    let best = (0..sizes.len()).max_by_key(|&i| (sizes[i], std::cmp::Reverse(i))).expect("nonempty");
    if sizes.len() > 1 {
        log::warn!("bitmap has {} foreground components; keeping the largest", sizes.len());
    }

    let inside = |x: i64, y: i64| -> bool {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && label[y as usize * w + x as usize] == best
    };

    // Directed cracks with the component on the left of travel.
    let mut out: HashMap<(i64, i64), Vec<(i64, i64)>> = HashMap::new();
    let mut edge_count = 0;
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            if !inside(x, y) {
                continue;
            }
            let mut push = |from: (i64, i64), dir: (i64, i64)| {
                out.entry(from).or_default().push(dir);
                edge_count += 1;
            };
            if !inside(x, y - 1) {
                push((x, y), (1, 0));
            }
            if !inside(x + 1, y) {
                push((x + 1, y), (0, 1));
            }
            if !inside(x, y + 1) {
                push((x + 1, y + 1), (-1, 0));
            }
            if !inside(x - 1, y) {
                push((x, y + 1), (0, -1));
            }
        }
    }

    let mut starts: Vec<(i64, i64)> = out.keys().copied().collect();
    starts.sort_unstable_by_key(|&(x, y)| (y, x));
    let mut loops: Vec<Vec<Point2D>> = Vec::new();
    let mut used = 0;
    for s in starts {
        while let Some(first) = out.get_mut(&s).and_then(|v| v.pop()) {
            let mut ring = vec![Point2D::new(s.0 as f64, s.1 as f64)];
            let mut v = (s.0 + first.0, s.1 + first.1);
            let mut dir = first;
            used += 1;
            while v != s {
                ring.push(Point2D::new(v.0 as f64, v.1 as f64));
                let cands = out.get_mut(&v).expect("crack graph is closed");
                // At a pinch corner turn left, which keeps diagonal pixels apart.
                let left = (-dir.1, dir.0);
                let k = cands.iter().position(|&d| d == left).unwrap_or(0);
                dir = cands.swap_remove(k);
                v = (v.0 + dir.0, v.1 + dir.1);
                used += 1;
            }
            clean_ring(&mut ring, 0.0);
            loops.push(ring);
        }
    }
    debug_assert_eq!(used, edge_count);

    let outer_idx = (0..loops.len())
        .max_by(|&a, &b| signed_area(&loops[a]).total_cmp(&signed_area(&loops[b])))
        .expect("component has a boundary");
    let vertices = loops.swap_remove(outer_idx);
    let holes = loops;
    Ok(TraceResult {
        polygon: Polygon { vertices, holes },
        components: sizes.len(),
        pixel_count: sizes[best],
    })
}

fn binarize(image: &RasterImage, alpha_threshold: f64) -> Vec<bool> {
    let opaque = image.is_opaque();
    image
        .pixels
        .iter()
        .map(|p| {
            if opaque {
                p.r.min(p.g).min(p.b) < WHITE_CUTOFF
            } else {
                p.a > alpha_threshold
            }
        })
        .collect()
}
