use super::raster::{coverage, winding_number};
use super::{check_upstream, pixel_scale, FrameBuffer, PixelGradient, RenderError, RenderSettings};
use crate::document::cubic_pieces;
use crate::document::{ClipartDocument, FillRule, LayerContent, Segment, Subpath};
use crate::geometry::{Point2D, Rgba};
use crate::rigging::{BarycentricBinding, TriangleMesh};

/// A flattened vertex as a combination of up to four control points.
#[derive(Clone, Copy, Debug)]
struct Terms {
    idx: [usize; 4],
    w: [f64; 4],
    n: usize,
}

impl Terms {
    fn single(i: usize) -> Self {
        Self { idx: [i, 0, 0, 0], w: [1.0, 0.0, 0.0, 0.0], n: 1 }
    }
}

#[derive(Clone, Debug)]
struct FlatPath {
    rings: Vec<Vec<Point2D>>,
    terms: Vec<Vec<Terms>>,
    color: Rgba,
    rule: FillRule,
    lo: Point2D,
    hi: Point2D,
}

impl FlatPath {
    fn contains(&self, p: Point2D) -> bool {
        p.x >= self.lo.x
            && p.x <= self.hi.x
            && p.y >= self.lo.y
            && p.y <= self.hi.y
            && self.rule.is_inside(winding_number(&self.rings, p))
    }
}

fn flatten_subpath(sp: &Subpath, base: usize, scale: Point2D, tol: f64) -> (Vec<Point2D>, Vec<Terms>) {
    let px = |i: usize| Point2D::new(sp.points[i].x * scale.x, sp.points[i].y * scale.y);
    let mut ring = vec![px(0)];
    let mut terms = vec![Terms::single(base)];
    let last = sp.segments.len().saturating_sub(1);
    for (k, seg) in sp.segments.iter().enumerate() {
        let s = sp.segment_start(k);
        let closing = sp.closed && k == last;
        match *seg {
            Segment::Line { end } => {
                if !closing {
                    ring.push(px(end));
                    terms.push(Terms::single(base + end));
                }
            }
            Segment::Cubic { ctrl1, ctrl2, end } => {
                let idx = [s, ctrl1, ctrl2, end];
                let cp = idx.map(px);
                let n = cubic_pieces(cp, tol);
                for i in 1..=n {
                    if i == n {
                        if !closing {
                            ring.push(cp[3]);
                            terms.push(Terms::single(base + end));
                        }
                        break;
                    }
                    let u = i as f64 / n as f64;
                    let v = 1.0 - u;
                    let w = [v * v * v, 3.0 * u * v * v, 3.0 * u * u * v, u * u * u];
                    ring.push(cp[0] * w[0] + cp[1] * w[1] + cp[2] * w[2] + cp[3] * w[3]);
                    terms.push(Terms { idx: idx.map(|j| base + j), w, n: 4 });
                }
            }
        }
    }
    (ring, terms)
}

fn flatten_document(doc: &ClipartDocument, settings: &RenderSettings) -> Vec<FlatPath> {
    let scale = pixel_scale(settings, doc.width, doc.height);
    let mut base = 0;
    let mut out = Vec::new();
    for layer in doc.layers_in_paint_order() {
        if let LayerContent::Raster(_) = layer.content {
            log::warn!("raster layer '{}' is not drawn by the vector renderer", layer.name);
            continue;
        }
        for path in layer.paths() {
            let mut rings = Vec::new();
            let mut terms = Vec::new();
            for sp in &path.subpaths {
                let (r, t) = flatten_subpath(sp, base, scale, settings.flatten_tol);
                base += sp.points.len();
                rings.push(r);
                terms.push(t);
            }
            let mut lo = Point2D::new(f64::INFINITY, f64::INFINITY);
            let mut hi = Point2D::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
            for p in rings.iter().flatten() {
                lo = Point2D::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Point2D::new(hi.x.max(p.x), hi.y.max(p.y));
            }
            out.push(FlatPath { rings, terms, color: path.fill, rule: path.fill_rule, lo, hi });
        }
    }
    out
}

fn rasterize(paths: &[FlatPath], settings: &RenderSettings) -> FrameBuffer {
    let (w, h, ss) = (settings.width, settings.height, settings.supersample);
    let mut frame = FrameBuffer::white(w, h);
    let full = (ss * ss) as f64;
    for path in paths {
        if path.color.a <= 0.0 {
            continue;
        }
        let cov = coverage(&path.rings, path.rule, w, h, ss);
        let rgb = path.color.rgb();
        for y in 0..cov.height {
            for x in 0..cov.width {
                let c = cov.counts[y * cov.width + x];
                if c == 0 {
                    continue;
                }
                let a = path.color.a * f64::from(c) / full;
                let px = &mut frame.pixels[(cov.y0 + y) * w + cov.x0 + x];
                for k in 0..3 {
                    px[k] = px[k] * (1.0 - a) + rgb[k] * a;
                }
            }
        }
    }
    frame
}

/// Rasterises every vector layer of `doc` in paint order.
pub fn render_document(doc: &ClipartDocument, settings: &RenderSettings) -> Result<FrameBuffer, RenderError> {
    settings.validate()?;
    Ok(rasterize(&flatten_document(doc, settings), settings))
}

/// Copy of `doc` with every control point carried by the deformed mesh.
///
/// `binding` covers `doc.control_points()` in order. A pose bitwise equal
/// to the rest mesh returns the document unchanged.
pub fn deform_document(
    doc: &ClipartDocument,
    binding: &BarycentricBinding,
    mesh: &TriangleMesh,
    pose: &[Point2D],
) -> Result<ClipartDocument, RenderError> {
    let rest = doc.control_points();
    if binding.entries.len() != rest.len() {
        return Err(RenderError::BindingMismatch { expected: rest.len(), got: binding.entries.len() });
    }
    if pose.len() != mesh.vertices.len() {
        return Err(RenderError::PoseMismatch { expected: mesh.vertices.len(), got: pose.len() });
    }
    if pose == mesh.vertices.as_slice() {
        return Ok(doc.clone());
    }
    let inverted = mesh.inverted_triangles(pose);
    if !inverted.is_empty() {
        log::warn!("rendering with {} inverted triangle(s): {:?}", inverted.len(), &inverted[..inverted.len().min(8)]);
    }
    let moved = binding.apply(mesh, &rest, pose);
    let mut out = doc.clone();
    out.set_control_points(&moved);
    Ok(out)
}

/// Everything the vector backward pass needs from a forward render.
#[derive(Clone, Debug)]
pub struct VectorTape {
    paths: Vec<FlatPath>,
    scale: Point2D,
    width: usize,
    height: usize,
    control_points: usize,
    edge_density: f64,
}

/// Offset of the two color probes on either side of an edge sample, in
/// pixels.
const PROBE: f64 = 1e-4;

impl VectorTape {
    fn color_at(&self, p: Point2D) -> [f64; 3] {
        let mut c = [1.0; 3];
        for path in &self.paths {
            if path.color.a > 0.0 && path.contains(p) {
                let rgb = path.color.rgb();
                let a = path.color.a;
                for k in 0..3 {
                    c[k] = c[k] * (1.0 - a) + rgb[k] * a;
                }
            }
        }
        c
    }

    /// Edge parameters where `a → b` crosses pixel grid lines, with each
    /// piece further split to at most `1/edge_density` pixels, so colors are
    /// constant along a piece unless another edge crosses it.
    fn pixel_cuts(&self, a: Point2D, b: Point2D, len: f64) -> Vec<f64> {
        let mut ts = vec![0.0, 1.0];
        for (pa, pb) in [(a.x, b.x), (a.y, b.y)] {
            if pa == pb {
                continue;
            }
            let (lo, hi) = (pa.min(pb), pa.max(pb));
            let mut g = lo.floor() + 1.0;
            while g < hi {
                ts.push((g - pa) / (pb - pa));
                g += 1.0;
            }
        }
        ts.sort_by(f64::total_cmp);
        let step = 1.0 / (len * self.edge_density);
        let mut out = Vec::with_capacity(ts.len());
        for w in ts.windows(2) {
            let k = ((w[1] - w[0]) / step).ceil().max(1.0) as usize;
            for i in 0..k {
                out.push(w[0] + (w[1] - w[0]) * i as f64 / k as f64);
            }
        }
        out.push(1.0);
        out
    }

    pub fn control_point_count(&self) -> usize {
        self.control_points
    }

    /// Gradient with respect to every document control point, canvas units.
    pub fn backward(&self, upstream: &PixelGradient) -> Result<Vec<Point2D>, RenderError> {
        check_upstream((self.width, self.height), upstream)?;
        let mut grad = vec![Point2D::ZERO; self.control_points];
        for path in &self.paths {
            for (ring, terms) in path.rings.iter().zip(&path.terms) {
                let n = ring.len();
                if n < 2 {
                    continue;
                }
                for i in 0..n {
                    let j = (i + 1) % n;
                    let (a, b) = (ring[i], ring[j]);
                    let d = b - a;
                    let len = d.norm();
                    if len == 0.0 {
                        continue;
                    }
                    let normal = d.perp() * (1.0 / len);
                    let (mut ga, mut gb) = (Point2D::ZERO, Point2D::ZERO);
                    let cuts = self.pixel_cuts(a, b, len);
                    for w in cuts.windows(2) {
                        let (t0, t1) = (w[0], w[1]);
                        let x = a + d * (0.5 * (t0 + t1));
                        if x.x < 0.0 || x.y < 0.0 {
                            continue;
                        }
                        let (px, py) = (x.x as usize, x.y as usize);
                        if px >= self.width || py >= self.height {
                            continue;
                        }
                        let up = upstream.pixels[py * self.width + px];
                        if up == [0.0; 3] {
                            continue;
                        }
                        // Moving the edge along +normal hands the left-side
                        // area to the right-side color.
                        let left = self.color_at(x + normal * PROBE);
                        let right = self.color_at(x - normal * PROBE);
                        let jump: f64 = (0..3).map(|k| up[k] * (right[k] - left[k])).sum();
                        if jump == 0.0 {
                            continue;
                        }
                        // Exact integrals of the endpoint hat functions over
                        // the piece: ∫(1−t) and ∫t, scaled by edge length.
                        let int_t = 0.5 * (t1 * t1 - t0 * t0);
                        let g = normal * (jump * len);
                        ga += g * ((t1 - t0) - int_t);
                        gb += g * int_t;
                    }
                    for (v, g) in [(i, ga), (j, gb)] {
                        if g == Point2D::ZERO {
                            continue;
                        }
                        let tm = &terms[v];
                        for k in 0..tm.n {
                            grad[tm.idx[k]] += g * tm.w[k];
                        }
                    }
                }
            }
        }
        for g in &mut grad {
            *g = Point2D::new(g.x * self.scale.x, g.y * self.scale.y);
        }
        Ok(grad)
    }
}

/// Renders `doc` deformed by `pose` and records the tape for
/// [`VectorTape::backward`].
pub fn render_vector(
    doc: &ClipartDocument,
    binding: &BarycentricBinding,
    mesh: &TriangleMesh,
    pose: &[Point2D],
    settings: &RenderSettings,
) -> Result<(FrameBuffer, VectorTape), RenderError> {
    let deformed = deform_document(doc, binding, mesh, pose)?;
    render_deformed(&deformed, settings)
}

/// Renders an already deformed document and records its tape.
pub fn render_deformed(doc: &ClipartDocument, settings: &RenderSettings) -> Result<(FrameBuffer, VectorTape), RenderError> {
    settings.validate()?;
    let paths = flatten_document(doc, settings);
    let frame = rasterize(&paths, settings);
    let tape = VectorTape {
        paths,
        scale: pixel_scale(settings, doc.width, doc.height),
        width: settings.width,
        height: settings.height,
        control_points: doc.control_point_count(),
        edge_density: settings.edge_density,
    };
    Ok((frame, tape))
}
