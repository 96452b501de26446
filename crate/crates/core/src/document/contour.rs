use i_overlay::core::fill_rule::FillRule as OverlayFill;
use i_overlay::core::overlay_rule::OverlayRule;
use i_overlay::float::simplify::SimplifyShape;
use i_overlay::float::single::SingleFloatOverlay;

use super::{
    clean_ring, trace_bitmap, ClipartDocument, DocumentError, FillRule, Layer, LayerContent, Polygon, RasterPatch, Segment,
    Subpath,
};
use crate::geometry::{signed_area, Point2D};

/// Silhouette of a layer: the largest union component plus bookkeeping.
#[derive(Clone, Debug)]
pub struct Contour {
    pub polygon: Polygon,
    /// Number of disjoint union components before the largest was kept.
    pub components: usize,
}

/// Number of uniform pieces that keep a cubic within `tol` of its polyline.
///
/// Uses `max‖B''‖ ≤ 6·max(‖p0−2p1+p2‖, ‖p1−2p2+p3‖)` and the chord error bound
/// `h²·max‖B''‖/8`.
pub fn cubic_pieces(p: [Point2D; 4], tol: f64) -> usize {
    let d = (p[0] - p[1] * 2.0 + p[2]).norm().max((p[1] - p[2] * 2.0 + p[3]).norm());
    if d == 0.0 || tol <= 0.0 {
        return 1;
    }
    ((0.75 * d / tol).sqrt().ceil() as usize).clamp(1, 4096)
}

/// Cubic Bézier point at `u`.
#[inline]
pub fn cubic_point(p: [Point2D; 4], u: f64) -> Point2D {
    let v = 1.0 - u;
    let (b0, b1, b2, b3) = (v * v * v, 3.0 * u * v * v, 3.0 * u * u * v, u * u * u);
    p[0] * b0 + p[1] * b1 + p[2] * b2 + p[3] * b3
}

/// Polyline through a cubic, excluding `p[0]` and ending exactly at `p[3]`.
pub fn flatten_cubic(p: [Point2D; 4], tol: f64) -> Vec<Point2D> {
    let n = cubic_pieces(p, tol);
    let mut out: Vec<Point2D> = (1..n).map(|i| cubic_point(p, i as f64 / n as f64)).collect();
    out.push(p[3]);
    out
}

/// Flattens a subpath to a vertex ring. The closing vertex is not repeated.
pub fn flatten_subpath(sp: &Subpath, tol: f64) -> Vec<Point2D> {
    let mut out = vec![sp.points[0]];
    for (k, seg) in sp.segments.iter().enumerate() {
        let start = sp.points[sp.segment_start(k)];
        match *seg {
            Segment::Line { end } => out.push(sp.points[end]),
            Segment::Cubic { ctrl1, ctrl2, end } => out.extend(flatten_cubic(
                [start, sp.points[ctrl1], sp.points[ctrl2], sp.points[end]],
                tol,
            )),
        }
    }
    if out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

fn to_overlay(ring: &[Point2D]) -> Vec<[f64; 2]> {
    ring.iter().map(|p| [p.x, p.y]).collect()
}

fn from_overlay(ring: &[[f64; 2]]) -> Vec<Point2D> {
    ring.iter().map(|p| Point2D::new(p[0], p[1])).collect()
}

/// Union silhouette of every filled path in `layer`.
///
/// Curves are flattened to within `flatten_tol`. When the union has several
/// disjoint pieces, the largest by area is returned and the count reported.
pub fn extract_contour(layer: &Layer, flatten_tol: f64) -> Result<Contour, DocumentError> {
    let mut acc: Vec<Vec<Vec<[f64; 2]>>> = Vec::new();
    for path in layer.paths() {
        if path.fill.a <= 0.0 {
            continue;
        }
        let rings: Vec<Vec<[f64; 2]>> = path
            .subpaths
            .iter()
            .map(|sp| flatten_subpath(sp, flatten_tol))
            .filter(|r| r.len() >= 3)
            .map(|r| to_overlay(&r))
            .collect();
        if rings.is_empty() {
            continue;
        }
        let rule = match path.fill_rule {
            FillRule::NonZero => OverlayFill::NonZero,
            FillRule::EvenOdd => OverlayFill::EvenOdd,
        };
        let shapes = rings.simplify_shape(rule, 0.0);
        if shapes.is_empty() {
            continue;
        }
        acc = if acc.is_empty() {
            shapes
        } else {
            acc.overlay(&shapes, OverlayRule::Union, OverlayFill::EvenOdd)
        };
    }

    let mut polys: Vec<Polygon> = acc
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| {
            let mut p = Polygon {
                vertices: from_overlay(&s[0]),
                holes: s[1..].iter().map(|h| from_overlay(h)).collect(),
            };
            p.normalize_orientation();
            let scale = p.bbox().map_or(1.0, |b| b.diagonal());
            clean_ring(&mut p.vertices, 1e-12 * scale);
            for h in &mut p.holes {
                clean_ring(h, 1e-12 * scale);
            }
            p.holes.retain(|h| h.len() >= 3);
            p
        })
        .filter(|p| p.vertices.len() >= 3 && signed_area(&p.vertices) > 0.0)
        .collect();
    if polys.is_empty() {
        return Err(DocumentError::EmptySilhouette(format!(
            "layer `{}` has no filled area",
            layer.name
        )));
    }
    let components = polys.len();
    if components > 1 {
        log::warn!(
            "layer `{}` silhouette has {components} components; keeping the largest",
            layer.name
        );
    }
    let best = (0..polys.len())
        .max_by(|&a, &b| polys[a].area().total_cmp(&polys[b].area()))
        .expect("nonempty");
    Ok(Contour { polygon: polys.swap_remove(best), components })
}

/// Silhouette of the named layers of `doc` (all layers when `names` is
/// empty). Path layers are unioned; a raster layer is traced at
/// `alpha_threshold` and placed at its origin.
pub fn group_contour(
    doc: &ClipartDocument,
    names: &[String],
    flatten_tol: f64,
    alpha_threshold: f64,
) -> Result<Contour, DocumentError> {
    let chosen: Vec<&Layer> =
        doc.layers.iter().filter(|l| names.is_empty() || names.contains(&l.name)).collect();
    if let Some(missing) = names.iter().find(|n| !doc.layers.iter().any(|l| &l.name == *n)) {
        return Err(DocumentError::Invalid(format!("no layer named `{missing}`")));
    }
    let rasters: Vec<&RasterPatch> = chosen
        .iter()
        .filter_map(|l| match &l.content {
            LayerContent::Raster(r) => Some(r),
            LayerContent::Paths(_) => None,
        })
        .collect();
    match rasters.as_slice() {
        [] => {}
        [r] if chosen.len() == 1 => {
            let traced = trace_bitmap(&r.image, alpha_threshold)?;
            let mut polygon = traced.polygon;
            for v in polygon.vertices.iter_mut().chain(polygon.holes.iter_mut().flatten()) {
                *v = *v + r.origin;
            }
            return Ok(Contour { polygon, components: traced.components });
        }
        _ => return Err(DocumentError::Unsupported("raster layers grouped with other layers".into())),
    }
    let merged = Layer {
        name: chosen.iter().map(|l| l.name.as_str()).collect::<Vec<_>>().join("+"),
        z_order: 0,
        content: LayerContent::Paths(chosen.iter().flat_map(|l| l.paths().iter().cloned()).collect()),
    };
    extract_contour(&merged, flatten_tol)
}
