use std::collections::HashSet;

use spade::handles::FixedVertexHandle;
use spade::{
    AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters,
    Triangulation,
};

use super::{BarycentricBinding, BindingEntry, RigError, Skeleton, TriangleMesh};
use crate::document::Polygon;
use crate::geometry::{barycentric, point_segment_distance, BBox, Point2D};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshOptions {
    /// Refinement target for the smallest angle. Values above ~30° may not
    /// terminate and are capped by a vertex budget.
    pub min_angle_deg: f64,
    pub max_area: f64,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self { min_angle_deg: 20.0, max_area: f64::INFINITY }
    }
}

const BOUNDARY_EPS: f64 = 1e-6;

/// Conforming constrained Delaunay triangulation of `poly` with every
/// keypoint as a vertex, refined to the requested quality.
pub fn triangulate(
    poly: &Polygon,
    keypoints: &[Point2D],
    opts: &MeshOptions,
) -> Result<TriangleMesh, RigError> {
    let mut poly = poly.clone();
    poly.normalize_orientation();
    let diag = poly.bbox().map_or(0.0, |b| b.diagonal());
    if poly.vertices.len() < 3 || !(poly.area() > 0.0) {
        return Err(RigError::Degenerate("polygon has no area".into()));
    }

    let mut kps = keypoints.to_vec();
    for (index, k) in kps.iter_mut().enumerate() {
        let d = poly.boundary_distance(*k);
        if d <= BOUNDARY_EPS {
            *k = nudge_inward(&poly, *k, 1e-4 * diag);
        } else if !poly.contains(*k) {
            return Err(RigError::KeypointOutside { index, x: k.x, y: k.y });
        }
    }
    for i in 0..kps.len() {
        for j in i + 1..kps.len() {
            if kps[i] == kps[j] {
                return Err(RigError::DuplicateKeypoint(i, j));
            }
        }
    }

    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
    let insert = |cdt: &mut ConstrainedDelaunayTriangulation<Point2<f64>>, p: Point2D| {
        cdt.insert(Point2::new(p.x, p.y)).map_err(|e| RigError::Triangulation(format!("{e:?}")))
    };
    for ring in std::iter::once(&poly.vertices).chain(poly.holes.iter()) {
        let handles: Vec<FixedVertexHandle> =
            ring.iter().map(|&p| insert(&mut cdt, p)).collect::<Result<_, _>>()?;
        for i in 0..handles.len() {
            let (a, b) = (handles[i], handles[(i + 1) % handles.len()]);
            if a == b {
                continue;
            }
            if !cdt.can_add_constraint(a, b) {
                return Err(RigError::NotSimple(i, (i + 1) % handles.len()));
            }
            cdt.add_constraint(a, b);
        }
    }
    let mut kp_handles = Vec::with_capacity(kps.len());
    for &k in &kps {
        kp_handles.push(insert(&mut cdt, k)?);
    }

    let mut params = RefinementParameters::<f64>::new()
        .with_angle_limit(AngleLimit::from_deg(opts.min_angle_deg.max(0.0)))
        .exclude_outer_faces(true)
        .with_max_additional_vertices(200_000);
    if opts.max_area.is_finite() && opts.max_area > 0.0 {
        params = params.with_max_allowed_area(opts.max_area);
    }
    let result = cdt.refine(params);
    if !result.refinement_complete {
        log::warn!("mesh refinement hit its vertex budget; quality target not met everywhere");
    }
    let excluded: HashSet<_> = result.excluded_faces.into_iter().collect();

    let mut remap = vec![usize::MAX; cdt.num_vertices()];
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix()) {
            continue;
        }
        let vs = face.vertices();
        let mut tri = [0usize; 3];
        for (k, v) in vs.iter().enumerate() {
            let idx = v.fix().index();
            if remap[idx] == usize::MAX {
                remap[idx] = vertices.len();
                let p = v.position();
                vertices.push(Point2D::new(p.x, p.y));
            }
            tri[k] = remap[idx];
        }
        let area = crate::geometry::orient2d(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
        if area < 0.0 {
            tri.swap(1, 2);
        } else if area == 0.0 {
            continue;
        }
        triangles.push(tri);
    }
    let keypoint_vertex = kp_handles
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let v = remap[h.index()];
            if v == usize::MAX {
                Err(RigError::KeypointOutside { index: i, x: kps[i].x, y: kps[i].y })
            } else {
                Ok(v)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mesh = TriangleMesh { vertices, triangles, keypoint_vertex };
    mesh.validate()?;
    Ok(mesh)
}

fn nudge_inward(poly: &Polygon, p: Point2D, step: f64) -> Point2D {
    let mut best = (f64::INFINITY, Point2D::ZERO);
    // Outer ring is CCW and holes CW, so the interior is always to the left.
    for (a, b) in poly.edges() {
        let d = point_segment_distance(p, a, b);
        if d < best.0 {
            best = (d, (b - a).perp().normalized().unwrap_or(Point2D::ZERO));
        }
    }
    p + best.1 * step
}

/// Binds sites that lie inside the mesh (within 1e-6).
pub fn bind(mesh: &TriangleMesh, sites: &[Point2D]) -> Result<BarycentricBinding, RigError> {
    bind_impl(mesh, sites, BOUNDARY_EPS)
}

/// Like [`bind`], but sites outside the mesh take the nearest triangle with
/// extrapolated (possibly negative) weights. Bézier handles of vector art
/// routinely lie outside the filled silhouette.
pub fn bind_extrapolated(mesh: &TriangleMesh, sites: &[Point2D]) -> Result<BarycentricBinding, RigError> {
    bind_impl(mesh, sites, f64::INFINITY)
}

fn bind_impl(mesh: &TriangleMesh, sites: &[Point2D], max_dist: f64) -> Result<BarycentricBinding, RigError> {
    let boxes: Vec<BBox> = mesh
        .triangles
        .iter()
        .map(|t| BBox::from_points(t.iter().map(|&v| &mesh.vertices[v])).expect("three points"))
        .collect();
    let mut entries = Vec::with_capacity(sites.len());
    for (index, &s) in sites.iter().enumerate() {
        let mut found = None;
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let bb = &boxes[t];
            if s.x < bb.min.x - 1e-9 || s.x > bb.max.x + 1e-9 || s.y < bb.min.y - 1e-9 || s.y > bb.max.y + 1e-9 {
                continue;
            }
            let [a, b, c] = tri.map(|v| mesh.vertices[v]);
            if let Some(w) = barycentric(s, a, b, c) {
                if w.iter().all(|&x| x >= -1e-9) {
                    found = Some(BindingEntry { triangle: t, weights: w });
                    break;
                }
            }
        }
        if found.is_none() {
            let (t, d) = nearest_triangle(mesh, s);
            if d > max_dist {
                return Err(RigError::SiteOutside { index, x: s.x, y: s.y });
            }
            let [a, b, c] = mesh.triangles[t].map(|v| mesh.vertices[v]);
            let mut w = barycentric(s, a, b, c).expect("mesh triangles are non-degenerate");
            if d <= BOUNDARY_EPS {
                // Numerically on the boundary: project onto the triangle.
                for x in &mut w {
                    *x = x.max(0.0);
                }
                let sum: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= sum);
            }
            found = Some(BindingEntry { triangle: t, weights: w });
        }
        entries.push(found.expect("assigned"));
    }
    Ok(BarycentricBinding { entries })
}

fn nearest_triangle(mesh: &TriangleMesh, s: Point2D) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let [a, b, c] = tri.map(|v| mesh.vertices[v]);
        let d = point_segment_distance(s, a, b)
            .min(point_segment_distance(s, b, c))
            .min(point_segment_distance(s, c, a));
        if d < best.1 {
            best = (t, d);
        }
    }
    best
}

/// Normalised inverse-square-distance weights of every mesh vertex over the
/// keypoints. A vertex on a keypoint gets that keypoint exclusively.
pub fn lbs_weights(mesh: &TriangleMesh, skel: &Skeleton) -> Vec<Vec<f64>> {
    mesh.vertices
        .iter()
        .map(|&v| {
            let d2: Vec<f64> = skel.keypoints.iter().map(|&k| (v - k).norm_sq()).collect();
            if let Some(hit) = d2.iter().position(|&d| d == 0.0) {
                let mut row = vec![0.0; d2.len()];
                row[hit] = 1.0;
                return row;
            }
            let inv: Vec<f64> = d2.iter().map(|&d| 1.0 / d).collect();
            let s: f64 = inv.iter().sum();
            inv.into_iter().map(|w| w / s).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2D {
        Point2D::new(x, y)
    }

    fn square() -> Polygon {
        Polygon::new(vec![p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)])
    }

    #[test]
    fn centre_keypoint_fans_four_triangles() {
        let opts = MeshOptions { min_angle_deg: 0.0, max_area: f64::INFINITY };
        let m = triangulate(&square(), &[p(0.5, 0.5)], &opts).unwrap();
        assert_eq!(m.triangles.len(), 4);
        assert_eq!(m.vertices[m.keypoint_vertex[0]], p(0.5, 0.5));
        assert!((m.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quality_refinement_bounds_angles() {
        let opts = MeshOptions { min_angle_deg: 20.0, max_area: f64::INFINITY };
        let m = triangulate(&square(), &[p(0.3, 0.6)], &opts).unwrap();
        for t in &m.triangles {
            let [a, b, c] = t.map(|v| m.vertices[v]);
            for (x, y, z) in [(a, b, c), (b, c, a), (c, a, b)] {
                let ang = (y - x).cross(z - x).atan2((y - x).dot(z - x)).abs().to_degrees();
                assert!(ang >= 20.0 - 1e-9, "angle {ang}");
            }
        }
    }

    #[test]
    fn keypoint_outside_is_reported() {
        let err = triangulate(&square(), &[p(0.5, 0.5), p(2.0, 0.5)], &MeshOptions::default()).unwrap_err();
        assert!(matches!(err, RigError::KeypointOutside { index: 1, .. }));
    }

    #[test]
    fn boundary_keypoint_is_nudged() {
        let m = triangulate(&square(), &[p(0.5, 0.0)], &MeshOptions::default()).unwrap();
        let k = m.vertices[m.keypoint_vertex[0]];
        assert!(k.y > 0.0 && k.y < 1e-3);
    }

    #[test]
    fn binding_at_vertex_and_centroid() {
        let opts = MeshOptions { min_angle_deg: 0.0, max_area: f64::INFINITY };
        let m = triangulate(&square(), &[p(0.5, 0.5)], &opts).unwrap();
        let [a, b, c] = m.triangles[0].map(|v| m.vertices[v]);
        let g = (a + b + c) * (1.0 / 3.0);
        let bnd = bind(&m, &[m.vertices[0], g]).unwrap();
        let w0 = bnd.entries[0].weights;
        assert_eq!(w0.iter().filter(|&&w| w == 1.0).count(), 1);
        assert_eq!(w0.iter().filter(|&&w| w == 0.0).count(), 2);
        for w in bnd.entries[1].weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(bind(&m, &[p(3.0, 3.0)]).is_err());
        assert!(bind_extrapolated(&m, &[p(3.0, 3.0)]).is_ok());
    }
}
