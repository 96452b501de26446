//! Rigging: skeleton extraction, skeleton simplification, triangulation with
//! keypoints as required vertices, and barycentric binding of artwork.

mod mesh;
mod skeleton;

use serde::{Deserialize, Serialize};

use crate::document::Polygon;
use crate::geometry::{signed_area, Point2D};

pub use mesh::{bind, bind_extrapolated, lbs_weights, triangulate, MeshOptions};
pub use skeleton::{
    prune_outer_bones, simplify_ring, simplify_skeleton, simplify_skeleton_within, straight_skeleton, SkeletonNode,
    StraightSkeleton,
};

#[derive(Debug, thiserror::Error)]
pub enum RigError {
    #[error("degenerate polygon: {0}")]
    Degenerate(String),
    #[error("polygon is not simple: edges {0} and {1} intersect")]
    NotSimple(usize, usize),
    #[error("keypoint {index} at ({x}, {y}) lies outside the shape")]
    KeypointOutside { index: usize, x: f64, y: f64 },
    #[error("keypoints {0} and {1} coincide")]
    DuplicateKeypoint(usize, usize),
    #[error("site {index} at ({x}, {y}) is outside the mesh")]
    SiteOutside { index: usize, x: f64, y: f64 },
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("straight skeleton did not terminate after {0} events")]
    NoConvergence(usize),
    #[error("triangulation failed: {0}")]
    Triangulation(String),
    #[error("keypoint file: {0}")]
    KeypointFile(String),
}

/// Keypoints and bones. `rest_lengths[b]` belongs to `bones[b]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub keypoints: Vec<Point2D>,
    pub bones: Vec<(usize, usize)>,
    pub rest_lengths: Vec<f64>,
}

impl Skeleton {
    /// Builds a skeleton, normalising bone pairs to `(min, max)` and
    /// recomputing rest lengths. Fails if any invariant is violated.
    pub fn new(keypoints: Vec<Point2D>, bones: Vec<(usize, usize)>) -> Result<Self, RigError> {
        let mut bones: Vec<(usize, usize)> =
            bones.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        bones.sort_unstable();
        bones.dedup();
        let rest_lengths = bones
            .iter()
            .map(|&(i, j)| match (keypoints.get(i), keypoints.get(j)) {
                (Some(a), Some(b)) => Ok(a.distance(*b)),
                _ => Err(RigError::InvalidSkeleton(format!("bone ({i}, {j}) out of range"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let s = Self { keypoints, bones, rest_lengths };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), RigError> {
        if self.keypoints.is_empty() {
            return Err(RigError::InvalidSkeleton("no keypoints".into()));
        }
        if self.keypoints.iter().any(|p| !p.is_finite()) {
            return Err(RigError::InvalidSkeleton("non-finite keypoint".into()));
        }
        if self.rest_lengths.len() != self.bones.len() {
            return Err(RigError::InvalidSkeleton("rest length count mismatch".into()));
        }
        for (&(i, j), &l) in self.bones.iter().zip(&self.rest_lengths) {
            if i == j || i >= self.keypoints.len() || j >= self.keypoints.len() {
                return Err(RigError::InvalidSkeleton(format!("bad bone ({i}, {j})")));
            }
            if !(l > 0.0) {
                return Err(RigError::InvalidSkeleton(format!("bone ({i}, {j}) has zero length")));
            }
        }
        if self.component_count() > 1 {
            return Err(RigError::InvalidSkeleton("bone graph is disconnected".into()));
        }
        Ok(())
    }

    fn component_count(&self) -> usize {
        let mut uf = UnionFind::new(self.keypoints.len());
        for &(i, j) in &self.bones {
            uf.union(i, j);
        }
        (0..self.keypoints.len()).filter(|&i| uf.find(i) == i).count()
    }

    /// Bone lengths for an arbitrary pose of the keypoints.
    pub fn bone_lengths(&self, pose: &[Point2D]) -> Vec<f64> {
        self.bones.iter().map(|&(i, j)| pose[i].distance(pose[j])).collect()
    }

    /// Loads a user-supplied rig (TOML with `keypoints = [[x, y], ...]` and
    /// `bones = [[i, j], ...]`).
    pub fn from_toml(text: &str) -> Result<Self, RigError> {
        #[derive(Deserialize)]
        struct File {
            keypoints: Vec<[f64; 2]>,
            #[serde(default)]
            bones: Vec<[usize; 2]>,
        }
        let f: File = toml::from_str(text).map_err(|e| RigError::KeypointFile(e.to_string()))?;
        Self::new(
            f.keypoints.into_iter().map(|[x, y]| Point2D::new(x, y)).collect(),
            f.bones.into_iter().map(|[a, b]| (a, b)).collect(),
        )
    }

    pub fn to_toml(&self) -> String {
        let mut s = String::from("keypoints = [\n");
        for p in &self.keypoints {
            s.push_str(&format!("  [{:?}, {:?}],\n", p.x, p.y));
        }
        s.push_str("]\nbones = [\n");
        for &(i, j) in &self.bones {
            s.push_str(&format!("  [{i}, {j}],\n"));
        }
        s.push_str("]\n");
        s
    }
}

/// Deformable puppet: rest vertices, CCW triangles, and the vertex carrying
/// each keypoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<Point2D>,
    pub triangles: Vec<[usize; 3]>,
    pub keypoint_vertex: Vec<usize>,
}

impl TriangleMesh {
    pub fn triangle_area(&self, t: usize, pose: &[Point2D]) -> f64 {
        let [a, b, c] = self.triangles[t];
        0.5 * crate::geometry::orient2d(pose[a], pose[b], pose[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t, &self.vertices)).sum()
    }

    /// Indices of triangles with non-positive signed area under `pose`.
    pub fn inverted_triangles(&self, pose: &[Point2D]) -> Vec<usize> {
        (0..self.triangles.len()).filter(|&t| self.triangle_area(t, pose) <= 0.0).collect()
    }

    /// Undirected edges, each once, in sorted order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Edges used by exactly one triangle.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .collect();
        let mut keyed: Vec<((usize, usize), (usize, usize))> =
            e.drain(..).map(|(a, b)| ((a.min(b), a.max(b)), (a, b))).collect();
        keyed.sort_unstable();
        let mut out = Vec::new();
        let mut i = 0;
        while i < keyed.len() {
            let mut j = i + 1;
            while j < keyed.len() && keyed[j].0 == keyed[i].0 {
                j += 1;
            }
            if j - i == 1 {
                out.push(keyed[i].1);
            }
            i = j;
        }
        out
    }

    pub fn validate(&self) -> Result<(), RigError> {
        let n = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(RigError::Triangulation(format!("triangle {t} index out of range")));
            }
            if self.triangle_area(t, &self.vertices) <= 0.0 {
                return Err(RigError::Triangulation(format!("triangle {t} is not CCW")));
            }
        }
        if self.keypoint_vertex.iter().any(|&v| v >= n) {
            return Err(RigError::Triangulation("keypoint vertex out of range".into()));
        }
        Ok(())
    }
}

/// Per-site triangle and barycentric weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarycentricBinding {
    pub entries: Vec<BindingEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BindingEntry {
    pub triangle: usize,
    pub weights: [f64; 3],
}

impl BarycentricBinding {
    /// Moves every site with its triangle: `p + Σ w_k (v'_k − v_k)`.
    ///
    /// The displacement form keeps the rest pose bit-exact.
    pub fn apply(
        &self,
        mesh: &TriangleMesh,
        rest_sites: &[Point2D],
        pose: &[Point2D],
    ) -> Vec<Point2D> {
        self.entries
            .iter()
            .zip(rest_sites)
            .map(|(e, &p)| {
                let tri = mesh.triangles[e.triangle];
                let mut d = Point2D::ZERO;
                for k in 0..3 {
                    d += (pose[tri[k]] - mesh.vertices[tri[k]]) * e.weights[k];
                }
                p + d
            })
            .collect()
    }

    /// Adjoint of [`apply`](Self::apply): site gradients to vertex gradients.
    pub fn backward(&self, mesh: &TriangleMesh, site_grads: &[Point2D]) -> Vec<Point2D> {
        let mut g = vec![Point2D::ZERO; mesh.vertices.len()];
        for (e, &sg) in self.entries.iter().zip(site_grads) {
            let tri = mesh.triangles[e.triangle];
            for k in 0..3 {
                g[tri[k]] += sg * e.weights[k];
            }
        }
        g
    }
}

/// Options for turning a contour into a rig.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RigOptions {
    /// Skeleton simplification ratio.
    pub rho: f64,
    /// Minimum triangle angle in degrees.
    pub quality: f64,
    /// Maximum triangle area as a fraction of the contour area.
    pub max_area_fraction: f64,
    /// Contour simplification before the straight skeleton, as a fraction of
    /// the bounding-box diagonal. Zero disables it.
    pub skeleton_contour_tol: f64,
}

impl Default for RigOptions {
    fn default() -> Self {
        Self { rho: 0.7, quality: 20.0, max_area_fraction: 1.0 / 150.0, skeleton_contour_tol: 0.005 }
    }
}

/// A rigged shape: skeleton whose keypoints sit on mesh vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rig {
    pub skeleton: Skeleton,
    pub mesh: TriangleMesh,
}

impl Rig {
    /// Rigs a contour automatically, or with `override_skeleton` verbatim.
    pub fn build(
        contour: &Polygon,
        override_skeleton: Option<Skeleton>,
        opts: &RigOptions,
    ) -> Result<Self, RigError> {
        if !(opts.rho > 0.0) {
            return Err(RigError::Parameter(format!("rho must be > 0, got {}", opts.rho)));
        }
        let mut outer = Polygon::new(contour.vertices.clone());
        if !contour.holes.is_empty() {
            log::warn!("dropping {} contour hole(s) for rigging", contour.holes.len());
        }
        outer.normalize_orientation();
        let skeleton = match override_skeleton {
            Some(s) => s,
            None => {
                let diag = outer.bbox().map_or(0.0, |b| b.diagonal());
                let ring = if opts.skeleton_contour_tol > 0.0 {
                    simplify_ring(&outer.vertices, opts.skeleton_contour_tol * diag)
                } else {
                    outer.vertices.clone()
                };
                let raw = straight_skeleton(&Polygon::new(ring))?;
                simplify_skeleton_within(&prune_outer_bones(&raw), opts.rho, &outer)?
            }
        };
        let area = signed_area(&outer.vertices);
        let mesh_opts = MeshOptions {
            min_angle_deg: opts.quality,
            max_area: if opts.max_area_fraction > 0.0 {
                area * opts.max_area_fraction
            } else {
                f64::INFINITY
            },
        };
        let mesh = triangulate(&outer, &skeleton.keypoints, &mesh_opts)?;
        // Keypoints may have been nudged off the boundary.
        let keypoints = mesh.keypoint_vertex.iter().map(|&v| mesh.vertices[v]).collect();
        let skeleton = Skeleton::new(keypoints, skeleton.bones.clone())?;
        Ok(Self { skeleton, mesh })
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    /// Unions the sets; the smaller root index wins.
    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skeleton_rejects_disconnected_graph() {
        let p = Point2D::new;
        let err = Skeleton::new(vec![p(0., 0.), p(1., 0.), p(5., 5.)], vec![(0, 1)]).unwrap_err();
        assert!(err.to_string().contains("disconnected"));
    }

    #[test]
    fn toml_roundtrip() {
        let p = Point2D::new;
        let s = Skeleton::new(vec![p(0.5, 1.0), p(2.0, 3.25), p(4.0, 1.0)], vec![(1, 0), (1, 2)])
            .unwrap();
        let back = Skeleton::from_toml(&s.to_toml()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn boundary_edges_of_two_triangles() {
        let p = Point2D::new;
        let mesh = TriangleMesh {
            vertices: vec![p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
            keypoint_vertex: vec![],
        };
        assert_eq!(mesh.boundary_edges().len(), 4);
        assert_eq!(mesh.edges().len(), 5);
    }
}
