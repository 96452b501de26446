//! Two-step closed-form as-rigid-as-possible deformation with exact adjoints.
//!
//! Step 1 minimises a similarity-invariant energy: every triangle vertex is
//! expressed in the frame of its opposite edge at rest, and the deformed
//! vertex is asked to keep those local coordinates. Step 2 fits each rest
//! triangle to the step-1 result with a similarity, normalises it to a
//! rotation `R_t`, and solves the edge-Laplacian system that makes every
//! deformed edge match `R_t` applied to its rest edge. Handles are hard
//! constraints eliminated from both systems; the two factorisations depend
//! only on the mesh and the handle set and are reused for every solve.
//!
//! Each triangle's energy is weighted by its rest area.

pub mod sparse;

use std::collections::BTreeMap;

use crate::geometry::Point2D;
use crate::rigging::TriangleMesh;
use sparse::{SkylineCholesky, SymmetricBuilder};

/// Fitted similarities with scale below this fall back to the identity
/// rotation.
pub const ROTATION_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArapError {
    #[error("at least 2 handles are required, got {0}")]
    TooFewHandles(usize),
    #[error("handle {0} is not a mesh vertex")]
    BadHandle(usize),
    #[error("handle {0} is listed twice")]
    DuplicateHandle(usize),
    #[error("singular system in {stage}: {source}")]
    Singular {
        stage: &'static str,
        #[source]
        source: sparse::NotPositiveDefinite,
    },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite handle target")]
    NonFinite,
    #[error("backward called with targets that do not match the forward solve")]
    StaleCache,
}

/// Deformed vertex positions, index-aligned with the rest mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct DeformedPose {
    pub vertices: Vec<Point2D>,
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    Free(usize),
    Handle(usize),
}

#[derive(Clone, Debug)]
struct TriangleData {
    verts: [usize; 3],
    /// Rest vertices relative to the rest centroid.
    centred: [Point2D; 3],
    /// `Σ ‖centred‖²`.
    norm: f64,
    weight: f64,
}

/// Precomputed ARAP systems for one mesh and one handle set.
#[derive(Clone, Debug)]
pub struct ArapFactorization {
    rest: Vec<Point2D>,
    handles: Vec<usize>,
    slots: Vec<Slot>,
    free: Vec<usize>,
    tris: Vec<TriangleData>,
    g_ff: SkylineCholesky,
    /// Per free coordinate `2k + c`: `(2h + c', G)` couplings to handles.
    g_fh: Vec<Vec<(usize, f64)>>,
    l_ff: SkylineCholesky,
    /// Per free vertex: `(h, L)` couplings to handles.
    l_fh: Vec<Vec<(usize, f64)>>,
}

/// Intermediate state of one forward solve, consumed by the backward pass.
#[derive(Clone, Debug)]
pub struct ArapSolve {
    pub pose: DeformedPose,
    targets: Vec<Point2D>,
    /// Per triangle `(a, b)` of the fitted similarity `[a −b; b a]`.
    fits: Vec<(f64, f64)>,
}

impl ArapSolve {
    pub fn targets(&self) -> &[Point2D] {
        &self.targets
    }

    /// Smallest fitted similarity scale; near zero the rotation projection
    /// is not differentiable.
    pub fn min_fit_scale(&self) -> f64 {
        self.fits.iter().map(|&(a, b)| a.hypot(b)).fold(f64::INFINITY, f64::min)
    }
}

fn perp(p: Point2D) -> Point2D {
    Point2D::new(-p.y, p.x)
}

impl ArapFactorization {
    pub fn new(mesh: &TriangleMesh, handles: &[usize]) -> Result<Self, ArapError> {
        let n = mesh.vertices.len();
        if handles.len() < 2 {
            return Err(ArapError::TooFewHandles(handles.len()));
        }
        let mut slots = vec![Slot::Free(usize::MAX); n];
        for (h, &v) in handles.iter().enumerate() {
            if v >= n {
                return Err(ArapError::BadHandle(v));
            }
            if matches!(slots[v], Slot::Handle(_)) {
                return Err(ArapError::DuplicateHandle(v));
            }
            slots[v] = Slot::Handle(h);
        }
        let mut free = Vec::with_capacity(n - handles.len());
        for (v, slot) in slots.iter_mut().enumerate() {
            if let Slot::Free(k) = slot {
                *k = free.len();
                free.push(v);
            }
        }

        let rest = &mesh.vertices;
        let tris: Vec<TriangleData> = mesh
            .triangles
            .iter()
            .map(|&t| {
                let p = t.map(|v| rest[v]);
                let c = (p[0] + p[1] + p[2]) * (1.0 / 3.0);
                let centred = p.map(|q| q - c);
                let norm = centred.iter().map(|q| q.norm_sq()).sum();
                let weight = 0.5 * crate::geometry::orient2d(p[0], p[1], p[2]).abs();
                TriangleData { verts: t, centred, norm, weight }
            })
            .collect();

        // Step 1: similarity-invariant quadratic form over 2n interleaved coords.
        let mut g: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for t in &tris {
            let p = t.verts.map(|v| rest[v]);
            for i in 0..3 {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                let e = p[k] - p[j];
                let d = p[i] - p[j];
                let e2 = e.norm_sq();
                let x = d.dot(e) / e2;
                let y = d.dot(perp(e)) / e2;
                // residual = Σ_m C_m v'_m with C = αI + βP, P the quarter turn.
                let coeffs = [(i, 1.0, 0.0), (j, x - 1.0, y), (k, -x, -y)];
                for &(m, am, bm) in &coeffs {
                    for &(q, aq, bq) in &coeffs {
                        // (αm I + βm P)ᵀ(αq I + βq P) = (αmαq + βmβq) I + (αmβq − βmαq) P
                        let s = t.weight * (am * aq + bm * bq);
                        let r = t.weight * (am * bq - bm * aq);
                        let (vm, vq) = (t.verts[m], t.verts[q]);
                        *g.entry((2 * vm, 2 * vq)).or_insert(0.0) += s;
                        *g.entry((2 * vm + 1, 2 * vq + 1)).or_insert(0.0) += s;
                        // P = [0 −1; 1 0]
                        *g.entry((2 * vm, 2 * vq + 1)).or_insert(0.0) -= r;
                        *g.entry((2 * vm + 1, 2 * vq)).or_insert(0.0) += r;
                    }
                }
            }
        }
        let coord_slot = |c: usize| -> Slot {
            match slots[c / 2] {
                Slot::Free(k) => Slot::Free(2 * k + c % 2),
                Slot::Handle(h) => Slot::Handle(2 * h + c % 2),
            }
        };
        let mut g_ff_b = SymmetricBuilder::new(2 * free.len());
        let mut g_fh = vec![Vec::new(); 2 * free.len()];
        for (&(r, c), &v) in &g {
            match (coord_slot(r), coord_slot(c)) {
                (Slot::Free(a), Slot::Free(b)) if a >= b => g_ff_b.add(a, b, v),
                (Slot::Free(a), Slot::Handle(h)) => g_fh[a].push((h, v)),
                _ => {}
            }
        }
        let g_ff = SkylineCholesky::factor(&g_ff_b)
            .map_err(|source| ArapError::Singular { stage: "similarity fit", source })?;

        // Step 2: area-weighted edge Laplacian.
        let mut l: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for t in &tris {
            for e in 0..3 {
                let (i, j) = (t.verts[e], t.verts[(e + 1) % 3]);
                *l.entry((i, i)).or_insert(0.0) += t.weight;
                *l.entry((j, j)).or_insert(0.0) += t.weight;
                *l.entry((i, j)).or_insert(0.0) -= t.weight;
                *l.entry((j, i)).or_insert(0.0) -= t.weight;
            }
        }
        let mut l_ff_b = SymmetricBuilder::new(free.len());
        let mut l_fh = vec![Vec::new(); free.len()];
        for (&(r, c), &v) in &l {
            match (slots[r], slots[c]) {
                (Slot::Free(a), Slot::Free(b)) if a >= b => l_ff_b.add(a, b, v),
                (Slot::Free(a), Slot::Handle(h)) => l_fh[a].push((h, v)),
                _ => {}
            }
        }
        let l_ff = SkylineCholesky::factor(&l_ff_b)
            .map_err(|source| ArapError::Singular { stage: "scale adjustment", source })?;

        Ok(Self {
            rest: rest.clone(),
            handles: handles.to_vec(),
            slots,
            free,
            tris,
            g_ff,
            g_fh,
            l_ff,
            l_fh,
        })
    }

    pub fn handles(&self) -> &[usize] {
        &self.handles
    }

    pub fn rest(&self) -> &[Point2D] {
        &self.rest
    }

    fn check_targets(&self, targets: &[Point2D]) -> Result<(), ArapError> {
        if targets.len() != self.handles.len() {
            return Err(ArapError::LengthMismatch { expected: self.handles.len(), got: targets.len() });
        }
        if targets.iter().any(|p| !p.is_finite()) {
            return Err(ArapError::NonFinite);
        }
        Ok(())
    }

    fn position(&self, v: usize, free: &[Point2D], targets: &[Point2D]) -> Point2D {
        match self.slots[v] {
            Slot::Free(k) => free[k],
            Slot::Handle(h) => targets[h],
        }
    }

    /// Deforms the mesh so that handle `h` lands on `targets[h]`.
    ///
    /// Targets bitwise equal to the rest handles return the rest pose exactly.
    pub fn solve(&self, targets: &[Point2D]) -> Result<ArapSolve, ArapError> {
        self.check_targets(targets)?;
        let q: Vec<f64> = targets.iter().flat_map(|p| [p.x, p.y]).collect();

        let rhs1: Vec<f64> =
            self.g_fh.iter().map(|row| -row.iter().map(|&(h, v)| v * q[h]).sum::<f64>()).collect();
        let u1 = self.g_ff.solve(&rhs1);
        let step1: Vec<Point2D> = u1.chunks_exact(2).map(|c| Point2D::new(c[0], c[1])).collect();

        let mut fits = Vec::with_capacity(self.tris.len());
        let mut bx = vec![0.0; self.free.len()];
        let mut by = vec![0.0; self.free.len()];
        for t in &self.tris {
            let (mut a, mut b) = (0.0, 0.0);
            for k in 0..3 {
                let p = self.position(t.verts[k], &step1, targets);
                a += t.centred[k].dot(p);
                b += t.centred[k].cross(p);
            }
            a /= t.norm;
            b /= t.norm;
            fits.push((a, b));
            let (c, s) = rotation(a, b);
            for e in 0..3 {
                let (i, j) = (t.verts[e], t.verts[(e + 1) % 3]);
                let d = self.rest[i] - self.rest[j];
                let rd = Point2D::new(c * d.x - s * d.y, s * d.x + c * d.y) * t.weight;
                if let Slot::Free(k) = self.slots[i] {
                    bx[k] += rd.x;
                    by[k] += rd.y;
                }
                if let Slot::Free(k) = self.slots[j] {
                    bx[k] -= rd.x;
                    by[k] -= rd.y;
                }
            }
        }
        for (k, row) in self.l_fh.iter().enumerate() {
            for &(h, v) in row {
                bx[k] -= v * targets[h].x;
                by[k] -= v * targets[h].y;
            }
        }
        let ux = self.l_ff.solve(&bx);
        let uy = self.l_ff.solve(&by);

        let identity = self.handles.iter().zip(targets).all(|(&v, t)| self.rest[v] == *t);
        let vertices = if identity {
            self.rest.clone()
        } else {
            (0..self.rest.len())
                .map(|v| match self.slots[v] {
                    Slot::Free(k) => Point2D::new(ux[k], uy[k]),
                    Slot::Handle(h) => targets[h],
                })
                .collect()
        };
        Ok(ArapSolve { pose: DeformedPose { vertices }, targets: targets.to_vec(), fits })
    }

    /// Gradient with respect to the handle targets of a scalar loss whose
    /// gradient with respect to the output vertices is `upstream`.
    pub fn backward(
        &self,
        solve: &ArapSolve,
        targets: &[Point2D],
        upstream: &[Point2D],
    ) -> Result<Vec<Point2D>, ArapError> {
        if targets.len() != solve.targets.len()
            || targets.iter().zip(&solve.targets).any(|(a, b)| a != b)
        {
            return Err(ArapError::StaleCache);
        }
        if upstream.len() != self.rest.len() {
            return Err(ArapError::LengthMismatch { expected: self.rest.len(), got: upstream.len() });
        }
        let nh = self.handles.len();
        let mut qbar = vec![Point2D::ZERO; nh];
        for (h, &v) in self.handles.iter().enumerate() {
            qbar[h] += upstream[v];
        }

        // Step 2 adjoint: L_ff λ = ū_f per coordinate.
        let ufx: Vec<f64> = self.free.iter().map(|&v| upstream[v].x).collect();
        let ufy: Vec<f64> = self.free.iter().map(|&v| upstream[v].y).collect();
        let lx = self.l_ff.solve(&ufx);
        let ly = self.l_ff.solve(&ufy);
        for (k, row) in self.l_fh.iter().enumerate() {
            for &(h, v) in row {
                qbar[h].x -= v * lx[k];
                qbar[h].y -= v * ly[k];
            }
        }
        let lambda = |v: usize| match self.slots[v] {
            Slot::Free(k) => Point2D::new(lx[k], ly[k]),
            Slot::Handle(_) => Point2D::ZERO,
        };

        // Through the rotations and the similarity fits into step-1 positions.
        let mut u1bar_free = vec![0.0; 2 * self.free.len()];
        for (t, &(a, b)) in self.tris.iter().zip(&solve.fits) {
            let r = a.hypot(b);
            if r < ROTATION_EPS {
                continue;
            }
            let (mut cbar, mut sbar) = (0.0, 0.0);
            for e in 0..3 {
                let (i, j) = (t.verts[e], t.verts[(e + 1) % 3]);
                let d = self.rest[i] - self.rest[j];
                let g = (lambda(i) - lambda(j)) * t.weight;
                cbar += g.dot(d);
                sbar += g.dot(perp(d));
            }
            let r3 = r * r * r;
            let abar = (cbar * b * b - sbar * a * b) / r3;
            let bbar = (-cbar * a * b + sbar * a * a) / r3;
            for k in 0..3 {
                let rc = t.centred[k];
                let grad = (rc * abar + perp(rc) * bbar) * (1.0 / t.norm);
                match self.slots[t.verts[k]] {
                    Slot::Free(f) => {
                        u1bar_free[2 * f] += grad.x;
                        u1bar_free[2 * f + 1] += grad.y;
                    }
                    Slot::Handle(h) => qbar[h] += grad,
                }
            }
        }

        // Step 1 adjoint: G_ff μ = ū1_f, then q̄ −= G_hf μ.
        let mu = self.g_ff.solve(&u1bar_free);
        for (r, row) in self.g_fh.iter().enumerate() {
            for &(hc, v) in row {
                let d = v * mu[r];
                if hc % 2 == 0 {
                    qbar[hc / 2].x -= d;
                } else {
                    qbar[hc / 2].y -= d;
                }
            }
        }
        Ok(qbar)
    }
}

#[inline]
fn rotation(a: f64, b: f64) -> (f64, f64) {
    let r = a.hypot(b);
    if r < ROTATION_EPS {
        (1.0, 0.0)
    } else {
        (a / r, b / r)
    }
}

/// Linear blend skinning over keypoint handles.
#[derive(Clone, Debug)]
pub struct LbsModel {
    rest: Vec<Point2D>,
    handle_rest: Vec<Point2D>,
    /// Sparse weight rows `(handle, w)` per vertex.
    weights: Vec<Vec<(usize, f64)>>,
}

impl LbsModel {
    pub fn new(mesh: &TriangleMesh, handles: &[usize], weights: &[Vec<f64>]) -> Result<Self, ArapError> {
        if weights.len() != mesh.vertices.len() {
            return Err(ArapError::LengthMismatch { expected: mesh.vertices.len(), got: weights.len() });
        }
        let rows = weights
            .iter()
            .map(|row| {
                if row.len() != handles.len() {
                    return Err(ArapError::LengthMismatch { expected: handles.len(), got: row.len() });
                }
                Ok(row.iter().enumerate().filter(|(_, &w)| w != 0.0).map(|(k, &w)| (k, w)).collect())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            rest: mesh.vertices.clone(),
            handle_rest: handles.iter().map(|&v| mesh.vertices[v]).collect(),
            weights: rows,
        })
    }

    /// `v = rest_v + Σ_k w_vk (target_k − rest_k)`.
    pub fn solve(&self, targets: &[Point2D]) -> Result<DeformedPose, ArapError> {
        if targets.len() != self.handle_rest.len() {
            return Err(ArapError::LengthMismatch { expected: self.handle_rest.len(), got: targets.len() });
        }
        let disp: Vec<Point2D> = targets.iter().zip(&self.handle_rest).map(|(t, r)| *t - *r).collect();
        let vertices = self
            .rest
            .iter()
            .zip(&self.weights)
            .map(|(&r, row)| row.iter().fold(r, |acc, &(k, w)| acc + disp[k] * w))
            .collect();
        Ok(DeformedPose { vertices })
    }

    pub fn backward(&self, upstream: &[Point2D]) -> Vec<Point2D> {
        let mut g = vec![Point2D::ZERO; self.handle_rest.len()];
        for (u, row) in upstream.iter().zip(&self.weights) {
            for &(k, w) in row {
                g[k] += *u * w;
            }
        }
        g
    }
}

/// Convenience wrapper for an LBS solve from dense weights.
pub fn lbs_solve(
    mesh: &TriangleMesh,
    handles: &[usize],
    weights: &[Vec<f64>],
    targets: &[Point2D],
) -> Result<DeformedPose, ArapError> {
    LbsModel::new(mesh, handles, weights)?.solve(targets)
}

/// Mesh deformation driven by keypoint handles.
#[derive(Clone, Debug)]
pub enum Deformer {
    Arap(ArapFactorization),
    Lbs(LbsModel),
    /// A single handle can only translate the mesh.
    Translate { rest: Vec<Point2D>, handle_rest: Point2D },
}

/// Result of [`Deformer::deform`], kept for the backward pass.
#[derive(Clone, Debug)]
pub struct Deformation {
    pub pose: DeformedPose,
    targets: Vec<Point2D>,
    arap: Option<ArapSolve>,
}

impl Deformer {
    /// ARAP when there are at least two handles, translation otherwise.
    pub fn arap(mesh: &TriangleMesh, handles: &[usize]) -> Result<Self, ArapError> {
        match handles {
            [] => Err(ArapError::TooFewHandles(0)),
            [h] => Ok(Self::Translate { rest: mesh.vertices.clone(), handle_rest: mesh.vertices[*h] }),
            _ => Ok(Self::Arap(ArapFactorization::new(mesh, handles)?)),
        }
    }

    pub fn deform(&self, targets: &[Point2D]) -> Result<Deformation, ArapError> {
        let (pose, arap) = match self {
            Deformer::Arap(f) => {
                let s = f.solve(targets)?;
                (s.pose.clone(), Some(s))
            }
            Deformer::Lbs(m) => (m.solve(targets)?, None),
            Deformer::Translate { rest, handle_rest } => {
                if targets.len() != 1 {
                    return Err(ArapError::LengthMismatch { expected: 1, got: targets.len() });
                }
                let d = targets[0] - *handle_rest;
                let vertices =
                    if d == Point2D::ZERO { rest.clone() } else { rest.iter().map(|&p| p + d).collect() };
                (DeformedPose { vertices }, None)
            }
        };
        Ok(Deformation { pose, targets: targets.to_vec(), arap })
    }

    pub fn backward(&self, d: &Deformation, upstream: &[Point2D]) -> Result<Vec<Point2D>, ArapError> {
        match (self, &d.arap) {
            (Deformer::Arap(f), Some(s)) => f.backward(s, &d.targets, upstream),
            (Deformer::Arap(_), None) => Err(ArapError::StaleCache),
            (Deformer::Lbs(m), _) => Ok(m.backward(upstream)),
            (Deformer::Translate { .. }, _) => {
                Ok(vec![upstream.iter().fold(Point2D::ZERO, |acc, &u| acc + u)])
            }
        }
    }
}
