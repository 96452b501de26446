//! Straight skeleton by wavefront simulation, outer-bone pruning, and
//! iterative short-bone collapse.
//!
//! The wavefront of a CCW polygon moves every edge inward at unit speed. A
//! wavefront vertex between edges with inward normals `n1`, `n2` moves with
//! velocity `v` solving `n1·v = n2·v = 1`. Two event kinds change topology:
//! an edge shrinking to zero length, and a reflex vertex reaching a
//! non-incident edge, which splits the loop. All events are recomputed after
//! each one is applied, which is quadratic per event but simple and robust
//! at clipart sizes.

use std::cmp::Ordering;

use super::{RigError, Skeleton, UnionFind};
use crate::document::Polygon;
use crate::geometry::{segments_intersect, signed_area, Point2D};

#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonNode {
    pub position: Point2D,
    /// Wavefront offset at which the node formed; 0 for contour vertices.
    pub time: f64,
    pub contour: bool,
    /// Ids of the contour edges whose wavefronts meet here.
    pub edges: Vec<usize>,
}

/// Raw straight skeleton: contour vertices are nodes `0..n`, followed by
/// interior nodes in creation order.
#[derive(Clone, Debug)]
pub struct StraightSkeleton {
    pub polygon: Vec<Point2D>,
    pub nodes: Vec<SkeletonNode>,
    pub arcs: Vec<(usize, usize)>,
}

impl StraightSkeleton {
    /// Inward unit normal and offset `c` of contour edge `e`: the wavefront of
    /// `e` at time `t` is the line `n·x = c + t`.
    pub fn edge_line(&self, e: usize) -> (Point2D, f64) {
        let n = self.polygon.len();
        let (a, b) = (self.polygon[e], self.polygon[(e + 1) % n]);
        let nrm = (b - a).perp().normalized().unwrap_or(Point2D::ZERO);
        (nrm, nrm.dot(a))
    }

    /// Largest deviation of an interior node's distance to its participating
    /// edges' supporting lines from the node's time.
    pub fn equidistance_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for node in self.nodes.iter().filter(|n| !n.contour) {
            for &e in &node.edges {
                let (n, c) = self.edge_line(e);
                worst = worst.max((n.dot(node.position) - c - node.time).abs());
            }
        }
        worst
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = (usize, &SkeletonNode)> {
        self.nodes.iter().enumerate().filter(|(_, n)| !n.contour)
    }
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    n: Point2D,
    c: f64,
    dir: Point2D,
}

#[derive(Clone, Copy, Debug)]
struct WVert {
    pos: Point2D,
    vel: Point2D,
    node: usize,
    e_prev: usize,
    e_next: usize,
}

#[derive(Clone, Copy, Debug)]
enum EventKind {
    /// The wavefront edge starting at vertex `i` collapses.
    Edge { i: usize },
    /// Reflex vertex `v` hits the wavefront edge starting at vertex `f`.
    Split { v: usize, f: usize },
}

#[derive(Clone, Copy, Debug)]
struct Event {
    time: f64,
    pos: Point2D,
    lp: usize,
    kind: EventKind,
}

struct Wavefront {
    edges: Vec<Edge>,
    nodes: Vec<SkeletonNode>,
    arcs: Vec<(usize, usize)>,
    loops: Vec<Vec<WVert>>,
    t: f64,
    eps: f64,
    eps_area: f64,
}

fn velocity(e1: &Edge, e2: &Edge) -> Point2D {
    let det = e1.n.cross(e2.n);
    if det.abs() < 1e-12 {
        if e1.n.dot(e2.n) > 0.0 {
            return e1.n;
        }
        // Antiparallel neighbours: a zero-width spike. It is removed by the
        // degeneracy cleanup; keep it still meanwhile.
        return Point2D::ZERO;
    }
    Point2D::new((e2.n.y - e1.n.y) / det, (e1.n.x - e2.n.x) / det)
}

impl Wavefront {
    fn vertex(&self, pos: Point2D, node: usize, e_prev: usize, e_next: usize) -> WVert {
        WVert { pos, vel: velocity(&self.edges[e_prev], &self.edges[e_next]), node, e_prev, e_next }
    }

    /// Node at `p` for the current time, reusing one formed at the same place
    /// and time.
    fn node_at(&mut self, p: Point2D, edges: &[usize]) -> usize {
        let t = self.t;
        let eps = self.eps;
        if let Some(i) = self
            .nodes
            .iter()
            .position(|n| !n.contour && (n.time - t).abs() <= eps && n.position.distance(p) <= eps)
        {
            for &e in edges {
                if !self.nodes[i].edges.contains(&e) {
                    self.nodes[i].edges.push(e);
                }
            }
            return i;
        }
        let mut es = edges.to_vec();
        es.sort_unstable();
        es.dedup();
        self.nodes.push(SkeletonNode { position: p, time: t, contour: false, edges: es });
        self.nodes.len() - 1
    }

    fn arc(&mut self, a: usize, b: usize) {
        if a != b {
            self.arcs.push((a.min(b), a.max(b)));
        }
    }

    fn next_event(&self) -> Option<Event> {
        let mut best: Option<Event> = None;
        let eps = self.eps;
        let mut consider = |ev: Event| {
            let better = match &best {
                None => true,
                Some(b) => event_order(&ev, b, eps) == Ordering::Less,
            };
            if better {
                best = Some(ev);
            }
        };
        for (lp, lv) in self.loops.iter().enumerate() {
            let n = lv.len();
            for i in 0..n {
                let (a, b) = (&lv[i], &lv[(i + 1) % n]);
                let d = self.edges[a.e_next].dir;
                let len = (b.pos - a.pos).dot(d);
                let rate = (b.vel - a.vel).dot(d);
                if rate < -1e-12 {
                    let dt = -len / rate;
                    if dt >= -eps {
                        let dt = dt.max(0.0);
                        let pos = (a.pos + a.vel * dt).midpoint(b.pos + b.vel * dt);
                        consider(Event { time: self.t + dt, pos, lp, kind: EventKind::Edge { i } });
                    }
                } else if len.abs() <= eps && (b.pos - a.pos).norm() <= eps {
                    // Already coincident (e.g. after a simultaneous event).
                    consider(Event {
                        time: self.t,
                        pos: a.pos.midpoint(b.pos),
                        lp,
                        kind: EventKind::Edge { i },
                    });
                }
            }
            for v in 0..n {
                let wv = &lv[v];
                let turn = self.edges[wv.e_prev].dir.cross(self.edges[wv.e_next].dir);
                if turn >= -1e-12 {
                    continue;
                }
                for f in 0..n {
                    let g = (f + 1) % n;
                    if f == v || g == v {
                        continue;
                    }
                    let fe = lv[f].e_next;
                    if fe == wv.e_prev || fe == wv.e_next {
                        continue;
                    }
                    let e = &self.edges[fe];
                    let dist = e.n.dot(wv.pos) - e.c - self.t;
                    let rate = e.n.dot(wv.vel) - 1.0;
                    if rate >= -1e-12 || dist < -eps {
                        continue;
                    }
                    let dt = (dist / -rate).max(0.0);
                    let p = wv.pos + wv.vel * dt;
                    let f1 = lv[f].pos + lv[f].vel * dt;
                    let f2 = lv[g].pos + lv[g].vel * dt;
                    let s = (p - f1).dot(e.dir);
                    let len = (f2 - f1).dot(e.dir);
                    if s < -eps || s > len + eps {
                        continue;
                    }
                    consider(Event { time: self.t + dt, pos: p, lp, kind: EventKind::Split { v, f } });
                }
            }
        }
        best
    }

    fn advance(&mut self, t: f64) {
        let dt = t - self.t;
        if dt > 0.0 {
            for lv in &mut self.loops {
                for w in lv.iter_mut() {
                    w.pos += w.vel * dt;
                }
            }
            self.t = t;
        }
    }

    fn apply(&mut self, ev: Event) {
        self.advance(ev.time);
        let lp = ev.lp;
        match ev.kind {
            EventKind::Edge { i } => {
                let n = self.loops[lp].len();
                let (a, b) = (self.loops[lp][i], self.loops[lp][(i + 1) % n]);
                let node = self.node_at(ev.pos, &[a.e_prev, a.e_next, b.e_next]);
                self.arc(a.node, node);
                self.arc(b.node, node);
                let w = self.vertex(ev.pos, node, a.e_prev, b.e_next);
                let lv = &mut self.loops[lp];
                if i + 1 < n {
                    lv[i] = w;
                    lv.remove(i + 1);
                } else {
                    lv[i] = w;
                    lv.remove(0);
                }
                self.cleanup(vec![lp]);
            }
            EventKind::Split { v, f } => {
                let lv = self.loops[lp].clone();
                let n = lv.len();
                let wv = lv[v];
                let fe = lv[f].e_next;
                let node = self.node_at(ev.pos, &[wv.e_prev, wv.e_next, fe]);
                self.arc(wv.node, node);
                let va = self.vertex(ev.pos, node, wv.e_prev, fe);
                let vb = self.vertex(ev.pos, node, fe, wv.e_next);
                // Loop A: va, f+1, ..., v-1.   Loop B: vb, v+1, ..., f.
                let mut la = vec![va];
                let mut k = (f + 1) % n;
                while k != v {
                    la.push(lv[k]);
                    k = (k + 1) % n;
                }
                let mut lb = vec![vb];
                let mut k = (v + 1) % n;
                while k != (f + 1) % n {
                    lb.push(lv[k]);
                    k = (k + 1) % n;
                }
                self.loops[lp] = la;
                self.loops.push(lb);
                let last = self.loops.len() - 1;
                self.cleanup(vec![lp, last]);
            }
        }
    }

    /// Merges coincident neighbours and retires loops that have no area left.
    fn cleanup(&mut self, mut pending: Vec<usize>) {
        let mut retired = Vec::new();
        while let Some(lp) = pending.pop() {
            loop {
                let n = self.loops[lp].len();
                if n <= 2 || signed_area(&self.loop_positions(lp)).abs() <= self.eps_area {
                    self.collapse_loop(lp);
                    retired.push(lp);
                    break;
                }
                let Some(i) = (0..n).find(|&i| {
                    let lv = &self.loops[lp];
                    lv[i].pos.distance(lv[(i + 1) % n].pos) <= self.eps
                }) else {
                    break;
                };
                let (a, b) = (self.loops[lp][i], self.loops[lp][(i + 1) % n]);
                let p = a.pos.midpoint(b.pos);
                let node = if a.node == b.node {
                    a.node
                } else {
                    let node = self.node_at(p, &[a.e_prev, a.e_next, b.e_next]);
                    self.arc(a.node, node);
                    self.arc(b.node, node);
                    node
                };
                let w = self.vertex(p, node, a.e_prev, b.e_next);
                let lv = &mut self.loops[lp];
                lv[i] = w;
                lv.remove((i + 1) % n);
            }
        }
        retired.sort_unstable();
        for lp in retired.into_iter().rev() {
            self.loops.remove(lp);
        }
    }

    fn loop_positions(&self, lp: usize) -> Vec<Point2D> {
        self.loops[lp].iter().map(|w| w.pos).collect()
    }

    /// Turns a zero-area loop into arcs: coincident vertices become one node,
    /// consecutive distinct nodes along the loop are joined.
    fn collapse_loop(&mut self, lp: usize) {
        let lv = std::mem::take(&mut self.loops[lp]);
        let mut cluster_nodes: Vec<(Point2D, usize)> = Vec::new();
        let mut seq = Vec::with_capacity(lv.len());
        for w in &lv {
            let found = cluster_nodes.iter().find(|(p, _)| p.distance(w.pos) <= self.eps * 10.0);
            let node = match found {
                Some(&(_, node)) => node,
                None => {
                    let existing = self.nodes[w.node].clone();
                    let node = if !existing.contour
                        && (existing.time - self.t).abs() <= self.eps
                        && existing.position.distance(w.pos) <= self.eps
                    {
                        w.node
                    } else {
                        self.node_at(w.pos, &[w.e_prev, w.e_next])
                    };
                    cluster_nodes.push((w.pos, node));
                    node
                }
            };
            for e in [w.e_prev, w.e_next] {
                if !self.nodes[node].edges.contains(&e) {
                    self.nodes[node].edges.push(e);
                }
            }
            self.arc(w.node, node);
            seq.push(node);
        }
        for k in 0..seq.len() {
            let (a, b) = (seq[k], seq[(k + 1) % seq.len()]);
            self.arc(a, b);
        }
    }
}

fn event_order(a: &Event, b: &Event, eps: f64) -> Ordering {
    if (a.time - b.time).abs() > eps {
        return a.time.total_cmp(&b.time);
    }
    a.pos.x.total_cmp(&b.pos.x).then(a.pos.y.total_cmp(&b.pos.y))
}

/// Straight skeleton of a simple polygon. Holes are ignored with a warning.
pub fn straight_skeleton(poly: &Polygon) -> Result<StraightSkeleton, RigError> {
    if !poly.holes.is_empty() {
        log::warn!("straight skeleton ignores {} hole(s)", poly.holes.len());
    }
    let mut ring = poly.vertices.clone();
    if signed_area(&ring) < 0.0 {
        ring.reverse();
    }
    let diag = crate::geometry::BBox::from_points(ring.iter()).map_or(0.0, |b| b.diagonal());
    crate::document::clean_ring(&mut ring, 1e-12 * diag);
    let area = signed_area(&ring);
    if ring.len() < 3 || !(area > 1e-12 * diag * diag) || !area.is_finite() {
        return Err(RigError::Degenerate(format!("area {area} with {} vertices", ring.len())));
    }
    check_simple(&ring)?;

    let n = ring.len();
    let edges: Vec<Edge> = (0..n)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            let dir = (b - a).normalized().expect("cleaned ring has no zero edges");
            let nrm = dir.perp();
            Edge { n: nrm, c: nrm.dot(a), dir }
        })
        .collect();
    let nodes: Vec<SkeletonNode> = (0..n)
        .map(|i| SkeletonNode {
            position: ring[i],
            time: 0.0,
            contour: true,
            edges: vec![(i + n - 1) % n, i],
        })
        .collect();
    let mut wf = Wavefront {
        edges,
        nodes,
        arcs: Vec::new(),
        loops: Vec::new(),
        t: 0.0,
        eps: 1e-9 * diag,
        eps_area: 1e-10 * diag * diag,
    };
    let first: Vec<WVert> = (0..n).map(|i| wf.vertex(ring[i], i, (i + n - 1) % n, i)).collect();
    wf.loops.push(first);

    let budget = 4 * n * n + 64;
    let mut events = 0;
    while !wf.loops.is_empty() {
        let Some(ev) = wf.next_event() else {
            // No event although a loop remains: numerical dead end. Retire it.
            log::warn!("straight skeleton: {} loop(s) without events retired", wf.loops.len());
            for lp in 0..wf.loops.len() {
                wf.collapse_loop(lp);
            }
            wf.loops.clear();
            break;
        };
        wf.apply(ev);
        events += 1;
        if events > budget {
            return Err(RigError::NoConvergence(events));
        }
    }

    let mut arcs = wf.arcs;
    arcs.sort_unstable();
    arcs.dedup();
    Ok(StraightSkeleton { polygon: ring, nodes: wf.nodes, arcs })
}

fn check_simple(ring: &[Point2D]) -> Result<(), RigError> {
    let n = ring.len();
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n]) {
                return Err(RigError::NotSimple(i, j));
            }
        }
    }
    Ok(())
}

/// Interior skeleton nodes closer than this fraction of the contour diagonal
/// are merged. Near-simultaneous events on almost symmetric input (a regular
/// star after f32 parsing) scatter one node into a cluster about 1e-5 of the
/// diagonal wide, joined by a cycle of micro-bones.
pub const NODE_MERGE_FRACTION: f64 = 1e-4;

/// Removes every arc touching a contour vertex and keeps the largest
/// connected interior component.
pub fn prune_outer_bones(raw: &StraightSkeleton) -> Skeleton {
    let diag = crate::geometry::BBox::from_points(raw.polygon.iter()).map_or(1.0, |b| b.diagonal());
    let eps = NODE_MERGE_FRACTION * diag;
    let nn = raw.nodes.len();

    // Interior nodes within `eps` of each other, transitively, are one keypoint.
    let mut uf = UnionFind::new(nn);
    let interior: Vec<usize> = raw.interior_nodes().map(|(i, _)| i).collect();
    for (k, &a) in interior.iter().enumerate() {
        for &b in &interior[k + 1..] {
            if raw.nodes[a].position.distance(raw.nodes[b].position) <= eps {
                uf.union(a, b);
            }
        }
    }
    let arcs: Vec<(usize, usize)> = raw
        .arcs
        .iter()
        .filter(|&&(a, b)| !raw.nodes[a].contour && !raw.nodes[b].contour)
        .map(|&(a, b)| (uf.find(a), uf.find(b)))
        .filter(|(a, b)| a != b)
        .collect();

    if arcs.is_empty() {
        // Convex-like shape: the skeleton is one deepest node.
        let deepest = interior
            .iter()
            .copied()
            .max_by(|&a, &b| raw.nodes[a].time.total_cmp(&raw.nodes[b].time))
            .map(|i| raw.nodes[i].position)
            .unwrap_or_else(|| centroid(&raw.polygon));
        log::warn!("pruning removed every bone; skeleton is a single keypoint");
        return Skeleton { keypoints: vec![deepest], bones: Vec::new(), rest_lengths: Vec::new() };
    }

    let mut comp = UnionFind::new(nn);
    for &(a, b) in &arcs {
        comp.union(a, b);
    }
    let mut members: Vec<usize> = arcs.iter().flat_map(|&(a, b)| [a, b]).collect();
    members.sort_unstable();
    members.dedup();
    let mut roots: Vec<usize> = members.iter().map(|&m| comp.find(m)).collect();
    roots.sort_unstable();
    roots.dedup();
    let size = |r: usize, comp: &mut UnionFind| members.iter().filter(|&&m| comp.find(m) == r).count();
    let sizes: Vec<usize> = roots.iter().map(|&r| size(r, &mut comp)).collect();
    let best = (0..roots.len()).max_by_key(|&k| (sizes[k], std::cmp::Reverse(roots[k]))).expect("nonempty");
    if roots.len() > 1 {
        log::warn!("pruned skeleton had {} components; keeping the largest", roots.len());
    }
    let root = roots[best];
    let kept: Vec<usize> = members.iter().copied().filter(|&m| comp.find(m) == root).collect();
    let index = |m: usize| kept.binary_search(&m).expect("kept node");
    let keypoints = kept.iter().map(|&m| raw.nodes[m].position).collect();
    let bones: Vec<(usize, usize)> = arcs
        .iter()
        .filter(|&&(a, _)| comp.find(a) == root)
        .map(|&(a, b)| (index(a), index(b)))
        .collect();
    finish(keypoints, bones)
}

fn centroid(ring: &[Point2D]) -> Point2D {
    let s = ring.iter().fold(Point2D::ZERO, |acc, &p| acc + p);
    s * (1.0 / ring.len().max(1) as f64)
}

/// Normalises, dedups and measures bones without the connectivity check
/// (inputs here are connected by construction).
fn finish(keypoints: Vec<Point2D>, bones: Vec<(usize, usize)>) -> Skeleton {
    let mut bones: Vec<(usize, usize)> =
        bones.into_iter().map(|(a, b)| (a.min(b), a.max(b))).filter(|(a, b)| a != b).collect();
    bones.sort_unstable();
    bones.dedup();
    let rest_lengths = bones.iter().map(|&(i, j)| keypoints[i].distance(keypoints[j])).collect();
    Skeleton { keypoints, bones, rest_lengths }
}

/// Collapses the shortest bone while it is shorter than
/// `δ = ρ · mean bone length`, recomputing `δ` after every collapse.
/// Merged keypoints move to the bone midpoint.
pub fn simplify_skeleton(skel: &Skeleton, rho: f64) -> Result<Skeleton, RigError> {
    simplify(skel, rho, None)
}

/// [`simplify_skeleton`] that keeps keypoints inside `contour`: a midpoint
/// outside it is replaced by the endpoint farther from the boundary.
pub fn simplify_skeleton_within(skel: &Skeleton, rho: f64, contour: &Polygon) -> Result<Skeleton, RigError> {
    simplify(skel, rho, Some(contour))
}

fn simplify(skel: &Skeleton, rho: f64, contour: Option<&Polygon>) -> Result<Skeleton, RigError> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(RigError::Parameter(format!("rho must be > 0, got {rho}")));
    }
    let mut kp = skel.keypoints.clone();
    let mut bones = skel.bones.clone();
    loop {
        if bones.is_empty() {
            break;
        }
        let lens: Vec<f64> = bones.iter().map(|&(i, j)| kp[i].distance(kp[j])).collect();
        let delta = rho * lens.iter().sum::<f64>() / bones.len() as f64;
        let Some(b) = (0..bones.len())
            .filter(|&b| lens[b] < delta)
            .min_by(|&x, &y| lens[x].total_cmp(&lens[y]).then(x.cmp(&y)))
        else {
            break;
        };
        let (i, j) = bones[b];
        let (keep, gone) = (i.min(j), i.max(j));
        let mid = kp[i].midpoint(kp[j]);
        kp[keep] = match contour {
            Some(c) if !c.contains(mid) => {
                if c.boundary_distance(kp[i]) >= c.boundary_distance(kp[j]) {
                    kp[i]
                } else {
                    kp[j]
                }
            }
            _ => mid,
        };
        kp.remove(gone);
        let remap = |k: usize| match k.cmp(&gone) {
            Ordering::Less => k,
            Ordering::Equal => keep,
            Ordering::Greater => k - 1,
        };
        let mut next: Vec<(usize, usize)> = bones
            .iter()
            .map(|&(a, c)| (remap(a), remap(c)))
            .filter(|(a, c)| a != c)
            .map(|(a, c)| (a.min(c), a.max(c)))
            .collect();
        next.sort_unstable();
        next.dedup();
        bones = next;
    }
    let out = finish(kp, bones);
    if out.rest_lengths.iter().any(|&l| l <= 0.0) {
        return Err(RigError::InvalidSkeleton("simplification left a zero-length bone".into()));
    }
    Ok(out)
}

/// Ramer–Douglas–Peucker on a closed ring. Returns the input unchanged when
/// the simplified ring would be degenerate or self-intersecting.
pub fn simplify_ring(ring: &[Point2D], tol: f64) -> Vec<Point2D> {
    let n = ring.len();
    if n <= 4 || tol <= 0.0 {
        return ring.to_vec();
    }
    // Split the ring at the vertex farthest from vertex 0.
    let far = (1..n)
        .max_by(|&a, &b| ring[a].distance(ring[0]).total_cmp(&ring[b].distance(ring[0])))
        .expect("n > 1");
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[far] = true;
    let idx: Vec<usize> = (0..=n).map(|i| i % n).collect();
    rdp(ring, &idx[..=far], tol, &mut keep);
    rdp(ring, &idx[far..], tol, &mut keep);
    let out: Vec<Point2D> = (0..n).filter(|&i| keep[i]).map(|i| ring[i]).collect();
    if out.len() < 3 || signed_area(&out).abs() <= 0.0 || check_simple(&out).is_err() {
        return ring.to_vec();
    }
    out
}

fn rdp(ring: &[Point2D], idx: &[usize], tol: f64, keep: &mut [bool]) {
    if idx.len() < 3 {
        return;
    }
    let (a, b) = (ring[idx[0]], ring[idx[idx.len() - 1]]);
    let (k, d) = idx[1..idx.len() - 1]
        .iter()
        .enumerate()
        .map(|(k, &i)| (k + 1, crate::geometry::point_segment_distance(ring[i], a, b)))
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .expect("len >= 3");
    if d > tol {
        keep[idx[k]] = true;
        rdp(ring, &idx[..=k], tol, keep);
        rdp(ring, &idx[k..], tol, keep);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2D {
        Point2D::new(x, y)
    }

    fn rect(w: f64, h: f64) -> Polygon {
        Polygon::new(vec![p(0., 0.), p(w, 0.), p(w, h), p(0., h)])
    }

    #[test]
    fn unit_square_has_one_centre_node() {
        let sk = straight_skeleton(&rect(1.0, 1.0)).unwrap();
        let inner: Vec<_> = sk.interior_nodes().collect();
        assert_eq!(inner.len(), 1);
        assert!(inner[0].1.position.distance(p(0.5, 0.5)) < 1e-12);
        assert_eq!(sk.arcs.len(), 4);
        let pruned = prune_outer_bones(&sk);
        assert_eq!(pruned.keypoints.len(), 1);
        assert!(pruned.bones.is_empty());
    }

    #[test]
    fn rectangle_has_spine() {
        let sk = straight_skeleton(&rect(2.0, 1.0)).unwrap();
        let pruned = prune_outer_bones(&sk);
        assert_eq!(pruned.keypoints.len(), 2);
        assert_eq!(pruned.bones.len(), 1);
        let mut kp = pruned.keypoints.clone();
        kp.sort_by(|a, b| a.x.total_cmp(&b.x));
        assert!(kp[0].distance(p(0.5, 0.5)) < 1e-6);
        assert!(kp[1].distance(p(1.5, 0.5)) < 1e-6);
        assert!(sk.equidistance_residual() < 1e-9);
    }

    #[test]
    fn l_shape_is_equidistant() {
        let poly = Polygon::new(vec![p(0., 0.), p(4., 0.), p(4., 1.), p(1., 1.), p(1., 3.), p(0., 3.)]);
        let sk = straight_skeleton(&poly).unwrap();
        assert!(sk.equidistance_residual() < 1e-6 * 5.0);
        let pruned = prune_outer_bones(&sk);
        assert!(pruned.bones.len() >= 2);
        pruned.validate().unwrap();
    }

    #[test]
    fn simplification_first_collapse_follows_delta() {
        // Path 0-1-2-3 with bone lengths 1, 2, 3.
        let s = Skeleton::new(vec![p(0., 0.), p(1., 0.), p(3., 0.), p(6., 0.)], vec![(0, 1), (1, 2), (2, 3)])
            .unwrap();
        let out = simplify_skeleton(&s, 0.7).unwrap();
        // δ = 1.4 collapses the unit bone at x = 0.5; then lengths 2.5 and 3, δ = 1.925: stop.
        assert_eq!(out.keypoints.len(), 3);
        assert_eq!(out.keypoints[0], p(0.5, 0.0));
    }

    #[test]
    fn equal_bones_are_a_fixed_point() {
        let s = Skeleton::new(vec![p(0., 0.), p(1., 0.), p(1., 1.)], vec![(0, 1), (1, 2)]).unwrap();
        assert_eq!(simplify_skeleton(&s, 0.7).unwrap(), s);
    }

    #[test]
    fn rho_must_be_positive() {
        let s = Skeleton::new(vec![p(0., 0.), p(1., 0.)], vec![(0, 1)]).unwrap();
        assert!(simplify_skeleton(&s, 0.0).is_err());
    }

    #[test]
    fn self_intersecting_polygon_is_rejected() {
        let bow = Polygon::new(vec![p(0., 0.), p(2., 2.), p(2., 0.), p(0., 2.)]);
        assert!(straight_skeleton(&bow).is_err());
    }
}
