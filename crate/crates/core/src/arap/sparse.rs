//! Envelope (skyline) Cholesky factorisation with reverse Cuthill–McKee
//! ordering. Mesh systems are banded after RCM, so the envelope stays small
//! and a factorisation is a few milliseconds even for thousands of unknowns.

use std::collections::{BTreeMap, VecDeque};

/// Symmetric matrix under assembly; only the lower triangle is stored.
#[derive(Clone, Debug, Default)]
pub struct SymmetricBuilder {
    n: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

impl SymmetricBuilder {
    pub fn new(n: usize) -> Self {
        Self { n, entries: BTreeMap::new() }
    }

    /// Adds `v` to `A[i][j]` (and implicitly `A[j][i]`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let key = if i >= j { (i, j) } else { (j, i) };
        *self.entries.entry(key).or_insert(0.0) += v;
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in self.entries.keys() {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("matrix is not positive definite (pivot {pivot} at row {row})")]
pub struct NotPositiveDefinite {
    pub row: usize,
    pub pivot: f64,
}

/// `P A Pᵀ = L Lᵀ` with `L` stored row-wise over its envelope.
#[derive(Clone, Debug, PartialEq)]
pub struct SkylineCholesky {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// First stored column of each row.
    first: Vec<usize>,
    /// Start of each row inside `values`.
    offset: Vec<usize>,
    values: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &SymmetricBuilder) -> Result<Self, NotPositiveDefinite> {
        let n = a.n;
        let perm = rcm_order(&a.adjacency());
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for &(i, j) in a.entries.keys() {
            let (pi, pj) = (inv[i], inv[j]);
            let (r, c) = if pi >= pj { (pi, pj) } else { (pj, pi) };
            first[r] = first[r].min(c);
        }
        let mut offset = Vec::with_capacity(n + 1);
        let mut total = 0;
        for i in 0..n {
            offset.push(total);
            total += i - first[i] + 1;
        }
        offset.push(total);
        let mut values = vec![0.0; total];
        for (&(i, j), &v) in &a.entries {
            let (pi, pj) = (inv[i], inv[j]);
            let (r, c) = if pi >= pj { (pi, pj) } else { (pj, pi) };
            values[offset[r] + c - first[r]] += v;
        }

        let max_diag = (0..n).map(|i| values[offset[i] + i - first[i]].abs()).fold(0.0, f64::max);
        let tiny = 1e-13 * max_diag.max(f64::MIN_POSITIVE);
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = values[offset[i] + j - fi];
                for k in k0..j {
                    s -= values[offset[i] + k - fi] * values[offset[j] + k - fj];
                }
                values[offset[i] + j - fi] = s / values[offset[j] + j - fj];
            }
            let mut d = values[offset[i] + i - fi];
            for k in fi..i {
                let l = values[offset[i] + k - fi];
                d -= l * l;
            }
            if !(d > tiny) {
                return Err(NotPositiveDefinite { row: perm[i], pivot: d });
            }
            values[offset[i] + i - fi] = d.sqrt();
        }
        Ok(Self { n, perm, first, offset, values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            let mut s = y[i];
            for k in fi..i {
                s -= row[k - fi] * y[k];
            }
            y[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            let xi = y[i] / row[i - fi];
            y[i] = xi;
            for k in fi..i {
                y[k] -= row[k - fi] * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// Reverse Cuthill–McKee ordering; `result[new] = old`. Ties are broken by
/// degree, then index, so the ordering is deterministic.
pub fn rcm_order(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let degree = |v: usize| adj[v].len();
    loop {
        let Some(seed) = (0..n).filter(|&v| !visited[v]).min_by_key(|&v| (degree(v), v)) else {
            break;
        };
        let start = pseudo_peripheral(adj, seed, &visited);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_unstable_by_key(|&w| (degree(w), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(adj: &[Vec<usize>], seed: usize, blocked: &[bool]) -> usize {
    let mut current = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let (far, e) = bfs_farthest(adj, current, blocked);
        if e <= ecc {
            break;
        }
        ecc = e;
        current = far;
    }
    current
}

fn bfs_farthest(adj: &[Vec<usize>], s: usize, blocked: &[bool]) -> (usize, usize) {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[s] = 0;
    let mut queue = VecDeque::from([s]);
    let mut best = (s, 0);
    while let Some(v) = queue.pop_front() {
        let d = dist[v];
        if d > best.1 || (d == best.1 && adj[v].len() < adj[best.0].len()) {
            best = (v, d);
        }
        for &w in &adj[v] {
            if !blocked[w] && dist[w] == usize::MAX {
                dist[w] = d + 1;
                queue.push_back(w);
            }
        }
    }
    best
}
