//! Sparse symmetric matrices and an envelope (profile) Cholesky factorization
//! under reverse Cuthill–McKee ordering.

use std::collections::VecDeque;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("matrix is not positive definite (pivot {pivot} at row {row})")]
pub struct NotPositiveDefinite {
    pub row: usize,
    pub pivot: f64,
}

/// Symmetric matrix in compressed-row form holding both triangles.
#[derive(Debug, Clone)]
pub struct SymSparse {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SymSparse {
    /// Assembles from `(row, col, value)` entries of both triangles; duplicates are summed.
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *vals.last_mut().expect("nonempty") += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SymSparse { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn dot_form(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n).map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>()).sum()
    }

    /// `self + c·other` on the union of the patterns.
    pub fn add_scaled(&self, c: f64, other: &SymSparse) -> SymSparse {
        let mut e = Vec::with_capacity(self.vals.len() + other.vals.len());
        for i in 0..self.n {
            e.extend(self.row(i).map(|(j, v)| (i, j, v)));
            e.extend(other.row(i).map(|(j, v)| (i, j, c * v)));
        }
        SymSparse::from_triplets(self.n, e)
    }
}

/// Reverse Cuthill–McKee ordering; `perm[new] = old`.
pub fn rcm_order(a: &SymSparse) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).filter(|&(j, _)| j != i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs_levels = |start: usize, visited: &[bool]| -> (usize, usize) {
        // (eccentricity, last node of the deepest level with minimal degree)
        let mut dist = vec![usize::MAX; n];
        let mut q = VecDeque::from([start]);
        dist[start] = 0;
        let mut far = start;
        while let Some(v) = q.pop_front() {
            if dist[v] > dist[far] || (dist[v] == dist[far] && degree[v] < degree[far]) {
                far = v;
            }
            for (w, _) in a.row(v) {
                if !visited[w] && dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
            }
        }
        (dist[far], far)
    };
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start node (George–Liu)
        let mut start = seed;
        let (mut ecc, mut far) = bfs_levels(start, &visited);
        loop {
            let (e2, f2) = bfs_levels(far, &visited);
            if e2 <= ecc {
                break;
            }
            start = far;
            ecc = e2;
            far = f2;
        }
        let comp_begin = order.len();
        visited[start] = true;
        order.push(start);
        let mut head = comp_begin;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut nb: Vec<usize> = a.row(v).map(|(w, _)| w).filter(|&w| !visited[w]).collect();
            nb.sort_unstable_by_key(|&w| (degree[w], w));
            for w in nb {
                visited[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

/// `P A Pᵀ = L Lᵀ` stored row by row over each row's envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &SymSparse) -> Result<Self, NotPositiveDefinite> {
        let n = a.dim();
        let perm = rcm_order(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first = vec![0usize; n];
        for (i, f) in first.iter_mut().enumerate() {
            *f = a.row(perm[i]).map(|(j, _)| inv[j]).filter(|&j| j <= i).min().unwrap_or(i);
        }
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for i in 0..n {
            for (j, v) in a.row(perm[i]) {
                let jj = inv[j];
                if jj <= i {
                    data[offset[i] + jj - first[i]] += v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let (head, row_i) = data.split_at_mut(offset[i]);
                let s: f64 = if j < i {
                    let row_j = &head[offset[j]..offset[j + 1]];
                    row_i[k0 - fi..j - fi]
                        .iter()
                        .zip(&row_j[k0 - fj..j - fj])
                        .map(|(x, y)| x * y)
                        .sum()
                } else {
                    row_i[..i - fi].iter().map(|x| x * x).sum()
                };
                let aij = row_i[j - fi] - s;
                if j < i {
                    let ljj = head[offset[j + 1] - 1];
                    row_i[j - fi] = aij / ljj;
                } else {
                    if !(aij > 0.0) {
                        return Err(NotPositiveDefinite { row: perm[i], pivot: aij });
                    }
                    row_i[i - fi] = aij.sqrt();
                }
            }
        }
        Ok(EnvelopeCholesky {
            perm,
            first,
            offset,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Stored entries of the factor.
    pub fn profile(&self) -> usize {
        self.data.len()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let s: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(l, x)| l * x).sum();
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (l, x) in row[..i - fi].iter().zip(&mut y[fi..i]) {
                *x -= l * yi;
            }
        }
        for (i, &o) in self.perm.iter().enumerate() {
            b[o] = y[i];
        }
    }
}
