//! Sparse Cholesky factorization `P A Pᵀ = L Lᵀ` for symmetric positive
//! definite matrices.
//!
//! The fill-reducing permutation is reverse Cuthill-McKee. The numeric phase
//! is the up-looking algorithm: row `k` of `L` comes from a sparse triangular
//! solve whose pattern is the reach of column `k` in the elimination tree.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::sparse::SparseSymMatrix;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Pivots below this fraction of the original diagonal are treated as zero.
const PIVOT_RTOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<f64>,
}

impl SparseCholesky {
    pub fn factor(a: &SparseSymMatrix) -> Result<Self> {
        let n = a.dim();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let parent = elimination_tree(a, &perm, &inv);

        let mut x = vec![0.0; n];
        let mut flag = vec![NONE; n];
        let mut pattern: Vec<usize> = Vec::new();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx: Vec<usize> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut diag = vec![0.0; n];

        for k in 0..n {
            pattern.clear();
            flag[k] = k;
            let mut akk = 0.0;
            let (cols, vals) = a.row(perm[k]);
            for (&old, &v) in cols.iter().zip(vals) {
                let mut i = inv[old];
                if i > k {
                    continue;
                }
                x[i] += v;
                if i == k {
                    akk += v;
                }
                while i != NONE && flag[i] != k {
                    pattern.push(i);
                    flag[i] = k;
                    i = parent[i];
                }
            }
            pattern.sort_unstable();

            let mut d = x[k];
            x[k] = 0.0;
            for &i in &pattern {
                let mut s = x[i];
                for p in row_ptr[i]..row_ptr[i + 1] {
                    s -= values[p] * x[col_idx[p]];
                }
                let lki = s / diag[i];
                x[i] = lki;
                d -= lki * lki;
            }
            for &i in &pattern {
                col_idx.push(i);
                values.push(x[i]);
                x[i] = 0.0;
            }
            row_ptr.push(col_idx.len());

            if !(d > PIVOT_RTOL * akk.abs()) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: perm[k] });
            }
            diag[k] = d.sqrt();
        }

        Ok(Self { n, perm, row_ptr, col_idx, values, diag })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Nonzeros in the strictly lower part of the factor.
    pub fn fill(&self) -> usize {
        self.values.len()
    }

    /// Overwrites `b` with `A⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let mut z: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..self.n {
            let mut s = z[i];
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s -= self.values[p] * z[self.col_idx[p]];
            }
            z[i] = s / self.diag[i];
        }
        for i in (0..self.n).rev() {
            let ui = z[i] / self.diag[i];
            z[i] = ui;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                z[self.col_idx[p]] -= self.values[p] * ui;
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = z[new];
        }
    }
}

fn elimination_tree(a: &SparseSymMatrix, perm: &[usize], inv: &[usize]) -> Vec<usize> {
    let n = a.dim();
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        let (cols, _) = a.row(perm[k]);
        for &old in cols {
            let mut i = inv[old];
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

fn reverse_cuthill_mckee(a: &SparseSymMatrix) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.iter().filter(|&&c| c != i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(a, seed, &degree);
        let mut queue = VecDeque::new();
        queue.push_back(start);
        visited[start] = true;
        let mut nbrs = Vec::new();
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(a.row(v).0.iter().copied().filter(|&c| !visited[c]));
            nbrs.sort_by_key(|&c| (degree[c], c));
            for &c in &nbrs {
                visited[c] = true;
                queue.push_back(c);
            }
        }
    }
    order.reverse();
    order
}

/// A few rounds of the George-Liu heuristic for a low-degree far node.
fn pseudo_peripheral(a: &SparseSymMatrix, seed: usize, degree: &[usize]) -> usize {
    let mut start = seed;
    let mut best_depth = 0;
    for _ in 0..4 {
        let (depth, last_level) = bfs_levels(a, start);
        let far = last_level.into_iter().min_by_key(|&v| (degree[v], v)).unwrap_or(start);
        if depth <= best_depth {
            break;
        }
        best_depth = depth;
        start = far;
    }
    start
}

fn bfs_levels(a: &SparseSymMatrix, start: usize) -> (usize, Vec<usize>) {
    let n = a.dim();
    let mut level = vec![NONE; n];
    level[start] = 0;
    let mut frontier = vec![start];
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &frontier {
            for &c in a.row(v).0 {
                if level[c] == NONE {
                    level[c] = depth + 1;
                    next.push(c);
                }
            }
        }
        if next.is_empty() {
            return (depth, frontier);
        }
        depth += 1;
        frontier = next;
    }
}
