use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Symmetric sparse matrix assembled from one triangle of coordinates.
///
/// Entries pushed at `(r, c)` and `(c, r)` address the same coefficient and
/// are summed during assembly. Both halves are stored in CSR form so that
/// row access and matvec are cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    block: Option<usize>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Accumulates coordinates before assembly.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    dim: usize,
    block: Option<usize>,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(dim: usize) -> Self {
        Self { dim, block: None, entries: Vec::new() }
    }

    pub fn with_block_size(mut self, block: usize) -> Self {
        self.block = Some(block);
        self
    }

    pub fn reserve(&mut self, additional: usize) {
        self.entries.reserve(additional);
    }

    /// Adds `value` to entry `(row, col)` (and implicitly to `(col, row)`).
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        let (r, c) = if row <= col { (row, col) } else { (col, row) };
        self.entries.push((r, c, value));
    }

    pub fn build(mut self) -> Result<SparseSymMatrix> {
        if self.dim == 0 {
            return Err(Error::Dimension("matrix dimension must be positive".into()));
        }
        if let Some(b) = self.block {
            if b == 0 || !self.dim.is_multiple_of(b) {
                return Err(Error::Dimension(format!(
                    "dimension {} is not divisible by block size {}",
                    self.dim, b
                )));
            }
        }
        if let Some(&(r, c, _)) = self.entries.iter().find(|&&(r, c, _)| r >= self.dim || c >= self.dim) {
            return Err(Error::Dimension(format!(
                "entry ({r}, {c}) outside a {0}x{0} matrix",
                self.dim
            )));
        }

        self.entries.sort_unstable_by_key(|a| (a.0, a.1));
        let mut upper: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for (r, c, v) in self.entries {
            match upper.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => upper.push((r, c, v)),
            }
        }

        let mut counts = vec![0usize; self.dim];
        for &(r, c, _) in &upper {
            counts[r] += 1;
            if r != c {
                counts[c] += 1;
            }
        }
        let mut row_ptr = vec![0usize; self.dim + 1];
        for i in 0..self.dim {
            row_ptr[i + 1] = row_ptr[i] + counts[i];
        }
        let nnz = row_ptr[self.dim];
        let mut col_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut next = row_ptr.clone();
        // Lower-triangle halves first, so every row ends up sorted by column.
        for &(r, c, v) in &upper {
            if r != c {
                let p = next[c];
                col_idx[p] = r;
                values[p] = v;
                next[c] += 1;
            }
        }
        for &(r, c, v) in &upper {
            let p = next[r];
            col_idx[p] = c;
            values[p] = v;
            next[r] += 1;
        }

        Ok(SparseSymMatrix { dim: self.dim, block: self.block, row_ptr, col_idx, values })
    }
}

impl SparseSymMatrix {
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut builder = TripletBuilder::new(dim);
        for (r, c, v) in triplets {
            builder.push(r, c, v);
        }
        builder.build()
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension("matrix must be square".into()));
        }
        let mut builder = TripletBuilder::new(m.nrows());
        for c in 0..m.ncols() {
            for r in 0..=c {
                if m[(r, c)] != 0.0 {
                    builder.push(r, c, m[(r, c)]);
                }
            }
        }
        builder.build()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block_size(&self) -> Option<usize> {
        self.block
    }

    /// Number of stored coefficients across both triangles.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of one row, sorted by column.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (cols, vals) = self.row(row);
        match cols.binary_search(&col) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    /// Upper-triangle coordinates `(r, c, v)` with `r <= c`.
    pub fn upper_triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).filter(move |(&c, _)| c >= r).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    /// Gershgorin upper bound on the largest eigenvalue.
    pub fn gershgorin_upper(&self) -> f64 {
        (0..self.dim)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter()
                    .zip(vals)
                    .map(|(&c, &v)| if c == i { v } else { v.abs() })
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Principal submatrix with the first `k` rows and columns removed.
    pub fn trailing(&self, k: usize) -> Result<Self> {
        if k >= self.dim {
            return Err(Error::Dimension(format!("cannot drop {k} of {} rows", self.dim)));
        }
        let mut builder = TripletBuilder::new(self.dim - k);
        for (r, c, v) in self.upper_triplets() {
            if r >= k {
                builder.push(r - k, c - k, v);
            }
        }
        builder.build()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                m[(i, c)] = v;
            }
        }
        m
    }
}
