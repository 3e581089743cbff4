use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::sparse::SparseSymMatrix;

/// A symmetric linear map applied through matrix-vector products only.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// Writes `A x` into `y`. Both slices have length `dim()`.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// An upper bound on the largest eigenvalue, when one is cheap to state.
    fn upper_eigen_bound(&self) -> Option<f64> {
        None
    }

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
    fn upper_eigen_bound(&self) -> Option<f64> {
        (**self).upper_eigen_bound()
    }
}

impl LinearOperator for SparseSymMatrix {
    fn dim(&self) -> usize {
        SparseSymMatrix::dim(self)
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec(x, y)
    }
    fn upper_eigen_bound(&self) -> Option<f64> {
        Some(self.gershgorin_upper())
    }
}

/// Dense symmetric matrix as an operator. Only the lower triangle is trusted
/// to be consistent with the upper one; callers pass symmetric input.
#[derive(Debug, Clone)]
pub struct DenseOperator(pub DMatrix<f64>);

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let m = &self.0;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum();
        }
    }
    fn upper_eigen_bound(&self) -> Option<f64> {
        let m = &self.0;
        Some(
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| if i == j { m[(i, j)] } else { m[(i, j)].abs() }).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max),
        )
    }
}

/// `scale * I` of a given size.
#[derive(Debug, Clone, Copy)]
pub struct ScaledIdentity {
    pub dim: usize,
    pub scale: f64,
}

impl LinearOperator for ScaledIdentity {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = self.scale * xi;
        }
    }
    fn upper_eigen_bound(&self) -> Option<f64> {
        Some(self.scale)
    }
}

/// `A - B` for two operators of the same size.
#[derive(Debug, Clone, Copy)]
pub struct Difference<A, B> {
    pub lhs: A,
    pub rhs: B,
}

impl<A: LinearOperator, B: LinearOperator> LinearOperator for Difference<A, B> {
    fn dim(&self) -> usize {
        self.lhs.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.lhs.apply(x, y);
        let tmp = self.rhs.apply_vec(x);
        for (yi, ti) in y.iter_mut().zip(tmp) {
            *yi -= ti;
        }
    }
}

/// `sigma * I - A`; turns the bottom of the spectrum of `A` into the top.
#[derive(Debug, Clone, Copy)]
pub struct Shifted<A> {
    pub inner: A,
    pub sigma: f64,
}

impl<A: LinearOperator> LinearOperator for Shifted<A> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.inner.apply(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = self.sigma * xi - *yi;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Negated<A>(pub A);

impl<A: LinearOperator> LinearOperator for Negated<A> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply(x, y);
        for yi in y.iter_mut() {
            *yi = -*yi;
        }
    }
}

/// Materializes an operator column by column. Intended for small dimensions.
pub fn to_dense<A: LinearOperator + ?Sized>(a: &A) -> DMatrix<f64> {
    let n = a.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        a.apply(&e, &mut col);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    m
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    #[cfg(not(feature = "std"))]
    use num_traits::Float;
    dot(a, a).sqrt()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
