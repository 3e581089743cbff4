//! Sparse symmetric linear algebra.

pub mod cholesky;
pub mod dense;
pub mod lanczos;
pub mod laplacian;
pub mod operator;
pub mod sparse;

pub use cholesky::SparseCholesky;
pub use dense::svd_small;
pub use lanczos::{smallest_eigenpairs, spectral_norm, spectral_norm_with, EigenPairs, LanczosOptions};
pub use laplacian::{laplacian_pinv_apply, LaplacianPinv};
pub use operator::{to_dense, DenseOperator, Difference, LinearOperator, Negated, ScaledIdentity, Shifted};
pub use sparse::{SparseSymMatrix, TripletBuilder};
