use alloc::vec;
use alloc::vec::Vec;

use super::cholesky::SparseCholesky;
use super::sparse::SparseSymMatrix;
use crate::error::{Error, Result};

/// Pseudoinverse of a connected weighted graph Laplacian.
///
/// The first row and column are deleted and the remaining SPD system is
/// factored once. Applying `L†` projects the input onto `𝟙⊥`, solves the
/// anchored system, and recenters the result onto `𝟙⊥`.
#[derive(Debug, Clone)]
pub struct LaplacianPinv {
    n: usize,
    anchored: Option<SparseCholesky>,
}

impl LaplacianPinv {
    pub fn new(laplacian: &SparseSymMatrix) -> Result<Self> {
        let n = laplacian.dim();
        if n == 1 {
            return Ok(Self { n, anchored: None });
        }
        let reduced = laplacian.trailing(1)?;
        let anchored = SparseCholesky::factor(&reduced).map_err(|e| match e {
            Error::NotPositiveDefinite { .. } => Error::DisconnectedGraph,
            other => other,
        })?;
        Ok(Self { n, anchored: Some(anchored) })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L x = b` with `x[0] = 0`. `b` must sum to zero for the system
    /// to be consistent; entry `b[0]` is not read.
    pub fn solve_anchored(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        if let Some(chol) = &self.anchored {
            x[1..].copy_from_slice(&b[1..]);
            let mut tail = x.split_off(1);
            chol.solve_in_place(&mut tail);
            x.extend(tail);
        }
        x
    }

    pub fn apply(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.n);
        let mean = y.iter().sum::<f64>() / self.n as f64;
        let centered: Vec<f64> = y.iter().map(|v| v - mean).collect();
        let x = self.solve_anchored(&centered);
        let shift = x.iter().sum::<f64>() / self.n as f64;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi - shift;
        }
    }
}

/// `L† y` for a weighted graph Laplacian of a connected graph.
pub fn laplacian_pinv_apply(laplacian: &SparseSymMatrix, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != laplacian.dim() {
        return Err(Error::Dimension("vector length does not match the Laplacian".into()));
    }
    let pinv = LaplacianPinv::new(laplacian)?;
    let mut out = vec![0.0; y.len()];
    pinv.apply(y, &mut out);
    Ok(out)
}
