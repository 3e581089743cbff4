//! Block Lanczos with full reorthogonalization and Krylov-Schur restarts.
//!
//! The block size equals the number of wanted eigenpairs, so eigenvalues of
//! multiplicity up to `k` (the noiseless kernel of a data matrix has
//! multiplicity `d`) are resolved without relying on rounding errors. When a
//! block loses rank it is padded with fresh random directions.
//!
//! Smallest eigenpairs of `A` are the largest of `σI − A` with `σ` an upper
//! bound on `λ_max(A)`; only matvecs are needed.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::operator::{axpy, dot, norm, LinearOperator, Negated, Shifted};
use crate::error::{Error, Result};

/// Relative norm below which an orthogonalized direction counts as dependent.
const DEFLATION_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanczosOptions {
    /// Residual tolerance relative to the operator norm estimate.
    pub tol: f64,
    /// Budget of operator applications.
    pub max_iter: usize,
    /// Seed for the starting block.
    pub seed: u64,
    /// Maximum Krylov basis size before a restart.
    pub basis_size: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 500_000, seed: 0, basis_size: 64 }
    }
}

impl LanczosOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Eigenvalues in ascending order with orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// `‖A v − λ v‖₂` for each pair, recomputed with the operator.
    pub residual_norms: Vec<f64>,
}

/// Ritz pairs with eigenvalues in descending order.
#[derive(Debug, Clone)]
struct Ritz {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

/// The `k` smallest eigenpairs of a symmetric operator.
pub fn smallest_eigenpairs<A>(a: &A, k: usize, opts: &LanczosOptions) -> Result<EigenPairs>
where
    A: LinearOperator + ?Sized,
{
    let n = a.dim();
    if k == 0 || k >= n {
        return Err(Error::Dimension(format!("requested {k} eigenpairs of a {n}-dimensional operator")));
    }
    let sigma = match a.upper_eigen_bound() {
        Some(s) => s,
        None => estimate_upper_bound(a, opts)?,
    };
    let shifted = Shifted { inner: a, sigma };
    let ritz = largest(&shifted, k, opts)?;

    let values: Vec<f64> = ritz.values.iter().map(|theta| sigma - theta).collect();
    let residual_norms = ritz
        .vectors
        .iter()
        .zip(&values)
        .map(|(v, &lambda)| {
            let mut r = a.apply_vec(v);
            axpy(-lambda, v, &mut r);
            norm(&r)
        })
        .collect();
    Ok(EigenPairs { values, vectors: ritz.vectors, residual_norms })
}

/// `‖A‖₂ = max |λ|` of a symmetric operator, to relative tolerance `tol`.
pub fn spectral_norm<A>(a: &A, tol: f64) -> Result<f64>
where
    A: LinearOperator + ?Sized,
{
    spectral_norm_with(a, &LanczosOptions::default().with_tol(tol))
}

pub fn spectral_norm_with<A>(a: &A, opts: &LanczosOptions) -> Result<f64>
where
    A: LinearOperator + ?Sized,
{
    if a.dim() == 1 {
        let y = a.apply_vec(&[1.0]);
        return Ok(y[0].abs());
    }
    let top = largest(&a, 1, opts)?;
    let bottom = largest(&Negated(a), 1, opts)?;
    Ok(top.values[0].max(bottom.values[0]).max(0.0))
}

fn estimate_upper_bound<A>(a: &A, opts: &LanczosOptions) -> Result<f64>
where
    A: LinearOperator + ?Sized,
{
    let loose = LanczosOptions { tol: 1e-4, ..*opts };
    let top = largest(a, 1, &loose)?;
    let theta = top.values[0];
    Ok(theta + 1e-3 * theta.abs())
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Orthogonalizes `w` against `basis` twice; returns the accumulated
/// coefficients.
fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) -> Vec<f64> {
    let mut coeff = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (c, v) in coeff.iter_mut().zip(basis) {
            let h = dot(v, w);
            *c += h;
            axpy(-h, v, w);
        }
    }
    coeff
}

/// Tries to produce a unit vector orthogonal to both sets.
fn fresh_direction(rng: &mut ChaCha8Rng, n: usize, basis: &[Vec<f64>], extra: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..3 {
        let mut w = random_vector(rng, n);
        let before = norm(&w);
        orthogonalize(basis, &mut w);
        orthogonalize(extra, &mut w);
        let after = norm(&w);
        if after > 1e-8 * before {
            w.iter_mut().for_each(|x| *x /= after);
            return Some(w);
        }
    }
    None
}

fn largest<A>(a: &A, k: usize, opts: &LanczosOptions) -> Result<Ritz>
where
    A: LinearOperator + ?Sized,
{
    let n = a.dim();
    let block = k.max(1).min(n);
    let m = opts.basis_size.max(k + 2 * block).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    for _ in 0..block {
        match fresh_direction(&mut rng, n, &basis, &[]) {
            Some(v) => basis.push(v),
            None => break,
        }
    }
    let mut h = DMatrix::<f64>::zeros(m, m);
    let mut pending: Range<usize> = 0..basis.len();
    let mut matvecs = 0usize;
    let mut scale = 0.0f64;

    loop {
        // Expand the basis until it is full; the final expansion yields the
        // residual block `Q` and coupling `R` with A V = V H + Q R E_lastᵀ.
        let (residual, coupling) = loop {
            let mut images: Vec<Vec<f64>> = Vec::with_capacity(pending.len());
            let mut image_norms = Vec::with_capacity(pending.len());
            for j in pending.clone() {
                let mut w = a.apply_vec(&basis[j]);
                matvecs += 1;
                let before = norm(&w);
                scale = scale.max(before);
                let coeff = orthogonalize(&basis, &mut w);
                for (i, c) in coeff.into_iter().enumerate() {
                    h[(i, j)] = c;
                }
                images.push(w);
                image_norms.push(before);
            }

            let mut r = DMatrix::<f64>::zeros(block, pending.len());
            let mut new_q: Vec<Vec<f64>> = Vec::with_capacity(block);
            for (c, mut w) in images.into_iter().enumerate() {
                let coeff = orthogonalize(&new_q, &mut w);
                for (qi, v) in coeff.into_iter().enumerate() {
                    r[(qi, c)] += v;
                }
                let nrm = norm(&w);
                if nrm > DEFLATION_RTOL * image_norms[c].max(scale) && nrm > 0.0 {
                    r[(new_q.len(), c)] = nrm;
                    w.iter_mut().for_each(|x| *x /= nrm);
                    new_q.push(w);
                }
            }
            let coupling = r.rows(0, new_q.len()).into_owned();
            // Pad a rank-deficient block with random directions (zero coupling).
            while new_q.len() < block && basis.len() + new_q.len() < n {
                match fresh_direction(&mut rng, n, &basis, &new_q) {
                    Some(v) => new_q.push(v),
                    None => break,
                }
            }
            let coupling = {
                let mut full = DMatrix::<f64>::zeros(new_q.len(), pending.len());
                full.rows_mut(0, coupling.nrows()).copy_from(&coupling);
                full
            };

            if !new_q.is_empty() && basis.len() + new_q.len() <= m {
                let start = basis.len();
                for (qi, q) in new_q.into_iter().enumerate() {
                    for (c, j) in pending.clone().enumerate() {
                        h[(start + qi, j)] = coupling[(qi, c)];
                    }
                    basis.push(q);
                }
                pending = start..basis.len();
            } else {
                break (new_q, coupling);
            }
        };

        let len = basis.len();
        let projected = {
            let hv = h.view((0, 0), (len, len));
            (hv + hv.transpose()) * 0.5
        };
        let eig = projected.symmetric_eigen();
        let mut order: Vec<usize> = (0..len).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));

        let residual_of = |col: usize| -> f64 {
            if coupling.nrows() == 0 {
                return 0.0;
            }
            let mut acc = 0.0;
            for r in 0..coupling.nrows() {
                let mut s = 0.0;
                for (c, j) in pending.clone().enumerate() {
                    s += coupling[(r, c)] * eig.eigenvectors[(j, col)];
                }
                acc += s * s;
            }
            acc.sqrt()
        };

        let theta_scale = order.iter().map(|&c| eig.eigenvalues[c].abs()).fold(scale, f64::max);
        let threshold = opts.tol * theta_scale;
        let wanted = k.min(len);
        let residuals: Vec<f64> = order[..wanted].iter().map(|&c| residual_of(c)).collect();
        let worst = residuals.iter().copied().fold(0.0, f64::max);

        if worst <= threshold {
            let vectors = order[..wanted]
                .iter()
                .map(|&c| {
                    let mut v = vec![0.0; n];
                    for (j, b) in basis.iter().enumerate() {
                        axpy(eig.eigenvectors[(j, c)], b, &mut v);
                    }
                    v
                })
                .collect();
            let values = order[..wanted].iter().map(|&c| eig.eigenvalues[c]).collect();
            return Ok(Ritz { values, vectors });
        }
        if matvecs >= opts.max_iter {
            return Err(Error::NoConvergence { iterations: matvecs, best_residual: worst });
        }

        // Krylov-Schur restart: keep the leading Ritz vectors, then continue
        // from the residual block.
        let keep = ((len + k) / 2).max(k).min(m - 2 * block).max(k);
        let mut kept: Vec<Vec<f64>> = Vec::with_capacity(m);
        for &c in &order[..keep] {
            let mut v = vec![0.0; n];
            for (j, b) in basis.iter().enumerate() {
                axpy(eig.eigenvectors[(j, c)], b, &mut v);
            }
            kept.push(v);
        }
        h.fill(0.0);
        for (i, &c) in order[..keep].iter().enumerate() {
            h[(i, i)] = eig.eigenvalues[c];
        }
        for r in 0..residual.len() {
            for (i, &c) in order[..keep].iter().enumerate() {
                let mut s = 0.0;
                for (cc, j) in pending.clone().enumerate() {
                    s += coupling[(r, cc)] * eig.eigenvectors[(j, c)];
                }
                h[(keep + r, i)] = s;
                h[(i, keep + r)] = s;
            }
        }
        kept.extend(residual);
        basis = kept;
        pending = keep..basis.len();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::operator::{DenseOperator, ScaledIdentity};
    use crate::linalg::sparse::SparseSymMatrix;

    fn c4() -> SparseSymMatrix {
        SparseSymMatrix::from_triplets(
            4,
            [
                (0, 0, 2.0),
                (1, 1, 2.0),
                (2, 2, 2.0),
                (3, 3, 2.0),
                (0, 1, -1.0),
                (1, 2, -1.0),
                (2, 3, -1.0),
                (3, 0, -1.0),
            ],
        )
        .unwrap()
    }

    fn gram_is_identity(v: &[Vec<f64>], tol: f64) -> bool {
        v.iter().enumerate().all(|(i, a)| {
            v.iter().enumerate().all(|(j, b)| {
                let target = if i == j { 1.0 } else { 0.0 };
                (dot(a, b) - target).abs() <= tol
            })
        })
    }

    #[test]
    fn identity_spectrum() {
        let a = ScaledIdentity { dim: 6, scale: 1.0 };
        let eig = smallest_eigenpairs(&a, 3, &LanczosOptions::default()).unwrap();
        for v in &eig.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!(gram_is_identity(&eig.vectors, 1e-10));
    }

    #[test]
    fn cycle_laplacian() {
        let eig = smallest_eigenpairs(&c4(), 2, &LanczosOptions::default()).unwrap();
        assert!(eig.values[0].abs() < 1e-10);
        assert!((eig.values[1] - 2.0).abs() < 1e-10);
        assert!(eig.residual_norms.iter().all(|r| *r < 1e-8));
    }

    #[test]
    fn zero_matrix() {
        let a = ScaledIdentity { dim: 5, scale: 0.0 };
        let eig = smallest_eigenpairs(&a, 2, &LanczosOptions::default()).unwrap();
        assert_eq!(eig.values, vec![0.0, 0.0]);
    }

    #[test]
    fn k_must_be_below_dim() {
        let a = ScaledIdentity { dim: 3, scale: 1.0 };
        assert!(matches!(smallest_eigenpairs(&a, 3, &LanczosOptions::default()), Err(Error::Dimension(_))));
        assert!(matches!(smallest_eigenpairs(&a, 0, &LanczosOptions::default()), Err(Error::Dimension(_))));
    }

    #[test]
    fn norm_of_diagonal() {
        let a = DenseOperator(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -3.0, 2.0])));
        assert!((spectral_norm(&a, 1e-10).unwrap() - 3.0).abs() < 1e-9);
        let z = ScaledIdentity { dim: 4, scale: 0.0 };
        assert_eq!(spectral_norm(&z, 1e-10).unwrap(), 0.0);
        assert!((spectral_norm(&c4(), 1e-10).unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn restarts_on_a_long_path() {
        // Path Laplacian of 400 nodes: tiny relative gap, forces many restarts.
        let n = 400;
        let mut trip = Vec::new();
        for i in 0..n {
            let deg = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
            trip.push((i, i, deg));
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
            }
        }
        let l = SparseSymMatrix::from_triplets(n, trip).unwrap();
        let opts = LanczosOptions { basis_size: 40, ..Default::default() };
        let eig = smallest_eigenpairs(&l, 3, &opts).unwrap();
        for (j, v) in eig.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * (core::f64::consts::PI * j as f64 / n as f64).cos();
            assert!((v - exact).abs() < 1e-9, "λ{j} = {v}, expected {exact}");
        }
    }

    #[test]
    fn budget_exhaustion_reports_no_convergence() {
        let n = 400;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 2.0));
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
            }
        }
        let l = SparseSymMatrix::from_triplets(n, trip).unwrap();
        let opts = LanczosOptions { basis_size: 20, max_iter: 30, ..Default::default() };
        assert!(matches!(smallest_eigenpairs(&l, 2, &opts), Err(Error::NoConvergence { .. })));
    }
}
