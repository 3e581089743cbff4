use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Singular value decomposition `X = U Σ Vᵀ` of a small square matrix with
/// singular values sorted in non-increasing order.
///
/// One-sided Jacobi: columns of `X V` are orthogonalized by plane rotations
/// until pairwise cosines fall below machine precision.
pub fn svd_small(x: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    assert!(x.is_square(), "svd_small expects a square matrix");
    let d = x.nrows();
    let mut a = x.clone();
    let mut v = DMatrix::<f64>::identity(d, d);

    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..d {
            for q in (p + 1)..d {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 { 1.0 } else { zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt()) };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut a, &mut v] {
                    for r in 0..d {
                        let (xp, xq) = (m[(r, p)], m[(r, q)]);
                        m[(r, p)] = c * xp - s * xq;
                        m[(r, q)] = s * xp + c * xq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..d).map(|k| a.column(k).norm()).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let sigma = DVector::from_iterator(d, order.iter().map(|&k| norms[k]));
    let v_sorted = DMatrix::from_fn(d, d, |r, c| v[(r, order[c])]);

    let cutoff = sigma.get(0).copied().unwrap_or(0.0) * f64::EPSILON * d as f64;
    let mut u = DMatrix::<f64>::zeros(d, d);
    let mut filled = 0;
    for (c, &k) in order.iter().enumerate() {
        if norms[k] <= cutoff || norms[k] == 0.0 {
            break;
        }
        u.set_column(c, &(a.column(k) / norms[k]));
        filled += 1;
    }
    complete_basis(&mut u, filled);
    (u, sigma, v_sorted)
}

/// Fills columns `filled..` of `u` with an orthonormal completion.
fn complete_basis(u: &mut DMatrix<f64>, filled: usize) {
    let d = u.nrows();
    let mut c = filled;
    for e in 0..d {
        if c == d {
            break;
        }
        let mut w = DVector::<f64>::zeros(d);
        w[e] = 1.0;
        for _ in 0..2 {
            for k in 0..c {
                let proj = u.column(k).dot(&w);
                w -= u.column(k) * proj;
            }
        }
        let n = w.norm();
        if n > 1e-8 {
            u.set_column(c, &(w / n));
            c += 1;
        }
    }
}
