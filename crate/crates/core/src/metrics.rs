//! Gauge-invariant error metrics, objective values and local refinement.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[cfg(not(feature = "std"))]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::datamatrix::{assemble, DataMatrixSet};
use crate::error::{Error, Result};
use crate::graph::{Mode, PoseGraph, RotationSet};
use crate::linalg::svd_small;
use crate::spectral::{project_to_so, round_blocks};

/// Optimal gauge `G` and the distance `‖X − G Y‖_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    pub distance: f64,
    pub gauge: DMatrix<f64>,
}

fn check_shapes(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
    if x.shape() != y.shape() || x.nrows() == 0 || !x.ncols().is_multiple_of(x.nrows()) {
        return Err(Error::Dimension(alloc::format!(
            "cannot align {}x{} with {}x{}",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    Ok(())
}

fn aligned(x: &DMatrix<f64>, y: &DMatrix<f64>, gauge: DMatrix<f64>) -> AlignmentResult {
    let distance = (x - &gauge * y).norm();
    AlignmentResult { distance, gauge }
}

/// `min_{G ∈ SO(d)} ‖X − G Y‖_F` for d×dn matrices.
pub fn so_orbit_distance(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<AlignmentResult> {
    check_shapes(x, y)?;
    let gauge = project_to_so(&(x * y.transpose()));
    Ok(aligned(x, y, gauge))
}

/// `min_{G ∈ O(d)} ‖X − G Y‖_F` for d×dn matrices.
pub fn o_orbit_distance(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<AlignmentResult> {
    check_shapes(x, y)?;
    let (u, _, v) = svd_small(&(x * y.transpose()));
    Ok(aligned(x, y, u * v.transpose()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostKind {
    /// `Σ κ ‖R_j − R_i R̃_ij‖²_F`
    Rotation,
    /// Rotation cost plus `Σ τ ‖t_j − t_i − R_i t̃_ij‖²`.
    Pose,
    /// `tr(Q RᵀR)` with `Q` assembled in the given mode.
    Quadratic(Mode),
}

/// Objective value of an estimate. `translations` are required for
/// [`CostKind::Pose`].
pub fn evaluate_cost(g: &PoseGraph, rotations: &RotationSet, translations: Option<&[DVector<f64>]>, kind: CostKind) -> Result<f64> {
    if rotations.d() != g.d() || rotations.n() != g.n() {
        return Err(Error::Dimension("estimate does not match the graph".into()));
    }
    match kind {
        CostKind::Rotation => Ok(rotation_cost(g, rotations)),
        CostKind::Pose => {
            let t = translations.ok_or(Error::Mode)?;
            if g.mode() != Mode::Full {
                return Err(Error::Mode);
            }
            if t.len() != g.n() {
                return Err(Error::Dimension("translation count does not match the graph".into()));
            }
            let mut total = rotation_cost(g, rotations);
            for e in g.edges() {
                let ri = rotations.block(e.i);
                let r = &t[e.j] - &t[e.i] - ri * e.translation.as_ref().expect("full mode");
                total += e.tau.expect("full mode") * r.norm_squared();
            }
            Ok(total)
        }
        CostKind::Quadratic(mode) => Ok(assemble(g, mode)?.trace_form(rotations.as_matrix())),
    }
}

fn rotation_cost(g: &PoseGraph, r: &RotationSet) -> f64 {
    g.edges()
        .iter()
        .map(|e| e.kappa * (r.block(e.j) - r.block(e.i) * &e.rotation).norm_squared())
        .sum()
}

/// Splits `R̂ = K + P` with `K = (1/n) R̂ R̲ᵀ R̲` the projection onto the
/// subspace `{G R̲}` and `P` the orthogonal remainder.
pub fn orthogonal_decomposition(r_hat: &DMatrix<f64>, r_true: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_shapes(r_hat, r_true)?;
    let n = (r_true.ncols() / r_true.nrows()) as f64;
    let k = (r_hat * r_true.transpose()) * r_true / n;
    let p = r_hat - &k;
    Ok((k, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineOptions {
    pub max_iter: usize,
    /// Absolute tolerance on the Riemannian gradient Frobenius norm.
    pub grad_tol: f64,
    pub mode: Mode,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Maximum number of step halvings per iteration.
    pub max_backtracks: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self { max_iter: 1000, grad_tol: 1e-6, mode: Mode::Full, armijo: 1e-4, max_backtracks: 60 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    /// d×dn estimate.
    pub rotations: DMatrix<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub initial_cost: f64,
    pub cost: f64,
}

impl RefineOutcome {
    pub fn rotation_set(&self) -> RotationSet {
        RotationSet::from_stacked_unchecked(self.rotations.clone())
    }
}

/// Riemannian gradient of `tr(Q RᵀR)` on SO(d)^n: `G_i = E_i − R_i sym(R_iᵀ E_i)`
/// with `E = 2 R Q`.
pub fn riemannian_gradient(q: &DataMatrixSet, r: &DMatrix<f64>) -> DMatrix<f64> {
    tangent_projection(r, &(q.right_mul(r) * 2.0))
}

fn tangent_projection(r: &DMatrix<f64>, egrad: &DMatrix<f64>) -> DMatrix<f64> {
    let d = r.nrows();
    let mut out = DMatrix::zeros(d, r.ncols());
    for i in 0..r.ncols() / d {
        let ri = r.view((0, d * i), (d, d));
        let ei = egrad.view((0, d * i), (d, d));
        let m = ri.transpose() * ei;
        let sym = (&m + m.transpose()) * 0.5;
        out.view_mut((0, d * i), (d, d)).copy_from(&(ei - ri * sym));
    }
    out
}

/// Riemannian gradient descent with Armijo backtracking and
/// Barzilai-Borwein initial steps, retracting through blockwise projection.
/// The cost never increases. Exhausting `max_iter` returns
/// [`Error::RefineNoConvergence`] carrying the last iterate.
pub fn refine(g: &PoseGraph, init: &RotationSet, opts: &RefineOptions) -> Result<RefineOutcome> {
    if init.d() != g.d() || init.n() != g.n() {
        return Err(Error::Dimension("initial estimate does not match the graph".into()));
    }
    let q = assemble(g, opts.mode)?;
    refine_with(&q, init.as_matrix(), opts)
}

pub fn refine_with(q: &DataMatrixSet, init: &DMatrix<f64>, opts: &RefineOptions) -> Result<RefineOutcome> {
    let mut r = init.clone();
    let mut cost = q.trace_form(&r);
    let initial_cost = cost;
    let mut rq = q.right_mul(&r);
    let mut grad = tangent_projection(&r, &(&rq * 2.0));
    let mut gnorm = grad.norm();
    let sigma = q.connection_laplacian().gershgorin_upper()
        + q.translational().and_then(crate::linalg::LinearOperator::upper_eigen_bound).unwrap_or(0.0);
    let mut step = if sigma > 0.0 { 1.0 / (2.0 * sigma) } else { 1.0 };
    let mut prev: Option<(DMatrix<f64>, DMatrix<f64>)> = None;

    for it in 0..opts.max_iter {
        if gnorm <= opts.grad_tol {
            return Ok(RefineOutcome { rotations: r, iterations: it, gradient_norm: gnorm, initial_cost, cost });
        }
        if let Some((dr, dg)) = &prev {
            let sy = dr.dot(dg);
            if sy > 0.0 {
                step = dr.norm_squared() / sy;
            }
        }
        let mut alpha = step;
        let g2 = gnorm * gnorm;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let candidate = round_blocks(&(&r - &grad * alpha)).as_matrix().clone();
            let change = cost_change(q, &r, &rq, &grad, &candidate);
            if change <= -opts.armijo * alpha * g2 {
                accepted = Some((candidate, cost + change));
                break;
            }
            alpha *= 0.5;
        }
        let Some((next, next_cost)) = accepted else {
            // No decrease at machine precision: the iterate is numerically stationary.
            return Err(Error::RefineNoConvergence {
                best: alloc::boxed::Box::new(RefineOutcome { rotations: r, iterations: it, gradient_norm: gnorm, initial_cost, cost }),
            });
        };
        rq = q.right_mul(&next);
        let next_grad = tangent_projection(&next, &(&rq * 2.0));
        prev = Some((&next - &r, &next_grad - &grad));
        r = next;
        cost = next_cost;
        grad = next_grad;
        gnorm = grad.norm();
    }
    if gnorm <= opts.grad_tol {
        return Ok(RefineOutcome { rotations: r, iterations: opts.max_iter, gradient_norm: gnorm, initial_cost, cost });
    }
    Err(Error::RefineNoConvergence {
        best: alloc::boxed::Box::new(RefineOutcome { rotations: r, iterations: opts.max_iter, gradient_norm: gnorm, initial_cost, cost }),
    })
}

/// `f(R') − f(R)` for rotations `R, R'` without differencing two large costs.
///
/// With `D = R' − R`, `f(R') − f(R) = 2⟨RQ, D⟩ + tr(Q DᵀD)`. Splitting
/// `RQ = ½ grad + R_i S_i` blockwise (`S_i` symmetric) and using
/// `sym(R_iᵀ D_i) = −½ M_iᵀ M_i` for `M_i = R_iᵀ D_i`, which holds exactly
/// when `R_i + D_i` is orthogonal, leaves only terms that are small when `D`
/// is small.
fn cost_change(q: &DataMatrixSet, r: &DMatrix<f64>, rq: &DMatrix<f64>, grad: &DMatrix<f64>, next: &DMatrix<f64>) -> f64 {
    let d = r.nrows();
    let delta = next - r;
    let mut normal = 0.0;
    for i in 0..r.ncols() / d {
        let ri = r.view((0, d * i), (d, d));
        let m = ri.transpose() * delta.view((0, d * i), (d, d));
        let a = ri.transpose() * rq.view((0, d * i), (d, d));
        let s = (&a + a.transpose()) * 0.5;
        normal += (s * m.transpose() * &m).trace();
    }
    grad.dot(&delta) - normal + q.trace_form(&delta)
}

/// Outcome of a refinement regardless of whether it met the tolerance.
pub fn refine_outcome(result: Result<RefineOutcome>) -> Result<RefineOutcome> {
    match result {
        Ok(o) => Ok(o),
        Err(Error::RefineNoConvergence { best }) => Ok(*best),
        Err(e) => Err(e),
    }
}

/// Root-mean-square of a list of values.
pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

/// Median of a list of values (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m == 0 {
        return f64::NAN;
    }
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::RelativeMeasurement;
    use crate::synth::rotation_2d;

    #[test]
    fn antipodal_pair_distance() {
        let x = RotationSet::from_blocks(&[DMatrix::identity(2, 2), DMatrix::identity(2, 2)]).unwrap();
        let y = RotationSet::from_blocks(&[DMatrix::identity(2, 2), rotation_2d(core::f64::consts::PI)]).unwrap();
        let a = so_orbit_distance(x.as_matrix(), y.as_matrix()).unwrap();
        assert!((a.distance - 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_node_is_pure_gauge() {
        let x = rotation_2d(0.3);
        let y = rotation_2d(-2.0);
        assert!(so_orbit_distance(&x, &y).unwrap().distance < 1e-14);
    }

    #[test]
    fn half_turn_edge_cost() {
        let e = RelativeMeasurement::rotation_only(0, 1, rotation_2d(core::f64::consts::PI), 1.0);
        let g = PoseGraph::new(2, 2, Mode::RotationOnly, alloc::vec![e]).unwrap();
        let r = RotationSet::identity(2, 2);
        let c = evaluate_cost(&g, &r, None, CostKind::Rotation).unwrap();
        assert!((c - 8.0).abs() < 1e-12);
        let quad = evaluate_cost(&g, &r, None, CostKind::Quadratic(Mode::RotationOnly)).unwrap();
        assert!((quad - 8.0).abs() < 1e-12);
    }

    #[test]
    fn median_and_rms() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((rms(&[3.0, 4.0]) - 12.5f64.sqrt()).abs() < 1e-15);
    }
}
