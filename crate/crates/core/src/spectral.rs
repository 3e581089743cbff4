//! Spectral initialization, the chordal comparator, odometry composition and
//! translation recovery.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::datamatrix::{assemble, rotation_connection_laplacian};
use crate::error::{Error, Result};
use crate::graph::{Mode, PoseGraph, PoseSet, RotationSet};
use crate::linalg::{smallest_eigenpairs, svd_small, to_dense, LanczosOptions, LaplacianPinv, LinearOperator, SparseCholesky};

/// Minimizer of `tr(Q YᵀY)` subject to `Y Yᵀ = n I_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationSolution {
    pub d: usize,
    pub n: usize,
    /// d×dn; row k is `√n v_k`.
    pub y_star: DMatrix<f64>,
    /// The d smallest eigenvalues of `Q`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Optimal value `n Σ λ_k`.
    pub p_star: f64,
    /// `‖Q v_k − λ_k v_k‖₂`.
    pub residuals: Vec<f64>,
    /// `λ_{d+1} − λ_d` when the next eigenvalue was computed.
    pub eigengap: Option<f64>,
}

/// The `k` smallest eigenvalues/vectors, falling back to a dense solve when
/// the operator is too small for the Krylov solver.
pub(crate) fn smallest_k<A: LinearOperator + ?Sized>(
    a: &A,
    k: usize,
    opts: &LanczosOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    let n = a.dim();
    if k < n {
        let eig = smallest_eigenpairs(a, k, opts)?;
        return Ok((eig.values, eig.vectors, eig.residual_norms));
    }
    let dense = to_dense(a);
    let sym = (&dense + dense.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let take = k.min(n);
    let values = order[..take].iter().map(|&c| eig.eigenvalues[c]).collect();
    let vectors = order[..take].iter().map(|&c| eig.eigenvectors.column(c).iter().copied().collect()).collect();
    Ok((values, vectors, vec![0.0; take]))
}

/// Solves the relaxation for an arbitrary symmetric operator of size dn.
pub fn solve_relaxation_operator<A: LinearOperator + ?Sized>(q: &A, d: usize, opts: &LanczosOptions) -> Result<RelaxationSolution> {
    let dim = q.dim();
    if d == 0 || !dim.is_multiple_of(d) {
        return Err(Error::Dimension(alloc::format!("operator size {dim} is not a multiple of d = {d}")));
    }
    let n = dim / d;
    let want = (d + 1).min(dim);
    let (values, vectors, residuals) = smallest_k(q, want, opts)?;
    let scale = (n as f64).sqrt();
    let mut y_star = DMatrix::zeros(d, dim);
    for k in 0..d {
        for (c, v) in vectors[k].iter().enumerate() {
            y_star[(k, c)] = scale * v;
        }
    }
    orient(&mut y_star);
    let eigengap = if values.len() > d { Some(values[d] - values[d - 1]) } else { None };
    let eigenvalues: Vec<f64> = values[..d].to_vec();
    let p_star = n as f64 * eigenvalues.iter().sum::<f64>();
    Ok(RelaxationSolution { d, n, y_star, eigenvalues, p_star, residuals: residuals[..d].to_vec(), eigengap })
}

/// Picks the orientation of `Y` within its O(d) orbit: rounding commutes
/// with rotations but not reflections, so the last row is negated when most
/// blocks have negative determinant.
fn orient(y: &mut DMatrix<f64>) {
    let d = y.nrows();
    let n = y.ncols() / d;
    let negative = (0..n).filter(|&i| y.view((0, d * i), (d, d)).determinant() < 0.0).count();
    if 2 * negative > n {
        y.row_mut(d - 1).neg_mut();
    }
}

pub fn solve_relaxation(m: &crate::datamatrix::DataMatrixSet, opts: &LanczosOptions) -> Result<RelaxationSolution> {
    solve_relaxation_operator(m, m.d(), opts)
}

/// Nearest rotation `U Ξ Vᵀ` with `Ξ = diag(1, …, 1, det(U Vᵀ))`.
pub fn project_to_so(x: &DMatrix<f64>) -> DMatrix<f64> {
    let d = x.nrows();
    let (mut u, _, v) = svd_small(x);
    if (&u * v.transpose()).determinant() < 0.0 {
        for r in 0..d {
            u[(r, d - 1)] = -u[(r, d - 1)];
        }
    }
    u * v.transpose()
}

/// Rounds every d×d block of a d×dn matrix onto SO(d).
pub fn round_blocks(y: &DMatrix<f64>) -> RotationSet {
    let d = y.nrows();
    let n = y.ncols() / d;
    let mut out = DMatrix::zeros(d, d * n);
    for i in 0..n {
        let block = y.view((0, d * i), (d, d)).into_owned();
        out.view_mut((0, d * i), (d, d)).copy_from(&project_to_so(&block));
    }
    RotationSet::from_stacked_unchecked(out)
}

/// Spectral initialization: the bottom-d eigenvectors of `Q`, scaled and
/// rounded blockwise.
pub fn spectral_initialize(g: &PoseGraph, mode: Mode, opts: &LanczosOptions) -> Result<(RotationSet, RelaxationSolution)> {
    let q = assemble(g, mode)?;
    let relaxation = solve_relaxation(&q, opts)?;
    Ok((round_blocks(&relaxation.y_star), relaxation))
}

/// Chordal relaxation: unconstrained least squares over real d×d blocks with
/// the first block pinned to the identity, followed by rounding.
pub fn chordal_initialize(g: &PoseGraph) -> Result<RotationSet> {
    if !g.check_connected() {
        return Err(Error::DisconnectedGraph);
    }
    let (d, n) = (g.d(), g.n());
    if n == 1 {
        return Ok(RotationSet::identity(d, 1));
    }
    let l = rotation_connection_laplacian(g);
    let free = l.trailing(d)?;
    let chol = SparseCholesky::factor(&free).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::DisconnectedGraph,
        other => other,
    })?;
    // Row k of R minimizes r_kᵀ L r_k with its first block fixed to e_k.
    let mut stacked = DMatrix::zeros(d, d * n);
    for k in 0..d {
        let mut rhs = vec![0.0; d * (n - 1)];
        let (cols, vals) = l.row(k);
        for (&c, &v) in cols.iter().zip(vals) {
            if c >= d {
                rhs[c - d] = -v;
            }
        }
        chol.solve_in_place(&mut rhs);
        stacked[(k, k)] = 1.0;
        for (c, v) in rhs.into_iter().enumerate() {
            stacked[(k, d + c)] = v;
        }
    }
    Ok(round_blocks(&stacked))
}

/// Composes measurements along `i → i+1` when every such edge exists,
/// otherwise along a breadth-first spanning tree from node 0. Translations
/// are composed in full mode and left at zero otherwise.
pub fn odometry_initialize(g: &PoseGraph) -> Result<PoseSet> {
    if !g.check_connected() {
        return Err(Error::DisconnectedGraph);
    }
    let (d, n) = (g.d(), g.n());
    let mut index = alloc::collections::BTreeMap::new();
    for (k, e) in g.edges().iter().enumerate() {
        index.insert((e.i, e.j), k);
    }
    let chain: Option<Vec<usize>> = (1..n).map(|i| index.get(&(i - 1, i)).copied()).collect();
    let order: Vec<(usize, Option<usize>)> = match chain {
        Some(edges) => core::iter::once((0, None)).chain(edges.into_iter().enumerate().map(|(k, e)| (k + 1, Some(e)))).collect(),
        None => g.bfs_tree(),
    };

    let mut rotations = vec![DMatrix::identity(d, d); n];
    let mut translations = vec![DVector::zeros(d); n];
    for (v, via) in order {
        let Some(k) = via else { continue };
        let e = &g.edges()[k];
        let t = e.translation.clone().unwrap_or_else(|| DVector::zeros(d));
        if e.j == v {
            rotations[v] = &rotations[e.i] * &e.rotation;
            translations[v] = &translations[e.i] + &rotations[e.i] * t;
        } else {
            rotations[v] = &rotations[e.j] * e.rotation.transpose();
            translations[v] = &translations[e.j] - &rotations[v] * t;
        }
    }
    // Re-project to remove drift accumulated in long products.
    let rotations: Vec<DMatrix<f64>> = rotations.iter().map(project_to_so).collect();
    PoseSet::new(RotationSet::from_blocks(&rotations)?, translations)
}

/// Translations minimizing `Σ τ_ij ‖t_j − t_i − R_i t̃_ij‖²` for fixed
/// rotations, with `t_0 = 0`.
pub fn recover_translations(g: &PoseGraph, r: &RotationSet) -> Result<PoseSet> {
    if g.mode() != Mode::Full {
        return Err(Error::Mode);
    }
    if r.d() != g.d() || r.n() != g.n() {
        return Err(Error::Dimension("rotation set does not match the graph".into()));
    }
    if !g.check_connected() {
        return Err(Error::DisconnectedGraph);
    }
    let (d, n) = (g.d(), g.n());
    let (_, l_tau) = g.weight_laplacians();
    let pinv = LaplacianPinv::new(&l_tau.expect("full mode"))?;
    // Normal equations L T = B, one column per coordinate.
    let mut rhs = vec![vec![0.0; n]; d];
    for e in g.edges() {
        let tau = e.tau.expect("full mode");
        let c = r.block(e.i) * e.translation.as_ref().expect("full mode");
        for a in 0..d {
            rhs[a][e.j] += tau * c[a];
            rhs[a][e.i] -= tau * c[a];
        }
    }
    let cols: Vec<Vec<f64>> = rhs.iter().map(|b| pinv.solve_anchored(b)).collect();
    let translations = (0..n).map(|i| DVector::from_fn(d, |a, _| cols[a][i])).collect();
    PoseSet::new(r.clone(), translations)
}

/// Largest deviation from feasibility `‖Y Yᵀ − n I‖_max`.
pub fn feasibility_error(sol: &RelaxationSolution) -> f64 {
    let gram = &sol.y_star * sol.y_star.transpose();
    (gram - DMatrix::<f64>::identity(sol.d, sol.d) * sol.n as f64).amax()
}
