//! Data matrices of the rotation-averaging and pose-graph objectives.
//!
//! Both problems reduce to `min tr(Q RᵀR)` over `R ∈ SO(d)^n`, with
//! `Q = L(G^ρ)` for rotation averaging and `Q = L(G^ρ) + Q_τ` for pose-graph
//! optimization once translations are eliminated analytically.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{Mode, PoseGraph};
use crate::linalg::lanczos::spectral_norm_with;
use crate::linalg::operator::dot;
use crate::linalg::{Difference, LanczosOptions, LaplacianPinv, LinearOperator, SparseSymMatrix, TripletBuilder};

/// Rotation connection Laplacian: diagonal blocks `d_i I`, block `(i, j)`
/// equal to `−κ_ij R̃_ij` and block `(j, i)` its transpose.
pub fn rotation_connection_laplacian(g: &PoseGraph) -> SparseSymMatrix {
    let (d, n) = (g.d(), g.n());
    let mut b = TripletBuilder::new(d * n).with_block_size(d);
    b.reserve(g.edges().len() * (d * d + 2 * d) + d * n);
    for k in 0..d * n {
        b.push(k, k, 0.0);
    }
    for e in g.edges() {
        for a in 0..d {
            b.push(d * e.i + a, d * e.i + a, e.kappa);
            b.push(d * e.j + a, d * e.j + a, e.kappa);
            for c in 0..d {
                b.push(d * e.i + a, d * e.j + c, -e.kappa * e.rotation[(a, c)]);
            }
        }
    }
    b.build().expect("indices validated at construction")
}

#[derive(Debug, Clone)]
struct TranslationEdge {
    tail: usize,
    head: usize,
    /// `τ t̃`
    weighted: DVector<f64>,
}

/// `Q_τ = Ω − Ṽᵀ L(W^τ)† Ṽ`, applied without forming the dense matrix.
#[derive(Debug, Clone)]
pub struct TranslationalOperator {
    d: usize,
    n: usize,
    edges: Vec<TranslationEdge>,
    omega: Vec<DMatrix<f64>>,
    pinv: LaplacianPinv,
}

impl TranslationalOperator {
    pub fn new(g: &PoseGraph) -> Result<Self> {
        if g.mode() != Mode::Full {
            return Err(Error::Mode);
        }
        let (d, n) = (g.d(), g.n());
        let (_, l_tau) = g.weight_laplacians();
        let pinv = LaplacianPinv::new(&l_tau.expect("full mode has translation weights"))?;
        let mut omega = vec![DMatrix::zeros(d, d); n];
        let mut edges = Vec::with_capacity(g.edges().len());
        for e in g.edges() {
            let tau = e.tau.expect("full mode");
            let t = e.translation.as_ref().expect("full mode");
            omega[e.i] += tau * t * t.transpose();
            edges.push(TranslationEdge { tail: e.i, head: e.j, weighted: t * tau });
        }
        Ok(Self { d, n, edges, omega, pinv })
    }

    /// `Ṽ v`, a vector of length n.
    fn cross(&self, v: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut out = vec![0.0; self.n];
        for e in &self.edges {
            let s = dot(e.weighted.as_slice(), &v[d * e.tail..d * e.tail + d]);
            out[e.tail] += s;
            out[e.head] -= s;
        }
        out
    }

    /// `y −= Ṽᵀ u`.
    fn sub_cross_transpose(&self, u: &[f64], y: &mut [f64]) {
        let d = self.d;
        for e in &self.edges {
            let s = u[e.tail] - u[e.head];
            for a in 0..d {
                y[d * e.tail + a] -= s * e.weighted[a];
            }
        }
    }
}

impl LinearOperator for TranslationalOperator {
    fn dim(&self) -> usize {
        self.d * self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let d = self.d;
        for (i, om) in self.omega.iter().enumerate() {
            for a in 0..d {
                y[d * i + a] = (0..d).map(|c| om[(a, c)] * x[d * i + c]).sum();
            }
        }
        let v = self.cross(x);
        let mut u = vec![0.0; self.n];
        self.pinv.apply(&v, &mut u);
        self.sub_cross_transpose(&u, y);
    }

    /// `Q_τ ⪯ Ω`, whose largest eigenvalue is at most `max_i tr(Ω_i)`.
    fn upper_eigen_bound(&self) -> Option<f64> {
        Some(self.omega.iter().map(|m| m.trace()).fold(0.0, f64::max))
    }
}

/// Implicit `Q_τ` for a connected full-pose graph.
pub fn translational_data_operator(g: &PoseGraph) -> Result<TranslationalOperator> {
    TranslationalOperator::new(g)
}

/// The assembled objective matrix `Q`.
#[derive(Debug, Clone)]
pub struct DataMatrixSet {
    d: usize,
    n: usize,
    mode: Mode,
    connection: SparseSymMatrix,
    translational: Option<TranslationalOperator>,
}

impl DataMatrixSet {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn connection_laplacian(&self) -> &SparseSymMatrix {
        &self.connection
    }

    pub fn translational(&self) -> Option<&TranslationalOperator> {
        self.translational.as_ref()
    }

    /// `tr(Q RᵀR) = Σ_k r_kᵀ Q r_k` over the rows `r_k` of a d×dn matrix.
    pub fn trace_form(&self, r: &DMatrix<f64>) -> f64 {
        let mut total = 0.0;
        let mut qr = vec![0.0; self.dim()];
        for k in 0..r.nrows() {
            let row: Vec<f64> = r.row(k).iter().copied().collect();
            self.apply(&row, &mut qr);
            total += dot(&row, &qr);
        }
        total
    }

    /// `R Q` for a d×dn matrix `R`.
    pub fn right_mul(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(r.nrows(), r.ncols());
        let mut qr = vec![0.0; self.dim()];
        for k in 0..r.nrows() {
            let row: Vec<f64> = r.row(k).iter().copied().collect();
            self.apply(&row, &mut qr);
            for (c, v) in qr.iter().enumerate() {
                out[(k, c)] = *v;
            }
        }
        out
    }
}

impl LinearOperator for DataMatrixSet {
    fn dim(&self) -> usize {
        self.d * self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.connection.mul_vec(x, y);
        if let Some(qt) = &self.translational {
            let extra = qt.apply_vec(x);
            for (yi, ei) in y.iter_mut().zip(extra) {
                *yi += ei;
            }
        }
    }

    fn upper_eigen_bound(&self) -> Option<f64> {
        let base = self.connection.gershgorin_upper();
        let extra = self.translational.as_ref().and_then(|t| t.upper_eigen_bound()).unwrap_or(0.0);
        Some(base + extra)
    }
}

/// Assembles `Q` for the requested problem. Full mode needs a full-pose graph.
pub fn assemble(g: &PoseGraph, mode: Mode) -> Result<DataMatrixSet> {
    if !g.check_connected() {
        return Err(Error::DisconnectedGraph);
    }
    let translational = match mode {
        Mode::RotationOnly => None,
        Mode::Full => Some(TranslationalOperator::new(g)?),
    };
    Ok(DataMatrixSet { d: g.d(), n: g.n(), mode, connection: rotation_connection_laplacian(g), translational })
}

/// Checks that two graphs share dimensions, edges and precisions.
pub fn same_topology(a: &PoseGraph, b: &PoseGraph) -> bool {
    a.d() == b.d()
        && a.n() == b.n()
        && a.mode() == b.mode()
        && a.edges().len() == b.edges().len()
        && a.edges().iter().zip(b.edges()).all(|(x, y)| x.i == y.i && x.j == y.j && x.kappa == y.kappa && x.tau == y.tau)
}

/// `‖Q̃ − Q̲‖₂` for two graphs that differ only in their measurements.
pub fn perturbation_spectral_norm(noisy: &PoseGraph, truth: &PoseGraph, mode: Mode, opts: &LanczosOptions) -> Result<f64> {
    if !same_topology(noisy, truth) {
        return Err(Error::TopologyMismatch);
    }
    match mode {
        Mode::RotationOnly => {
            // Diagonal blocks cancel; only the off-diagonal measurement blocks remain.
            let (d, n) = (noisy.d(), noisy.n());
            let mut b = TripletBuilder::new(d * n).with_block_size(d);
            for k in 0..d * n {
                b.push(k, k, 0.0);
            }
            for (x, y) in noisy.edges().iter().zip(truth.edges()) {
                for a in 0..d {
                    for c in 0..d {
                        let delta = x.rotation[(a, c)] - y.rotation[(a, c)];
                        b.push(d * x.i + a, d * x.j + c, -x.kappa * delta);
                    }
                }
            }
            let delta = b.build()?;
            spectral_norm_with(&delta, opts)
        }
        Mode::Full => {
            let qn = assemble(noisy, Mode::Full)?;
            let qt = assemble(truth, Mode::Full)?;
            spectral_norm_with(&Difference { lhs: &qn, rhs: &qt }, opts)
        }
    }
}
