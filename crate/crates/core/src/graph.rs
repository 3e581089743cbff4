//! Pose-graph data model and weight-graph Laplacians.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{SparseSymMatrix, TripletBuilder};

/// Tolerance for membership in SO(d).
pub const SO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    RotationOnly,
    Full,
}

/// One directed relative measurement `i → j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeMeasurement {
    pub i: usize,
    pub j: usize,
    pub rotation: DMatrix<f64>,
    pub translation: Option<DVector<f64>>,
    pub kappa: f64,
    pub tau: Option<f64>,
}

impl RelativeMeasurement {
    pub fn rotation_only(i: usize, j: usize, rotation: DMatrix<f64>, kappa: f64) -> Self {
        Self { i, j, rotation, translation: None, kappa, tau: None }
    }

    pub fn pose(i: usize, j: usize, rotation: DMatrix<f64>, translation: DVector<f64>, kappa: f64, tau: f64) -> Self {
        Self { i, j, rotation, translation: Some(translation), kappa, tau: Some(tau) }
    }
}

/// Returns `Some(reason)` when `r` is not a d×d rotation within [`SO_TOL`].
pub fn so_violation(r: &DMatrix<f64>, d: usize) -> Option<String> {
    if r.nrows() != d || r.ncols() != d {
        return Some(format!("expected a {d}x{d} matrix, got {}x{}", r.nrows(), r.ncols()));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Some("non-finite entry".into());
    }
    let gram = r.transpose() * r;
    let off = (gram - DMatrix::<f64>::identity(d, d)).amax();
    if off > SO_TOL {
        return Some(format!("not orthogonal (max deviation {off:e})"));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > SO_TOL {
        return Some(format!("determinant {det} is not +1"));
    }
    None
}

/// Directed measurement graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseGraph {
    d: usize,
    n: usize,
    mode: Mode,
    edges: Vec<RelativeMeasurement>,
}

impl PoseGraph {
    /// Validates and builds a graph. In `Full` mode every edge must carry a
    /// translation and a precision; in `RotationOnly` mode any translation
    /// data is dropped.
    pub fn new(d: usize, n: usize, mode: Mode, mut edges: Vec<RelativeMeasurement>) -> Result<Self> {
        if d != 2 && d != 3 {
            return Err(Error::Dimension(format!("ambient dimension must be 2 or 3, got {d}")));
        }
        if n == 0 {
            return Err(Error::Dimension("graph needs at least one node".into()));
        }
        let mut seen = BTreeSet::new();
        for (k, e) in edges.iter_mut().enumerate() {
            let bad = |reason: String| Error::InvalidMeasurement { edge: k, reason };
            if e.i >= n || e.j >= n {
                return Err(bad(format!("endpoint outside [0, {n})")));
            }
            if e.i == e.j {
                return Err(bad("self loop".into()));
            }
            if !seen.insert((e.i, e.j)) {
                return Err(bad(format!("duplicate measurement {} -> {}", e.i, e.j)));
            }
            if let Some(reason) = so_violation(&e.rotation, d) {
                return Err(bad(reason));
            }
            if !(e.kappa > 0.0 && e.kappa.is_finite()) {
                return Err(bad(format!("kappa must be positive, got {}", e.kappa)));
            }
            match mode {
                Mode::RotationOnly => {
                    e.translation = None;
                    e.tau = None;
                }
                Mode::Full => {
                    match &e.translation {
                        Some(t) if t.len() == d && t.iter().all(|v| v.is_finite()) => {}
                        Some(_) => return Err(bad("translation has wrong length or non-finite entries".into())),
                        None => return Err(bad("full-pose graph requires a translation".into())),
                    }
                    match e.tau {
                        Some(t) if t >= 0.0 && t.is_finite() => {}
                        _ => return Err(bad("full-pose graph requires a finite tau >= 0".into())),
                    }
                }
            }
        }
        Ok(Self { d, n, mode, edges })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn edges(&self) -> &[RelativeMeasurement] {
        &self.edges
    }

    /// Copy with translation data dropped.
    pub fn rotation_only(&self) -> Self {
        let edges = self
            .edges
            .iter()
            .map(|e| RelativeMeasurement { translation: None, tau: None, ..e.clone() })
            .collect();
        Self { d: self.d, n: self.n, mode: Mode::RotationOnly, edges }
    }

    /// Same topology and precisions, with measurements replaced by the exact
    /// relative poses of `truth`. Translations are only used in full mode.
    pub fn noiseless_like(&self, truth: &PoseSet) -> Result<Self> {
        self.check_truth(truth)?;
        let edges = self
            .edges
            .iter()
            .map(|e| {
                let (rotation, translation) = truth.relative(e.i, e.j);
                RelativeMeasurement {
                    rotation,
                    translation: e.translation.as_ref().map(|_| translation),
                    ..e.clone()
                }
            })
            .collect();
        Ok(Self { d: self.d, n: self.n, mode: self.mode, edges })
    }

    pub(crate) fn check_truth(&self, truth: &PoseSet) -> Result<()> {
        if truth.rotations.d() != self.d || truth.rotations.n() != self.n {
            return Err(Error::Dimension(format!(
                "ground truth is ({}, {}), graph is ({}, {})",
                truth.rotations.d(),
                truth.rotations.n(),
                self.d,
                self.n
            )));
        }
        Ok(())
    }

    /// Replaces edge measurements in order; topology and precisions stay.
    pub(crate) fn with_measurements(&self, measurements: Vec<(DMatrix<f64>, Option<DVector<f64>>)>) -> Self {
        let edges = self
            .edges
            .iter()
            .zip(measurements)
            .map(|(e, (rotation, translation))| RelativeMeasurement { rotation, translation, ..e.clone() })
            .collect();
        Self { d: self.d, n: self.n, mode: self.mode, edges }
    }

    /// True iff the undirected support graph is connected.
    pub fn check_connected(&self) -> bool {
        let mut uf = UnionFind::new(self.n);
        let mut components = self.n;
        for e in &self.edges {
            if uf.union(e.i, e.j) {
                components -= 1;
            }
        }
        components == 1
    }

    /// Undirected adjacency lists; each entry is `(neighbor, edge index)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (k, e) in self.edges.iter().enumerate() {
            adj[e.i].push((e.j, k));
            adj[e.j].push((e.i, k));
        }
        adj
    }

    /// Breadth-first order from node 0 with the edge used to reach each node.
    pub(crate) fn bfs_tree(&self) -> Vec<(usize, Option<usize>)> {
        let adj = self.adjacency();
        let mut visited = vec![false; self.n];
        let mut order = Vec::with_capacity(self.n);
        let mut queue = VecDeque::from([(0usize, None)]);
        visited[0] = true;
        while let Some((v, via)) = queue.pop_front() {
            order.push((v, via));
            for &(w, k) in &adj[v] {
                if !visited[w] {
                    visited[w] = true;
                    queue.push_back((w, Some(k)));
                }
            }
        }
        order
    }

    /// Rotational and translational weight-graph Laplacians.
    pub fn weight_laplacians(&self) -> (SparseSymMatrix, Option<SparseSymMatrix>) {
        let rho = self.weight_laplacian(|e| e.kappa);
        let tau = match self.mode {
            Mode::Full => Some(self.weight_laplacian(|e| e.tau.unwrap_or(0.0))),
            Mode::RotationOnly => None,
        };
        (rho, tau)
    }

    fn weight_laplacian(&self, weight: impl Fn(&RelativeMeasurement) -> f64) -> SparseSymMatrix {
        let mut b = TripletBuilder::new(self.n);
        b.reserve(3 * self.edges.len() + self.n);
        for i in 0..self.n {
            b.push(i, i, 0.0);
        }
        for e in &self.edges {
            let w = weight(e);
            b.push(e.i, e.i, w);
            b.push(e.j, e.j, w);
            b.push(e.i, e.j, -w);
        }
        b.build().expect("indices validated at construction")
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            core::cmp::Ordering::Less => self.parent[ra] = rb,
            core::cmp::Ordering::Greater => self.parent[rb] = ra,
            core::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// An element of SO(d)^n, stored as the d×dn matrix `[R_1 … R_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationSet {
    d: usize,
    n: usize,
    stacked: DMatrix<f64>,
}

impl RotationSet {
    pub fn from_blocks(blocks: &[DMatrix<f64>]) -> Result<Self> {
        let n = blocks.len();
        if n == 0 {
            return Err(Error::Dimension("rotation set needs at least one block".into()));
        }
        let d = blocks[0].nrows();
        let mut stacked = DMatrix::zeros(d, d * n);
        for (i, b) in blocks.iter().enumerate() {
            if let Some(reason) = so_violation(b, d) {
                return Err(Error::InvalidArgument(format!("block {i}: {reason}")));
            }
            stacked.view_mut((0, d * i), (d, d)).copy_from(b);
        }
        Ok(Self { d, n, stacked })
    }

    /// Builds from a d×dn matrix whose blocks are already rotations.
    pub fn from_stacked(stacked: DMatrix<f64>) -> Result<Self> {
        let d = stacked.nrows();
        if d == 0 || !stacked.ncols().is_multiple_of(d) || stacked.ncols() == 0 {
            return Err(Error::Dimension(format!("{}x{} is not d x dn", stacked.nrows(), stacked.ncols())));
        }
        let n = stacked.ncols() / d;
        for i in 0..n {
            if let Some(reason) = so_violation(&stacked.view((0, d * i), (d, d)).into_owned(), d) {
                return Err(Error::InvalidArgument(format!("block {i}: {reason}")));
            }
        }
        Ok(Self { d, n, stacked })
    }

    pub fn identity(d: usize, n: usize) -> Self {
        let mut stacked = DMatrix::zeros(d, d * n);
        for i in 0..n {
            stacked.view_mut((0, d * i), (d, d)).fill_with_identity();
        }
        Self { d, n, stacked }
    }

    pub(crate) fn from_stacked_unchecked(stacked: DMatrix<f64>) -> Self {
        let d = stacked.nrows();
        Self { d, n: stacked.ncols() / d, stacked }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block(&self, i: usize) -> DMatrix<f64> {
        self.stacked.view((0, self.d * i), (self.d, self.d)).into_owned()
    }

    pub fn blocks(&self) -> Vec<DMatrix<f64>> {
        (0..self.n).map(|i| self.block(i)).collect()
    }

    /// The d×dn matrix `[R_1 … R_n]`.
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.stacked
    }

    /// Left-multiplies every block by `g`.
    pub fn left_mul(&self, g: &DMatrix<f64>) -> Self {
        Self { d: self.d, n: self.n, stacked: g * &self.stacked }
    }
}

/// Poses `x_i = (t_i, R_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSet {
    pub rotations: RotationSet,
    pub translations: Vec<DVector<f64>>,
}

impl PoseSet {
    pub fn new(rotations: RotationSet, translations: Vec<DVector<f64>>) -> Result<Self> {
        if translations.len() != rotations.n() || translations.iter().any(|t| t.len() != rotations.d()) {
            return Err(Error::Dimension("translations do not match the rotation set".into()));
        }
        Ok(Self { rotations, translations })
    }

    /// Rotations with all translations at the origin.
    pub fn from_rotations(rotations: RotationSet) -> Self {
        let translations = vec![DVector::zeros(rotations.d()); rotations.n()];
        Self { rotations, translations }
    }

    /// Exact relative pose from `i` to `j`: `(R_iᵀ R_j, R_iᵀ (t_j − t_i))`.
    pub fn relative(&self, i: usize, j: usize) -> (DMatrix<f64>, DVector<f64>) {
        let ri = self.rotations.block(i);
        let rj = self.rotations.block(j);
        let rel_r = ri.transpose() * rj;
        let rel_t = ri.transpose() * (&self.translations[j] - &self.translations[i]);
        (rel_r, rel_t)
    }
}
