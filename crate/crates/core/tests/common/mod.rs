#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sorbit_core::graph::{Mode, PoseGraph, PoseSet, RelativeMeasurement, RotationSet};
use sorbit_core::synth::{random_rotation_set, resample};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cyclic Jacobi eigensolver for dense symmetric matrices. Returns ascending
/// eigenvalues and the matching eigenvectors as columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[(i, j)].powi(2)).sum();
        if off.sqrt() < 1e-15 * m.norm().max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(x, x)].total_cmp(&m[(y, y)]));
    let values = order.iter().map(|&k| m[(k, k)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Moore-Penrose pseudoinverse of a symmetric matrix via the Jacobi oracle.
pub fn pinv_symmetric(a: &DMatrix<f64>, cutoff: f64) -> DMatrix<f64> {
    let (values, vectors) = jacobi_eigen(a);
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (k, &lam) in values.iter().enumerate() {
        if lam.abs() > cutoff {
            let col = vectors.column(k);
            out += (col * col.transpose()) / lam;
        }
    }
    out
}

/// Random connected topology: a random spanning tree plus extra edges.
pub fn random_topology<R: Rng>(n: usize, extra: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        let (a, b) = if rng.random::<bool>() { (u, v) } else { (v, u) };
        pairs.push((a, b));
        seen.insert((a.min(b), a.max(b)));
    }
    let mut attempts = 0;
    while pairs.len() < n - 1 + extra && attempts < 100 * (extra + 1) {
        attempts += 1;
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b || !seen.insert((a.min(b), a.max(b))) {
            continue;
        }
        pairs.push((a, b));
    }
    pairs
}

/// Random ground truth with grid-free positions.
pub fn random_truth<R: Rng>(d: usize, n: usize, rng: &mut R) -> PoseSet {
    let rotations = random_rotation_set(d, n, rng);
    let translations = (0..n).map(|_| DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0))).collect();
    PoseSet::new(rotations, translations).unwrap()
}

/// Random instance: (noisy graph, noiseless graph, truth).
pub fn random_instance<R: Rng>(
    d: usize,
    n: usize,
    extra: usize,
    mode: Mode,
    kappa_range: (f64, f64),
    tau_range: (f64, f64),
    rng: &mut R,
) -> (PoseGraph, PoseGraph, PoseSet) {
    let truth = random_truth(d, n, rng);
    let pairs = random_topology(n, extra, rng);
    let edges = pairs
        .into_iter()
        .map(|(i, j)| {
            let kappa = rng.random_range(kappa_range.0..=kappa_range.1);
            let tau = rng.random_range(tau_range.0..=tau_range.1);
            let (r, t) = truth.relative(i, j);
            match mode {
                Mode::Full => RelativeMeasurement::pose(i, j, r, t, kappa, tau),
                Mode::RotationOnly => RelativeMeasurement::rotation_only(i, j, r, kappa),
            }
        })
        .collect();
    let clean = PoseGraph::new(d, n, mode, edges).unwrap();
    let noisy = resample(&clean, &truth, rng).unwrap();
    (noisy, clean, truth)
}

pub fn random_matrix<R: Rng>(r: usize, c: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_rotations<R: Rng>(d: usize, n: usize, rng: &mut R) -> RotationSet {
    random_rotation_set(d, n, rng)
}

/// Dense rotation connection Laplacian assembled from its block definition.
pub fn dense_connection_laplacian(g: &PoseGraph) -> DMatrix<f64> {
    let (d, n) = (g.d(), g.n());
    let mut m = DMatrix::zeros(d * n, d * n);
    for e in g.edges() {
        for a in 0..d {
            m[(d * e.i + a, d * e.i + a)] += e.kappa;
            m[(d * e.j + a, d * e.j + a)] += e.kappa;
        }
        let block = &e.rotation * -e.kappa;
        let mut v = m.view_mut((d * e.i, d * e.j), (d, d));
        v += &block;
        let mut w = m.view_mut((d * e.j, d * e.i), (d, d));
        w += block.transpose();
    }
    m
}

/// Dense `Ω − Ṽᵀ L(W^τ)† Ṽ` from the block definitions, with `L†` from the
/// Jacobi oracle.
pub fn dense_translational(g: &PoseGraph) -> DMatrix<f64> {
    let (d, n) = (g.d(), g.n());
    let mut omega = DMatrix::<f64>::zeros(d * n, d * n);
    let mut v = DMatrix::<f64>::zeros(n, d * n);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for e in g.edges() {
        let tau = e.tau.unwrap();
        let t = e.translation.as_ref().unwrap();
        let mut o = omega.view_mut((d * e.i, d * e.i), (d, d));
        o += t * t.transpose() * tau;
        for a in 0..d {
            v[(e.i, d * e.i + a)] += tau * t[a];
            v[(e.j, d * e.i + a)] -= tau * t[a];
        }
        l[(e.i, e.i)] += tau;
        l[(e.j, e.j)] += tau;
        l[(e.i, e.j)] -= tau;
        l[(e.j, e.i)] -= tau;
    }
    let lp = pinv_symmetric(&l, 1e-9 * l.norm().max(1.0));
    omega - v.transpose() * lp * v
}
