//! Synthetic measurement models and the cube benchmark generator.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Rotation3, Unit, UnitQuaternion, Vector3, Vector4};
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Mode, PoseGraph, PoseSet, RelativeMeasurement, RotationSet};

/// Planar rotation by `theta`.
pub fn rotation_2d(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Rotation about a unit axis by `theta`.
pub fn rotation_3d(axis: &Vector3<f64>, theta: f64) -> DMatrix<f64> {
    let r = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), theta);
    DMatrix::from_column_slice(3, 3, r.matrix().as_slice())
}

/// Rotation angle of a 2×2 or 3×3 rotation, in `[0, π]`.
pub fn rotation_angle(r: &DMatrix<f64>) -> f64 {
    match r.nrows() {
        2 => r[(1, 0)].atan2(r[(0, 0)]).abs(),
        _ => {
            // atan2 of (‖skew part‖, trace part) stays accurate near 0 and π.
            let s = 0.5
                * ((r[(2, 1)] - r[(1, 2)]).powi(2) + (r[(0, 2)] - r[(2, 0)]).powi(2) + (r[(1, 0)] - r[(0, 1)]).powi(2))
                    .sqrt();
            let c = 0.5 * (r.trace() - 1.0);
            s.atan2(c)
        }
    }
}

fn uniform_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::<f64>::from_fn(|_, _| StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Haar-uniform rotation.
pub fn sample_haar<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    match d {
        2 => rotation_2d(rng.random_range(-PI..PI)),
        3 => loop {
            let q = Vector4::<f64>::from_fn(|_, _| StandardNormal.sample(rng));
            if q.norm() > 1e-12 {
                let uq = UnitQuaternion::from_quaternion(nalgebra::Quaternion::from_vector(q));
                let m = uq.to_rotation_matrix();
                break DMatrix::from_column_slice(3, 3, m.matrix().as_slice());
            }
        },
        _ => panic!("unsupported dimension {d}"),
    }
}

/// Angle of a von Mises draw with concentration `c`, centered at 0.
fn sample_von_mises<R: Rng + ?Sized>(c: f64, rng: &mut R) -> f64 {
    if c < 1.0 {
        // Uniform proposal; acceptance exp(c (cos θ − 1)) ≥ e^{−2c}.
        loop {
            let theta = rng.random_range(-PI..PI);
            if rng.random::<f64>() < (c * (theta.cos() - 1.0)).exp() {
                return theta;
            }
        }
    }
    // Gaussian proposal using cos θ − 1 ≤ −2θ²/π² on [−π, π].
    let sigma = PI / (2.0 * c.sqrt());
    loop {
        let z: f64 = StandardNormal.sample(rng);
        let theta = sigma * z;
        if theta.abs() > PI {
            continue;
        }
        let log_accept = c * (theta.cos() - 1.0) + 2.0 * c * theta * theta / (PI * PI);
        if rng.random::<f64>().ln() < log_accept {
            return theta;
        }
    }
}

/// Rotation angle of an isotropic Langevin draw in SO(3), with density
/// proportional to `(1 − cos θ) exp(2κ cos θ)` on `[0, π]`.
fn sample_langevin_angle_3d<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> f64 {
    let one_minus_cos = |t: f64| 2.0 * (0.5 * t).sin().powi(2);
    if kappa < 1.0 {
        // Envelope: maximum of (1 − cos θ) e^{2κ (cos θ − 1)} over [0, π].
        let x_star = if 4.0 * kappa > 1.0 { 1.0 / (2.0 * kappa) } else { 2.0 };
        let envelope = x_star * (-2.0 * kappa * x_star).exp();
        loop {
            let theta = rng.random_range(0.0..PI);
            let x = one_minus_cos(theta);
            if rng.random::<f64>() * envelope <= x * (-2.0 * kappa * x).exp() {
                return theta;
            }
        }
    }
    // Maxwell proposal θ = σ|N(0, I₃)| with σ² = π²/(8κ), using
    // 1 − cos θ ≤ θ²/2 and 1 − cos θ ≥ 2θ²/π² on [0, π].
    let sigma = PI / (8.0 * kappa).sqrt();
    loop {
        let g = Vector3::<f64>::from_fn(|_, _| StandardNormal.sample(rng));
        let theta = sigma * g.norm();
        if theta > PI || theta == 0.0 {
            continue;
        }
        let x = one_minus_cos(theta);
        let log_accept = (2.0 * x / (theta * theta)).ln() - 2.0 * kappa * x + 4.0 * kappa * theta * theta / (PI * PI);
        if rng.random::<f64>().ln() < log_accept {
            return theta;
        }
    }
}

/// Isotropic Langevin rotation with mode `I` and concentration `kappa`,
/// density proportional to `exp(κ tr R)`.
pub fn sample_langevin<R: Rng + ?Sized>(d: usize, kappa: f64, rng: &mut R) -> DMatrix<f64> {
    assert!(kappa >= 0.0, "kappa must be nonnegative");
    match d {
        2 => rotation_2d(sample_von_mises(2.0 * kappa, rng)),
        3 => {
            let axis = uniform_unit_vector(rng);
            let theta = sample_langevin_angle_3d(kappa, rng);
            rotation_3d(&axis, theta)
        }
        _ => panic!("unsupported dimension {d}"),
    }
}

/// Isotropic Gaussian vector with covariance `I / tau`.
pub fn sample_translation_noise<R: Rng + ?Sized>(d: usize, tau: f64, rng: &mut R) -> DVector<f64> {
    let s = 1.0 / tau.sqrt();
    DVector::from_fn(d, |_, _| s * Distribution::<f64>::sample(&StandardNormal, rng))
}

/// Draws fresh noisy measurements on the topology of `g` around `truth`,
/// one edge at a time in edge order.
pub fn resample<R: Rng + ?Sized>(g: &PoseGraph, truth: &PoseSet, rng: &mut R) -> Result<PoseGraph> {
    g.check_truth(truth)?;
    let d = g.d();
    let measurements = g
        .edges()
        .iter()
        .map(|e| {
            let (r, t) = truth.relative(e.i, e.j);
            let rotation = r * sample_langevin(d, e.kappa, rng);
            let translation = e.tau.map(|tau| t + sample_translation_noise(d, tau, rng));
            (rotation, translation)
        })
        .collect();
    Ok(g.with_measurements(measurements))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeParams {
    /// Vertices per side.
    pub s: usize,
    /// Loop-closure probability.
    pub p_lc: f64,
    pub kappa: f64,
    pub tau: f64,
    pub seed: u64,
}

impl CubeParams {
    pub fn validate(&self) -> Result<()> {
        if self.s < 2 {
            return Err(Error::InvalidArgument(format!("s must be at least 2, got {}", self.s)));
        }
        if !(0.0..=1.0).contains(&self.p_lc) {
            return Err(Error::InvalidArgument(format!("p_lc must lie in [0, 1], got {}", self.p_lc)));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) || !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument("kappa and tau must be positive and finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthInstance {
    pub graph: PoseGraph,
    pub truth: PoseSet,
    pub params: CubeParams,
}

impl GroundTruthInstance {
    /// The same graph with exact measurements.
    pub fn noiseless_graph(&self) -> PoseGraph {
        self.graph.noiseless_like(&self.truth).expect("truth matches graph")
    }
}

/// Grid coordinates of the boustrophedon path: x varies fastest and
/// alternates direction per row, rows alternate per layer.
pub fn boustrophedon(s: usize) -> Vec<[usize; 3]> {
    let mut path = Vec::with_capacity(s * s * s);
    for z in 0..s {
        for yy in 0..s {
            let y = if z % 2 == 0 { yy } else { s - 1 - yy };
            let row = z * s + yy;
            for xx in 0..s {
                let x = if row.is_multiple_of(2) { xx } else { s - 1 - xx };
                path.push([x, y, z]);
            }
        }
    }
    path
}

/// Cube dataset: `s³` poses on a unit grid joined by an odometry path, with
/// each remaining grid-adjacent pair added as a loop closure with
/// probability `p_lc`.
pub fn generate_cube(params: &CubeParams) -> Result<GroundTruthInstance> {
    params.validate()?;
    let s = params.s;
    let n = s * s * s;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let path = boustrophedon(s);
    let mut index_of = vec![0usize; n];
    for (k, p) in path.iter().enumerate() {
        index_of[p[0] + s * (p[1] + s * p[2])] = k;
    }

    let rotations: Vec<DMatrix<f64>> = (0..n).map(|_| sample_haar(3, &mut rng)).collect();
    let translations: Vec<DVector<f64>> =
        path.iter().map(|p| DVector::from_vec(vec![p[0] as f64, p[1] as f64, p[2] as f64])).collect();
    let truth = PoseSet::new(RotationSet::from_blocks(&rotations)?, translations)?;

    let mut pairs: Vec<(usize, usize)> = (1..n).map(|k| (k - 1, k)).collect();
    let mut candidates = Vec::new();
    for z in 0..s {
        for y in 0..s {
            for x in 0..s {
                let a = index_of[x + s * (y + s * z)];
                for (dx, dy, dz) in [(1, 0, 0), (0, 1, 0), (0, 0, 1)] {
                    let (x2, y2, z2) = (x + dx, y + dy, z + dz);
                    if x2 >= s || y2 >= s || z2 >= s {
                        continue;
                    }
                    let b = index_of[x2 + s * (y2 + s * z2)];
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    if hi != lo + 1 {
                        candidates.push((lo, hi));
                    }
                }
            }
        }
    }
    candidates.sort_unstable();
    for c in candidates {
        if rng.random::<f64>() < params.p_lc {
            pairs.push(c);
        }
    }

    let placeholder = |i, j| {
        RelativeMeasurement::pose(i, j, DMatrix::identity(3, 3), DVector::zeros(3), params.kappa, params.tau)
    };
    let topology = PoseGraph::new(3, n, Mode::Full, pairs.into_iter().map(|(i, j)| placeholder(i, j)).collect())?;
    let graph = resample(&topology, &truth, &mut rng)?;
    Ok(GroundTruthInstance { graph, truth, params: *params })
}

/// Number of loop-closure candidates of a cube with side `s`.
pub fn cube_candidate_count(s: usize) -> usize {
    3 * s * s * (s - 1) - (s * s * s - 1)
}

/// Random SO(d)^n element drawn blockwise from the Haar measure.
pub fn random_rotation_set<R: RngCore + ?Sized>(d: usize, n: usize, rng: &mut R) -> RotationSet {
    let blocks: Vec<DMatrix<f64>> = (0..n).map(|_| sample_haar(d, rng)).collect();
    RotationSet::from_blocks(&blocks).expect("Haar samples are rotations")
}
