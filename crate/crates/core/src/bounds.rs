//! A priori error bounds for the spectral estimator.
//!
//! Every bound has the form `c(d, n) · ‖ΔQ‖₂ / λ_{d+1}(Q̲)`, where `ΔQ` is the
//! perturbation of the data matrix by measurement noise and `λ_{d+1}(Q̲)` is
//! the spectral gap of the noiseless data matrix.

use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datamatrix::{assemble, perturbation_spectral_norm};
use crate::error::{Error, Result};
use crate::graph::{Mode, PoseGraph, PoseSet, RotationSet};
use crate::linalg::LanczosOptions;
use crate::spectral::{recover_translations, smallest_k};
use crate::synth::resample;

/// Evaluated bounds together with their inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub d: usize,
    pub n: usize,
    pub delta_q_norm: f64,
    pub lambda_gap: f64,
    /// `d_O(R̲, Y*) ≤ 2√(2dn) Δ/λ`
    pub alignment_bound: f64,
    /// `d_S(R̲, R_init) ≤ 4√(2dn) Δ/λ`
    pub init_bound: f64,
    /// `d_S(R̲, R*) ≤ 8√(dn) Δ/λ` for a global minimizer `R*`.
    pub optimum_bound: f64,
    /// `d_S(R_init, R*) ≤ (8 + 4√2)√(dn) Δ/λ`
    pub init_to_optimum_bound: f64,
    /// `4√(2dn) ‖ΔL(G^ρ)‖₂ / λ₂(L(W^ρ))`, present when the rotation-only
    /// perturbation was supplied.
    pub rotation_only_bound: Option<f64>,
    /// Whether `lambda_gap` is the weight-graph surrogate `λ₂(L(W^ρ))`.
    pub surrogate_used: bool,
}

fn check_gap(gap: f64) -> Result<()> {
    if gap > 0.0 && gap.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveGap(gap))
    }
}

/// Closed-form bounds for given `‖ΔQ‖₂` and gap.
pub fn evaluate_bounds(d: usize, n: usize, delta_q_norm: f64, lambda_gap: f64) -> Result<BoundReport> {
    check_gap(lambda_gap)?;
    if !(delta_q_norm >= 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("perturbation norm must be nonnegative, got {delta_q_norm}")));
    }
    let dn = (d * n) as f64;
    let ratio = delta_q_norm / lambda_gap;
    Ok(BoundReport {
        d,
        n,
        delta_q_norm,
        lambda_gap,
        alignment_bound: 2.0 * (2.0 * dn).sqrt() * ratio,
        init_bound: 4.0 * (2.0 * dn).sqrt() * ratio,
        optimum_bound: 8.0 * dn.sqrt() * ratio,
        init_to_optimum_bound: (8.0 + 4.0 * SQRT_2) * dn.sqrt() * ratio,
        rotation_only_bound: None,
        surrogate_used: false,
    })
}

impl BoundReport {
    pub fn with_surrogate(mut self, surrogate: bool) -> Self {
        self.surrogate_used = surrogate;
        self
    }

    pub fn with_rotation_only(mut self, delta_rho_norm: f64, weight_gap: f64) -> Result<Self> {
        check_gap(weight_gap)?;
        let dn = (self.d * self.n) as f64;
        self.rotation_only_bound = Some(4.0 * (2.0 * dn).sqrt() * delta_rho_norm / weight_gap);
        Ok(self)
    }
}

/// `λ₂(L(W^ρ))`, the algebraic connectivity of the rotational weight graph.
/// Exact as `λ_{d+1}(Q̲)` for rotation averaging and a lower bound on it for
/// pose-graph optimization.
pub fn spectral_gap(g: &PoseGraph, opts: &LanczosOptions) -> Result<f64> {
    if !g.check_connected() || g.n() < 2 {
        return Err(Error::DisconnectedGraph);
    }
    let (l_rho, _) = g.weight_laplacians();
    let (values, _, _) = smallest_k(&l_rho, 2, opts)?;
    let gap = values[1];
    if !(gap > 0.0) {
        return Err(Error::DisconnectedGraph);
    }
    Ok(gap)
}

/// `λ_{d+1}(Q̲)` of the noiseless data matrix in the given mode.
pub fn exact_spectral_gap(noiseless: &PoseGraph, mode: Mode, opts: &LanczosOptions) -> Result<f64> {
    let q = assemble(noiseless, mode)?;
    let d = noiseless.d();
    let (values, _, _) = smallest_k(&q, d + 1, opts)?;
    values.get(d).copied().ok_or_else(|| Error::Dimension("graph too small for a spectral gap".into()))
}

/// `4√(2dn) ‖ΔL(G^ρ)‖₂ / λ₂(L(W^ρ))`.
pub fn rotation_only_bound(g: &PoseGraph, delta_rho_norm: f64, opts: &LanczosOptions) -> Result<f64> {
    if !(delta_rho_norm >= 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("perturbation norm must be nonnegative, got {delta_rho_norm}")));
    }
    let gap = spectral_gap(g, opts)?;
    check_gap(gap)?;
    let dn = (g.d() * g.n()) as f64;
    Ok(4.0 * (2.0 * dn).sqrt() * delta_rho_norm / gap)
}

/// Bounds for a synthetic instance with known ground truth, using the exact
/// gap `λ_{d+1}(Q̲)` and the realized perturbations.
pub fn instance_bounds(noisy: &PoseGraph, truth: &PoseSet, mode: Mode, opts: &LanczosOptions) -> Result<BoundReport> {
    let clean = noisy.noiseless_like(truth)?;
    let delta = perturbation_spectral_norm(noisy, &clean, mode, opts)?;
    let gap = exact_spectral_gap(&clean, mode, opts)?;
    let delta_rho = perturbation_spectral_norm(&noisy.rotation_only(), &clean.rotation_only(), Mode::RotationOnly, opts)?;
    let weight_gap = spectral_gap(noisy, opts)?;
    evaluate_bounds(noisy.d(), noisy.n(), delta, gap)?.with_rotation_only(delta_rho, weight_gap)
}

/// Empirical distribution of `‖ΔQ‖₂` under the generative model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub mode: Mode,
    /// Perturbation norms sorted ascending.
    pub samples: Vec<f64>,
    /// Gap used to turn samples into bounds (the weight-graph surrogate).
    pub lambda_gap: f64,
    /// Bounds evaluated at each sample, in the same order.
    pub bounds: Vec<BoundReport>,
    /// True when the identity gauge stood in for an unknown ground truth.
    pub approximate_truth: bool,
}

impl MonteCarloReport {
    /// Empirical quantile with linear interpolation, `q ∈ [0, 1]`.
    pub fn quantile(&self, q: f64) -> f64 {
        let m = self.samples.len();
        let pos = q.clamp(0.0, 1.0) * (m - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(m - 1);
        let w = pos - lo as f64;
        self.samples[lo] * (1.0 - w) + self.samples[hi] * w
    }
}

/// Random stream for one trial, independent of scheduling.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Ground truth used for simulation: the supplied one, or the identity gauge
/// with translations fitted to the measured relative translations.
pub fn simulation_truth(topology: &PoseGraph, truth: Option<&PoseSet>) -> Result<(PoseSet, bool)> {
    if let Some(t) = truth {
        return Ok((t.clone(), false));
    }
    let rotations = RotationSet::identity(topology.d(), topology.n());
    let poses = match topology.mode() {
        Mode::Full => recover_translations(topology, &rotations)?,
        Mode::RotationOnly => PoseSet::from_rotations(rotations),
    };
    Ok((poses, true))
}

/// `‖ΔQ‖₂` for one simulated trial.
pub fn monte_carlo_trial(topology: &PoseGraph, truth: &PoseSet, mode: Mode, seed: u64, trial: u64, opts: &LanczosOptions) -> Result<f64> {
    let mut rng = trial_rng(seed, trial);
    let clean = topology.noiseless_like(truth)?;
    let noisy = resample(&clean, truth, &mut rng)?;
    perturbation_spectral_norm(&noisy, &clean, mode, opts)
}

/// Simulates `trials` measurement sets and reports the sorted `‖ΔQ‖₂`
/// samples with bounds at the weight-graph gap.
pub fn monte_carlo_delta_q(
    topology: &PoseGraph,
    mode: Mode,
    trials: usize,
    seed: u64,
    truth: Option<&PoseSet>,
    opts: &LanczosOptions,
) -> Result<MonteCarloReport> {
    if trials < 1 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    if mode == Mode::Full && topology.mode() != Mode::Full {
        return Err(Error::Mode);
    }
    let (truth, approximate_truth) = simulation_truth(topology, truth)?;
    let gap = spectral_gap(topology, opts)?;
    let mut samples = (0..trials as u64)
        .map(|t| monte_carlo_trial(topology, &truth, mode, seed, t, opts))
        .collect::<Result<Vec<f64>>>()?;
    samples.sort_by(f64::total_cmp);
    let bounds = samples
        .iter()
        .map(|&s| evaluate_bounds(topology.d(), topology.n(), s, gap).map(|b| b.with_surrogate(mode == Mode::Full)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MonteCarloReport { mode, samples, lambda_gap: gap, bounds, approximate_truth })
}
