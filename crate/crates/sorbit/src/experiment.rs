//! Initializer runs, parameter sweeps and dataset benchmarks.

use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sorbit_core::bounds::{instance_bounds, trial_rng, BoundReport};
use sorbit_core::graph::{Mode, PoseGraph, PoseSet, RotationSet};
use sorbit_core::linalg::LanczosOptions;
use sorbit_core::metrics::{evaluate_cost, refine, refine_outcome, so_orbit_distance, CostKind, RefineOptions};
use sorbit_core::spectral::{chordal_initialize, odometry_initialize, recover_translations, spectral_initialize};
use sorbit_core::synth::{generate_cube, CubeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Spectral relaxation of the data matrix in the selected mode.
    Spectral,
    /// Spectral relaxation of the rotation-only data matrix.
    SpectralRot,
    /// Anchored linear least squares followed by rounding.
    Chordal,
    /// Composition of measurements along a spanning tree.
    Odometry,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Spectral, Method::SpectralRot, Method::Chordal, Method::Odometry];

    pub fn name(self) -> &'static str {
        match self {
            Method::Spectral => "spectral",
            Method::SpectralRot => "spectral-rot",
            Method::Chordal => "chordal",
            Method::Odometry => "odometry",
        }
    }
}

/// Initial estimate and the time spent computing it.
#[derive(Debug, Clone)]
pub struct Initialization {
    pub poses: PoseSet,
    pub wall_ms: f64,
}

/// Runs one initializer. Only the rotation estimate is timed; translations
/// are then recovered by least squares for full-pose graphs.
pub fn initialize(g: &PoseGraph, method: Method, mode: Mode, opts: &LanczosOptions) -> sorbit_core::Result<Initialization> {
    let start = Instant::now();
    let (rotations, composed): (RotationSet, Option<PoseSet>) = match method {
        Method::Spectral => (spectral_initialize(g, mode, opts)?.0, None),
        Method::SpectralRot => (spectral_initialize(g, Mode::RotationOnly, opts)?.0, None),
        Method::Chordal => (chordal_initialize(g)?, None),
        Method::Odometry => {
            let p = odometry_initialize(g)?;
            (p.rotations.clone(), Some(p))
        }
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let poses = match composed {
        Some(p) => p,
        None if g.mode() == Mode::Full => recover_translations(g, &rotations)?,
        None => PoseSet::from_rotations(rotations),
    };
    Ok(Initialization { poses, wall_ms })
}

/// `tr(Q RᵀR)` in the given mode.
pub fn quadratic_cost(g: &PoseGraph, r: &RotationSet, mode: Mode) -> sorbit_core::Result<f64> {
    evaluate_cost(g, r, None, CostKind::Quadratic(mode))
}

/// `d_S` between two rotation sets.
pub fn orbit_error(truth: &RotationSet, estimate: &RotationSet) -> sorbit_core::Result<f64> {
    Ok(so_orbit_distance(truth.as_matrix(), estimate.as_matrix())?.distance)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub rotations: RotationSet,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Local refinement; an exhausted iteration budget still yields its best iterate.
pub fn refine_estimate(g: &PoseGraph, init: &RotationSet, mode: Mode, max_iter: usize) -> sorbit_core::Result<Refinement> {
    let opts = RefineOptions { mode, max_iter, ..RefineOptions::default() };
    let raw = refine(g, init, &opts);
    let converged = raw.is_ok();
    let out = refine_outcome(raw)?;
    Ok(Refinement { rotations: out.rotation_set(), cost: out.cost, iterations: out.iterations, converged })
}

/// Grid of generator parameters swept as a cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub kappa: Vec<f64>,
    pub tau: Vec<f64>,
    pub p_lc: Vec<f64>,
    pub s: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
}

impl SweepConfig {
    /// Cells in row order: `s` varies slowest, then `p_lc`, `tau`, `kappa`.
    pub fn cells(&self) -> Vec<(f64, f64, f64, usize)> {
        let mut out = Vec::new();
        for &s in &self.s {
            for &p in &self.p_lc {
                for &t in &self.tau {
                    for &k in &self.kappa {
                        out.push((k, t, p, s));
                    }
                }
            }
        }
        out
    }
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kappa: f64,
    pub tau: f64,
    pub p_lc: f64,
    pub s: usize,
    pub trial: usize,
    pub method: String,
    #[serde(rename = "d_S_true")]
    pub d_s_true: Option<f64>,
    pub cost: Option<f64>,
    pub alignment_bound: Option<f64>,
    pub init_bound: Option<f64>,
    pub rotation_only_bound: Option<f64>,
    pub wall_ms: f64,
    pub error: String,
}

pub const SWEEP_METHODS: [Method; 3] = [Method::Spectral, Method::SpectralRot, Method::Chordal];

/// Seed of one (cell, trial) pair, independent of scheduling.
pub fn derived_seed(seed: u64, cell: usize, trial: usize, trials: usize) -> u64 {
    trial_rng(seed, (cell * trials.max(1) + trial) as u64).next_u64()
}

fn sweep_task(config: &SweepConfig, cell: (f64, f64, f64, usize), index: usize, trial: usize) -> Vec<SweepRow> {
    let (kappa, tau, p_lc, s) = cell;
    let row = |method: &str| SweepRow {
        kappa,
        tau,
        p_lc,
        s,
        trial,
        method: method.to_string(),
        d_s_true: None,
        cost: None,
        alignment_bound: None,
        init_bound: None,
        rotation_only_bound: None,
        wall_ms: 0.0,
        error: String::new(),
    };
    let params = CubeParams { s, p_lc, kappa, tau, seed: derived_seed(config.seed, index, trial, config.trials) };
    let opts = LanczosOptions::default().with_tol(config.tol).with_seed(params.seed);
    let instance = match generate_cube(&params) {
        Ok(i) => i,
        Err(e) => {
            return SWEEP_METHODS
                .iter()
                .map(|m| SweepRow { error: e.to_string(), ..row(m.name()) })
                .collect();
        }
    };
    let g = &instance.graph;
    let bounds: Result<BoundReport, String> = instance_bounds(g, &instance.truth, Mode::Full, &opts).map_err(|e| e.to_string());
    SWEEP_METHODS
        .iter()
        .map(|&m| {
            let mut r = row(m.name());
            if let Ok(b) = &bounds {
                r.alignment_bound = Some(b.alignment_bound);
                r.init_bound = Some(b.init_bound);
                r.rotation_only_bound = b.rotation_only_bound;
            }
            let result = initialize(g, m, Mode::Full, &opts).and_then(|init| {
                let rot = &init.poses.rotations;
                Ok((orbit_error(&instance.truth.rotations, rot)?, quadratic_cost(g, rot, Mode::Full)?, init.wall_ms))
            });
            let mut errors: Vec<String> = bounds.as_ref().err().map(|e| format!("bounds: {e}")).into_iter().collect();
            match result {
                Ok((d_s, cost, ms)) => {
                    r.d_s_true = Some(d_s);
                    r.cost = Some(cost);
                    r.wall_ms = ms;
                }
                Err(e) => errors.push(e.to_string()),
            }
            r.error = errors.join("; ");
            r
        })
        .collect()
}

/// Runs every (cell, trial) pair on the current rayon pool. Rows come back
/// sorted by cell, trial and method regardless of scheduling.
pub fn run_sweep(config: &SweepConfig) -> Vec<SweepRow> {
    let cells = config.cells();
    let tasks: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..config.trials).map(move |t| (c, t))).collect();
    tasks.par_iter().map(|&(c, t)| sweep_task(config, cells[c], c, t)).collect::<Vec<_>>().into_iter().flatten().collect()
}

/// Writes sweep rows as CSV preceded by a `# config=` comment line.
pub fn sweep_csv(config: &SweepConfig, rows: &[SweepRow]) -> Result<String, Box<dyn std::error::Error>> {
    let mut out = format!("# config={}\n", serde_json::to_string(config)?);
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    out.push_str(std::str::from_utf8(&w.into_inner()?)?);
    Ok(out)
}

/// Parses CSV produced by [`sweep_csv`], skipping comment lines.
pub fn read_sweep_csv(text: &str) -> Result<Vec<SweepRow>, csv::Error> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes()).deserialize().collect()
}

/// One dataset × method result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub dataset: String,
    pub method: String,
    pub n: usize,
    pub edges: usize,
    pub init_ms: Option<f64>,
    pub init_cost: Option<f64>,
    pub refined_cost: Option<f64>,
    pub refine_iterations: Option<usize>,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub tol: f64,
    pub refine: bool,
    pub refine_max_iter: usize,
}

/// Runs every method on one graph. Costs use the full data matrix when the
/// graph carries translations.
pub fn benchmark_graph(name: &str, g: &PoseGraph, config: &BenchmarkConfig) -> Vec<BenchmarkRow> {
    let mode = g.mode();
    let opts = LanczosOptions::default().with_tol(config.tol).with_seed(config.seed);
    Method::ALL
        .iter()
        .map(|&m| {
            let mut row = BenchmarkRow {
                dataset: name.to_string(),
                method: m.name().to_string(),
                n: g.n(),
                edges: g.edges().len(),
                init_ms: None,
                init_cost: None,
                refined_cost: None,
                refine_iterations: None,
                error: String::new(),
            };
            let mut run = || -> sorbit_core::Result<()> {
                let init = initialize(g, m, mode, &opts)?;
                row.init_ms = Some(init.wall_ms);
                row.init_cost = Some(quadratic_cost(g, &init.poses.rotations, mode)?);
                if config.refine {
                    let r = refine_estimate(g, &init.poses.rotations, mode, config.refine_max_iter)?;
                    row.refined_cost = Some(r.cost);
                    row.refine_iterations = Some(r.iterations);
                }
                Ok(())
            };
            if let Err(e) = run() {
                row.error = e.to_string();
            }
            row
        })
        .collect()
}

pub fn benchmark_csv(rows: &[BenchmarkRow]) -> Result<String, Box<dyn std::error::Error>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Fixed-width text table of benchmark rows.
pub fn benchmark_table(rows: &[BenchmarkRow]) -> String {
    let opt = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |x| format!("{x:.prec$}"));
    let header = ["dataset", "method", "n", "edges", "init_ms", "init_cost", "refined_cost", "iters", "error"];
    let body: Vec<[String; 9]> = rows
        .iter()
        .map(|r| {
            [
                r.dataset.clone(),
                r.method.clone(),
                r.n.to_string(),
                r.edges.to_string(),
                opt(r.init_ms, 2),
                opt(r.init_cost, 4),
                opt(r.refined_cost, 4),
                r.refine_iterations.map_or("-".to_string(), |v| v.to_string()),
                r.error.clone(),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells.iter().zip(&widths).enumerate().map(|(k, (c, &w))| {
            if k < 2 || k == 8 { format!("{c:<w$}") } else { format!("{c:>w$}") }
        }).collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for row in &body {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}
