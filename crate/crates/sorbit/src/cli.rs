//! Command-line interface. Exit codes: 0 success, 1 solver failure,
//! 2 usage or IO error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sorbit_core::bounds::{evaluate_bounds, instance_bounds, monte_carlo_delta_q, spectral_gap, BoundReport};
use sorbit_core::datamatrix::rotation_connection_laplacian;
use sorbit_core::graph::{Mode, PoseGraph, PoseSet};
use sorbit_core::linalg::LanczosOptions;
use sorbit_core::synth::{generate_cube, CubeParams};

use crate::experiment::{
    benchmark_csv, benchmark_graph, benchmark_table, initialize, orbit_error, quadratic_cost, refine_estimate, run_sweep,
    sweep_csv, BenchmarkConfig, BenchmarkRow, Method, SweepConfig,
};
use crate::g2o::{parse_g2o, write_g2o};
use crate::io::{matrix_market, read_json, read_text, write_json, write_text, FileError, PoseFile};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    File(#[from] FileError),
    #[error("solver failure: {0}")]
    Solver(#[from] sorbit_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(_) => 1,
            CliError::Usage(_) | CliError::File(_) => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Rot,
    Full,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Rot => Mode::RotationOnly,
            ModeArg::Full => Mode::Full,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sorbit", version, about = "Spectral initialization for rotation averaging and pose-graph SLAM")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cube instance as g2o plus a ground-truth sidecar.
    Generate(GenerateArgs),
    /// Initialize a pose graph and write the estimate and a report.
    Init(InitArgs),
    /// Evaluate the a priori error bounds for a pose graph.
    Bounds(BoundsArgs),
    /// Sweep generator parameters and record errors, costs and bounds.
    Sweep(SweepArgs),
    /// Compare initializers on one or more g2o datasets.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Relative eigensolver residual tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

impl SolverArgs {
    fn lanczos(&self) -> LanczosOptions {
        LanczosOptions::default().with_tol(self.tol).with_seed(self.seed)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RefineArgs {
    /// Refine the initial estimate (default).
    #[arg(long, overrides_with = "no_refine")]
    pub refine: bool,
    /// Skip refinement.
    #[arg(long)]
    pub no_refine: bool,
    #[arg(long, default_value_t = 1000)]
    pub refine_max_iter: usize,
}

impl RefineArgs {
    fn enabled(&self) -> bool {
        !self.no_refine
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    /// Vertices per cube side.
    #[arg(long, default_value_t = 10)]
    pub s: usize,
    /// Loop-closure probability.
    #[arg(long, default_value_t = 0.1)]
    pub plc: f64,
    #[arg(long, default_value_t = 1e3)]
    pub kappa: f64,
    #[arg(long, default_value_t = 150.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output g2o path.
    #[arg(long)]
    pub output: PathBuf,
    /// Ground-truth sidecar path; defaults to `<output>.truth.json`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Estimate path; `.g2o` writes vertex records, anything else JSON.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "spectral")]
    pub method: Method,
    #[arg(long, value_enum, default_value = "full")]
    pub mode: ModeArg,
    /// Ground-truth sidecar used to report `d_S`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Report path; defaults to `<output>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write the rotation connection Laplacian in MatrixMarket format.
    #[arg(long)]
    pub export_laplacian: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub refine: RefineArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundsArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Ground-truth sidecar; enables exact perturbation norms and gap.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "full")]
    pub mode: ModeArg,
    /// Known `‖ΔQ‖₂`, used with the weight-graph gap.
    #[arg(long)]
    pub delta_q: Option<f64>,
    /// Monte Carlo trials when neither truth nor `--delta-q` is given.
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    /// κ values: comma list or `lo:hi:count` (log-spaced).
    #[arg(long, default_value = "1e2:1e6:5")]
    pub kappa: String,
    /// τ values: comma list or `lo:hi:count` (log-spaced).
    #[arg(long, default_value = "150")]
    pub tau: String,
    /// Loop-closure probabilities: comma list or `lo:hi:count` (linear).
    #[arg(long, default_value = "0.2")]
    pub plc: String,
    /// Cube sides: comma list.
    #[arg(long, default_value = "4")]
    pub s: String,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchmarkArgs {
    /// Dataset paths (repeatable).
    #[arg(long = "input", num_args = 0..)]
    pub inputs: Vec<PathBuf>,
    /// CSV path; the text table goes to stdout and `<output>.txt`.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub refine: RefineArgs,
}

/// Parses a grid flag. Ranges `lo:hi:count` are log-spaced when `log`.
pub fn parse_grid(flag: &str, text: &str, log: bool) -> CliResult<Vec<f64>> {
    let bad = |why: String| CliError::Usage(format!("--{flag} {text}: {why}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("invalid number `{s}`")));
    let values = if let [lo, hi, count] = text.split(':').collect::<Vec<_>>()[..] {
        let (lo, hi) = (num(lo)?, num(hi)?);
        let count: usize = count.trim().parse().map_err(|_| bad(format!("invalid count `{count}`")))?;
        if lo > hi {
            return Err(bad("lower bound exceeds upper bound".into()));
        }
        if count == 0 {
            return Err(bad("count must be positive".into()));
        }
        if log && lo <= 0.0 {
            return Err(bad("log-spaced bounds must be positive".into()));
        }
        (0..count)
            .map(|k| {
                let f = if count == 1 { 0.0 } else { k as f64 / (count - 1) as f64 };
                if k + 1 == count && count > 1 {
                    hi
                } else if log {
                    lo * (hi / lo).powf(f)
                } else {
                    lo + f * (hi - lo)
                }
            })
            .collect()
    } else if text.contains(':') {
        return Err(bad("expected lo:hi:count".into()));
    } else {
        text.split(',').map(num).collect::<CliResult<Vec<f64>>>()?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad("grid must be nonempty and finite".into()));
    }
    Ok(values)
}

fn load_graph(path: &Path) -> CliResult<PoseGraph> {
    let text = read_text(path)?;
    Ok(parse_g2o(&text).map_err(|e| FileError::new(path, e))?.graph)
}

fn load_truth(path: &Path, g: &PoseGraph) -> CliResult<PoseSet> {
    let file: PoseFile = read_json(path)?;
    let truth = file.pose_set().map_err(|e| FileError::new(path, e))?;
    if truth.rotations.d() != g.d() || truth.rotations.n() != g.n() {
        return Err(FileError::new(path, "ground truth does not match the graph").into());
    }
    Ok(truth)
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn thread_pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| CliError::Usage(e.to_string()))
}

fn cmd_generate(args: &GenerateArgs) -> CliResult<()> {
    let params = CubeParams { s: args.s, p_lc: args.plc, kappa: args.kappa, tau: args.tau, seed: args.seed };
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let instance = generate_cube(&params)?;
    let text = write_g2o(&instance.graph, Some(&instance.truth), None)?;
    let header = format!("# config={}\n", serde_json::to_string(args).expect("serializable"));
    write_text(&args.output, &(header + &text))?;
    let mut sidecar = PoseFile::from_poses(&instance.truth);
    sidecar.params = Some(params);
    let truth_path = args.truth.clone().unwrap_or_else(|| suffixed(&args.output, ".truth.json"));
    write_json(&truth_path, &sidecar)?;
    eprintln!("wrote {} ({} poses, {} edges) and {}", args.output.display(), instance.graph.n(), instance.graph.edges().len(), truth_path.display());
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct InitReport {
    pub config: InitArgs,
    pub method: Method,
    pub mode: Mode,
    pub n: usize,
    pub edges: usize,
    pub init_ms: f64,
    pub cost_init: f64,
    pub cost_refined: Option<f64>,
    pub refine_iterations: Option<usize>,
    pub refine_converged: Option<bool>,
    #[serde(rename = "d_S_init")]
    pub d_s_init: Option<f64>,
    #[serde(rename = "d_S_refined")]
    pub d_s_refined: Option<f64>,
}

fn cmd_init(args: &InitArgs) -> CliResult<()> {
    let g = load_graph(&args.input)?;
    let truth = args.truth.as_deref().map(|p| load_truth(p, &g)).transpose()?;
    let mode: Mode = args.mode.into();
    if mode == Mode::Full && g.mode() != Mode::Full {
        return Err(CliError::Usage("--mode full requires translation measurements".into()));
    }
    if let Some(path) = &args.export_laplacian {
        write_text(path, &matrix_market(&rotation_connection_laplacian(&g)))?;
    }
    let init = initialize(&g, args.method, mode, &args.solver.lanczos())?;
    let cost_init = quadratic_cost(&g, &init.poses.rotations, mode)?;
    let d_s = |r| truth.as_ref().map(|t| orbit_error(&t.rotations, r)).transpose();
    let d_s_init = d_s(&init.poses.rotations)?;
    let mut estimate = init.poses.clone();
    let mut report = InitReport {
        config: args.clone(),
        method: args.method,
        mode,
        n: g.n(),
        edges: g.edges().len(),
        init_ms: init.wall_ms,
        cost_init,
        cost_refined: None,
        refine_iterations: None,
        refine_converged: None,
        d_s_init,
        d_s_refined: None,
    };
    if args.refine.enabled() {
        let r = refine_estimate(&g, &init.poses.rotations, mode, args.refine.refine_max_iter)?;
        report.cost_refined = Some(r.cost);
        report.refine_iterations = Some(r.iterations);
        report.refine_converged = Some(r.converged);
        report.d_s_refined = d_s(&r.rotations)?;
        estimate = if g.mode() == Mode::Full {
            sorbit_core::spectral::recover_translations(&g, &r.rotations)?
        } else {
            PoseSet::from_rotations(r.rotations)
        };
    }
    if args.output.extension().is_some_and(|e| e == "g2o") {
        write_text(&args.output, &write_g2o(&g, Some(&estimate), None)?)?;
    } else {
        let mut file = PoseFile::from_poses(&estimate);
        if g.mode() != Mode::Full {
            file.translations = None;
        }
        write_json(&args.output, &file)?;
    }
    let report_path = args.report.clone().unwrap_or_else(|| suffixed(&args.output, ".report.json"));
    write_json(&report_path, &report)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct BoundsOutput {
    pub config: BoundsArgs,
    pub source: &'static str,
    pub report: BoundReport,
    /// Sorted Monte Carlo samples of `‖ΔQ‖₂`, when simulated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approximate_truth: Option<bool>,
}

fn cmd_bounds(args: &BoundsArgs) -> CliResult<()> {
    let g = load_graph(&args.input)?;
    let mode: Mode = args.mode.into();
    let opts = args.solver.lanczos();
    let surrogate = mode == Mode::Full;
    let out = if let Some(path) = &args.truth {
        let truth = load_truth(path, &g)?;
        let report = instance_bounds(&g, &truth, mode, &opts)?;
        BoundsOutput { config: args.clone(), source: "ground-truth", report, samples: None, approximate_truth: None }
    } else if let Some(delta) = args.delta_q {
        let gap = spectral_gap(&g, &opts)?;
        let report = evaluate_bounds(g.d(), g.n(), delta, gap)
            .map_err(|e| CliError::Usage(e.to_string()))?
            .with_surrogate(surrogate);
        BoundsOutput { config: args.clone(), source: "supplied", report, samples: None, approximate_truth: None }
    } else {
        if args.trials == 0 {
            return Err(CliError::Usage("--trials must be positive".into()));
        }
        let mc = monte_carlo_delta_q(&g, mode, args.trials, args.solver.seed, None, &opts)?;
        let median = mc.quantile(0.5);
        let report = evaluate_bounds(g.d(), g.n(), median, mc.lambda_gap)?.with_surrogate(surrogate);
        BoundsOutput {
            config: args.clone(),
            source: "monte-carlo-median",
            report,
            samples: Some(mc.samples),
            approximate_truth: Some(mc.approximate_truth),
        }
    };
    let text = serde_json::to_string_pretty(&out).expect("serializable");
    match &args.output {
        Some(p) => write_text(p, &(text + "\n"))?,
        None => println!("{text}"),
    }
    Ok(())
}

/// Validates sweep flags into a configuration.
pub fn sweep_config(args: &SweepArgs) -> CliResult<SweepConfig> {
    let s = parse_grid("s", &args.s, false)?;
    if s.iter().any(|v| v.fract() != 0.0 || *v < 2.0) {
        return Err(CliError::Usage(format!("--s {}: sides must be integers ≥ 2", args.s)));
    }
    let config = SweepConfig {
        kappa: parse_grid("kappa", &args.kappa, true)?,
        tau: parse_grid("tau", &args.tau, true)?,
        p_lc: parse_grid("plc", &args.plc, false)?,
        s: s.into_iter().map(|v| v as usize).collect(),
        trials: args.trials,
        seed: args.solver.seed,
        tol: args.solver.tol,
    };
    if config.trials == 0 {
        return Err(CliError::Usage("--trials must be positive".into()));
    }
    if config.kappa.iter().chain(&config.tau).any(|v| *v <= 0.0) {
        return Err(CliError::Usage("--kappa and --tau must be positive".into()));
    }
    if config.p_lc.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(CliError::Usage("--plc values must lie in [0, 1]".into()));
    }
    Ok(config)
}

fn cmd_sweep(args: &SweepArgs) -> CliResult<()> {
    let config = sweep_config(args)?;
    let rows = thread_pool(args.jobs)?.install(|| run_sweep(&config));
    let text = sweep_csv(&config, &rows).map_err(|e| FileError::new(&args.output, e))?;
    write_text(&args.output, &text)?;
    let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
    eprintln!("wrote {} rows to {} ({failed} with errors)", rows.len(), args.output.display());
    Ok(())
}

fn cmd_benchmark(args: &BenchmarkArgs) -> CliResult<()> {
    if args.inputs.is_empty() {
        return Err(CliError::Usage("benchmark needs at least one --input dataset".into()));
    }
    let config = BenchmarkConfig {
        seed: args.solver.seed,
        tol: args.solver.tol,
        refine: args.refine.enabled(),
        refine_max_iter: args.refine.refine_max_iter,
    };
    let run = |path: &PathBuf| -> Vec<BenchmarkRow> {
        let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        match load_graph(path) {
            Ok(g) => benchmark_graph(&name, &g, &config),
            Err(e) => vec![BenchmarkRow {
                dataset: name,
                method: "-".into(),
                n: 0,
                edges: 0,
                init_ms: None,
                init_cost: None,
                refined_cost: None,
                refine_iterations: None,
                error: e.to_string(),
            }],
        }
    };
    let rows: Vec<BenchmarkRow> = thread_pool(args.jobs)?.install(|| {
        use rayon::prelude::*;
        args.inputs.par_iter().map(run).collect::<Vec<_>>().into_iter().flatten().collect()
    });
    let csv = benchmark_csv(&rows).map_err(|e| FileError::new(&args.output, e))?;
    let header = format!("# config={}\n", serde_json::to_string(args).expect("serializable"));
    write_text(&args.output, &(header + &csv))?;
    let table = benchmark_table(&rows);
    write_text(&suffixed(&args.output, ".txt"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Init(a) => cmd_init(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

