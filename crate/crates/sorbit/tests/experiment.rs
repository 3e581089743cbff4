use sorbit::cli::parse_grid;
use sorbit::experiment::{benchmark_table, derived_seed, read_sweep_csv, run_sweep, sweep_csv, BenchmarkRow, SweepConfig};
use sorbit::io::PoseFile;
use sorbit_core::bounds::evaluate_bounds;
use sorbit_core::synth::{generate_cube, CubeParams};

fn config(p_lc: f64, trials: usize) -> SweepConfig {
    SweepConfig { kappa: vec![300.0], tau: vec![50.0], p_lc: vec![p_lc], s: vec![3], trials, seed: 21, tol: 1e-10 }
}

#[test]
fn tree_cell_full_and_rotation_only_agree() {
    let rows = run_sweep(&config(0.0, 2));
    assert_eq!(rows.len(), 6);
    for trial in 0..2 {
        let pick = |m: &str| rows.iter().find(|r| r.trial == trial && r.method == m).unwrap();
        let (full, rot) = (pick("spectral"), pick("spectral-rot"));
        assert!((full.d_s_true.unwrap() - rot.d_s_true.unwrap()).abs() < 1e-9);
        assert!((full.cost.unwrap() - rot.cost.unwrap()).abs() < 1e-9 * (1.0 + full.cost.unwrap()));
    }
}

#[test]
fn sweep_rows_are_ordered_and_reproducible() {
    let cfg = SweepConfig { kappa: vec![1e2, 1e4], p_lc: vec![0.1, 0.4], ..config(0.0, 2) };
    let rows = run_sweep(&cfg);
    assert_eq!(rows.len(), 4 * 2 * 3);
    let keys: Vec<_> = rows.iter().map(|r| (r.p_lc.to_bits(), r.kappa.to_bits(), r.trial)).collect();
    let mut sorted = keys.clone();
    sorted.sort_by_key(|&(p, k, t)| (f64::from_bits(p) > 0.2, f64::from_bits(k) > 1e3, t));
    assert_eq!(keys, sorted);
    let text = sweep_csv(&cfg, &rows).unwrap();
    let back = read_sweep_csv(&text).unwrap();
    let again = run_sweep(&cfg);
    for ((a, b), c) in rows.iter().zip(&back).zip(&again) {
        assert_eq!((a.d_s_true, a.cost, a.init_bound), (b.d_s_true, b.cost, b.init_bound));
        assert_eq!((a.d_s_true, a.cost, a.rotation_only_bound), (c.d_s_true, c.cost, c.rotation_only_bound));
    }
    let config_line = text.lines().next().unwrap().strip_prefix("# config=").unwrap();
    let echoed: SweepConfig = serde_json::from_str(config_line).unwrap();
    assert_eq!(echoed, cfg);
}

#[test]
fn derived_seeds_are_distinct() {
    let mut seeds: Vec<u64> = (0..20).flat_map(|c| (0..5).map(move |t| derived_seed(3, c, t, 5))).collect();
    seeds.sort_unstable();
    seeds.dedup();
    assert_eq!(seeds.len(), 100);
}

#[test]
fn grid_flags() {
    assert_eq!(parse_grid("tau", "1,2.5,10", true).unwrap(), vec![1.0, 2.5, 10.0]);
    let k = parse_grid("kappa", "1e2:1e6:5", true).unwrap();
    for (v, e) in k.iter().zip([1e2, 1e3, 1e4, 1e5, 1e6]) {
        assert!((v / e - 1.0).abs() < 1e-12);
    }
    assert_eq!(parse_grid("plc", "0:1:3", false).unwrap(), vec![0.0, 0.5, 1.0]);
    assert_eq!(parse_grid("kappa", "5:5:1", true).unwrap(), vec![5.0]);
    for bad in ["1e6:1e2:5", "1:2", "0:1:3", "x", "", "1:2:0"] {
        let err = parse_grid("kappa", bad, true).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{bad}");
    }
}

#[test]
fn bound_report_json_echoes_inputs() {
    let b = evaluate_bounds(3, 10, 0.5, 2.0).unwrap().with_surrogate(true);
    let v: serde_json::Value = serde_json::to_value(b).unwrap();
    assert_eq!(v["d"], 3);
    assert_eq!(v["n"], 10);
    assert_eq!(v["delta_q_norm"], 0.5);
    assert_eq!(v["lambda_gap"], 2.0);
    assert_eq!(v["surrogate_used"], true);
    assert!(v["rotation_only_bound"].is_null());
    let back: sorbit_core::bounds::BoundReport = serde_json::from_value(v).unwrap();
    assert_eq!(back, b);
}

#[test]
fn pose_file_round_trip_is_exact() {
    let inst = generate_cube(&CubeParams { s: 3, p_lc: 0.2, kappa: 10.0, tau: 10.0, seed: 3 }).unwrap();
    let file = PoseFile::from_poses(&inst.truth);
    assert_eq!(file.rotations[4], inst.truth.rotations.block(4).transpose().iter().copied().collect::<Vec<_>>());
    let text = serde_json::to_string(&file).unwrap();
    let back: PoseFile = serde_json::from_str(&text).unwrap();
    assert_eq!(back.pose_set().unwrap(), inst.truth);
    let mut broken = back.clone();
    broken.rotations[0][0] = 2.0;
    assert!(broken.pose_set().is_err());
}

#[test]
fn table_columns_align() {
    let row = |dataset: &str, cost: Option<f64>| BenchmarkRow {
        dataset: dataset.into(),
        method: "spectral".into(),
        n: 10,
        edges: 12,
        init_ms: Some(1.5),
        init_cost: cost,
        refined_cost: None,
        refine_iterations: None,
        error: String::new(),
    };
    let table = benchmark_table(&[row("a", Some(1.0)), row("longer-name", Some(12345.678)), row("b", None)]);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 4);
    let col = lines[0].find("init_cost").unwrap() + "init_cost".len();
    for l in &lines[1..] {
        let cell = l[..col].rsplit(' ').next().unwrap();
        assert!(!cell.is_empty(), "{l}");
    }
}
