use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sorbit::g2o::{isotropize_se2, isotropize_se3, parse_g2o, write_g2o, G2oError};
use sorbit_core::graph::{Mode, PoseGraph, PoseSet, RelativeMeasurement};
use sorbit_core::synth::{generate_cube, random_rotation_set, CubeParams};

/// Gauss-Jordan inverse with partial pivoting.
fn gauss_jordan_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = DMatrix::<f64>::identity(n, n);
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[(x, c)].abs().total_cmp(&m[(y, c)].abs())).unwrap();
        m.swap_rows(c, p);
        inv.swap_rows(c, p);
        let pivot = m[(c, c)];
        for k in 0..n {
            m[(c, k)] /= pivot;
            inv[(c, k)] /= pivot;
        }
        for r in 0..n {
            if r != c {
                let f = m[(r, c)];
                for k in 0..n {
                    m[(r, k)] -= f * m[(c, k)];
                    inv[(r, k)] -= f * inv[(c, k)];
                }
            }
        }
    }
    inv
}

fn random_spd(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() + DMatrix::identity(dim, dim) * 0.5
}

fn upper_entries(m: &DMatrix<f64>) -> Vec<String> {
    let n = m.nrows();
    (0..n).flat_map(|r| (r..n).map(move |c| (r, c))).map(|(r, c)| format!("{}", m[(r, c)])).collect()
}

fn assert_graphs_close(a: &PoseGraph, b: &PoseGraph, tol: f64) {
    assert_eq!((a.d(), a.n(), a.mode(), a.edges().len()), (b.d(), b.n(), b.mode(), b.edges().len()));
    for (x, y) in a.edges().iter().zip(b.edges()) {
        assert_eq!((x.i, x.j), (y.i, y.j));
        assert!((&x.rotation - &y.rotation).norm() <= tol);
        assert!((x.translation.as_ref().unwrap() - y.translation.as_ref().unwrap()).norm() <= tol * (1.0 + x.translation.as_ref().unwrap().norm()));
        assert!((x.kappa - y.kappa).abs() <= tol * x.kappa);
        assert!((x.tau.unwrap() - y.tau.unwrap()).abs() <= tol * x.tau.unwrap());
    }
}

#[test]
fn identity_quaternion_edge_with_unit_information() {
    let info = "1 0 0 0 0 0 1 0 0 0 0 1 0 0 0 1 0 0 1 0 1";
    let f = parse_g2o(&format!("EDGE_SE3:QUAT 0 1 1 0 0 0 0 0 1 {info}\n")).unwrap();
    assert_eq!(f.graph.n(), 2);
    let e = &f.graph.edges()[0];
    assert_eq!(e.rotation, DMatrix::<f64>::identity(3, 3));
    assert_eq!(e.translation.as_ref().unwrap(), &DVector::from_vec(vec![1.0, 0.0, 0.0]));
    // Σ = I: τ = 3/3, κ = 3/(2·3).
    assert!((e.tau.unwrap() - 1.0).abs() < 1e-15);
    assert!((e.kappa - 0.5).abs() < 1e-15);
}

#[test]
fn vertices_only_file_has_no_edges() {
    let f = parse_g2o("VERTEX_SE3:QUAT 0 0 0 0 0 0 0 1\nVERTEX_SE3:QUAT 1 1 0 0 0 0 0 1\n").unwrap();
    assert_eq!(f.graph.edges().len(), 0);
    assert_eq!(f.vertices.len(), 2);
    assert!(sorbit_core::spectral::spectral_initialize(&f.graph, Mode::Full, &Default::default()).is_err());
}

#[test]
fn error_cases_report_lines() {
    assert!(matches!(parse_g2o("EDGE_SE3:QUAT 0 1 1 0 0"), Err(G2oError::Parse { line: 1, .. })));
    let mixed = "VERTEX_SE2 0 0 0 0\nEDGE_SE3:QUAT 0 1 1 0 0 0 0 0 1 1 0 0 0 0 0 1 0 0 0 0 1 0 0 0 1 0 0 1 0 1";
    assert_eq!(parse_g2o(mixed), Err(G2oError::MixedDimension));
    assert!(matches!(parse_g2o("\n\n# c\nVERTEX_SE2 a 0 0 0"), Err(G2oError::Parse { line: 4, .. })));
    assert!(matches!(parse_g2o("VERTEX_SE3:QUAT 0 0 0 0 0 0 0 0"), Err(G2oError::Parse { line: 1, .. })));
    assert!(matches!(parse_g2o(""), Err(G2oError::Parse { .. })));
    let err = parse_g2o("VERTEX_SE2 0 0 0 nan").unwrap_err();
    assert!(err.to_string().contains("line 1"));
}

#[test]
fn comments_and_ids_are_handled() {
    let text = "# header\nEDGE_SE2 10 30 1 0 0 1 0 0 1 0 1 # trailing\nEDGE_SE2 30 20 1 0 0 1 0 0 1 0 1\nFIX 10\n";
    let f = parse_g2o(text).unwrap();
    assert_eq!(f.ids, vec![10, 20, 30]);
    let pairs: Vec<_> = f.graph.edges().iter().map(|e| (e.i, e.j)).collect();
    assert!(pairs.contains(&(0, 2)) && pairs.contains(&(2, 1)));
}

#[test]
fn quaternions_are_normalized() {
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let info = "1 0 0 0 0 0 1 0 0 0 0 1 0 0 0 1 0 0 1 0 1";
    let a = parse_g2o(&format!("EDGE_SE3:QUAT 0 1 0 0 0 0 0 {half} {half} {info}")).unwrap();
    let b = parse_g2o(&format!("EDGE_SE3:QUAT 0 1 0 0 0 0 0 3 3 {info}")).unwrap();
    let (ra, rb) = (&a.graph.edges()[0].rotation, &b.graph.edges()[0].rotation);
    assert!((ra - rb).norm() < 1e-15);
    let expect = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    assert!((ra - expect).norm() < 1e-15);
}

#[test]
fn isotropization_matches_inverse_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let info = random_spd(6, &mut rng);
        let sigma = gauss_jordan_inverse(&info);
        let tau = 3.0 / (sigma[(0, 0)] + sigma[(1, 1)] + sigma[(2, 2)]);
        let kappa = 3.0 / (2.0 * (sigma[(3, 3)] + sigma[(4, 4)] + sigma[(5, 5)]));
        let (k, t) = isotropize_se3(&info).unwrap();
        assert!((k - kappa).abs() < 1e-10 * kappa && (t - tau).abs() < 1e-10 * tau);

        let text = format!("EDGE_SE3:QUAT 0 1 0 0 0 0 0 0 1 {}", upper_entries(&info).join(" "));
        let e = parse_g2o(&text).unwrap().graph.edges()[0].clone();
        assert!((e.kappa - kappa).abs() < 1e-10 * kappa && (e.tau.unwrap() - tau).abs() < 1e-10 * tau);

        let info2 = random_spd(3, &mut rng);
        let s2 = gauss_jordan_inverse(&info2);
        let (k2, t2) = isotropize_se2(&info2).unwrap();
        assert!((k2 - 1.0 / s2[(2, 2)]).abs() < 1e-10 * k2);
        assert!((t2 - 2.0 / (s2[(0, 0)] + s2[(1, 1)])).abs() < 1e-10 * t2);
    }
}

#[test]
fn block_diagonal_information_gives_harmonic_means() {
    let info = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 4.0, 10.0, 20.0, 40.0]));
    let (kappa, tau) = isotropize_se3(&info).unwrap();
    assert!((tau - 3.0 / (1.0 + 0.5 + 0.25)).abs() < 1e-14);
    assert!((kappa - 3.0 / (2.0 * (0.1 + 0.05 + 0.025))).abs() < 1e-12);
}

#[test]
fn cube_round_trip() {
    let inst = generate_cube(&CubeParams { s: 4, p_lc: 0.3, kappa: 500.0, tau: 80.0, seed: 9 }).unwrap();
    let text = write_g2o(&inst.graph, Some(&inst.truth), None).unwrap();
    let parsed = parse_g2o(&text).unwrap();
    assert_graphs_close(&inst.graph, &parsed.graph, 1e-14);
    assert_eq!(parsed.vertices.len(), inst.graph.n());
    for (k, (r, t)) in &parsed.vertices {
        assert!((r - inst.truth.rotations.block(*k)).norm() < 1e-14);
        assert!((t - &inst.truth.translations[*k]).norm() < 1e-14);
    }
    // A second cycle reproduces the first one.
    let again = parse_g2o(&write_g2o(&parsed.graph, None, Some(&parsed.ids)).unwrap()).unwrap();
    assert_graphs_close(&parsed.graph, &again.graph, 1e-14);
}

#[test]
fn rotation_only_graphs_cannot_be_written() {
    let g = PoseGraph::new(2, 2, Mode::RotationOnly, vec![RelativeMeasurement::rotation_only(0, 1, DMatrix::identity(2, 2), 1.0)]).unwrap();
    assert!(write_g2o(&g, None, None).is_err());
}

fn random_graph(d: usize, n: usize, seed: u64) -> (PoseGraph, PoseSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rotations = random_rotation_set(d, n, &mut rng);
    let translations = (0..n).map(|_| DVector::from_fn(d, |_, _| rng.random_range(-1e3..1e3))).collect();
    let truth = PoseSet::new(rotations, translations).unwrap();
    let mut edges = Vec::new();
    for j in 1..n {
        let i = rng.random_range(0..j);
        let (r, t) = truth.relative(i, j);
        edges.push(RelativeMeasurement::pose(i, j, r, t, 10f64.powf(rng.random_range(-3.0..8.0)), 10f64.powf(rng.random_range(-3.0..8.0))));
    }
    (PoseGraph::new(d, n, Mode::Full, edges).unwrap(), truth)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_parse_round_trip(d in 2usize..=3, n in 2usize..30, seed in any::<u64>()) {
        let (g, truth) = random_graph(d, n, seed);
        let ids: Vec<u64> = (0..n as u64).map(|k| 7 * k + 3).collect();
        let text = write_g2o(&g, Some(&truth), Some(&ids)).unwrap();
        let first = parse_g2o(&text).unwrap();
        prop_assert_eq!(&first.ids, &ids);
        assert_graphs_close(&g, &first.graph, 1e-13);
        let second = parse_g2o(&write_g2o(&first.graph, None, Some(&first.ids)).unwrap()).unwrap();
        assert_graphs_close(&first.graph, &second.graph, 1e-13);
    }
}
