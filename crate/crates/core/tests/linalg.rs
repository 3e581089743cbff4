mod common;

use common::{jacobi_eigen, random_matrix, rng};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use sorbit_core::linalg::{
    laplacian_pinv_apply, smallest_eigenpairs, spectral_norm, svd_small, to_dense, LanczosOptions, LinearOperator,
    SparseSymMatrix, TripletBuilder,
};

fn random_sparse(dim: usize, density: f64, seed: u64) -> SparseSymMatrix {
    let mut r = rng(seed);
    let mut b = TripletBuilder::new(dim);
    for i in 0..dim {
        b.push(i, i, r.random_range(-2.0..2.0));
        for j in (i + 1)..dim {
            if r.random::<f64>() < density {
                b.push(i, j, r.random_range(-1.0..1.0));
            }
        }
    }
    b.build().unwrap()
}

fn random_laplacian(n: usize, seed: u64) -> SparseSymMatrix {
    let mut r = rng(seed);
    let mut b = TripletBuilder::new(n);
    let add = |b: &mut TripletBuilder, i: usize, j: usize, w: f64| {
        b.push(i, i, w);
        b.push(j, j, w);
        b.push(i, j, -w);
    };
    for v in 1..n {
        let u = r.random_range(0..v);
        add(&mut b, u, v, r.random_range(0.1..3.0));
    }
    for _ in 0..n {
        let (i, j) = (r.random_range(0..n), r.random_range(0..n));
        if i != j {
            add(&mut b, i, j, r.random_range(0.1..3.0));
        }
    }
    b.build().unwrap()
}

#[test]
fn cycle_laplacian_matches_dense_oracle() {
    let c4 = SparseSymMatrix::from_triplets(
        4,
        [(0, 0, 2.0), (1, 1, 2.0), (2, 2, 2.0), (3, 3, 2.0), (0, 1, -1.0), (1, 2, -1.0), (2, 3, -1.0), (0, 3, -1.0)],
    )
    .unwrap();
    let (oracle, _) = jacobi_eigen(&c4.to_dense());
    let eig = smallest_eigenpairs(&c4, 2, &LanczosOptions::default()).unwrap();
    for k in 0..2 {
        assert!((eig.values[k] - oracle[k]).abs() < 1e-10);
    }
    assert!((spectral_norm(&c4, 1e-10).unwrap() - oracle[3]).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lanczos_matches_dense_oracle(dim in 3usize..60, k in 1usize..6, density in 0.02f64..0.4, seed in any::<u64>()) {
        prop_assume!(k < dim);
        let a = random_sparse(dim, density, seed);
        let (oracle, _) = jacobi_eigen(&a.to_dense());
        let eig = smallest_eigenpairs(&a, k, &LanczosOptions::default().with_seed(seed)).unwrap();
        for j in 0..k {
            prop_assert!((eig.values[j] - oracle[j]).abs() < 1e-8, "λ{} = {} vs {}", j, eig.values[j], oracle[j]);
        }
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let scale = a.to_dense().norm();
        for r in &eig.residual_norms {
            prop_assert!(*r <= 1e-8 * scale.max(1.0));
        }
        for (i, u) in eig.vectors.iter().enumerate() {
            for (j, v) in eig.vectors.iter().enumerate() {
                let dot: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - target).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn spectral_norm_matches_dense_oracle(dim in 2usize..40, seed in any::<u64>()) {
        let a = random_sparse(dim, 0.2, seed);
        let (oracle, _) = jacobi_eigen(&a.to_dense());
        let expect = oracle[0].abs().max(oracle[dim - 1].abs());
        let got = spectral_norm(&a, 1e-10).unwrap();
        prop_assert!((got - expect).abs() <= 1e-8 * expect.max(1.0));
    }

    #[test]
    fn sparse_matvec_is_symmetric_and_linear(dim in 2usize..40, seed in any::<u64>()) {
        let a = random_sparse(dim, 0.3, seed);
        let mut r = rng(seed ^ 7);
        let v: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let av = a.apply_vec(&v);
        let aw = a.apply_vec(&w);
        let lhs: f64 = av.iter().zip(&w).map(|(x, y)| x * y).sum();
        let rhs: f64 = v.iter().zip(&aw).map(|(x, y)| x * y).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        let sum: Vec<f64> = v.iter().zip(&w).map(|(x, y)| 2.0 * x + y).collect();
        let a_sum = a.apply_vec(&sum);
        for i in 0..dim {
            prop_assert!((a_sum[i] - (2.0 * av[i] + aw[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_pinv_properties(n in 2usize..40, seed in any::<u64>()) {
        let l = random_laplacian(n, seed);
        let mut r = rng(seed ^ 11);
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let x = laplacian_pinv_apply(&l, &y).unwrap();
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(x.iter().sum::<f64>().abs() < 1e-10 * (1.0 + ynorm));
        let lx = l.apply_vec(&x);
        let mean = y.iter().sum::<f64>() / n as f64;
        for i in 0..n {
            prop_assert!((lx[i] - (y[i] - mean)).abs() <= 1e-8 * ynorm.max(1.0));
        }
        // Penrose identity L L† L z = L z.
        let lz = l.apply_vec(&y);
        let back = l.apply_vec(&laplacian_pinv_apply(&l, &lz).unwrap());
        for i in 0..n {
            prop_assert!((back[i] - lz[i]).abs() < 1e-8 * (1.0 + lz[i].abs()));
        }
    }
}

#[test]
fn svd_reconstructs_random_matrices() {
    let mut r = rng(2024);
    for trial in 0..1000 {
        let d = 2 + trial % 2;
        let x = random_matrix(d, d, &mut r);
        let (u, s, v) = svd_small(&x);
        let back = &u * DMatrix::from_diagonal(&s) * v.transpose();
        assert!((&back - &x).norm() <= 1e-12 * x.norm().max(1e-300), "trial {trial}: {} {:?}", (&back - &x).norm(), s);
        assert!((u.transpose() * &u - DMatrix::<f64>::identity(d, d)).norm() < 1e-12);
        assert!((v.transpose() * &v - DMatrix::<f64>::identity(d, d)).norm() < 1e-12);
        assert!(s.iter().all(|v| *v >= 0.0));
        assert!(s.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn svd_of_scaled_rotation() {
    let mut r = rng(5);
    let q = sorbit_core::synth::sample_haar(3, &mut r);
    let (_, s, _) = svd_small(&(q * 2.0));
    assert!(s.iter().all(|v| (v - 2.0).abs() < 1e-12));
}

#[test]
fn operator_densification_matches_storage() {
    let a = random_sparse(12, 0.3, 9);
    assert_eq!(to_dense(&a), a.to_dense());
}
