mod common;

use mtlp_core::multitask::{apply_map_closed_form, build_map, MapPower};
use mtlp_core::relatedness::MatrixKind;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn gamma_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.5), Just(1.0), Just(2.0)]
}

fn dense_bar_a(c: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    let m = c.nrows();
    let mut a = DMatrix::identity(m, m) * gamma - c;
    for k in 0..m {
        a[(k, k)] += c.row(k).sum();
    }
    a
}

proptest! {
    #[test]
    fn closed_form_equals_dense_product(n in 1usize..=20, m in 1usize..=10, gamma in gamma_strategy(), seed in any::<u64>()) {
        let y = common::random_labels(n, m, 0.3, seed);
        let tm = common::random_task_matrix(MatrixKind::Dissimilarity, m, seed ^ 7);
        let closed = apply_map_closed_form(&y, &tm, gamma).unwrap();
        let dense = y.as_matrix() * dense_bar_a(tm.entries(), gamma);
        prop_assert!(common::max_abs_diff(&closed, &dense) <= 1e-12);
        for (v, &l) in closed.iter().zip(y.as_matrix().iter()) {
            prop_assert_eq!(v.signum(), l);
        }
    }

    #[test]
    fn map_expands_task_and_instance_distances(n in 2usize..=20, m in 2usize..=10, gamma in 1.0f64..4.0, seed in any::<u64>()) {
        let y = common::random_labels(n, m, 0.3, seed);
        let tm = common::random_task_matrix(MatrixKind::Dissimilarity, m, seed ^ 11);
        let mapped = apply_map_closed_form(&y, &tm, gamma).unwrap();
        let y = y.as_matrix();
        for r in 0..m {
            for s in r + 1..m {
                let before = (y.column(r) - y.column(s)).norm_squared();
                let after = (mapped.column(r) - mapped.column(s)).norm_squared();
                prop_assert!(after >= before - 1e-9, "tasks {r},{s}: {after} < {before}");
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let before = (y.row(i) - y.row(j)).norm();
                let after = (mapped.row(i) - mapped.row(j)).norm();
                prop_assert!(after >= before - 1e-9, "instances {i},{j}: {after} < {before}");
            }
        }
    }

    #[test]
    fn maps_are_positive_definite(m in 1usize..=10, gamma in 0.05f64..5.0, seed in any::<u64>()) {
        for kind in [MatrixKind::Dissimilarity, MatrixKind::Similarity] {
            let tm = common::random_task_matrix(kind, m, seed);
            let a = dense_bar_a(tm.entries(), gamma);
            let eig = SymmetricEigen::new(a.clone());
            prop_assert!(eig.eigenvalues.min() >= gamma - 1e-10);
            let map = build_map(&tm, gamma, MapPower::ONE).unwrap();
            let op = map.operator();
            prop_assert!(common::max_abs_diff(op, &op.transpose()) == 0.0);
            prop_assert!(SymmetricEigen::new(op.clone()).eigenvalues.min() > 0.0);
        }
    }

    #[test]
    fn half_power_squares_to_the_map(m in 1usize..=10, gamma in 0.1f64..3.0, seed in any::<u64>()) {
        let tm = common::random_task_matrix(MatrixKind::Dissimilarity, m, seed);
        let half = build_map(&tm, gamma, MapPower::Half).unwrap();
        let one = build_map(&tm, gamma, MapPower::ONE).unwrap();
        let squared = half.operator() * half.operator();
        let tol = 1e-10 * one.operator().norm().max(1.0);
        prop_assert!(common::max_abs_diff(&squared, one.operator()) <= tol);
    }

    #[test]
    fn inverse_map_inverts(m in 1usize..=10, gamma in 0.1f64..3.0, seed in any::<u64>()) {
        let tm = common::random_task_matrix(MatrixKind::Similarity, m, seed);
        let inv = build_map(&tm, gamma, MapPower::ONE).unwrap();
        let product = dense_bar_a(tm.entries(), gamma) * inv.operator();
        prop_assert!(common::max_abs_diff(&product, &DMatrix::identity(m, m)) <= 1e-10);
    }

    #[test]
    fn large_gamma_approaches_identity(n in 1usize..=20, m in 1usize..=10, seed in any::<u64>()) {
        let gamma = 1e6;
        let y = common::random_labels(n, m, 0.3, seed);
        let tm = common::random_task_matrix(MatrixKind::Dissimilarity, m, seed ^ 5);
        let scaled = apply_map_closed_form(&y, &tm, gamma).unwrap() / gamma;
        prop_assert!(common::max_abs_diff(&scaled, y.as_matrix()) <= 1e-4);
    }
}

#[test]
fn integer_powers_multiply() {
    let tm = common::random_task_matrix(MatrixKind::Dissimilarity, 6, 3);
    let one = build_map(&tm, 1.5, MapPower::ONE).unwrap();
    let three = build_map(&tm, 1.5, MapPower::Integer(3)).unwrap();
    let cube = one.operator() * one.operator() * one.operator();
    assert!(common::max_abs_diff(&cube, three.operator()) <= 1e-10 * cube.norm());
}
