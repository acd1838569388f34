//! Random instances and dense reference computations shared by the
//! integration tests.

#![allow(dead_code)]

use mtlp_core::graph::SparseGraph;
use mtlp_core::labels::LabelMatrix;
use mtlp_core::propagation::Partition;
use mtlp_core::relatedness::{MatrixKind, TaskMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connected weighted graph: a random spanning tree plus extra edges.
pub fn connected_graph(n: usize, extra: f64, seed: u64) -> SparseGraph {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for v in 1..n {
        let u = r.gen_range(0..v);
        edges.push((u, v, r.gen_range(0.1..2.0)));
    }
    for u in 0..n {
        for v in u + 1..n {
            if r.gen::<f64>() < extra {
                edges.push((u, v, r.gen_range(0.1..2.0)));
            }
        }
    }
    SparseGraph::from_edges(n, edges).unwrap()
}

/// Any weighted graph, possibly disconnected.
pub fn random_graph(n: usize, density: f64, seed: u64) -> SparseGraph {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.gen::<f64>() < density {
                edges.push((u, v, r.gen_range(0.01..3.0)));
            }
        }
    }
    SparseGraph::from_edges(n, edges).unwrap()
}

pub fn random_labels(n: usize, m: usize, pos_rate: f64, seed: u64) -> LabelMatrix {
    let mut r = rng(seed);
    let values = DMatrix::from_fn(
        n,
        m,
        |_, _| if r.gen::<f64>() < pos_rate { 1.0 } else { -1.0 },
    );
    LabelMatrix::from_matrix(values).unwrap()
}

pub fn random_task_matrix(kind: MatrixKind, m: usize, seed: u64) -> TaskMatrix {
    let mut r = rng(seed);
    let mut c = DMatrix::zeros(m, m);
    for k in 0..m {
        for s in k + 1..m {
            let v: f64 = r.gen();
            c[(k, s)] = v;
            c[(s, k)] = v;
        }
    }
    TaskMatrix::new(kind, c).unwrap()
}

/// Random training set holding between 1 and n - 1 vertices.
pub fn random_partition(n: usize, seed: u64) -> Partition {
    let mut r = rng(seed);
    let mut train: Vec<usize> = (0..n).filter(|_| r.gen::<f64>() < 0.5).collect();
    if train.is_empty() {
        train.push(0);
    }
    if train.len() == n {
        train.pop();
    }
    Partition::from_train(n, train).unwrap()
}

/// Dense `(D_UU - W_UU)^-1 W_US y_S`.
pub fn dense_lp(g: &SparseGraph, part: &Partition, y_train: &DVector<f64>) -> DVector<f64> {
    let w = g.to_dense();
    let (u, s) = (part.test(), part.train());
    let mut a = DMatrix::zeros(u.len(), u.len());
    for (a_i, &i) in u.iter().enumerate() {
        for (a_j, &j) in u.iter().enumerate() {
            a[(a_i, a_j)] = if i == j {
                g.degree(i) - w[(i, j)]
            } else {
                -w[(i, j)]
            };
        }
    }
    let w_us = DMatrix::from_fn(u.len(), s.len(), |a_i, b| w[(u[a_i], s[b])]);
    a.lu()
        .solve(&(w_us * y_train))
        .expect("singular dense system")
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
