//! Single-task reference predictors: guilt-by-association, a t-step random
//! walk from the positive training vertices, and per-network k-nearest
//! neighbours averaged across networks.

use crate::error::{Error, Result};
use crate::graph::{NetworkCollection, SparseGraph};
use crate::propagation::Partition;

fn check_labels(part: &Partition, y_train: &[f64]) -> Result<()> {
    if y_train.len() != part.train().len() {
        return Err(Error::DimensionMismatch {
            expected: part.train().len(),
            found: y_train.len(),
        });
    }
    Ok(())
}

/// Training label per vertex, `None` for test vertices.
fn label_lookup(part: &Partition, y_train: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None; part.n()];
    for (&v, &y) in part.train().iter().zip(y_train) {
        out[v] = Some(y);
    }
    out
}

/// Weighted mean label of each test vertex's labeled neighbours; 0 without any.
pub fn baseline_gba(g: &SparseGraph, part: &Partition, y_train: &[f64]) -> Result<Vec<f64>> {
    check_labels(part, y_train)?;
    let labels = label_lookup(part, y_train);
    Ok(part
        .test()
        .iter()
        .map(|&i| {
            let (mut num, mut den) = (0.0, 0.0);
            for (j, w) in g.neighbors(i) {
                if let Some(y) = labels[j] {
                    num += w * y;
                    den += w;
                }
            }
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        })
        .collect())
}

/// Probability mass on each test vertex after `steps` transitions of
/// `P = D^-1 W`, starting uniformly on the positive training vertices.
pub fn baseline_random_walk(
    g: &SparseGraph,
    part: &Partition,
    y_train: &[f64],
    steps: usize,
) -> Result<Vec<f64>> {
    check_labels(part, y_train)?;
    if steps == 0 {
        return Err(Error::InvalidInput(
            "random walk needs at least one step".into(),
        ));
    }
    let seeds: Vec<usize> = part
        .train()
        .iter()
        .zip(y_train)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&v, _)| v)
        .collect();
    if seeds.is_empty() {
        return Err(Error::Degenerate("empty seed set".into()));
    }
    let mut s = vec![0.0; g.n()];
    for &v in &seeds {
        s[v] = 1.0 / seeds.len() as f64;
    }
    let mut next = vec![0.0; g.n()];
    for _ in 0..steps {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (j, &mass) in s.iter().enumerate() {
            let d = g.degree(j);
            if mass == 0.0 || d == 0.0 {
                continue;
            }
            for (i, w) in g.neighbors(j) {
                next[i] += mass * w / d;
            }
        }
        std::mem::swap(&mut s, &mut next);
    }
    Ok(part.test().iter().map(|&i| s[i]).collect())
}

/// Per network, the sum of `w_ij y_j` over the `k` heaviest labeled
/// neighbours divided by `k`; the final score is the mean over the networks
/// that contain the vertex. Equal weights are broken by lower vertex index.
///
/// Vertex indices in `part` refer to the collection's union vertex order.
pub fn baseline_knn(
    nc: &NetworkCollection,
    part: &Partition,
    y_train: &[f64],
    k: usize,
) -> Result<Vec<f64>> {
    check_labels(part, y_train)?;
    if k == 0 {
        return Err(Error::InvalidInput("kNN needs k >= 1".into()));
    }
    if part.n() != nc.union_vertices.len() {
        return Err(Error::DimensionMismatch {
            expected: nc.union_vertices.len(),
            found: part.n(),
        });
    }
    let labels = label_lookup(part, y_train);
    let maps = nc.local_to_union();
    let mut sum = vec![0.0; part.n()];
    let mut count = vec![0usize; part.n()];
    let mut is_test = vec![false; part.n()];
    for &i in part.test() {
        is_test[i] = true;
    }
    let mut candidates: Vec<(f64, usize, f64)> = Vec::new();
    for (net, map) in nc.networks.iter().zip(&maps) {
        for (local, &u) in map.iter().enumerate() {
            if !is_test[u] {
                continue;
            }
            candidates.clear();
            candidates.extend(
                net.graph
                    .neighbors(local)
                    .filter_map(|(j, w)| labels[map[j]].map(|y| (w, map[j], y))),
            );
            candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let s: f64 = candidates.iter().take(k).map(|&(w, _, y)| w * y).sum();
            sum[u] += s / k as f64;
            count[u] += 1;
        }
    }
    Ok(part
        .test()
        .iter()
        .map(|&i| {
            if count[i] > 0 {
                sum[i] / count[i] as f64
            } else {
                0.0
            }
        })
        .collect())
}
