//! Label propagation: the harmonic extension of training labels over the
//! graph, solved per task with Jacobi-preconditioned conjugate gradient,
//! and its multitask variants obtained by right-multiplying the propagated
//! scores with a multitask map.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::labels::LabelMatrix;
use crate::multitask::{MapMode, MultitaskMap};

/// Training (`S`) and test (`U`) vertex sets; both sorted, disjoint, and
/// together covering every vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    n: usize,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl Partition {
    /// Partition with the given training vertices; every other vertex is a test vertex.
    pub fn from_train(n: usize, mut train: Vec<usize>) -> Result<Self> {
        train.sort_unstable();
        if train.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("duplicate training vertex".into()));
        }
        if let Some(&bad) = train.iter().find(|&&v| v >= n) {
            return Err(Error::InvalidInput(format!(
                "training vertex {bad} out of range"
            )));
        }
        if train.is_empty() {
            return Err(Error::InvalidInput("training set is empty".into()));
        }
        let mut is_train = vec![false; n];
        for &v in &train {
            is_train[v] = true;
        }
        let test = (0..n).filter(|&v| !is_train[v]).collect();
        Ok(Partition { n, train, test })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn train(&self) -> &[usize] {
        &self.train
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }
}

/// Scores for a subset of vertices (`rows`) across `m` tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub rows: Vec<usize>,
    pub values: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LabelMode {
    #[default]
    Raw,
    ClassNormalized,
}

impl FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(LabelMode::Raw),
            "class-normalized" | "normalized" => Ok(LabelMode::ClassNormalized),
            other => Err(Error::InvalidInput(format!("unknown label mode {other:?}"))),
        }
    }
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelMode::Raw => "raw",
            LabelMode::ClassNormalized => "class-normalized",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Stop once `||b - A x|| <= rel_tol * ||b||`.
    pub rel_tol: f64,
    /// Iteration cap as a multiple of the number of unknowns.
    pub max_iter_factor: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rel_tol: 1e-12,
            max_iter_factor: 10,
        }
    }
}

/// Scales positive labels to `1/#pos` and negative ones to `-1/#neg`.
pub fn normalize_training_labels(y: &[f64]) -> Result<Vec<f64>> {
    let pos = y.iter().filter(|&&v| v > 0.0).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate(
            "degenerate fold: training labels contain a single class".into(),
        ));
    }
    let (p, q) = (1.0 / pos as f64, -1.0 / neg as f64);
    Ok(y.iter().map(|&v| if v > 0.0 { p } else { q }).collect())
}

const UNSET: usize = usize::MAX;

/// The reduced system `(D_UU - W_UU) f_U = W_US y_S` for one partition.
///
/// Test vertices in connected components without a training vertex are
/// excluded from the system and score 0.
#[derive(Debug)]
pub struct LpSystem<'g> {
    graph: &'g SparseGraph,
    /// Vertex ids of the unknowns.
    unknowns: Vec<usize>,
    /// Per vertex: unknown index, or `UNSET`.
    local: Vec<usize>,
    /// Per vertex: position in the training set, or `UNSET`.
    train_pos: Vec<usize>,
    /// Per test position: unknown index, or `UNSET` when unreachable.
    test_slot: Vec<usize>,
    n_train: usize,
}

impl<'g> LpSystem<'g> {
    pub fn new(graph: &'g SparseGraph, part: &Partition) -> Result<Self> {
        if part.n() != graph.n() {
            return Err(Error::DimensionMismatch {
                expected: graph.n(),
                found: part.n(),
            });
        }
        let comp = graph.components();
        let n_comp = comp.iter().copied().max().map_or(0, |c| c + 1);
        let mut seeded = vec![false; n_comp];
        let mut train_pos = vec![UNSET; graph.n()];
        for (pos, &v) in part.train().iter().enumerate() {
            seeded[comp[v]] = true;
            train_pos[v] = pos;
        }
        let mut local = vec![UNSET; graph.n()];
        let mut unknowns = Vec::new();
        let mut test_slot = Vec::with_capacity(part.test().len());
        for &v in part.test() {
            if seeded[comp[v]] {
                local[v] = unknowns.len();
                test_slot.push(unknowns.len());
                unknowns.push(v);
            } else {
                test_slot.push(UNSET);
            }
        }
        Ok(LpSystem {
            graph,
            unknowns,
            local,
            train_pos,
            test_slot,
            n_train: part.train().len(),
        })
    }

    /// Number of test vertices reachable from a training vertex.
    pub fn num_unknowns(&self) -> usize {
        self.unknowns.len()
    }

    fn rhs(&self, y_train: &[f64]) -> Vec<f64> {
        self.unknowns
            .iter()
            .map(|&v| {
                self.graph
                    .neighbors(v)
                    .filter(|&(u, _)| self.train_pos[u] != UNSET)
                    .map(|(u, w)| w * y_train[self.train_pos[u]])
                    .sum()
            })
            .collect()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, &v) in self.unknowns.iter().enumerate() {
            let mut acc = self.graph.degree(v) * x[i];
            for (u, w) in self.graph.neighbors(v) {
                let j = self.local[u];
                if j != UNSET {
                    acc -= w * x[j];
                }
            }
            out[i] = acc;
        }
    }

    /// Scores for the test vertices, in partition order.
    pub fn solve(&self, y_train: &[f64], opts: &SolverOptions) -> Result<Vec<f64>> {
        if y_train.len() != self.n_train {
            return Err(Error::DimensionMismatch {
                expected: self.n_train,
                found: y_train.len(),
            });
        }
        let b = self.rhs(y_train);
        let x = self.conjugate_gradient(&b, opts)?;
        Ok(self
            .test_slot
            .iter()
            .map(|&slot| if slot == UNSET { 0.0 } else { x[slot] })
            .collect())
    }

    fn conjugate_gradient(&self, b: &[f64], opts: &SolverOptions) -> Result<Vec<f64>> {
        let len = b.len();
        let mut x = vec![0.0; len];
        let b_norm = norm(b);
        if b_norm == 0.0 {
            return Ok(x);
        }
        let inv_diag: Vec<f64> = self
            .unknowns
            .iter()
            .map(|&v| 1.0 / self.graph.degree(v))
            .collect();
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut q = vec![0.0; len];
        let mut rz = dot(&r, &z);
        let cap = (opts.max_iter_factor * len).max(1);
        let mut residual = 1.0;
        for _ in 0..cap {
            self.apply(&p, &mut q);
            let alpha = rz / dot(&p, &q);
            for i in 0..len {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            residual = norm(&r) / b_norm;
            if residual <= opts.rel_tol {
                return Ok(x);
            }
            for i in 0..len {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..len {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::NotConverged {
            iterations: cap,
            residual,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Harmonic solution on the test vertices for one task.
pub fn solve_lp(
    g: &SparseGraph,
    part: &Partition,
    y_train: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    LpSystem::new(g, part)?.solve(y_train, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnFailure {
    pub column: usize,
    pub message: String,
}

/// Scores over the test vertices plus the columns that could not be
/// solved; failed columns are left at 0.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub scores: ScoreMatrix,
    pub failures: Vec<ColumnFailure>,
}

/// Solves every column of `y_train` (rows aligned with `part.train()`)
/// independently.
pub fn propagate_all_tasks(
    g: &SparseGraph,
    part: &Partition,
    y_train: &DMatrix<f64>,
    mode: LabelMode,
    opts: &SolverOptions,
) -> Result<Propagation> {
    if y_train.nrows() != part.train().len() {
        return Err(Error::DimensionMismatch {
            expected: part.train().len(),
            found: y_train.nrows(),
        });
    }
    let system = LpSystem::new(g, part)?;
    let columns: Vec<Result<Vec<f64>>> = (0..y_train.ncols())
        .into_par_iter()
        .map(|k| {
            let labels: Vec<f64> = y_train.column(k).iter().copied().collect();
            let labels = match mode {
                LabelMode::Raw => labels,
                LabelMode::ClassNormalized => normalize_training_labels(&labels)?,
            };
            system.solve(&labels, opts)
        })
        .collect();
    let mut values = DMatrix::zeros(part.test().len(), y_train.ncols());
    let mut failures = Vec::new();
    for (k, col) in columns.into_iter().enumerate() {
        match col {
            Ok(v) => values.set_column(k, &nalgebra::DVector::from_vec(v)),
            Err(e) => failures.push(ColumnFailure {
                column: k,
                message: e.to_string(),
            }),
        }
    }
    Ok(Propagation {
        scores: ScoreMatrix {
            rows: part.test().to_vec(),
            values,
        },
        failures,
    })
}

fn check_map(y: &LabelMatrix, map: &MultitaskMap, mode: MapMode) -> Result<()> {
    if map.mode() != mode {
        return Err(Error::InvalidInput(format!(
            "expected a {mode:?} map, got {:?}",
            map.mode()
        )));
    }
    if map.m() != y.m() {
        return Err(Error::DimensionMismatch {
            expected: y.m(),
            found: map.m(),
        });
    }
    Ok(())
}

fn propagate_then_map(
    g: &SparseGraph,
    part: &Partition,
    y: &LabelMatrix,
    map: &MultitaskMap,
    mode: LabelMode,
    opts: &SolverOptions,
) -> Result<Propagation> {
    if y.n() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: y.n(),
        });
    }
    let y_train = y.select_rows(part.train());
    let mut prop = propagate_all_tasks(g, part, &y_train, mode, opts)?;
    prop.scores.values = map.apply(&prop.scores.values)?;
    Ok(prop)
}

/// Dissimilarity-driven multitask propagation: `F*_U A^p`, where `F*_U` is
/// plain propagation of the training labels.
pub fn mtlp(
    g: &SparseGraph,
    part: &Partition,
    y: &LabelMatrix,
    map: &MultitaskMap,
    mode: LabelMode,
    opts: &SolverOptions,
) -> Result<Propagation> {
    check_map(y, map, MapMode::DissimilarityPower)?;
    propagate_then_map(g, part, y, map, mode, opts)
}

/// Similarity-driven multitask propagation: `F*_U A^-1`.
pub fn mtlp_inv(
    g: &SparseGraph,
    part: &Partition,
    y: &LabelMatrix,
    map: &MultitaskMap,
    mode: LabelMode,
    opts: &SolverOptions,
) -> Result<Propagation> {
    check_map(y, map, MapMode::SimilarityInverse)?;
    propagate_then_map(g, part, y, map, mode, opts)
}

/// Maps the training labels first and propagates the mapped values,
/// `propagate((Y M)_S)`. Agrees with [`mtlp`] / [`mtlp_inv`] on raw labels.
pub fn propagate_mapped_labels(
    g: &SparseGraph,
    part: &Partition,
    y: &LabelMatrix,
    map: &MultitaskMap,
    opts: &SolverOptions,
) -> Result<Propagation> {
    if map.m() != y.m() {
        return Err(Error::DimensionMismatch {
            expected: y.m(),
            found: map.m(),
        });
    }
    let mapped = map.apply(&y.select_rows(part.train()))?;
    propagate_all_tasks(g, part, &mapped, LabelMode::Raw, opts)
}
