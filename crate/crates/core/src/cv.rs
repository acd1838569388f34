//! Protein-level k-fold cross-validation: every method scores each held-out
//! fold from the remaining folds, and metrics are computed on the assembled
//! out-of-fold score matrix.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{baseline_gba, baseline_knn, baseline_random_walk};
use crate::error::{Error, Result};
use crate::graph::{NetworkCollection, SparseGraph};
use crate::labels::LabelMatrix;
use crate::metrics::{auprc, fmax, FmaxResult, PrecisionAveraging};
use crate::multitask::MultitaskMap;
use crate::ontology::SizeBin;
use crate::propagation::{
    mtlp, mtlp_inv, propagate_all_tasks, ColumnFailure, LabelMode, Partition, Propagation,
    ScoreMatrix, SolverOptions,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    n: usize,
    k: usize,
    seed: u64,
    fold: Vec<usize>,
}

impl FoldAssignment {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fold_of(&self, i: usize) -> usize {
        self.fold[i]
    }

    /// Members of fold `f`, ascending.
    pub fn members(&self, f: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.fold[i] == f).collect()
    }

    /// Everything outside fold `f`, ascending.
    pub fn complement(&self, f: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.fold[i] != f).collect()
    }
}

/// Shuffles `0..n` with the seeded generator and deals the result into `k`
/// folds round-robin, so fold sizes differ by at most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidInput(format!(
            "fold count must be at least 2, got {k}"
        )));
    }
    if n < k {
        return Err(Error::InvalidInput(format!(
            "cannot split {n} proteins into {k} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    Ok(FoldAssignment { n, k, seed, fold })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Lp,
    Mtlp,
    MtlpInv,
    Gba,
    Rw,
    Knn,
}

impl Method {
    pub fn is_multitask(self) -> bool {
        matches!(self, Method::Mtlp | Method::MtlpInv)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Lp => "lp",
            Method::Mtlp => "mtlp",
            Method::MtlpInv => "mtlp-inv",
            Method::Gba => "gba",
            Method::Rw => "rw",
            Method::Knn => "knn",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lp" => Ok(Method::Lp),
            "mtlp" => Ok(Method::Mtlp),
            "mtlp-inv" => Ok(Method::MtlpInv),
            "gba" => Ok(Method::Gba),
            "rw" => Ok(Method::Rw),
            "knn" => Ok(Method::Knn),
            other => Err(Error::InvalidInput(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MethodSpec {
    pub method: Method,
    pub label_mode: LabelMode,
    pub solver: SolverOptions,
    pub rw_steps: usize,
    pub knn_k: usize,
}

impl MethodSpec {
    pub fn new(method: Method) -> Self {
        MethodSpec {
            method,
            label_mode: if method == Method::Lp {
                LabelMode::ClassNormalized
            } else {
                LabelMode::Raw
            },
            solver: SolverOptions::default(),
            rw_steps: 100,
            knn_k: 5,
        }
    }
}

/// The integrated graph, plus the member networks for kNN. Both are indexed
/// by the same vertex order.
#[derive(Debug, Clone, Copy)]
pub struct ScoringInput<'a> {
    pub graph: &'a SparseGraph,
    pub networks: Option<&'a NetworkCollection>,
}

/// Scores the test vertices of `part` for every task in `y`.
pub fn score_partition(
    input: &ScoringInput<'_>,
    part: &Partition,
    y: &LabelMatrix,
    map: Option<&MultitaskMap>,
    spec: &MethodSpec,
) -> Result<Propagation> {
    let g = input.graph;
    let need_map = || {
        map.ok_or_else(|| {
            Error::InvalidInput(format!("method {} needs a multitask map", spec.method))
        })
    };
    match spec.method {
        Method::Lp => propagate_all_tasks(
            g,
            part,
            &y.select_rows(part.train()),
            spec.label_mode,
            &spec.solver,
        ),
        Method::Mtlp => mtlp(g, part, y, need_map()?, spec.label_mode, &spec.solver),
        Method::MtlpInv => mtlp_inv(g, part, y, need_map()?, spec.label_mode, &spec.solver),
        Method::Gba | Method::Rw | Method::Knn => {
            let networks = match spec.method {
                Method::Knn => Some(input.networks.ok_or_else(|| {
                    Error::InvalidInput(
                        "kNN needs the individual networks, not an integrated graph".into(),
                    )
                })?),
                _ => None,
            };
            let y_train = y.select_rows(part.train());
            let columns: Vec<Result<Vec<f64>>> = (0..y.m())
                .into_par_iter()
                .map(|k| {
                    let labels: Vec<f64> = y_train.column(k).iter().copied().collect();
                    match (spec.method, networks) {
                        (Method::Gba, _) => baseline_gba(g, part, &labels),
                        (Method::Rw, _) => baseline_random_walk(g, part, &labels, spec.rw_steps),
                        (_, Some(nc)) => baseline_knn(nc, part, &labels, spec.knn_k),
                        (_, None) => unreachable!("networks checked above"),
                    }
                })
                .collect();
            collect_columns(part, columns)
        }
    }
}

fn collect_columns(part: &Partition, columns: Vec<Result<Vec<f64>>>) -> Result<Propagation> {
    let mut values = DMatrix::zeros(part.test().len(), columns.len());
    let mut failures = Vec::new();
    for (k, col) in columns.into_iter().enumerate() {
        match col {
            Ok(v) => values.set_column(k, &DVector::from_vec(v)),
            Err(e @ (Error::Degenerate(_) | Error::NotConverged { .. })) => {
                failures.push(ColumnFailure {
                    column: k,
                    message: e.to_string(),
                })
            }
            Err(e) => return Err(e),
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

/// One task group to evaluate: its term names, labels over the full vertex
/// set, and the multitask map when the method needs one.
#[derive(Debug, Clone)]
pub struct GroupInput {
    pub name: String,
    pub terms: Vec<String>,
    pub labels: LabelMatrix,
    pub map: Option<MultitaskMap>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalOptions {
    pub size_split: usize,
    /// Also report Fmax with precision averaged over predicting proteins only.
    pub predicted_only_fmax: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            size_split: 20,
            predicted_only_fmax: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskMetric {
    pub term: String,
    pub group: String,
    /// `None` when the task was skipped.
    pub auprc: Option<f64>,
    pub n_pos: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct GroupMeans {
    pub all: Option<f64>,
    pub small: Option<f64>,
    pub large: Option<f64>,
}

impl GroupMeans {
    fn of<'a>(tasks: impl Iterator<Item = &'a TaskMetric>, size_split: usize) -> Self {
        let (mut all, mut small, mut large) = (Vec::new(), Vec::new(), Vec::new());
        for t in tasks {
            if let Some(v) = t.auprc {
                all.push(v);
                match SizeBin::of(t.n_pos, size_split) {
                    SizeBin::Small => small.push(v),
                    SizeBin::Large => large.push(v),
                }
            }
        }
        GroupMeans {
            all: mean(&all),
            small: mean(&small),
            large: mean(&large),
        }
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub struct SkipCounts {
    /// Tasks whose out-of-fold labels hold a single class.
    pub single_class: usize,
    /// Tasks for which at least one fold could not be scored.
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupReport {
    pub group: String,
    pub n_tasks: usize,
    pub means: GroupMeans,
    pub fmax: Option<FmaxResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fmax_predicted_only: Option<FmaxResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub manifest: serde_json::Value,
    pub per_task: Vec<TaskMetric>,
    pub groups: GroupMeans,
    pub fmax: Option<FmaxResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fmax_predicted_only: Option<FmaxResult>,
    pub skipped: SkipCounts,
    pub by_group: Vec<GroupReport>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Per-task rows `term<TAB>group<TAB>n_pos<TAB>auprc`; skipped tasks print `NA`.
    pub fn write_per_task_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "term\tgroup\tn_pos\tauprc")?;
        for t in &self.per_task {
            match t.auprc {
                Some(v) => writeln!(w, "{}\t{}\t{}\t{}", t.term, t.group, t.n_pos, v)?,
                None => writeln!(w, "{}\t{}\t{}\tNA", t.term, t.group, t.n_pos)?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub report: MetricsReport,
    /// Out-of-fold scores per group, `n x m_group`.
    pub scores: Vec<DMatrix<f64>>,
}

struct GroupScores {
    scores: DMatrix<f64>,
    failed: Vec<bool>,
}

fn cross_validate_group(
    input: &ScoringInput<'_>,
    group: &GroupInput,
    folds: &FoldAssignment,
    spec: &MethodSpec,
) -> Result<GroupScores> {
    let (n, m) = (group.labels.n(), group.labels.m());
    let per_fold: Vec<Propagation> = (0..folds.k())
        .into_par_iter()
        .map(|f| {
            let part = Partition::from_train(n, folds.complement(f))?;
            score_partition(input, &part, &group.labels, group.map.as_ref(), spec)
        })
        .collect::<Result<_>>()?;
    let mut scores = DMatrix::zeros(n, m);
    let mut failed = vec![false; m];
    for prop in &per_fold {
        for (r, &i) in prop.scores.rows.iter().enumerate() {
            scores.set_row(i, &prop.scores.values.row(r));
        }
        for fail in &prop.failures {
            log::warn!(
                "group {}: task {} could not be scored in one fold: {}",
                group.name,
                group.terms[fail.column],
                fail.message
            );
            failed[fail.column] = true;
        }
    }
    Ok(GroupScores { scores, failed })
}

fn fmax_over(
    columns: &[(&DMatrix<f64>, &LabelMatrix, usize)],
    averaging: PrecisionAveraging,
) -> Option<FmaxResult> {
    let n = columns.first()?.0.nrows();
    let m = columns.len();
    let mut scores = DMatrix::zeros(n, m);
    let mut positives = Vec::new();
    for (c, &(s, y, k)) in columns.iter().enumerate() {
        scores.set_column(c, &s.column(k));
        positives.extend(y.positives(k).into_iter().map(|i| (i, c)));
    }
    let labels = LabelMatrix::from_positives(n, m, positives);
    fmax(&scores, &labels, averaging).ok()
}

/// Runs k-fold cross-validation for every group over one shared fold
/// assignment. Tasks that cannot be evaluated are skipped and counted.
pub fn run_cross_validation(
    input: &ScoringInput<'_>,
    groups: &[GroupInput],
    folds: &FoldAssignment,
    spec: &MethodSpec,
    eval: &EvalOptions,
) -> Result<CvOutcome> {
    for g in groups {
        if g.labels.n() != input.graph.n() || g.labels.n() != folds.n() {
            return Err(Error::DimensionMismatch {
                expected: input.graph.n(),
                found: g.labels.n(),
            });
        }
        if g.terms.len() != g.labels.m() {
            return Err(Error::DimensionMismatch {
                expected: g.labels.m(),
                found: g.terms.len(),
            });
        }
    }
    let mut per_task = Vec::new();
    let mut skipped = SkipCounts::default();
    let mut by_group = Vec::new();
    let mut all_scores = Vec::new();
    let mut fmax_failed = Vec::new();
    for group in groups {
        let gs = cross_validate_group(input, group, folds, spec)?;
        let values: Vec<Result<Option<f64>>> = (0..group.labels.m())
            .into_par_iter()
            .map(|k| {
                if gs.failed[k] {
                    return Ok(None);
                }
                let labels: Vec<f64> = group.labels.as_matrix().column(k).iter().copied().collect();
                let scores: Vec<f64> = gs.scores.column(k).iter().copied().collect();
                match auprc(&scores, &labels) {
                    Ok(v) => Ok(Some(v)),
                    Err(Error::Degenerate(_)) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect();
        let start = per_task.len();
        for (k, v) in values.into_iter().enumerate() {
            let v = v?;
            if v.is_none() {
                if gs.failed[k] {
                    skipped.failed += 1;
                } else {
                    log::info!("task {} has single-class labels; skipped", group.terms[k]);
                    skipped.single_class += 1;
                }
            }
            per_task.push(TaskMetric {
                term: group.terms[k].clone(),
                group: group.name.clone(),
                auprc: v,
                n_pos: group.labels.positive_count(k),
            });
        }
        fmax_failed.push(gs.failed.clone());
        all_scores.push(gs.scores);
        by_group.push(GroupReport {
            group: group.name.clone(),
            n_tasks: group.labels.m(),
            means: GroupMeans::of(per_task[start..].iter(), eval.size_split),
            fmax: None,
            fmax_predicted_only: None,
        });
    }

    let columns_of = |gi: usize| -> Vec<(&DMatrix<f64>, &LabelMatrix, usize)> {
        (0..groups[gi].labels.m())
            .filter(|&k| !fmax_failed[gi][k])
            .map(|k| (&all_scores[gi], &groups[gi].labels, k))
            .collect()
    };
    let modes: &[PrecisionAveraging] = if eval.predicted_only_fmax {
        &[
            PrecisionAveraging::AllProteins,
            PrecisionAveraging::PredictedOnly,
        ]
    } else {
        &[PrecisionAveraging::AllProteins]
    };
    let mut overall = [None, None];
    for (slot, &mode) in modes.iter().enumerate() {
        let mut everything = Vec::new();
        for (gi, report) in by_group.iter_mut().enumerate() {
            let cols = columns_of(gi);
            let value = fmax_over(&cols, mode);
            match mode {
                PrecisionAveraging::AllProteins => report.fmax = value,
                PrecisionAveraging::PredictedOnly => report.fmax_predicted_only = value,
            }
            everything.extend(cols);
        }
        overall[slot] = fmax_over(&everything, mode);
    }

    let report = MetricsReport {
        manifest: serde_json::Value::Null,
        groups: GroupMeans::of(per_task.iter(), eval.size_split),
        per_task,
        fmax: overall[0],
        fmax_predicted_only: overall[1],
        skipped,
        by_group,
    };
    Ok(CvOutcome {
        report,
        scores: all_scores,
    })
}

/// Writes `protein<TAB>term<TAB>score<TAB>fold` for every protein and task.
pub fn write_scores<W: Write>(
    mut w: W,
    proteins: &[String],
    groups: &[GroupInput],
    scores: &[DMatrix<f64>],
    folds: &FoldAssignment,
) -> std::io::Result<()> {
    writeln!(w, "protein\tterm\tscore\tfold")?;
    for (group, s) in groups.iter().zip(scores) {
        for (i, protein) in proteins.iter().enumerate() {
            for (k, term) in group.terms.iter().enumerate() {
                writeln!(
                    w,
                    "{}\t{}\t{}\t{}",
                    protein,
                    term,
                    s[(i, k)],
                    folds.fold_of(i)
                )?;
            }
        }
    }
    Ok(())
}
