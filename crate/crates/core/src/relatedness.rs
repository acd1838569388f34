//! Pairwise task similarity and dissimilarity measures and the task
//! matrices built from them.
//!
//! Hierarchical measures use the information content `-ln nu(k)` of each
//! term and the minimum-frequency common ancestor of a pair. The
//! set-overlap measure needs only the positive sets.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{OntologyDag, TaskSet, TermStats};

/// Information-content dissimilarity of two terms given their frequencies
/// and that of their minimum-frequency common ancestor.
pub fn diss0(nu_k: f64, nu_r: f64, nu_ma: f64) -> Result<f64> {
    for nu in [nu_k, nu_r, nu_ma] {
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "frequency {nu} outside (0, 1]"
            )));
        }
    }
    if nu_ma < nu_k.max(nu_r) {
        return Err(Error::InvalidInput(format!(
            "ancestor frequency {nu_ma} below descendant frequencies ({nu_k}, {nu_r}); \
             is the annotation table closed?"
        )));
    }
    Ok((-nu_k.ln() - nu_r.ln() + 2.0 * nu_ma.ln()).max(0.0))
}

/// Jiang similarity `1 / (1 + d0)`.
pub fn sim_jiang(d0: f64) -> f64 {
    1.0 / (1.0 + d0)
}

/// Lin similarity `2 ln nu(MA) / (ln nu(k) + ln nu(r))`, with 0 when the
/// common ancestor carries no information.
pub fn sim_lin(nu_k: f64, nu_r: f64, nu_ma: f64) -> Result<f64> {
    if nu_k == 1.0 && nu_r == 1.0 {
        return Err(Error::Degenerate(
            "Lin similarity undefined (zero denominator): both terms have frequency 1".into(),
        ));
    }
    if nu_ma == 1.0 {
        return Ok(0.0);
    }
    Ok((2.0 * nu_ma.ln() / (nu_k.ln() + nu_r.ln())).clamp(0.0, 1.0))
}

/// Jaccard overlap of two ascending positive sets; 0 when both are empty.
pub fn sim_ic_jaccard(pk: &[usize], pr: &[usize]) -> f64 {
    let (mut i, mut j, mut shared) = (0, 0, 0usize);
    while i < pk.len() && j < pr.len() {
        match pk[i].cmp(&pr[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = pk.len() + pr.len() - shared;
    if union == 0 {
        0.0
    } else {
        shared as f64 / union as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Similarity,
    Dissimilarity,
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixKind::Similarity => "similarity",
            MatrixKind::Dissimilarity => "dissimilarity",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Diss0,
    Sim1,
    Sim2,
    Sim3,
    Diss3,
}

impl Measure {
    pub fn kind(self) -> MatrixKind {
        match self {
            Measure::Diss0 | Measure::Diss3 => MatrixKind::Dissimilarity,
            Measure::Sim1 | Measure::Sim2 | Measure::Sim3 => MatrixKind::Similarity,
        }
    }

    pub fn needs_hierarchy(self) -> bool {
        matches!(self, Measure::Diss0 | Measure::Sim1 | Measure::Sim2)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Diss0 => "diss0",
            Measure::Sim1 => "sim1",
            Measure::Sim2 => "sim2",
            Measure::Sim3 => "sim3",
            Measure::Diss3 => "diss3",
        })
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diss0" => Ok(Measure::Diss0),
            "sim1" => Ok(Measure::Sim1),
            "sim2" => Ok(Measure::Sim2),
            "sim3" => Ok(Measure::Sim3),
            "diss3" => Ok(Measure::Diss3),
            other => Err(Error::InvalidInput(format!("unknown measure {other:?}"))),
        }
    }
}

/// Symmetric `m x m` task interaction matrix with entries in [0, 1] and a
/// zero diagonal. Dense storage: `8 m^2` bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskMatrix {
    kind: MatrixKind,
    entries: DMatrix<f64>,
}

impl TaskMatrix {
    pub fn new(kind: MatrixKind, entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::InvalidInput(format!(
                "task matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let m = entries.nrows();
        for k in 0..m {
            if entries[(k, k)] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "task matrix diagonal entry {k} is not zero"
                )));
            }
            for r in 0..m {
                let v = entries[(k, r)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidInput(format!(
                        "task matrix entry ({k}, {r}) = {v} outside [0, 1]"
                    )));
                }
                if v != entries[(r, k)] {
                    return Err(Error::InvalidInput(format!(
                        "task matrix not symmetric at ({k}, {r})"
                    )));
                }
            }
        }
        Ok(TaskMatrix { kind, entries })
    }

    pub fn zeros(kind: MatrixKind, m: usize) -> Self {
        TaskMatrix {
            kind,
            entries: DMatrix::zeros(m, m),
        }
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, k: usize, r: usize) -> f64 {
        self.entries[(k, r)]
    }

    /// Graph Laplacian `diag(row sums) - C` of the matrix.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let m = self.m();
        let mut l = -self.entries.clone();
        for k in 0..m {
            l[(k, k)] = self.entries.row(k).sum();
        }
        l
    }
}

/// Inputs shared by all measures: positive sets per term (indexed like
/// `TaskSet::tasks`) and, for hierarchical measures, the ontology with
/// frequencies over the closed corpus.
#[derive(Debug, Clone, Copy)]
pub struct RelatednessContext<'a> {
    pub hierarchy: Option<(&'a OntologyDag, &'a TermStats)>,
    pub positives: &'a [Vec<usize>],
}

/// Pairwise measure over all tasks in `ts`. `diss0` is divided by its
/// largest off-diagonal value; the diagonal is always zero.
pub fn build_task_matrix(
    ts: &TaskSet,
    measure: Measure,
    ctx: &RelatednessContext<'_>,
) -> Result<TaskMatrix> {
    let m = ts.len();
    if m <= 1 {
        return Ok(TaskMatrix::zeros(measure.kind(), m));
    }
    let hierarchy = if measure.needs_hierarchy() {
        Some(ctx.hierarchy.ok_or_else(|| {
            Error::InvalidInput(format!("measure {measure} requires an ontology"))
        })?)
    } else {
        None
    };
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (k, r) = (ts.tasks[a], ts.tasks[b]);
            match (measure, hierarchy) {
                (Measure::Sim3, _) => Ok(sim_ic_jaccard(&ctx.positives[k], &ctx.positives[r])),
                (Measure::Diss3, _) => {
                    Ok(1.0 - sim_ic_jaccard(&ctx.positives[k], &ctx.positives[r]))
                }
                (_, Some((dag, stats))) => {
                    let ma = stats.min_frequency_common_ancestor(dag, k, r)?;
                    let (nk, nr, nma) = (
                        stats.frequency(k)?,
                        stats.frequency(r)?,
                        stats.frequency(ma)?,
                    );
                    match measure {
                        Measure::Diss0 => diss0(nk, nr, nma),
                        Measure::Sim1 => diss0(nk, nr, nma).map(sim_jiang),
                        _ => sim_lin(nk, nr, nma),
                    }
                }
                (_, None) => unreachable!("hierarchy checked above"),
            }
        })
        .collect::<Result<_>>()?;

    let scale = if measure == Measure::Diss0 {
        let max = values.iter().copied().fold(0.0, f64::max);
        if max <= 0.0 {
            return Err(Error::Degenerate(
                "degenerate dissimilarity: all tasks carry identical information".into(),
            ));
        }
        max
    } else {
        1.0
    };
    let mut entries = DMatrix::zeros(m, m);
    for (&(a, b), &v) in pairs.iter().zip(&values) {
        let v = (v / scale).clamp(0.0, 1.0);
        entries[(a, b)] = v;
        entries[(b, a)] = v;
    }
    TaskMatrix::new(measure.kind(), entries)
}

/// Random symmetric dissimilarity matrix: each off-diagonal pair is nonzero
/// with probability `density`, with weight uniform on (0, tau].
pub fn random_task_matrix(m: usize, density: f64, tau: f64, seed: u64) -> Result<TaskMatrix> {
    if m < 2 {
        return Err(Error::InvalidInput(
            "random task matrix needs at least two tasks".into(),
        ));
    }
    if !(density > 0.0 && density <= 1.0) || !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "density {density} and tau {tau} must lie in (0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = DMatrix::zeros(m, m);
    for k in 0..m {
        for r in k + 1..m {
            if rng.gen::<f64>() < density {
                let w = tau * (1.0 - rng.gen::<f64>());
                entries[(k, r)] = w;
                entries[(r, k)] = w;
            }
        }
    }
    TaskMatrix::new(MatrixKind::Dissimilarity, entries)
}

/// Writes the `# kind=<kind> m=<m>` header followed by the full matrix, row-major.
pub fn write_task_matrix<W: Write>(mut w: W, tm: &TaskMatrix) -> std::io::Result<()> {
    writeln!(w, "# kind={} m={}", tm.kind(), tm.m())?;
    for k in 0..tm.m() {
        let row: Vec<String> = (0..tm.m()).map(|r| tm.get(k, r).to_string()).collect();
        writeln!(w, "{}", row.join("\t"))?;
    }
    Ok(())
}

pub fn read_task_matrix(path: &Path) -> Result<TaskMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_task_matrix(std::io::BufReader::new(file), path)
}

pub fn parse_task_matrix<R: BufRead>(reader: R, path: &Path) -> Result<TaskMatrix> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, Ok(l))) if l.trim().is_empty() => continue,
            Some((_, Ok(l))) => break l,
            Some((_, Err(e))) => return Err(Error::io(path, e)),
            None => return Err(Error::parse(path, 1, "missing header")),
        }
    };
    let mut kind = None;
    let mut m = None;
    for field in header.trim_start_matches('#').split_whitespace() {
        match field.split_once('=') {
            Some(("kind", "similarity")) => kind = Some(MatrixKind::Similarity),
            Some(("kind", "dissimilarity")) => kind = Some(MatrixKind::Dissimilarity),
            Some(("m", v)) => m = v.parse::<usize>().ok(),
            _ => {}
        }
    }
    let (Some(kind), Some(m)) = (kind, m) else {
        return Err(Error::parse(
            path,
            1,
            "header must be `# kind=<similarity|dissimilarity> m=<m>`",
        ));
    };
    let mut entries = DMatrix::zeros(m, m);
    let mut row = 0;
    for (lineno, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if row >= m {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("more than {m} rows"),
            ));
        }
        let values: Vec<&str> = line.split('\t').collect();
        if values.len() != m {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected {m} columns, found {}", values.len()),
            ));
        }
        for (col, v) in values.iter().enumerate() {
            entries[(row, col)] = v
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, format!("bad value {v:?}")))?;
        }
        row += 1;
    }
    if row != m {
        return Err(Error::parse(
            path,
            row + 1,
            format!("expected {m} rows, found {row}"),
        ));
    }
    TaskMatrix::new(kind, entries)
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use crate::ontology::{true_path_closure, AnnotationTable, Branch, TaskGroup};
    use approx::assert_abs_diff_eq;

    #[test]
    fn diss0_examples() {
        assert_eq!(diss0(0.1, 0.1, 0.1).unwrap(), 0.0);
        assert_abs_diff_eq!(diss0(0.25, 0.5, 0.5).unwrap(), 0.6931, epsilon = 1e-4);
        assert_abs_diff_eq!(diss0(0.25, 0.25, 1.0).unwrap(), 2.7726, epsilon = 1e-4);
        assert!(diss0(0.5, 0.25, 0.3).is_err());
    }

    #[test]
    fn jiang_examples() {
        assert_eq!(sim_jiang(0.0), 1.0);
        assert_abs_diff_eq!(sim_jiang(2.7726), 0.2651, epsilon = 1e-4);
        let grid: Vec<f64> = (0..100).map(|i| sim_jiang(i as f64 * 0.5)).collect();
        assert!(grid.windows(2).all(|w| w[1] < w[0]));
        assert!(sim_jiang(1e12) < 1e-11);
    }

    #[test]
    fn lin_examples() {
        assert_eq!(sim_lin(0.3, 0.3, 0.3).unwrap(), 1.0);
        assert_abs_diff_eq!(sim_lin(0.25, 0.5, 0.5).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(sim_lin(0.25, 0.5, 1.0).unwrap(), 0.0);
        assert!(sim_lin(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(sim_ic_jaccard(&[0, 1], &[1, 2]), 1.0 / 3.0);
        assert_eq!(sim_ic_jaccard(&[0, 1], &[2, 3]), 0.0);
        assert_eq!(sim_ic_jaccard(&[4, 5], &[4, 5]), 1.0);
        assert_eq!(sim_ic_jaccard(&[], &[]), 0.0);
    }

    fn group() -> TaskGroup {
        TaskGroup {
            branch: Some(Branch::BP),
            bin: None,
        }
    }

    #[test]
    fn single_task_gives_zero_matrix() {
        let ts = TaskSet {
            group: group(),
            tasks: vec![0],
            positive_counts: vec![3],
        };
        let positives = vec![vec![0, 1, 2]];
        let ctx = RelatednessContext {
            hierarchy: None,
            positives: &positives,
        };
        let tm = build_task_matrix(&ts, Measure::Sim3, &ctx).unwrap();
        assert_eq!(tm.m(), 1);
        assert_eq!(tm.get(0, 0), 0.0);
    }

    #[test]
    fn identical_positive_sets_sim3() {
        let ts = TaskSet {
            group: group(),
            tasks: vec![0, 1],
            positive_counts: vec![2, 2],
        };
        let positives = vec![vec![3, 7], vec![3, 7]];
        let ctx = RelatednessContext {
            hierarchy: None,
            positives: &positives,
        };
        let tm = build_task_matrix(&ts, Measure::Sim3, &ctx).unwrap();
        assert_eq!(tm.get(0, 1), 1.0);
        assert_eq!(tm.kind(), MatrixKind::Similarity);
        let tm = build_task_matrix(&ts, Measure::Diss3, &ctx).unwrap();
        assert_eq!(tm.get(0, 1), 0.0);
        assert_eq!(tm.kind(), MatrixKind::Dissimilarity);
    }

    #[test]
    fn hierarchical_measure_without_ontology_fails() {
        let ts = TaskSet {
            group: group(),
            tasks: vec![0, 1],
            positive_counts: vec![2, 2],
        };
        let positives = vec![vec![3, 7], vec![3]];
        let ctx = RelatednessContext {
            hierarchy: None,
            positives: &positives,
        };
        assert!(build_task_matrix(&ts, Measure::Diss0, &ctx).is_err());
    }

    /// root <- mid <- leaf with 8 / 4 / 2 positives out of 8 proteins.
    fn chain_context() -> (OntologyDag, AnnotationTable) {
        let d = OntologyDag::new(
            vec![
                ("root".into(), Branch::BP),
                ("mid".into(), Branch::BP),
                ("leaf".into(), Branch::BP),
            ],
            &[("mid", "root"), ("leaf", "mid")],
        )
        .unwrap();
        let mut pairs = Vec::new();
        for i in 0..8 {
            let term = match i {
                0 | 1 => "leaf",
                2 | 3 => "mid",
                _ => "root",
            };
            pairs.push((format!("p{i}"), term.to_string()));
        }
        let a = true_path_closure(&AnnotationTable::from_pairs(pairs), &d).unwrap();
        (d, a)
    }

    #[test]
    fn diss0_chain_matches_pairwise_evaluation() {
        let (d, a) = chain_context();
        let stats = TermStats::new(&d, &a).unwrap();
        let positives = a.positive_sets();
        let ts = TaskSet {
            group: group(),
            tasks: vec![0, 1, 2],
            positive_counts: vec![8, 4, 2],
        };
        let ctx = RelatednessContext {
            hierarchy: Some((&d, &stats)),
            positives: &positives,
        };
        let tm = build_task_matrix(&ts, Measure::Diss0, &ctx).unwrap();
        // nu = 1, 1/2, 1/4; MA along a chain is the shallower term.
        // d(root, mid) = ln 2, d(root, leaf) = ln 4, d(mid, leaf) = ln 2.
        let ln2 = 2f64.ln();
        let raw = [
            [0.0, ln2, 2.0 * ln2],
            [ln2, 0.0, ln2],
            [2.0 * ln2, ln2, 0.0],
        ];
        for (k, row) in raw.iter().enumerate() {
            for (r, &d) in row.iter().enumerate() {
                assert_abs_diff_eq!(tm.get(k, r), d / (2.0 * ln2), epsilon = 1e-12);
            }
        }
        let sim1 = build_task_matrix(&ts, Measure::Sim1, &ctx).unwrap();
        assert_abs_diff_eq!(sim1.get(1, 2), 1.0 / (1.0 + ln2), epsilon = 1e-12);
        let sim2 = build_task_matrix(&ts, Measure::Sim2, &ctx).unwrap();
        // MA(mid, leaf) = mid: 2 ln(1/2) / (ln(1/2) + ln(1/4)) = 2/3
        assert_abs_diff_eq!(sim2.get(1, 2), 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(sim2.get(0, 1), 0.0);
    }

    #[test]
    fn diss0_all_identical_is_degenerate() {
        let (d, a) = chain_context();
        let stats = TermStats::new(&d, &a).unwrap();
        let positives = a.positive_sets();
        let ts = TaskSet {
            group: group(),
            tasks: vec![0, 0],
            positive_counts: vec![8, 8],
        };
        let ctx = RelatednessContext {
            hierarchy: Some((&d, &stats)),
            positives: &positives,
        };
        let err = build_task_matrix(&ts, Measure::Diss0, &ctx).unwrap_err();
        assert!(err.to_string().contains("degenerate dissimilarity"));
    }

    #[test]
    fn random_matrix_properties() {
        let a = random_task_matrix(100, 0.05, 0.5, 11).unwrap();
        let b = random_task_matrix(100, 0.05, 0.5, 11).unwrap();
        assert_eq!(a, b);
        let nonzero = (0..100)
            .flat_map(|k| (k + 1..100).map(move |r| (k, r)))
            .filter(|&(k, r)| a.get(k, r) > 0.0)
            .count();
        // binomial(4950, 0.05): mean 247.5, sd about 15.3
        assert!((247.5f64 - nonzero as f64).abs() < 5.0 * 15.3, "{nonzero}");
        assert!(a.entries().iter().all(|&v| (0.0..=0.5).contains(&v)));

        let full = random_task_matrix(20, 1.0, 1.0, 3).unwrap();
        for k in 0..20 {
            for r in 0..20 {
                if k != r {
                    assert!(full.get(k, r) > 0.0 && full.get(k, r) <= 1.0);
                }
            }
        }
        assert!(random_task_matrix(1, 0.5, 0.5, 0).is_err());
    }

    #[test]
    fn task_matrix_file_round_trip() {
        let tm = random_task_matrix(5, 0.7, 0.9, 4).unwrap();
        let mut buf = Vec::new();
        write_task_matrix(&mut buf, &tm).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("# kind=dissimilarity m=5\n"));
        let back = parse_task_matrix(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, tm);
    }

    #[test]
    fn task_matrix_validation() {
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.4, 0.0]);
        assert!(TaskMatrix::new(MatrixKind::Similarity, asym).is_err());
        let diag = DMatrix::from_row_slice(2, 2, &[0.1, 0.5, 0.5, 0.0]);
        assert!(TaskMatrix::new(MatrixKind::Similarity, diag).is_err());
        let big = DMatrix::from_row_slice(2, 2, &[0.0, 1.5, 1.5, 0.0]);
        assert!(TaskMatrix::new(MatrixKind::Similarity, big).is_err());
    }
}
