//! Synthetic instances with a planted task hierarchy: a breadth-first task
//! tree, sparse protein memberships that respect the true-path rule, and a
//! network in which co-members of a leaf task are wired more densely and
//! more strongly than the background.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Network;
use crate::ontology::{true_path_closure, AnnotationTable, Branch, OntologyDag};
use crate::seed::{stage_rng, Stage};

const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Number of proteins.
    pub n: usize,
    /// Number of non-root terms (tasks).
    pub m: usize,
    /// Children per internal node of the task tree.
    pub branching: usize,
    /// Direct-annotation probability per depth, starting at depth 1. The last
    /// entry applies to all deeper levels.
    pub rates: Vec<f64>,
    /// Edge probability and weight between two members of the same leaf task.
    pub intra_prob: f64,
    pub intra_weight: f64,
    /// Edge probability and weight between any two proteins.
    pub background_prob: f64,
    pub background_weight: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 300,
            m: 12,
            branching: 3,
            rates: vec![0.1, 0.05],
            intra_prob: 0.3,
            intra_weight: 1.0,
            background_prob: 0.02,
            background_weight: 0.5,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidInput(format!("synthetic spec: {msg}")));
        if self.n < 2 || self.m == 0 || self.branching == 0 {
            return fail("n >= 2, m >= 1 and branching >= 1 are required".into());
        }
        if self.rates.is_empty() {
            return fail("at least one positive rate is required".into());
        }
        if self.rates.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return fail("positive rates must lie in (0, 1]".into());
        }
        if self.rates.windows(2).any(|w| w[1] > w[0]) {
            return fail("positive rates must not increase with depth".into());
        }
        if self.rates.iter().any(|&r| r * (self.n as f64) < 1.0) {
            return fail(
                "every rate must yield at least one positive per task in expectation".into(),
            );
        }
        for (name, p) in [
            ("intra_prob", self.intra_prob),
            ("background_prob", self.background_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} must lie in [0, 1]"));
            }
        }
        for (name, w) in [
            ("intra_weight", self.intra_weight),
            ("background_weight", self.background_weight),
        ] {
            if !(w.is_finite() && w > 0.0) {
                return fail(format!("{name} must be positive"));
            }
        }
        Ok(())
    }

    fn rate(&self, depth: usize) -> f64 {
        self.rates[(depth - 1).min(self.rates.len() - 1)]
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    /// Proteins without any edge are not part of the network.
    pub network: Network,
    pub ontology: OntologyDag,
    /// Closed under the true-path rule.
    pub annotations: AnnotationTable,
}

fn pad(prefix: &str, i: usize, count: usize) -> String {
    let width = count.saturating_sub(1).to_string().len().max(4);
    format!("{prefix}{i:0width$}")
}

/// Node `j >= 1` of the task tree has parent `(j - 1) / branching`.
fn tree_parent(j: usize, branching: usize) -> usize {
    (j - 1) / branching
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticInstance> {
    spec.validate()?;
    let (n, m) = (spec.n, spec.m);
    let nodes = m + 1;
    let mut depth = vec![0usize; nodes];
    let mut has_child = vec![false; nodes];
    for j in 1..nodes {
        let p = tree_parent(j, spec.branching);
        depth[j] = depth[p] + 1;
        has_child[p] = true;
    }
    let term_names: Vec<String> = (0..nodes).map(|j| pad("T:", j, nodes)).collect();
    let edges: Vec<(String, String)> = (1..nodes)
        .map(|j| {
            (
                term_names[j].clone(),
                term_names[tree_parent(j, spec.branching)].clone(),
            )
        })
        .collect();
    let ontology = OntologyDag::new(
        term_names.iter().map(|t| (t.clone(), Branch::BP)).collect(),
        &edges,
    )?;
    let proteins: Vec<String> = (0..n).map(|i| pad("P", i, n)).collect();

    let mut rng = stage_rng(spec.seed, Stage::Synthetic);
    // direct[j] lists the proteins annotated directly to node j.
    let mut direct: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for (j, members) in direct.iter_mut().enumerate().skip(1) {
        let rate = spec.rate(depth[j]);
        *members = (0..n).filter(|_| rng.gen::<f64>() < rate).collect();
    }
    // A node is empty only if its whole subtree is; nodes are visited
    // deepest first so that a redrawn child counts for its parent.
    for j in (1..nodes).rev() {
        let mut attempts = 0;
        while subtree_empty(j, &direct, spec.branching, nodes) {
            if attempts == MAX_ATTEMPTS {
                return Err(Error::Degenerate(format!(
                    "task {} has no positives after {MAX_ATTEMPTS} attempts",
                    term_names[j]
                )));
            }
            let rate = spec.rate(depth[j]);
            direct[j] = (0..n).filter(|_| rng.gen::<f64>() < rate).collect();
            attempts += 1;
        }
    }

    let mut pairs: Vec<(&str, &str)> = Vec::new();
    for (j, members) in direct.iter().enumerate() {
        for &i in members {
            pairs.push((&proteins[i], &term_names[j]));
        }
    }
    let annotations = true_path_closure(&AnnotationTable::from_pairs(pairs), &ontology)?;

    // Pairs drawn more than once (shared leaves, background) sum their weights.
    let mut graph_edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for j in (1..nodes).filter(|&j| !has_child[j]) {
        let members = &direct[j];
        for (a, &u) in members.iter().enumerate() {
            for &v in &members[a + 1..] {
                if rng.gen::<f64>() < spec.intra_prob {
                    *graph_edges.entry((u, v)).or_default() += spec.intra_weight;
                }
            }
        }
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen::<f64>() < spec.background_prob {
                *graph_edges.entry((u, v)).or_default() += spec.background_weight;
            }
        }
    }
    let network = Network::from_named_edges(
        "synthetic",
        graph_edges
            .iter()
            .map(|(&(u, v), &w)| (proteins[u].as_str(), proteins[v].as_str(), w)),
    )?;
    Ok(SyntheticInstance {
        network,
        ontology,
        annotations,
    })
}

fn subtree_empty(j: usize, direct: &[Vec<usize>], branching: usize, nodes: usize) -> bool {
    if !direct[j].is_empty() {
        return false;
    }
    let first = j * branching + 1;
    (first..(first + branching).min(nodes)).all(|c| subtree_empty(c, direct, branching, nodes))
}
