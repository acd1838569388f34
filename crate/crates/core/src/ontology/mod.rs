//! Ontology DAG, protein annotations, term statistics and task selection.

mod io;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabelMatrix;

pub use io::{
    parse_annotations, parse_obo, parse_ontology_tsv, read_annotations, read_obo,
    read_ontology_tsv, write_annotations, write_ontology_tsv,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    BP,
    MF,
    CC,
}

impl Branch {
    pub const ALL: [Branch; 3] = [Branch::BP, Branch::MF, Branch::CC];

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::BP => "BP",
            Branch::MF => "MF",
            Branch::CC => "CC",
        })
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bp" | "p" | "biological_process" => Ok(Branch::BP),
            "mf" | "f" | "molecular_function" => Ok(Branch::MF),
            "cc" | "c" | "cellular_component" => Ok(Branch::CC),
            other => Err(Error::InvalidInput(format!(
                "unknown ontology branch {other:?}"
            ))),
        }
    }
}

/// Terms with their direct parents and branch tags. Acyclic by construction.
#[derive(Debug, Clone)]
pub struct OntologyDag {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    branch: Vec<Branch>,
    /// Non-reflexive ancestor sets, sorted.
    ancestors: Vec<Vec<usize>>,
}

impl OntologyDag {
    /// `terms` lists each term once with its branch; `edges` are `(child, parent)` pairs.
    pub fn new<S: AsRef<str>>(terms: Vec<(String, Branch)>, edges: &[(S, S)]) -> Result<Self> {
        let mut index = HashMap::with_capacity(terms.len());
        let mut names = Vec::with_capacity(terms.len());
        let mut branch = Vec::with_capacity(terms.len());
        for (name, b) in terms {
            if index.insert(name.clone(), names.len()).is_some() {
                return Err(Error::InvalidInput(format!("term {name} listed twice")));
            }
            names.push(name);
            branch.push(b);
        }
        let mut parents: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); names.len()];
        for (child, parent) in edges {
            let c = *index
                .get(child.as_ref())
                .ok_or_else(|| Error::UnknownTerm(child.as_ref().to_owned()))?;
            let p = *index
                .get(parent.as_ref())
                .ok_or_else(|| Error::UnknownTerm(parent.as_ref().to_owned()))?;
            if c == p {
                return Err(Error::Cycle(names[c].clone()));
            }
            if branch[c] != branch[p] {
                return Err(Error::InvalidInput(format!(
                    "term {} ({}) has parent {} in a different branch ({})",
                    names[c], branch[c], names[p], branch[p]
                )));
            }
            parents[c].insert(p);
        }
        let parents: Vec<Vec<usize>> = parents
            .into_iter()
            .map(|s| s.into_iter().collect())
            .collect();
        let ancestors = ancestor_sets(&names, &parents)?;
        Ok(OntologyDag {
            terms: names,
            index,
            parents,
            branch,
            ancestors,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, k: usize) -> &str {
        &self.terms[k]
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn parents(&self, k: usize) -> &[usize] {
        &self.parents[k]
    }

    pub fn branch(&self, k: usize) -> Branch {
        self.branch[k]
    }

    /// Strict ancestors of `k` (excluding `k`), ascending.
    pub fn ancestors(&self, k: usize) -> &[usize] {
        &self.ancestors[k]
    }

    /// Ancestors of `k` including `k` itself, ascending.
    pub fn ancestors_reflexive(&self, k: usize) -> Vec<usize> {
        let anc = &self.ancestors[k];
        let pos = anc.partition_point(|&a| a < k);
        let mut out = Vec::with_capacity(anc.len() + 1);
        out.extend_from_slice(&anc[..pos]);
        out.push(k);
        out.extend_from_slice(&anc[pos..]);
        out
    }
}

fn ancestor_sets(names: &[String], parents: &[Vec<usize>]) -> Result<Vec<Vec<usize>>> {
    let n = names.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut pending: Vec<usize> = parents.iter().map(Vec::len).collect();
    for (c, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(c);
        }
    }
    let mut queue: Vec<usize> = (0..n).filter(|&k| pending[k] == 0).collect();
    let mut ancestors: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut done = 0;
    while let Some(k) = queue.pop() {
        done += 1;
        let mut set = BTreeSet::new();
        for &p in &parents[k] {
            set.insert(p);
            set.extend(ancestors[p].iter().copied());
        }
        ancestors[k] = set.into_iter().collect();
        for &c in &children[k] {
            pending[c] -= 1;
            if pending[c] == 0 {
                queue.push(c);
            }
        }
    }
    if done < n {
        let stuck = (0..n).find(|&k| pending[k] > 0).unwrap();
        return Err(Error::Cycle(names[stuck].clone()));
    }
    Ok(ancestors)
}

/// Protein-to-term assignments. Term indices refer to `terms`; after
/// closure the vocabulary is the ontology's term list.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationTable {
    proteins: Vec<String>,
    terms: Vec<String>,
    by_protein: Vec<Vec<usize>>,
    closed: bool,
}

impl AnnotationTable {
    /// Builds a table from `(protein, term)` pairs. Proteins and terms are
    /// indexed in lexicographic order; duplicate pairs collapse.
    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let pairs: Vec<(S, S)> = pairs.into_iter().collect();
        let proteins: Vec<String> = pairs
            .iter()
            .map(|(p, _)| p.as_ref())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(str::to_owned)
            .collect();
        let terms: Vec<String> = pairs
            .iter()
            .map(|(_, t)| t.as_ref())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(str::to_owned)
            .collect();
        let p_index: HashMap<&str, usize> = proteins
            .iter()
            .enumerate()
            .map(|(i, p)| (p.as_str(), i))
            .collect();
        let t_index: HashMap<&str, usize> = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); proteins.len()];
        for (p, t) in &pairs {
            sets[p_index[p.as_ref()]].insert(t_index[t.as_ref()]);
        }
        let by_protein = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        AnnotationTable {
            proteins,
            terms,
            by_protein,
            closed: false,
        }
    }

    pub fn proteins(&self) -> &[String] {
        &self.proteins
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Term indices assigned to protein `i`, ascending.
    pub fn terms_of(&self, i: usize) -> &[usize] {
        &self.by_protein[i]
    }

    pub fn len(&self) -> usize {
        self.by_protein.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, i: usize, k: usize) -> bool {
        self.by_protein[i].binary_search(&k).is_ok()
    }

    /// Positive protein indices per term, each ascending.
    pub fn positive_sets(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![Vec::new(); self.terms.len()];
        for (i, ts) in self.by_protein.iter().enumerate() {
            for &k in ts {
                sets[k].push(i);
            }
        }
        sets
    }

    pub fn positive_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.terms.len()];
        for ts in &self.by_protein {
            for &k in ts {
                counts[k] += 1;
            }
        }
        counts
    }

    /// Keeps only proteins in `universe`, re-indexed to the universe's order
    /// of appearance; proteins without any remaining annotation are dropped.
    pub fn restrict_to(&self, universe: &[String]) -> AnnotationTable {
        let index: HashMap<&str, usize> = self
            .proteins
            .iter()
            .enumerate()
            .map(|(i, p)| (p.as_str(), i))
            .collect();
        let mut proteins = Vec::new();
        let mut by_protein = Vec::new();
        let mut kept = 0usize;
        for name in universe {
            if let Some(&i) = index.get(name.as_str()) {
                kept += 1;
                if !self.by_protein[i].is_empty() {
                    proteins.push(name.clone());
                    by_protein.push(self.by_protein[i].clone());
                }
            }
        }
        let dropped = self.proteins.len() - kept;
        if dropped > 0 {
            info!("dropped {dropped} annotated protein(s) absent from the network");
        }
        AnnotationTable {
            proteins,
            terms: self.terms.clone(),
            by_protein,
            closed: self.closed,
        }
    }
}

/// Propagates every annotation to all ancestors of its term.
pub fn true_path_closure(a: &AnnotationTable, d: &OntologyDag) -> Result<AnnotationTable> {
    let mapping: Vec<usize> = a
        .terms
        .iter()
        .map(|t| d.index_of(t).ok_or_else(|| Error::UnknownTerm(t.clone())))
        .collect::<Result<_>>()?;
    let by_protein = a
        .by_protein
        .iter()
        .map(|ts| {
            let mut set = BTreeSet::new();
            for &t in ts {
                let k = mapping[t];
                set.insert(k);
                set.extend(d.ancestors(k).iter().copied());
            }
            set.into_iter().collect()
        })
        .collect();
    Ok(AnnotationTable {
        proteins: a.proteins.clone(),
        terms: d.terms().to_vec(),
        by_protein,
        closed: true,
    })
}

/// Per-term positive counts and frequencies over a closed annotation corpus.
///
/// The frequency of a term is its positive count divided by the number of
/// proteins holding at least one annotation in the term's branch.
#[derive(Debug, Clone)]
pub struct TermStats {
    counts: Vec<usize>,
    branch_totals: [usize; 3],
    branch: Vec<Branch>,
}

impl TermStats {
    pub fn new(d: &OntologyDag, a: &AnnotationTable) -> Result<Self> {
        if !a.is_closed() || a.terms().len() != d.len() {
            return Err(Error::InvalidInput(
                "term statistics need an annotation table closed over this ontology".into(),
            ));
        }
        let mut branch_totals = [0usize; 3];
        for ts in &a.by_protein {
            let mut seen = [false; 3];
            for &k in ts {
                seen[d.branch(k).slot()] = true;
            }
            for (total, s) in branch_totals.iter_mut().zip(seen) {
                *total += s as usize;
            }
        }
        Ok(TermStats {
            counts: a.positive_counts(),
            branch_totals,
            branch: (0..d.len()).map(|k| d.branch(k)).collect(),
        })
    }

    pub fn count(&self, k: usize) -> usize {
        self.counts[k]
    }

    /// Frequency of positives for term `k`, in (0, 1].
    pub fn frequency(&self, k: usize) -> Result<f64> {
        let total = self.branch_totals[self.branch[k].slot()];
        if self.counts[k] == 0 || total == 0 {
            return Err(Error::Degenerate(format!(
                "undefined information content: term {k} has no positive annotations"
            )));
        }
        Ok(self.counts[k] as f64 / total as f64)
    }

    /// The common ancestor of `k` and `r` (reflexive) with the lowest
    /// frequency; ties go to the smallest term index.
    pub fn min_frequency_common_ancestor(
        &self,
        d: &OntologyDag,
        k: usize,
        r: usize,
    ) -> Result<usize> {
        let ak = d.ancestors_reflexive(k);
        let ar = d.ancestors_reflexive(r);
        let mut best: Option<(usize, usize)> = None;
        let (mut i, mut j) = (0, 0);
        while i < ak.len() && j < ar.len() {
            match ak[i].cmp(&ar[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    let t = ak[i];
                    // Same branch, so comparing counts orders frequencies.
                    if best.is_none_or(|(_, c)| self.counts[t] < c) {
                        best = Some((t, self.counts[t]));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        best.map(|(t, _)| t).ok_or_else(|| {
            Error::Degenerate(format!(
                "disjoint hierarchy roots: {} and {} share no ancestor",
                d.term(k),
                d.term(r)
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grouping {
    ByBranch,
    ByBranchAndSize,
}

impl FromStr for Grouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "branch" | "by-branch" => Ok(Grouping::ByBranch),
            "branch-size" | "by-branch-and-size" => Ok(Grouping::ByBranchAndSize),
            other => Err(Error::InvalidInput(format!("unknown grouping {other:?}"))),
        }
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Grouping::ByBranch => "branch",
            Grouping::ByBranchAndSize => "branch-size",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeBin {
    Small,
    Large,
}

impl SizeBin {
    pub fn of(n_pos: usize, size_split: usize) -> SizeBin {
        if n_pos <= size_split {
            SizeBin::Small
        } else {
            SizeBin::Large
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskGroup {
    pub branch: Option<Branch>,
    pub bin: Option<SizeBin>,
}

impl fmt::Display for TaskGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.branch {
            Some(b) => write!(f, "{b}")?,
            None => f.write_str("all")?,
        }
        match self.bin {
            Some(SizeBin::Small) => f.write_str("_small"),
            Some(SizeBin::Large) => f.write_str("_large"),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSet {
    pub group: TaskGroup,
    /// Term indices into the annotation table's vocabulary, ascending.
    pub tasks: Vec<usize>,
    pub positive_counts: Vec<usize>,
}

impl TaskSet {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub min_pos: usize,
    pub max_pos: usize,
    pub grouping: Grouping,
    pub size_split: usize,
}

impl Default for Selection {
    fn default() -> Self {
        Selection {
            min_pos: 5,
            max_pos: 100,
            grouping: Grouping::ByBranch,
            size_split: 20,
        }
    }
}

/// Selects terms whose positive count lies in `[min_pos, max_pos]` and
/// groups them. Without an ontology every task falls in one branch-less group.
pub fn select_tasks(
    a: &AnnotationTable,
    d: Option<&OntologyDag>,
    sel: &Selection,
) -> Result<Vec<TaskSet>> {
    if sel.min_pos == 0 || sel.min_pos > sel.max_pos {
        return Err(Error::InvalidInput(format!(
            "invalid selection range {}..{}",
            sel.min_pos, sel.max_pos
        )));
    }
    if let Some(d) = d {
        if a.terms().len() != d.len() {
            return Err(Error::InvalidInput(
                "annotation table is not aligned with the ontology; apply closure first".into(),
            ));
        }
    }
    let counts = a.positive_counts();
    let mut groups: std::collections::BTreeMap<TaskGroup, TaskSet> = Default::default();
    for (k, &c) in counts.iter().enumerate() {
        if c < sel.min_pos || c > sel.max_pos {
            continue;
        }
        let group = TaskGroup {
            branch: d.map(|d| d.branch(k)),
            bin: match sel.grouping {
                Grouping::ByBranch => None,
                Grouping::ByBranchAndSize => Some(SizeBin::of(c, sel.size_split)),
            },
        };
        let set = groups.entry(group).or_insert_with(|| TaskSet {
            group,
            tasks: Vec::new(),
            positive_counts: Vec::new(),
        });
        set.tasks.push(k);
        set.positive_counts.push(c);
    }
    if groups.is_empty() {
        warn!(
            "no term has between {} and {} positives; task selection is empty",
            sel.min_pos, sel.max_pos
        );
    }
    Ok(groups.into_values().collect())
}

/// `Y_ik = +1` iff protein `universe[i]` is annotated with task `k`'s term.
pub fn build_label_matrix(a: &AnnotationTable, ts: &TaskSet, universe: &[String]) -> LabelMatrix {
    let index: HashMap<&str, usize> = a
        .proteins
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i))
        .collect();
    let column: HashMap<usize, usize> = ts.tasks.iter().enumerate().map(|(c, &k)| (k, c)).collect();
    let mut positives = Vec::new();
    for (i, name) in universe.iter().enumerate() {
        if let Some(&row) = index.get(name.as_str()) {
            for k in a.terms_of(row) {
                if let Some(&c) = column.get(k) {
                    positives.push((i, c));
                }
            }
        }
    }
    LabelMatrix::from_positives(universe.len(), ts.len(), positives)
}
