//! Weighted undirected functional networks in compressed sparse row layout.
//!
//! Every undirected edge is stored twice (once per endpoint) so that row
//! scans see the full neighbourhood. Self-loops are dropped on construction
//! and duplicate edges are summed.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use log::{info, warn};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    degrees: Vec<f64>,
}

impl SparseGraph {
    /// Builds a graph over `n` vertices from undirected weighted edges.
    ///
    /// `(i, j, w)` and `(j, i, w)` describe the same edge; repeated edges are
    /// summed. Self-loops are discarded. Weights must be finite and positive.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut self_loops = 0usize;
        let mut duplicates = 0usize;
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({i}, {j}) out of range for {n} vertices"
                )));
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "edge ({i}, {j}) has non-positive weight {w}"
                )));
            }
            if i == j {
                self_loops += 1;
                continue;
            }
            let key = (i.min(j), i.max(j));
            match merged.get_mut(&key) {
                Some(acc) => {
                    *acc += w;
                    duplicates += 1;
                }
                None => {
                    merged.insert(key, w);
                }
            }
        }
        if self_loops > 0 {
            info!("dropped {self_loops} self-loop(s)");
        }
        if duplicates > 0 {
            warn!("summed {duplicates} duplicate edge(s)");
        }
        Ok(Self::from_merged(n, &merged))
    }

    fn from_merged(n: usize, merged: &BTreeMap<(usize, usize), f64>) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(i, j), &w) in merged {
            rows[i].push((j, w));
            rows[j].push((i, w));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::with_capacity(2 * merged.len());
        let mut weights = Vec::with_capacity(2 * merged.len());
        offsets.push(0);
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
            for &(j, w) in row.iter() {
                targets.push(j);
                weights.push(w);
            }
            offsets.push(targets.len());
        }
        let degrees = (0..n)
            .map(|i| weights[offsets[i]..offsets[i + 1]].iter().sum())
            .collect();
        SparseGraph {
            offsets,
            targets,
            weights,
            degrees,
        }
    }

    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let range = self.offsets[i]..self.offsets[i + 1];
        match self.targets[range.clone()].binary_search(&j) {
            Ok(pos) => self.weights[range.start + pos],
            Err(_) => 0.0,
        }
    }

    /// Undirected edges as `(i, j, w)` with `i < j`, in row order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |i| {
            self.neighbors(i)
                .filter(move |&(j, _)| j > i)
                .map(move |(j, w)| (i, j, w))
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n(), self.n());
        for i in 0..self.n() {
            for (j, w) in self.neighbors(i) {
                m[(i, j)] = w;
            }
        }
        m
    }

    /// Connected component id per vertex, numbered in order of first vertex.
    pub fn components(&self) -> Vec<usize> {
        let n = self.n();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for (u, _) in self.neighbors(v) {
                    if comp[u] == usize::MAX {
                        comp[u] = next;
                        stack.push(u);
                    }
                }
            }
            next += 1;
        }
        comp
    }
}

/// Symmetric degree normalization `w_ij / sqrt(d_i d_j)`.
///
/// Zero-degree vertices have no incident edges, so their rows stay empty.
pub fn normalize_symmetric(g: &SparseGraph) -> SparseGraph {
    let mut weights = g.weights.clone();
    for i in 0..g.n() {
        let row = g.offsets[i]..g.offsets[i + 1];
        for (w, &j) in weights[row.clone()].iter_mut().zip(&g.targets[row]) {
            *w /= (g.degrees[i] * g.degrees[j]).sqrt();
        }
    }
    let degrees = (0..g.n())
        .map(|i| weights[g.offsets[i]..g.offsets[i + 1]].iter().sum())
        .collect();
    SparseGraph {
        offsets: g.offsets.clone(),
        targets: g.targets.clone(),
        weights,
        degrees,
    }
}

/// `(1/4) sum_{i<j} w_ij (f_i - f_j)^2`, the weighted cutsize for `f` in {-1,+1}^n.
pub fn laplacian_quadratic(g: &SparseGraph, f: &[f64]) -> Result<f64> {
    if f.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: f.len(),
        });
    }
    let total: f64 = g
        .edges()
        .map(|(i, j, w)| {
            let diff = f[i] - f[j];
            w * diff * diff
        })
        .sum();
    Ok(total / 4.0)
}

/// A named network whose vertex indices follow lexicographic name order.
#[derive(Debug, Clone)]
pub struct Network {
    pub name: String,
    pub graph: SparseGraph,
    pub vertices: Vec<String>,
    index: HashMap<String, usize>,
}

impl Network {
    pub fn from_named_edges<I, S>(name: impl Into<String>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S, f64)>,
        S: AsRef<str>,
    {
        let edges: Vec<(S, S, f64)> = edges.into_iter().collect();
        let names: BTreeSet<&str> = edges
            .iter()
            .flat_map(|(a, b, _)| [a.as_ref(), b.as_ref()])
            .collect();
        let vertices: Vec<String> = names.into_iter().map(str::to_owned).collect();
        let index: HashMap<String, usize> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        let graph = SparseGraph::from_edges(
            vertices.len(),
            edges
                .iter()
                .map(|(a, b, w)| (index[a.as_ref()], index[b.as_ref()], *w)),
        )?;
        Ok(Network {
            name: name.into(),
            graph,
            vertices,
            index,
        })
    }

    /// Wraps an existing graph; `vertices` must be sorted and distinct.
    pub fn new(name: impl Into<String>, graph: SparseGraph, vertices: Vec<String>) -> Result<Self> {
        if vertices.len() != graph.n() {
            return Err(Error::DimensionMismatch {
                expected: graph.n(),
                found: vertices.len(),
            });
        }
        if vertices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "network vertex names must be sorted and distinct".into(),
            ));
        }
        let index = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        Ok(Network {
            name: name.into(),
            graph,
            vertices,
            index,
        })
    }

    pub fn index_of(&self, vertex: &str) -> Option<usize> {
        self.index.get(vertex).copied()
    }

    pub fn normalized(&self) -> Network {
        Network {
            name: self.name.clone(),
            graph: normalize_symmetric(&self.graph),
            vertices: self.vertices.clone(),
            index: self.index.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NetworkCollection {
    pub networks: Vec<Network>,
    pub union_vertices: Vec<String>,
    union_index: HashMap<String, usize>,
}

impl NetworkCollection {
    pub fn new(networks: Vec<Network>) -> Self {
        let union: BTreeSet<&String> = networks.iter().flat_map(|n| &n.vertices).collect();
        let union_vertices: Vec<String> = union.into_iter().cloned().collect();
        let union_index = union_vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        NetworkCollection {
            networks,
            union_vertices,
            union_index,
        }
    }

    pub fn union_index_of(&self, vertex: &str) -> Option<usize> {
        self.union_index.get(vertex).copied()
    }

    /// Maps each network's local vertex index to its union index.
    pub fn local_to_union(&self) -> Vec<Vec<usize>> {
        self.networks
            .iter()
            .map(|net| {
                net.vertices
                    .iter()
                    .map(|v| self.union_index[v.as_str()])
                    .collect()
            })
            .collect()
    }
}

/// Unweighted sum of the member networks over the union of their vertices.
///
/// Contributions to each edge are summed in ascending order, so the result
/// does not depend on the order of the collection.
pub fn integrate_networks(c: &NetworkCollection) -> Result<SparseGraph> {
    if c.networks.is_empty() {
        return Err(Error::InvalidInput("no networks".into()));
    }
    let maps = c.local_to_union();
    let mut contributions: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for (net, map) in c.networks.iter().zip(&maps) {
        for (i, j, w) in net.graph.edges() {
            let (a, b) = (map[i], map[j]);
            contributions
                .entry((a.min(b), a.max(b)))
                .or_default()
                .push(w);
        }
    }
    let merged: BTreeMap<(usize, usize), f64> = contributions
        .into_iter()
        .map(|(key, mut ws)| {
            ws.sort_by(f64::total_cmp);
            (key, ws.iter().sum())
        })
        .collect();
    Ok(SparseGraph::from_merged(c.union_vertices.len(), &merged))
}

/// Reads a `source<TAB>target<TAB>weight` network file.
pub fn read_network(path: &Path) -> Result<Network> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    parse_network(std::io::BufReader::new(file), path, name)
}

pub fn parse_network<R: BufRead>(reader: R, path: &Path, name: String) -> Result<Network> {
    let mut edges: Vec<(String, String, f64)> = Vec::new();
    let mut seen_data = false;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::parse(
                path,
                lineno,
                "expected three tab-separated columns",
            ));
        }
        let weight = match fields[2].trim().parse::<f64>() {
            Ok(w) => w,
            Err(_) if !seen_data => {
                // header row
                seen_data = true;
                continue;
            }
            Err(_) => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("weight {:?} is not a number", fields[2]),
                ))
            }
        };
        seen_data = true;
        if !weight.is_finite() || weight <= 0.0 {
            return Err(Error::parse(
                path,
                lineno,
                format!("edge weight must be positive, got {weight}"),
            ));
        }
        edges.push((fields[0].to_owned(), fields[1].to_owned(), weight));
    }
    Network::from_named_edges(name, edges)
}

/// Writes each undirected edge once, `i < j`, with shortest round-trip floats.
pub fn write_graph<W: Write>(mut w: W, g: &SparseGraph, names: &[String]) -> std::io::Result<()> {
    writeln!(w, "source\ttarget\tweight")?;
    for (i, j, weight) in g.edges() {
        writeln!(w, "{}\t{}\t{}", names[i], names[j], weight)?;
    }
    Ok(())
}
