//! End-to-end experiment: load data, select and group tasks, build the
//! multitask maps, cross-validate and attach a run manifest.

use std::path::Path;

use rand::RngCore;
use serde_json::json;

use crate::config::{DataSource, ExperimentConfig, NetworkInput, TaskMeasure};
use crate::cv::{
    kfold_split, run_cross_validation, CvOutcome, FoldAssignment, GroupInput, ScoringInput,
};
use crate::error::{Error, Result};
use crate::graph::{
    integrate_networks, normalize_symmetric, read_network, NetworkCollection, SparseGraph,
};
use crate::multitask::{build_map, MultitaskMap};
use crate::ontology::{
    build_label_matrix, read_annotations, read_obo, read_ontology_tsv, select_tasks,
    true_path_closure, AnnotationTable, OntologyDag, TaskSet, TermStats,
};
use crate::relatedness::{build_task_matrix, random_task_matrix, RelatednessContext, TaskMatrix};
use crate::seed::{stage_rng, stage_seed, Stage, RNG_ALGORITHM};
use crate::synth::generate_synthetic;

/// How the kNN baseline combines networks, recorded in every manifest.
pub const KNN_COMBINATION: &str = "unweighted mean over networks (approximation)";

/// Network, ontology and annotations over one vertex universe.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// Graph vertex names; row `i` of every label matrix is `proteins[i]`.
    pub proteins: Vec<String>,
    pub graph: SparseGraph,
    /// The normalized member networks, when loaded from raw files.
    pub networks: Option<NetworkCollection>,
    pub ontology: Option<OntologyDag>,
    /// The whole annotation corpus, closed when an ontology is present.
    pub annotations: AnnotationTable,
}

pub fn read_ontology(path: &Path, part_of: bool) -> Result<OntologyDag> {
    let is_obo = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("obo"));
    if is_obo {
        read_obo(path, part_of)
    } else {
        read_ontology_tsv(path)
    }
}

/// Reads and normalizes each network and sums them over the union of vertices.
pub fn load_networks(paths: &[impl AsRef<Path>]) -> Result<NetworkCollection> {
    let networks = paths
        .iter()
        .map(|p| read_network(p.as_ref()).map(|n| n.normalized()))
        .collect::<Result<Vec<_>>>()?;
    Ok(NetworkCollection::new(networks))
}

/// Loads the configured data; with `renormalize` the integrated graph is
/// normalized again.
pub fn load_dataset(source: &DataSource, renormalize: bool) -> Result<Dataset> {
    let mut ds = load_raw(source)?;
    if renormalize {
        ds.graph = normalize_symmetric(&ds.graph);
    }
    Ok(ds)
}

fn load_raw(source: &DataSource) -> Result<Dataset> {
    match source {
        DataSource::Synthetic(spec) => {
            let inst = generate_synthetic(spec)?;
            let nc = NetworkCollection::new(vec![inst.network.normalized()]);
            Ok(Dataset {
                proteins: nc.union_vertices.clone(),
                graph: integrate_networks(&nc)?,
                networks: Some(nc),
                ontology: Some(inst.ontology),
                annotations: inst.annotations,
            })
        }
        DataSource::Files {
            network,
            ontology,
            annotations,
            part_of,
        } => {
            let (proteins, graph, networks) = match network {
                NetworkInput::Files(paths) => {
                    let nc = load_networks(paths)?;
                    (
                        nc.union_vertices.clone(),
                        integrate_networks(&nc)?,
                        Some(nc),
                    )
                }
                NetworkInput::Cached(path) => {
                    let net = read_network(path)?;
                    (net.vertices, net.graph, None)
                }
            };
            let raw = read_annotations(annotations)?;
            let (ontology, annotations) = match ontology {
                Some(path) => {
                    let dag = read_ontology(path, *part_of)?;
                    let closed = true_path_closure(&raw, &dag)?;
                    (Some(dag), closed)
                }
                None => (None, raw),
            };
            Ok(Dataset {
                proteins,
                graph,
                networks,
                ontology,
                annotations,
            })
        }
    }
}

/// Selected tasks with their labels over the dataset universe.
#[derive(Debug, Clone)]
pub struct PreparedTasks {
    pub sets: Vec<TaskSet>,
    pub groups: Vec<GroupInput>,
    pub matrices: Vec<Option<TaskMatrix>>,
}

/// Builds the task matrix of `ts` for `measure`. Statistics and positive
/// sets come from `annotations`, the whole corpus; `random_seed` feeds the
/// random measure.
pub fn task_matrix_for(
    ontology: Option<&OntologyDag>,
    annotations: &AnnotationTable,
    ts: &TaskSet,
    measure: TaskMeasure,
    density: f64,
    tau: f64,
    random_seed: u64,
) -> Result<TaskMatrix> {
    match measure {
        TaskMeasure::Random if ts.len() < 2 => Ok(TaskMatrix::zeros(measure.kind(), ts.len())),
        TaskMeasure::Random => random_task_matrix(ts.len(), density, tau, random_seed),
        TaskMeasure::Measure(m) => {
            let stats = match (ontology, m.needs_hierarchy()) {
                (Some(d), true) => Some(TermStats::new(d, annotations)?),
                _ => None,
            };
            let positives = annotations.positive_sets();
            let ctx = RelatednessContext {
                hierarchy: ontology.zip(stats.as_ref()),
                positives: &positives,
            };
            build_task_matrix(ts, m, &ctx)
        }
    }
}

/// Selects tasks on the annotations of universe proteins and builds one
/// [`GroupInput`] per group, with a multitask map for multitask methods.
pub fn prepare_tasks(ds: &Dataset, cfg: &ExperimentConfig) -> Result<PreparedTasks> {
    let restricted = ds.annotations.restrict_to(&ds.proteins);
    let sets = select_tasks(&restricted, ds.ontology.as_ref(), &cfg.selection)?;
    if sets.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no term has between {} and {} positives among the network proteins",
            cfg.selection.min_pos, cfg.selection.max_pos
        )));
    }
    let mut random = stage_rng(cfg.seed, Stage::TaskMatrix);
    let mut groups = Vec::with_capacity(sets.len());
    let mut matrices = Vec::with_capacity(sets.len());
    for ts in &sets {
        let (tm, map) = match cfg.measure.filter(|_| cfg.method.method.is_multitask()) {
            Some(measure) => {
                let tm = task_matrix_for(
                    ds.ontology.as_ref(),
                    &ds.annotations,
                    ts,
                    measure,
                    cfg.random_density,
                    cfg.random_tau,
                    random.next_u64(),
                )?;
                let map: MultitaskMap = build_map(&tm, cfg.gamma, cfg.power)?;
                (Some(tm), Some(map))
            }
            None => (None, None),
        };
        groups.push(GroupInput {
            name: ts.group.to_string(),
            terms: ts
                .tasks
                .iter()
                .map(|&k| restricted.terms()[k].clone())
                .collect(),
            labels: build_label_matrix(&restricted, ts, &ds.proteins),
            map,
        });
        matrices.push(tm);
    }
    Ok(PreparedTasks {
        sets,
        groups,
        matrices,
    })
}

pub fn fold_assignment(ds: &Dataset, cfg: &ExperimentConfig) -> Result<FoldAssignment> {
    kfold_split(
        ds.proteins.len(),
        cfg.folds,
        stage_seed(cfg.seed, Stage::Folds),
    )
}

/// Everything needed to re-run the experiment. Worker counts, output
/// locations and wall-clock times are left out so that reports compare
/// byte for byte.
pub fn manifest(cfg: &ExperimentConfig, ds: &Dataset, tasks: &PreparedTasks) -> serde_json::Value {
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "rng": RNG_ALGORITHM,
        "config": cfg,
        "knn_combination": KNN_COMBINATION,
        "proteins": ds.proteins.len(),
        "edges": ds.graph.num_edges(),
        "groups": tasks.groups.iter().map(|g| json!({"name": g.name, "tasks": g.terms.len()})).collect::<Vec<_>>(),
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub dataset: Dataset,
    pub tasks: PreparedTasks,
    pub folds: FoldAssignment,
    pub cv: CvOutcome,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let ds = load_dataset(&cfg.data, cfg.renormalize)?;
    run_on_dataset(cfg, ds)
}

/// Like [`run_experiment`] with the data already loaded, for sweeps.
pub fn run_on_dataset(cfg: &ExperimentConfig, ds: Dataset) -> Result<ExperimentOutcome> {
    let tasks = prepare_tasks(&ds, cfg)?;
    let folds = fold_assignment(&ds, cfg)?;
    let input = ScoringInput {
        graph: &ds.graph,
        networks: ds.networks.as_ref(),
    };
    let mut cv = run_cross_validation(&input, &tasks.groups, &folds, &cfg.method, &cfg.eval)?;
    cv.report.manifest = manifest(cfg, &ds, &tasks);
    Ok(ExperimentOutcome {
        dataset: ds,
        tasks,
        folds,
        cv,
    })
}
