//! Experiment configuration. A TOML file and command-line flags both fill a
//! [`PartialConfig`]; flags are merged over the file, and
//! [`PartialConfig::finalize`] applies defaults and checks consistency.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::cv::{EvalOptions, Method, MethodSpec};
use crate::error::{Error, Result};
use crate::multitask::MapPower;
use crate::ontology::{Grouping, Selection};
use crate::propagation::{LabelMode, SolverOptions};
use crate::relatedness::{MatrixKind, Measure};
use crate::synth::SyntheticSpec;

/// Source of the task interaction matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskMeasure {
    Measure(Measure),
    /// Random dissimilarities, for ablations.
    Random,
}

impl TaskMeasure {
    pub fn kind(self) -> MatrixKind {
        match self {
            TaskMeasure::Measure(m) => m.kind(),
            TaskMeasure::Random => MatrixKind::Dissimilarity,
        }
    }
}

impl fmt::Display for TaskMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskMeasure::Measure(m) => m.fmt(f),
            TaskMeasure::Random => f.write_str("random"),
        }
    }
}

impl FromStr for TaskMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(TaskMeasure::Random),
            other => other.parse().map(TaskMeasure::Measure),
        }
    }
}

impl Serialize for TaskMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

fn de_parsed<'de, D, T>(d: D) -> std::result::Result<Option<T>, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr,
    T::Err: fmt::Display,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Text(String),
        Number(f64),
    }
    let text = match Option::<Raw>::deserialize(d)? {
        None => return Ok(None),
        Some(Raw::Text(s)) => s,
        Some(Raw::Number(v)) => v.to_string(),
    };
    text.parse().map(Some).map_err(serde::de::Error::custom)
}

/// Every setting, all optional. Field names double as TOML keys.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub networks: Option<Vec<PathBuf>>,
    /// An integrated graph written by `integrate`, used as-is.
    pub graph: Option<PathBuf>,
    pub ontology: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    /// Generator parameters; the generator seed is the root seed.
    pub synthetic: Option<toml::Table>,
    #[serde(default, deserialize_with = "de_parsed")]
    pub method: Option<Method>,
    #[serde(default, deserialize_with = "de_parsed")]
    pub measure: Option<TaskMeasure>,
    pub gamma: Option<f64>,
    #[serde(default, deserialize_with = "de_parsed")]
    pub p: Option<MapPower>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default, deserialize_with = "de_parsed")]
    pub grouping: Option<Grouping>,
    pub size_split: Option<usize>,
    pub min_pos: Option<usize>,
    pub max_pos: Option<usize>,
    #[serde(default, deserialize_with = "de_parsed")]
    pub label_mode: Option<LabelMode>,
    pub output: Option<PathBuf>,
    pub rw_steps: Option<usize>,
    pub knn_k: Option<usize>,
    pub predicted_only_fmax: Option<bool>,
    pub part_of: Option<bool>,
    pub random_density: Option<f64>,
    pub random_tau: Option<f64>,
    pub rel_tol: Option<f64>,
    /// Normalize the integrated graph once more.
    pub renormalize: Option<bool>,
}

/// Where the network comes from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkInput {
    /// Raw networks, each normalized and then summed.
    Files(Vec<PathBuf>),
    /// A previously integrated graph.
    Cached(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    Files {
        network: NetworkInput,
        /// Without an ontology the annotations are taken as already closed.
        ontology: Option<PathBuf>,
        annotations: PathBuf,
        part_of: bool,
    },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub method: MethodSpec,
    /// `None` for single-task methods.
    pub measure: Option<TaskMeasure>,
    pub gamma: f64,
    #[serde(rename = "p")]
    pub power: MapPower,
    pub folds: usize,
    pub seed: u64,
    #[serde(serialize_with = "ser_selection")]
    pub selection: Selection,
    pub eval: EvalOptions,
    pub random_density: f64,
    pub random_tau: f64,
    pub renormalize: bool,
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

fn ser_selection<S: serde::Serializer>(
    sel: &Selection,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("Selection", 4)?;
    st.serialize_field("min_pos", &sel.min_pos)?;
    st.serialize_field("max_pos", &sel.max_pos)?;
    st.serialize_field("grouping", &sel.grouping.to_string())?;
    st.serialize_field("size_split", &sel.size_split)?;
    st.end()
}

const ALLOWED_POWERS: [MapPower; 6] = [
    MapPower::Half,
    MapPower::Integer(1),
    MapPower::Integer(2),
    MapPower::Integer(3),
    MapPower::Integer(4),
    MapPower::Integer(5),
];

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

impl PartialConfig {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| invalid(format!("{}: {}", path.display(), e.message())))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_owned(),
            source: e,
        })?;
        let mut cfg = Self::from_toml_str(&text, path)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    /// Makes relative file paths relative to `base`.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.networks.iter_mut().flatten().for_each(fix);
        for p in [
            &mut self.graph,
            &mut self.ontology,
            &mut self.annotations,
            &mut self.output,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Values set in `over` replace those in `self`.
    pub fn merge(self, over: PartialConfig) -> PartialConfig {
        macro_rules! pick {
            ($($f:ident),*) => { PartialConfig { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            networks,
            graph,
            ontology,
            annotations,
            synthetic,
            method,
            measure,
            gamma,
            p,
            folds,
            seed,
            grouping,
            size_split,
            min_pos,
            max_pos,
            label_mode,
            output,
            rw_steps,
            knn_k,
            predicted_only_fmax,
            part_of,
            random_density,
            random_tau,
            rel_tol,
            renormalize
        )
    }

    pub fn finalize(self) -> Result<ExperimentConfig> {
        let seed = self.seed.ok_or_else(|| invalid("a seed is required"))?;
        let data = self.data_source(seed)?;

        let method = self.method.ok_or_else(|| invalid("a method is required"))?;
        let mut spec = MethodSpec::new(method);
        if let Some(mode) = self.label_mode {
            spec.label_mode = mode;
        }
        if let Some(steps) = self.rw_steps {
            spec.rw_steps = steps;
        }
        if let Some(k) = self.knn_k {
            spec.knn_k = k;
        }
        if let Some(tol) = self.rel_tol {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(invalid(format!("rel_tol must lie in (0, 1), got {tol}")));
            }
            spec.solver = SolverOptions {
                rel_tol: tol,
                ..SolverOptions::default()
            };
        }
        if spec.rw_steps == 0 || spec.knn_k == 0 {
            return Err(invalid("rw_steps and knn_k must be at least 1"));
        }
        if matches!(
            data,
            DataSource::Files {
                network: NetworkInput::Cached(_),
                ..
            }
        ) && method == Method::Knn
        {
            return Err(invalid(
                "knn needs the individual networks; a cached graph is not enough",
            ));
        }

        let measure = match (method, self.measure) {
            (Method::Mtlp, Some(m)) if m.kind() != MatrixKind::Dissimilarity => {
                return Err(invalid(format!(
                    "mtlp needs a dissimilarity measure or random, got {m}"
                )));
            }
            (Method::MtlpInv, Some(m))
                if m.kind() != MatrixKind::Similarity || m == TaskMeasure::Random =>
            {
                return Err(invalid(format!(
                    "mtlp-inv needs a similarity measure, got {m}"
                )));
            }
            (Method::Mtlp | Method::MtlpInv, None) => {
                return Err(invalid(format!("method {method} needs a measure")));
            }
            (m, Some(measure)) if !m.is_multitask() => {
                log::warn!("measure {measure} is ignored by single-task method {m}");
                None
            }
            (_, measure) => measure,
        };
        if let (Some(TaskMeasure::Measure(m)), DataSource::Files { ontology: None, .. }) =
            (measure, &data)
        {
            if m.needs_hierarchy() {
                return Err(invalid(format!("measure {m} needs an ontology")));
            }
        }

        let gamma = self.gamma.unwrap_or(1.0);
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid(format!("gamma must be positive, got {gamma}")));
        }
        let power = self.p.unwrap_or_default();
        if !ALLOWED_POWERS.contains(&power) {
            return Err(invalid(format!(
                "p must be one of 1/2, 1, 2, 3, 4, 5; got {power}"
            )));
        }
        let folds = self.folds.unwrap_or(3);
        if folds < 2 {
            return Err(invalid(format!(
                "at least 2 folds are required, got {folds}"
            )));
        }
        let selection = Selection {
            min_pos: self.min_pos.unwrap_or(5),
            max_pos: self.max_pos.unwrap_or(100),
            grouping: self.grouping.unwrap_or(Grouping::ByBranch),
            size_split: self.size_split.unwrap_or(20),
        };
        if selection.min_pos == 0 || selection.min_pos > selection.max_pos {
            return Err(invalid(format!(
                "selection range {}..{} is empty",
                selection.min_pos, selection.max_pos
            )));
        }
        let renormalize = self.renormalize.unwrap_or(false);
        if renormalize
            && matches!(
                data,
                DataSource::Files {
                    network: NetworkInput::Cached(_),
                    ..
                }
            )
        {
            return Err(invalid(
                "a cached graph is used as-is; re-normalize when integrating",
            ));
        }
        let random_density = self.random_density.unwrap_or(0.5);
        let random_tau = self.random_tau.unwrap_or(0.5);
        for (name, v) in [
            ("random_density", random_density),
            ("random_tau", random_tau),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        Ok(ExperimentConfig {
            data,
            method: spec,
            measure,
            gamma,
            power,
            folds,
            seed,
            selection,
            eval: EvalOptions {
                size_split: selection.size_split,
                predicted_only_fmax: self.predicted_only_fmax.unwrap_or(false),
            },
            random_density,
            random_tau,
            renormalize,
            output: self.output,
        })
    }

    fn data_source(&self, seed: u64) -> Result<DataSource> {
        let file_inputs = self.networks.is_some() || self.graph.is_some();
        match (&self.synthetic, file_inputs) {
            (Some(_), true) => Err(invalid(
                "synthetic data cannot be combined with network files",
            )),
            (Some(table), false) => {
                if self.ontology.is_some() || self.annotations.is_some() {
                    return Err(invalid(
                        "synthetic data brings its own ontology and annotations",
                    ));
                }
                Ok(DataSource::Synthetic(synthetic_spec(table.clone(), seed)?))
            }
            (None, false) => Err(invalid(
                "no input: give networks, a cached graph or a synthetic spec",
            )),
            (None, true) => {
                let network = match (&self.networks, &self.graph) {
                    (Some(_), Some(_)) => {
                        return Err(invalid("give either networks or a cached graph, not both"))
                    }
                    (Some(paths), None) if paths.is_empty() => {
                        return Err(invalid("the network list is empty"))
                    }
                    (Some(paths), None) => NetworkInput::Files(paths.clone()),
                    (None, Some(path)) => NetworkInput::Cached(path.clone()),
                    (None, None) => unreachable!(),
                };
                let annotations = self
                    .annotations
                    .clone()
                    .ok_or_else(|| invalid("an annotation file is required"))?;
                Ok(DataSource::Files {
                    network,
                    ontology: self.ontology.clone(),
                    annotations,
                    part_of: self.part_of.unwrap_or(false),
                })
            }
        }
    }
}

/// Parses generator parameters, taking the seed from the root seed.
pub fn synthetic_spec(mut table: toml::Table, seed: u64) -> Result<SyntheticSpec> {
    if table.contains_key("seed") {
        return Err(invalid(
            "the synthetic generator takes its seed from the root seed",
        ));
    }
    let seed = i64::try_from(seed).map_err(|_| invalid("synthetic seeds must fit in 63 bits"))?;
    table.insert("seed".into(), toml::Value::Integer(seed));
    let spec: SyntheticSpec = table
        .try_into()
        .map_err(|e: toml::de::Error| invalid(format!("synthetic: {}", e.message())))?;
    spec.validate()?;
    Ok(spec)
}
