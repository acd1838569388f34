//! `mtlp`: command-line driver for label propagation experiments.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mtlp_core::config::{synthetic_spec, ExperimentConfig, PartialConfig, TaskMeasure};
use mtlp_core::cv::{write_scores, Method};
use mtlp_core::graph::{integrate_networks, normalize_symmetric, write_graph};
use mtlp_core::multitask::MapPower;
use mtlp_core::ontology::{
    read_annotations, select_tasks, true_path_closure, write_annotations, write_ontology_tsv,
    Grouping, Selection,
};
use mtlp_core::pipeline::{
    load_dataset, load_networks, read_ontology, run_on_dataset, task_matrix_for,
};
use mtlp_core::propagation::LabelMode;
use mtlp_core::relatedness::write_task_matrix;
use mtlp_core::seed::{stage_rng, Stage};
use mtlp_core::synth::generate_synthetic;
use rand::RngCore;

#[derive(Parser)]
#[command(
    name = "mtlp",
    version,
    about = "Single-task and multitask label propagation experiments"
)]
struct Cli {
    /// Worker threads (default: one per logical core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize and sum networks into one cached graph.
    Integrate {
        #[arg(long = "network", required = true)]
        networks: Vec<PathBuf>,
        /// Normalize the summed graph once more.
        #[arg(long)]
        renormalize: bool,
        #[arg(long)]
        output: PathBuf,
    },
    /// Compute task interaction matrices from annotations.
    Taskmat(TaskmatArgs),
    /// Write out-of-fold scores for every protein and task.
    Propagate(PropagateArgs),
    /// Cross-validate a method and write a metrics report.
    Cv(CvArgs),
    /// Generate a synthetic network, ontology and annotation set.
    Synth(SynthArgs),
    /// Summarize one or more metrics reports.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML file with experiment settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "network")]
    networks: Vec<PathBuf>,
    /// Graph written by `integrate`, used instead of raw networks.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    ontology: Option<PathBuf>,
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Use the synthetic generator with default parameters.
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    measure: Option<TaskMeasure>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    p: Option<MapPower>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grouping: Option<Grouping>,
    #[arg(long)]
    size_split: Option<usize>,
    #[arg(long)]
    min_pos: Option<usize>,
    #[arg(long)]
    max_pos: Option<usize>,
    #[arg(long)]
    label_mode: Option<LabelMode>,
    #[arg(long)]
    rw_steps: Option<usize>,
    #[arg(long)]
    knn_k: Option<usize>,
    /// Also report Fmax averaged over predicting proteins only.
    #[arg(long)]
    predicted_only_fmax: bool,
    /// Treat `part_of` relations in OBO files as parent links.
    #[arg(long)]
    part_of: bool,
    #[arg(long)]
    random_density: Option<f64>,
    #[arg(long)]
    random_tau: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    /// Normalize the integrated graph once more.
    #[arg(long)]
    renormalize: bool,
    /// Output file (`propagate`) or directory (`cv`).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PropagateArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Write 1 for scores above 0 and 0 otherwise instead of raw scores.
    #[arg(long)]
    binary: bool,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Run once per gamma in `start:end:step`.
    #[arg(long, conflicts_with = "p_sweep")]
    gamma_sweep: Option<String>,
    /// Run once per listed power, e.g. `1/2,1,2`.
    #[arg(long)]
    p_sweep: Option<String>,
    /// Also write the out-of-fold scores.
    #[arg(long)]
    write_scores: bool,
}

#[derive(Args)]
struct TaskmatArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    ontology: Option<PathBuf>,
    #[arg(long)]
    part_of: bool,
    #[arg(long)]
    measure: TaskMeasure,
    #[arg(long, default_value_t = 1)]
    min_pos: usize,
    #[arg(long, default_value_t = usize::MAX)]
    max_pos: usize,
    #[arg(long, default_value = "branch")]
    grouping: Grouping,
    #[arg(long, default_value_t = 20)]
    size_split: usize,
    /// Root seed; required for the random measure.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.5)]
    random_density: f64,
    #[arg(long, default_value_t = 0.5)]
    random_tau: f64,
    /// Output directory; one matrix and one term list per group.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    branching: Option<usize>,
    /// Comma-separated direct-annotation rates per depth.
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    #[arg(long)]
    intra_prob: Option<f64>,
    #[arg(long)]
    intra_weight: Option<f64>,
    #[arg(long)]
    background_prob: Option<f64>,
    #[arg(long)]
    background_weight: Option<f64>,
    #[arg(long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.workers {
        Some(0) => Err(anyhow::anyhow!("--workers must be at least 1")),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .context("building the worker pool")
            .and_then(|pool| pool.install(|| run(cli.command))),
        None => run(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Integrate {
            networks,
            renormalize,
            output,
        } => integrate(&networks, renormalize, &output),
        Command::Taskmat(args) => taskmat(args),
        Command::Propagate(args) => propagate(args),
        Command::Cv(args) => cv(args),
        Command::Synth(args) => synth(args),
        Command::Report { reports } => report(&reports),
    }
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(
    path: &Path,
    fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("writing {}", path.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        fill(&mut w).with_context(|| format!("writing {}", path.display()))?;
        w.flush()
            .with_context(|| format!("writing {}", path.display()))?;
    }
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn integrate(paths: &[PathBuf], renormalize: bool, output: &Path) -> Result<()> {
    let nc = load_networks(paths)?;
    let mut g = integrate_networks(&nc)?;
    if renormalize {
        g = normalize_symmetric(&g);
    }
    write_atomic(output, |w| write_graph(w, &g, &nc.union_vertices))?;
    println!(
        "integrated {} networks: {} vertices, {} edges -> {}",
        nc.networks.len(),
        g.n(),
        g.num_edges(),
        output.display()
    );
    Ok(())
}

fn taskmat(args: TaskmatArgs) -> Result<()> {
    let raw = read_annotations(&args.annotations)?;
    let ontology = args
        .ontology
        .as_deref()
        .map(|p| read_ontology(p, args.part_of))
        .transpose()?;
    let annotations = match &ontology {
        Some(d) => true_path_closure(&raw, d)?,
        None => raw,
    };
    let selection = Selection {
        min_pos: args.min_pos,
        max_pos: args.max_pos,
        grouping: args.grouping,
        size_split: args.size_split,
    };
    let sets = select_tasks(&annotations, ontology.as_ref(), &selection)?;
    if sets.is_empty() {
        bail!(
            "no term has between {} and {} positives",
            args.min_pos,
            args.max_pos
        );
    }
    let mut random = match (args.measure, args.seed) {
        (TaskMeasure::Random, None) => bail!("the random measure needs --seed"),
        (_, seed) => stage_rng(seed.unwrap_or(0), Stage::TaskMatrix),
    };
    for ts in &sets {
        let tm = task_matrix_for(
            ontology.as_ref(),
            &annotations,
            ts,
            args.measure,
            args.random_density,
            args.random_tau,
            random.next_u64(),
        )?;
        let name = ts.group.to_string();
        let matrix_path = args.output.join(format!("{name}.taskmat.tsv"));
        let terms_path = args.output.join(format!("{name}.terms.txt"));
        write_atomic(&matrix_path, |w| write_task_matrix(w, &tm))?;
        write_atomic(&terms_path, |w| {
            ts.tasks
                .iter()
                .try_for_each(|&k| writeln!(w, "{}", annotations.terms()[k]))
        })?;
        println!(
            "{name}: {} x {} {} matrix -> {}",
            tm.m(),
            tm.m(),
            args.measure,
            matrix_path.display()
        );
    }
    Ok(())
}

fn partial_config(args: &ExperimentArgs) -> Result<PartialConfig> {
    let file = match &args.config {
        Some(path) => PartialConfig::from_file(path)?,
        None => PartialConfig::default(),
    };
    let flags = PartialConfig {
        networks: (!args.networks.is_empty()).then(|| args.networks.clone()),
        graph: args.graph.clone(),
        ontology: args.ontology.clone(),
        annotations: args.annotations.clone(),
        synthetic: args.synthetic.then(toml::Table::new),
        method: args.method,
        measure: args.measure,
        gamma: args.gamma,
        p: args.p,
        folds: args.folds,
        seed: args.seed,
        grouping: args.grouping,
        size_split: args.size_split,
        min_pos: args.min_pos,
        max_pos: args.max_pos,
        label_mode: args.label_mode,
        output: args.output.clone(),
        rw_steps: args.rw_steps,
        knn_k: args.knn_k,
        predicted_only_fmax: args.predicted_only_fmax.then_some(true),
        part_of: args.part_of.then_some(true),
        random_density: args.random_density,
        random_tau: args.random_tau,
        rel_tol: args.rel_tol,
        renormalize: args.renormalize.then_some(true),
    };
    Ok(file.merge(flags))
}

fn propagate(args: PropagateArgs) -> Result<()> {
    let cfg = partial_config(&args.experiment)?.finalize()?;
    let output = cfg.output.clone().context("--output is required")?;
    let out = run_on_dataset(&cfg, load_dataset(&cfg.data, cfg.renormalize)?)?;
    let scores = if args.binary {
        out.cv
            .scores
            .iter()
            .map(|s| s.map(|v| if v > 0.0 { 1.0 } else { 0.0 }))
            .collect()
    } else {
        out.cv.scores.clone()
    };
    write_atomic(&output, |w| {
        write_scores(
            w,
            &out.dataset.proteins,
            &out.tasks.groups,
            &scores,
            &out.folds,
        )
    })?;
    let tasks: usize = out.tasks.groups.iter().map(|g| g.terms.len()).sum();
    println!(
        "{}: scored {} proteins x {} tasks -> {}",
        cfg.method.method,
        out.dataset.proteins.len(),
        tasks,
        output.display()
    );
    Ok(())
}

/// Parses `start:end:step` into the inclusive list of values.
fn parse_sweep(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("invalid sweep {text:?}"))?;
    let [start, end, step] = parts[..] else {
        bail!("sweep must have the form start:end:step, got {text:?}");
    };
    if !(step > 0.0 && start > 0.0 && end >= start) {
        bail!("sweep needs 0 < start <= end and a positive step, got {text:?}");
    }
    let count = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

fn cv(args: CvArgs) -> Result<()> {
    let cfg = partial_config(&args.experiment)?.finalize()?;
    let dir = cfg.output.clone().context("--output is required")?;
    let mut runs: Vec<(String, ExperimentConfig)> = Vec::new();
    if let Some(sweep) = &args.gamma_sweep {
        for g in parse_sweep(sweep)? {
            runs.push((
                format!("report_gamma_{g}"),
                ExperimentConfig {
                    gamma: g,
                    ..cfg.clone()
                },
            ));
        }
    } else if let Some(list) = &args.p_sweep {
        for p in list.split(',') {
            let power: MapPower = p.parse()?;
            let mut one = partial_config(&args.experiment)?;
            one.p = Some(power);
            runs.push((format!("report_p_{power}"), one.finalize()?));
        }
    } else {
        runs.push(("report".to_owned(), cfg.clone()));
    }

    let dataset = load_dataset(&cfg.data, cfg.renormalize)?;
    for (name, run_cfg) in &runs {
        let out = run_on_dataset(run_cfg, dataset.clone())?;
        let report = &out.cv.report;
        let json_path = dir.join(format!("{name}.json"));
        write_atomic(&json_path, |w| w.write_all(report.to_json().as_bytes()))?;
        write_atomic(&dir.join(format!("{name}.per_task.tsv")), |w| {
            report.write_per_task_tsv(w)
        })?;
        if args.write_scores {
            write_atomic(&dir.join(format!("{name}.scores.tsv")), |w| {
                write_scores(
                    w,
                    &out.dataset.proteins,
                    &out.tasks.groups,
                    &out.cv.scores,
                    &out.folds,
                )
            })?;
        }
        println!(
            "{} gamma={} p={}: mean AUPRC {} Fmax {} ({} tasks, {} skipped) -> {}",
            run_cfg.method.method,
            run_cfg.gamma,
            run_cfg.power,
            fmt_opt(report.groups.all),
            fmt_opt(report.fmax.map(|f| f.value)),
            report.per_task.len(),
            report.skipped.single_class + report.skipped.failed,
            json_path.display()
        );
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.4}"))
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut table = toml::Table::new();
    let mut set = |key: &str, v: Option<toml::Value>| {
        if let Some(v) = v {
            table.insert(key.to_owned(), v);
        }
    };
    let int = |v: Option<usize>| v.map(|x| toml::Value::Integer(x as i64));
    let float = |v: Option<f64>| v.map(toml::Value::Float);
    set("n", int(args.n));
    set("m", int(args.m));
    set("branching", int(args.branching));
    set(
        "rates",
        args.rates
            .map(|r| toml::Value::Array(r.into_iter().map(toml::Value::Float).collect())),
    );
    set("intra_prob", float(args.intra_prob));
    set("intra_weight", float(args.intra_weight));
    set("background_prob", float(args.background_prob));
    set("background_weight", float(args.background_weight));
    let spec = synthetic_spec(table, args.seed)?;
    let inst = generate_synthetic(&spec)?;
    let dir = &args.output;
    write_atomic(&dir.join("network.tsv"), |w| {
        write_graph(w, &inst.network.graph, &inst.network.vertices)
    })?;
    write_atomic(&dir.join("ontology.tsv"), |w| {
        write_ontology_tsv(w, &inst.ontology)
    })?;
    write_atomic(&dir.join("annotations.tsv"), |w| {
        write_annotations(w, &inst.annotations)
    })?;
    println!(
        "synthetic instance: {} proteins, {} edges, {} tasks -> {}",
        inst.network.vertices.len(),
        inst.network.graph.num_edges(),
        spec.m,
        dir.display()
    );
    Ok(())
}

fn report(paths: &[PathBuf]) -> Result<()> {
    println!(
        "report\tmethod\tmeasure\tgamma\tp\tall\tsmall\tlarge\tfmax\tthreshold\ttasks\tskipped"
    );
    for path in paths {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let v: serde_json::Value = serde_json::from_str(&text)
            .with_context(|| format!("{} is not a JSON report", path.display()))?;
        let num = |v: &serde_json::Value| {
            v.as_f64()
                .map_or_else(|| "n/a".to_owned(), |x| format!("{x:.4}"))
        };
        let text_of = |v: &serde_json::Value| match v {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Null => "-".to_owned(),
            other => other.to_string(),
        };
        let config = &v["manifest"]["config"];
        let skipped = v["skipped"]["single_class"].as_u64().unwrap_or(0)
            + v["skipped"]["failed"].as_u64().unwrap_or(0);
        let tasks = v["per_task"]
            .as_array()
            .with_context(|| format!("{} has no per-task results", path.display()))?
            .len();
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            path.display(),
            text_of(&config["method"]["method"]),
            text_of(&config["measure"]),
            text_of(&config["gamma"]),
            text_of(&config["p"]),
            num(&v["groups"]["all"]),
            num(&v["groups"]["small"]),
            num(&v["groups"]["large"]),
            num(&v["fmax"]["value"]),
            num(&v["fmax"]["threshold"]),
            tasks,
            skipped
        );
    }
    Ok(())
}
