use std::fs::File;
use std::path::Path;

use mtlp_core::config::PartialConfig;
use mtlp_core::graph::write_graph;
use mtlp_core::ontology::{write_annotations, write_ontology_tsv};
use mtlp_core::pipeline::{load_dataset, run_experiment, run_on_dataset};
use mtlp_core::synth::{generate_synthetic, SyntheticSpec};

fn finalize(text: &str, dir: &Path) -> mtlp_core::config::ExperimentConfig {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    PartialConfig::from_file(&path).unwrap().finalize().unwrap()
}

/// Writes the synthetic instance for `seed` with the default spec.
fn write_instance(dir: &Path, seed: u64) {
    let inst = generate_synthetic(&SyntheticSpec {
        seed,
        ..SyntheticSpec::default()
    })
    .unwrap();
    write_graph(
        File::create(dir.join("net.tsv")).unwrap(),
        &inst.network.graph,
        &inst.network.vertices,
    )
    .unwrap();
    write_ontology_tsv(File::create(dir.join("onto.tsv")).unwrap(), &inst.ontology).unwrap();
    write_annotations(
        File::create(dir.join("ann.tsv")).unwrap(),
        &inst.annotations,
    )
    .unwrap();
}

#[test]
fn files_reproduce_the_in_memory_run() {
    let dir = tempfile::tempdir().unwrap();
    write_instance(dir.path(), 4);
    for method in [
        "method = 'lp'",
        "method = 'mtlp'\nmeasure = 'diss0'",
        "method = 'mtlp-inv'\nmeasure = 'sim3'",
    ] {
        let synthetic = finalize(
            &format!("synthetic = {{}}\nseed = 4\n{method}\n"),
            dir.path(),
        );
        let files = finalize(
            &format!("networks = ['net.tsv']\nontology = 'onto.tsv'\nannotations = 'ann.tsv'\nseed = 4\n{method}\n"),
            dir.path(),
        );
        let a = run_experiment(&synthetic).unwrap().cv;
        let b = run_experiment(&files).unwrap().cv;
        assert_eq!(a.report.per_task, b.report.per_task);
        assert_eq!(a.report.fmax, b.report.fmax);
        assert_eq!(a.scores, b.scores);
    }
}

#[test]
fn reusing_a_loaded_dataset_changes_nothing() {
    let cfg = finalize(
        "synthetic = { n = 150, m = 6 }\nmethod = 'mtlp'\nmeasure = 'diss3'\nseed = 9\n",
        tempfile::tempdir().unwrap().path(),
    );
    let direct = run_experiment(&cfg).unwrap().cv.report.to_json();
    let ds = load_dataset(&cfg.data, cfg.renormalize).unwrap();
    let reused = run_on_dataset(&cfg, ds).unwrap().cv.report.to_json();
    assert_eq!(direct, reused);
}

#[test]
fn every_method_runs_on_synthetic_data() {
    for method in ["lp", "gba", "rw", "knn"] {
        let cfg = finalize(
            &format!("synthetic = {{ n = 120, m = 4 }}\nmethod = '{method}'\nseed = 2\n"),
            tempfile::tempdir().unwrap().path(),
        );
        let r = run_experiment(&cfg).unwrap().cv.report;
        assert!(r.groups.all.is_some(), "{method}");
        assert_eq!(r.skipped.failed, 0, "{method}");
    }
}
