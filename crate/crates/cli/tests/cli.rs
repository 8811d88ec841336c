//! End-to-end checks of the command-line surface: verbs, artifacts and the
//! documented exit codes (0 success, 1 usage, 2 data, 3 training).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mld(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mld"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_synth_spec(dir: &Path, overlap: f64) -> PathBuf {
    let path = dir.join("synth.json");
    let spec = serde_json::json!({
        "n_categories": 3,
        "samples_per_category": 60,
        "grid_resolution": 1000000,
        "overlap_matrix": [
            [1.0, overlap, overlap],
            [overlap, 1.0, overlap],
            [overlap, overlap, 1.0]
        ],
        "dim": 4,
        "seed": 9
    });
    std::fs::write(&path, serde_json::to_string_pretty(&spec).unwrap()).unwrap();
    path
}

fn write_run_config(dir: &Path, seed: u64) -> PathBuf {
    let path = dir.join(format!("run_{seed}.json"));
    let cfg = serde_json::json!({
        "dataset": {
            "kind": "synth",
            "n_categories": 3,
            "samples_per_category": 60,
            "grid_resolution": 64,
            "overlap_matrix": [
                [1.0, 0.1, 0.1],
                [0.1, 1.0, 0.1],
                [0.1, 0.1, 1.0]
            ],
            "dim": 4,
            "seed": 33
        },
        "test_fraction": 0.2,
        "folds": null,
        "scaling": { "pca_dim": null },
        "pretrain": "none",
        "augment": null,
        "encoder_widths": [4, 16, 8],
        "ae_train": { "learning_rate": 1e-3, "batch_size": 32, "epochs": 2, "seed": 0 },
        "finetune": {
            "train": { "learning_rate": 1e-3, "batch_size": 32, "epochs": 4, "seed": 0 },
            "multiplicity_weighted": false
        },
        "seed": seed
    });
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn synth_then_analyze_reports_unit_lcard_on_separable_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_synth_spec(dir.path(), 0.0);
    let out = mld(
        &["synth", "--config", spec.to_str().unwrap(), "--out", "corpus.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = mld(
        &[
            "analyze",
            "--input",
            "corpus.csv",
            "--schema",
            "synth-raw",
            "--top-k",
            "3",
            "--out",
            "overlap.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("overlap.json")).unwrap())
            .unwrap();
    assert_eq!(report["lcard"], 1.0);
    assert_eq!(report["ldiv"], 3);
    assert_eq!(report["groups"].as_array().unwrap().len(), 3);
}

#[test]
fn missing_input_file_exits_with_data_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = mld(
        &["analyze", "--input", "nope.csv", "--schema", "synth-raw"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
}

#[test]
fn unknown_strategy_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_run_config(dir.path(), 1);
    let out = mld(
        &[
            "baseline",
            "--config",
            cfg.to_str().unwrap(),
            "--strategy",
            "xyz",
            "--out",
            "b",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("xyz"));
}

#[test]
fn unknown_flag_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = mld(&["run", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_twice_reproduces_the_report_and_compare_aligns_methods() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_run_config(dir.path(), 5);
    for out_dir in ["a", "b"] {
        let out = mld(
            &["run", "--config", cfg.to_str().unwrap(), "--out", out_dir],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let report_a = std::fs::read_to_string(dir.path().join("a/report.json")).unwrap();
    let report_b = std::fs::read_to_string(dir.path().join("b/report.json")).unwrap();
    let a: serde_json::Value = serde_json::from_str(&report_a).unwrap();
    let b: serde_json::Value = serde_json::from_str(&report_b).unwrap();
    // Identical config and seed reproduce everything but the timings.
    assert_eq!(a["folds"], b["folds"]);
    assert_eq!(a["mean"], b["mean"]);
    assert_eq!(a["config_digest"], b["config_digest"]);
    for artifact in [
        "classifier.json",
        "encoder.ckpt",
        "head.ckpt",
        "codec.json",
        "scalers.json",
        "finetune_log.json",
        "manifest.json",
    ] {
        assert!(
            dir.path().join("a/fold_0").join(artifact).exists(),
            "missing bundle artifact {artifact}"
        );
    }

    // A baseline on the same corpus compares cleanly against the run.
    let out = mld(
        &[
            "baseline",
            "--config",
            cfg.to_str().unwrap(),
            "--strategy",
            "ml-knn",
            "--k",
            "5",
            "--out",
            "knn",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = mld(
        &[
            "compare",
            "a/report.json",
            "knn/report.json",
            "--out",
            "table",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("ml-knn(k=5)"));
    assert!(table.contains("mld(no-pretrain)"));
    assert!(dir.path().join("table.txt").exists());
    assert!(dir.path().join("table.json").exists());
}

#[test]
fn compare_rejects_reports_from_different_corpora() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_a = write_run_config(dir.path(), 1);
    // A different synth seed is a different dataset.
    let cfg_b_path = dir.path().join("other.json");
    let mut cfg_b: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&cfg_a).unwrap()).unwrap();
    cfg_b["dataset"]["seed"] = serde_json::json!(77);
    std::fs::write(&cfg_b_path, serde_json::to_string_pretty(&cfg_b).unwrap()).unwrap();
    for (cfg, out_dir) in [(&cfg_a, "a"), (&cfg_b_path, "b")] {
        let out = mld(
            &["run", "--config", cfg.to_str().unwrap(), "--out", out_dir],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let out = mld(&["compare", "a/report.json", "b/report.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("different datasets"));
}

#[test]
fn shipped_configs_parse_and_match_the_presets() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let desk = mld_core::experiment::RunConfig::load(&root.join("synth-desk.json")).unwrap();
    let spec = mld_core::dataset::SynthSpec::uniform_overlap(5, 400, 64, 0.1, 6, 42);
    assert_eq!(desk, mld_core::experiment::RunConfig::synth_desk(spec.clone()));
    let ablation =
        mld_core::experiment::RunConfig::load(&root.join("synth-ablation.json")).unwrap();
    assert_eq!(ablation, mld_core::experiment::RunConfig::synth_ablation(spec));
    let synth_spec: mld_core::dataset::SynthSpec =
        serde_json::from_str(&std::fs::read_to_string(root.join("synth-spec.json")).unwrap())
            .unwrap();
    synth_spec.validate().unwrap();
    for name in ["unsw.json", "andmal.json"] {
        mld_core::experiment::RunConfig::load(&root.join(name)).unwrap();
    }
}

#[test]
fn pretrain_writes_a_loadable_encoder_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("pre.json");
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(write_run_config(dir.path(), 2)).unwrap())
            .unwrap();
    cfg["pretrain"] = serde_json::json!("raw");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let out = mld(
        &["pretrain", "--config", cfg_path.to_str().unwrap(), "--out", "pre"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ckpt = mld_core::nn::load_checkpoint(&dir.path().join("pre/encoder.ckpt")).unwrap();
    assert_eq!(ckpt.spec.layer_widths, vec![4, 16, 8]);
    assert!(dir.path().join("pre/pretrain_log.json").exists());
}
