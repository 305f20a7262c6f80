use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn eareeg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eareeg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Three short subjects, a tiny network and a few epochs.
fn small_config() -> Value {
    json!({
        "seed": 7,
        "synth": { "n_subjects": 3, "duration_s": 24.0 },
        "augment": { "target_multiplier": 2.0 },
        "model": { "hidden_dims": [16, 8], "max_epochs": 4, "early_stop_patience": 2 },
        "split": { "min_per_class": 2 },
        "ablation": { "hidden_dims": [[16, 8], [8]] }
    })
}

fn write_config(dir: &Path, value: &Value) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn help_lists_global_flags_for_every_subcommand() {
    for sub in ["synth", "preprocess", "extract", "augment", "train", "eval", "ablate", "pipeline"] {
        let o = eareeg(&[sub, "--help"]);
        assert!(o.status.success(), "{sub} --help failed");
        let text = String::from_utf8_lossy(&o.stdout);
        for flag in ["--config", "--seed", "--out", "--fs", "--threads", "--verbose"] {
            assert!(text.contains(flag), "{sub} --help is missing {flag}");
        }
    }
}

#[test]
fn pipeline_and_ablate_require_config() {
    for sub in ["pipeline", "ablate"] {
        let o = eareeg(&[sub]);
        assert_eq!(o.status.code(), Some(2), "{sub}: {}", stderr(&o));
        assert!(stderr(&o).contains("--config"));
    }
}

#[test]
fn bad_split_ratios_exit_2_naming_splitspec() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    cfg["split"]["ratios"] = json!([0.7, 0.2, 0.2]);
    let path = write_config(dir.path(), &cfg);
    let o = eareeg(&["pipeline", "--config", &path]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("SplitSpec"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    cfg["model"]["hiden_dims"] = json!([4]);
    let path = write_config(dir.path(), &cfg);
    let o = eareeg(&["pipeline", "--config", &path]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn empty_ablation_list_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    cfg["ablation"]["hidden_dims"] = json!([]);
    let path = write_config(dir.path(), &cfg);
    let o = eareeg(&["ablate", "--config", &path]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn missing_recording_is_a_data_or_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = eareeg(&["extract", "--input", "/nonexistent/x.earg", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert_ne!(o.status.code(), Some(2));
}

#[test]
fn synth_is_deterministic_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = eareeg(&["synth", "--n-subjects", "2", "--duration", "5", "--seed", "3", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["subject_00.earg", "subject_01.earg", "manifest.json"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between runs");
    }
    let manifest: Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["files"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["master_seed"], 3);

    let one = dir.path().join("one");
    let o = eareeg(&["synth", "--n-subjects", "1", "--duration", "3", "--out", one.to_str().unwrap()]);
    assert!(o.status.success());
    let earg = std::fs::read_dir(&one)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "earg"))
        .count();
    assert_eq!(earg, 1);
}

#[test]
fn pipeline_writes_artifacts_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &small_config());
    let mut reports = Vec::new();
    for run in ["r1", "r2"] {
        let out = dir.path().join(run);
        let o = eareeg(&["pipeline", "--config", &path, "--out", out.to_str().unwrap(), "--threads", "2"]);
        assert!(o.status.success(), "{}", stderr(&o));
        for name in ["model.json", "report.json", "history.csv", "standardizer.json", "summary.json"] {
            assert!(out.join(name).exists(), "{run}: missing {name}");
        }
        reports.push(std::fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let report: Value = serde_json::from_slice(&reports[0]).unwrap();
    let acc = report["overall_accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    // a different seed moves the split
    let out = dir.path().join("r3");
    let o = eareeg(&["pipeline", "--config", &path, "--seed", "8", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let s1: Value = serde_json::from_slice(&std::fs::read(dir.path().join("r1/summary.json")).unwrap()).unwrap();
    let s3: Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_ne!(s1["split_hash"], s3["split_hash"]);
}

#[test]
fn staged_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config());
    let d = |s: &str| dir.path().join(s).to_str().unwrap().to_owned();

    let o = eareeg(&["synth", "--config", &cfg, "--out", &d("raw")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let inputs = [d("raw/subject_00.earg"), d("raw/subject_01.earg"), d("raw/subject_02.earg")];
    let stage = |cmd: &str, out: &str| {
        let mut args = vec![cmd, "--config", &cfg, "--out", out, "--input"];
        args.extend(inputs.iter().map(String::as_str));
        eareeg(&args)
    };

    let o = stage("preprocess", &d("clean"));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("clean/clean_subject_02.earg").exists());

    let o = stage("extract", &d("feat"));
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("feat/features.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("f000,") && header.contains("f271,label_0"));
    assert_eq!(csv.lines().count(), 1 + 3 * 23);

    let o = stage("augment", &d("aug"));
    assert!(o.status.success(), "{}", stderr(&o));

    let o = eareeg(&[
        "train",
        "--config",
        &cfg,
        "--out",
        &d("model"),
        "--train",
        &d("aug/train.csv"),
        "--validation",
        &d("aug/validation.csv"),
        "--class-weights",
        &d("aug/class_weights.json"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let o = eareeg(&[
        "eval",
        "--out",
        &d("eval"),
        "--model",
        &d("model/model.json"),
        "--standardizer",
        &d("model/standardizer.json"),
        "--test",
        &d("aug/test.csv"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("eval/report.json")).unwrap()).unwrap();
    assert_eq!(report["confusion"].as_array().unwrap().len(), 3);
}

#[test]
fn ablate_writes_one_row_per_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &small_config());
    let out = dir.path().join("abl");
    let o = eareeg(&["ablate", "--config", &path, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("ablation.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "config,accuracy");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("16-8,") && lines[2].starts_with("8,"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("split"));
}
