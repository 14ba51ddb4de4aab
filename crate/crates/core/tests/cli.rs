use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_split-forge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env("RUST_LOG", "off").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn synth(dir: &Path, extra: &str) -> PathBuf {
    let cfg = dir.join("synth.json");
    std::fs::write(
        &cfg,
        format!(r#"{{"out": "data", "synth": {{"n_concepts": 120, "n_supercats": 6 {extra}}}}}"#),
    )
    .unwrap();
    let o = run(&["synth", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir.join("data")
}

fn run_config(dir: &Path, strategy: &str, out: &str) -> PathBuf {
    let cfg = dir.join(format!("{out}.json"));
    std::fs::write(
        &cfg,
        format!(
            r#"{{
  "embeddings": "data/embeddings.csv",
  "attributes": "data/attributes.csv",
  "supercategories": "data/supercategories.csv",
  "features_label": "synthetic",
  "strategy": "{strategy}",
  "k": 6,
  "seed": 3,
  "out": "{out}"
}}"#
        ),
    )
    .unwrap();
    cfg
}

#[test]
fn split_probe_report_round_trip() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), "");
    let mut summaries = Vec::new();
    for strategy in ["random", "clustering", "supercategory", "similarity"] {
        let cfg = run_config(tmp.path(), strategy, strategy);
        let cfg = cfg.to_str().unwrap();
        let o = run(&["split", "--config", cfg]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("coverage="));
        let out = tmp.path().join(strategy);
        for f in [
            "grouping.json",
            "splits.jsonl",
            "rejected.json",
            "diagnostics.json",
            "split_manifest.json",
        ] {
            assert!(out.join(f).exists(), "{strategy}: missing {f}");
        }
        let first: Value = serde_json::from_str(
            std::fs::read_to_string(out.join("splits.jsonl"))
                .unwrap()
                .lines()
                .next()
                .unwrap(),
        )
        .unwrap();
        for key in [
            "attribute",
            "feasible",
            "train_ratio",
            "pos_rate_train",
            "pos_rate_test",
            "train_ids",
        ] {
            assert!(first.get(key).is_some(), "split record lacks {key}");
        }

        let o = run(&["probe", "--config", cfg]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let summary: Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["strategy"], strategy);
        let results = std::fs::read_to_string(out.join("results.jsonl")).unwrap();
        assert_eq!(results.lines().count() as u64, summary["n_feasible"].as_u64().unwrap());
        summaries.push(out.join("summary.json"));
    }

    let mut args = vec!["report", "--out"];
    let report_dir = tmp.path().join("report");
    args.push(report_dir.to_str().unwrap());
    args.push("--results");
    args.extend(summaries.iter().map(|p| p.to_str().unwrap()));
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(report_dir.join("table1.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "features,random,similarity,clustering,supercategory"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "synthetic");
    for cell in &row[1..] {
        let decimals = cell.split('.').nth(1).unwrap();
        assert_eq!(decimals.len(), 1, "one decimal expected in {cell}");
    }
    assert!(lines.next().unwrap().starts_with("CS mean ± std,"));
    assert!(report_dir.join("cs_table.csv").exists());
    let scatter = std::fs::read_to_string(report_dir.join("scatter_synthetic_random.csv")).unwrap();
    let random: Value = serde_json::from_str(&std::fs::read_to_string(&summaries[0]).unwrap()).unwrap();
    assert_eq!(
        scatter.lines().count() as u64 - 1,
        random["n_feasible"].as_u64().unwrap()
    );
}

#[test]
fn cli_flags_override_config() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), "");
    let cfg = run_config(tmp.path(), "clustering", "base");
    let other = tmp.path().join("override");
    let o = run(&[
        "split",
        "--config",
        cfg.to_str().unwrap(),
        "--strategy",
        "random",
        "--seed",
        "9",
        "--out",
        other.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let g: Value = serde_json::from_str(&std::fs::read_to_string(other.join("grouping.json")).unwrap()).unwrap();
    assert_eq!(g["strategy"], "random");
}

#[test]
fn usage_and_config_errors_exit_1() {
    assert_eq!(code(&run(&["split", "--bogus"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);

    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, r#"{"strategy": "random", "unknown_key": 1}"#).unwrap();
    let o = run(&["split", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown_key"));

    std::fs::write(&cfg, r#"{"constraints": {"ratio_window": [0.9, 0.5]}}"#).unwrap();
    assert_eq!(code(&run(&["split", "--config", cfg.to_str().unwrap()])), 1);
}

#[test]
fn data_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let data = synth(tmp.path(), "");
    let cfg = run_config(tmp.path(), "random", "out");
    let text = std::fs::read_to_string(data.join("embeddings.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[3] = lines[3].rsplit_once(',').unwrap().0.to_string();
    std::fs::write(data.join("embeddings.csv"), lines.join("\n")).unwrap();
    let o = run(&["split", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("inconsistent dimension"));

    std::fs::remove_file(data.join("embeddings.csv")).unwrap();
    assert_eq!(code(&run(&["split", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn nothing_feasible_exits_3() {
    let tmp = TempDir::new().unwrap();
    // only taxonomic attributes: each is confined to one supercategory
    synth(tmp.path(), r#", "n_transversal_attrs": 0"#);
    let cfg = run_config(tmp.path(), "supercategory", "out");
    let o = run(&["split", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let rejected: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/rejected.json")).unwrap()).unwrap();
    assert_eq!(rejected.as_array().unwrap().len(), 10);
}

#[test]
fn ablate_k_writes_rows() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), "");
    let cfg = run_config(tmp.path(), "clustering", "ablate");
    let o = run(&["ablate-k", "--config", cfg.to_str().unwrap(), "--ks", "2,6,120"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("ablate/ablate_k.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[2].starts_with("6,1,"));
    assert!(rows[3].starts_with("120,0,120,"));

    let o = run(&["ablate-k", "--config", cfg.to_str().unwrap(), "--ks", "500"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn probe_rejects_split_from_other_dataset() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), "");
    let cfg = run_config(tmp.path(), "random", "first");
    assert_eq!(code(&run(&["split", "--config", cfg.to_str().unwrap()])), 0);

    let other = TempDir::new().unwrap();
    synth(other.path(), r#", "seed": 99"#);
    let other_cfg = run_config(other.path(), "random", "second");
    let splits = tmp.path().join("first/splits.jsonl");
    let o = run(&[
        "probe",
        "--config",
        other_cfg.to_str().unwrap(),
        "--splits",
        splits.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}
