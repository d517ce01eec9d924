use std::path::Path;
use std::process::{Command, Output};

use kanfoil::cli::{ComparisonReport, PruneSummary, RunConfig, SymbolifySummary};
use kanfoil::symbolic::FormulaNode;

mod common;

fn kanfoil(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kanfoil"))
        .args(args)
        .env_remove("KANFOIL_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = kanfoil(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn prep(dir: &Path, csv: &Path, name: &str) -> std::path::PathBuf {
    let out = dir.join(name);
    ok(&[
        "prep",
        "--input",
        p(csv),
        "--out",
        p(&out),
        "--column",
        "aoa=alpha",
    ]);
    out
}

#[test]
fn prep_and_kan_training_are_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("lift.csv");
    common::write_surrogate_csv(&csv, 400, 20, 1);
    let mut models = Vec::new();
    for run in ["a", "b"] {
        let data = prep(dir.path(), &csv, &format!("prep_{run}"));
        let out = dir.path().join(format!("kan_{run}"));
        ok(&[
            "train",
            "--model",
            "kan",
            "--data",
            p(&data),
            "--out",
            p(&out),
            "--steps",
            "40",
            "--seed",
            "2024",
        ]);
        models.push(std::fs::read(out.join("model.json")).unwrap());
        let cfg: RunConfig = read(&out.join("run.json"));
        assert_eq!(cfg.seed, 2024);
    }
    assert_eq!(models[0], models[1]);
    let a = std::fs::read(dir.path().join("prep_a/train.csv")).unwrap();
    assert_eq!(
        a,
        std::fs::read(dir.path().join("prep_b/train.csv")).unwrap()
    );
}

#[test]
fn exit_codes_distinguish_usage_from_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = kanfoil(&[
        "prep",
        "--input",
        "/nonexistent/lift.csv",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("MissingFile"));
    let bad_model = kanfoil(&["train", "--model", "forest", "--data", ".", "--out", "."]);
    assert_eq!(bad_model.status.code(), Some(2));
    assert_eq!(kanfoil(&["nonsense"]).status.code(), Some(2));
}

#[test]
fn config_file_env_and_flags_layer_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("lift.csv");
    common::write_surrogate_csv(&csv, 100, 0, 2);
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 5, "split": {"train_fraction": 0.5}}"#).unwrap();
    let run = |name: &str, env: Option<&str>, flag: Option<&str>| {
        let out = dir.path().join(name);
        let mut args = vec![
            "--config",
            p(&cfg),
            "prep",
            "--input",
            p(&csv),
            "--out",
            p(&out),
            "--column",
            "aoa=alpha",
        ];
        if let Some(f) = flag {
            args.extend(["--seed", f]);
        }
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_kanfoil"));
        cmd.args(&args).env_remove("KANFOIL_SEED");
        if let Some(e) = env {
            cmd.env("KANFOIL_SEED", e);
        }
        assert!(cmd.output().unwrap().status.success());
        read::<RunConfig>(&out.join("run.json"))
    };
    let file_only = run("f", None, None);
    assert_eq!((file_only.seed, file_only.split.train_fraction), (5, 0.5));
    assert_eq!(run("e", Some("6"), None).seed, 6);
    let flagged = run("g", Some("6"), Some("7"));
    assert_eq!((flagged.seed, flagged.split.seed), (7, 7));
}

#[test]
fn formula_eval_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let f = common::lift_formula();
    let path = dir.path().join("formula.json");
    std::fs::write(&path, f.to_json()).unwrap();
    let x = [0.2, 0.15, 0.1, 0.25, -0.1, -0.05, -0.2, 0.0, 3.0];
    let at = serde_json::to_string(&common::bind(&x)).unwrap();
    let printed: f64 = ok(&["formula", "eval", "--file", p(&path), "--at", &at])
        .trim()
        .parse()
        .unwrap();
    assert_eq!(printed, f.eval(&common::bind(&x)).unwrap());
    let text = ok(&["formula", "render", "--file", p(&path)]);
    assert!(text.starts_with("0.69 - 2.42 * sin("));
    let back = FormulaNode::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, f);
}

#[test]
fn full_pipeline_on_surrogate_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let csv = d.join("lift.csv");
    common::write_surrogate_csv(&csv, 1200, 100, 3);
    let data = prep(d, &csv, "prep");
    let sidecar: serde_json::Value = read(&data.join("prep.json"));
    assert_eq!(sidecar["rows_loaded"], 1300);
    assert_eq!(sidecar["rows_after_dedup"], 1200);
    assert_eq!(sidecar["rows_train"], 900);

    let kan = d.join("kan");
    ok(&[
        "train",
        "--model",
        "kan",
        "--data",
        p(&data),
        "--out",
        p(&kan),
        "--steps",
        "1000",
    ]);
    let mlp = d.join("mlp");
    ok(&[
        "train",
        "--model",
        "mlp",
        "--data",
        p(&data),
        "--out",
        p(&mlp),
        "--epochs",
        "40",
    ]);
    let lr = d.join("lr");
    ok(&[
        "train",
        "--model",
        "lr",
        "--data",
        p(&data),
        "--out",
        p(&lr),
    ]);
    let kan_metrics: serde_json::Value = read(&kan.join("metrics.json"));
    let kan_r2 = kan_metrics["test"]["r2"].as_f64().unwrap();
    assert!(kan_r2 > 0.95, "kan test r2 {kan_r2}");

    let eval = ok(&[
        "evaluate",
        "--model",
        p(&kan.join("model.json")),
        "--data",
        p(&csv),
        "--column",
        "aoa=alpha",
    ]);
    assert!(eval.contains("\"r2\""));

    let pruned = d.join("pruned");
    ok(&[
        "prune",
        "--model",
        p(&kan.join("model.json")),
        "--data",
        p(&data),
        "--out",
        p(&pruned),
        "--percentile",
        "75",
    ]);
    let summary: PruneSummary = read(&pruned.join("prune.json"));
    assert!(summary.surviving_edges < summary.edges_before);
    assert!(
        summary.after.test.r2 > 0.95,
        "pruned test r2 {}",
        summary.after.test.r2
    );

    let identity = d.join("pruned0");
    ok(&[
        "prune",
        "--model",
        p(&kan.join("model.json")),
        "--data",
        p(&data),
        "--out",
        p(&identity),
        "--percentile",
        "0",
    ]);
    let zero: PruneSummary = read(&identity.join("prune.json"));
    assert_eq!((zero.surviving_nodes, zero.surviving_edges), (19, 90));
    assert_eq!(zero.after, zero.before);
    assert!(zero.removed_edges.is_empty());
    assert!(std::fs::read_to_string(pruned.join("graph.dot"))
        .unwrap()
        .starts_with("digraph"));

    let sym = d.join("sym");
    ok(&[
        "symbolify",
        "--model",
        p(&pruned.join("pruned_model.json")),
        "--data",
        p(&data),
        "--out",
        p(&sym),
    ]);
    let s: SymbolifySummary = read(&sym.join("symbolify.json"));
    assert!(s.raw_units);
    assert!(
        s.formula_vs_net_r2 > 0.9,
        "formula vs net {}",
        s.formula_vs_net_r2
    );
    assert!(std::fs::read_to_string(sym.join("formula.txt"))
        .unwrap()
        .starts_with("cl = "));

    let rep = d.join("report");
    ok(&[
        "report",
        "--metrics",
        p(&kan.join("metrics.json")),
        p(&mlp.join("metrics.json")),
        p(&lr.join("metrics.json")),
        "--out",
        p(&rep),
    ]);
    let r: ComparisonReport = read(&rep.join("report.json"));
    assert_eq!(r.rows.len(), 7);
    for out in [&data, &kan, &mlp, &lr, &pruned, &sym, &rep] {
        assert!(out.join("run.json").exists(), "{}", out.display());
    }
}

#[test]
fn empty_prune_fails_without_writing_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let csv = d.join("lift.csv");
    common::write_surrogate_csv(&csv, 200, 0, 4);
    let data = prep(d, &csv, "prep");
    let kan = d.join("kan");
    ok(&[
        "train",
        "--model",
        "kan",
        "--data",
        p(&data),
        "--out",
        p(&kan),
        "--steps",
        "20",
    ]);
    let out = d.join("pruned");
    let res = kanfoil(&[
        "prune",
        "--model",
        p(&kan.join("model.json")),
        "--data",
        p(&data),
        "--out",
        p(&out),
        "--percentile",
        "100",
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("EmptyModel"));
    assert!(!out.join("pruned_model.json").exists());
    assert!(!out.join("prune.json").exists());
}
