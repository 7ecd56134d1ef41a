use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMOKE: &str = r#"
seed = 1
data_dir = "data"
artifact_dir = "artifacts"
k_folds = 3

[generate]
n_patients = 2000
n_lab_items = 64
n_icd_diag = 300
n_icd_proc = 120
note_length_scale = 0.02

[features]
embed_dim = 16

[sage]
n_layers = 2
hidden = 32
aggregator = "mean"
learning_rate = 0.001
max_epochs = 8
patience = 3

[grid]
learning_rates = [0.001]
layers = [2]
hidden = [32]
aggregators = ["mean", "max"]
"#;

fn caregraph(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_caregraph"))
        .current_dir(dir)
        .args(["--config", "run.toml", "--threads", "1"])
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), config).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn full_run_emits_every_table_and_is_idempotent() {
    let dir = setup(SMOKE);
    let out = caregraph(dir.path(), &["run-all"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).matches(": done").count(), 9, "{}", stdout(&out));

    let art = dir.path().join("artifacts");
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(art.join("report/report.json")).unwrap()).unwrap();
    for key in ["cohort", "graph", "train", "grid", "ablation", "crossval", "artifacts"] {
        assert!(!report[key].is_null(), "report lacks {key}");
    }
    assert_eq!(report["train"].as_array().unwrap().len(), 3);
    assert_eq!(report["grid"]["points"], 2);
    assert_eq!(report["crossval"]["comparisons"].as_array().unwrap().len(), 6);


    for table in [
        "train/metrics.csv",
        "train/history.csv",
        "grid/grid.csv",
        "ablate/ablation.csv",
        "crossval/folds.csv",
        "crossval/summary.csv",
        "crossval/normality.csv",
        "crossval/ttest.csv",
    ] {
        let text = fs::read_to_string(art.join(table)).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("# config_hash="), "{table}: {first}");
    }

    let ablation = fs::read_to_string(art.join("ablate/ablation.csv")).unwrap();
    let aurocs: Vec<f64> = ablation
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(aurocs.len(), 6);
    assert!(aurocs.windows(2).all(|w| w[0] >= w[1]));

    let again = caregraph(dir.path(), &["run-all"]);
    assert!(again.status.success());
    assert_eq!(stdout(&again).matches("up to date").count(), 9, "{}", stdout(&again));

    let forced = caregraph(dir.path(), &["report", "--force"]);
    assert!(forced.status.success());
    assert_eq!(stdout(&forced).trim(), "report: done");
    let report2 = fs::read(art.join("report/report.json")).unwrap();
    assert_eq!(serde_json::from_slice::<serde_json::Value>(&report2).unwrap(), report);
}

#[test]
fn train_without_graph_is_stale() {
    let dir = setup(SMOKE);
    for stage in ["generate", "ingest", "featurize"] {
        let out = caregraph(dir.path(), &[stage]);
        assert!(out.status.success(), "{stage}: {}", stderr(&out));
    }
    let out = caregraph(dir.path(), &["train"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("rerun stage `graph`"), "{}", stderr(&out));
}

#[test]
fn changed_seed_makes_downstream_stale() {
    let dir = setup(SMOKE);
    for stage in ["generate", "ingest"] {
        assert!(caregraph(dir.path(), &[stage]).status.success());
    }
    let out = caregraph(dir.path(), &["featurize", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("`generate`"), "{}", stderr(&out));
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = setup("seed = 1\n[graph]\ntau = 0.5\n");
    let out = caregraph(dir.path(), &["generate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("graph.tau"), "{}", stderr(&out));

    let dir = setup("bogus = 1\n");
    assert_eq!(caregraph(dir.path(), &["generate"]).status.code(), Some(2));
}

#[test]
fn show_config_round_trips() {
    let dir = setup(SMOKE);
    let out = caregraph(dir.path(), &["show-config", "--seed", "5"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("seed = 5\n"), "{text}");
    assert!(text.contains("n_patients = 2000"));
}
