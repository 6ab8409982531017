use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use graphrag_irl::data::{write_synthetic_movielens, SyntheticSpec};

const BIN: &str = env!("CARGO_BIN_EXE_graphrag-irl");

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new(extra: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        write_synthetic_movielens(&root.join("data"), &SyntheticSpec::default()).unwrap();
        let config = format!(
            "seed = 42\noutput_dir = \"out\"\n\n[dataset]\nformat = \"movielens\"\ndir = \"data\"\n\n\
             [train]\nmax_epochs = 3\n\n[evaluation]\nseeds = [42]\n\n{extra}"
        );
        fs::write(root.join("config.toml"), config).unwrap();
        Workspace { _dir: dir, root }
    }

    fn run(&self, args: &[&str]) -> Output {
        let cfg = self.root.join("config.toml");
        Command::new(BIN)
            .arg("--config")
            .arg(&cfg)
            .args(args)
            .output()
            .unwrap()
    }

    fn out(&self) -> PathBuf {
        self.root.join("out")
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn find_dir(root: &Path, prefix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(prefix))
        .collect();
    v.sort();
    v
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn config_reference_is_a_loadable_config() {
    let o = Command::new(BIN).arg("config-reference").output().unwrap();
    assert!(o.status.success());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ref.toml");
    fs::write(&path, &o.stdout).unwrap();
    let cfg = graphrag_irl::config::ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.rerank.alpha_grid.len(), 11);
}

#[test]
fn usage_and_data_errors_have_distinct_exit_codes() {
    let o = Command::new(BIN).arg("no-such-command").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(BIN).args(["prepare", "--data", "/definitely/missing"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/definitely/missing/ratings.csv"));
}

#[test]
fn prepare_is_idempotent() {
    let ws = Workspace::new("");
    let first = ws.run(&["prepare"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(stdout(&first).contains("split users"));
    let dirs = find_dir(&ws.out(), "prepare-");
    assert_eq!(dirs.len(), 1);
    let before = read_tree(&dirs[0]);
    assert!(ws.run(&["prepare"]).status.success());
    assert_eq!(find_dir(&ws.out(), "prepare-"), dirs);
    assert_eq!(read_tree(&dirs[0]), before);
}

#[test]
fn build_graph_and_sweep() {
    let ws = Workspace::new("");
    let o = ws.run(&["build-graph"]);
    assert!(o.status.success());
    let cats = stdout(&o).lines().find(|l| l.trim_start().starts_with("categories")).map(|l| l.split_whitespace().last().unwrap().to_string());
    assert_eq!(cats.as_deref(), Some("6"), "{}", stdout(&o));
    let o = ws.run(&["build-graph", "--sweep", "2..10"]);
    assert!(o.status.success());
    let rows = stdout(&o).lines().filter(|l| l.chars().next().is_some_and(|c| c.is_ascii_digit())).count();
    assert_eq!(rows, 9);
    let o = ws.run(&["build-graph", "--sweep", "9..2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_linear_writes_checkpoint_and_log() {
    let ws = Workspace::new("");
    let o = ws.run(&["train", "--linear", "--no-graph"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dirs = find_dir(&ws.out(), "model-irl_linear-");
    assert_eq!(dirs.len(), 1);
    assert!(dirs[0].join("checkpoint.json").exists());
    let log = fs::read_to_string(dirs[0].join("training_log.csv")).unwrap();
    assert!(log.lines().count() >= 2);
}

#[test]
fn evaluate_with_baselines_lists_every_row() {
    let ws = Workspace::new("");
    let o = ws.run(&["evaluate", "--baselines", "--method", "supervised", "--method", "irl_mlp"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    for name in ["random", "popularity", "supervised", "irl_mlp"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing:\n{text}");
    }
    let eval = find_dir(&ws.out(), "eval-");
    assert!(eval[0].join("metrics_irl_mlp.csv").exists());
    assert!(eval[0].join("experiment_manifest.json").exists());
    let o = ws.run(&["evaluate", "--method", "nonsense"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn oracle_rerank_at_alpha_one_saturates_the_ceiling() {
    let ws = Workspace::new("");
    let o = ws.run(&["rerank", "--provider", "oracle", "--alpha", "1", "--method", "irl_linear"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let eval = find_dir(&ws.out(), "eval-");
    let csv = fs::read_to_string(eval[0].join("metrics_irl_linear+oracle.csv")).unwrap();
    let text = stdout(&o);
    let recall: f64 = text.split("recall@N ").nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    // each data row: user,rank,...
    let ranks: Vec<usize> = csv
        .lines()
        .filter(|l| l.chars().next().is_some_and(|c| c.is_ascii_digit()))
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let hr1 = ranks.iter().filter(|&&r| r == 1).count() as f64 / ranks.len() as f64;
    assert!((hr1 - recall).abs() < 5e-5, "HR@1 {hr1} vs recall {recall}");
    let manifest = fs::read_to_string(eval[0].join("experiment_manifest.json")).unwrap();
    assert!(manifest.contains("\"provider\": \"oracle\""));
}

#[test]
fn tune_alpha_reports_eleven_grid_points() {
    let ws = Workspace::new("");
    let o = ws.run(&["tune-alpha", "--provider", "oracle", "--method", "irl_linear"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let grid = text.lines().filter(|l| l.starts_with("0.") || l.starts_with("1.")).count();
    assert_eq!(grid, 11);
    assert!(text.contains("best 1.0"));
}

#[test]
fn replay_reproduces_a_recorded_cache() {
    let provider = |kind: &str| {
        format!("[[rerank.providers]]\nname = \"shipped\"\nkind = \"{kind}\"\nmodel = \"m1\"\ncache_dir = \"cache\"\n")
    };
    let ws = Workspace::new(&provider("oracle"));
    let o = ws.run(&["rerank", "--provider", "shipped", "--method", "irl_linear"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let recorded = fs::read(find_dir(&ws.out(), "eval-")[0].join("rerank_irl_linear+shipped.jsonl")).unwrap();
    assert!(ws.root.join("cache/shipped__m1.jsonl").exists());

    let cfg = fs::read_to_string(ws.root.join("config.toml")).unwrap();
    fs::write(ws.root.join("config.toml"), cfg.replace("kind = \"oracle\"", "kind = \"replay\"")).unwrap();
    fs::rename(ws.out(), ws.root.join("first")).unwrap();
    let o = ws.run(&["rerank", "--provider", "shipped", "--method", "irl_linear"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let replayed = fs::read(find_dir(&ws.out(), "eval-")[0].join("rerank_irl_linear+shipped.jsonl")).unwrap();
    assert_eq!(recorded, replayed);

    // an empty cache turns every request into a provider error, which
    // falls back to the reward order rather than failing the run
    fs::remove_dir_all(ws.root.join("cache")).unwrap();
    let o = ws.run(&["rerank", "--provider", "shipped", "--method", "irl_linear"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("provider_error="));
}
