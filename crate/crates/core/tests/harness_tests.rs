use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use serde::Deserialize;
use tempfile::TempDir;

use wigner_detect::harness::{run_experiment, write_report, ExperimentConfig, Overrides, Profile, RawConfig};
use wigner_detect::{par, Error};

const HYPOTHESIS: &str = r#"
experiment = "hypothesis"
n = 24
trials = 40
lambda_grid = [0.2, 0.5]
seed = 7

[noise]
kind = "goe"

[hyp]
k1 = 1
k2 = [2, 3]
"#;

const RANK: &str = r#"
experiment = "rank"
n = 24
trials = 60
lambda_grid = [0.3]
rank_range = [0, 3]
seed = 3
"#;

fn resolve(text: &str, out: &Path) -> ExperimentConfig {
    let raw = RawConfig::from_toml(text).unwrap();
    let ov = Overrides { out_dir: Some(out.to_path_buf()), ..Default::default() };
    raw.resolve(Profile::Paper, &ov, Path::new(".")).unwrap()
}

fn run_into(text: &str, out: &Path, workers: Option<usize>) -> Vec<u8> {
    let cfg = resolve(text, out);
    let report = par::with_workers(workers, || run_experiment(&cfg)).unwrap();
    write_report(&cfg, &report).unwrap();
    std::fs::read(out.join("trials.csv")).unwrap()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = run_into(HYPOTHESIS, &dir.path().join("a"), None);
    let b = run_into(HYPOTHESIS, &dir.path().join("b"), None);
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let sa = std::fs::read(dir.path().join("a/summary.csv")).unwrap();
    let sb = std::fs::read(dir.path().join("b/summary.csv")).unwrap();
    assert_eq!(sa, sb);
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    for text in [HYPOTHESIS, RANK] {
        let one = run_into(text, &dir.path().join("one"), Some(1));
        let eight = run_into(text, &dir.path().join("eight"), Some(8));
        assert_eq!(one, eight);
    }
}

#[test]
fn single_trial_runs_reproduce() {
    let text = HYPOTHESIS.replace("trials = 40", "trials = 1");
    let dir = TempDir::new().unwrap();
    let a = run_into(&text, &dir.path().join("a"), None);
    let b = run_into(&text, &dir.path().join("b"), None);
    assert_eq!(a, b);
    // two lambdas, two alternatives, one draw under each hypothesis
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 8);
}

#[derive(Deserialize)]
struct Trial {
    lambda: f64,
    true_k: usize,
    threshold: f64,
    decision: String,
    aborted: bool,
}

#[derive(Deserialize)]
struct Summary {
    lambda: f64,
    k1: usize,
    empirical_error: f64,
    trials: usize,
}

#[test]
fn summary_is_recomputable_from_trials() {
    let dir = TempDir::new().unwrap();
    run_into(HYPOTHESIS, dir.path(), None);
    let trials: Vec<Trial> =
        csv::Reader::from_path(dir.path().join("trials.csv")).unwrap().deserialize().map(|r| r.unwrap()).collect();
    let summary: Vec<Summary> =
        csv::Reader::from_path(dir.path().join("summary.csv")).unwrap().deserialize().map(|r| r.unwrap()).collect();

    // the threshold differs between alternatives, so it identifies the group
    let mut groups: BTreeMap<(u64, u64), Vec<&Trial>> = BTreeMap::new();
    for t in &trials {
        groups.entry((t.lambda.to_bits(), t.threshold.to_bits())).or_default().push(t);
    }
    assert_eq!(groups.len(), summary.len());
    for (rows, s) in groups.values().zip(&summary) {
        assert_eq!(rows[0].lambda, s.lambda);
        let live: Vec<_> = rows.iter().filter(|t| !t.aborted).collect();
        let under = |k1: bool| live.iter().filter(|t| (t.true_k == s.k1) == k1).collect::<Vec<_>>();
        let (h1, h2) = (under(true), under(false));
        let e1 = h1.iter().filter(|t| t.decision == "H2").count() as f64 / h1.len() as f64;
        let e2 = h2.iter().filter(|t| t.decision == "H1").count() as f64 / h2.len() as f64;
        assert!((e1 + e2 - s.empirical_error).abs() < 1e-12);
        // draws under both hypotheses
        assert_eq!(s.trials, 80);
    }
}

#[test]
fn report_writes_plot_and_json() {
    let dir = TempDir::new().unwrap();
    run_into(RANK, dir.path(), None);
    for f in ["trials.csv", "summary.csv", "confusion.csv", "summary.json", "plot.svg"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(json.get("checks").is_some());
}

fn config_error(text: &str) -> String {
    let raw = match RawConfig::from_toml(text) {
        Ok(raw) => raw,
        Err(Error::Config(msg)) => return msg,
        Err(e) => panic!("unexpected {e}"),
    };
    match raw.resolve(Profile::Paper, &Overrides::default(), Path::new(".")) {
        Err(Error::Config(msg)) => msg,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn config_errors_name_the_field() {
    let bad_lambda = HYPOTHESIS.replace("[0.2, 0.5]", "[0.2, 1.5]");
    assert!(config_error(&bad_lambda).contains("lambda_grid"));
    let bad_hyp = HYPOTHESIS.replace("k2 = [2, 3]", "k2 = [1]");
    assert!(config_error(&bad_hyp).contains("hyp"));
    let unknown = format!("{HYPOTHESIS}\nbogus = 1\n");
    assert!(config_error(&unknown).contains("bogus"));
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_wigner-detect")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = TempDir::new().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    };
    let out = dir.path().join("out").to_string_lossy().into_owned();

    let ok = write("ok.toml", HYPOTHESIS);
    let res = cli(&["simulate", "--config", &ok, "--out", &out, "--workers", "2"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(
        String::from_utf8_lossy(&res.stdout).contains("PASS") || String::from_utf8_lossy(&res.stdout).contains("FAIL")
    );

    let bad = write("bad.toml", &HYPOTHESIS.replace("[0.2, 0.5]", "[2.0]"));
    assert_eq!(cli(&["simulate", "--config", &bad, "--out", &out]).status.code(), Some(2));

    // wrong subcommand for the experiment
    assert_eq!(cli(&["rank", "--config", &ok, "--out", &out]).status.code(), Some(2));

    // three trials with a tiny tolerance cannot pass the self-test
    let strict = write("strict.toml", &format!("tolerance = 1e-9\n{HYPOTHESIS}").replace("trials = 40", "trials = 3"));
    assert_eq!(cli(&["simulate", "--config", &strict, "--out", &out, "--self-test"]).status.code(), Some(4));

    let f = cli(&["functionals", "--noise", "sech"]);
    assert_eq!(f.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&f.stdout).unwrap();
    assert!((v["fh"].as_f64().unwrap() - std::f64::consts::PI.powi(2) / 8.0).abs() < 1e-8);
}

#[test]
fn cli_capacity_error_exits_with_three() {
    let dir = TempDir::new().unwrap();
    // capacity is checked up front, so this exits before any simulation
    let text = "experiment = \"lr_oracle\"\nn = 13\ntrials = 10\nlambda_grid = [0.2]\n[hyp]\nk1 = 0\nk2 = [2]\n";
    let p = dir.path().join("lr.toml");
    std::fs::write(&p, text).unwrap();
    let res = cli(&["lr-oracle", "--config", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
}
