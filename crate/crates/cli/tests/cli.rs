use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

struct Sandbox {
    root: PathBuf,
}

impl Sandbox {
    fn new(tag: &str) -> Self {
        let root = std::env::temp_dir().join(format!("brwlab-cli-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&root);
        std::fs::create_dir_all(root.join("fixtures")).unwrap();
        Sandbox { root }
    }

    fn results(&self) -> PathBuf {
        self.root.join("results")
    }

    fn write(&self, name: &str, body: &str) -> PathBuf {
        let p = self.root.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    fn brwlab(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_brwlab"))
            .args(args)
            .env("BRWLAB_RESULTS_DIR", self.results())
            .env("BRWLAB_FIXTURES_DIR", self.root.join("fixtures"))
            .output()
            .unwrap()
    }

    fn run(&self, cfg: &Path, extra: &[&str]) -> (Output, Option<PathBuf>) {
        let mut args = vec!["run", "-c", cfg.to_str().unwrap()];
        args.extend_from_slice(extra);
        let out = self.brwlab(&args);
        let dir = std::fs::read_dir(self.results()).ok().and_then(|mut it| it.next()).map(|e| e.unwrap().path());
        (out, dir)
    }
}

impl Drop for Sandbox {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.root);
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().rev().find(|l| l.trim_start().starts_with('{')).expect("json error line");
    serde_json::from_str(line).unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn header(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn calibrate_writes_a_stable_fixture() {
    let s = Sandbox::new("cal");
    let cfg = s.write("cal.json", r#"{"model": "p1"}"#);
    let o = s.brwlab(&["calibrate", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fixture = s.root.join("fixtures/p1.json");
    let first = std::fs::read(&fixture).unwrap();
    let m = read_json(&fixture);
    for key in ["m", "mean_offspring", "a1", "a2", "n_min"] {
        assert!(m.get(key).is_some(), "missing {key}");
    }
    assert_eq!(code(&s.brwlab(&["calibrate", "-c", cfg.to_str().unwrap()])), 0);
    assert_eq!(first, std::fs::read(&fixture).unwrap());
}

#[test]
fn calibrate_rejects_a_critical_target() {
    let s = Sandbox::new("crit");
    let cfg = s.write(
        "cal.json",
        r#"{"model": {"name": "flat", "a": 0, "lambda": 2, "b": 0.4, "x0": -1, "ell_inf": 0.01,
            "right_mu": 0, "right_sigma": 0.1, "offspring": {"family": "shifted_poisson"},
            "target_mean_offspring": 1.0}}"#,
    );
    let o = s.brwlab(&["calibrate", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = stderr_json(&o);
    assert_eq!(err["exit_code"], 2);
    assert!(err["error"].as_str().unwrap().contains("E[nu] > 1"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let s = Sandbox::new("unknown");
    let cfg = s.write("run.json", r#"{"name": "x", "model": "p1", "experiment": {"kind": "simulate", "n": 5}, "bogus": 1}"#);
    let (o, _) = s.run(&cfg, &["--seed", "1"]);
    assert_eq!(code(&o), 2);
    let o = s.brwlab(&["run", "-c", s.root.join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn simulate_writes_the_expected_layout() {
    let s = Sandbox::new("sim");
    let cfg = s.write(
        "run.json",
        r#"{"name": "sim", "model": "p1", "reps": 6,
            "experiment": {"kind": "simulate", "n": 30, "atoms_at": [30], "ray_windows": [{"n": 30, "eps": 0.5}]}}"#,
    );
    let (o, dir) = s.run(&cfg, &["--seed", "3", "--workers", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = dir.unwrap();
    assert_eq!(header(&dir.join("tables/generations.csv")), "rep,n,pop,M_n,W_n,ray_stat");
    assert_eq!(header(&dir.join("tables/atoms.csv")), "rep,n,atom");
    assert_eq!(header(&dir.join("tables/report.csv")), "quantity,n,estimate,se,bound_or_limit,ratio,verdict");
    let manifest = read_json(&dir.join("manifest.json"));
    assert_eq!(manifest["root_seed"], 3);
    assert_eq!(manifest["workers"], 2);
    assert_eq!(manifest["status"], "complete");
    let report = read_json(&dir.join("report.json"));
    assert_eq!(report["kind"], "simulate");
    let rows = std::fs::read_to_string(dir.join("tables/generations.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 6 * 31);
}

#[test]
fn many_to_one_on_the_toy_is_exact() {
    let s = Sandbox::new("m2o");
    let cfg = s.write(
        "run.json",
        r#"{"name": "m2o", "model": "discrete-toy", "reps": 2000, "experiment": {"kind": "many-to-one", "n": 3}}"#,
    );
    let (o, dir) = s.run(&cfg, &["--seed", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&dir.unwrap().join("report.json"));
    let exact: Vec<&Value> = report["rows"].as_array().unwrap().iter().filter(|r| r["verdict"] == "exact-pass").collect();
    assert_eq!(exact.len(), 5);
    assert!(exact.iter().all(|r| r["ratio"].as_f64().unwrap() <= 1e-12));
}

#[test]
fn capacity_losses_exit_with_three() {
    let s = Sandbox::new("cap");
    let cfg = s.write(
        "run.json",
        r#"{"name": "cap", "model": "p2-walk", "reps": 10, "pop_cap": 1000, "experiment": {"kind": "simulate", "n": 10}}"#,
    );
    let (o, _) = s.run(&cfg, &["--seed", "1"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stderr_json(&o)["kind"], "capacity");
}

fn minimum_law_cfg(s: &Sandbox, name: &str, model: &str, n: usize) -> PathBuf {
    s.write(
        &format!("{name}.json"),
        &format!(
            r#"{{"name": "{name}", "model": "{model}", "reps": 200,
                "experiment": {{"kind": "minimum-law", "n_grid": [{n}], "x_grid": [-1, 0, 1],
                "j_max": 20, "cstar_reps": 100, "w_pool_reps": 200, "w_pool_n": 20}}}}"#
        ),
    )
}

#[test]
fn report_merges_runs_and_is_idempotent() {
    let s = Sandbox::new("report");
    let a = minimum_law_cfg(&s, "ml-a", "p1", 10);
    let b = minimum_law_cfg(&s, "ml-b", "p1", 20);
    assert_eq!(code(&s.brwlab(&["run", "-c", a.to_str().unwrap(), "--seed", "1", "--run-id", "ml-a"])), 0);
    assert_eq!(code(&s.brwlab(&["run", "-c", b.to_str().unwrap(), "--seed", "1", "--run-id", "ml-b"])), 0);
    let table = s.results().join("ml-a/tables/minimum_law_n10.csv");
    assert_eq!(header(&table), "x,empirical,limit,gap,se");

    let out1 = s.root.join("r1.csv");
    let out2 = s.root.join("r2.csv");
    let o = s.brwlab(&["report", "ml-a", "ml-b", "--out", out1.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&s.brwlab(&["report", "ml-a", "ml-b", "--out", out2.to_str().unwrap()])), 0);
    let text = std::fs::read_to_string(&out1).unwrap();
    assert_eq!(text, std::fs::read_to_string(&out2).unwrap());
    assert!(text.contains("trend_minimum_law"));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("gap(20) <= gap(10) + 0.02"));
}

#[test]
fn report_refuses_mixed_models_and_empty_input() {
    let s = Sandbox::new("mixed");
    let a = minimum_law_cfg(&s, "ml-p1", "p1", 10);
    let b = minimum_law_cfg(&s, "ml-p3", "p3-heavy", 10);
    assert_eq!(code(&s.brwlab(&["run", "-c", a.to_str().unwrap(), "--seed", "1", "--run-id", "p1run"])), 0);
    assert_eq!(code(&s.brwlab(&["run", "-c", b.to_str().unwrap(), "--seed", "1", "--run-id", "p3run"])), 0);
    let o = s.brwlab(&["report", "p1run", "p3run"]);
    assert_eq!(code(&o), 2);
    assert!(stderr_json(&o)["error"].as_str().unwrap().contains("different models"));
    assert_eq!(code(&s.brwlab(&["report"])), 2);
}
