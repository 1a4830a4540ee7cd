use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const CONSTANT: &str = r#"{"market":{"r":0.02,"mu":0.06,"sigma":0.2,"lambda":0.04,"A":0},
 "consumption":{"type":"constant","c":1},"poverty":{"a":0,"d":30,"l":0.5,"rho":25}}"#;

const PROPORTIONAL: &str = r#"{"market":{"r":0.02,"mu":0.06,"sigma":0.2,"lambda":0.04,"A":0},
 "consumption":{"type":"proportional","kappa":0.05},"poverty":{"a":10,"d":30,"l":0.5,"rho":25}}"#;

/// The constant problem on a clock 200 times faster; same value function.
const FAST: &str = r#"{"market":{"r":4.0,"mu":12.0,"sigma":2.8284271247461903,"lambda":8.0,"A":0},
 "consumption":{"type":"constant","c":200},"poverty":{"a":0,"d":30,"l":100,"rho":25}}"#;

const STAIRCASE: &str = r#"{"market":{"r":0.02,"mu":0.06,"sigma":0.2,"lambda":0.04,"A":0},
 "consumption":{"type":"constant","c":1},
 "poverty":{"a":0,"rho":25,"staircase":{"steps":[{"level":20,"increment":0.2},{"level":30,"increment":0.3}]}}}"#;

struct Sandbox {
    dir: TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Sandbox { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn file(&self, name: &str, text: &str) -> String {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p.display().to_string()
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_poverty")).args(args).current_dir(self.dir.path()).output().unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.path(name)).unwrap()
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&self.read(name)).unwrap()
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// `(w, value, policy)` rows of a solution CSV.
fn curve(text: &str) -> Vec<(f64, f64, f64)> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("w,value,policy"));
    lines
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[0], f[1], f[2])
        })
        .collect()
}

fn sha256(path: &Path) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

#[test]
fn closed_solution_starts_at_the_ruin_penalty_and_is_recorded() {
    let s = Sandbox::new();
    let spec = s.file("c.json", CONSTANT);
    s.ok(&["solve", &spec, "--out", "closed"]);
    let rows = curve(&s.read("closed/solution.csv"));
    assert_eq!(rows[0].0, 0.0);
    assert_eq!(rows[0].1, 25.0);
    assert_eq!(rows.last().unwrap().1, 0.0);

    let m = s.json("closed/manifest.json");
    assert_eq!(m["command"], "solve");
    assert_eq!(m["config"]["method"], "closed");
    assert_eq!(m["config"]["spec"]["poverty"]["rho"], 25.0);
    let outputs = m["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 2);
    for o in outputs {
        let file = s.path("closed").join(o["file"].as_str().unwrap());
        assert_eq!(o["sha256"].as_str().unwrap(), sha256(&file));
    }
    let info = s.json("closed/solution.json");
    assert_eq!(info["regime"], "constant");
    assert!((info["y_da"].as_f64().unwrap() - 0.446_217_807_255_344).abs() < 1e-12);
}

#[test]
fn finite_differences_agree_with_the_closed_form() {
    let s = Sandbox::new();
    for (name, text) in [("c.json", CONSTANT), ("p.json", PROPORTIONAL)] {
        let spec = s.file(name, text);
        s.ok(&["solve", &spec, "--method", "closed", "--out", "closed"]);
        s.ok(&["solve", &spec, "--method", "fd", "--out", "fd"]);
        let (c, f) = (curve(&s.read("closed/solution.csv")), curve(&s.read("fd/solution.csv")));
        assert_eq!(c.len(), f.len());
        let gap = c.iter().zip(&f).map(|(x, y)| (x.1 - y.1).abs()).fold(0.0, f64::max);
        assert!(gap <= 1e-4 * 25.0, "{name}: {gap}");
        assert!(c.iter().zip(&f).all(|(x, y)| x.0 == y.0));
    }
}

#[test]
fn staircase_needs_finite_differences() {
    let s = Sandbox::new();
    let spec = s.file("s.json", STAIRCASE);
    let out = s.run(&["solve", &spec, "--method", "closed", "--out", "x"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("closed form requires single-step poverty"));
    s.ok(&["solve", &spec, "--method", "fd", "--out", "x"]);
    assert_eq!(s.json("x/solution.json")["method"], "fd");
}

#[test]
fn validation_lists_every_violation() {
    let s = Sandbox::new();
    s.ok(&["validate", &s.file("c.json", CONSTANT)]);
    let bad = CONSTANT.replace("\"mu\":0.06", "\"mu\":0.01").replace("\"rho\":25", "\"rho\":1");
    let out = s.run(&["validate", &s.file("bad.json", &bad)]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("no risk premium") && err.contains("financial suicide"), "{err}");

    let out = s.run(&["solve", &s.file("broken.json", "{\"market\":"), "--out", "x"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn non_convergence_has_its_own_exit_status() {
    let s = Sandbox::new();
    let spec = s.file("c.json", CONSTANT);
    let out = s.run(&["solve", &spec, "--method", "fd", "--max-iters", "1", "--out", "x"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn simulated_cost_of_the_optimal_policy_matches_the_solution() {
    let s = Sandbox::new();
    let spec = s.file("fast.json", FAST);
    s.ok(&["solve", &spec, "--out", "sol"]);
    let v = curve(&s.read("sol/solution.csv")).into_iter().find(|r| r.0 == 15.0).unwrap().1;
    s.ok(&["simulate", &spec, "--w0", "15", "--n-paths", "20000", "--bridge", "--seed", "5", "--out", "mc"]);
    let est = s.json("mc/estimate.json");
    let (mean, se) = (est["mean"].as_f64().unwrap(), est["stderr"].as_f64().unwrap());
    assert!((mean - v).abs() <= 3.0 * se, "{mean} vs {v} (stderr {se})");
    assert_eq!(s.json("mc/manifest.json")["seed"], 5);
}

#[test]
fn no_investment_from_the_safe_level_costs_nothing() {
    let s = Sandbox::new();
    let spec = s.file("c.json", CONSTANT);
    s.ok(&["simulate", &spec, "--w0", "55", "--policy", "none", "--n-paths", "200", "--out", "mc"]);
    let est = s.json("mc/estimate.json");
    assert_eq!(est["mean"], 0.0);
    assert_eq!(est["ruin_fraction"], 0.0);

    let out = s.run(&["simulate", &spec, "--w0", "-1", "--out", "mc2"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn policy_file_is_interpolated_and_pinned() {
    let s = Sandbox::new();
    let spec = s.file("fast.json", FAST);
    let table = s.file("pi.csv", "w,pi\n0,0\n100,0\n");
    let common = ["--w0", "20", "--n-paths", "300", "--seed", "9"];
    let mut args = vec!["simulate", spec.as_str(), "--policy", "none", "--out", "none"];
    args.extend(common);
    s.ok(&args);
    let mut args = vec!["simulate", spec.as_str(), "--policy", "file", "--policy-file", table.as_str(), "--out", "file"];
    args.extend(common);
    s.ok(&args);
    assert_eq!(s.read("none/estimate.json"), s.read("file/estimate.json"));

    // Changing the file afterwards makes the manifest unreproducible.
    s.file("pi.csv", "w,pi\n0,1\n100,1\n");
    let out = s.run(&["replay", s.path("file/manifest.json").to_str().unwrap(), "--out", "again"]);
    assert_ne!(code(&out), 0);
    assert!(stderr(&out).contains("changed"), "{}", stderr(&out));

    let out = s.run(&["simulate", &spec, "--w0", "20", "--policy", "file", "--out", "x"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn flags_override_the_config_file() {
    let s = Sandbox::new();
    let spec = s.file("fast.json", FAST);
    let cfg = s.file("cfg.json", r#"{"n_paths": 50, "seed": 3, "dt": 0.002}"#);
    s.ok(&["simulate", &spec, "--w0", "20", "--config", &cfg, "--seed", "4", "--out", "mc"]);
    let sim = &s.json("mc/manifest.json")["config"]["sim"];
    assert_eq!(sim["n_paths"], 50);
    assert_eq!(sim["seed"], 4);
    assert_eq!(sim["dt"], 0.002);
    assert_eq!(sim["t_cap"], 20.0 / 8.0);
    assert_eq!(sim["level_refinement"], 256);

    let bad = s.file("bad.json", r#"{"n_path": 50}"#);
    let out = s.run(&["simulate", &spec, "--w0", "20", "--config", &bad, "--out", "mc"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn outputs_are_identical_across_runs_and_worker_counts() {
    let s = Sandbox::new();
    let spec = s.file("fast.json", FAST);
    for (dir, workers) in [("w1", "1"), ("w3", "3"), ("w1b", "1")] {
        s.ok(&["simulate", &spec, "--w0", "15", "--n-paths", "2000", "--workers", workers, "--out", dir]);
    }
    let first = s.read("w1/estimate.json");
    assert_eq!(first, s.read("w3/estimate.json"));
    assert_eq!(first, s.read("w1b/estimate.json"));

    s.ok(&["replay", s.path("w3/manifest.json").to_str().unwrap(), "--out", "replayed"]);
    assert_eq!(first, s.read("replayed/estimate.json"));

    s.ok(&["solve", &spec, "--method", "fd", "--out", "fd"]);
    let out = s.ok(&["replay", s.path("fd/manifest.json").to_str().unwrap(), "--out", "fd2"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("identical solution.csv"));
    assert_eq!(s.read("fd/solution.csv"), s.read("fd2/solution.csv"));
}

#[test]
fn replay_reports_a_tampered_digest() {
    let s = Sandbox::new();
    let spec = s.file("c.json", CONSTANT);
    s.ok(&["solve", &spec, "--out", "a"]);
    let text = s.read("a/manifest.json");
    let m: Value = serde_json::from_str(&text).unwrap();
    let digest = m["outputs"][0]["sha256"].as_str().unwrap();
    let forged = text.replace(digest, &"0".repeat(64));
    let path = s.file("forged.json", &forged);
    let out = s.run(&["replay", &path, "--out", "b"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("differs   solution.csv"));
}

/// `param_value -> value` column of a sweep at a single wealth.
fn sweep_column(text: &str) -> Vec<f64> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("param,param_value,w,observable,value"));
    lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect()
}

#[test]
fn sweeps_reproduce_comparative_statics() {
    let s = Sandbox::new();
    let spec = s.file("c.json", CONSTANT);
    let increasing = |v: &[f64]| v.windows(2).all(|p| p[1] > p[0]);

    s.ok(&["sweep", &spec, "--param", "l", "--values", "0.1,0.2,0.3,0.4,0.5", "--observable", "y_da", "--out", "a"]);
    let col = sweep_column(&s.read("a/sweep.csv"));
    assert_eq!(col.len(), 5);
    assert!(increasing(&col), "{col:?}");

    s.ok(&["sweep", &spec, "--param", "rho", "--values", "20,25,30,40", "--at-w", "15", "--out", "b"]);
    assert!(increasing(&sweep_column(&s.read("b/sweep.csv"))));

    s.ok(&["sweep", &spec, "--param", "sigma", "--values", "0.15,0.2,0.25,0.3", "--at-w", "15", "--out", "c"]);
    assert!(increasing(&sweep_column(&s.read("c/sweep.csv"))));

    s.ok(&["sweep", &spec, "--param", "rho", "--values", "20,30", "--at-w", "5,15", "--observable", "policy", "--out", "d"]);
    assert_eq!(s.read("d/sweep.csv").lines().count(), 5);

    let out = s.run(&["sweep", &spec, "--param", "gamma", "--values", "1", "--at-w", "15", "--out", "e"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unknown parameter"));
    let out = s.run(&["sweep", &spec, "--param", "kappa", "--values", "0.05", "--at-w", "15", "--out", "e"]);
    assert_eq!(code(&out), 2);
    let out = s.run(&["sweep", &spec, "--param", "rho", "--values", "1", "--at-w", "15", "--out", "e"]);
    assert_eq!(code(&out), 2, "suicide region must be rejected");
}
