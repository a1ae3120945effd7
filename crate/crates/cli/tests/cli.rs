use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qgdirac::concentration::sech_bump;
use qgdirac::fem::make_space;
use qgdirac::graph::{build_chain, centered_window, unroll};
use qgdirac::io::write_field_csv;
use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgdirac")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SOLVE_CONFIG: &str = "version = 1
seed = 4

[graph]
builtin = \"chain\"

[discretization]
h_max = 0.0625
window_cells = 33

[model]
name = \"saturable\"
b = 3.0
";

#[test]
fn bands_report_the_gap() {
    let t = TempDir::new().unwrap();
    let o = run(t.path(), &["bands", "--theta-points", "8", "--output-dir", "chain"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let g = json(&t.path().join("chain/gap.json"));
    assert_eq!(g["report"]["pass"], true);
    assert!((g["report"]["gap_lo"].as_f64().unwrap() + 1.0).abs() < 1e-6);
    assert!((g["report"]["gap_hi"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    let csv = fs::read_to_string(t.path().join("chain/bands.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("theta0,band,lambda"));
    assert_eq!(csv.lines().count(), 1 + 8 * 4);

    let o = run(t.path(), &["gap", "--builtin", "ladder", "--c", "2", "--theta-points", "4", "--output-dir", "ladder"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let g = json(&t.path().join("ladder/gap.json"));
    assert!((g["report"]["gap_lo"].as_f64().unwrap() + 4.0).abs() < 1e-6);
    assert!((g["report"]["gap_hi"].as_f64().unwrap() - 4.0).abs() < 1e-6);
    assert!(!t.path().join("ladder/bands.csv").exists());

    let o = run(t.path(), &["bands", "--theta-points", "8", "--output-dir", "again"]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(t.path().join("chain/bands.csv")).unwrap(), fs::read(t.path().join("again/bands.csv")).unwrap());
}

#[test]
fn bad_configs_exit_one_without_files() {
    let t = TempDir::new().unwrap();
    fs::write(t.path().join("typo.toml"), "version = 1\n[physics]\nm = \"heavy\"\n").unwrap();
    let o = run(t.path(), &["bands", "--config", "typo.toml", "--output-dir", "out"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!t.path().join("out").exists());

    fs::write(t.path().join("v2.toml"), "version = 2\n").unwrap();
    assert_eq!(code(&run(t.path(), &["bands", "--config", "v2.toml", "--output-dir", "out"])), 1);
    assert_eq!(code(&run(t.path(), &["solve", "--omega", "1.5", "--output-dir", "out"])), 1);
    assert_eq!(code(&run(t.path(), &["bands", "--builtin", "hexagon", "--output-dir", "out"])), 1);
    assert_eq!(code(&run(t.path(), &["frobnicate"])), 1);
    assert!(!t.path().join("out").exists());
    assert_eq!(code(&run(t.path(), &["--help"])), 0);
}

#[test]
fn square_check_on_the_ladder_cell() {
    let t = TempDir::new().unwrap();
    let o = run(t.path(), &["square-check", "--builtin", "ladder", "--h-max", "0.03125"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&t.path().join("square_check.json"));
    assert_eq!(r["pass"], true);
    assert!((r["observed_order"].as_f64().unwrap() - 2.0).abs() < 0.2);
}

#[test]
fn solve_is_deterministic() {
    let t = TempDir::new().unwrap();
    fs::write(t.path().join("run.toml"), SOLVE_CONFIG).unwrap();
    for dir in ["a", "b"] {
        let o = run(t.path(), &["solve", "--config", "run.toml", "--output-dir", dir]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).contains("residual"));
    }
    for f in ["field.csv", "cell_masses.csv", "bound_state.json"] {
        assert_eq!(fs::read(t.path().join("a").join(f)).unwrap(), fs::read(t.path().join("b").join(f)).unwrap(), "{f}");
    }
    let s = json(&t.path().join("a/bound_state.json"));
    let st = &s["state"];
    assert!(st["residual_norm"].as_f64().unwrap() <= 1e-10);
    assert!((st["action_value"].as_f64().unwrap() - st["fhat_integral"].as_f64().unwrap()).abs() <= 1e-6);
    assert!((st["decay_rate"].as_f64().unwrap() - 2.0).abs() < 0.1);
}

#[test]
fn solve_failures_are_classified() {
    let t = TempDir::new().unwrap();
    let o = run(t.path(), &["solve", "--b", "0.5", "--output-dir", "weak"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("F3_b"), "{}", stderr(&o));
    assert!(!t.path().join("weak").exists());

    let o = run(t.path(), &["solve", "--window-cells", "15", "--output-dir", "short"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("window-too-small"), "{}", stderr(&o));
    assert!(!t.path().join("short").exists());

    let o = run(t.path(), &["solve", "--model", "zero", "--force", "--window-cells", "15", "--h-max", "0.125", "--output-dir", "z"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("trivial-solution"), "{}", stderr(&o));
}

#[test]
fn check_reports_hypotheses() {
    let t = TempDir::new().unwrap();
    let o = run(t.path(), &["check", "--h-max", "0.125", "--output-dir", "good"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(t.path().join("good/hypotheses.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("name,pass,value,detail"));
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1) == Some("true")), "{csv}");

    let o = run(t.path(), &["check", "--b", "0.5", "--h-max", "0.125", "--output-dir", "weak"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("F3_b"));
    let r = json(&t.path().join("weak/check.json"));
    assert_eq!(r["seed"], 0);
}

#[test]
fn diagnose_translated_bumps() {
    let t = TempDir::new().unwrap();
    assert_eq!(code(&run(t.path(), &["diagnose"])), 1);
    assert_eq!(code(&run(t.path(), &["diagnose", "missing.csv"])), 1);

    let pg = build_chain(1.0).unwrap();
    let un = unroll(&pg, &centered_window(21)).unwrap();
    let s = make_space(&un.graph, 0.125).unwrap();
    let mut args = vec!["diagnose".to_string(), "--window-cells".into(), "21".into(), "--h-max".into(), "0.125".into()];
    for n in 0..6i64 {
        let cell = un.window.iter().position(|k| k.0 == [n]).unwrap();
        let u = sech_bump(&s, &un, cell, 0, 0.5, 1.0).unwrap();
        let name = format!("u{n}.csv");
        let mut buf = Vec::new();
        write_field_csv(&u, &mut buf).unwrap();
        fs::write(t.path().join(&name), buf).unwrap();
        args.push(name);
    }
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = run(t.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.starts_with("Compact"), "{out}");
    let d = json(&t.path().join("diagnose.json"));
    let shifts: Vec<i64> = d["classification"]["shifts"].as_array().unwrap().iter().map(|k| k[0].as_i64().unwrap()).collect();
    // Each bump sits on the vertex shared by cells n − 1 and n.
    assert_eq!(shifts, vec![-1, 0, 1, 2, 3, 4]);
    let prof = fs::read_to_string(t.path().join("profiles.csv")).unwrap();
    assert_eq!(prof.lines().next(), Some("field,R,rho"));
}

#[test]
fn graph_emit_and_validate() {
    let t = TempDir::new().unwrap();
    let o = run(t.path(), &["graph", "emit", "--builtin", "ladder", "--out", "ladder.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(t.path(), &["graph", "validate", "--spec", "ladder.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("valid"));

    let loose = r#"{"vertices": ["a", "b"], "edges": [{"id": "e", "tail": "a", "head": "b", "length": 1.0}],
                    "periodic": {"rank": 1, "gluings": []}}"#;
    fs::write(t.path().join("loose.json"), loose).unwrap();
    let o = run(t.path(), &["graph", "validate", "--spec", "loose.json"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert_eq!(code(&run(t.path(), &["bands", "--spec", "loose.json", "--output-dir", "x"])), 1);

    fs::write(t.path().join("broken.json"), "{\n  \"vertices\": [\n").unwrap();
    let o = run(t.path(), &["graph", "validate", "--spec", "broken.json"]);
    assert_eq!(code(&o), 1);
}
