use std::fs;
use std::process::Command;

use pgql::harness::read_trace;

fn pgql() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pgql"))
}

#[test]
fn run_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traces");
    let status = pgql()
        .args(["run", "--steps", "300", "--eval-every", "100", "--seeds", "0,1"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let trace = read_trace(&out.join("pgql-seed1.csv")).unwrap();
    let steps: Vec<u64> = trace.rows.iter().map(|r| r.step).collect();
    assert_eq!(steps, vec![0, 100, 200, 300]);
    assert_eq!(trace.setting("eval-every"), Some("100"));

    let svg = dir.path().join("curve.svg");
    let status = pgql()
        .arg("plot")
        .arg(out.join("pgql-seed0.csv"))
        .arg(out.join("pgql-seed1.csv"))
        .arg("--out")
        .arg(&svg)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert_eq!(fs::read_to_string(&svg).unwrap().matches("<polyline").count(), 1);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    let layout = dir.path().join("grid.txt");
    fs::write(&layout, "S.#\n..T\n").unwrap();
    fs::write(&cfg, format!("agent = q-learning\nsteps = 500\nlayout-file = {}\n", layout.display())).unwrap();
    let out = dir.path().join("o");
    let status = pgql()
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .args(["--steps", "40", "--seeds", "2"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let trace = read_trace(&out.join("q-learning-seed2.csv")).unwrap();
    assert_eq!(trace.setting("steps"), Some("40"));
    assert_eq!(trace.setting("layout"), Some("S.#/..T"));
}

#[test]
fn bad_value_names_the_field() {
    let out = pgql().args(["run", "--alpha", "hot"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
}

#[test]
fn certify_writes_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cert.csv");
    let status = pgql()
        .args(["certify", "--seeds", "0..2", "--alpha", "0.1", "--eta", "0,0.5"])
        .arg("--out")
        .arg(&path)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}
