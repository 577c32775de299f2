use std::path::{Path, PathBuf};
use std::process::Command;

use num_complex::Complex64;
use serde_json::Value;
use tempfile::TempDir;

use torus_psido::io::write_grid;
use torus_psido::transform::GridFunction;

const NON_PARABOLIC: &str =
    r#"{ "family": "polynomial", "n": 1, "terms": [[[0], [[[0, 1]]]], [[2], [[[0, 1]]]]], "m": 2 }"#;

struct Run {
    code: i32,
    dir: PathBuf,
    stderr: String,
}

impl Run {
    fn report(&self) -> Value {
        let text = std::fs::read_to_string(self.dir.join("report.json")).expect("report.json written");
        serde_json::from_str(&text).expect("report.json parses")
    }
}

fn run(tmp: &TempDir, command: &str, config: &str, extra: &[&str]) -> Run {
    let name = format!("{command}-{}", std::fs::read_dir(tmp.path()).unwrap().count());
    let cfg = tmp.path().join(format!("{name}.json"));
    std::fs::write(&cfg, config).unwrap();
    let dir = tmp.path().join(name);
    let out = Command::new(env!("CARGO_BIN_EXE_torus-psido"))
        .args([command, "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()])
        .args(extra)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        dir,
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn grid_file(dir: &Path, name: &str, u: &GridFunction) -> PathBuf {
    let path = dir.join(name);
    write_grid(&path, u).unwrap();
    path
}

#[test]
fn check_symbol_reports_kappa() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(&tmp, "check-symbol", r#"{ "symbol": { "family": "shifted_laplacian", "n": 1 } }"#, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let kappa = r.report()["parabolicity"]["kappa_estimate"].as_f64().unwrap();
    assert!((kappa - 2f64.sqrt()).abs() / 2f64.sqrt() < 0.02, "kappa {kappa}");
}

#[test]
fn check_symbol_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let under_declared = r#"{ "symbol": { "family": "bracket_power", "n": 1, "s": 1, "m": 0 } }"#;
    assert_eq!(run(&tmp, "check-symbol", under_declared, &[]).code, 2);
    assert_eq!(run(&tmp, "check-symbol", r#"{ "symbol": "#, &[]).code, 1);
    let unknown = r#"{ "symbol": { "family": "shifted_laplacian", "n": 1 }, "bogus": 1 }"#;
    assert_eq!(run(&tmp, "check-symbol", unknown, &[]).code, 1);
    let mismatch = r#"{ "command": "solve", "symbol": { "family": "shifted_laplacian", "n": 1 } }"#;
    assert_eq!(run(&tmp, "check-symbol", mismatch, &[]).code, 1);
}

#[test]
fn besov_norm_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let z = [Complex64::new(3.0, 4.0)];
    grid_file(tmp.path(), "const.csv", &GridFunction::constant(2, 8, &z));
    grid_file(tmp.path(), "mode.json", &GridFunction::plane_wave(32, &[4], &z));

    let norms = r#"[{"kind":"besov","s":-1,"p":1,"q":1},{"kind":"besov","s":2,"p":"inf","q":2},{"kind":"lp","p":4}]"#;
    let r = run(&tmp, "besov-norm", &format!(r#"{{ "besov": {{ "input": "const.csv", "norms": {norms} }} }}"#), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    for entry in r.report()["norms"].as_array().unwrap() {
        assert!((entry["value"].as_f64().unwrap() - 5.0).abs() < 1e-12, "{entry}");
    }

    let norms = r#"[{"kind":"besov","s":1,"p":2,"q":2},{"kind":"besov","s":1,"p":1,"q":"inf"}]"#;
    let r = run(&tmp, "besov-norm", &format!(r#"{{ "besov": {{ "input": "mode.json", "norms": {norms} }} }}"#), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    for entry in r.report()["norms"].as_array().unwrap() {
        assert!((entry["value"].as_f64().unwrap() - 20.0).abs() < 1e-10, "{entry}");
    }

    let missing = r#"{ "besov": { "input": "absent.json" } }"#;
    assert_eq!(run(&tmp, "besov-norm", missing, &[]).code, 1);
}

#[test]
fn kernel_sweep_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(&tmp, "kernel-sweep", r#"{ "symbol": { "family": "shifted_laplacian", "n": 1 } }"#, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let spreads = r.report()["spreads"].clone();
    for (_, s) in spreads.as_object().unwrap() {
        assert!(s["scaled_l1"].as_f64().unwrap() < 4.0, "{spreads}");
    }
    let rows = std::fs::read_to_string(r.dir.join("sweep.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 3 * 4);

    let bad = format!(r#"{{ "symbol": {NON_PARABOLIC}, "kernel": {{ "lambdas": [[0, -2]], "radius": 4 }} }}"#);
    let r = run(&tmp, "kernel-sweep", &bad, &[]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.report()["error"].as_str().unwrap().contains("singular"), "{}", r.report());

    let empty = r#"{ "symbol": { "family": "shifted_laplacian", "n": 1 }, "kernel": { "lambdas": [] } }"#;
    assert_eq!(run(&tmp, "kernel-sweep", empty, &[]).code, 1);
}

#[test]
fn solve_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let eigen = r#"{ "symbol": { "family": "shifted_laplacian", "n": 1 },
        "solve": { "horizon": 1, "method": "exponential_midpoint", "steps": 100,
                   "initial": { "mode": [2], "amplitude": [[1, 0]] }, "residual_tol": 0.1 } }"#;
    let r = run(&tmp, "solve", eigen, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.report()["final_error"].as_f64().unwrap() < 1e-12, "{}", r.report());

    for (method, expected, tol) in [("implicit_euler", 1.0, 0.15), ("exponential_midpoint", 2.0, 0.2)] {
        let study = format!(
            r#"{{ "symbol": {{ "family": "shifted_laplacian", "n": 1 }},
                "solve": {{ "horizon": 1, "method": "{method}", "steps": 20, "size": 8,
                           "initial": {{ "mode": [1], "amplitude": [[1, 0]] }},
                           "profile": {{ "kind": "linear", "rate": 1 }},
                           "forcing": {{ "kind": "manufactured" }},
                           "residual_tol": 10, "study": [20, 40, 80, 160] }} }}"#
        );
        let r = run(&tmp, "solve", &study, &[]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        let report = r.report();
        let orders = report["orders"].as_array().unwrap();
        assert_eq!(orders.len(), 3);
        for o in orders {
            assert!((o.as_f64().unwrap() - expected).abs() < tol, "{method}: {report}");
        }
    }

    let past = r#"{ "symbol": { "family": "shifted_laplacian", "n": 1 },
        "solve": { "horizon": 0, "method": "implicit_euler", "steps": 10,
                   "initial": { "mode": [1], "amplitude": [[1, 0]] } } }"#;
    assert_eq!(run(&tmp, "solve", past, &[]).code, 1);
}

#[test]
fn reports_carry_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    let config = r#"{ "symbol": { "family": "identity", "n": 2, "d": 2 } }"#;
    let a = run(&tmp, "check-symbol", config, &["--seed", "11", "--threads", "2"]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    let report = a.report();
    assert_eq!(report["seed"], 11);
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    let hash = report["config_sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(a.dir.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["threads"], 2);
    assert!(report.get("timestamp_unix").is_none());
}
