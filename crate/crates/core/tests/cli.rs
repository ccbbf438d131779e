use std::path::Path;
use std::process::{Command, Output};

use matspline::cli::RunRow;

fn matspline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matspline"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_prints_table_one() {
    let o = matspline(&["run", "--problem", "guzman", "--h", "0.1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("[0, 0.1]"));
    assert!(out.contains("2.83337e-6"));
    assert!(out.contains("3.37762e-6"));
}

#[test]
fn csv_round_trip_matches_table() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("errors.csv");
    let o = matspline(&["run", "--problem", "sylvester", "--output", csv_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = stdout(&o);
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let headers: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(headers, ["interval_left", "interval_right", "max_frobenius_error", "fp_iterations"]);
    let rows: Vec<RunRow> = reader.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 10);
    for row in &rows {
        let printed = format!("{:.5e}", row.max_frobenius_error.unwrap());
        assert!(table.contains(&printed), "{printed} missing from table");
    }
    assert_eq!(format!("{:.5e}", rows[0].max_frobenius_error.unwrap()), "1.33472e-6");
}

#[test]
fn spline_save_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let spline = dir.path().join("spline.json");
    let o = matspline(&["run", "--problem", "scalar-exp", "--n", "4", "--save-spline", spline.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&spline).unwrap()).unwrap();
    assert_eq!(doc["n"], 4);
    assert_eq!(doc["segments"].as_array().unwrap().len(), 4);

    let o = matspline(&["eval", spline.to_str().unwrap(), "--x", "0,1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let pts: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(pts[0]["value"][0][0].as_f64().unwrap(), 1.0);
    let end = pts[1]["value"][0][0].as_f64().unwrap();
    assert!((end - std::f64::consts::E).abs() < 1e-3, "{end}");

    let o = matspline(&["eval", spline.to_str().unwrap(), "--x", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn inline_sylvester_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "syl.json",
        r#"{
            "problem": {
                "kind": "sylvester",
                "A": [["0", "1"], ["0", "0"]],
                "B": [["0", "0"], ["1", "0"]],
                "C": [["exp(-x)", "0"], ["0", "0"]],
                "Y0": [[1, 0], [0, 1]],
                "interval": [0, 1],
                "L": 2
            },
            "n": 10,
            "mode": "direct-affine",
            "output": {"path": "ignored.json", "format": "json"}
        }"#,
    );
    // output spec paths resolve against the working directory
    let o = Command::new(env!("CARGO_BIN_EXE_matspline"))
        .args(["run", "--config", &cfg, "--format", "table"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("ignored.json").exists());
    let out = stdout(&o);
    assert!(out.contains("mode direct-affine"), "{out}");
    assert!(out.contains("[0.9, 1]"));
}

#[test]
fn missing_lipschitz_and_bad_expression_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{"problem": {"kind": "sylvester", "A": [["x"]], "B": [["0"]], "C": [["0"]],
            "Y0": [[1]], "interval": [0, 1]}, "n": 4}"#,
    );
    let o = matspline(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("L"));

    let cfg = write(
        dir.path(),
        "syntax.json",
        r#"{"problem": {"kind": "sylvester", "A": [["2*^x"]], "B": [["0"]], "C": [["0"]],
            "Y0": [[1]], "interval": [0, 1], "L": 1}, "n": 4}"#,
    );
    let o = matspline(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("offset 2"), "{}", stderr(&o));

    let cfg = write(dir.path(), "both.json", r#"{"problem": "guzman", "n": 4, "h": 0.25}"#);
    assert_eq!(matspline(&["run", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn step_condition_violation_exits_two() {
    let o = matspline(&["run", "--problem", "riccati", "--n", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("h exceeds 3/L"), "{}", stderr(&o));
    let o = matspline(&["run", "--problem", "riccati", "--n", "1", "--override"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn non_convergence_exits_three() {
    let o = matspline(&["run", "--problem", "guzman", "--max-iter", "2"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("did not converge"));
}

#[test]
fn bounds_reports_constants() {
    let o = matspline(&["bounds", "--problem", "riccati"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    for needle in ["6.13866", "1.41421", "0.11579", "12.0883", "55.2442", "h < 3/L"] {
        assert!(out.contains(needle), "{needle} missing:\n{out}");
    }
    let o = matspline(&["bounds", "--problem", "riccati", "--format", "json", "--norm", "w0=frobenius"]);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["norms"]["w0"], "frobenius");
    assert!((doc["w0"].as_f64().unwrap() - 3f64.sqrt()).abs() < 1e-12);

    let o = matspline(&["bounds", "--problem", "guzman"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn inadmissible_delta_exits_three() {
    let o = matspline(&["bounds", "--problem", "riccati", "--delta", "0.5"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn convergence_command() {
    let o = matspline(&["convergence", "--problem", "scalar-exp", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let order = doc["fitted_order"].as_f64().unwrap();
    assert!((3.7..=4.3).contains(&order), "{order}");

    let o = matspline(&["convergence", "--problem", "zero"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("degenerate"));

    let o = matspline(&["convergence", "--problem", "guzman", "--h", "0.1,0.05", "--format", "csv"]);
    let out = stdout(&o);
    assert!(out.starts_with("h,n,max_frobenius_error"), "{out}");
    assert_eq!(out.lines().count(), 3);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(matspline(&["run"]).status.code(), Some(2));
    assert_eq!(matspline(&["run", "--problem", "nope"]).status.code(), Some(2));
    assert_eq!(matspline(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(matspline(&["--help"]).status.code(), Some(0));
}

#[test]
fn zero_coefficient_riccati_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "zero.json",
        r#"{"problem": {"kind": "riccati", "A": [["0"]], "B": [["0"]], "C": [["0"]], "D": [["0"]],
            "Y0": [[0.5]], "interval": [0, 1]}, "n": 10}"#,
    );
    let o = matspline(&["bounds", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("any h (L = 0)"), "{out}");
}

#[test]
fn convergence_with_oversized_step_exits_two() {
    let o = matspline(&["convergence", "--problem", "riccati", "--h", "0.1,0.05"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("h exceeds 3/L"), "{}", stderr(&o));
}

#[test]
fn eval_guzman_spline_at_first_knot() {
    let dir = tempfile::tempdir().unwrap();
    let spline = dir.path().join("g.json");
    let o = matspline(&["run", "--problem", "guzman", "--h", "0.1", "--save-spline", spline.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = matspline(&["eval", spline.to_str().unwrap(), "--x", "0,0.1"]);
    let out = stdout(&o);
    assert!(out.contains("[2]"), "{out}");
    assert!(out.contains("[2.10018]"), "{out}");
}

#[test]
fn shipped_riccati_config_matches_builtin() {
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/riccati.json");
    let dir = tempfile::tempdir().unwrap();
    let inline = dir.path().join("inline.json");
    let builtin = dir.path().join("builtin.json");
    let o = matspline(&["run", "--config", cfg, "--save-spline", inline.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = matspline(&["run", "--problem", "riccati", "--save-spline", builtin.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let load = |p: &Path| -> matspline::MatrixSpline {
        serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
    };
    let (a, b) = (load(&inline), load(&builtin));
    for k in 0..=20 {
        let x = 0.005 * k as f64;
        let gap = (&a.eval(x, 0).unwrap() - &b.eval(x, 0).unwrap()).max_abs();
        assert!(gap < 1e-12, "x = {x}: {gap:e}");
    }
    let o = matspline(&["bounds", "--config", cfg]);
    assert!(stdout(&o).contains("55.2442"));
}
