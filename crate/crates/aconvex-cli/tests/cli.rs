//! End-to-end tests driving the compiled binary: exit codes, document
//! shape, closed-form values on the linear map, and byte determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aconvex"))
        .args(args)
        .output()
        .expect("binary failed to spawn")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is not UTF-8")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is not JSON")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process was killed by a signal")
}

/// Unique scratch path; tests clean up after themselves.
fn scratch(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("aconvex-cli-{}-{name}", std::process::id()))
}

#[test]
fn validate_reports_the_non_markov_witness_and_exits_zero() {
    let out = run(&["validate", "--map", "example24", "--cells", "512"]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    assert_eq!(doc["schema"], 1);
    let v = &doc["validate"];
    assert_eq!(v["markov"]["pass"], false);
    assert_eq!(v["markov"]["witness"], 3);
    assert_eq!(v["beta_type"], "indifferent");
    assert_eq!(v["cond1"]["pass"], true);
    assert_eq!(v["identity_32"]["pass"], true);
    let hash = doc["config"]["map_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
}

#[test]
fn spectrum_refuses_the_supercritical_exponent() {
    let out = run(&["spectrum", "--map", "example22", "--s", "1.5", "--cells", "256"]);
    assert_eq!(code(&out), 1);
    assert!(out.stdout.is_empty(), "no data on a hypothesis failure");
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("condition (C)"), "stderr names the failed condition: {err}");
}

#[test]
fn spectrum_reports_the_exact_linear_eigenvalue() {
    let out = run(&["spectrum", "--map", "doubling", "--s", "1.0", "--cells", "256"]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    let gamma = doc["spectrum"]["gamma"].as_f64().unwrap();
    assert!((gamma - 1.0).abs() <= 1e-12, "gamma = {gamma}");
    assert_eq!(doc["config"]["s"], 1.0);
    assert_eq!(doc["config"]["cells"], 256);
    assert_eq!(doc["config"]["output"], "json");
    assert_eq!(doc["spectrum"]["converged"], true);
}

#[test]
fn pressure_matches_the_linear_closed_form() {
    let out = run(&[
        "pressure", "--map", "doubling", "--s-min", "0.5", "--s-max", "1.5", "--s-steps", "3",
        "--cells", "256",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout_str(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,P,lambda,h,converged"));
    let expected = [0.5 * 2f64.ln(), 0.0, -0.5 * 2f64.ln()];
    for (i, line) in lines.by_ref().take(3).enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 5);
        let p: f64 = cols[1].parse().unwrap();
        assert!((p - expected[i]).abs() <= 1e-6, "row {i}: P = {p}");
        assert_eq!(cols[4], "true");
    }
    assert_eq!(lines.next(), Some(""));
    let verdicts: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(verdicts["nonincreasing"], true);
    assert_eq!(verdicts["convex"], true);
    assert_eq!(verdicts["P1_zero"], true);
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = [
        "report", "--map", "doubling", "--s", "0.75", "--cells", "256", "--depth", "3",
        "--s-min", "0.5", "--s-max", "1.5", "--s-steps", "3",
    ];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn usage_errors_exit_three() {
    let bad: [&[&str]; 6] = [
        &["spectrum", "--map", "doubling", "--s", "1.0", "--cells", "100"],
        &["spectrum", "--map", "doubling", "--s", "1.0", "--tol", "0.5"],
        &["spectrum", "--map", "no-such-map", "--s", "1.0"],
        &["spectrum", "--map", "doubling"],
        &["cylinders", "--map", "doubling", "--depth", "0"],
        &["frobnicate"],
    ];
    for args in bad {
        let out = run(args);
        assert_eq!(code(&out), 3, "args {args:?} must exit 3");
        assert!(out.stdout.is_empty(), "args {args:?} must not emit data");
    }
}

#[test]
fn cylinder_rows_are_dyadic_for_the_doubling_map() {
    let out = run(&["cylinders", "--map", "doubling", "--s", "1.0", "--depth", "4", "--cells", "256"]);
    assert_eq!(code(&out), 0);
    let text = stdout_str(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,count,m_hat,max_cyl_mass"));
    for (r, line) in lines.take(4).enumerate() {
        let r = r + 1;
        let cols: Vec<&str> = line.split(',').collect();
        let count: usize = cols[1].parse().unwrap();
        let m_hat: f64 = cols[2].parse().unwrap();
        let mass: f64 = cols[3].parse().unwrap();
        let dyadic = 0.5f64.powi(r as i32);
        assert_eq!(count, 1 << r);
        assert!((m_hat - dyadic).abs() <= 1e-9, "r = {r}: m_hat = {m_hat}");
        assert!((mass - dyadic).abs() <= 1e-9, "r = {r}: mass = {mass}");
    }
    // Expanding endpoint: no scaling table follows.
    assert!(!text.contains("theta_hat"));
}

#[test]
fn scaling_table_appears_for_the_indifferent_map() {
    let out = run(&[
        "cylinders", "--map", "example22", "--s", "0.5", "--depth", "3", "--cells", "256",
        "--n-max", "200",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout_str(&out);
    assert!(text.contains("r,w_r,d_r"));
    assert!(text.contains("polynomial,true"));
    let theta: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("theta_hat,"))
        .expect("theta_hat line present")
        .parse()
        .unwrap();
    assert!((1.5..=2.5).contains(&theta), "theta_hat = {theta}");
    let w: Vec<f64> = text
        .lines()
        .skip_while(|l| *l != "r,w_r,d_r")
        .skip(1)
        .take_while(|l| !l.is_empty())
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(w.len(), 30);
    assert!(w.windows(2).all(|p| p[1] > p[0]), "w_r strictly increases");
    assert!(w.last().unwrap() < &1.0);
}

#[test]
fn report_orders_sections_and_embeds_the_hash() {
    let out = run(&[
        "report", "--map", "doubling", "--s", "0.75", "--cells", "256", "--depth", "3",
        "--s-min", "0.5", "--s-max", "1.5", "--s-steps", "3",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout_str(&out);
    let doc: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["schema"], 1);
    let positions: Vec<usize> = ["\"validate\"", "\"spectrum\"", "\"cylinders\"", "\"pressure\""]
        .iter()
        .map(|k| text.find(k).expect("section present"))
        .collect();
    assert!(positions.windows(2).all(|p| p[0] < p[1]), "sections in contract order");
    assert_eq!(doc["config"]["map_hash"].as_str().unwrap().len(), 64);
    assert_eq!(doc["spectrum"]["condition_c"]["pass"], true);
    assert_eq!(doc["pressure"]["verdicts"]["P1_zero"], true);
}

#[test]
fn file_maps_load_and_hypothesis_failures_short_circuit() {
    let path = scratch("lazy.json");
    std::fs::write(
        &path,
        r#"{
            "name": "lazy-start",
            "breakpoints": ["0", "1/2", "1"],
            "branches": [{ "expr": "0.9*x" }, { "expr": "2*(x - 1/2)" }]
        }"#,
    )
    .unwrap();
    let validate = run(&["validate", "--map", path.to_str().unwrap(), "--cells", "256"]);
    assert_eq!(code(&validate), 1);
    let doc = stdout_json(&validate);
    assert_eq!(doc["validate"]["cond1"]["pass"], false);

    let report = run(&["report", "--map", path.to_str().unwrap(), "--cells", "256"]);
    assert_eq!(code(&report), 1);
    let doc = stdout_json(&report);
    assert!(doc.get("validate").is_some());
    assert!(doc.get("spectrum").is_none(), "sections after a failed validation are skipped");
    assert!(doc.get("pressure").is_none());
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn file_maps_run_the_full_density_pipeline() {
    let path = scratch("shift.json");
    std::fs::write(
        &path,
        r#"{
            "name": "doubling-file",
            "breakpoints": ["0", "1/2", "1"],
            "branches": [{ "expr": "2*x" }, { "expr": "2*x - 1" }]
        }"#,
    )
    .unwrap();
    let out = run(&["density", "--map", path.to_str().unwrap(), "--s", "1.0", "--cells", "256"]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    assert!((doc["density"]["gamma"].as_f64().unwrap() - 1.0).abs() <= 1e-9);
    assert_eq!(doc["density"]["in_cone"], true);
    let nodes = doc["density"]["density"]["values"].as_array().unwrap();
    assert_eq!(nodes.len(), 257);
    for v in nodes {
        assert!((v.as_f64().unwrap() - 1.0).abs() <= 1e-9, "flat density");
    }
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn out_flag_writes_the_document_and_leaves_stdout_empty() {
    let path = scratch("out.json");
    let out = run(&[
        "validate", "--map", "doubling", "--cells", "256", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["validate"]["markov"]["pass"], true);
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn spectrum_csv_lists_one_row_per_node() {
    let out = run(&[
        "spectrum", "--map", "doubling", "--s", "1.0", "--cells", "256", "--format", "csv",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout_str(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,density");
    assert_eq!(lines.len(), 1 + 257);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first[0], "0.0");
    let last: Vec<&str> = lines[257].split(',').collect();
    assert_eq!(last[0], "1.0");
}
