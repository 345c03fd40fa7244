use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn midp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_midp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, content: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn json_ok(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn json_err(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(1), "stdout: {}", String::from_utf8_lossy(&out.stdout));
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn config(name: &str) -> String {
    format!("{}/configs/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

// p-value support {0.1, 0.5, 1}: P(T = 2) = 0.1, P(T = 1) = 0.4, P(T = 0) = 0.5
const THREE_POINT: &str = "value,prob\n0,0.5\n1,0.4\n2,0.1\n";

#[test]
fn midp_of_extreme_atom() {
    let dir = TempDir::new().unwrap();
    let null = write(&dir, "null.csv", THREE_POINT);
    let v = json_ok(&midp(&["midp", "--input", s(&null), "--observed", "2", "--u", "0.5"]));
    assert!((v["p"].as_f64().unwrap() - 0.1).abs() < 1e-12);
    assert!((v["midp"].as_f64().unwrap() - 0.05).abs() < 1e-12);
    assert!((v["randp"].as_f64().unwrap() - 0.05).abs() < 1e-12);
}

#[test]
fn midp_of_fair_coin_from_json() {
    let dir = TempDir::new().unwrap();
    let null = write(
        &dir,
        "null.json",
        r#"{"atoms":[{"value":0,"prob":0.5},{"value":1,"prob":0.5}]}"#,
    );
    let v = json_ok(&midp(&["midp", "--input", s(&null), "--observed", "1"]));
    assert_eq!(v["midp"].as_f64().unwrap(), 0.25);
    assert_eq!(v["p"].as_f64().unwrap(), 0.5);
    let u = v["u"].as_f64().unwrap();
    assert!(u > 0.0 && u <= 1.0 && v["u_seeded"] == Value::Bool(true));
    assert_eq!(v["randp"].as_f64().unwrap(), 0.5 * u);
}

#[test]
fn seeded_randomization_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let null = write(&dir, "null.csv", THREE_POINT);
    let run = |seed: &str| midp(&["midp", "--input", s(&null), "--observed", "1", "--seed", seed]).stdout;
    assert_eq!(run("7"), run("7"));
    assert_ne!(run("7"), run("8"));
}

#[test]
fn midp_rejects_bad_u() {
    let dir = TempDir::new().unwrap();
    let null = write(&dir, "null.csv", THREE_POINT);
    let e = json_err(&midp(&["midp", "--input", s(&null), "--observed", "1", "--u", "1.5"]));
    assert_eq!(e["error"], "InvalidArgument");
}

#[test]
fn missing_file_is_a_parse_error_naming_the_path() {
    let e = json_err(&midp(&["midp", "--input", "/no/such/null.csv", "--observed", "1"]));
    assert_eq!(e["error"], "ParseError");
    assert!(e["message"].as_str().unwrap().contains("/no/such/null.csv"));
}

#[test]
fn invalid_null_reports_library_error_kind() {
    let dir = TempDir::new().unwrap();
    let null = write(&dir, "null.csv", "0,0.5\n1,0.6\n");
    let e = json_err(&midp(&["midp", "--input", s(&null), "--observed", "1"]));
    assert_ne!(e["error"], "ParseError");
    assert!(e["message"].as_str().unwrap().contains("null.csv"));
}

#[test]
fn usage_errors_exit_with_two() {
    let out = midp(&["combine"]);
    assert_eq!(out.status.code(), Some(2));
    let e: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(e["error"], "UsageError");
    assert!(midp(&["--help"]).status.success());
}

#[test]
fn combine_mean_of_hundred_values() {
    let dir = TempDir::new().unwrap();
    let q = write(&dir, "q.csv", &"0.4\n".repeat(100));
    let v = json_ok(&midp(&["combine", "--input", s(&q)]));
    let rows = v.as_array().unwrap();
    assert_eq!(rows[0]["method"], "MeanBoundClosed");
    assert!((rows[0]["pvalue_bound"].as_f64().unwrap() - (-6.0f64).exp() * 1.0).abs() < 1e-9);
    assert!((rows[0]["pvalue_bound"].as_f64().unwrap() - 0.002479).abs() < 5e-7);
    // the optimized bound never exceeds the closed form
    assert!(rows[1]["pvalue_bound"].as_f64().unwrap() <= rows[0]["pvalue_bound"].as_f64().unwrap());
}

#[test]
fn combine_stdsum_two_experiments() {
    let r = (262.0f64 / 45.0).sqrt();
    let dir = TempDir::new().unwrap();
    let nulls = [
        [(15.0 - r) / 42.0, (15.0 + r) / 42.0, 12.0 / 42.0],
        [2.0 / 9.0, 5.0 / 9.0, 2.0 / 9.0],
    ];
    let mut rows = String::from("q,sigma\n");
    for (i, probs) in nulls.iter().enumerate() {
        let csv: String = probs.iter().enumerate().map(|(k, p)| format!("{k},{p}\n")).collect();
        let path = write(&dir, &format!("null{i}.csv"), &csv);
        let v = json_ok(&midp(&["midp", "--input", s(&path), "--observed", "2"]));
        rows.push_str(&format!("{},{}\n", v["midp"], v["barnard_sigma"]));
    }
    let batch = write(&dir, "batch.csv", &rows);
    let v = json_ok(&midp(&["combine", "--input", s(&batch), "--method", "stdsum"]));
    let bound = v[0]["pvalue_bound"].as_f64().unwrap();
    assert_eq!(v[0]["method"], "StdSumBound");
    assert!((bound - 0.12).abs() < 0.005, "{bound}");
}

#[test]
fn combine_groups_keep_order() {
    let dir = TempDir::new().unwrap();
    let rows = r#"[{"q":0.1,"group":"b"},{"q":0.2,"group":"a"},{"q":0.3,"group":"b"}]"#;
    let batch = write(&dir, "batch.json", rows);
    let v = json_ok(&midp(&["combine", "--input", s(&batch), "--method", "meanopt"]));
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["group"], "b");
    assert_eq!(rows[0]["n"], 2);
    assert_eq!(rows[1]["group"], "a");
}

#[test]
fn fisher_rejects_zero_midp() {
    let dir = TempDir::new().unwrap();
    let q = write(&dir, "q.csv", "q\n0.2\n0\n");
    let e = json_err(&midp(&["combine", "--input", s(&q), "--method", "fisher"]));
    assert_eq!(e["error"], "NonPositivePValue");
}

#[test]
fn stdsum_needs_sigma() {
    let dir = TempDir::new().unwrap();
    let q = write(&dir, "q.csv", "q\n0.2\n0.3\n");
    let e = json_err(&midp(&["combine", "--input", s(&q), "--method", "stdsum"]));
    assert_eq!(e["error"], "MissingSigmaColumn");
}

#[test]
fn delta_test_decision() {
    let dir = TempDir::new().unwrap();
    let q = write(&dir, "q.json", &format!("[{}]", vec!["0.3"; 50].join(",")));
    let v = json_ok(&midp(&["combine", "--input", s(&q), "--method", "delta", "--alpha", "0.05"]));
    // exp(-6 * 50 * 0.04) is far below 0.05
    assert!(v[0]["pvalue_bound"].as_f64().unwrap() <= 0.05);
}

#[test]
fn score_reports_both_statistics() {
    let dir = TempDir::new().unwrap();
    let q = write(&dir, "q.csv", "q,group\n0.4,x\n0.4,x\n0.01,y\n0.02,y\n");
    let v = json_ok(&midp(&["score", "--input", s(&q)]));
    let x = &v[0];
    assert_eq!(x["group"], "x");
    assert!((x["mean_score"].as_f64().unwrap() - (-6.0f64 * 2.0 * 0.01).exp()).abs() < 1e-12);
    assert_eq!(x["product_score"].as_f64().unwrap(), 1.0);
    let y = &v[1];
    let f = -2.0 * (0.01f64.ln() + 0.02f64.ln());
    assert!((y["fisher_statistic"].as_f64().unwrap() - f).abs() < 1e-12);
    let chernoff = (2.0 - f / 2.0 - 2.0 * (4.0 / f).ln()).exp();
    assert!((y["product_score"].as_f64().unwrap() - chernoff).abs() < 1e-12);
}

#[test]
fn certify_three_point_midp() {
    let dir = TempDir::new().unwrap();
    let null = write(&dir, "null.csv", THREE_POINT);
    let knots = dir.path().join("idf.csv");
    let v = json_ok(&midp(&["certify", "--input", s(&null), "--from-null", "--idf-csv", s(&knots)]));
    assert_eq!(v["is_subuniform"], true);
    let touch: Vec<f64> = v["touch_points"].as_array().unwrap().iter().map(|t| t.as_f64().unwrap()).collect();
    assert_eq!(touch.len(), 3);
    for (t, want) in touch.iter().zip([0.1, 0.5, 1.0]) {
        assert!((t - want).abs() < 1e-12);
    }
    assert!(std::fs::read_to_string(knots).unwrap().lines().count() > 3);
}

#[test]
fn certify_unit_distributions() {
    let dir = TempDir::new().unwrap();
    let ok = write(
        &dir,
        "ok.json",
        r#"{"atoms":[{"value":0.4,"prob":0.5},{"value":0.6,"prob":0.5}]}"#,
    );
    assert_eq!(json_ok(&midp(&["certify", "--input", s(&ok)]))["is_subuniform"], true);
    let shifted = write(&dir, "shifted.csv", "0.3,0.5\n0.6,0.5\n");
    let v = json_ok(&midp(&["certify", "--input", s(&shifted)]));
    assert_eq!(v["is_subuniform"], false);
}

#[test]
fn simulate_bundled_power_config() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("power.csv");
    let run = midp(&["simulate", "--input", &config("fig2_bottom_left"), "--output", s(&out)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let row = text
        .lines()
        .find(|l| l.starts_with("FisherSubUniform,0.05,"))
        .expect("row present");
    let cdf: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!(cdf > 0.9, "{row}");
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let args = ["simulate", "--input", &config("fig2_top_middle"), "--reps", "300"];
    let a = midp(&args);
    let b = midp(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = midp(&["simulate", "--input", &config("fig2_top_middle"), "--reps", "300", "--seed", "9"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn null_calibration_sizes() {
    let out = midp(&["simulate", "--input", &config("null_calibration"), "--reps", "5000"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "method,alpha,cdf,stderr,n,scenario");
    let mut checked = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let alpha: f64 = f[1].parse().unwrap();
        let cdf: f64 = f[2].parse().unwrap();
        let bound = alpha + 4.0 * (alpha * (1.0 - alpha) / 5000.0).sqrt();
        // the randomized Fisher p-value is exact, everything else conservative
        assert!(cdf <= bound, "{line}");
        checked += 1;
    }
    assert_eq!(checked, 6 * 7 * 3);
}

#[test]
fn simulate_malformed_config() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", r#"{"support":"FiftyFifty""#);
    let e = json_err(&midp(&["simulate", "--input", s(&bad)]));
    assert_eq!(e["error"], "ParseError");
}
