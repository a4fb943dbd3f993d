use std::path::Path;
use std::process::{Command, Output};

fn codcov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codcov"))
        .args(args)
        .env_remove("CODCOV_CACHE")
        .output()
        .expect("binary runs")
}

fn write_sample(path: &Path, n: usize, dependent: bool) {
    let mut s = String::from("x1,x2,y1\n");
    for i in 0..n {
        let t = i as f64;
        let a = (t * 0.7).sin() * 3.0;
        let b = (t * 1.3).cos() + 0.01 * t;
        let c = if dependent { a + 0.1 * b } else { (t * 2.9).sin() };
        s.push_str(&format!("{a},{b},{c}\n"));
    }
    std::fs::write(path, s).unwrap();
}

fn small_spectrum() -> [&'static str; 4] {
    ["--m-r", "16", "--m-s", "16"]
}

#[test]
fn test_all_methods_json_array() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("s.csv");
    write_sample(&data, 60, true);
    let mut args = vec!["test", "--x", data.to_str().unwrap(), "--px", "2", "--header", "--method", "all", "--json", "--mc-reps", "100"];
    args.extend(small_spectrum());
    let out = codcov(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let reports = v.as_array().unwrap();
    assert_eq!(reports.len(), 4);
    for r in reports {
        assert_eq!(r["n"], 60);
        assert_eq!((r["p"].as_u64(), r["q"].as_u64()), (Some(2), Some(1)));
        assert_eq!(r["reject"], true, "{r}");
    }
    let stat = reports[0]["statistic"].as_f64().unwrap();
    assert_eq!(reports[1]["statistic"].as_f64().unwrap(), stat);
}

#[test]
fn test_two_file_mode_single_report() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.csv");
    let y = dir.path().join("y.csv");
    let xs: String = (0..30).map(|i| format!("{}\n", (i as f64 * 0.37).sin())).collect();
    let ys: String = (0..30).map(|i| format!("{};{}\n", (i as f64 * 1.7).cos(), i % 7)).collect();
    std::fs::write(&x, xs).unwrap();
    std::fs::write(&y, ys).unwrap();
    let out_file = dir.path().join("r.json");
    let out = codcov(&[
        "test", "--x", x.to_str().unwrap(), "--y", y.to_str().unwrap(), "--delimiter", ";",
        "--method", "dcov-permutation", "--json", "--output", out_file.to_str().unwrap(),
    ]);
    // x.csv has no ';' so it parses as one column
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_file).unwrap()).unwrap();
    assert_eq!(v["method"], "dcov_permutation");
    assert_eq!(v["q"], 2);
    assert_eq!(v["metadata"]["permutations"], 30);
}

#[test]
fn input_errors_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.csv");
    let out = codcov(&["test", "--x", missing.to_str().unwrap(), "--px", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2\n3,4\n5,NaN\n").unwrap();
    let out = codcov(&["test", "--x", bad.to_str().unwrap(), "--px", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 3") && err.contains("column 2"), "{err}");

    let ragged = dir.path().join("ragged.csv");
    std::fs::write(&ragged, "1,2\n3,4\n5\n").unwrap();
    let out = codcov(&["test", "--x", ragged.to_str().unwrap(), "--px", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let tiny = dir.path().join("tiny.csv");
    write_sample(&tiny, 5, false);
    let out = codcov(&["test", "--x", tiny.to_str().unwrap(), "--px", "2", "--header"]);
    assert_eq!(out.status.code(), Some(2));

    let good = dir.path().join("good.csv");
    write_sample(&good, 20, false);
    let out = codcov(&["test", "--x", good.to_str().unwrap(), "--px", "2", "--header", "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn critical_values_warm_cache_skips_spectral_solves() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cv.jsonl");
    let mut args = vec!["critical-values", "--p", "1,2", "--q", "2", "--json", "--cache", cache.to_str().unwrap()];
    args.extend(small_spectrum());
    let cold = codcov(&args);
    assert!(cold.status.success(), "{}", String::from_utf8_lossy(&cold.stderr));
    let cold: serde_json::Value = serde_json::from_slice(&cold.stdout).unwrap();
    assert_eq!(cold["rows"].as_array().unwrap().len(), 6);
    assert_eq!(cold["spectral_solves"], 1);
    let warm = codcov(&args);
    let warm: serde_json::Value = serde_json::from_slice(&warm.stdout).unwrap();
    assert_eq!(warm["spectral_solves"], 0);
    assert_eq!(warm["rows"], cold["rows"]);
    assert_eq!(std::fs::read_to_string(&cache).unwrap().lines().count(), 6);
}

#[test]
fn critical_values_cache_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("env.jsonl");
    let mut args = vec!["critical-values", "--p", "1", "--q", "1", "--alpha", "0.05"];
    args.extend(small_spectrum());
    let out = Command::new(env!("CARGO_BIN_EXE_codcov"))
        .args(&args)
        .env("CODCOV_CACHE", &cache)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(&cache).unwrap().lines().count(), 1);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("p,q,alpha,M_R,M_S,K,value,reference,deviation"));
}

#[test]
fn verify_reference_fails_on_coarse_grid() {
    // a 4 x 4 grid is far too coarse to meet a tight tolerance
    let out = codcov(&[
        "critical-values", "--p", "2", "--q", "2", "--alpha", "0.05", "--m-r", "4", "--m-s", "4",
        "--verify-reference", "--tolerance", "1e-6",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("deviate"));
}

#[test]
fn simulate_json_and_csv() {
    let mut args = vec![
        "simulate", "--example", "2b", "--n", "24", "--reps", "6", "--rho", "0,0.5", "--methods",
        "hallin-theoretical,dcov-permutation", "--seed", "3", "--json",
    ];
    args.extend(small_spectrum());
    let out = codcov(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["example"], "cauchy");
    assert_eq!(v["config"]["tau"], 0.5);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r["se"].is_number()));

    args.retain(|a| *a != "--json");
    let csv = codcov(&args);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().nth(1).unwrap().ends_with(",3"));

    let bad = codcov(&["simulate", "--example", "3a"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn bench_reports_slopes() {
    let out = codcov(&["bench", "--n", "20,40", "--reps", "1", "--json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    // both solvers reach the same optimum
    assert_eq!(rows[0]["total_cost"], rows[1]["total_cost"]);
    assert_eq!(v["slopes"].as_array().unwrap().len(), 2);
    assert!(v["gabow_tarjan_faster_at_largest_n"].is_boolean());
}
