use std::path::Path;
use std::process::{Command, Output};
use std::sync::OnceLock;

fn cache() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| tempfile::tempdir().unwrap()).path()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twistmoment"))
        .env_remove("TWISTMOMENT_CACHE_DIR")
        .arg("--cache-dir")
        .arg(cache())
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn tau_first_values() {
    let o = run(&["tau", "--to", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,tau,lambda");
    assert!(lines[2].starts_with("2,-24,"));
    assert!(lines[3].starts_with("3,252,"));
}

#[test]
fn gauss_closed_and_brute() {
    let o = run(&["gauss", "--k", "-3", "--n", "45", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let row = &v[0];
    assert_eq!(row["coeff"], "3");
    assert_eq!(row["radicand"], 5);
    let diff = row["value"].as_f64().unwrap() - row["brute_re"].as_f64().unwrap();
    assert!(diff.abs() < 1e-10);
}

#[test]
fn constants_json_has_estimates() {
    let o = run(&["constants", "--prime-cutoff", "100000", "--smoothing-y", "500", "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let c = &v[0];
    for key in ["l1_sym2", "l1_sym2_error", "h2_00", "h2_00_error", "c_f", "tail_estimate"] {
        assert!(c[key].as_f64().unwrap().is_finite(), "{key}");
    }
    assert_eq!(c["prime_cutoff"], 100_000);
}

#[test]
fn smoothed_moment_report_row() {
    let o = run(&["moments", "--x", "10000", "--k", "2", "--smoothed", "--smoothing-y", "500", "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let r = &v.as_array().unwrap()[0];
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert!(r["smoothed_sum"].as_f64().unwrap() > 0.0);
    assert!(r["ratio"].as_f64().unwrap() > 0.5);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(r["tolerance_met"], true);
    assert!(r["target"].as_str().unwrap().contains("log X"));
}

#[test]
fn output_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for threads in ["1", "4"] {
        for format in ["csv", "json"] {
            let path = dir.path().join(format!("m{threads}.{format}"));
            let o = run(&[
                "moments", "--x", "3000", "6000", "--k", "1", "2", "--smoothing-y", "500", "--threads", threads,
                "--format", format, "--output", path.to_str().unwrap(),
            ]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            files.push(std::fs::read(&path).unwrap());
        }
    }
    assert_eq!(files[0], files[2]);
    assert_eq!(files[1], files[3]);
}

#[test]
fn config_errors_exit_two() {
    assert_eq!(run(&["moments", "--x", "2e6"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "nonexistent"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["lvalue", "--d", "9"]).status.code(), Some(2));
}

#[test]
fn moments_reject_weight_not_divisible_by_four() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("weight10.csv");
    let mut text = String::from("10,2000\n");
    for n in 1..=2000 {
        text.push_str(&format!("{n},{}\n", if n == 1 { 1 } else { 0 }));
    }
    std::fs::write(&path, text).unwrap();
    let o = run(&["--coefficients", path.to_str().unwrap(), "moments", "--x", "20", "--k", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("divisible by 4"));
}

#[test]
fn verify_all_passes() {
    let o = run(&["verify", "all", "--tol", "1e-6"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1 + 8);
    assert!(text.lines().skip(1).all(|l| l.contains(",true,")));
}
