//! End-to-end checks of the command-line surface: exit codes, exact-fraction
//! printing, CSV schema, form-file diagnostics.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_qcubic")
}

fn forms_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../forms")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn analyze_example3() {
    let form = forms_dir().join("example3.toml");
    let out = run(&["analyze", "--form", form.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("D = 36"), "{text}");
    assert!(
        text.contains("locally determined (sufficient condition): true"),
        "{text}"
    );
}

#[test]
fn analyze_six_squares_reports_witness() {
    let form = forms_dir().join("sum_of_6_squares.toml");
    let out = run(&["analyze", "--form", form.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(
        text.contains("locally determined (sufficient condition): false"),
        "{text}"
    );
    assert!(text.contains("kappa(2) = 6"), "{text}");
}

#[test]
fn analyze_json_format() {
    let form = forms_dir().join("e8.toml");
    let out = run(&[
        "analyze",
        "--form",
        form.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["level"], 1);
    assert_eq!(v["locally_determined"], true);
}

#[test]
fn density_prints_exact_fraction() {
    let form = forms_dir().join("sum_of_4_squares.toml");
    let out = run(&[
        "density",
        "--form",
        form.to_str().unwrap(),
        "--prime",
        "2",
        "--n",
        "2",
        "--oracle",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "3/2");
    assert!(text.contains("oracle: 3/2"));
}

#[test]
fn count_star_height_two() {
    let form = forms_dir().join("sum_of_4_squares.toml");
    let out = run(&["count", "--form", form.to_str().unwrap(), "--height", "2"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "64");

    let direct = run(&[
        "count",
        "--form",
        form.to_str().unwrap(),
        "--height",
        "2",
        "--mode",
        "direct",
    ]);
    assert_eq!(stdout(&direct).trim(), "64");
}

#[test]
fn malformed_form_file_is_a_usage_error() {
    let dir = std::env::temp_dir().join("qcubic-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.toml");
    std::fs::write(&path, "m = 4\ncoefficients = [ { i = 9, j = 1, c = 1 } ]\n").unwrap();
    let out = run(&["analyze", "--form", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("(9,1)"), "{err}");

    let missing = run(&["analyze", "--form", "/nonexistent/nowhere.toml"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn verify_calibration_suite_small_budget() {
    let out = run(&[
        "verify",
        "--suite",
        "calibration",
        "--n",
        "12",
        "--threads",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(
        text.contains("[calibration] vr-convention ... ok"),
        "{text}"
    );
    assert!(text.contains("density-vs-oracle/e8 ... ok"), "{text}");
}

#[test]
fn verify_unknown_suite_is_usage_error() {
    let out = run(&["verify", "--suite", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn resource_limit_is_exit_three() {
    let form = forms_dir().join("e8.toml");
    let out = run(&[
        "count",
        "--form",
        form.to_str().unwrap(),
        "--height",
        "100000",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn count_report_mode() {
    let form = forms_dir().join("example3.toml");
    let out = run(&[
        "count",
        "--form",
        form.to_str().unwrap(),
        "--height",
        "3",
        "--mode",
        "report",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("consistent=true"), "{text}");
}

#[test]
fn sweep_emits_csv_rows() {
    let form = forms_dir().join("example3.toml");
    let out = run(&[
        "sweep",
        "--form",
        form.to_str().unwrap(),
        "--height-range",
        "1:4:1",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "B,n_star,n_rational,n_projective,fit_c2"
    );
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "1");
    // invariant within the row: n_rational = 2 * n_projective
    let rational: i64 = first[2].parse().unwrap();
    let projective: i64 = first[3].parse().unwrap();
    assert_eq!(rational, 2 * projective);
}

#[test]
fn sweep_bad_range_is_usage_error() {
    let form = forms_dir().join("example3.toml");
    let out = run(&[
        "sweep",
        "--form",
        form.to_str().unwrap(),
        "--height-range",
        "5:1:1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn constants_report_lists_c_star() {
    let form = forms_dir().join("sum_of_4_squares.toml");
    let out = run(&[
        "constants",
        "--form",
        form.to_str().unwrap(),
        "--cutoff",
        "2000",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("C*_Q = 19.7392088"), "{text}");
    assert!(text.contains("frak_C_Q"), "{text}");
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join("qcubic-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("count.txt");
    let form = forms_dir().join("sum_of_4_squares.toml");
    let out = run(&[
        "count",
        "--form",
        form.to_str().unwrap(),
        "--height",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(&path).unwrap().trim(), "16");
}
