//! End-to-end tests of the command-line binary: exit-code contract,
//! report determinism on disk, and tensor dumps.

use std::path::PathBuf;
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cartan-lab"))
}

fn temp_path(name: &str) -> PathBuf {
    let mut path = std::env::temp_dir();
    path.push(format!("cartan-lab-test-{}-{name}", std::process::id()));
    path
}

fn run_ok(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn passing_run_exits_zero() {
    let output = binary()
        .args([
            "--preset",
            "euclidean",
            "--points",
            "10",
            "--suites",
            "base,kahler",
        ])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(0), "{}", run_ok(&output));
    assert!(run_ok(&output).contains("verdict almost_kahler: true"));
}

#[test]
fn parse_errors_exit_two_with_offset() {
    let output = binary()
        .args(["--k-expr", "p1+", "--points", "1"])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("byte 3"), "stderr: {stderr}");
}

#[test]
fn unknown_preset_exits_two() {
    let output = binary()
        .args(["--preset", "torus"])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn failed_hard_checks_exit_one() {
    // squeeze every tolerance below rounding level: structural checks fail
    let output = binary()
        .args([
            "--preset",
            "euclidean",
            "--points",
            "5",
            "--suites",
            "kahler",
        ])
        .env("CARTAN_LAB_TOL_SCALE", "1e-9")
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("hard checks failed"), "stderr: {stderr}");
}

#[test]
fn reports_on_disk_are_deterministic() {
    let path_a = temp_path("report-a.json");
    let path_b = temp_path("report-b.json");
    for (path, threads) in [(&path_a, "1"), (&path_b, "4")] {
        let output = binary()
            .args([
                "--preset",
                "sphere-patch",
                "--points",
                "15",
                "--seed",
                "7",
                "--suites",
                "base,kahler",
                "--threads",
                threads,
                "--report",
            ])
            .arg(path)
            .output()
            .expect("binary runs");
        assert_eq!(output.status.code(), Some(0), "{}", run_ok(&output));
    }
    let strip = |text: String| -> String {
        text.lines()
            .filter(|l| !l.contains("timestamp_unix"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let a = strip(std::fs::read_to_string(&path_a).unwrap());
    let b = strip(std::fs::read_to_string(&path_b).unwrap());
    assert_eq!(a, b);
    let parsed: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(parsed["schema"], "cartan-lab/1");
    assert!(parsed["checks"].as_array().is_some_and(|c| !c.is_empty()));
    let _ = std::fs::remove_file(path_a);
    let _ = std::fs::remove_file(path_b);
}

#[test]
fn expected_negative_einstein_run_exits_zero() {
    let path = temp_path("randers.json");
    let output = binary()
        .args([
            "--preset",
            "randers",
            "--points",
            "10",
            "--seed",
            "42",
            "--suites",
            "einstein",
            "--report",
        ])
        .arg(&path)
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(0), "{}", run_ok(&output));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["verdicts"]["einstein_consistent"], false);
    assert_eq!(report["verdicts"]["riemannian_detected"], false);
    let _ = std::fs::remove_file(path);
}

#[test]
fn dump_emits_flat_tensors() {
    let output = binary()
        .args(["--preset", "euclidean", "--dump-at", "0,0;1,0"])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(0));
    let dump: serde_json::Value = serde_json::from_str(&run_ok(&output)).unwrap();
    let tensors = dump["tensors"].as_array().unwrap();
    let by_name = |name: &str| {
        tensors
            .iter()
            .find(|t| t["name"] == name)
            .unwrap_or_else(|| panic!("tensor {name} missing"))
    };
    assert_eq!(by_name("gU")["components"][0][0], serde_json::json!(1.0));
    assert_eq!(by_name("gU")["components"][0][1], serde_json::json!(0.0));
    assert_eq!(by_name("N")["components"][1][1], serde_json::json!(0.0));
    assert_eq!(by_name("J")["shape"], serde_json::json!([4, 4]));
    for name in ["gL", "C3", "H", "P", "R", "GL", "GU", "Ricci"] {
        by_name(name);
    }
}

#[test]
fn dump_of_randers_shows_cartan_torsion() {
    let output = binary()
        .args(["--preset", "randers", "--dump-at", "0,0;0,1"])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(0));
    let dump: serde_json::Value = serde_json::from_str(&run_ok(&output)).unwrap();
    let c3 = dump["tensors"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["name"] == "C3")
        .unwrap();
    let mut max = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                max = max.max(c3["components"][i][j][k].as_f64().unwrap().abs());
            }
        }
    }
    assert!(max > 1e-3, "C3 max {max}");
}

#[test]
fn domain_flag_controls_the_chart_box() {
    let output = binary()
        .args([
            "--k-expr",
            "sqrt(x2^2*(p1^2+p2^2))",
            "--domain",
            "x1:-1:1,x2:0.5:2",
            "--points",
            "5",
            "--suites",
            "base",
            "--c",
            "-1",
        ])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(0), "{}", run_ok(&output));
}
