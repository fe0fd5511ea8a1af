//! Black-box tests of the command-line interface: round trips, determinism,
//! and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_delpezzo"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn delpezzo")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn build_analyze_round_trip_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("m.json");
    let csv = dir.path().join("m.csv");
    for (fmt, out) in [("json", &json), ("csv", &csv)] {
        let o = run(&[
            "build",
            "--family",
            "deg5-2a1",
            "--q",
            "3",
            "--out",
            path_str(out),
            "--format",
            fmt,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a_json = run(&["analyze", "--input", path_str(&json)]);
    let a_csv = run(&["analyze", "--input", path_str(&csv), "--format", "csv"]);
    assert!(a_json.status.success());
    assert!(a_csv.status.success());
    // identical reports regardless of the storage format
    assert_eq!(a_json.stdout, a_csv.stdout);

    // and identical to the in-library analysis
    let report: serde_json::Value = serde_json::from_slice(&a_json.stdout).unwrap();
    let inst = delpezzo::families::build_instance(
        delpezzo::families::FamilyId::Deg52A1,
        3,
        &delpezzo::families::BuildOptions::default(),
    )
    .unwrap();
    let m = delpezzo::code::GeneratorMatrix::from_instance(&inst).unwrap();
    let lib = delpezzo::code::analyze(&m, &inst.expected, delpezzo::code::DEFAULT_BUDGET, 2)
        .unwrap();
    assert_eq!(report, serde_json::to_value(&lib).unwrap());
}

#[test]
fn build_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = run(&[
            "build",
            "--family",
            "deg4-a2",
            "--q",
            "3",
            "--out",
            path_str(out),
        ]);
        assert!(o.status.success());
    }
    assert_eq!(
        std::fs::read(&a).unwrap(),
        std::fs::read(&b).unwrap(),
        "two builds with identical arguments must be byte-identical"
    );
}

#[test]
fn bad_requests_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    for args in [
        vec!["build", "--family", "deg9-e8", "--q", "3"],
        vec!["build", "--family", "deg6-a1", "--q", "2"], // excluded order
        vec!["build", "--family", "deg6-a1", "--q", "6"], // not a prime power
        vec!["build", "--family", "deg6-a1", "--q", "3", "--alpha", "1"],
    ] {
        let mut full = args.clone();
        full.extend(["--out", path_str(&out)]);
        let o = run(&full);
        assert_eq!(o.status.code(), Some(2), "args {args:?}");
    }
}

#[test]
fn malformed_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let o = run(&["analyze", "--input", path_str(&bad)]);
    assert_eq!(o.status.code(), Some(3));

    // structurally valid JSON with inconsistent shape
    let shape = dir.path().join("shape.json");
    let built = run(&[
        "build",
        "--family",
        "deg3-3a2",
        "--q",
        "2",
        "--out",
        path_str(&shape),
    ]);
    assert!(built.status.success());
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&shape).unwrap()).unwrap();
    v["rows"][0][0] = serde_json::json!(99);
    std::fs::write(&shape, v.to_string()).unwrap();
    let o = run(&["analyze", "--input", path_str(&shape)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn budget_overrun_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    let built = run(&[
        "build",
        "--family",
        "deg6-a1",
        "--q",
        "4",
        "--out",
        path_str(&out),
    ]);
    assert!(built.status.success());
    let o = run(&["analyze", "--input", path_str(&out), "--budget", "10"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn tampered_matrix_fails_analysis_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    let built = run(&[
        "build",
        "--family",
        "deg4-d5",
        "--q",
        "3",
        "--out",
        path_str(&out),
    ]);
    assert!(built.status.success());
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    // zero out a row: rank check must fail
    let n = v["n"].as_u64().unwrap() as usize;
    v["rows"][0] = serde_json::json!(vec![0u64; n]);
    std::fs::write(&out, v.to_string()).unwrap();
    let o = run(&["analyze", "--input", path_str(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_grid_reports_pass_and_skip() {
    let o = run(&[
        "verify",
        "--families",
        "deg6-a1,deg4-d5",
        "--q",
        "2,3,4",
        "--jobs",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].contains("deg6-a1") && lines[0].contains("SKIP"));
    assert_eq!(text.matches("PASS").count(), 5);
}

#[test]
fn classgroup_reports_all_families() {
    let o = run(&["classgroup"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let obj = v.as_object().unwrap();
    assert_eq!(obj.len(), 8);
    for (name, report) in obj {
        assert_eq!(
            report["matches_expected"],
            serde_json::json!(true),
            "{name}"
        );
    }
    assert_eq!(v["deg4-d5"]["embedding_factors"], serde_json::json!([4]));
    assert_eq!(v["deg3-3a2"]["weil_torsion"], serde_json::json!([3]));
}
