use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trilinear")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn complex_multiplication_fits_with_three_components() {
    let out = run(&[
        "decompose",
        "fixture:complexmult",
        "--rank",
        "3",
        "--restarts",
        "8",
        "--tol",
        "1e-15",
        "--max-sweeps",
        "20000",
        "--seed",
        "1",
    ]);
    let r = report(&out);
    assert!(r["result"]["residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn generic_size_four_four_six_rank_six_is_unique() {
    let r = report(&run(&["check", "--dims", "4,4,6", "--rank", "6", "--generic"]));
    assert_eq!(r["result"]["verdict"], "unique");
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        vec!["decompose", "--rank", "2"],
        vec!["decompose", "does-not-exist.tnsr", "--rank", "2"],
        vec!["decompose", "fixture:nope", "--rank", "2"],
        vec!["decompose", "fixture:complexmult", "--rank", "2", "--constraint", "bogus"],
        vec!["decompose", "fixture:complexmult", "--rank", "2", "--constraint", "nonneg", "--constraint", "none"],
        vec!["check"],
        vec!["frobnicate"],
    ] {
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn numerical_failures_exit_with_one() {
    // 25 columns is past the exhaustive k-rank limit.
    let out = run(&["check", "--dims", "30,30,30", "--rank", "25"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_file_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.tnsr");
    std::fs::write(&path, "TNSR coo text\n3\n2 2 2\n1 1 1 1.0\n1 3 1 2.0\n").unwrap();
    let out = run(&["decompose", path.to_str().unwrap(), "--rank", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn runs_are_deterministic_under_seed() {
    let args =
        ["decompose", "fixture:strassen", "--rank", "7", "--restarts", "2", "--seed", "11", "--max-sweeps", "30"];
    let (mut a, mut b) = (report(&run(&args)), report(&run(&args)));
    for r in [&mut a, &mut b] {
        r["wall_time_s"] = Value::Null;
        r["result"]["fit"]["wall_time_s"] = Value::Null;
    }
    assert_eq!(a, b);
}

#[test]
fn synth_then_decompose_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for (storage, encoding) in [("dense", "text"), ("dense", "binary"), ("coo", "text")] {
        let path = dir.path().join(format!("{storage}-{encoding}.tnsr"));
        let p = path.to_str().unwrap();
        report(&run(&[
            "synth",
            "--dims",
            "5,4,3",
            "--rank",
            "2",
            "--seed",
            "4",
            "--write",
            p,
            "--storage",
            storage,
            "--encoding",
            encoding,
        ]));
        let r = report(&run(&["decompose", p, "--rank", "2", "--init", "gevd", "--tol", "1e-14"]));
        assert!(r["result"]["relative_residual"].as_f64().unwrap() < 1e-8, "{storage} {encoding}");
    }
}

#[test]
fn report_numbers_round_trip_exactly() {
    let out = run(&["crb", "--dims", "3,3,3", "--rank", "2", "--seed", "2", "--scale", "0.3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    let trace = v["result"]["bound"]["total_trace"].as_f64().unwrap();
    let again: Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(again["result"]["bound"]["total_trace"].as_f64().unwrap().to_bits(), trace.to_bits());
}

#[test]
fn report_can_be_written_to_a_file_and_read_back_as_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let fit = dir.path().join("fit.json");
    let out = run(&[
        "decompose",
        "fixture:strassen",
        "--rank",
        "7",
        "--seed",
        "2",
        "--max-sweeps",
        "20",
        "--out",
        fit.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let r = report(&run(&["check", "--model", fit.to_str().unwrap()]));
    assert_eq!(r["result"]["rank"], 7);
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_trilinear"))
        .env("TRILINEAR_THREADS", "many")
        .args(["check", "--dims", "2,2,2", "--rank", "2", "--generic"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
