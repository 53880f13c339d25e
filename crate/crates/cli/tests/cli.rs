//! Drives the `qres` binary end to end.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qres(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qres"))
        .args(args)
        .env_remove("QRES_SEED")
        .output()
        .expect("binary runs")
}

fn example(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn simulate_then_witness_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.json");
    let o = qres(&["simulate", "--config", &example("coherence-qubit.json"), "--format", "json", "--out", table.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let o = qres(&["witness", "--table", table.to_str().unwrap(), "--witness", "coherence", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["value"].as_f64().unwrap() - (3.0 + 2f64.sqrt())).abs() < 1e-9);
    assert_eq!(v["free_bound"].as_f64().unwrap(), 4.0);
    assert_eq!(v["verdict"], "VIOLATED");
}

#[test]
fn bundled_examples_give_expected_verdicts() {
    let cases = [
        ("coherence-qubit.json", "VIOLATED"),
        ("imaginarity-qubit.json", "VIOLATED"),
        ("magic-qubit.json", "VIOLATED"),
        ("purity-d2.json", "VIOLATED"),
        ("purity-d3.json", "VIOLATED"),
        ("mixed-d2.json", "NOT_VIOLATED"),
        ("qrac-d2.json", "VIOLATED"),
        ("qrac-d3.json", "VIOLATED"),
        ("qrac-d4.json", "VIOLATED"),
    ];
    for (file, want) in cases {
        let o = qres(&["witness", "--config", &example(file), "--format", "json"]);
        assert!(o.status.success(), "{file}: {}", stderr(&o));
        let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["verdict"], want, "{file}");
    }
}

#[test]
fn detect_verdicts_on_examples() {
    let cases = [
        ("rank-construction-d2.json", "RESOURCE_DETECTED"),
        ("rank-construction-d3.json", "RESOURCE_DETECTED"),
        ("tomographic-d2.json", "RESOURCE_DETECTED"),
        ("diagonal-d2.json", "CONSISTENT_WITH_FREE"),
    ];
    for (file, want) in cases {
        let o = qres(&["detect", "--config", &example(file), "--format", "json"]);
        assert!(o.status.success(), "{file}: {}", stderr(&o));
        let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["verdict"], want, "{file}");
    }
}

#[test]
fn stabilizer_detection_warns_about_the_rank_hypothesis() {
    let o = qres(&["detect", "--config", &example("magic-qubit.json")]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("warning: rank budget"), "{out}");
    assert!(out.contains("CONSISTENT_WITH_FREE"));
}

#[test]
fn csv_outputs_have_headers() {
    let o = qres(&["simulate", "--config", &example("coherence-qubit.json"), "--format", "csv"]);
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("y,x,j,p"));
    assert_eq!(lines.count(), 3 * 2 * 2);

    let o = qres(&["witness", "--config", &example("mixed-d2.json"), "--format", "csv"]);
    assert!(stdout(&o).starts_with("witness,value,free_bound,verdict\npurity,0.5,0.5,NOT_VIOLATED"));
}

#[test]
fn certify_is_deterministic_for_a_seed() {
    let args = ["certify", "--witness", "magic", "--free-set", "stabilizer", "--restarts", "8", "--seed", "17", "--format", "json"];
    let a = qres(&args);
    let b = qres(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert!((v["value"].as_f64().unwrap() - 4.325140770).abs() < 1e-6);
    assert_eq!(v["status"], "AGREES");
    assert_eq!(v["seed"], 17);
}

#[test]
fn certify_qudit_coherence_by_enumeration() {
    let o = qres(&["certify", "--witness", "coherence-d", "--free-set", "incoherent", "--dim", "3", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["value"].as_f64().unwrap() - 12.0).abs() < 1e-9);
    assert_eq!(v["method"], "permutation enumeration");
}

#[test]
fn generic_witness_from_a_reference_table() {
    let dir = tempfile::tempdir().unwrap();
    let reference = dir.path().join("ref.json");
    let o = qres(&["simulate", "--config", &example("rank-construction-d2.json"), "--format", "json", "--out", reference.to_str().unwrap()]);
    assert!(o.status.success());
    let o = qres(&[
        "witness", "--table", reference.to_str().unwrap(), "--witness", "generic",
        "--reference", reference.to_str().unwrap(), "--epsilon", "0.25", "--format", "json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verdict"], "VIOLATED");
}

#[test]
fn validation_errors_exit_with_one_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "bad.json", r#"{"dimension":2,"preparations":["zero","wat"],"instruments":["basis computational"]}"#);
    let o = qres(&["simulate", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("preparations[1]"), "{}", stderr(&o));

    let p = write(&dir, "extra.json", r#"{"dimension":2,"preparations":["zero"],"instruments":["basis z"],"bogus":1}"#);
    let o = qres(&["simulate", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"));

    let o = qres(&["witness", "--config", "/nonexistent/config.json", "--witness", "coherence"]);
    assert_eq!(o.status.code(), Some(1));

    let o = qres(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unphysical_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        &dir,
        "neg.json",
        r#"{"dimension":2,"preparations":[[[[1.2,0],[0,0]],[[0,0],[-0.2,0]]]],"instruments":["basis z"]}"#,
    );
    let o = qres(&["simulate", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("negative eigenvalue"));

    let p = write(
        &dir,
        "povm.json",
        r#"{"dimension":2,"preparations":["zero"],"instruments":[[[[[0.7,0],[0,0]],[[0,0],[0.7,0]]],[[[0.7,0],[0,0]],[[0,0],[0.7,0]]]]]}"#,
    );
    let o = qres(&["simulate", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        &dir,
        "nc.json",
        r#"{"dimension":2,"preparations":["zero"],"instruments":["basis z"],"optimizer":{"max_seesaw_rounds":1,"convergence_tol":1e-300}}"#,
    );
    let o = qres(&["certify", "--witness", "coherence", "--free-set", "incoherent", "--config", p.to_str().unwrap(), "--restarts", "3"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn help_and_list_succeed() {
    assert_eq!(qres(&["--help"]).status.code(), Some(0));
    let o = qres(&["list"]);
    assert!(o.status.success());
    for name in ["coherence", "imaginarity", "magic", "purity", "generic", "stabilizer", "maximally-mixed"] {
        assert!(stdout(&o).contains(name), "{name}");
    }
}
