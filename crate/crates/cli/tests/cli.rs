//! End-to-end checks of the command-line interface: artifact round trips,
//! exit codes, oracle agreement, and output determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

use modcirc_core::circuit::Circuit;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modcirc"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("modcirc-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn build_and2(m: u64, n: usize, name: &str) -> PathBuf {
    let path = scratch(name);
    let out = bin()
        .args([
            "build",
            "and2",
            "--m",
            &m.to_string(),
            "--n",
            &n.to_string(),
            "-o",
        ])
        .arg(&path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    path
}

#[test]
fn build_verify_round_trip() {
    let path = build_and2(6, 7, "and7.json");
    // the artifact is a loadable, serialization-stable circuit
    let text = std::fs::read_to_string(&path).unwrap();
    let c = Circuit::from_json(&text).unwrap();
    assert_eq!(Circuit::from_json(&c.to_json()).unwrap(), c);
    assert_eq!(c.arity, 7);

    let out = bin()
        .args(["verify", "and", "--circuit"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let rep = report(&out);
    assert_eq!(rep["results"]["pass"], Value::Bool(true));
    assert_eq!(rep["command"], "verify and");
    assert!(rep["elapsed_ms"].is_number());
    assert!(rep["version"].is_string());
}

#[test]
fn verify_modes_agree() {
    for (n, name) in [
        (4usize, "agree4.json"),
        (7, "agree7.json"),
        (10, "agree10.json"),
    ] {
        let path = build_and2(6, n, name);
        for mode in ["exhaustive", "weight", "sample"] {
            let out = bin()
                .args(["verify", "and", "--mode", mode, "--circuit"])
                .arg(&path)
                .output()
                .unwrap();
            assert!(out.status.success(), "n={n} mode={mode}");
        }
    }
}

#[test]
fn corrupted_circuit_fails_verification() {
    let path = build_and2(6, 5, "corrupt5.json");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut c = Circuit::from_json(&text).unwrap();
    // change the root accepting set: the all-ones input is now rejected
    let root = c.root.unwrap();
    for g in &mut c.gates {
        if g.id == root {
            g.kind = modcirc_core::circuit::GateKind::Mod { accept: [1].into() };
        }
    }
    let bad = scratch("corrupt5-bad.json");
    std::fs::write(&bad, c.to_json()).unwrap();
    for mode in ["exhaustive", "weight"] {
        let out = bin()
            .args(["verify", "and", "--mode", mode, "--circuit"])
            .arg(&bad)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(1), "mode={mode}");
        assert_eq!(report(&out)["results"]["pass"], Value::Bool(false));
    }
}

#[test]
fn prime_power_modulus_is_an_input_error() {
    let out = bin()
        .args(["build", "and2", "--m", "8", "--n", "4", "-o"])
        .arg(scratch("never.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported modulus"));
}

#[test]
fn export_is_deterministic() {
    let path = build_and2(6, 4, "export4.json");
    let run = || {
        bin()
            .args(["export", "dot", "--circuit"])
            .arg(&path)
            .output()
            .unwrap()
    };
    let first = run();
    let second = run();
    assert!(first.status.success());
    assert_eq!(
        first.stdout, second.stdout,
        "byte-identical output across runs"
    );
    let dot = String::from_utf8(first.stdout).unwrap();
    assert!(dot.contains("x_1"));
    assert!(dot.contains("MOD_6^{0}"));
    assert!(dot.contains('×'));
}

#[test]
fn export_rejects_garbage() {
    let path = scratch("garbage.json");
    std::fs::write(&path, "{\"not\": \"a circuit\"}").unwrap();
    let out = bin()
        .args(["export", "dot", "--circuit"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_reports() {
    let path = build_and2(6, 8, "analyze8.json");
    let out = bin()
        .args(["analyze", "supports", "--circuit"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let rep = report(&out);
    let max_sup = rep["results"]["max_support"].as_u64().unwrap();
    assert!(max_sup >= 1, "an AND circuit needs nonempty supports");
    assert_eq!(rep["results"]["undefined_supports"], 0);

    let out = bin()
        .args(["analyze", "period", "--circuit"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let rep = report(&out);
    assert_eq!(rep["results"]["root"]["minimal_period"], Value::Null);

    for what in ["symmetry", "rigidity", "orbits"] {
        let out = bin()
            .args(["analyze", what, "--circuit"])
            .arg(&path)
            .output()
            .unwrap();
        assert!(out.status.success(), "analyze {what}");
    }
}

#[test]
fn analyze_nested_symmetry() {
    let path = scratch("nested33.json");
    let out = bin()
        .args(["build", "and-nested", "--m", "6", "--blocks", "3,3", "-o"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(report(&out)["results"]["depth"], 4);

    let out = bin()
        .args(["analyze", "symmetry", "--blocks", "3,3", "--circuit"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(report(&out)["results"]["symmetric"], Value::Bool(true));
}

#[test]
fn bounds_values() {
    let out = bin()
        .args(["bounds", "--m", "6", "--n", "24"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let rep = report(&out);
    assert_eq!(rep["results"]["flat"]["k"], 2);
    assert_eq!(rep["results"]["flat"]["bound"], "276");

    let out = bin()
        .args(["bounds", "--m", "6", "--blocks", "24,2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let rep = report(&out);
    assert_eq!(rep["results"]["nested"]["k_max"], 24);
    assert_eq!(rep["results"]["nested"]["bound"], "276");
    assert_eq!(
        rep["results"]["nested"]["hypothesis_met"],
        Value::Bool(false)
    );
}

#[test]
fn build_tq_artifact() {
    let path = scratch("tq.json");
    let out = bin()
        .args([
            "build", "tq", "--p", "3", "--q", "2", "--nu", "1", "--n", "6", "-o",
        ])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let rep = report(&out);
    assert_eq!(rep["results"]["symmetric_scheme"], Value::Bool(true));
    let text = std::fs::read_to_string(&path).unwrap();
    let e = modcirc_core::construct::ZpqExpression::from_json(&text).unwrap();
    assert_eq!((e.p, e.q, e.arity), (3, 2, 6));
}

#[test]
fn sweep_passes_and_is_deterministic() {
    let run = || {
        bin()
            .args(["sweep", "--count", "8", "--seed", "11"])
            .output()
            .unwrap()
    };
    let first = run();
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let second = run();
    let (a, b) = (report(&first), report(&second));
    assert_eq!(
        a["results"], b["results"],
        "identical inputs and seed give identical results"
    );
    assert_eq!(a["results"]["pass"], Value::Bool(true));
}

#[test]
fn exhaustive_cap_env_override() {
    let path = build_and2(6, 5, "cap5.json");
    let out = bin()
        .env("MODCIRC_MAX_N", "4")
        .args(["verify", "and", "--circuit"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("too large"));
}
