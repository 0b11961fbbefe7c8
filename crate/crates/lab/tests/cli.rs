use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> (i32, Value, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_aleph-lab"))
        .args(args)
        .output()
        .expect("binary runs");
    let text = String::from_utf8(out.stdout).unwrap();
    let v = serde_json::from_str(&text).unwrap_or(Value::Null);
    (out.status.code().unwrap_or(-1), v, text)
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bezout_verify_passes() {
    let (code, v, _) = run(&["bezout", "verify", "--depth", "8", "--primes", "first:9"]);
    assert_eq!(code, 0);
    assert_eq!(v["schema"], "aleph-lab/1");
    assert_eq!(v["command"], "bezout verify");
    assert_eq!(v["outcome"], "pass");
}

#[test]
fn too_few_primes_is_a_validation_failure() {
    let (code, v, _) = run(&["bezout", "build", "--depth", "4", "--primes", "2,3"]);
    assert_eq!(code, 2);
    assert_eq!(v["outcome"], "fail");
}

#[test]
fn non_prefix_closed_tree_is_rejected() {
    let (code, v, _) = run(&["engine", "check", "--file", path(&data("bad.json"))]);
    assert_eq!(code, 2);
    let failed: Vec<&Value> = v["checks"].as_array().unwrap().iter().filter(|c| c["passed"] == false).collect();
    assert_eq!(failed[0]["name"], "inner tree");
    assert!(failed[0]["reproducer"].is_object());
}

#[test]
fn engine_file_checks() {
    let (code, v, _) = run(&["engine", "check", "--file", path(&data("np1.json")), "--truncation", "3"]);
    assert_eq!(code, 0, "{v}");
    let (code, v, _) = run(&["engine", "build", "--file", path(&data("np1.json"))]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["levels"].as_array().unwrap().len(), 6);
}

#[test]
fn torsionless_descriptor() {
    let (code, v, _) = run(&[
        "witness",
        "torsionless",
        "--engine",
        path(&data("np1.json")),
        "--element",
        path(&data("y.json")),
    ]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["level"], 2);
    assert_eq!(v["result"]["node"], serde_json::json!([1, 0]));
    assert_eq!(v["result"]["value"], "1");
}

#[test]
fn retraction_from_files() {
    let (code, v, _) = run(&[
        "witness",
        "retract",
        "--engine",
        path(&data("np1.json")),
        "--elements",
        path(&data("xs.json")),
    ]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["rank"], 3);
}

#[test]
fn random_suites_need_a_seed() {
    let (code, v, _) = run(&["witness", "torsionless"]);
    assert_eq!(code, 2);
    assert_eq!(v["checks"][0]["name"], "input");
}

#[test]
fn reports_are_reproducible() {
    let args = ["engine", "check", "--seed", "11", "--count", "3", "--truncation", "3"];
    let (c1, _, t1) = run(&args);
    let (c2, _, t2) = run(&args);
    assert_eq!(c1, 0);
    assert_eq!(c1, c2);
    assert_eq!(t1, t2);
    let (_, _, t3) = run(&["engine", "check", "--seed", "12", "--count", "3", "--truncation", "3"]);
    assert_ne!(t1, t3);
}

#[test]
fn obstruction_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("cert.json");
    let out = dir.path().join("report.json");
    let (code, v, text) = run(&["obstruct", "surjection", "--source", "1", "--target", "2", "--json-out", path(&out)]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(std::fs::read_to_string(&out).unwrap(), text);
    std::fs::write(&cert, serde_json::to_string(&v["result"]).unwrap()).unwrap();
    let (code, _, _) = run(&["obstruct", "verify", "--cert", path(&cert)]);
    assert_eq!(code, 0);

    let mut bad = v["result"].clone();
    bad["exceptions"].as_array_mut().unwrap().push(serde_json::json!(101));
    std::fs::write(&cert, serde_json::to_string(&bad).unwrap()).unwrap();
    let (code, _, _) = run(&["obstruct", "verify", "--cert", path(&cert)]);
    assert_eq!(code, 2);

    let (code, v, _) = run(&["obstruct", "product", "--index", "3"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["kind"], "product");
}

#[test]
fn pathology_commands() {
    let (code, v, _) = run(&["pontryagin", "check", "--primes", "3,5,7"]);
    assert_eq!(code, 0, "{v}");
    let (code, v, _) = run(&["mixed", "check", "--primes", "3,5"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["summands"], serde_json::json!([7, 15, 31]));
    let (code, _, _) = run(&["mixed", "build", "--primes", "3,5", "--base-summands", "0"]);
    assert_eq!(code, 2);
    let (code, v, _) = run(&["family", "almost-disjoint", "--count", "3"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["sets"].as_array().unwrap().len(), 3);
}

#[test]
fn sinfty_commands() {
    let (code, v, _) = run(&[
        "sinfty",
        "encode",
        "--engine",
        path(&data("np1.json")),
        "--element",
        path(&data("y.json")),
        "--bound",
        "100",
    ]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["bound"], 100);
    let (code, v, _) = run(&["sinfty", "verify", "--seed", "3", "--count", "5", "--bound", "500"]);
    assert_eq!(code, 0, "{v}");
}

#[test]
fn reduce_from_tree() {
    let (code, v, _) = run(&[
        "reduce",
        "from-tree",
        "--tree",
        path(&data("full2.json")),
        "--branch",
        path(&data("ones.json")),
        "--depth",
        "5",
    ]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["homogeneity"]["divisors"].as_array().unwrap().len(), 5);
    let (code, v, _) = run(&["reduce", "from-tree", "--tree", path(&data("fan.json")), "--branch", path(&data("ones.json"))]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["homogeneity"]["promise_broken"]["level"], 1);
}
