use std::path::{Path, PathBuf};

use fairdiv::checkers::{check_efm, check_efx};
use fairdiv::cli::{load_instance, run};
use fairdiv::model::IntegralAllocation;
use serde_json::Value;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn fairdiv(args: &[&str]) -> Out {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(std::iter::once("fairdiv").chain(args.iter().copied()), &mut out, &mut err);
    Out { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn json(s: &str) -> Value {
    serde_json::from_str(s.lines().last().unwrap()).unwrap()
}

const TWO: &str = r#"{"agents":2,"indivisible":["a","b","c"],"divisible":[],"utilities":[[3,1,1],[1,1,3]]}"#;
const THREE: &str = r#"{"agents":3,"indivisible":["a","b","c","d","e"],"divisible":["cake"],
    "utilities":[[2,1,1,2,1,3],[1,2,2,1,1,1],[2,2,1,1,1,0]]}"#;
const TRI: &str = r#"{"agents":2,"indivisible":["a","b","c"],"divisible":[],"utilities":[[1,2,3],[1,2,3]]}"#;

#[test]
fn two_agent_solve_gives_small_lottery() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "two.json", TWO);
    let o = fairdiv(&["solve", "--instance", inst.to_str().unwrap(), "--algo", "two-efx", "--seed", "1"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let v = json(&o.stdout);
    let lottery = v["lottery"].as_array().unwrap();
    assert!((1..=2).contains(&lottery.len()));
    let alloc: IntegralAllocation = serde_json::from_value(v["allocation"].clone()).unwrap();
    assert!(check_efx(&load_instance(&inst).unwrap(), &alloc).unwrap().holds);
}

#[test]
fn efx_fpo_rejects_three_values() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "tri.json", TRI);
    let o = fairdiv(&["solve", "--instance", inst.to_str().unwrap(), "--algo", "efx-fpo"]);
    assert_eq!(o.code, 3);
    assert!(o.stderr.contains("bi-valued"), "{}", o.stderr);
    assert!(o.stdout.is_empty());
}

#[test]
fn enumerate_lists_every_order() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "three.json", THREE);
    let o = fairdiv(&["solve", "--instance", inst.to_str().unwrap(), "--algo", "prop-efm", "--enumerate", "--trace"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let lines: Vec<&str> = o.stdout.lines().collect();
    assert!(lines.len() >= 2);
    assert!(lines[..lines.len() - 1].iter().all(|l| serde_json::from_str::<Value>(l).unwrap()["event"].is_string()));
    let v = json(&o.stdout);
    assert_eq!(v["lottery"].as_array().unwrap().len(), 6);
    assert_eq!(v["permutations"].as_array().unwrap().len(), 6);
    assert!(v["lottery"].as_array().unwrap().iter().all(|e| e["p"] == "1/6"));
    let inst = load_instance(&inst).unwrap();
    for e in v["lottery"].as_array().unwrap() {
        let a: IntegralAllocation = serde_json::from_value(e["allocation"].clone()).unwrap();
        assert!(check_efm(&inst, &a).unwrap().holds);
    }
}

#[test]
fn explicit_permutation_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "three.json", THREE);
    let path = inst.to_str().unwrap();
    let o = fairdiv(&["solve", "--instance", path, "--algo", "prop-efm", "--perm", "2,0,1"]);
    assert_eq!(fairdiv(&["solve", "--instance", path, "--algo", "efx-fpo"]).code, 3);
    assert_eq!(json(&o.stdout)["permutation"], serde_json::json!([2, 0, 1]));
    assert_eq!(fairdiv(&["solve", "--instance", path, "--algo", "prop-efm", "--perm", "0,0,1"]).code, 2);
}

#[test]
fn check_reports_holds_and_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "two.json", TWO);
    let good = write(dir.path(), "good.json", r#"{"bundles":[{"indivisible":[0,1],"divisible":[]},{"indivisible":[2],"divisible":[]}]}"#);
    let bad = write(dir.path(), "bad.json", r#"{"bundles":[{"indivisible":[2],"divisible":[]},{"indivisible":[0,1],"divisible":[]}]}"#);
    let (i, g, b) = (inst.to_str().unwrap(), good.to_str().unwrap(), bad.to_str().unwrap());
    let o = fairdiv(&["check", "--instance", i, "--allocation", g, "--property", "efx"]);
    assert_eq!(o.code, 0);
    assert_eq!(o.stdout, "{\"holds\":true,\"witness\":null}\n");
    let o = fairdiv(&["check", "--instance", i, "--allocation", b, "--property", "fpo"]);
    assert_eq!(o.code, 1);
    assert_eq!(json(&o.stdout)["witness"]["kind"], "dominated");
}

#[test]
fn check_accepts_solver_output() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "three.json", THREE);
    let out = dir.path().join("result.json");
    let (i, r) = (inst.to_str().unwrap(), out.to_str().unwrap());
    let o = fairdiv(&["solve", "--instance", i, "--algo", "prop-efm", "--seed", "4", "--out", r]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.is_empty());
    assert_eq!(fairdiv(&["check", "--instance", i, "--allocation", r, "--property", "efm"]).code, 0);
}

#[test]
fn generator_is_deterministic_and_respects_density() {
    let args = ["gen", "--family", "bi-valued", "--n", "3", "--m", "4", "--seed", "8"];
    assert_eq!(fairdiv(&args).stdout, fairdiv(&args).stdout);
    let all_high = json(&fairdiv(&["gen", "--family", "bi-valued", "--n", "2", "--m", "3", "--density", "1"]).stdout);
    assert!(all_high["utilities"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).all(|x| x == "2/1"));
    let zeros = json(&fairdiv(&["gen", "--family", "binary", "--n", "2", "--m", "3", "--density", "0"]).stdout);
    assert!(zeros["utilities"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).all(|x| x == "0/1"));
    let mixed = json(&fairdiv(&["gen", "--family", "mixed", "--n", "2", "--m", "3", "--divisible", "2"]).stdout);
    assert_eq!(mixed["divisible"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_arguments_exit_two() {
    assert_eq!(fairdiv(&["gen", "--family", "bi-valued", "--n", "2", "--m", "3", "--density", "1.5"]).code, 2);
    assert_eq!(fairdiv(&["gen", "--family", "nope", "--n", "2", "--m", "3"]).code, 2);
    assert_eq!(fairdiv(&["solve"]).code, 2);
    assert_eq!(fairdiv(&["--help"]).code, 0);
    let dir = tempfile::tempdir().unwrap();
    let broken = write(dir.path(), "broken.json", "{\"agents\":2");
    assert_eq!(fairdiv(&["solve", "--instance", broken.to_str().unwrap(), "--algo", "two-efx"]).code, 2);
}

#[test]
fn generated_instances_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let text = fairdiv(&["gen", "--family", "mixed", "--n", "3", "--m", "6", "--seed", "2"]).stdout;
    let path = write(dir.path(), "inst.json", &text);
    let inst = load_instance(&path).unwrap();
    assert_eq!(fairdiv::model::to_canonical_json(&inst.to_raw()), text);
}

#[test]
fn verify_exact_and_sampled() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "three.json", THREE);
    let i = inst.to_str().unwrap();
    let o = fairdiv(&["verify", "--instance", i, "--algo", "prop-efm", "--property", "prop"]);
    assert_eq!(o.code, 0, "{}", o.stdout);
    let v = json(&o.stdout);
    assert_eq!(v["report"]["mode"]["kind"], "exact");
    assert_eq!(v["guarantee"]["holds"], true);
    let o = fairdiv(&["verify", "--instance", i, "--algo", "prop-efm", "--property", "prop", "--mode", "sample", "--trials", "50"]);
    assert_eq!(json(&o.stdout)["report"]["mode"], serde_json::json!({"kind": "sampled", "trials": 50}));
    assert_eq!(fairdiv(&["verify", "--instance", i, "--algo", "prop-efm", "--property", "efx"]).code, 2);
}

#[test]
fn pipeline_from_generator_to_checker() {
    let dir = tempfile::tempdir().unwrap();
    let text = fairdiv(&["gen", "--family", "bi-valued", "--n", "4", "--m", "9", "--seed", "21", "--a", "1", "--b", "4"]).stdout;
    let inst = write(dir.path(), "inst.json", &text);
    let out = dir.path().join("out.json");
    let (i, r) = (inst.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(fairdiv(&["solve", "--instance", i, "--algo", "efx-fpo", "--seed", "3", "--certificate", "--out", r]).code, 0);
    for property in ["efx", "fpo", "ef1"] {
        assert_eq!(fairdiv(&["check", "--instance", i, "--allocation", r, "--property", property]).code, 0, "{property}");
    }
}

#[test]
fn binary_exit_codes() {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_fairdiv")).args(["gen", "--family", "uniform", "--n", "2", "--m", "2"]).output().unwrap();
    assert!(out.status.success());
    assert!(out.stdout.ends_with(b"\n"));
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_fairdiv")).args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
