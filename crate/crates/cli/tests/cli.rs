use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_glass-entropy");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn network() -> String {
    fixture("example_network.json").display().to_string()
}

fn trap_file() -> String {
    fixture("example_trap.json").display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("GLASS_ENTROPY_THREADS").output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

/// Two-variable negative feedback loop with the given decay rates.
fn oscillator(lambda: [&str; 2]) -> String {
    format!(
        r#"{{"n": 2, "lambda": ["{}", "{}"],
            "gamma": {{"00": ["1", "-1"], "01": ["-1", "-1"], "10": ["1", "1"], "11": ["-1", "1"]}}}}"#,
        lambda[0], lambda[1]
    )
}

#[test]
fn report_reproduces_the_example_bounds() {
    let doc = json(&["report", "--spec", &network(), "--edge", "1111>1110", "--max-cycle-len", "12", "--k", "2"]);
    let e = &doc["result"]["entropies"];
    assert!((e["TG"].as_f64().unwrap() - 0.873).abs() < 1e-3);
    assert!((e["TG_r"].as_f64().unwrap() - 0.224).abs() < 1e-3);
    assert!((e["TG_r(1)"].as_f64().unwrap() - 0.111).abs() < 1e-3);
    assert!((e["TG_r(2)"].as_f64().unwrap() - 0.0813).abs() < 5e-4);
    assert_eq!(doc["result"]["complete"], true);
    let prov = &doc["provenance"];
    assert_eq!(prov["tool"], "glass-entropy");
    assert_eq!(prov["spec_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(prov["parameters"]["edge"], "1111>1110");
}

#[test]
fn all_terminal_network_has_self_loops_and_zero_entropy() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "still.json", r#"{"n": 1, "lambda": ["1"], "gamma": {"0": ["-1"], "1": ["1"]}}"#);
    let dot = ok(&["tg", "--spec", &spec]);
    assert!(dot.contains("// entropy=0.000000"));
    assert!(dot.contains("v0 -> v0;") && dot.contains("v1 -> v1;"));
    assert!(dot.contains("// spec_sha256="));
    let doc = json(&["tg", "--spec", &spec, "--format", "json"]);
    assert_eq!(doc["result"]["entropy"], 0.0);
    assert_eq!(doc["result"]["terminal"], serde_json::json!(["0", "1"]));
}

#[test]
fn identical_configs_give_identical_bytes() {
    let args = ["refine", "--spec", &network(), "--trap", &trap_file(), "--k", "3", "--forbid", "BAAB"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
    let sim = ["simulate", "--spec", &network(), "--trap", &trap_file(), "--steps", "5000", "--seed", "7"];
    let a = run(&sim).stdout;
    assert_eq!(a, run(&sim).stdout);
    let other_seed = ["simulate", "--spec", &network(), "--trap", &trap_file(), "--steps", "5000", "--seed", "8"];
    assert_ne!(a, run(&other_seed).stdout);
    let threads = ["cones", "--spec", &network(), "--edge", "1111>1110", "--max-cycle-len", "10"];
    let single = Command::new(BIN).args(threads).env("GLASS_ENTROPY_THREADS", "1").output().unwrap();
    assert_eq!(single.stdout, run(&threads).stdout);
}

#[test]
fn cycles_and_cones_of_the_example() {
    let doc = json(&["cycles", "--spec", &network(), "--edge", "1111>1110", "--max-cycle-len", "12"]);
    assert_eq!(doc["result"]["count"], 155);
    let csv = ok(&["cycles", "--spec", &network(), "--edge", "1111>1110", "--max-cycle-len", "8", "--format", "csv"]);
    assert!(csv.contains("label,length,boxes\n"));
    assert!(csv.contains("1110 1010 0010 0000 0100 0110 0111 1111"));
    let cones = json(&["cones", "--spec", &network(), "--trap", &trap_file()]);
    let a = &cones["result"]["cycles"][0];
    assert_eq!(a["label"], "A");
    assert_eq!(a["cone"]["empty"], false);
    assert_eq!(a["map"]["b"].as_array().unwrap().len(), 3);
}

#[test]
fn trap_search_and_explicit_cycles() {
    let doc = json(&["trap", "--spec", &network(), "--edge", "1111>1110"]);
    assert_eq!(doc["result"]["searched"], true);
    assert_eq!(doc["result"]["trap"]["verified"], true);
    assert_eq!(doc["result"]["trap"]["active"].as_array().unwrap().len(), 2);
    let b = "B=1110,1010,0010,0011,0001,0000,0100,0101,0111,1111";
    let a = "A=1110,1010,0010,0000,0100,0110,0111,1111";
    let doc = json(&["trap", "--spec", &network(), "--edge", "1111>1110", "--cycle", a, "--cycle", b]);
    assert_eq!(doc["result"]["searched"], false);
    assert_eq!(doc["result"]["trap"]["active"], serde_json::json!(["A", "B"]));
}

#[test]
fn unverified_trap_exits_three_after_writing_the_report() {
    let a = "A=1110,1010,0010,0000,0100,0110,0111,1111";
    let out = run(&["trap", "--spec", &network(), "--edge", "1111>1110", "--cycle", a]);
    assert_eq!(out.status.code(), Some(3));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["result"]["trap"]["verified"], false);
    assert!(String::from_utf8_lossy(&out.stderr).contains("not verified"));
    let refine = run(&["refine", "--spec", &network(), "--edge", "1111>1110", "--cycle", a]);
    assert_eq!(refine.status.code(), Some(3));
}

#[test]
fn invalid_networks_exit_two() {
    let dir = TempDir::new().unwrap();
    let garbage = write(&dir, "bad.json", "{\"n\": 2}");
    assert_eq!(run(&["tg", "--spec", &garbage]).status.code(), Some(2));
    let black = write(&dir, "black.json", r#"{"n": 1, "lambda": ["1"], "gamma": {"0": ["1"], "1": ["-1"]}}"#);
    let out = run(&["validate", "--spec", &black]);
    assert_eq!(out.status.code(), Some(2));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["result"]["passes"], false);
    assert_eq!(run(&["trap", "--spec", &black, "--edge", "0>1"]).status.code(), Some(2));
    let report = run(&["report", "--spec", &black, "--edge", "0>1"]);
    assert_eq!(report.status.code(), Some(2));
    let doc: Value = serde_json::from_slice(&report.stdout).unwrap();
    assert_eq!(doc["result"]["complete"], false);
    assert_eq!(doc["result"]["stages"][0]["stage"], "validate");
}

#[test]
fn unequal_decay_is_a_cone_error() {
    let dir = TempDir::new().unwrap();
    let equal = write(&dir, "equal.json", &oscillator(["1", "1"]));
    let doc = json(&["refine", "--spec", &equal, "--edge", "01>00", "--k", "3"]);
    assert!(doc["result"]["levels"].as_array().unwrap().iter().all(|l| l["entropy"] == 0.0));
    let unequal = write(&dir, "unequal.json", &oscillator(["1", "2"]));
    assert_eq!(run(&["cones", "--spec", &unequal, "--edge", "01>00"]).status.code(), Some(4));
    assert_eq!(run(&["report", "--spec", &unequal, "--edge", "01>00"]).status.code(), Some(4));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["tg", "--spec", &network(), "--format", "csv", "--format", "dot"]).status.code(), Some(1));
    assert_eq!(run(&["tg", "--block-len", "3", "--block-range", "1:4"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["validate", "--spec", &network(), "--format", "dot"]).status.code(), Some(1));
    assert_eq!(run(&["cycles", "--spec", &network(), "--edge", "1110>1111"]).status.code(), Some(1));
    assert_eq!(run(&["cycles", "--spec", &network()]).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--spec", &network(), "--trap", &trap_file(), "--format", "u16"]).status.code(), Some(1));
}

#[test]
fn simulate_blocks_and_fit_chain() {
    let dir = TempDir::new().unwrap();
    let bin = dir.path().join("run.u16").display().to_string();
    let common = ["--spec", &network(), "--trap", &trap_file(), "--steps", "200000", "--seed", "1"];
    ok(&[&["simulate", "--format", "u16", "--out", &bin][..], &common].concat());
    assert_eq!(std::fs::metadata(&bin).unwrap().len(), 400_000);
    let side: Value = serde_json::from_str(&std::fs::read_to_string(format!("{bin}.json")).unwrap()).unwrap();
    assert_eq!(side["provenance"]["seed"], 1);

    let text = write(&dir, "run.txt", &ok(&[&["simulate"][..], &common].concat()));
    let from_bin = ok(&["blocks", "--spec", &network(), "--input", &bin, "--block-range", "1:40"]);
    let from_text = ok(&["blocks", "--input", &text, "--block-range", "1:40"]);
    let body = |s: &str| s.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&from_bin), body(&from_text));
    let direct = ok(&[&["blocks", "--block-range", "1:40"][..], &common].concat());
    assert_eq!(body(&direct), body(&from_bin));
    // Only the 11 boxes of A and B are visited.
    assert!(body(&direct).starts_with("n,count\n1,11\n"));

    let counts = write(&dir, "counts.csv", &from_bin);
    let fit = json(&["fit", "--counts", &counts, "--fit-range", "10:40"]);
    let fits = fit["result"]["fits"].as_array().unwrap();
    assert_eq!(fits.len(), 3);
    assert_eq!(fits[2]["result"]["n_range"], serde_json::json!([10, 40]));
    let slope = fits[2]["result"]["slope"].as_f64().unwrap();
    assert!(slope > 0.0 && slope < 0.2, "slope {slope}");
}

#[test]
fn refined_graph_as_dot() {
    let dot = ok(&["refine", "--spec", &network(), "--trap", &trap_file(), "--k", "2", "--format", "dot"]);
    assert!(dot.contains("digraph \"TG_r(2)\""));
    assert!(dot.contains("0100_AB"));
    assert!(dot.contains("// entropy=0.081268"));
}

#[test]
fn fit_of_a_ten_million_step_run() {
    let doc = json(&[
        "fit", "--spec", &network(), "--trap", &trap_file(), "--steps", "10000000", "--block-range", "1:120",
        "--fit-range", "20:80", "--threads", "1",
    ]);
    let slope = doc["result"]["fits"][2]["result"]["slope"].as_f64().unwrap();
    assert!((slope - 0.067).abs() < 0.01, "slope {slope}");
}
