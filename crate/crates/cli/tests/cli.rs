use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn ssrkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssrkit"))
        .args(args)
        .env_remove("SSRKIT_BUDGET")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ssrkit-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn analyze_running_example() {
    let f = fixture("f_example.json");
    let out = ssrkit(&["analyze", f.to_str().unwrap(), "--s", "1", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    let c = &v["classification"];
    assert_eq!(c["J1"], serde_json::json!(["3"]));
    assert_eq!(c["J2"], serde_json::json!(["2"]));
    assert_eq!(c["J3"], serde_json::json!(["1"]));
    assert_eq!(v["eig"]["index"], -1);
    assert_eq!(v["eig"]["S"]["2"], serde_json::json!([1, 2, 3, 4]));
    assert_eq!(v["sparse"]["index"], 1);
}

#[test]
fn analyze_example_one() {
    let f = fixture("example1.json");
    let v = json_of(&ssrkit(&["analyze", f.to_str().unwrap(), "--json"]));
    assert_eq!(v["sparse"]["index"], 2);
    assert_eq!(v["sparse"]["witness"], serde_json::json!([1, 2, 3]));
    assert_eq!(v["eig"]["index"], -1);
}

#[test]
fn analyze_text_mentions_classes() {
    let f = fixture("f_example.json");
    let out = ssrkit(&["analyze", f.to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("J1 = {3}  J2 = {2}  J3 = {1}"), "{text}");
}

#[test]
fn empty_file_is_malformed() {
    let f = fixture("empty.json");
    let out = ssrkit(&["analyze", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn missing_file_and_bad_flags_exit_one() {
    assert_eq!(ssrkit(&["analyze", "/nonexistent/instance.json"]).status.code(), Some(1));
    assert_eq!(ssrkit(&["solve"]).status.code(), Some(1));
    assert_eq!(ssrkit(&["frobnicate"]).status.code(), Some(1));
    let f = fixture("f_example.json");
    assert_eq!(
        ssrkit(&["analyze", f.to_str().unwrap(), "--tol-rank", "-1"]).status.code(),
        Some(1)
    );
    assert_eq!(ssrkit(&["--help"]).status.code(), Some(0));
}

#[test]
fn unknown_keys_warn() {
    let path = tmp("unknown_key.json");
    std::fs::write(&path, r#"{"A": [[2]], "sensors": [{"id": 1, "C": [[1]]}], "note": "x"}"#).unwrap();
    let out = ssrkit(&["analyze", path.to_str().unwrap(), "--s", "0"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key \"note\""));
}

#[test]
fn decompose_running_example() {
    let f = fixture("f_example.json");
    let v = json_of(&ssrkit(&["decompose", f.to_str().unwrap()]));
    let o1 = &v["sensors"][0]["O"];
    assert_eq!(o1[3], serde_json::json!([10.0, 9.0, -7.0, 28.0]));
    let lam3 = |i: usize| v["sensors"][i]["blocks"][2]["O_restricted"].clone();
    assert_eq!(lam3(1)["zero"], true);
    assert_eq!(lam3(2)["zero"], true);
    assert!(lam3(0).is_array());
}

#[test]
fn solve_running_example_with_sensor_three_attacked() {
    let f = fixture("f_attacked.json");
    let out = ssrkit(&["solve", f.to_str().unwrap(), "--method", "decompose", "--s", "1", "--json"]);
    assert_eq!(out.status.code(), Some(2), "J1 is not empty");
    let v = json_of(&out);
    let st = &v["per_eigenvalue_status"];
    assert_eq!(st["1"], "brute_forced");
    assert_eq!(st["2"], "voted");
    assert_eq!(st["3"], "unreconstructable");
    assert_eq!(v["attack_set"], serde_json::json!([3]));
    assert_eq!(v["unique"], "ambiguous");
}

#[test]
fn solve_brute_attack_free() {
    let f = fixture("example1_clean.json");
    let out = ssrkit(&["solve", f.to_str().unwrap(), "--method", "brute", "--s", "1", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["attack_set"], serde_json::json!([]));
    assert_eq!(v["unique"], "unique");
    let x: Vec<f64> = serde_json::from_value(v["x"].clone()).unwrap();
    assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] + 1.0).abs() < 1e-9);
}

#[test]
fn solve_brute_single_attack() {
    let f = fixture("example1_attacked.json");
    let out = ssrkit(&["solve", f.to_str().unwrap(), "--method", "brute", "--exhaustive-unique", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["attack_set"], serde_json::json!([1]));
    assert_eq!(v["unique"], "unique");
}

#[test]
fn solve_without_measurements_is_malformed() {
    let f = fixture("f_example.json");
    assert_eq!(ssrkit(&["solve", f.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn vote_needs_enough_observers() {
    let f = fixture("f_attacked.json");
    assert_eq!(
        ssrkit(&["solve", f.to_str().unwrap(), "--method", "vote"]).status.code(),
        Some(2)
    );
}

#[test]
fn budget_env_exhaustion_exits_three() {
    let f = fixture("example1_attacked.json");
    let out = Command::new(env!("CARGO_BIN_EXE_ssrkit"))
        .args(["solve", f.to_str().unwrap(), "--method", "brute"])
        .env("SSRKIT_BUDGET", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let bad = Command::new(env!("CARGO_BIN_EXE_ssrkit"))
        .args(["analyze", f.to_str().unwrap()])
        .env("SSRKIT_BUDGET", "lots")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn analyze_budget_exhaustion_still_reports() {
    let f = fixture("example1.json");
    let out = Command::new(env!("CARGO_BIN_EXE_ssrkit"))
        .args(["analyze", f.to_str().unwrap(), "--json"])
        .env("SSRKIT_BUDGET", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let v = json_of(&out);
    assert_eq!(v["sparse"]["exhaustive"], false);
}

#[test]
fn simulate_then_solve_round_trip() {
    let f = fixture("example1.json");
    let emitted = tmp("simulated.json");
    let out = ssrkit(&[
        "simulate",
        f.to_str().unwrap(),
        "--x0",
        "0.25,-3",
        "--attack",
        "random",
        "--s",
        "1",
        "--seed",
        "11",
        "--emit",
        emitted.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&emitted).unwrap();
    let inst: Value = serde_json::from_str(&text).unwrap();
    let attacked = inst["scenario"]["attacked"].clone();
    assert_eq!(attacked.as_array().unwrap().len(), 1);

    let v = json_of(&ssrkit(&["solve", emitted.to_str().unwrap(), "--method", "brute", "--json"]));
    assert_eq!(v["attack_set"], attacked);
    let x: Vec<f64> = serde_json::from_value(v["x"].clone()).unwrap();
    assert!((x[0] - 0.25).abs() < 1e-9 && (x[1] + 3.0).abs() < 1e-9);
}

#[test]
fn simulate_emission_is_stable_under_reparse() {
    let f = fixture("f_example.json");
    let first = ssrkit(&["simulate", f.to_str().unwrap(), "--x0", "[0.1, 0.2, 0.3, 0.7]", "--noise", "0.01", "--seed", "5"]);
    assert_eq!(first.status.code(), Some(0));
    let inst: Value = serde_json::from_slice(&first.stdout).unwrap();
    let (parsed, warnings) = ssrkit::io::parse_instance(&String::from_utf8(first.stdout.clone()).unwrap()).unwrap();
    assert!(warnings.is_empty());
    assert_eq!(ssrkit::io::instance_to_json(&parsed), inst);
}

#[test]
fn stealth_simulation_on_running_example() {
    let f = fixture("f_example.json");
    let out = ssrkit(&["simulate", f.to_str().unwrap(), "--x0", "1,0,0,1", "--attack", "stealth", "--s", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["scenario"]["strategy"], "stealth");
    assert_eq!(v["scenario"]["attacked"], serde_json::json!([1]));

    let ex = fixture("example1.json");
    let none = ssrkit(&["simulate", ex.to_str().unwrap(), "--x0", "1,1", "--attack", "stealth", "--s", "1"]);
    assert_eq!(none.status.code(), Some(2), "Example 1 is 2-sparse observable");
}

#[test]
fn reduce_cs_solves_to_one_attack() {
    let f = fixture("cs.json");
    let out = ssrkit(&["reduce", "cs", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let path = tmp("cs_reduced.json");
    std::fs::write(&path, &out.stdout).unwrap();
    let inst = json_of(&out);
    assert_eq!(inst["mapping"]["source"], "compressed_sensing");
    let v = json_of(&ssrkit(&["solve", path.to_str().unwrap(), "--method", "brute", "--json"]));
    assert_eq!(v["attack_set"].as_array().unwrap().len(), 1);
}

#[test]
fn reduce_degeneracy_emits_identity_plant() {
    let f = fixture("degeneracy.json");
    let out = ssrkit(&["reduce", "degeneracy", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["A"], serde_json::json!([[1.0, 0.0], [0.0, 1.0]]));
    assert_eq!(v["sensors"].as_array().unwrap().len(), 4);
    assert_eq!(v["mapping"]["r"], 2);
    let path = tmp("degenerate.json");
    std::fs::write(&path, &out.stdout).unwrap();
    let a = json_of(&ssrkit(&["analyze", path.to_str().unwrap(), "--s", "0", "--json"]));
    // rows 3 and 4 are parallel, so removing {1, 2} leaves the plant unobservable
    assert_eq!(a["sparse"]["index"], 1);
    assert_eq!(a["sparse"]["witness"], serde_json::json!([1, 2]));
}

#[test]
fn reduce_rejects_wide_degeneracy_input() {
    let path = tmp("wide.json");
    std::fs::write(&path, r#"{"F": [[1, 2, 3]]}"#).unwrap();
    assert_eq!(ssrkit(&["reduce", "degeneracy", path.to_str().unwrap()]).status.code(), Some(1));
}

fn strip_times(csv: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let keep: Vec<usize> = (0..header.len()).filter(|&i| !header[i].ends_with("_secs")).collect();
    std::iter::once(header.join(","))
        .chain(lines.map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            keep.iter().map(|&i| f[i]).collect::<Vec<_>>().join(",")
        }))
        .collect()
}

#[test]
fn bench_is_reproducible_and_counts_hold() {
    let args = ["bench", "--r", "1,3", "--nj", "2", "--sensors", "12", "--s", "2", "--seed", "4"];
    let a = ssrkit(&args);
    let b = ssrkit(&args);
    assert_eq!(a.status.code(), Some(0));
    let (a, b) = (String::from_utf8(a.stdout).unwrap(), String::from_utf8(b.stdout).unwrap());
    assert_eq!(strip_times(&a), strip_times(&b));

    let mut rdr = csv::Reader::from_reader(a.as_bytes());
    let header = rdr.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    let num = |r: &csv::StringRecord, name: &str| r[col(name)].parse::<u64>().unwrap();
    assert_eq!(num(&rows[0], "blockwise_subsets"), num(&rows[0], "monolithic_subsets"));
    assert!(num(&rows[1], "decomposed_subsets") < num(&rows[1], "monolithic_subsets"));
}

#[test]
fn bench_writes_files() {
    let csv_path = tmp("bench.csv");
    let json_path = tmp("bench.json");
    let out = ssrkit(&[
        "bench",
        "--r",
        "2",
        "--sensors",
        "6",
        "--s",
        "1",
        "--csv",
        csv_path.to_str().unwrap(),
        "--out-json",
        json_path.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let recs: Value = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(recs[0]["N"], 6);
    assert_eq!(recs[0]["timed_out"], false);
    assert!(std::fs::read_to_string(&csv_path).unwrap().starts_with("n,N,r"));
}
