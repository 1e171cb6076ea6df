use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use vrp_qaoa::VrpInstance;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vrp-qaoa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_writes_an_instance_that_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("inst.json");
    let out = run(&["gen", "--nodes", "3", "--vehicles", "2", "--seed", "7", "--out", path(&file)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let read = VrpInstance::read(&file).unwrap();
    assert_eq!(read, VrpInstance::generate_random(3, 2, 7).unwrap());
}

#[test]
fn gen_without_vehicles_is_a_usage_error() {
    let out = run(&["gen", "--nodes", "3"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--vehicles"));
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["solve", "--help"])), 0);
}

#[test]
fn solve_without_an_instance_source_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["solve", "--out", path(dir.path())])), 1);
}

#[test]
fn solve_writes_three_byte_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = run(&["solve", "--example", "--seed", "1", "--out", path(dir.path())]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert!(stdout(&out).contains("111010"));
    }
    for name in ["report.json", "samples.csv", "trace.csv"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs between runs");
    }
    let samples = fs::read_to_string(a.path().join("samples.csv")).unwrap();
    let mut lines = samples.lines();
    assert_eq!(lines.next(), Some("bitstring,count"));
    assert!(lines.next().unwrap().starts_with("111010,"));
}

#[test]
fn solve_reads_an_instance_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("inst.json");
    vrp_qaoa::instance::three_node_example().write(&file).unwrap();
    let out = run(&["solve", "--instance", path(&file), "--p", "1", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,gamma_1,beta_1,expectation,best\n"));
}

#[test]
fn solve_rejects_five_nodes_with_a_resource_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["solve", "--nodes", "5", "--vehicles", "2", "--out", path(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("30"), "{}", stderr(&out));
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn resources_reports_edge_qubits() {
    let out = run(&["resources", "--nodes", "3..6"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let qubits: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(4).unwrap())
        .collect();
    assert_eq!(qubits, ["6", "14", "30", "63"]);
}

#[test]
fn resources_flags_invalid_vehicle_counts_and_sorts() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("table.csv");
    let out = run(&[
        "resources",
        "--nodes",
        "4",
        "--vehicles",
        "4,2",
        "--formulations",
        "time_expanded,edge",
        "--out",
        path(&file),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&file).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let keys: Vec<(&str, &str)> = rows.iter().map(|r| (r[0], r[2])).collect();
    assert_eq!(
        keys,
        [("edge", "2"), ("edge", "4"), ("time_expanded", "2"), ("time_expanded", "4")]
    );
    for r in &rows {
        assert_eq!(r[6] == "false", r[2] == "4");
    }
}

#[test]
fn resources_rejects_an_unknown_formulation() {
    assert_eq!(code(&run(&["resources", "--formulations", "qubo"])), 1);
}

#[test]
fn sweep_writes_thirty_six_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["sweep", "--example", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(vrp_qaoa::sweep::SWEEP_CSV_HEADER));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 36);
    for row in rows {
        let ratio: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&ratio));
    }
}

#[test]
fn decode_feasible_string() {
    let out = run(&["decode", "111010", "--example"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("0->1->0, 0->2->0"));
    assert!(text.contains("132.110"));
}

#[test]
fn decode_wrong_length_is_a_usage_error() {
    assert_eq!(code(&run(&["decode", "11101", "--example"])), 1);
    assert_eq!(code(&run(&["decode", "11102x", "--example"])), 1);
}

#[test]
fn decode_infeasible_string_lists_violations() {
    let out = run(&["decode", "110110", "--example"]);
    assert_eq!(code(&out), 3);
    assert!(stdout(&out).contains("IN_DEGREE(2)"));
}
