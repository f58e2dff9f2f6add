//! Exit codes and output files of the command-line front end.

use std::fs;
use std::path::Path;

use stochastic_barrier::cli::{run_from, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_NO_CONTROLLER, EXIT_OK};

/// X0 contains Xu, so no barrier separates them.
const OVERLAP: &str = "\
[system]
time = continuous
state = x
drift = -x
input = 1
diffusion = sigma

[sets]
domain = (2 - x)*(x + 2)
initial = 1 - x^2
unsafe = x^2 - 0.25

[horizon]
T = 1

[initial-point]
x0 = 0.0

[params]
sigma = 0.5
";

fn run(args: &[&str]) -> i32 {
    run_from(std::iter::once("sbarrier").chain(args.iter().copied()))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_writes_csv_trace_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, trace, report) = (dir.path().join("v.csv"), dir.path().join("t.jsonl"), dir.path().join("r.json"));
    let code = run(&[
        "--seed", "3", "verify", "ct-1d", "--sigma", "0.5", "--deg-b", "4", "--check", "200",
        "-o", path(&csv), "--trace", path(&trace), "--report", path(&report),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("sigma,alpha,beta,gamma,branch,bound"));
    assert_eq!(text.lines().count(), 2);
    assert!(fs::read_to_string(&trace).unwrap().lines().count() > 1);
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.prob");
    fs::write(&bad, "[system]\ntime = sideways\n").unwrap();
    assert_eq!(run(&["verify", path(&bad)]), EXIT_INPUT);
    assert_eq!(run(&["verify", "/no/such/file.prob"]), EXIT_INPUT);
    assert_eq!(run(&["frobnicate"]), EXIT_INPUT);
    assert_eq!(run(&["simulate", "ct-1d", "--trials", "0"]), EXIT_INPUT);
    assert_eq!(run(&["--threads", "0", "simulate", "ct-1d", "--trials", "10"]), EXIT_INPUT);
    assert_eq!(run(&["sweep", "ct-1d", "--sigmas", "1:0:2"]), EXIT_INPUT);
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(&["--help"]), EXIT_OK);
    assert_eq!(run(&["--version"]), EXIT_OK);
}

#[test]
fn infeasible_program_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("overlap.prob");
    fs::write(&file, OVERLAP).unwrap();
    assert_eq!(run(&["verify", path(&file), "--deg-b", "2", "--alpha", "0:0.5:2"]), EXIT_INFEASIBLE);
    assert_eq!(run(&["sweep", path(&file), "--sigmas", "0.5,1", "--deg-b", "2", "--alpha", "0", "--trials", "0"]), EXIT_INFEASIBLE);
}

#[test]
fn unreachable_goal_exits_three() {
    assert_eq!(
        run(&["synthesize", "ct-1d", "--sigma", "2", "--pgoal", "0.001", "--deg-b", "4", "--max-iter", "3"]),
        EXIT_NO_CONTROLLER
    );
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        assert_eq!(run(&["--seed", "11", "--threads", "2", "simulate", "dt-pop", "--sigma", "0.2", "--trials", "500", "-o", path(p)]), EXIT_OK);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn sweep_emits_one_row_per_sigma() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let code = run(&["sweep", "ct-1d", "--sigmas", "0.5:0.5:1.5", "--deg-b", "4", "--trials", "200", "-o", path(&out)]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 4, "{text}");
}
