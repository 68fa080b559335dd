//! Black-box tests of the `sfcdag` binary: subcommand behavior, exit-code
//! discipline (0 ok / 1 model failures / 2 usage), stdout-vs-stderr
//! separation, golden outputs, and cross-subcommand consistency.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sfcdag"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn sim() -> String {
    models_dir().join("sim.sfc").to_string_lossy().into_owned()
}

fn open() -> String {
    models_dir().join("open.sfc").to_string_lossy().into_owned()
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("golden {name}: {e}"))
}

#[test]
fn check_reports_ok_for_valid_models() {
    let out = run(&["check", &sim()]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = stdout_of(&out);
    assert!(stdout.starts_with("ok: sim:"), "stdout: {stdout}");
    assert!(stderr_of(&out).is_empty(), "sim should be warning-free");
}

#[test]
fn check_fails_with_exit_1_and_silent_stdout() {
    let out = run(&["check", &fixture("undeclared.sfc")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout_of(&out).is_empty(), "no data on stdout on failure");
    let stderr = stderr_of(&out);
    assert!(stderr.contains("undeclared identifier 'C'"), "{stderr}");
}

#[test]
fn missing_file_is_a_usage_error() {
    let out = run(&["solve", "missing.sfc", "--periods", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout_of(&out).is_empty());
    assert!(stderr_of(&out).contains("cannot read"));
}

#[test]
fn unknown_subcommand_and_flag_are_usage_errors() {
    let out = run(&["frobnicate", &sim()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout_of(&out).is_empty());

    let out = run(&["sccs", &sim(), "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout_of(&out).is_empty());
}

#[test]
fn sccs_flags_exactly_one_cycle_in_the_open_model() {
    let out = run(&["sccs", &open()]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = stdout_of(&out);
    let cycle_lines: Vec<&str> = stdout.lines().filter(|l| l.contains("(cycle)")).collect();
    assert_eq!(cycle_lines.len(), 1, "stdout: {stdout}");
    assert!(cycle_lines[0].contains("y_n"));
    assert!(cycle_lines[0].contains("x_s"));
}

#[test]
fn golden_graph_dot() {
    let out = run(&["graph", &sim(), "--format", "dot"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), golden("sim_graph.dot"));
}

#[test]
fn golden_dag_dot_collapsed_and_expanded() {
    let out = run(&["dag", &sim(), "--format", "dot"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), golden("sim_dag.dot"));

    let out = run(&["dag", &sim(), "--format", "dot", "--expand-sccs"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), golden("sim_dag_expanded.dot"));
}

#[test]
fn golden_graph_json() {
    let out = run(&["graph", &sim(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), golden("sim_graph.json"));
    // dag --format json emits the same analysis document.
    let dag = run(&["dag", &sim(), "--format", "json"]);
    assert_eq!(stdout_of(&dag), golden("sim_graph.json"));
}

#[test]
fn golden_adjacency_csv() {
    let out = run(&["graph", &sim(), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), golden("sim_adjacency.csv"));
}

#[test]
fn golden_solve_csv() {
    let out = run(&["solve", &sim(), "--periods", "5"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), golden("sim_solve.csv"));
    assert!(stderr_of(&out).contains("5 checks passed"));
}

#[test]
fn out_flag_writes_the_same_bytes_as_stdout() {
    let dir = std::env::temp_dir().join(format!("sfcdag-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("dag.dot");
    let out = run(&["dag", &sim(), "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_of(&out).is_empty());
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        golden("sim_dag.dot")
    );
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn trace_lists_descendants_of_an_exogenous_variable() {
    let out = run(&["trace", &sim(), "--from", "G"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = stdout_of(&out);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines, vec!["Y", "T", "YD", "C", "H"]);

    let out = run(&["trace", &sim(), "--from", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout_of(&out).is_empty());
}

#[test]
fn solve_with_failing_checks_exits_1_without_data() {
    let out = run(&["solve", &fixture("broken_check.sfc"), "--periods", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout_of(&out).is_empty());
    let stderr = stderr_of(&out);
    assert!(stderr.contains("accounting checks failed"), "{stderr}");
}

#[test]
fn divergent_model_reports_nonconvergence_with_exit_1() {
    let out = run(&["solve", &fixture("divergent.sfc"), "--periods", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout_of(&out).is_empty());
    let stderr = stderr_of(&out);
    assert!(stderr.contains("did not converge"), "{stderr}");
    assert!(stderr.contains("lowering damping"), "{stderr}");
}

#[test]
fn solver_flags_are_honored() {
    // A coarse tolerance converges in fewer evaluations than the default.
    let coarse = run(&["solve", &sim(), "--periods", "1", "--tol", "1e-3"]);
    let fine = run(&["solve", &sim(), "--periods", "1", "--tol", "1e-12"]);
    assert_eq!(coarse.status.code(), Some(0));
    assert_eq!(fine.status.code(), Some(0));
    let evals = |out: &Output| -> u64 {
        stderr_of(out)
            .split(", ")
            .find_map(|part| part.strip_suffix(" equation evaluations"))
            .and_then(|n| n.parse().ok())
            .expect("evaluation count on stderr")
    };
    assert!(evals(&coarse) < evals(&fine));

    let bad = run(&["solve", &sim(), "--periods", "1", "--damping", "1.5"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr_of(&bad).contains("damping"));
}

#[test]
fn pipeline_subcommands_are_mutually_consistent() {
    let json: serde_json::Value =
        serde_json::from_str(&stdout_of(&run(&["graph", &open(), "--format", "json"]))).unwrap();
    let sccs_text = stdout_of(&run(&["sccs", &open()]));
    let order_text = stdout_of(&run(&["order", &open()]));

    // Components listed by `sccs` match the JSON document.
    let sccs = json["sccs"].as_array().unwrap();
    let text_lines: Vec<&str> = sccs_text.lines().collect();
    assert_eq!(sccs.len(), text_lines.len());
    let labels: Vec<String> = json["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|n| n["label"].as_str().unwrap().to_string())
        .collect();
    for (k, (scc, line)) in sccs.iter().zip(&text_lines).enumerate() {
        assert!(line.starts_with(&format!("SCC_{k}")));
        let nontrivial = scc["nontrivial"].as_bool().unwrap();
        assert_eq!(line.contains("(cycle)"), nontrivial);
        for member in scc["members"].as_array().unwrap() {
            let label = &labels[member.as_u64().unwrap() as usize];
            assert!(line.contains(label.as_str()), "{line} missing {label}");
        }
    }

    // The topological order respects every condensation edge, and `order`
    // prints the same component sequence.
    let order: Vec<usize> = json["topological_order"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as usize)
        .collect();
    let position = |c: usize| order.iter().position(|&x| x == c).unwrap();
    for edge in json["condensation"]["edges"].as_array().unwrap() {
        let a = edge["source"].as_u64().unwrap() as usize;
        let b = edge["target"].as_u64().unwrap() as usize;
        assert!(position(a) < position(b), "meta-edge {a}->{b} out of order");
    }
    let order_lines: Vec<&str> = order_text.lines().collect();
    assert_eq!(order_lines.len(), order.len());
    for (line, &comp) in order_lines.iter().zip(&order) {
        let expected_members = sccs[comp]["members"].as_array().unwrap();
        for member in expected_members {
            let label = &labels[member.as_u64().unwrap() as usize];
            assert!(line.contains(label.as_str()), "{line} missing {label}");
        }
    }
}

#[test]
fn json_output_is_byte_deterministic_across_runs() {
    let a = stdout_of(&run(&["graph", &open(), "--format", "json"]));
    let b = stdout_of(&run(&["graph", &open(), "--format", "json"]));
    assert_eq!(a, b);
}
