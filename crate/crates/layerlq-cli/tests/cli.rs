//! End-to-end tests of the binary: exit codes, report contents, trace
//! files, and byte determinism, driven through real process invocations.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn layerlq() -> Command {
    Command::new(env!("CARGO_BIN_EXE_layerlq"))
}

/// The checked-in case-study scenario, regenerated with
/// `casestudy florentine --emit-scenario` whenever the bundled graphs change.
fn florentine_scenario() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/florentine.toml")
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn json_file(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_json(output: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&output.stderr);
    let line = text.lines().last().unwrap_or_else(|| {
        panic!("no stderr failure line; stdout: {}", String::from_utf8_lossy(&output.stdout))
    });
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr `{line}` is not JSON: {e}"))
}

const TWO_NODE: &str = r#"
[[layer]]
edges = [[0, 1, 1.0]]
input_nodes = [[0, 1.0]]

[[layer.uncertainty]]
entries = [[0, 1, 1.0], [1, 0, 1.0]]
weight_bound = 0.4
realized_weight = 0.0

[simulation]
t_final = 10.0
"#;

#[test]
fn compose_reports_the_case_study_dimensions() {
    let output = layerlq()
        .args(["compose"])
        .arg(florentine_scenario())
        .output()
        .unwrap();
    assert!(output.status.success());
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["command"], "compose");
    assert_eq!(report["compose"]["state_dim"], 60);
    assert_eq!(report["compose"]["layer_dims"], serde_json::json!([4, 15, 1]));
    assert_eq!(report["compose"]["input_dim"], 15);
}

#[test]
fn compose_exports_exact_dense_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(
        dir.path(),
        "tiny.toml",
        "[[layer]]\nedges = [[0, 1, 1.0]]\ninput_nodes = [[0, 1.0]]\n",
    );
    let matrices = dir.path().join("m.json");
    let output = layerlq()
        .arg("compose")
        .arg(&scenario)
        .arg("--matrices")
        .arg(&matrices)
        .output()
        .unwrap();
    assert!(output.status.success());
    let m = json_file(&matrices);
    // Path graph on two nodes, unit anchor on node 0:
    // A = −L − diag(1, 0) = [[−2, 1], [1, −1]], B = e₀.
    assert_eq!(m["a_oplus"], serde_json::json!([[-2.0, 1.0], [1.0, -1.0]]));
    assert_eq!(m["b_otimes"], serde_json::json!([[1.0], [0.0]]));
}

#[test]
fn synthesize_passes_every_gate_on_the_case_study() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    let output = layerlq()
        .arg("synthesize")
        .arg(florentine_scenario())
        .arg("--report")
        .arg(&report_path)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let report = json_file(&report_path);
    assert_eq!(report["status"], "ok");
    assert_eq!(report["checks"]["residual_ok"], true);
    assert_eq!(report["checks"]["domination_ok"], true);
    assert_eq!(report["checks"]["cost_factor_ok"], true);
    assert_eq!(report["ranks"]["controllable"], true);
    assert_eq!(report["ranks"]["observable"], true);
    assert!(report["ranks"]["closed_loop_abscissa"].as_f64().unwrap() < 0.0);
    assert_eq!(report["certificates"]["strategy"], "identity");
}

#[test]
fn strict_certificates_refuse_but_still_report_the_design() {
    // The case study's higher layers carry no uncertainty, so their coupling
    // is exactly zero: semidefinite, never strictly negative.
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    let output = layerlq()
        .arg("synthesize")
        .arg(florentine_scenario())
        .arg("--strict-certificates")
        .arg("--report")
        .arg(&report_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
    let failure = stderr_json(&output);
    assert_eq!(failure["status"], "error");
    assert_eq!(failure["code"], "certificate");
    let report = json_file(&report_path);
    assert_eq!(report["status"], "infeasible");
    assert_eq!(report["error"]["code"], "certificate");
    assert_eq!(report["certificates"]["strict_requested"], true);
    assert_eq!(report["certificates"]["strict_satisfied"], false);
    // The non-strict design is still assembled and fully checked.
    assert_eq!(report["checks"]["residual_ok"], true);
}

#[test]
fn malformed_graph_file_fails_with_its_line_number() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "bad.graph",
        "nodes 4 undirected true\n0 1 1.0\n0 oops 1.0\n",
    );
    let scenario = write(
        dir.path(),
        "s.toml",
        "[[layer]]\ngraph = \"bad.graph\"\ninput_nodes = [[0, 1.0]]\n",
    );
    let output = layerlq().arg("compose").arg(&scenario).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let failure = stderr_json(&output);
    assert_eq!(failure["code"], "parse");
    let message = failure["message"].as_str().unwrap();
    assert!(message.contains("line 3"), "{message}");
    assert!(message.contains("bad.graph"), "{message}");
}

#[test]
fn conflicting_graph_sources_are_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(
        dir.path(),
        "s.toml",
        "[[layer]]\ngraph = \"g.graph\"\nedges = [[0, 1, 1.0]]\ninput_nodes = [[0, 1.0]]\n",
    );
    let output = layerlq().arg("compose").arg(&scenario).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn wrong_sized_cost_matrix_is_a_dimension_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(
        dir.path(),
        "s.toml",
        "[[layer]]\nedges = [[0, 1, 1.0]]\ninput_nodes = [[0, 1.0]]\n\n[cost]\nq1 = { diagonal = [1.0, 1.0, 1.0] }\n",
    );
    let output = layerlq().arg("synthesize").arg(&scenario).output().unwrap();
    assert_eq!(output.status.code(), Some(3));
    assert_eq!(stderr_json(&output)["code"], "dimension");
}

#[test]
fn wrong_length_initial_state_is_a_dimension_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(
        dir.path(),
        "s.toml",
        "[[layer]]\nedges = [[0, 1, 1.0]]\ninput_nodes = [[0, 1.0]]\n\n[simulation]\nx0 = [1.0, 0.0, 0.0]\n",
    );
    let output = layerlq().arg("simulate").arg(&scenario).output().unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn unanchored_input_is_infeasible_with_zero_rank_reported() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(
        dir.path(),
        "s.toml",
        "[[layer]]\nedges = [[0, 1, 1.0]]\ninput_nodes = [[0, 0.0]]\n",
    );
    let report_path = dir.path().join("report.json");
    let output = layerlq()
        .arg("synthesize")
        .arg(&scenario)
        .arg("--report")
        .arg(&report_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
    let report = json_file(&report_path);
    assert_eq!(report["status"], "infeasible");
    assert_eq!(report["ranks"]["controllability_rank"], 0);
    assert_eq!(report["ranks"]["controllable"], false);
    // Simulation refuses outright: there is no bound to audit.
    let sim = layerlq().arg("simulate").arg(&scenario).output().unwrap();
    assert_eq!(sim.status.code(), Some(4));
}

#[test]
fn simulate_guaranteed_satisfies_its_bound() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    let trace_path = dir.path().join("trace.csv");
    let output = layerlq()
        .arg("simulate")
        .arg(florentine_scenario())
        .arg("--report")
        .arg(&report_path)
        .arg("--trace")
        .arg(&trace_path)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let report = json_file(&report_path);
    assert_eq!(report["controller"], "guaranteed");
    assert_eq!(report["cost"]["satisfied"], true);
    assert!(report["cost"]["margin"].as_f64().unwrap() > 0.0);
    assert_eq!(report["cost"]["divergent"], false);
    assert_eq!(report["x0_source"], serde_json::json!({"kind": "seed", "seed": 42}));
    assert!(report["steps"].as_u64().unwrap() > 1000);

    let trace = std::fs::read_to_string(&trace_path).unwrap();
    let mut lines = trace.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,x_0,"), "{header}");
    assert!(header.ends_with(",J"), "{header}");
    let rows = lines.count();
    assert!(rows > 100, "only {rows} trace rows");
}

#[test]
fn simulate_baseline_documents_the_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    let output = layerlq()
        .arg("simulate")
        .arg(florentine_scenario())
        .args(["--controller", "baseline"])
        .arg("--report")
        .arg(&report_path)
        .output()
        .unwrap();
    // A diverging closed loop is a finding, not a tool failure.
    assert!(output.status.success());
    let report = json_file(&report_path);
    assert_eq!(report["controller"], "baseline_lqr");
    assert_eq!(report["cost"]["divergent"], true);
    assert_eq!(report["cost"]["satisfied"], false);
    assert!(report["cost"]["spectral_abscissa"].as_f64().unwrap() > 0.0);
}

#[test]
fn baseline_on_the_nominal_plant_stays_stable() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "s.toml", TWO_NODE);
    let report_path = dir.path().join("report.json");
    let output = layerlq()
        .arg("simulate")
        .arg(&scenario)
        .args(["--controller", "baseline"])
        .arg("--report")
        .arg(&report_path)
        .output()
        .unwrap();
    assert!(output.status.success());
    let report = json_file(&report_path);
    let cost = &report["cost"];
    assert_eq!(cost["divergent"], false);
    assert!(cost["spectral_abscissa"].as_f64().unwrap() < 0.0);
    assert!(cost["j_sim"].as_f64().unwrap().is_finite());
}

#[test]
fn reports_and_traces_are_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut artifacts: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
    for run in 0..2 {
        let report_path = dir.path().join(format!("r{run}.json"));
        let trace_path = dir.path().join("trace.csv");
        let output = layerlq()
            .arg("simulate")
            .arg(florentine_scenario())
            .arg("--report")
            .arg(&report_path)
            .arg("--trace")
            .arg(&trace_path)
            .output()
            .unwrap();
        assert!(output.status.success());
        // Rewrite the report's trace path so the two runs are comparable.
        let report = std::fs::read_to_string(&report_path)
            .unwrap()
            .replace(&trace_path.display().to_string(), "TRACE");
        artifacts.push((report.into_bytes(), std::fs::read(&trace_path).unwrap()));
    }
    assert_eq!(artifacts[0].0, artifacts[1].0, "reports differ between runs");
    assert_eq!(artifacts[0].1, artifacts[1].1, "traces differ between runs");
}

#[test]
fn seed_env_controls_the_generated_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    let output = layerlq()
        .args(["casestudy", "florentine"])
        .arg("--report")
        .arg(&report_path)
        .env("LAYERLQ_SEED", "7")
        .output()
        .unwrap();
    assert!(output.status.success());
    let report = json_file(&report_path);
    assert_eq!(report["seed"], 7);
    assert_eq!(report["comparison"]["guaranteed"]["satisfied"], true);
    assert_eq!(report["comparison"]["baseline"]["divergent"], true);

    let bad = layerlq()
        .args(["casestudy", "florentine"])
        .env("LAYERLQ_SEED", "bogus")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn emitted_scenario_reproduces_the_case_study() {
    let dir = tempfile::tempdir().unwrap();
    let emitted = dir.path().join("fl2.toml");
    let report_path = dir.path().join("case.json");
    let output = layerlq()
        .args(["casestudy", "florentine", "--provinces", "2"])
        .arg("--emit-scenario")
        .arg(&emitted)
        .arg("--report")
        .arg(&report_path)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let case = json_file(&report_path);
    assert_eq!(case["provinces"], 2);
    assert_eq!(case["synthesis"]["compose"]["state_dim"], 120);

    let compose = layerlq().arg("compose").arg(&emitted).output().unwrap();
    assert!(compose.status.success());
    let report: serde_json::Value = serde_json::from_slice(&compose.stdout).unwrap();
    assert_eq!(report["compose"]["state_dim"], 120);
    assert_eq!(report["compose"]["layer_dims"], serde_json::json!([4, 15, 2]));
}

#[test]
fn bench_rejects_a_zero_province_count() {
    let output = layerlq().args(["bench", "0"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn checked_in_scenario_matches_a_fresh_emission() {
    let dir = tempfile::tempdir().unwrap();
    let emitted = dir.path().join("fresh.toml");
    let output = layerlq()
        .args(["casestudy", "florentine"])
        .arg("--emit-scenario")
        .arg(&emitted)
        .output()
        .unwrap();
    assert!(output.status.success());
    let fresh = std::fs::read_to_string(&emitted).unwrap();
    let checked_in = std::fs::read_to_string(florentine_scenario()).unwrap();
    assert_eq!(
        fresh, checked_in,
        "scenarios/florentine.toml is stale; regenerate it with `layerlq casestudy florentine --emit-scenario`"
    );
}
