//! End-to-end tests of the `lipkit` binary: exit codes, report envelopes,
//! determinism, and command coverage of every library operation.

use std::process::{Command, Output};

fn lipkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lipkit"))
        .args(args)
        .env_remove("LIPKIT_SEED")
        .output()
        .expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

const INTERVAL_01: &str = r#"{"kind":"interval","dim":1,"params":{"a":0.0,"b":1.0}}"#;
const BOX_2: &str = r#"{"kind":"box","dim":2,"params":{"lo":[0.0,0.0],"hi":[1.0,1.0]}}"#;

fn square_symbol_op() -> String {
    format!(
        r#"{{"source":{INTERVAL_01},"target":{INTERVAL_01},"weight":"const:1","symbol":{{"exprs":["x0*x0"]}}}}"#
    )
}

#[test]
fn estimate_exits_zero_with_envelope() {
    let out = lipkit(&[
        "estimate",
        "--kind",
        "global",
        "--space",
        INTERVAL_01,
        "--func",
        "coord:0",
        "--pairs",
        "2000",
        "--seed",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    for key in ["tool_version", "command", "seed", "inputs", "result"] {
        assert!(report.get(key).is_some(), "missing envelope field {key}");
    }
    assert_eq!(report["command"], "estimate");
    let value = report["result"]["estimate"]["value"].as_f64().unwrap();
    assert!((0.99..=1.0).contains(&value));
}

#[test]
fn reflection_operator_check_exits_zero() {
    // Tf(x) = -f(1-x) on [0,1] preserves global constants exactly.
    let out = lipkit(&[
        "check-preserve",
        "--op",
        "interval:0,1,0,1:-",
        "--kind",
        "global",
        "--pairs",
        "2000",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout_str(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["result"]["verdict"], true);
    assert!(report["result"]["max_deviation"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn failing_verdict_exits_one_with_witness() {
    // h = 2 with the identity symbol doubles every constant.
    let doubling = format!(
        r#"{{"source":{INTERVAL_01},"target":{INTERVAL_01},"weight":"const:2","symbol":{{"affine":{{"alpha":1.0,"A":[1.0],"b":[0.0]}}}}}}"#
    );
    let out = lipkit(&[
        "check-preserve",
        "--op",
        &doubling,
        "--kind",
        "global",
        "--pairs",
        "1000",
        "--seed",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["result"]["verdict"], false);
    assert!(report["result"]["witness"].is_object());
}

#[test]
fn malformed_descriptor_exits_two_with_diagnostic() {
    let out = lipkit(&[
        "estimate",
        "--kind",
        "global",
        "--space",
        r#"{"kind":"interval","dim":1,"params":{"a":0.0,"b":1.0},"bogus":1}"#,
        "--func",
        "coord:0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("error"), "stderr: {stderr}");
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_flag_exits_two() {
    let out = lipkit(&["estimate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = [
        "estimate",
        "--kind",
        "local",
        "--space",
        BOX_2,
        "--func",
        "product01",
        "--at",
        "0.3,0.4",
        "--pairs",
        "1500",
        "--radii",
        "5",
        "--seed",
        "11",
    ];
    let first = lipkit(&args);
    let second = lipkit(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    assert!(!first.stdout.is_empty());
}

#[test]
fn seed_env_var_provides_the_default() {
    let with_flag = lipkit(&[
        "estimate", "--kind", "global", "--space", INTERVAL_01, "--func", "tent", "--pairs",
        "500", "--seed", "99",
    ]);
    let with_env = Command::new(env!("CARGO_BIN_EXE_lipkit"))
        .args([
            "estimate", "--kind", "global", "--space", INTERVAL_01, "--func", "tent", "--pairs",
            "500",
        ])
        .env("LIPKIT_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(with_flag.stdout, with_env.stdout);
}

#[test]
fn output_flag_writes_the_report_to_a_file() {
    let dir = std::env::temp_dir().join("lipkit-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let _ = std::fs::remove_file(&path);
    let out = lipkit(&[
        "cube-sym",
        "--n",
        "2",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let content = std::fs::read_to_string(&path).unwrap();
    let report: serde_json::Value = serde_json::from_str(&content).unwrap();
    assert_eq!(report["result"]["count"], 8);
}

#[test]
fn local_estimate_reports_the_gradient_norm() {
    let out = lipkit(&[
        "estimate",
        "--kind",
        "local",
        "--space",
        BOX_2,
        "--func",
        "product01",
        "--at",
        "0.6,0.8",
        "--pairs",
        "1000",
        "--radii",
        "5",
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    let gn = report["result"]["gradient_norm"].as_f64().unwrap();
    assert!((gn - 1.0).abs() < 1e-12, "norm of (0.8, 0.6) is 1, got {gn}");
}

#[test]
fn dilation_command_reports_violation_for_squaring_symbol() {
    let out = lipkit(&[
        "dilation",
        "--op",
        &square_symbol_op(),
        "--pairs",
        "2000",
        "--seed",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["result"]["dilation"]["is_dilation"], false);
    let quotient = report["result"]["violation"]["quotient"].as_f64().unwrap();
    assert!(quotient > 1.0);
}

#[test]
fn classify1d_accepts_affine_and_rejects_tent() {
    let dir = std::env::temp_dir().join("lipkit-cli-test");
    std::fs::create_dir_all(&dir).unwrap();

    let affine: Vec<(f64, f64)> = (0..20)
        .map(|i| {
            let x = i as f64 / 19.0;
            (x, 2.0 * x + 3.0)
        })
        .collect();
    let affine_path = dir.join("affine.json");
    std::fs::write(&affine_path, serde_json::to_string(&affine).unwrap()).unwrap();
    let out = lipkit(&[
        "classify1d",
        "--samples",
        &format!("@{}", affine_path.display()),
        "--alpha",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["result"]["sign"], 1);

    let tent: Vec<(f64, f64)> = (0..21)
        .map(|i| {
            let x = i as f64 / 20.0;
            (x, x.max(1.0 - x))
        })
        .collect();
    let tent_path = dir.join("tent.json");
    std::fs::write(&tent_path, serde_json::to_string(&tent).unwrap()).unwrap();
    let out = lipkit(&[
        "classify1d",
        "--samples",
        &format!("@{}", tent_path.display()),
        "--alpha",
        "1",
        "--tol",
        "1e-6",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["result"]["rejected"], "non-injective");
}

#[test]
fn consistency_separates_true_wco_from_shift() {
    let out = lipkit(&["consistency", "--blackbox", "wco:interval:0,1,0,1:-", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout_str(&out));

    let out = lipkit(&[
        "consistency",
        "--blackbox",
        "shift:0.25,0.5",
        "--space",
        BOX_2,
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert!(report["result"]["witness"].is_object());
}

/// Every library operation is reachable through at least one CLI command.
/// The mapping:
///
/// - metric_core distance/sample_points/sample_ball: all estimate kinds;
/// - funcspace parse_expr (expr: descriptors), cone_function (cone),
///   witness_function (witness), gradient (local estimate gradient_norm);
/// - lipest global/local/pointwise/via-gradient: estimate;
/// - wco_ops apply + preservation_check: check-preserve; shift_preserver +
///   wco_consistency_check: consistency; dilation_violation_witness:
///   dilation;
/// - dilation_fit dilation_check: dilation; recover_affine: recover;
///   classify_1d: classify1d; enumerate_cube_symmetries: cube-sym;
///   interval_canonical: check-preserve --op interval:...;
/// - flatman chart_at + local_isometry_check: manifold-check;
///   transition_orthogonality_check + chart_independence_check +
///   pt_lip_on_manifold: chart-check.
#[test]
fn every_command_is_exercised() {
    let dir = std::env::temp_dir().join("lipkit-cli-coverage");
    std::fs::create_dir_all(&dir).unwrap();
    let pairs_path = dir.join("pairs.json");
    // A 5x4 grid (full-rank spread) mapped through a rotation plus offset.
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..20)
        .map(|i| {
            let x = vec![(i % 5) as f64 / 4.0, (i / 5) as f64 / 3.0];
            (x.clone(), vec![x[1] + 1.0, -x[0]])
        })
        .collect();
    std::fs::write(&pairs_path, serde_json::to_string(&pairs).unwrap()).unwrap();
    let samples_path = dir.join("samples.json");
    std::fs::write(&samples_path, "[[0.0,1.0],[0.5,0.0],[1.0,1.0]]").unwrap();

    let pairs_arg = format!("@{}", pairs_path.display());
    let samples_arg = format!("@{}", samples_path.display());
    let square_op = square_symbol_op();
    let commands: Vec<Vec<&str>> = vec![
        vec!["estimate", "--kind", "global", "--space", BOX_2, "--func", "expr:x0*x1 + sin(x0)", "--pairs", "500"],
        vec!["estimate", "--kind", "local", "--space", BOX_2, "--func", "product01", "--at", "0.5,0.5", "--pairs", "400", "--radii", "4"],
        vec!["estimate", "--kind", "pointwise", "--space", INTERVAL_01, "--func", "cone:0.5", "--at", "0.5", "--pairs", "400", "--radii", "4"],
        vec!["estimate", "--kind", "global", "--space", BOX_2, "--func", "witness:0.1,0.1;0.9,0.9", "--pairs", "400"],
        vec!["check-preserve", "--op", "interval:0,2,0,1", "--kind", "global", "--pairs", "500", "--corpus", "10"],
        vec!["check-preserve", "--op", "cube:2:3:-", "--kind", "global", "--pairs", "500", "--corpus", "10"],
        vec!["check-preserve", "--blackbox", "shift:0.0,0.0", "--space", BOX_2, "--kind", "global", "--pairs", "500", "--corpus", "8", "--tol", "1e-9"],
        vec!["consistency", "--blackbox", "wco:cube:2:1", "--corpus", "8"],
        vec!["recover", "--pairs", &pairs_arg],
        vec!["dilation", "--op", &square_op, "--pairs", "500"],
        vec!["classify1d", "--samples", &samples_arg, "--alpha", "1", "--tol", "1e-6"],
        vec!["cube-sym", "--n", "3"],
        vec!["manifold-check", "--manifold", "torus", "--map", "translate", "--points", "3", "--pairs", "50"],
        vec!["manifold-check", "--manifold", "circle", "--map", "reflect", "--points", "3", "--pairs", "50"],
        vec!["chart-check", "--manifold", "torus", "--samples", "4", "--pairs", "800"],
        vec!["chart-check", "--manifold", "circle", "--samples", "4", "--pairs", "800"],
    ];
    for args in &commands {
        let out = lipkit(args);
        let code = out.status.code().unwrap_or(-1);
        assert!(
            code == 0 || code == 1,
            "command {:?} exited {code}: {}",
            args,
            String::from_utf8_lossy(&out.stderr)
        );
        let report: serde_json::Value = serde_json::from_str(&stdout_str(&out))
            .unwrap_or_else(|e| panic!("command {args:?} produced invalid JSON: {e}"));
        assert_eq!(report["command"], args[0], "envelope command mismatch");
    }
}
