use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn hardcore(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hardcore"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn setup() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("p3.edges"), "p=3\n1 2\n2 3\n").unwrap();
    fs::write(dir.path().join("k2.edges"), "p=2\n1 2\n").unwrap();
    dir
}

fn strip_timestamps(v: &mut Value) {
    if let Some(m) = v.get_mut("manifest").and_then(Value::as_object_mut) {
        m.remove("started_at");
        m.remove("finished_at");
    }
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn exact_partition_function_of_p3_is_five() {
    let dir = setup();
    let doc = json_stdout(&hardcore(
        &["estimate-z", "--graph", "p3.edges", "--via", "exact"],
        dir.path(),
    ));
    assert!((doc["Z"].as_f64().unwrap() - 5.0).abs() < 1e-12);
    assert_eq!(doc["manifest"]["command"], "estimate-z");
    assert_eq!(
        doc["manifest"]["input_digests"]["p3.edges"]
            .as_str()
            .unwrap()
            .len(),
        64
    );
}

#[test]
fn backward_at_the_uniform_marginals_is_near_zero() {
    let dir = setup();
    let doc = json_stdout(&hardcore(
        &[
            "backward",
            "--graph",
            "k2.edges",
            "--mu",
            "[0.3333333333,0.3333333333]",
        ],
        dir.path(),
    ));
    assert!(doc["converged"].as_bool().unwrap());
    for t in floats(&doc["theta"]) {
        assert!(t.abs() < 1e-8, "theta {t}");
    }
}

#[test]
fn forward_then_backward_round_trips() {
    let dir = setup();
    let fwd = json_stdout(&hardcore(
        &[
            "forward",
            "--graph",
            "p3.edges",
            "--theta",
            "[0.5,-1.0,0.25]",
            "--cov",
        ],
        dir.path(),
    ));
    let mu = serde_json::to_string(&fwd["mu"]).unwrap();
    assert_eq!(fwd["cov"].as_array().unwrap().len(), 3);
    let back = json_stdout(&hardcore(
        &["backward", "--graph", "p3.edges", "--mu", &mu],
        dir.path(),
    ));
    let theta = floats(&back["theta"]);
    for (a, b) in theta.iter().zip([0.5, -1.0, 0.25]) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn boundary_point_is_a_numerical_error() {
    let dir = setup();
    let out = hardcore(
        &["backward", "--graph", "k2.edges", "--mu", "[0.5,0.5]"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "divergence");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = setup();
    for args in [
        vec!["forward", "--graph", "missing.edges"],
        vec!["forward", "--graph", "p3.edges", "--theta", "not json"],
        vec!["reduce", "--graph", "p3.edges", "--T", "5", "--delta", "1"],
        vec!["gen-graph", "--kind", "wheel", "--p", "5"],
        vec!["no-such-command"],
    ] {
        let out = hardcore(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn membership_reports_certificates() {
    let dir = setup();
    let inside = json_stdout(&hardcore(
        &[
            "member",
            "--graph",
            "k2.edges",
            "--x",
            "[0.3,0.3]",
            "--shrunken",
        ],
        dir.path(),
    ));
    assert_eq!(inside["status"], "inside");
    assert!(inside["certificate"]["weights"].is_array());
    assert_eq!(inside["shrunken"]["inside"], true);
    let outside = json_stdout(&hardcore(
        &["member", "--graph", "k2.edges", "--x", "[0.6,0.6]"],
        dir.path(),
    ));
    assert_eq!(outside["status"], "outside");
    assert!(outside["certificate"]["separator"].is_object());
}

#[test]
fn facets_of_k2() {
    let dir = setup();
    let doc = json_stdout(&hardcore(&["facets", "--graph", "k2.edges"], dir.path()));
    assert_eq!(doc["count"], 3);
    assert_eq!(
        doc["normalization_counterexamples"]
            .as_array()
            .unwrap()
            .len(),
        0
    );
}

#[test]
fn reduce_writes_json_and_csv_traces() {
    let dir = setup();
    let summary = json_stdout(&hardcore(
        &[
            "reduce", "--graph", "p3.edges", "--gamma", "0.05", "--T", "30", "--seed", "4",
            "--trace", "t.json",
        ],
        dir.path(),
    ));
    assert_eq!(summary["oracle_calls"], 30);
    assert!(summary.get("iterates").is_none());
    let trace: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("t.json")).unwrap()).unwrap();
    assert_eq!(trace["iterates"].as_array().unwrap().len(), 31);
    assert_eq!(trace["estimate"], summary["estimate"]);
    assert_eq!(trace["manifest"]["seed"], 4);

    json_stdout(&hardcore(
        &[
            "reduce", "--graph", "p3.edges", "--T", "30", "--trace", "t.csv", "--format", "csv",
        ],
        dir.path(),
    ));
    let csv = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# manifest: {"));
    assert!(lines[1].starts_with("t,x_1,x_2,x_3,theta_hat_1"));
    assert_eq!(lines.len(), 2 + 31);
}

#[test]
fn generated_graph_files_parse_back() {
    let dir = setup();
    let doc = json_stdout(&hardcore(
        &[
            "gen-graph",
            "--kind",
            "cycle",
            "--p",
            "5",
            "--out",
            "c5.edges",
        ],
        dir.path(),
    ));
    assert_eq!(doc["graph"]["p"], 5);
    let facets = json_stdout(&hardcore(&["facets", "--graph", "c5.edges"], dir.path()));
    assert_eq!(facets["count"], 11);
    // The JSON document itself is also accepted as a graph file.
    fs::write(
        dir.path().join("c5.json"),
        serde_json::to_string(&doc).unwrap(),
    )
    .unwrap();
    let z = json_stdout(&hardcore(&["estimate-z", "--graph", "c5.json"], dir.path()));
    assert!((z["Z"].as_f64().unwrap() - 11.0).abs() < 1e-12);
}

#[test]
fn verify_reports_are_reproducible() {
    let dir = setup();
    let run = |name: &str| {
        let out = hardcore(
            &["verify", "--suite", "fast", "--seed", "1", "--report", name],
            dir.path(),
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let mut report: Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(name)).unwrap()).unwrap();
        strip_timestamps(&mut report);
        report["manifest"]["config"]
            .as_object_mut()
            .unwrap()
            .remove("report");
        serde_json::to_string(&report).unwrap()
    };
    let a = run("a.json");
    let b = run("b.json");
    assert_eq!(a, b);
    assert!(a.contains("\"passed\":true"));
}

#[test]
fn reduction_output_does_not_depend_on_thread_count() {
    let dir = setup();
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_hardcore"))
            .args([
                "estimate-z",
                "--graph",
                "p3.edges",
                "--via",
                "reduction",
                "--T",
                "200",
                "--gamma",
                "0.05",
                "--seed",
                "9",
            ])
            .current_dir(dir.path())
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        let mut doc = json_stdout(&out);
        strip_timestamps(&mut doc);
        serde_json::to_string(&doc).unwrap()
    };
    assert_eq!(run("1"), run("4"));
}
