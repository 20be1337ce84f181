use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn bdg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdg"))
        .args(args)
        .env_remove("BDG_CONFIG")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_winners() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.json");
    let res = bdg(&[
        "run",
        "--trace",
        path_str(&fixture("trace.json")),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["schema"], "bdg-run/1");
    let instances = report["instances"].as_array().unwrap();
    assert_eq!(instances.len(), 2);
    assert_eq!(instances[0]["winner_text"], "liver");
    // single candidate never enters the loop
    assert_eq!(instances[1]["iterations_used"], 0);
    assert!(instances[1]["final"].is_null());
    assert!(instances[0].get("trace").is_none());
}

#[test]
fn run_full_trace_matches_iteration_count() {
    let res = bdg(&[
        "run",
        "--trace",
        path_str(&fixture("trace.json")),
        "--full-trace",
        "--stopping",
        "classic",
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let report: serde_json::Value = serde_json::from_str(&stdout(&res)).unwrap();
    let first = &report["instances"][0];
    assert_eq!(report["config"]["stopping_mode"], "classic");
    assert_eq!(
        first["trace"].as_array().unwrap().len() as u64,
        first["iterations_used"].as_u64().unwrap()
    );
}

#[test]
fn malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "[{\"schema\": ").unwrap();
    let res = bdg(&["run", "--trace", path_str(&bad)]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("parse error"), "{}", stderr(&res));
}

#[test]
fn missing_trace_exits_2() {
    let res = bdg(&["run", "--trace", "/definitely/not/here.json"]);
    assert_eq!(code(&res), 2);
}

#[test]
fn unwritable_out_exits_3() {
    let res = bdg(&[
        "run",
        "--trace",
        path_str(&fixture("trace.json")),
        "--out",
        "/nonexistent-dir/run.json",
    ]);
    assert_eq!(code(&res), 3);
    assert!(stderr(&res).contains("io error"));
}

#[test]
fn unknown_flag_is_rejected() {
    let res = bdg(&[
        "run",
        "--trace",
        path_str(&fixture("trace.json")),
        "--lambada",
        "0.3",
    ]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("--lambada"));
}

#[test]
fn help_lists_flags() {
    let res = bdg(&["eval", "--help"]);
    assert_eq!(code(&res), 0);
    let text = stdout(&res);
    for flag in [
        "--trace",
        "--synthetic",
        "--rules",
        "--seeds",
        "--workers",
        "--out",
        "--csv",
        "--config",
        "--lambda-g",
        "--sigma",
        "--delta-w",
        "--max-iterations",
        "--verbose",
    ] {
        assert!(text.contains(flag), "missing {flag}");
    }
    let run_help = stdout(&bdg(&["run", "--help"]));
    assert!(run_help.contains("--stopping"));
}

#[test]
fn invalid_override_exits_2() {
    let res = bdg(&[
        "run",
        "--trace",
        path_str(&fixture("trace.json")),
        "--sigma",
        "-1",
    ]);
    assert_eq!(code(&res), 2);
    let res = bdg(&[
        "run",
        "--trace",
        path_str(&fixture("trace.json")),
        "--stopping",
        "sometimes",
    ]);
    assert_eq!(code(&res), 2);
}

#[test]
fn eval_reports_all_rules() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eval.json");
    let res = bdg(&[
        "eval",
        "--synthetic",
        path_str(&fixture("synthetic.toml")),
        "--rules",
        "all",
        "--seeds",
        "",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["aggregates"].as_array().unwrap().len(), 5);
    assert_eq!(report["seeds"], serde_json::json!([1, 2, 3, 4, 5]));
    let csv = fs::read_to_string(dir.path().join("eval.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5 * 20 * 5);
    for rule in ["greedy", "scd", "verifier", "bdg-classic", "bdg-w"] {
        assert!(stdout(&res).contains(rule));
    }
}

#[test]
fn unknown_rule_names_offending_token() {
    let res = bdg(&[
        "eval",
        "--synthetic",
        path_str(&fixture("synthetic.toml")),
        "--rules",
        "greedy,oracle",
    ]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("oracle"));
}

#[test]
fn eval_needs_exactly_one_source() {
    assert_eq!(code(&bdg(&["eval"])), 2);
    let both = bdg(&[
        "eval",
        "--trace",
        path_str(&fixture("trace.json")),
        "--synthetic",
        path_str(&fixture("synthetic.toml")),
    ]);
    assert_eq!(code(&both), 2);
}

#[test]
fn eval_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let res = bdg(&[
            "eval",
            "--synthetic",
            path_str(&fixture("synthetic.toml")),
            "--seeds",
            "3,1",
            "--workers",
            workers,
            "--out",
            path_str(&out),
        ]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        (
            fs::read(&out).unwrap(),
            fs::read(out.with_extension("csv")).unwrap(),
        )
    };
    assert_eq!(run("a.json", "1"), run("b.json", "4"));
}

#[test]
fn convergence_prints_reduction_and_p() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conv.json");
    let res = bdg(&[
        "convergence",
        "--synthetic",
        path_str(&fixture("synthetic.toml")),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = stdout(&res);
    assert!(text.contains("reduction"));
    assert!(text.contains("p="));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["pairs"], 100);
}

#[test]
fn convergence_with_one_iteration_exits_4() {
    let res = bdg(&[
        "convergence",
        "--synthetic",
        path_str(&fixture("synthetic.toml")),
        "--max-iterations",
        "1",
    ]);
    assert_eq!(code(&res), 4);
}

#[test]
fn duplicate_seeds_exit_2() {
    let res = bdg(&[
        "convergence",
        "--synthetic",
        path_str(&fixture("synthetic.toml")),
        "--seeds",
        "1,2,1",
    ]);
    assert_eq!(code(&res), 2);
    let res = bdg(&[
        "convergence",
        "--synthetic",
        path_str(&fixture("synthetic.toml")),
        "--seeds",
        "1,x",
    ]);
    assert_eq!(code(&res), 2);
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("game.toml");
    fs::write(
        &cfg,
        "sigma = 0.01\nmax_iterations = 40\nstopping_mode = \"classic\"\n",
    )
    .unwrap();
    let trace = fixture("trace.json");
    let res = bdg(&[
        "run",
        "--trace",
        path_str(&trace),
        "--config",
        path_str(&cfg),
        "--max-iterations",
        "30",
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let report: serde_json::Value = serde_json::from_str(&stdout(&res)).unwrap();
    assert_eq!(report["config"]["sigma"], 0.01);
    assert_eq!(report["config"]["max_iterations"], 30);
    assert_eq!(report["config"]["stopping_mode"], "classic");
    assert_eq!(report["config"]["lambda_g"], 0.4);

    // the environment variable stands in for --config
    let res = Command::new(env!("CARGO_BIN_EXE_bdg"))
        .args(["run", "--trace", path_str(&trace)])
        .env("BDG_CONFIG", &cfg)
        .output()
        .unwrap();
    let report: serde_json::Value = serde_json::from_str(&stdout(&res)).unwrap();
    assert_eq!(report["config"]["max_iterations"], 40);
}

#[test]
fn config_file_with_unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("game.toml");
    fs::write(&cfg, "sigmaa = 0.01\n").unwrap();
    let res = bdg(&[
        "run",
        "--trace",
        path_str(&fixture("trace.json")),
        "--config",
        path_str(&cfg),
    ]);
    assert_eq!(code(&res), 2);
}

#[test]
fn w1_identical_is_zero() {
    let res = bdg(&[
        "w1",
        "--p",
        "0.2,0.3,0.5",
        "--q",
        "0.2,0.3,0.5",
        "--metric",
        path_str(&fixture("metric.txt")),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert!(stdout(&res).starts_with("w1 0\n"));
}

#[test]
fn w1_point_masses_give_distance() {
    let res = bdg(&[
        "w1",
        "--p",
        "1,0,0",
        "--q",
        "0,1,0",
        "--metric",
        path_str(&fixture("metric.txt")),
    ]);
    assert_eq!(code(&res), 0);
    let out = stdout(&res);
    assert!(out.starts_with("w1 0.2\n"), "{out}");
    assert!(out.contains("row_sums 1,0,0"));
    assert!(out.contains("col_sums 0,1,0"));
}

#[test]
fn w1_three_points_match_hand_value() {
    // Shipping 0.5 straight from 1 to 3 costs 0.5; the only other vertex of the
    // coupling polytope (1 to 2, 2 to 3) costs 0.5 * 0.2 + 0.5 * 1 = 0.6.
    let res = bdg(&[
        "w1",
        "--p",
        "0.5,0.5,0",
        "--q",
        "0,0.5,0.5",
        "--metric",
        path_str(&fixture("metric.txt")),
    ]);
    let first = stdout(&res).lines().next().unwrap().to_string();
    let cost: f64 = first.strip_prefix("w1 ").unwrap().parse().unwrap();
    assert!((cost - 0.5).abs() < 1e-12, "{first}");
}

#[test]
fn w1_bad_inputs_exit_2() {
    let metric = fixture("metric.txt");
    for (p, q) in [
        ("0.5,0.5", "0,0.5,0.5"),
        ("0.5,0.6,0", "0,0.5,0.5"),
        ("a,b,c", "0,0.5,0.5"),
    ] {
        let res = bdg(&["w1", "--p", p, "--q", q, "--metric", path_str(&metric)]);
        assert_eq!(code(&res), 2, "{p} {q}");
    }
}
