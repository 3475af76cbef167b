mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::scenario_path;
use sqa_core::cli::run_cli;
use sqa_core::game_analysis::build_prop2_scenario;
use sqa_core::scenario_io::{parse_scenario, DocumentSource, ReportRecord};

fn sqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqa"))
        .args(args)
        .env_remove("SQA_SEED")
        .output()
        .expect("sqa binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn run_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = sqa(&["run", path_str(&scenario_path("prop2_eps0.01.json")), "--report", path_str(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("winner 2"));
    let record = ReportRecord::from_json(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(record.winner.0, 2);
    assert_eq!(record.second.0, 1);
    assert!((record.payment - 9.815027).abs() < 1e-6);
    assert!((record.shift_a - 9.1184380).abs() < 1e-6);
    assert!(!record.negative_payment_flag);
    assert!((record.social_welfare_gap - record.winner_utility).abs() < 1e-9);
}

#[test]
fn run_prints_report_without_path() {
    let out = sqa(&["run", path_str(&scenario_path("laptops.json"))]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let record = ReportRecord::from_json(&stdout(&out)).unwrap();
    assert_eq!(record.advertisers.len(), 3);
    assert!(!record.truthful);
}

#[test]
fn bundled_scenarios_all_run() {
    for name in ["laptops.json", "prop2_eps0.01.json", "prop3_eps0.01.json"] {
        let out = sqa(&["run", path_str(&scenario_path(name))]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", stderr(&out));
    }
}

#[test]
fn invalid_lambda_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        dir.path(),
        "bad.json",
        r#"{"question": "q", "organic_answer": "a b",
            "advertisers": [
              {"id": 1, "ad": "a", "lambda": 0.5, "bid": "truthful"},
              {"id": 2, "ad": "b", "lambda": 1.3, "bid": "truthful"}]}"#,
    );
    let out = sqa(&["run", path_str(&path)]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("advertisers[1].lambda"), "{err}");
    assert!(err.contains("advertiser 2"), "{err}");
}

#[test]
fn unknown_field_exits_2_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        dir.path(),
        "typo.json",
        r#"{"question": "q", "organic_answer": "a b",
            "advertisers": [
              {"id": 1, "ad": "a", "lambda": 0.5, "bid": "truthful", "colour": 1},
              {"id": 2, "ad": "b", "lambda": 0.5, "bid": "truthful"}]}"#,
    );
    let out = sqa(&["run", path_str(&path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("advertisers[0]"), "{}", stderr(&out));
}

#[test]
fn disjoint_supports_exit_3_with_hint() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        dir.path(),
        "disjoint.json",
        r#"{"question": "q", "organic_answer": "a a",
            "advertisers": [
              {"id": 1, "ad": "b", "lambda": 0.5, "bid": "truthful"},
              {"id": 2, "ad": "c", "lambda": 0.5, "bid": "truthful"}]}"#,
    );
    let out = sqa(&["run", path_str(&path)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("smoothing_mu > 0"), "{}", stderr(&out));

    let smoothed = std::fs::read_to_string(&path).unwrap().replacen('{', r#"{"smoothing_mu": 0.1, "#, 1);
    std::fs::write(&path, smoothed).unwrap();
    assert_eq!(sqa(&["run", path_str(&path)]).status.code(), Some(0));
}

#[test]
fn missing_scenario_exits_2() {
    assert_eq!(sqa(&["run", "/nonexistent/scenario.json"]).status.code(), Some(2));
}

#[test]
fn sweep_writes_rows_and_flips() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = sqa(&[
        "sweep", "--prop", "3", "--eps-start", "0.01", "--eps-end", "0.49", "--steps", "97", "--out", path_str(&csv),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epsilon,value_gap,utility_gap,pv_gap,winner,payment");
    assert_eq!(lines.len(), 98);
    assert!(!text.contains('\r'));
    let report = stdout(&out);
    let flip = report.lines().find(|l| l.starts_with("first flip of U_1 > U_2:")).unwrap();
    assert!(flip.ends_with(" eps = 0.25"), "{report}");
    let winner = report.lines().find(|l| l.starts_with("first flip of winner = 2:")).unwrap();
    assert!(winner.ends_with(" none"), "{report}");
}

#[test]
fn value_sweep_winner_is_2_for_small_eps() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = sqa(&[
        "sweep", "--prop", "2", "--eps-start", "0.01", "--eps-end", "0.05", "--steps", "5", "--out", path_str(&csv),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let winners: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(4).unwrap()).collect();
    assert_eq!(winners, vec!["2"; 5]);
}

#[test]
fn sweep_rejects_bad_ranges() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let csv = path_str(&csv);
    let bad = [
        vec!["sweep", "--prop", "3", "--eps-start", "0.01", "--eps-end", "0.5", "--steps", "5", "--out", csv],
        vec!["sweep", "--prop", "3", "--eps-start", "0.0", "--eps-end", "0.4", "--steps", "5", "--out", csv],
        vec!["sweep", "--prop", "4", "--eps-start", "0.01", "--eps-end", "0.4", "--steps", "5", "--out", csv],
        vec!["sweep", "--prop", "2", "--eps-start", "0.01", "--eps-end", "0.4", "--steps", "0", "--out", csv],
    ];
    for args in bad {
        assert_eq!(sqa(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn dominance_defaults_pass() {
    let out = sqa(&["dominance", path_str(&scenario_path("prop2_eps0.01.json")), "--advertiser", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("deviations tested: 5050"), "{text}");
    assert!(text.contains("PASS"));
}

#[test]
fn dominance_single_point_grid() {
    let out = sqa(&[
        "dominance",
        path_str(&scenario_path("laptops.json")),
        "--advertiser",
        "3",
        "--grid-points",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("deviations tested: 50"));
}

#[test]
fn dominance_unknown_advertiser_exits_2() {
    let out = sqa(&["dominance", path_str(&scenario_path("laptops.json")), "--advertiser", "9"]);
    assert_eq!(out.status.code(), Some(2));
    let out = sqa(&["dominance", path_str(&scenario_path("laptops.json")), "--advertiser", "1", "--grid-points", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_passes() {
    let out = sqa(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("9 checks, 0 failed"), "{text}");
    assert!(!text.contains("FAIL"));
}

#[test]
fn seed_comes_from_environment() {
    let run = |env: Option<&str>, args: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_sqa"));
        cmd.args(args).env_remove("SQA_SEED");
        if let Some(seed) = env {
            cmd.env("SQA_SEED", seed);
        }
        stdout(&cmd.output().unwrap())
    };
    let scenario = scenario_path("laptops.json");
    let base = ["dominance", path_str(&scenario), "--advertiser", "2", "--profiles", "3"];
    let from_env = run(Some("9"), &base);
    let mut flagged = base.to_vec();
    flagged.extend(["--seed", "9"]);
    assert_eq!(from_env, run(None, &flagged));
    assert!(sqa(&["run", path_str(&scenario), "--seed", "x"]).status.code() == Some(2));
}

#[test]
fn reports_are_byte_identical() {
    let a = sqa(&["run", path_str(&scenario_path("laptops.json"))]);
    let b = sqa(&["run", path_str(&scenario_path("laptops.json")), "--jobs", "1"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn in_process_entry_point() {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_cli(["sqa", "--version"], &mut out, &mut err);
    assert_eq!(code, 0);
    assert!(String::from_utf8(out).unwrap().starts_with("sqa "));
    let code = run_cli(["sqa", "bogus"], &mut Vec::new(), &mut err);
    assert_eq!(code, 2);
}

#[test]
fn bundled_counterexample_matches_construction() {
    let text = std::fs::read_to_string(scenario_path("prop2_eps0.01.json")).unwrap();
    let parsed = parse_scenario(&text).unwrap();
    let built = build_prop2_scenario(0.01).unwrap().setup;
    assert!((parsed.setup.shift_a() - built.shift_a()).abs() <= 1e-12);
    for (a, b) in parsed.setup.advertisers().iter().zip(built.advertisers()) {
        assert_eq!(a.id, b.id);
        assert!((a.value - b.value).abs() <= 1e-12);
        assert!((a.user_utility - b.user_utility).abs() <= 1e-12);
    }
    assert!(matches!(parsed.file.organic_answer, DocumentSource::Counts { .. }));
    assert!(parsed.is_truthful());
}
