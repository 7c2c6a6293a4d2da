use std::path::Path;
use std::process::Command;

use fraclayer_cli::output::to_json;
use fraclayer_cli::run::{ErrorReport, Report, RunResult};

fn fraclayer(dir: &Path, config: &str, extra: &[&str], workers: Option<&str>) -> i32 {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fraclayer"));
    cmd.arg(&cfg).arg("--set").arg(format!("out={}", out.display()));
    for e in extra {
        cmd.arg("--set").arg(e);
    }
    cmd.env_remove("FRACLAYER_WORKERS");
    if let Some(w) = workers {
        cmd.env("FRACLAYER_WORKERS", w);
    }
    let status = cmd.output().unwrap().status;
    status.code().unwrap()
}

fn read_report(dir: &Path) -> (String, Report) {
    let text = std::fs::read_to_string(dir.join("out/report.json")).unwrap();
    let r: Report = serde_json::from_str(&text).unwrap();
    (text, r)
}

fn read_error(dir: &Path) -> ErrorReport {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/error.json")).unwrap()).unwrap()
}

#[test]
fn validate_exits_zero_and_round_trips() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(fraclayer(d.path(), "[validate]\n", &[], None), 0);
    let (text, report) = read_report(d.path());
    assert_eq!(to_json(&report).unwrap(), text);
    let RunResult::Validate(v) = &report.result else { panic!("wrong result") };
    assert!(v.all_passed());
    assert!(!d.path().join("out/error.json").exists());
}

#[test]
fn validate_is_identical_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(fraclayer(a.path(), "[validate]\n", &[], Some("1")), 0);
    assert_eq!(fraclayer(b.path(), "[validate]\n", &[], Some("4")), 0);
    let ra = std::fs::read(a.path().join("out/report.json")).unwrap();
    let rb = std::fs::read(b.path().join("out/report.json")).unwrap();
    assert!(ra == rb);
}

#[test]
fn layer_profile_report_round_trips() {
    let d = tempfile::tempdir().unwrap();
    let code = fraclayer(d.path(), "[layer]\ns = 0.7\ngamma = 0.3\nl = 30\n", &[], None);
    assert_eq!(code, 0);
    let (text, report) = read_report(d.path());
    assert_eq!(to_json(&report).unwrap(), text);
    assert_eq!(report.provenance.potential, "quartic");
    let profile = std::fs::read_to_string(d.path().join("out/profile.csv")).unwrap();
    assert!(profile.starts_with("x,value\n"));
    let trace = std::fs::read_to_string(d.path().join("out/trace.csv")).unwrap();
    assert!(trace.starts_with("iter,energy,pgnorm\n"));
}

#[test]
fn m_eps_writes_ladder() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(fraclayer(d.path(), "[m-eps]\neps = 0.1\n", &[], None), 0);
    let ladder = std::fs::read_to_string(d.path().join("out/ladder.csv")).unwrap();
    let mut lines = ladder.lines();
    assert_eq!(lines.next(), Some("eps,m_eps,m_eps_over_eps"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((row[1] / row[0] - row[2]).abs() <= 1e-12 * row[2].abs());
    let (text, report) = read_report(d.path());
    assert_eq!(to_json(&report).unwrap(), text);
}

#[test]
fn gamma_at_well_exits_three() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(fraclayer(d.path(), "[layer]\ngamma = 1.0\n", &[], None), 3);
    let e = read_error(d.path());
    assert_eq!(e.kind, "GammaAtWell");
    assert_eq!(e.exit_code, 3);
}

#[test]
fn range_and_parse_errors_exit_three() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(fraclayer(d.path(), "[layer]\ns = 1.2\n", &[], None), 3);
    let e = read_error(d.path());
    assert_eq!(e.kind, "RangeError");
    assert!(e.message.contains("s must lie in (0,1)"));
    assert_eq!(fraclayer(d.path(), "[layer]\nwhat = 1\n", &[], None), 3);
    assert_eq!(read_error(d.path()).kind, "ParseError");
}

#[test]
fn unconverged_solve_exits_two() {
    let d = tempfile::tempdir().unwrap();
    let code = fraclayer(d.path(), "[heteroclinic]\nl = 20\nmax_iters = 3\n", &[], None);
    assert_eq!(code, 2);
    assert_eq!(read_error(d.path()).kind, "NotConverged");
    let (_, report) = read_report(d.path());
    assert!(!report.converged);
}

#[test]
fn counterexample_reports_positive_sigma() {
    let d = tempfile::tempdir().unwrap();
    let code = fraclayer(d.path(), "[counterexample]\ns = 0.25\neps = [0.01, 0.005]\n", &[], None);
    assert_eq!(code, 0);
    let (text, report) = read_report(d.path());
    assert_eq!(to_json(&report).unwrap(), text);
    let RunResult::Counterexample(c) = &report.result else { panic!("wrong result") };
    assert!(c.sigma_c > 0.0);
    assert!(d.path().join("out/counterexample.csv").exists());
}
