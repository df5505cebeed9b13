use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dos-lab"))
}

fn ok(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn solve_reports_strategy() {
    let text = ok(&["solve", "--ps", "0.3679", "--m", "300", "--w", "3000", "--tau", "0.2"]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let s = v["strategy"].as_str().unwrap();
    assert!(s == "A" || s == "B");
    assert!(v["two_level"]["x_J"].is_number());
    assert!(v["feedback"]["R1_star"].is_number());
}

#[test]
fn invalid_tau_fails() {
    let out = bin().args(["solve", "--tau", "1.5"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau"));
}

#[test]
fn solve_emits_round_trippable_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let printed = ok(&["solve", "--alpha", "0.5", "--emit", "json", path.to_str().unwrap()]);
    let written = std::fs::read_to_string(&path).unwrap();
    assert_eq!(printed.trim(), written.trim());
    let parsed: dos_lab::cli::SolveOutput = serde_json::from_str(&written).unwrap();
    assert_eq!(serde_json::to_string_pretty(&parsed).unwrap(), written);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("p.json");
    std::fs::write(&cfg, r#"{"rho": 0.01, "M": 100, "tau": 0.25, "backoff": {"fixed": {"sigma_m": 0.9, "sigma_2m": 0.95}}}"#).unwrap();
    let v: serde_json::Value =
        serde_json::from_str(&ok(&["solve", "--config", cfg.to_str().unwrap(), "--tau", "0.3"])).unwrap();
    assert_eq!(v["params"]["tau"], 0.3);
    assert_eq!(v["params"]["M"], 100);
    assert_eq!(v["backoff"]["fixed"]["sigma_m"], 0.9);
}

#[test]
fn simulate_is_reproducible_and_accurate() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let common = ["simulate", "--alpha", "1", "--policy", "two-level", "--outage", "off", "--rounds", "1000000", "--seed", "5"];
    let text = ok(&[&common[..], &["--emit", "csv", a.to_str().unwrap()]].concat());
    ok(&[&common[..], &["--emit", "csv", b.to_str().unwrap()]].concat());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let rel: f64 = text
        .lines()
        .find(|l| l.starts_with("relative error"))
        .and_then(|l| l.split_whitespace().last())
        .map(|v| v.trim_end_matches('%').parse().unwrap())
        .unwrap();
    assert!(rel.abs() < 2.0, "{text}");
}

#[test]
fn simulate_phy_oblivious() {
    let text = ok(&["simulate", "--policy", "phy-oblivious", "--rounds", "200000", "--outage", "off"]);
    assert!(text.contains("policy              phy-oblivious"));
    assert!(text.contains("recontend1=0"));
}

#[test]
fn sweep_single_point_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let svg = dir.path().join("s.svg");
    ok(&["sweep", "--alpha-grid", "0.5", "--emit", "csv", csv.to_str().unwrap(), "--emit", "svg", svg.to_str().unwrap()]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "alpha,theta_L,theta_one,theta_two,gamma_hat_max,gamma_max,Gamma_one,Gamma_two,strategy,feedback_strategy,status"
    );
    assert_eq!(lines.count(), 1);
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<polyline"));
}

#[test]
fn default_sweep_shows_both_strategies() {
    let text = ok(&["sweep", "--points", "8"]);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).filter(|l| !l.is_empty()).map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().any(|r| r[8] == "A") && rows.iter().any(|r| r[8] == "B"));
    for r in &rows {
        let (one, two): (f64, f64) = (r[6].parse().unwrap(), r[7].parse().unwrap());
        assert!(two >= one);
    }
}

#[test]
fn unknown_emit_format_rejected() {
    let out = bin().args(["solve", "--emit", "xml", "x.xml"]).output().unwrap();
    assert!(!out.status.success());
}
