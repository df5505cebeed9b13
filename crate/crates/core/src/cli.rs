//! Command-line front end: `solve`, `simulate` and `sweep`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{BackoffPolicy, Scenario, SystemParams};
use crate::error::{DosError, Result};
use crate::feedback::{solve_two_level_feedback, FeedbackSolution};
use crate::plot::{log_x_chart, Series};
use crate::simkit::{self, Policy, RateModel, SimConfig, SimReport};
use crate::solver::{solve_one_level, solve_two_level, theta_lower_bound, Strategy, TwoLevelSolution};

#[derive(Debug, Parser)]
#[command(name = "dos-lab", version, about = "Opportunistic scheduling with two-level channel probing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the one-level, two-level and feedback policies.
    Solve(SolveArgs),
    /// Solve a policy and check its throughput by simulation.
    Simulate(SimulateArgs),
    /// Relative gain over PHY-oblivious scheduling across alpha = rho * M.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Default)]
pub struct ParamArgs {
    /// JSON file with system parameters; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "ps")]
    pub p_s: Option<f64>,
    /// Comma-separated per-link contention probabilities; sets p_s.
    #[arg(long, value_delimiter = ',')]
    pub link_probs: Option<Vec<f64>>,
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub tau_t: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Sets rho = alpha / M (applied after --m).
    #[arg(long, conflicts_with = "rho")]
    pub alpha: Option<f64>,
    /// `opt` or `fixed:SIGMA_M,SIGMA_2M`.
    #[arg(long, value_parser = parse_backoff)]
    pub backoff: Option<BackoffPolicy>,
    /// Output files, e.g. `--emit json out.json --emit csv out.csv`.
    #[arg(long, num_args = 2, value_names = ["FORMAT", "PATH"], action = clap::ArgAction::Append)]
    pub emit: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    PhyOblivious,
    OneLevel,
    TwoLevel,
    Feedback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RateModelArg {
    Approx,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum, default_value = "two-level")]
    pub policy: PolicyArg,
    #[arg(long, default_value_t = 1_000_000)]
    pub rounds: u64,
    #[arg(long, default_value_t = 1)]
    pub reps: u32,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "approx")]
    pub rate_model: RateModelArg,
    #[arg(long, value_enum, default_value = "on")]
    pub outage: Switch,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Explicit comma-separated alpha values; overrides the log grid.
    #[arg(long, value_delimiter = ',')]
    pub alpha_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.01)]
    pub alpha_min: f64,
    #[arg(long, default_value_t = 100.0)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 20)]
    pub points: usize,
}

fn parse_backoff(s: &str) -> std::result::Result<BackoffPolicy, String> {
    if s == "opt" {
        return Ok(BackoffPolicy::Optimized);
    }
    let rest = s
        .strip_prefix("fixed:")
        .ok_or_else(|| format!("expected `opt` or `fixed:S1,S2`, got `{s}`"))?;
    let (a, b) = rest
        .split_once(',')
        .ok_or_else(|| format!("expected two comma-separated factors, got `{rest}`"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("bad factor `{v}`: {e}"));
    Ok(BackoffPolicy::Fixed {
        sigma_m: parse(a)?,
        sigma_2m: parse(b)?,
    })
}

/// Parameter file: any subset of the parameter keys plus an optional back-off policy.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamFile {
    rho: Option<f64>,
    #[serde(rename = "M")]
    m: Option<u32>,
    #[serde(rename = "W")]
    w: Option<f64>,
    tau_t: Option<f64>,
    tau: Option<f64>,
    #[serde(rename = "T")]
    t: Option<f64>,
    p_s: Option<f64>,
    link_probs: Option<Vec<f64>>,
    backoff: Option<BackoffPolicy>,
}

impl ParamArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<(SystemParams, BackoffPolicy)> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                serde_json::from_str::<ParamFile>(&text)
                    .map_err(|e| DosError::param("config", format!("{}: {e}", path.display())))?
            }
            None => ParamFile::default(),
        };
        let mut p = SystemParams::default();
        p.rho = self.rho.or(file.rho).unwrap_or(p.rho);
        p.m = self.m.or(file.m).unwrap_or(p.m);
        p.w = self.w.or(file.w).unwrap_or(p.w);
        p.tau_t = self.tau_t.or(file.tau_t).unwrap_or(p.tau_t);
        p.tau = self.tau.or(file.tau).unwrap_or(p.tau);
        p.t = file.t.unwrap_or(p.t);
        p.p_s = self.p_s.or(file.p_s).unwrap_or(p.p_s);
        if let Some(alpha) = self.alpha {
            p = p.with_alpha(alpha);
        }
        if self.p_s.is_none() {
            if let Some(probs) = self.link_probs.clone().or(file.link_probs) {
                p = p.with_link_probs(probs)?;
            }
        } else if let Some(probs) = self.link_probs.clone() {
            p.link_probs = Some(probs);
        }
        p.validate()?;
        let backoff = self.backoff.or(file.backoff).unwrap_or_default();
        Ok((p, backoff))
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let (p, b) = self.resolve()?;
        Scenario::new(p, b)
    }

    fn emits(&self) -> Result<Vec<(String, PathBuf)>> {
        self.emit
            .chunks(2)
            .map(|c| {
                let fmt = c[0].to_ascii_lowercase();
                if !matches!(fmt.as_str(), "json" | "csv" | "svg") {
                    return Err(DosError::param("emit", format!("unknown format `{}`", c[0])));
                }
                Ok((fmt, PathBuf::from(&c[1])))
            })
            .collect()
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| DosError::Io(format!("{}: {e}", path.display())))
}

fn unsupported(cmd: &str, fmt: &str) -> DosError {
    DosError::param("emit", format!("`{cmd}` cannot emit {fmt}"))
}

/// Everything `solve` reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub params: SystemParams,
    pub backoff: BackoffPolicy,
    #[serde(rename = "theta_L")]
    pub theta_l: f64,
    #[serde(rename = "theta_B")]
    pub theta_one: f64,
    /// Strategy of the two-level policy, when it could be solved.
    pub strategy: Option<Strategy>,
    pub two_level: Option<TwoLevelSolution>,
    pub two_level_error: Option<String>,
    pub feedback: Option<FeedbackSolution>,
    pub feedback_error: Option<String>,
}

pub fn solve_all(scenario: &Scenario) -> Result<SolveOutput> {
    let theta_one = solve_one_level(scenario)?;
    let (two_level, two_level_error) = split(solve_two_level(scenario));
    let (feedback, feedback_error) = split(solve_two_level_feedback(scenario));
    Ok(SolveOutput {
        params: scenario.params.clone(),
        backoff: scenario.backoff,
        theta_l: theta_lower_bound(scenario),
        theta_one,
        strategy: two_level.map(|s| s.strategy),
        two_level,
        two_level_error,
        feedback,
        feedback_error,
    })
}

fn split<T>(r: Result<T>) -> (Option<T>, Option<String>) {
    match r {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

pub fn cmd_solve(args: &SolveArgs) -> Result<String> {
    let scenario = args.params.scenario()?;
    let out = solve_all(&scenario)?;
    let json = serde_json::to_string_pretty(&out).expect("solution serializes");
    for (fmt, path) in args.params.emits()? {
        match fmt.as_str() {
            "json" => write(&path, &json)?,
            other => return Err(unsupported("solve", other)),
        }
    }
    Ok(json)
}

/// Analytic counterpart of a simulated policy.
pub fn policy_for(arg: PolicyArg, scenario: &Scenario) -> Result<(Policy, f64)> {
    Ok(match arg {
        PolicyArg::PhyOblivious => (Policy::PhyOblivious, theta_lower_bound(scenario)),
        PolicyArg::OneLevel => {
            let theta = solve_one_level(scenario)?;
            (Policy::OneLevel { theta }, theta)
        }
        PolicyArg::TwoLevel => {
            let sol = solve_two_level(scenario)?;
            (Policy::TwoLevel(sol), sol.theta_star)
        }
        PolicyArg::Feedback => {
            let sol = solve_two_level_feedback(scenario)?;
            (Policy::Feedback(sol), sol.throughput())
        }
    })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<String> {
    let scenario = args.params.scenario()?;
    let (policy, analytic) = policy_for(args.policy, &scenario)?;
    let sim = SimConfig {
        n_rounds: args.rounds,
        seed: args.seed,
        policy,
        rate_model: match args.rate_model {
            RateModelArg::Approx => RateModel::Approximate,
            RateModelArg::Exact => RateModel::Exact,
        },
        outage: args.outage == Switch::On,
    };
    let report = simkit::replicate(&sim, &scenario, args.reps)?;
    for (fmt, path) in args.params.emits()? {
        match fmt.as_str() {
            "json" => write(&path, &report.to_json())?,
            "csv" => {
                let mut buf = Vec::new();
                SimReport::write_csv(std::slice::from_ref(&report), &mut buf)?;
                write(&path, &String::from_utf8_lossy(&buf))?;
            }
            other => return Err(unsupported("simulate", other)),
        }
    }
    let c = &report.decision_counts;
    Ok(format!(
        "policy              {}\n\
         rounds              {} x {} replication(s)\n\
         analytic            {analytic:.6}\n\
         empirical           {:.6} +/- {:.6}\n\
         relative error      {:+.4}%\n\
         outage rate         {:.5}\n\
         mean slots / round  {:.4}\n\
         decisions           transmit1={} recontend1={} probe2={} transmit2={} recontend2={}",
        report.policy,
        args.rounds,
        report.replications,
        report.empirical_throughput,
        report.ci95,
        100.0 * (report.empirical_throughput / analytic - 1.0),
        report.outage_rate,
        report.mean_contention_slots,
        c.transmit1,
        c.recontend1,
        c.probe2,
        c.transmit2,
        c.recontend2,
    ))
}

/// One alpha point of the relative-gain curves. Column order of the CSV
/// follows the field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    #[serde(rename = "theta_L")]
    pub theta_l: f64,
    pub theta_one: f64,
    pub theta_two: f64,
    pub gamma_hat_max: f64,
    pub gamma_max: f64,
    #[serde(rename = "Gamma_one")]
    pub gain_one: f64,
    #[serde(rename = "Gamma_two")]
    pub gain_two: f64,
    /// `A`, `B`, or empty when the row failed.
    pub strategy: String,
    pub feedback_strategy: String,
    /// `ok`, or the first error met at this point.
    pub status: String,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

fn strategy_label(s: Strategy) -> String {
    match s {
        Strategy::A => "A".into(),
        Strategy::B => "B".into(),
    }
}

pub fn sweep_point(base: &SystemParams, backoff: BackoffPolicy, alpha: f64) -> SweepRow {
    let mut row = SweepRow {
        alpha,
        theta_l: f64::NAN,
        theta_one: f64::NAN,
        theta_two: f64::NAN,
        gamma_hat_max: f64::NAN,
        gamma_max: f64::NAN,
        gain_one: f64::NAN,
        gain_two: f64::NAN,
        strategy: String::new(),
        feedback_strategy: String::new(),
        status: "ok".into(),
    };
    let scenario = match Scenario::new(base.with_alpha(alpha), backoff) {
        Ok(s) => s,
        Err(e) => {
            row.status = e.to_string();
            return row;
        }
    };
    row.theta_l = theta_lower_bound(&scenario);
    match solve_two_level(&scenario) {
        Ok(sol) => {
            row.theta_one = sol.theta_star_b;
            row.theta_two = sol.theta_star;
            row.gain_one = (sol.theta_star_b - sol.theta_l) / sol.theta_l;
            row.gain_two = (sol.theta_star - sol.theta_l) / sol.theta_l;
            row.strategy = strategy_label(sol.strategy);
        }
        Err(e) => row.status = e.to_string(),
    }
    match solve_two_level_feedback(&scenario) {
        Ok(fb) => {
            row.gamma_hat_max = fb.gamma_hat_max;
            row.gamma_max = fb.gamma_max;
            row.feedback_strategy = strategy_label(fb.strategy);
        }
        Err(e) if row.ok() => row.status = e.to_string(),
        Err(_) => {}
    }
    row
}

/// Solve every grid point in parallel; rows come back in grid order.
pub fn sweep(base: &SystemParams, backoff: BackoffPolicy, alphas: &[f64]) -> Vec<SweepRow> {
    alphas.par_iter().map(|&a| sweep_point(base, backoff, a)).collect()
}

pub fn log_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![min];
    }
    let step = (max / min).ln() / (points - 1) as f64;
    (0..points).map(|i| min * (step * i as f64).exp()).collect()
}

const MAX_EXTENSIONS: usize = 6;

/// Log-grid sweep that keeps adding points at the same spacing until both
/// strategies appear (up to six extra decades per side).
pub fn sweep_auto(base: &SystemParams, backoff: BackoffPolicy, min: f64, max: f64, points: usize) -> Vec<SweepRow> {
    let mut rows = sweep(base, backoff, &log_grid(min, max, points));
    if points < 2 {
        return rows;
    }
    let ratio = (max / min).powf(1.0 / (points - 1) as f64);
    let per_decade = (10f64.ln() / ratio.ln()).ceil().max(1.0) as usize;
    for _ in 0..MAX_EXTENSIONS {
        let last_a = rows.iter().rev().find(|r| r.ok()).is_some_and(|r| r.strategy == "A");
        let first_b = rows.iter().find(|r| r.ok()).is_some_and(|r| r.strategy == "B");
        if !last_a && !first_b {
            break;
        }
        if last_a {
            let top = rows.last().map(|r| r.alpha).unwrap_or(max);
            let extra: Vec<f64> = (1..=per_decade).map(|i| top * ratio.powi(i as i32)).collect();
            rows.extend(sweep(base, backoff, &extra));
        }
        if first_b {
            let bottom = rows.first().map(|r| r.alpha).unwrap_or(min);
            let mut extra: Vec<f64> = (1..=per_decade).map(|i| bottom / ratio.powi(i as i32)).collect();
            extra.reverse();
            let mut lower = sweep(base, backoff, &extra);
            lower.extend(rows);
            rows = lower;
        }
    }
    rows
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| DosError::Io(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| DosError::Io(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

/// Chart of both relative-gain curves; uses only the CSV columns.
pub fn sweep_svg(rows: &[SweepRow]) -> String {
    let curve = |f: fn(&SweepRow) -> f64| rows.iter().filter(|r| r.ok()).map(|r| (r.alpha, f(r))).collect();
    log_x_chart(
        "Relative gain over PHY-oblivious scheduling",
        "alpha = rho M",
        "Gamma",
        &[
            Series { label: "one-level probing", color: "#1f77b4", points: curve(|r| r.gain_one) },
            Series { label: "two-level probing", color: "#d62728", points: curve(|r| r.gain_two) },
        ],
    )
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<String> {
    let (base, backoff) = args.params.resolve()?;
    let rows = match &args.alpha_grid {
        Some(grid) if grid.is_empty() => return Err(DosError::param("alpha_grid", "must not be empty")),
        Some(grid) => {
            if let Some(a) = grid.iter().find(|a| !(**a > 0.0)) {
                return Err(DosError::param("alpha_grid", format!("alpha must be > 0, got {a}")));
            }
            sweep(&base, backoff, grid)
        }
        None => {
            if !(args.alpha_min > 0.0 && args.alpha_max >= args.alpha_min && args.points >= 1) {
                return Err(DosError::param("alpha range", "need 0 < alpha_min <= alpha_max and points >= 1"));
            }
            sweep_auto(&base, backoff, args.alpha_min, args.alpha_max, args.points)
        }
    };
    let csv = sweep_csv(&rows)?;
    for (fmt, path) in args.params.emits()? {
        match fmt.as_str() {
            "csv" => write(&path, &csv)?,
            "svg" => write(&path, &sweep_svg(&rows))?,
            "json" => write(&path, &serde_json::to_string_pretty(&rows).expect("rows serialize"))?,
            _ => unreachable!(),
        }
    }
    Ok(csv)
}

/// Parse and run; returns the text to print on stdout.
pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_flag_forms() {
        assert_eq!(parse_backoff("opt").unwrap(), BackoffPolicy::Optimized);
        assert_eq!(
            parse_backoff("fixed:0.9,0.95").unwrap(),
            BackoffPolicy::Fixed { sigma_m: 0.9, sigma_2m: 0.95 }
        );
        assert!(parse_backoff("fixed:0.9").is_err());
        assert!(parse_backoff("greedy").is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(0.01, 100.0, 5);
        assert_eq!(g.len(), 5);
        assert!((g[2] - 1.0).abs() < 1e-12 && (g[4] - 100.0).abs() < 1e-10);
        assert_eq!(log_grid(3.0, 3.0, 1), vec![3.0]);
    }

    #[test]
    fn flags_override_defaults() {
        let args = ParamArgs { tau: Some(0.3), alpha: Some(2.0), ..Default::default() };
        let (p, b) = args.resolve().unwrap();
        assert_eq!(p.tau, 0.3);
        assert!((p.alpha() - 2.0).abs() < 1e-12);
        assert_eq!(b, BackoffPolicy::Optimized);
    }

    #[test]
    fn link_probs_set_ps() {
        let args = ParamArgs { link_probs: Some(vec![0.5, 0.5]), ..Default::default() };
        let (p, _) = args.resolve().unwrap();
        assert!((p.p_s - 0.5).abs() < 1e-15);
    }
}
