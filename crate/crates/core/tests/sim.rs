use dos_lab::config::{BackoffPolicy, Scenario, SystemParams};
use dos_lab::simkit::*;
use dos_lab::solver::{solve_two_level, theta_lower_bound, Strategy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

fn baseline(alpha: f64) -> Scenario {
    Scenario::new(SystemParams::default().with_alpha(alpha), BackoffPolicy::Optimized).unwrap()
}

fn cfg(policy: Policy, n_rounds: u64, outage: bool) -> SimConfig {
    SimConfig { n_rounds, seed: 31, policy, rate_model: RateModel::Approximate, outage }
}

#[test]
fn geometric_contention_mean() {
    let p_s = (-1f64).exp();
    let g = Geometric::new(p_s).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 1_000_000;
    let total: u64 = (0..n).map(|_| 1 + g.sample(&mut rng)).sum();
    let mean = total as f64 / n as f64;
    assert!((mean * p_s - 1.0).abs() < 0.01);
}

#[test]
fn deterministic_given_seed() {
    let s = baseline(1.0);
    let sol = solve_two_level(&s).unwrap();
    let c = cfg(Policy::TwoLevel(sol), 50_000, true);
    assert_eq!(run(&c, &s).unwrap(), run(&c, &s).unwrap());
    assert_eq!(replicate(&c, &s, 3).unwrap(), replicate(&c, &s, 3).unwrap());
    assert_eq!(replicate(&c, &s, 1).unwrap(), run(&c, &s).unwrap());
}

#[test]
fn counts_and_time_accounting() {
    let s = baseline(0.5);
    let sol = solve_two_level(&s).unwrap();
    let r = run(&cfg(Policy::TwoLevel(sol), 100_003, false), &s).unwrap();
    let c = r.decision_counts;
    assert_eq!(c.transmit1 + c.recontend1 + c.probe2, 100_003);
    assert_eq!(c.probe2, c.transmit2 + c.recontend2);
    let tau = s.params.tau;
    let time = tau * (r.contention_slots + c.probe2) as f64 + c.transmit1 as f64 + (1.0 - tau) * c.transmit2 as f64;
    assert_eq!(time, r.total_time);
    assert!((r.mean_contention_slots * s.params.p_s - 1.0).abs() < 0.02);
}

#[test]
fn probe_fraction_matches_first_level_law() {
    let s = baseline(0.3);
    let sol = solve_two_level(&s).unwrap();
    assert_eq!(sol.strategy, Strategy::A);
    let n = 200_000;
    let r = run(&cfg(Policy::TwoLevel(sol), n, false), &s).unwrap();
    let f = s.derived.rate1();
    let p = f.cdf(sol.x_q) - f.cdf(sol.x_j);
    let emp = r.decision_counts.probe2 as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((emp - p).abs() < 4.0 * se, "{emp} vs {p}");
}

#[test]
fn phy_oblivious_reaches_lower_bound() {
    let s = baseline(2.0);
    let r = run(&cfg(Policy::PhyOblivious, 400_000, false), &s).unwrap();
    let theta_l = theta_lower_bound(&s);
    assert!((r.empirical_throughput - theta_l).abs() < 2.0 * r.ci95);
    assert_eq!(r.decision_counts.transmit1, 400_000);
}

#[test]
fn conservative_backoff_removes_outage() {
    let s = Scenario::new(
        SystemParams { m: 2, rho: 0.5, ..SystemParams::default() },
        BackoffPolicy::Fixed { sigma_m: 1e-6, sigma_2m: 1e-6 },
    )
    .unwrap();
    let r = run(&cfg(Policy::PhyOblivious, 100_000, true), &s).unwrap();
    assert_eq!(r.outage_rate, 0.0);
    let aggressive = Scenario::new(
        SystemParams { m: 2, rho: 0.5, ..SystemParams::default() },
        BackoffPolicy::Fixed { sigma_m: 0.9, sigma_2m: 0.9 },
    )
    .unwrap();
    let r = run(&cfg(Policy::PhyOblivious, 100_000, true), &aggressive).unwrap();
    assert!((1.0 - r.outage_rate - aggressive.derived.delivery_probability(1)).abs() < 0.01);
}

#[test]
fn replication_spread_shrinks() {
    let s = baseline(1.0);
    let c = cfg(Policy::OneLevel { theta: 4.0 }, 20_000, false);
    let few = replicate(&c, &s, 4).unwrap();
    let many = replicate(&c, &s, 16).unwrap();
    assert!(many.ci95 < few.ci95);
    assert_eq!(many.replications, 16);
}

#[test]
fn report_serializations() {
    let s = baseline(1.0);
    let r = run(&cfg(Policy::PhyOblivious, 1_000, true), &s).unwrap();
    let back: SimReport = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(back, r);
    let mut buf = Vec::new();
    SimReport::write_csv(&[r.clone(), r], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("policy,n_rounds,replications,empirical_throughput,ci95"));
}

#[test]
fn zero_rounds_rejected() {
    let s = baseline(1.0);
    assert!(run(&cfg(Policy::PhyOblivious, 0, false), &s).is_err());
}
