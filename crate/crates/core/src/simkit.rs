//! Monte Carlo simulation of contention, probing, decisions and delivery.
//!
//! One round runs from the first contention slot to the moment the winning
//! link either transmits or gives up the channel. Every round draws the
//! contention count, a fresh channel and both pilot blocks whether or not
//! the policy uses them, so different policies run on the same seed see the
//! same channels.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::chanmodel::ChannelModel;
pub use crate::chanmodel::RateModel;
use crate::config::Scenario;
use crate::error::{DosError, Result};
use crate::feedback::{FeedbackSolution, FeedbackSymbol};
use crate::solver::{FirstStage, TwoLevelSolution};

pub const BATCHES: u64 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Policy {
    /// Transmit on every first success.
    PhyOblivious,
    /// Transmit iff the first-level rate reaches `theta`.
    OneLevel { theta: f64 },
    TwoLevel(TwoLevelSolution),
    Feedback(FeedbackSolution),
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::PhyOblivious => "phy-oblivious",
            Policy::OneLevel { .. } => "one-level",
            Policy::TwoLevel(_) => "two-level",
            Policy::Feedback(_) => "feedback",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_rounds: u64,
    pub seed: u64,
    pub policy: Policy,
    pub rate_model: RateModel,
    /// Account for transmissions whose rate the channel cannot support.
    pub outage: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecisionCounts {
    pub transmit1: u64,
    pub recontend1: u64,
    pub probe2: u64,
    pub transmit2: u64,
    pub recontend2: u64,
}

impl DecisionCounts {
    fn add(&mut self, o: &DecisionCounts) {
        self.transmit1 += o.transmit1;
        self.recontend1 += o.recontend1;
        self.probe2 += o.probe2;
        self.transmit2 += o.transmit2;
        self.recontend2 += o.recontend2;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub policy: String,
    pub n_rounds: u64,
    pub replications: u32,
    pub empirical_throughput: f64,
    pub ci95: f64,
    pub outage_rate: f64,
    pub decision_counts: DecisionCounts,
    pub mean_contention_slots: f64,
    pub contention_slots: u64,
    pub outages: u64,
    pub total_bits: f64,
    pub total_time: f64,
}

/// Flat CSV row for a [`SimReport`].
#[derive(Debug, Serialize)]
struct SimRow<'a> {
    policy: &'a str,
    n_rounds: u64,
    replications: u32,
    empirical_throughput: f64,
    ci95: f64,
    outage_rate: f64,
    transmit1: u64,
    recontend1: u64,
    probe2: u64,
    transmit2: u64,
    recontend2: u64,
    mean_contention_slots: f64,
    total_bits: f64,
    total_time: f64,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Write reports as CSV with a header row.
    pub fn write_csv<W: std::io::Write>(reports: &[SimReport], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in reports {
            let c = &r.decision_counts;
            w.serialize(SimRow {
                policy: &r.policy,
                n_rounds: r.n_rounds,
                replications: r.replications,
                empirical_throughput: r.empirical_throughput,
                ci95: r.ci95,
                outage_rate: r.outage_rate,
                transmit1: c.transmit1,
                recontend1: c.recontend1,
                probe2: c.probe2,
                transmit2: c.transmit2,
                recontend2: c.recontend2,
                mean_contention_slots: r.mean_contention_slots,
                total_bits: r.total_bits,
                total_time: r.total_time,
            })
            .map_err(|e| DosError::Contract(format!("csv output: {e}")))?;
        }
        w.flush().map_err(|e| DosError::Contract(format!("csv output: {e}")))?;
        Ok(())
    }
}

/// Outcome of one transmission attempt.
struct Delivery {
    bits_per_time: f64,
    outage: bool,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    slots: u64,
    counts: DecisionCounts,
    outages: u64,
    bits: f64,
}

impl Tally {
    fn time(&self, tau: f64) -> f64 {
        tau * (self.slots + self.counts.probe2) as f64
            + self.counts.transmit1 as f64
            + (1.0 - tau) * self.counts.transmit2 as f64
    }

    fn merge(&mut self, o: &Tally) {
        self.slots += o.slots;
        self.counts.add(&o.counts);
        self.outages += o.outages;
        self.bits += o.bits;
    }
}

fn t_quantile(df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975)
}

fn mean_and_half_width(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, t_quantile(n - 1.0) * (var / n).sqrt())
}

/// A single replication on RNG stream 0.
pub fn run(sim: &SimConfig, scenario: &Scenario) -> Result<SimReport> {
    run_stream(sim, scenario, 0)
}

/// A single replication on the given stream of the configured seed.
pub fn run_stream(sim: &SimConfig, scenario: &Scenario, stream: u64) -> Result<SimReport> {
    if sim.n_rounds == 0 {
        return Err(DosError::param("n_rounds", "must be >= 1"));
    }
    let p = &scenario.params;
    let tau = p.tau;
    let model = ChannelModel::new(p, &scenario.derived, sim.rate_model);
    let contention = Geometric::new(p.p_s)
        .map_err(|e| DosError::param("p_s", format!("{e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    rng.set_stream(stream);

    // Delivered rate of a variable-rate transmission.
    let variable = |est: &crate::chanmodel::RateEstimate| -> Delivery {
        if sim.outage {
            let o = model.outage_check(est);
            Delivery { bits_per_time: o.goodput, outage: !o.delivered }
        } else {
            Delivery { bits_per_time: est.rate, outage: false }
        }
    };
    // Delivered rate of a fixed-rate transmission.
    let fixed = |rate: f64, est: &crate::chanmodel::RateEstimate| -> Delivery {
        let ok = !sim.outage || rate <= model.supportable_rate(est);
        Delivery { bits_per_time: if ok { rate } else { 0.0 }, outage: !ok }
    };

    let batches = BATCHES.min(sim.n_rounds);
    let mut total = Tally::default();
    let mut batch_ratios = Vec::with_capacity(batches as usize);
    for b in 0..batches {
        let size = sim.n_rounds / batches + u64::from(b < sim.n_rounds % batches);
        let mut t = Tally::default();
        for _ in 0..size {
            t.slots += 1 + contention.sample(&mut rng);
            let sums = model.sample_sums(&mut rng);
            let e1 = model.estimate_level1(&sums);
            let e2 = model.estimate_level2(&sums);
            let r1 = e1.rate;

            // (first stage transmits, probe, second stage transmits)
            let (first, second): (Option<Delivery>, Option<Option<Delivery>>) = match &sim.policy {
                Policy::PhyOblivious => (Some(variable(&e1)), None),
                Policy::OneLevel { theta } => ((r1 >= *theta).then(|| variable(&e1)), None),
                Policy::TwoLevel(sol) => match sol.first_stage(r1) {
                    FirstStage::Transmit => (Some(variable(&e1)), None),
                    FirstStage::Recontend => (None, None),
                    FirstStage::Probe => (None, Some(sol.second_stage(e2.rate).then(|| variable(&e2)))),
                },
                Policy::Feedback(sol) => match sol.first_symbol(r1) {
                    FeedbackSymbol::Ack => (Some(fixed(sol.rate(), &e1)), None),
                    FeedbackSymbol::Nack => (None, None),
                    FeedbackSymbol::Erasure => (
                        None,
                        Some((sol.second_symbol(e2.rate) == FeedbackSymbol::Ack).then(|| fixed(sol.rate(), &e2))),
                    ),
                },
            };
            match (first, second) {
                (Some(d), _) => {
                    t.counts.transmit1 += 1;
                    t.outages += u64::from(d.outage);
                    t.bits += d.bits_per_time;
                }
                (None, None) => t.counts.recontend1 += 1,
                (None, Some(probe)) => {
                    t.counts.probe2 += 1;
                    match probe {
                        Some(d) => {
                            t.counts.transmit2 += 1;
                            t.outages += u64::from(d.outage);
                            t.bits += (1.0 - tau) * d.bits_per_time;
                        }
                        None => t.counts.recontend2 += 1,
                    }
                }
            }
        }
        batch_ratios.push(t.bits / t.time(tau));
        total.merge(&t);
    }

    let (_, ci95) = mean_and_half_width(&batch_ratios);
    Ok(report(sim, &total, tau, 1, ci95))
}

fn report(sim: &SimConfig, t: &Tally, tau: f64, replications: u32, ci95: f64) -> SimReport {
    let transmissions = t.counts.transmit1 + t.counts.transmit2;
    let rounds = t.counts.transmit1 + t.counts.recontend1 + t.counts.probe2;
    let time = t.time(tau);
    SimReport {
        policy: sim.policy.name().to_string(),
        n_rounds: rounds,
        replications,
        empirical_throughput: t.bits / time,
        ci95,
        outage_rate: if transmissions == 0 { 0.0 } else { t.outages as f64 / transmissions as f64 },
        decision_counts: t.counts,
        mean_contention_slots: t.slots as f64 / rounds as f64,
        contention_slots: t.slots,
        outages: t.outages,
        total_bits: t.bits,
        total_time: time,
    }
}

/// Independent replications on streams `0..n_reps`, run in parallel.
pub fn replicate_runs(sim: &SimConfig, scenario: &Scenario, n_reps: u32) -> Result<Vec<SimReport>> {
    if n_reps == 0 {
        return Err(DosError::param("n_reps", "must be >= 1"));
    }
    (0..n_reps)
        .into_par_iter()
        .map(|rep| run_stream(sim, scenario, u64::from(rep)))
        .collect()
}

/// Aggregate of [`replicate_runs`]: throughput is the mean over replications
/// and the interval comes from their spread. One replication is returned as is.
pub fn replicate(sim: &SimConfig, scenario: &Scenario, n_reps: u32) -> Result<SimReport> {
    let mut runs = replicate_runs(sim, scenario, n_reps)?;
    if runs.len() == 1 {
        return Ok(runs.remove(0));
    }
    let throughputs: Vec<f64> = runs.iter().map(|r| r.empirical_throughput).collect();
    let (mean, ci95) = mean_and_half_width(&throughputs);
    let mut counts = DecisionCounts::default();
    let (mut slots, mut outages, mut bits, mut time) = (0u64, 0u64, 0.0, 0.0);
    for r in &runs {
        counts.add(&r.decision_counts);
        slots += r.contention_slots;
        outages += r.outages;
        bits += r.total_bits;
        time += r.total_time;
    }
    let rounds = counts.transmit1 + counts.recontend1 + counts.probe2;
    let transmissions = counts.transmit1 + counts.transmit2;
    Ok(SimReport {
        policy: sim.policy.name().to_string(),
        n_rounds: rounds,
        replications: n_reps,
        empirical_throughput: mean,
        ci95,
        outage_rate: if transmissions == 0 { 0.0 } else { outages as f64 / transmissions as f64 },
        decision_counts: counts,
        mean_contention_slots: slots as f64 / rounds as f64,
        contention_slots: slots,
        outages,
        total_bits: bits,
        total_time: time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_quantile_reference() {
        assert!((t_quantile(49.0) - 2.009_575_237_129_9).abs() < 1e-9);
    }

    #[test]
    fn half_width_of_constant_sample_is_zero() {
        let (m, h) = mean_and_half_width(&[2.0; 10]);
        assert_eq!((m, h), (2.0, 0.0));
        assert!(mean_and_half_width(&[1.0]).1.is_nan());
    }
}
