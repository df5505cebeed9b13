//! Optimal two-level probing policy under full rate knowledge.
//!
//! For a price `theta` per unit of system time, a link that observed a
//! first-level rate `x` compares three net rewards: transmit now (`x - theta`),
//! give the channel up (`0`), or probe again and then act optimally
//! (`J_theta(x)`). The optimal throughput is the price at which the expected
//! best reward exactly pays for one contention round:
//!
//! ```text
//! E[max{R1 - theta, J_theta(R1), 0}] = theta * tau / p_s
//! ```
//!
//! `J_theta` increases in `x` and `q(x) = J_theta(x) - x + theta` decreases,
//! and they meet at `x = theta`. Their zeros `x_J` and `x_q` delimit the
//! "probe again" interval whenever `J_theta(theta) >= 0`; otherwise the
//! interval is empty and the single-threshold rule is optimal.

use serde::{Deserialize, Serialize};

use crate::config::Scenario;
use crate::dist::{quad, ConditionalRateDist, RateDist};
use crate::error::{DosError, Result};
use crate::roots::{expand_upper, try_bisect, Tolerance};

const MAX_DOUBLINGS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    /// Two thresholds with a second-probe interval between them.
    A,
    /// Single threshold; never probe twice.
    B,
}

/// Rewards seen at a fixed price `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardContext {
    pub theta: f64,
    pub tau: f64,
    pub p_s: f64,
    pub dist: ConditionalRateDist,
    pub rate1: RateDist,
}

impl RewardContext {
    pub fn new(scenario: &Scenario, theta: f64) -> Self {
        Self {
            theta,
            tau: scenario.params.tau,
            p_s: scenario.params.p_s,
            dist: scenario.derived.conditional(),
            rate1: scenario.derived.rate1(),
        }
    }

    /// Net reward of probing again at first-level rate `x`:
    /// `(1 - tau) int_theta^inf (1 - G(u|x)) du - theta tau`.
    pub fn reward_j(&self, x: f64) -> f64 {
        (1.0 - self.tau) * self.dist.excess_mean(self.theta, x) - self.theta * self.tau
    }

    /// Same quantity through the head-integral form
    /// `(1 - tau)(c_r x + R_e - theta + int_0^theta G(u|x) du) - theta tau`.
    pub fn reward_j_head_form(&self, x: f64) -> f64 {
        let head = self.dist.head_mass(self.theta, x);
        (1.0 - self.tau) * (self.dist.mean(x) - self.theta + head) - self.theta * self.tau
    }

    /// Gain of probing again over transmitting at `x`:
    /// `(c_r (1 - tau) - 1) x + (1 - tau) R_e + (1 - tau) int_0^theta G(u|x) du`.
    pub fn gain_q(&self, x: f64) -> f64 {
        let d = &self.dist;
        (d.c_r * (1.0 - self.tau) - 1.0) * x
            + (1.0 - self.tau) * d.r_e
            + (1.0 - self.tau) * d.head_mass(self.theta, x)
    }

    /// Zero of the increasing `reward_j`, or `0` with `clamped = true` when
    /// probing pays even at `x = 0`.
    pub fn lower_threshold(&self) -> Result<(f64, bool)> {
        if self.reward_j(0.0) >= 0.0 {
            return Ok((0.0, true));
        }
        let start = self.theta.max(self.rate1.mean);
        let hi = expand_upper(|x| Ok(self.reward_j(x)), 0.0, start, MAX_DOUBLINGS)?;
        let x = try_bisect(|x| Ok(self.reward_j(x)), 0.0, hi, Tolerance::machine())?;
        Ok((x, false))
    }

    /// Zero of the decreasing `gain_q`.
    pub fn upper_threshold(&self) -> Result<f64> {
        let start = self.theta.max(self.rate1.mean);
        let hi = expand_upper(|x| Ok(self.gain_q(x)), 0.0, start, MAX_DOUBLINGS)?;
        try_bisect(|x| Ok(self.gain_q(x)), 0.0, hi, Tolerance::machine())
    }

    /// `int_{lo}^{hi} J_theta(u) dF(u)` over the first-level law.
    pub fn probe_value(&self, lo: f64, hi: f64) -> f64 {
        let scale = self.rate1.mean;
        quad::integrate(|u| self.reward_j(u) * self.rate1.pdf(u), lo, hi, 1e-14 * scale, 1e-13).value
    }
}

/// `E[R1] / (tau / p_s + 1)`: always transmit on the first success.
pub fn theta_lower_bound(scenario: &Scenario) -> f64 {
    scenario.derived.mean_r1 / (scenario.contention_cost() + 1.0)
}

/// Root of `mean e^{-theta/mean} = theta * cost` for an exponential rate.
pub fn one_level_threshold(mean: f64, cost: f64) -> Result<f64> {
    if !(mean > 0.0) {
        return Err(DosError::param("mean_r1", format!("must be > 0, got {mean}")));
    }
    if !(cost > 0.0) || !(mean / cost).is_finite() {
        return Err(DosError::solver(
            "one-level threshold",
            format!("contention cost {cost} leaves the threshold unbounded"),
        ));
    }
    let f = |t: f64| Ok(mean * (-t / mean).exp() - t * cost);
    // f > 0 at the always-transmit throughput, f < 0 at mean / cost
    try_bisect(f, mean / (1.0 + cost), mean / cost, Tolerance::machine())
}

/// Single-level optimal threshold, which is also its throughput.
pub fn solve_one_level(scenario: &Scenario) -> Result<f64> {
    one_level_threshold(scenario.derived.mean_r1, scenario.contention_cost())
}

/// Residuals of the three threshold conditions at a Strategy-A solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResiduals {
    /// `int_theta^inf (1 - G(u|x_J)) du - theta tau / (1 - tau)`.
    pub lower: f64,
    /// `q(x_q)`.
    pub upper: f64,
    /// Expected reward over the round minus the contention cost.
    pub balance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelSolution {
    pub strategy: Strategy,
    #[serde(rename = "x_J")]
    pub x_j: f64,
    pub x_q: f64,
    /// Throughput of the selected strategy.
    pub theta_star: f64,
    #[serde(rename = "theta_A")]
    pub theta_star_a: Option<f64>,
    #[serde(rename = "theta_B")]
    pub theta_star_b: f64,
    #[serde(rename = "theta_L")]
    pub theta_l: f64,
    pub residuals: Option<ThresholdResiduals>,
    /// `J_{theta*}(theta*)`, whose sign selects the strategy.
    pub probe_gain_at_theta: f64,
    /// `x_J` was pinned to zero because probing pays even at `x = 0`.
    pub lower_threshold_clamped: bool,
    /// `R_e / theta* e^{-theta*/R_e} < tau / (1 - tau)`, checked at the solution.
    pub floor_condition_holds: bool,
}

/// Expected best reward minus contention cost at price `theta`, using the
/// threshold structure.
fn balance(ctx: &RewardContext, cost: f64) -> Result<(f64, f64, f64, bool)> {
    let (x_j, clamped) = ctx.lower_threshold()?;
    let x_q = ctx.upper_threshold()?;
    let value = if x_j <= x_q {
        ctx.probe_value(x_j, x_q) + ctx.rate1.partial_excess(x_q, ctx.theta)
    } else {
        ctx.rate1.excess_mean(ctx.theta)
    };
    Ok((value - ctx.theta * cost, x_j, x_q, clamped))
}

/// The same balance computed without thresholds, by quadrature of
/// `max{x - theta, J_theta(x), 0}` against the exponential first-level law,
/// split at the kink `x = theta` and truncated where `e^{-x / mean}` is
/// below `e^-60`.
pub fn optimality_residual(scenario: &Scenario, theta: f64) -> f64 {
    let ctx = RewardContext::new(scenario, theta);
    let mean = ctx.rate1.mean;
    let integrand =
        |x: f64| (x - theta).max(ctx.reward_j(x)).max(0.0) * (-x / mean).exp() / mean;
    let end = theta + 60.0 * mean;
    let head = quad::integrate(integrand, 0.0, theta, 1e-14 * mean, 1e-13);
    let tail = quad::integrate(integrand, theta, end, 1e-14 * mean, 1e-13);
    head.value + tail.value - theta * scenario.contention_cost()
}

fn check_regularity(scenario: &Scenario) -> Result<()> {
    let tau = scenario.params.tau;
    let c_r = scenario.derived.c_r;
    if c_r >= 1.0 / (1.0 - tau) {
        return Err(DosError::Regularity {
            condition: "c_r < 1 / (1 - tau)",
            detail: format!(
                "c_r = {c_r} but 1 / (1 - tau) = {}; the probe-gain function is not decreasing",
                1.0 / (1.0 - tau)
            ),
        });
    }
    Ok(())
}

/// Solve for the optimal two-level policy and select between strategies.
pub fn solve_two_level(scenario: &Scenario) -> Result<TwoLevelSolution> {
    check_regularity(scenario)?;
    let cost = scenario.contention_cost();
    let d = &scenario.derived;
    let theta_l = theta_lower_bound(scenario);
    let theta_b = solve_one_level(scenario)?;

    let residual = |theta: f64| -> Result<f64> {
        let ctx = RewardContext::new(scenario, theta);
        Ok(balance(&ctx, cost)?.0)
    };
    let lo = theta_l * (1.0 + 1e-9);
    let hi = expand_upper(residual, lo, theta_b * d.mean_r2 / d.mean_r1, MAX_DOUBLINGS)
        .map_err(|e| DosError::solver("throughput bracket", e.to_string()))?;
    let theta = try_bisect(residual, lo, hi, Tolerance::machine())?;

    let ctx = RewardContext::new(scenario, theta);
    let (bal, x_j, x_q, clamped) = balance(&ctx, cost)?;
    let gain = ctx.reward_j(theta);
    let floor_condition_holds = {
        let t = theta / d.r_e;
        (-t).exp() / t < scenario.params.tau / (1.0 - scenario.params.tau)
    };

    let strategy = if gain >= 0.0 && x_j <= x_q {
        Strategy::A
    } else {
        Strategy::B
    };
    let (theta_star, theta_star_a, residuals) = match strategy {
        Strategy::A => (
            theta,
            Some(theta),
            Some(ThresholdResiduals {
                lower: ctx.dist.excess_mean(theta, x_j) - theta * ctx.tau / (1.0 - ctx.tau),
                upper: ctx.gain_q(x_q),
                balance: bal,
            }),
        ),
        Strategy::B => (theta_b, None, None),
    };

    Ok(TwoLevelSolution {
        strategy,
        x_j,
        x_q,
        theta_star,
        theta_star_a,
        theta_star_b: theta_b,
        theta_l,
        residuals,
        probe_gain_at_theta: gain,
        lower_threshold_clamped: clamped,
        floor_condition_holds,
    })
}

/// Action after observing the first-level rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FirstStage {
    Transmit,
    Recontend,
    Probe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    TransmitLevel1,
    Recontend,
    ProbeThenTransmit,
    ProbeThenRecontend,
}

impl TwoLevelSolution {
    /// Ties go to transmitting at `x_q` and to probing at `x_J`.
    pub fn first_stage(&self, r1: f64) -> FirstStage {
        match self.strategy {
            Strategy::A => {
                if r1 >= self.x_q {
                    FirstStage::Transmit
                } else if r1 >= self.x_j {
                    FirstStage::Probe
                } else {
                    FirstStage::Recontend
                }
            }
            Strategy::B => {
                if r1 >= self.theta_star_b {
                    FirstStage::Transmit
                } else {
                    FirstStage::Recontend
                }
            }
        }
    }

    /// Transmit after a second probe iff the refined rate reaches the throughput.
    pub fn second_stage(&self, r2: f64) -> bool {
        r2 >= self.theta_star
    }
}

/// Full decision for one round; `r2` is required exactly when the policy probes again.
pub fn policy_decide(sol: &TwoLevelSolution, r1: f64, r2: Option<f64>) -> Result<Decision> {
    match sol.first_stage(r1) {
        FirstStage::Transmit => Ok(Decision::TransmitLevel1),
        FirstStage::Recontend => Ok(Decision::Recontend),
        FirstStage::Probe => {
            let r2 = r2.ok_or_else(|| {
                DosError::Contract(format!("first-level rate {r1} falls in the probe interval; a refined rate is required"))
            })?;
            Ok(if sol.second_stage(r2) {
                Decision::ProbeThenTransmit
            } else {
                Decision::ProbeThenRecontend
            })
        }
    }
}
