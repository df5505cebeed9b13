//! Ternary `(0, 1, e)` feedback: the receiver only tells the transmitter to
//! defer (`0`), to send at a fixed rate `R1` (`1`), or to probe once more
//! (`e`). The transmitter never learns the rate itself, so every packet is
//! sent at `R1` and the design variables are `R1` and the lower edge `x_v`
//! of the gray area `[x_v, R1)`.

use serde::{Deserialize, Serialize};

use crate::config::Scenario;
use crate::dist::{quad, ConditionalRateDist, RateDist};
use crate::error::{DosError, Result};
use crate::roots::{expand_upper, golden_max, try_bisect, Tolerance};
use crate::solver::Strategy;

const MAX_FIXED_POINT_ITERS: usize = 10_000;
const GRID_POINTS: usize = 41;

/// Throughput of the one-bit scheme at fixed rate `r1`:
/// `r1 e^{-r1/m} / (tau/p_s + e^{-r1/m})`.
pub fn one_bit_throughput(r1: f64, mean_r1: f64, cost: f64) -> f64 {
    let s = (-r1 / mean_r1).exp();
    if s == 0.0 {
        return 0.0;
    }
    r1 * s / (cost + s)
}

/// `E[(r1 I(R >= r1) - gamma)^+] - gamma tau/p_s`, zero at the one-bit throughput.
pub fn one_bit_balance(r1: f64, gamma: f64, mean_r1: f64, cost: f64) -> f64 {
    (r1 - gamma).max(0.0) * (-r1 / mean_r1).exp() - gamma * cost
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneBitOptimum {
    #[serde(rename = "R1_hat")]
    pub r1_hat: f64,
    pub gamma_hat_max: f64,
}

/// Rate maximizing the one-bit throughput: `(u - 1) e^u = p_s / tau` with
/// `u = R1 / m`; the maximum equals `R1_hat - m`.
pub fn solve_r1_hat(mean_r1: f64, cost: f64) -> Result<OneBitOptimum> {
    if !(mean_r1 > 0.0) || !(cost > 0.0) {
        return Err(DosError::param(
            "tau / p_s",
            format!("mean rate {mean_r1} and contention cost {cost} must both be > 0"),
        ));
    }
    let target = cost.recip();
    let f = |u: f64| Ok((u - 1.0) * u.exp() - target);
    let hi = expand_upper(f, 1.0, 2.0, 64)?;
    let u = try_bisect(f, 1.0, hi, Tolerance::machine())?;
    let r1_hat = u * mean_r1;
    Ok(OneBitOptimum {
        r1_hat,
        gamma_hat_max: r1_hat - mean_r1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputBounds {
    pub gamma_l: f64,
    pub gamma_u: f64,
}

/// Bounds on the two-level throughput at rate `r1`: always probing twice
/// from below, an error-free first probe from above.
pub fn throughput_bounds(r1: f64, tau: f64, p_s: f64, mean_r2: f64) -> ThroughputBounds {
    let gamma_l = (1.0 - tau) * r1 / ((1.0 - tau) + tau * (1.0 + 1.0 / p_s) * (r1 / mean_r2).exp());
    let gamma_u = r1 / (1.0 + tau / p_s);
    ThroughputBounds { gamma_l, gamma_u }
}

/// Net reward of probing again at first-level rate `x`:
/// `(1 - tau)(r1 - gamma)(1 - G(r1|x)) - gamma tau`.
pub fn reward_v(gamma: f64, x: f64, r1: f64, tau: f64, dist: &ConditionalRateDist) -> f64 {
    (1.0 - tau) * (r1 - gamma) * dist.survival(r1, x) - gamma * tau
}

/// Gain of probing again over acting on the first probe alone.
pub fn gain_q_feedback(gamma: f64, x: f64, r1: f64, tau: f64, dist: &ConditionalRateDist) -> f64 {
    let direct = if x >= r1 { r1 } else { 0.0 };
    reward_v(gamma, x, r1, tau, dist) - direct + gamma
}

/// Two-level operating point at a fixed rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrayArea {
    pub r1: f64,
    pub x_v: f64,
    pub gamma: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
struct RateProblem {
    r1: f64,
    tau: f64,
    cost: f64,
    rate1: RateDist,
    dist: ConditionalRateDist,
}

impl RateProblem {
    fn new(scenario: &Scenario, r1: f64) -> Self {
        Self {
            r1,
            tau: scenario.params.tau,
            cost: scenario.contention_cost(),
            rate1: scenario.derived.rate1(),
            dist: scenario.derived.conditional(),
        }
    }

    fn v(&self, gamma: f64, x: f64) -> f64 {
        reward_v(gamma, x, self.r1, self.tau, &self.dist)
    }

    /// Zero of the increasing `V_gamma`, clamped to `[0, r1]`.
    fn threshold(&self, gamma: f64) -> Result<f64> {
        if self.v(gamma, 0.0) >= 0.0 {
            return Ok(0.0);
        }
        if self.v(gamma, self.r1) <= 0.0 {
            return Ok(self.r1);
        }
        try_bisect(|x| Ok(self.v(gamma, x)), 0.0, self.r1, Tolerance::machine())
    }

    /// Bits and time per round of the policy with gray area `[x_v, r1)`.
    fn renewal(&self, x_v: f64) -> (f64, f64) {
        let direct = self.rate1.survival(self.r1);
        let (second, probe) = if x_v < self.r1 {
            let q = quad::integrate(
                |x| self.dist.survival(self.r1, x) * self.rate1.pdf(x),
                x_v,
                self.r1,
                1e-15,
                1e-13,
            );
            (q.value, self.rate1.cdf(self.r1) - self.rate1.cdf(x_v))
        } else {
            (0.0, 0.0)
        };
        let delivered = direct + (1.0 - self.tau) * second;
        (self.r1 * delivered, self.cost + delivered + self.tau * probe)
    }

    fn ratio(&self, x_v: f64) -> f64 {
        let (bits, time) = self.renewal(x_v);
        bits / time
    }

    fn solve(&self) -> Result<GrayArea> {
        let mut gamma = self.ratio(self.r1);
        let mut damping = 1.0;
        for it in 1..=MAX_FIXED_POINT_ITERS {
            let x_v = self.threshold(gamma)?;
            let proposal = self.ratio(x_v);
            let step = proposal - gamma;
            if step.abs() <= 1e-12 * gamma {
                return Ok(GrayArea {
                    r1: self.r1,
                    x_v: self.threshold(proposal)?,
                    gamma: proposal,
                    iterations: it,
                });
            }
            if step < 0.0 {
                damping = 0.5;
            }
            gamma += damping * step;
        }
        Err(DosError::solver(
            "gray-area fixed point",
            format!("no convergence after {MAX_FIXED_POINT_ITERS} iterations at R1 = {}, gamma = {gamma}", self.r1),
        ))
    }
}

fn check_regularity(scenario: &Scenario) -> Result<()> {
    let tau = scenario.params.tau;
    let p_s = scenario.params.p_s;
    if tau > 1.0 - p_s {
        return Err(DosError::Regularity {
            condition: "tau <= 1 - p_s",
            detail: format!("tau = {tau}, p_s = {p_s}"),
        });
    }
    let floor = 0.5 * ((1.0 + 1.0 / p_s).ln() - 1.0);
    if tau < floor {
        return Err(DosError::Regularity {
            condition: "tau >= (ln(1 + 1/p_s) - 1) / 2",
            detail: format!("tau = {tau} < {floor}"),
        });
    }
    Ok(())
}

/// Best gray area at a fixed rate `r1`.
pub fn solve_at_rate(scenario: &Scenario, r1: f64) -> Result<GrayArea> {
    if !(r1 > 0.0) {
        return Err(DosError::param("R1", format!("must be > 0, got {r1}")));
    }
    RateProblem::new(scenario, r1).solve()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackResiduals {
    /// `gamma` minus the renewal ratio at `(x_v, R1)`.
    pub ratio: f64,
    /// `V_gamma(x_v, R1)`; only meaningful when `x_v` is interior.
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSolution {
    pub strategy: Strategy,
    #[serde(rename = "R1_star")]
    pub r1_star: f64,
    pub x_v_star: f64,
    /// Best two-level throughput over the rate search.
    pub gamma_max: f64,
    #[serde(rename = "R1_hat")]
    pub r1_hat: f64,
    pub gamma_hat_max: f64,
    #[serde(rename = "gamma_L")]
    pub gamma_l: f64,
    #[serde(rename = "gamma_U")]
    pub gamma_u: f64,
    pub residuals: FeedbackResiduals,
    /// Coarse rate grid had a single local maximum.
    pub unimodal_grid: bool,
}

impl FeedbackSolution {
    /// Throughput of the selected strategy.
    pub fn throughput(&self) -> f64 {
        match self.strategy {
            Strategy::A => self.gamma_max,
            Strategy::B => self.gamma_hat_max,
        }
    }

    /// Fixed transmission rate of the selected strategy.
    pub fn rate(&self) -> f64 {
        match self.strategy {
            Strategy::A => self.r1_star,
            Strategy::B => self.r1_hat,
        }
    }
}

/// Search the fixed rate and gray area jointly, then pick the better of the
/// two-level and one-bit schemes.
pub fn solve_two_level_feedback(scenario: &Scenario) -> Result<FeedbackSolution> {
    check_regularity(scenario)?;
    let d = &scenario.derived;
    let cost = scenario.contention_cost();
    let one_bit = solve_r1_hat(d.mean_r1, cost)?;

    let lo = 0.1 * d.mean_r2;
    let hi = 10.0 * d.mean_r2;
    let ratio = (hi / lo).powf(1.0 / (GRID_POINTS - 1) as f64);
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| lo * ratio.powi(i as i32)).collect();
    let values = grid
        .iter()
        .map(|&r| solve_at_rate(scenario, r).map(|g| g.gamma))
        .collect::<Result<Vec<_>>>()?;

    let peaks = (1..GRID_POINTS - 1)
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .count();
    let best = (0..GRID_POINTS)
        .max_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    let left = grid[best.saturating_sub(1)];
    let right = grid[(best + 1).min(GRID_POINTS - 1)];

    let mut failure = None;
    let (mut r1_star, _) = golden_max(
        |r| match solve_at_rate(scenario, r) {
            Ok(g) => g.gamma,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        left,
        right,
        1e-9 * d.mean_r2,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let mut area = solve_at_rate(scenario, r1_star)?;
    if values[best] > area.gamma {
        r1_star = grid[best];
        area = solve_at_rate(scenario, r1_star)?;
    }

    let problem = RateProblem::new(scenario, r1_star);
    let residuals = FeedbackResiduals {
        ratio: area.gamma - problem.ratio(area.x_v),
        threshold: problem.v(area.gamma, area.x_v),
    };
    let bounds = throughput_bounds(r1_star, scenario.params.tau, scenario.params.p_s, d.mean_r2);
    let strategy = if area.gamma > one_bit.gamma_hat_max * (1.0 + 1e-12) && area.x_v < r1_star {
        Strategy::A
    } else {
        Strategy::B
    };

    Ok(FeedbackSolution {
        strategy,
        r1_star,
        x_v_star: area.x_v,
        gamma_max: area.gamma,
        r1_hat: one_bit.r1_hat,
        gamma_hat_max: one_bit.gamma_hat_max,
        gamma_l: bounds.gamma_l,
        gamma_u: bounds.gamma_u,
        residuals,
        unimodal_grid: peaks <= 1,
    })
}

/// One feedback symbol from receiver to transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeedbackSymbol {
    /// `0`: defer and re-contend.
    Nack,
    /// `1`: transmit at the fixed rate.
    Ack,
    /// `e`: probe once more.
    Erasure,
}

impl FeedbackSymbol {
    pub fn as_char(self) -> char {
        match self {
            FeedbackSymbol::Nack => '0',
            FeedbackSymbol::Ack => '1',
            FeedbackSymbol::Erasure => 'e',
        }
    }
}

impl FeedbackSolution {
    pub fn first_symbol(&self, r1: f64) -> FeedbackSymbol {
        let rate = self.rate();
        if r1 >= rate {
            FeedbackSymbol::Ack
        } else if self.strategy == Strategy::A && r1 >= self.x_v_star {
            FeedbackSymbol::Erasure
        } else {
            FeedbackSymbol::Nack
        }
    }

    pub fn second_symbol(&self, r2: f64) -> FeedbackSymbol {
        if r2 >= self.rate() {
            FeedbackSymbol::Ack
        } else {
            FeedbackSymbol::Nack
        }
    }
}

/// Symbols fed back in one round; `r2` is required exactly after an erasure.
pub fn feedback_decide(sol: &FeedbackSolution, r1: f64, r2: Option<f64>) -> Result<Vec<FeedbackSymbol>> {
    let first = sol.first_symbol(r1);
    if first != FeedbackSymbol::Erasure {
        return Ok(vec![first]);
    }
    let r2 = r2.ok_or_else(|| DosError::Contract(format!("erasure at first-level rate {r1} needs a refined rate")))?;
    Ok(vec![first, sol.second_symbol(r2)])
}
