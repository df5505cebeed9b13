//! System parameters and every constant derived from them.
//!
//! Durations are normalized to the transmission time `T = 1`; `tau` and
//! `tau_t` are fractions of it.

use serde::{Deserialize, Serialize};

use crate::dist::{ConditionalRateDist, RateDist};
use crate::error::{DosError, Result};
use crate::roots::golden_max;

fn unit_duration() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Normalized receiver SNR.
    pub rho: f64,
    /// Pilot symbols per probing level.
    #[serde(rename = "M")]
    pub m: u32,
    /// Bandwidth.
    #[serde(rename = "W")]
    pub w: f64,
    pub tau_t: f64,
    /// Contention slot length, also the duration of a second-level probe.
    pub tau: f64,
    #[serde(rename = "T", default = "unit_duration")]
    pub t: f64,
    /// Probability that a contention slot succeeds.
    pub p_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_probs: Option<Vec<f64>>,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            rho: 1.0 / 300.0,
            m: 300,
            w: 3000.0,
            tau_t: 0.1,
            tau: 0.2,
            t: 1.0,
            p_s: (-1f64).exp(),
            link_probs: None,
        }
    }
}

impl SystemParams {
    /// `rho * M`, the training energy that indexes the relative-gain curves.
    pub fn alpha(&self) -> f64 {
        self.rho * self.m as f64
    }

    /// Same system with `rho` chosen so that `rho * M = alpha`.
    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self {
            rho: alpha / self.m as f64,
            ..self.clone()
        }
    }

    /// Mean contention time per successful round, `tau / p_s`.
    pub fn contention_cost(&self) -> f64 {
        self.tau / self.p_s
    }

    /// Replace `p_s` by the success probability implied by `link_probs`.
    pub fn with_link_probs(mut self, probs: Vec<f64>) -> Result<Self> {
        self.p_s = compute_ps(&probs)?;
        self.link_probs = Some(probs);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(DosError::param("rho", format!("must be finite and > 0, got {}", self.rho)));
        }
        if self.m < 1 {
            return Err(DosError::param("M", "must be >= 1"));
        }
        if !(self.w.is_finite() && self.w > 0.0) {
            return Err(DosError::param("W", format!("must be finite and > 0, got {}", self.w)));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(DosError::param("tau", format!("must lie in (0, 1), got {}", self.tau)));
        }
        if !(self.tau_t >= 0.0 && self.tau_t.is_finite()) {
            return Err(DosError::param("tau_t", format!("must be finite and >= 0, got {}", self.tau_t)));
        }
        if self.t != 1.0 {
            return Err(DosError::param("T", format!("durations are normalized to T = 1, got {}", self.t)));
        }
        if !(self.p_s > 0.0 && self.p_s <= 1.0) {
            return Err(DosError::param("p_s", format!("must lie in (0, 1], got {}", self.p_s)));
        }
        if let Some(probs) = &self.link_probs {
            let implied = compute_ps(probs)?;
            if (implied - self.p_s).abs() > 1e-12 {
                return Err(DosError::param(
                    "p_s",
                    format!("{} disagrees with link_probs, which imply {implied}", self.p_s),
                ));
            }
        }
        Ok(())
    }
}

/// Probability that exactly one of the contending links transmits:
/// `sum_l p_l prod_{i != l} (1 - p_i)`.
pub fn compute_ps(link_probs: &[f64]) -> Result<f64> {
    if link_probs.is_empty() {
        return Err(DosError::param("link_probs", "at least one link is required"));
    }
    if let Some(p) = link_probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(DosError::param("link_probs", format!("probability {p} outside [0, 1]")));
    }
    let n = link_probs.len();
    // suffix[i] = prod_{k >= i} (1 - p_k)
    let mut suffix = vec![1.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] * (1.0 - link_probs[i]);
    }
    let mut prefix = 1.0;
    let mut total = 0.0;
    for (i, &p) in link_probs.iter().enumerate() {
        total += p * prefix * suffix[i + 1];
        prefix *= 1.0 - p;
    }
    Ok(total.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackoffPolicy {
    /// Each level uses the back-off factor that maximizes its goodput coefficient.
    #[default]
    Optimized,
    Fixed { sigma_m: f64, sigma_2m: f64 },
}

/// Fraction of the backed-off rate that is delivered on average,
/// `[1 - exp(-(1/sigma - 1) / k)] * sigma`, where `k` is the product of
/// the normalized error variance and the effective SNR.
pub fn goodput_coefficient(sigma: f64, k: f64) -> f64 {
    if sigma <= 0.0 || sigma >= 1.0 {
        return 0.0;
    }
    -(-(1.0 / sigma - 1.0) / k).exp_m1() * sigma
}

/// Back-off factor in `(0, 1)` maximizing [`goodput_coefficient`] for the
/// error-SNR product `k`.
pub fn optimize_backoff(k: f64) -> f64 {
    let (sigma, _) = golden_max(|s| goodput_coefficient(s, k), 0.0, 1.0, 1e-12);
    sigma.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub var_h1_hat: f64,
    pub var_h1_err: f64,
    pub var_h2_hat: f64,
    pub var_h2_err: f64,
    pub sigma_e_sq: f64,
    pub sigma_m: f64,
    pub sigma_2m: f64,
    pub c_r: f64,
    pub r_e: f64,
    pub mean_r1: f64,
    pub mean_r2: f64,
    pub rho_eff_1: f64,
    pub alpha_1: f64,
    pub rho_eff_2: f64,
    pub alpha_2: f64,
}

impl DerivedConstants {
    pub fn derive(params: &SystemParams, backoff: BackoffPolicy) -> Result<Self> {
        params.validate()?;
        let rho = params.rho;
        let rm = rho * params.m as f64;

        let var_h1_err = 1.0 / (rm + 1.0);
        let var_h1_hat = rm / (rm + 1.0);
        let var_h2_err = 1.0 / (2.0 * rm + 1.0);
        let var_h2_hat = 2.0 * rm / (2.0 * rm + 1.0);
        let sigma_e_sq = rm / ((rm + 1.0) * (2.0 * rm + 1.0));

        let rho_eff_1 = (1.0 - var_h1_err) * rho;
        let alpha_1 = var_h1_err / (1.0 - var_h1_err);
        let rho_eff_2 = (1.0 - var_h2_err) * rho;
        let alpha_2 = var_h2_err / (1.0 - var_h2_err);

        let (sigma_m, sigma_2m) = match backoff {
            BackoffPolicy::Optimized => (
                optimize_backoff(alpha_1 * rho_eff_1),
                optimize_backoff(alpha_2 * rho_eff_2),
            ),
            BackoffPolicy::Fixed { sigma_m, sigma_2m } => {
                for (name, s) in [("sigma_m", sigma_m), ("sigma_2m", sigma_2m)] {
                    if !(s > 0.0 && s < 1.0) {
                        return Err(DosError::param(
                            name,
                            format!("back-off factor must lie in (0, 1), got {s}"),
                        ));
                    }
                }
                (sigma_m, sigma_2m)
            }
        };

        let rate_scale = rho * params.w;
        Ok(Self {
            var_h1_hat,
            var_h1_err,
            var_h2_hat,
            var_h2_err,
            sigma_e_sq,
            sigma_m,
            sigma_2m,
            c_r: sigma_2m / sigma_m,
            r_e: sigma_2m * rate_scale * sigma_e_sq,
            mean_r1: rate_scale * sigma_m * var_h1_hat,
            mean_r2: rate_scale * sigma_2m * var_h2_hat,
            rho_eff_1,
            alpha_1,
            rho_eff_2,
            alpha_2,
        })
    }

    pub fn rate1(&self) -> RateDist {
        RateDist::new(self.mean_r1)
    }

    pub fn rate2(&self) -> RateDist {
        RateDist::new(self.mean_r2)
    }

    pub fn conditional(&self) -> ConditionalRateDist {
        ConditionalRateDist::new(self.c_r, self.r_e)
    }

    /// Delivery probability of a level-`level` transmission under the linear back-off.
    pub fn delivery_probability(&self, level: u8) -> f64 {
        let (sigma, k) = match level {
            1 => (self.sigma_m, self.alpha_1 * self.rho_eff_1),
            _ => (self.sigma_2m, self.alpha_2 * self.rho_eff_2),
        };
        -(-(1.0 / sigma - 1.0) / k).exp_m1()
    }
}

/// Validated parameters bundled with their derived constants; the unit of
/// input for every solver and the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: SystemParams,
    pub backoff: BackoffPolicy,
    pub derived: DerivedConstants,
}

impl Scenario {
    pub fn new(params: SystemParams, backoff: BackoffPolicy) -> Result<Self> {
        let derived = DerivedConstants::derive(&params, backoff)?;
        Ok(Self {
            params,
            backoff,
            derived,
        })
    }

    pub fn tau(&self) -> f64 {
        self.params.tau
    }

    pub fn contention_cost(&self) -> f64 {
        self.params.contention_cost()
    }
}
