//! Channel draws, pilot observations, MMSE estimates and outage outcomes.
//!
//! The received pilot on symbol `i` is `Y_i = sqrt(rho) h + xi_i` with unit
//! pilots, `h` and `xi_i` independent unit-variance circular Gaussians.
//! First-level probing sees `Y_1..Y_M`; second-level probing adds
//! `Y_{M+1}..Y_{2M}`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{DerivedConstants, SystemParams};
use crate::error::{DosError, Result};

/// How a backed-off SNR estimate is turned into a transmission rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// Low-SNR wideband form `rho W sigma |h_hat|^2`.
    #[default]
    Approximate,
    /// `W ln(1 + sigma rho |h_hat|^2)`.
    Exact,
}

/// Unit-variance circularly symmetric complex Gaussian.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub h: Complex64,
    /// `2M` pilot observations, first-level block first.
    pub pilot_obs: Vec<Complex64>,
}

/// Sufficient statistics of a [`ChannelDraw`]: the two block sums of pilots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotSums {
    pub h: Complex64,
    pub first: Complex64,
    pub second: Complex64,
}

impl ChannelDraw {
    pub fn sums(&self, m: u32) -> Result<PilotSums> {
        let m = m as usize;
        if self.pilot_obs.len() != 2 * m {
            return Err(DosError::Contract(format!(
                "expected {} pilot observations, got {}",
                2 * m,
                self.pilot_obs.len()
            )));
        }
        Ok(PilotSums {
            h: self.h,
            first: self.pilot_obs[..m].iter().sum(),
            second: self.pilot_obs[m..].iter().sum(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub level: u8,
    pub h_hat: Complex64,
    /// Backed-off transmission rate.
    pub rate: f64,
    /// Actual SNR `rho |h_hat|^2 / (1 + rho |h - h_hat|^2)`.
    pub actual_snr: f64,
    /// SNR the rate was computed for, `sigma rho |h_hat|^2`.
    pub backed_off_snr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageOutcome {
    pub delivered: bool,
    pub goodput: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub rho: f64,
    pub m: u32,
    pub w: f64,
    pub sigma_m: f64,
    pub sigma_2m: f64,
    pub rate_model: RateModel,
}

impl ChannelModel {
    pub fn new(params: &SystemParams, derived: &DerivedConstants, rate_model: RateModel) -> Self {
        Self {
            rho: params.rho,
            m: params.m,
            w: params.w,
            sigma_m: derived.sigma_m,
            sigma_2m: derived.sigma_2m,
            rate_model,
        }
    }

    /// Draw a channel and all `2M` pilot observations.
    pub fn sample_channel<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelDraw {
        let h = complex_normal(rng);
        let gain = self.rho.sqrt() * h;
        let pilot_obs = (0..2 * self.m).map(|_| gain + complex_normal(rng)).collect();
        ChannelDraw { h, pilot_obs }
    }

    /// Draw a channel together with its pilot block sums directly; same law
    /// as `sample_channel(..).sums(..)` at O(1) cost.
    pub fn sample_sums<R: Rng + ?Sized>(&self, rng: &mut R) -> PilotSums {
        let h = complex_normal(rng);
        let m = self.m as f64;
        let mean = m * self.rho.sqrt() * h;
        let spread = m.sqrt();
        let first = mean + spread * complex_normal(rng);
        let second = mean + spread * complex_normal(rng);
        PilotSums { h, first, second }
    }

    fn estimate(&self, level: u8, h: Complex64, h_hat: Complex64) -> RateEstimate {
        let sigma = if level == 1 { self.sigma_m } else { self.sigma_2m };
        let est_snr = self.rho * h_hat.norm_sqr();
        let backed_off_snr = sigma * est_snr;
        let rate = match self.rate_model {
            RateModel::Approximate => self.w * backed_off_snr,
            RateModel::Exact => self.w * backed_off_snr.ln_1p(),
        };
        let actual_snr = est_snr / (1.0 + self.rho * (h - h_hat).norm_sqr());
        RateEstimate {
            level,
            h_hat,
            rate,
            actual_snr,
            backed_off_snr,
        }
    }

    /// MMSE estimate from the first `M` pilots.
    pub fn estimate_level1(&self, sums: &PilotSums) -> RateEstimate {
        let scale = self.rho.sqrt() / (self.rho * self.m as f64 + 1.0);
        self.estimate(1, sums.h, scale * sums.first)
    }

    /// MMSE estimate from all `2M` pilots.
    pub fn estimate_level2(&self, sums: &PilotSums) -> RateEstimate {
        let scale = self.rho.sqrt() / (2.0 * self.rho * self.m as f64 + 1.0);
        self.estimate(2, sums.h, scale * (sums.first + sums.second))
    }

    /// Largest rate the channel supports given the actual SNR of `est`.
    pub fn supportable_rate(&self, est: &RateEstimate) -> f64 {
        match self.rate_model {
            RateModel::Approximate => self.w * est.actual_snr,
            RateModel::Exact => self.w * est.actual_snr.ln_1p(),
        }
    }

    /// A transmission survives iff the backed-off SNR does not exceed the
    /// actual SNR; an outage delivers nothing.
    pub fn outage_check(&self, est: &RateEstimate) -> OutageOutcome {
        let delivered = est.backed_off_snr <= est.actual_snr;
        OutageOutcome {
            delivered,
            goodput: if delivered { est.rate } else { 0.0 },
        }
    }
}
