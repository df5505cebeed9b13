//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every entry point takes a small JSON parameter object and returns JSON.
//! Missing keys fall back to the default system (`p_s = 1/e`, `M = 300`,
//! `W = 3000`, `tau = 0.2`, `alpha = 1`).

use dos_lab::cli::{log_grid, solve_all, sweep};
use dos_lab::config::{BackoffPolicy, Scenario, SystemParams};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WebParams {
    pub alpha: Option<f64>,
    pub tau: Option<f64>,
    pub p_s: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<u32>,
    #[serde(rename = "W")]
    pub w: Option<f64>,
    pub sigma_m: Option<f64>,
    pub sigma_2m: Option<f64>,
}

impl WebParams {
    pub fn parse(json: &str) -> Result<Self, String> {
        if json.trim().is_empty() {
            return Ok(Self::default());
        }
        serde_json::from_str(json).map_err(|e| format!("bad parameters: {e}"))
    }

    pub fn system(&self) -> SystemParams {
        let d = SystemParams::default();
        let p = SystemParams {
            m: self.m.unwrap_or(d.m),
            w: self.w.unwrap_or(d.w),
            tau: self.tau.unwrap_or(d.tau),
            p_s: self.p_s.unwrap_or(d.p_s),
            ..d
        };
        p.with_alpha(self.alpha.unwrap_or(1.0))
    }

    pub fn backoff(&self) -> Result<BackoffPolicy, String> {
        match (self.sigma_m, self.sigma_2m) {
            (None, None) => Ok(BackoffPolicy::Optimized),
            (Some(sigma_m), Some(sigma_2m)) => Ok(BackoffPolicy::Fixed { sigma_m, sigma_2m }),
            _ => Err("give both sigma_m and sigma_2m, or neither".into()),
        }
    }

    pub fn scenario(&self) -> Result<Scenario, String> {
        Scenario::new(self.system(), self.backoff()?).map_err(|e| e.to_string())
    }
}

/// Thresholds and throughputs of all schemes.
pub fn solve_json(params: &str) -> Result<String, String> {
    let s = WebParams::parse(params)?.scenario()?;
    let out = solve_all(&s).map_err(|e| e.to_string())?;
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Relative-gain rows over a log grid of alpha.
pub fn sweep_json(params: &str, alpha_min: f64, alpha_max: f64, points: usize) -> Result<String, String> {
    if !(alpha_min > 0.0 && alpha_max >= alpha_min) || points == 0 || points > 200 {
        return Err("need 0 < alpha_min <= alpha_max and 1..=200 points".into());
    }
    let p = WebParams::parse(params)?;
    let rows = sweep(&p.system(), p.backoff()?, &log_grid(alpha_min, alpha_max, points));
    serde_json::to_string(&rows).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CdfCurve {
    pub x: f64,
    pub mean: f64,
    pub c_r: f64,
    pub r_e: f64,
    /// `[y, G(y | x)]` pairs.
    pub conditional: Vec<[f64; 2]>,
    /// `[y, 1 - exp(-y / mean_R2)]`, the unconditional refined-rate law.
    pub unconditional: Vec<[f64; 2]>,
}

/// `G(y | x)` at `x = x_ratio * E[R1]`, sampled on `points` values of `y`.
pub fn cdf_curve_json(params: &str, x_ratio: f64, points: usize) -> Result<String, String> {
    if !(x_ratio >= 0.0) || !(2..=2000).contains(&points) {
        return Err("need x_ratio >= 0 and 2..=2000 points".into());
    }
    let s = WebParams::parse(params)?.scenario()?;
    let d = s.derived.conditional();
    let r2 = s.derived.rate2();
    let x = x_ratio * s.derived.mean_r1;
    let top = (d.mean(x) + 6.0 * d.variance(x).sqrt()).max(4.0 * r2.mean);
    let ys = (0..points).map(|i| top * i as f64 / (points - 1) as f64);
    let conditional = ys
        .clone()
        .map(|y| d.cdf(y, x).map(|g| [y, g]).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    let unconditional = ys.map(|y| [y, r2.cdf(y)]).collect();
    serde_json::to_string(&CdfCurve { x, mean: d.mean(x), c_r: d.c_r, r_e: d.r_e, conditional, unconditional })
        .map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn solve(params: &str) -> Result<String, JsValue> {
    solve_json(params).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = sweepGain)]
pub fn sweep_gain(params: &str, alpha_min: f64, alpha_max: f64, points: usize) -> Result<String, JsValue> {
    sweep_json(params, alpha_min, alpha_max, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = conditionalCdf)]
pub fn conditional_cdf(params: &str, x_ratio: f64, points: usize) -> Result<String, JsValue> {
    cdf_curve_json(params, x_ratio, points).map_err(|e| JsValue::from_str(&e))
}
