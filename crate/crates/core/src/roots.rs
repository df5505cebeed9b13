//! Bracketing root finders and a golden-section maximizer.
//!
//! Everything here works on scalar closures and keeps no state between calls.

use crate::error::{DosError, Result};

const MAX_BISECTIONS: usize = 400;

/// Stopping rule for [`bisect`]: the bracket is accepted once
/// `hi - lo <= abs_tol + rel_tol * |mid|`.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Tolerance {
    pub const fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol }
    }

    /// Resolve to (nearly) the last representable bit.
    pub const fn machine() -> Self {
        Self::new(0.0, 4.0 * f64::EPSILON)
    }
}

/// Bisection on `[lo, hi]`. The endpoint values must not share a strict sign.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    try_bisect(|x| Ok(f(x)), lo, hi, tol)
}

/// [`bisect`] for objectives that can fail; the first error aborts the search.
pub fn try_bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo <= hi) {
        return Err(DosError::solver(
            "bisection",
            format!("empty bracket [{lo}, {hi}]"),
        ));
    }
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.is_nan() || f_hi.is_nan() || f_lo.signum() == f_hi.signum() {
        return Err(DosError::solver(
            "bisection",
            format!("no sign change on [{lo}, {hi}]: f = ({f_lo}, {f_hi})"),
        ));
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol.abs_tol + tol.rel_tol * mid.abs() || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.is_nan() {
            return Err(DosError::solver("bisection", format!("objective is NaN at {mid}")));
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(DosError::solver(
        "bisection",
        format!("no convergence after {MAX_BISECTIONS} halvings, bracket [{lo}, {hi}]"),
    ))
}

/// Grow `hi` geometrically until `f(hi)` has the opposite strict sign of
/// `f(lo)`. Returns the trace of visited upper ends on failure.
pub fn expand_upper<F>(mut f: F, lo: f64, mut hi: f64, max_doublings: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let s_lo = f(lo)?.signum();
    let mut trace = Vec::new();
    for _ in 0..max_doublings {
        let v = f(hi)?;
        trace.push((hi, v));
        if v == 0.0 || (v.is_finite() && v.signum() != s_lo) {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(DosError::solver(
        "bracket expansion",
        format!("no sign change from lo = {lo}; visited {trace:?}"),
    ))
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
/// Returns `(argmax, max)`.
pub fn golden_max<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
        if x1 >= x2 {
            break;
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
