//! Continuous and integer optimum splitting points.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::analytic::{expected_reads, first_derivative, second_derivative};
use crate::error::{Error, Result};

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-13;
/// Relative gap below which two totals count as tied. The objective has
/// exact integer ties (n = 4, 9, 18, 35, 68, ...) that the binomial sum
/// only reproduces to rounding error.
const TIE_TOL: f64 = 1e-12;

/// Principal-branch Lambert W of `z`, given `ln z`.
///
/// Solves `w + ln w = ln z` by Newton's method so that `z` itself (which is
/// `2^n * e` for the optimum and overflows for long tags) is never formed.
pub fn lambert_w_log(ln_z: f64) -> Result<f64> {
    if !(ln_z >= 1.0) || !ln_z.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lambert_w_log requires finite ln_z >= 1, got {ln_z}"
        )));
    }
    let mut w = ln_z - ln_z.max(1.0).ln();
    for _ in 0..NEWTON_MAX_ITER {
        // f(w) = w + ln w - ln_z, f'(w) = 1 + 1/w
        let step = (w + w.ln() - ln_z) / (1.0 + 1.0 / w);
        let next = if w - step > 0.0 { w - step } else { w / 2.0 };
        let delta = (next - w).abs();
        w = next;
        if delta <= NEWTON_TOL * w {
            break;
        }
    }
    Ok(w)
}

/// Real-valued stationary point of the expected-reads curve for tag length
/// `n`: `log2 W(2^n * e)`. Independent of associativity.
pub fn k_optimal_continuous(n: u32) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "continuous optimum needs n >= 2, got {n}"
        )));
    }
    Ok(lambert_w_log(n as f64 * LN_2 + 1.0)?.log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimumResult {
    pub k_optimal: f64,
    pub k_min: u32,
    pub total_at_k_min: f64,
    /// First derivative evaluated at `k_optimal`.
    pub residual: f64,
}

impl OptimumResult {
    /// Whether the integer minimizer is the rounded continuous optimum.
    pub fn is_round_of_continuous(&self) -> bool {
        self.k_optimal.round() as u32 == self.k_min
    }

    pub fn brackets(&self) -> bool {
        let lo = self.k_optimal.floor() as u32;
        let hi = self.k_optimal.ceil() as u32;
        self.k_min == lo || self.k_min == hi
    }
}

fn argmin_split(n: u32, x: u32) -> Result<(u32, f64)> {
    let mut best = (0, f64::INFINITY);
    for k in 0..=n {
        let total = expected_reads(n, x, k)?.total_bits;
        // ties keep the smaller k
        if total < best.1 * (1.0 - TIE_TOL) {
            best = (k, total);
        }
    }
    Ok(best)
}

/// Exhaustive integer minimizer of expected reads over `k` in `[0, n]`.
///
/// The argmin is also computed with a single way and must agree, since `x`
/// only scales the objective.
pub fn k_min_integer(n: u32, x: u32) -> Result<OptimumResult> {
    if x == 0 {
        return Err(Error::InvalidArgument("associativity must be >= 1".into()));
    }
    let k_optimal = k_optimal_continuous(n)?;
    let (k_min, total_at_k_min) = argmin_split(n, x)?;
    let (unit_k, _) = argmin_split(n, 1)?;
    if unit_k != k_min {
        return Err(Error::Invariant(format!(
            "argmin depends on associativity: n={n}, x={x} gives {k_min}, x=1 gives {unit_k}"
        )));
    }
    Ok(OptimumResult {
        k_optimal,
        k_min,
        total_at_k_min,
        residual: first_derivative(n, x, k_optimal),
    })
}

/// Samples the second derivative at `samples` evenly spaced interior points
/// of `(0, n)` and reports whether all are strictly positive.
pub fn convexity_certificate(n: u32, x: u32, samples: usize) -> Result<bool> {
    if samples < 3 {
        return Err(Error::InvalidArgument(format!(
            "convexity certificate needs >= 3 samples, got {samples}"
        )));
    }
    let step = n as f64 / (samples + 1) as f64;
    Ok((1..=samples).all(|i| second_derivative(n, x, i as f64 * step) > 0.0))
}

/// Tag length where the integer minimizer is not the rounded continuous optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundingDeviation {
    pub n: u32,
    pub k_optimal: f64,
    pub k_min: u32,
}

/// Lists every `n` in the range whose `k_min` differs from `round(k_optimal)`.
pub fn rounding_deviations(ns: impl IntoIterator<Item = u32>) -> Result<Vec<RoundingDeviation>> {
    let mut out = Vec::new();
    for n in ns {
        let opt = k_min_integer(n, 1)?;
        if !opt.is_round_of_continuous() {
            out.push(RoundingDeviation {
                n,
                k_optimal: opt.k_optimal,
                k_min: opt.k_min,
            });
        }
    }
    Ok(out)
}
