//! Tag energy and read-disturbance MTTF derived from bit-read counts.
//!
//! Reliability uses a per-bit independent disturbance model: each bit read
//! flips with probability `p`, so a run of `b` reads is error free with
//! probability `(1 - p)^b`. Retention and write failures are not modeled.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytic::{baseline_bits, expected_reads};
use crate::error::{Error, Result};

/// Label attached to outputs that carry MTTF figures.
pub const RELIABILITY_MODEL: &str =
    "per-bit independent read disturbance; retention and write failures excluded";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// J per tag bit read.
    pub energy_per_bit_read: f64,
    /// J per access; decode and indexing, unaffected by partitioning.
    pub fixed_energy_per_access: f64,
    /// W.
    pub leakage_power: f64,
    /// s.
    pub execution_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityParams {
    pub p_read_disturb: f64,
    pub execution_time: f64,
}

/// Flat parameter file: the union of both parameter sets, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    pub energy_per_bit_read: f64,
    pub fixed_energy_per_access: f64,
    pub leakage_power: f64,
    pub execution_time: f64,
    pub p_read_disturb: f64,
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("energy_per_bit_read", self.energy_per_bit_read),
            ("fixed_energy_per_access", self.fixed_energy_per_access),
            ("leakage_power", self.leakage_power),
            ("execution_time", self.execution_time),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Params(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

impl ReliabilityParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p_read_disturb) {
            return Err(Error::Params(format!(
                "p_read_disturb must be in [0, 1), got {}",
                self.p_read_disturb
            )));
        }
        if !(self.execution_time > 0.0) || !self.execution_time.is_finite() {
            return Err(Error::Params(format!(
                "execution_time must be > 0, got {}",
                self.execution_time
            )));
        }
        Ok(())
    }
}

impl CostParams {
    pub fn energy(&self) -> EnergyParams {
        EnergyParams {
            energy_per_bit_read: self.energy_per_bit_read,
            fixed_energy_per_access: self.fixed_energy_per_access,
            leakage_power: self.leakage_power,
            execution_time: self.execution_time,
        }
    }

    pub fn reliability(&self) -> ReliabilityParams {
        ReliabilityParams {
            p_read_disturb: self.p_read_disturb,
            execution_time: self.execution_time,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.energy().validate()?;
        self.reliability().validate()
    }

    /// Parses the TOML key-value form.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let params: CostParams = toml::from_str(text).map_err(|e| Error::Params(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Params(msg) => Error::Params(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

/// `bits_read * e_bit + accesses * e_fixed + P_leak * T`, in joules.
pub fn tag_energy(bits_read: f64, accesses: f64, params: &EnergyParams) -> Result<f64> {
    params.validate()?;
    if !(bits_read >= 0.0) || !(accesses >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bit reads and accesses must be >= 0, got {bits_read} and {accesses}"
        )));
    }
    Ok(bits_read * params.energy_per_bit_read
        + accesses * params.fixed_energy_per_access
        + params.leakage_power * params.execution_time)
}

/// Probability that no bit read is disturbed, kept in log form so values
/// near 1 retain their precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reliability {
    ln: f64,
}

impl Reliability {
    pub fn from_probability(p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidArgument(format!("reliability must be in (0, 1], got {p}")));
        }
        Ok(Reliability { ln: p.ln() })
    }

    pub fn ln(&self) -> f64 {
        self.ln
    }

    pub fn probability(&self) -> f64 {
        self.ln.exp()
    }
}

/// `(1 - p)^bits_read`, evaluated as `exp(bits_read * ln(1 - p))`.
pub fn reliability(bits_read: f64, params: &ReliabilityParams) -> Result<Reliability> {
    if !(params.p_read_disturb >= 0.0 && params.p_read_disturb < 1.0) {
        return Err(Error::Params(format!(
            "p_read_disturb must be in [0, 1), got {}",
            params.p_read_disturb
        )));
    }
    if !(bits_read >= 0.0) {
        return Err(Error::InvalidArgument(format!("bits_read must be >= 0, got {bits_read}")));
    }
    let ln = if bits_read == 0.0 {
        0.0
    } else {
        bits_read * (-params.p_read_disturb).ln_1p()
    };
    Ok(Reliability { ln })
}

/// Mean time to failure; unbounded when no failure is possible.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum Mttf {
    Finite(f64),
    Infinite,
}

impl Mttf {
    pub fn as_f64(&self) -> f64 {
        match *self {
            Mttf::Finite(v) => v,
            Mttf::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Mttf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mttf::Finite(v) => write!(f, "{v:.16e}"),
            Mttf::Infinite => f.write_str("inf"),
        }
    }
}

/// Exponential failure model: `lambda = -ln(R) / T`, `MTTF = 1 / lambda`.
pub fn mttf(reliability: Reliability, execution_time: f64) -> Result<Mttf> {
    if !(execution_time > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "execution_time must be > 0, got {execution_time}"
        )));
    }
    let lambda = -reliability.ln() / execution_time;
    Ok(if lambda == 0.0 {
        Mttf::Infinite
    } else {
        Mttf::Finite(1.0 / lambda)
    })
}

/// Probability-form entry point for [`mttf`].
pub fn mttf_from_probability(reliability: f64, execution_time: f64) -> Result<Mttf> {
    mttf(Reliability::from_probability(reliability)?, execution_time)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedMetrics {
    /// Partitioned energy over baseline energy.
    pub energy_ratio: f64,
    /// Partitioned MTTF over baseline MTTF.
    pub mttf_ratio: f64,
}

/// Ratios of a partitioned run to a single-step run given total bit reads
/// of each over the same `accesses`.
///
/// With `p_read_disturb = 0` both MTTFs are unbounded; the ratio is then
/// taken as its limit `p -> 0`, the inverse bit-read ratio.
pub fn ratios_from_bits(bits: f64, baseline: f64, accesses: f64, params: &CostParams) -> Result<NormalizedMetrics> {
    let energy = params.energy();
    let e_k = tag_energy(bits, accesses, &energy)?;
    let e_base = tag_energy(baseline, accesses, &energy)?;
    let energy_ratio = if e_base == 0.0 { 1.0 } else { e_k / e_base };

    let rel = params.reliability();
    rel.validate()?;
    let mttf_k = mttf(reliability(bits, &rel)?, rel.execution_time)?;
    let mttf_base = mttf(reliability(baseline, &rel)?, rel.execution_time)?;
    let mttf_ratio = match (mttf_k, mttf_base) {
        (Mttf::Finite(a), Mttf::Finite(b)) => a / b,
        (Mttf::Infinite, Mttf::Infinite) if bits > 0.0 => baseline / bits,
        (Mttf::Infinite, Mttf::Infinite) => 1.0,
        (Mttf::Infinite, Mttf::Finite(_)) => f64::INFINITY,
        (Mttf::Finite(_), Mttf::Infinite) => 0.0,
    };
    Ok(NormalizedMetrics {
        energy_ratio,
        mttf_ratio,
    })
}

/// Analytic ratios at splitting point `k` over `accesses` accesses of
/// expected cost.
pub fn normalized_metrics(n: u32, x: u32, k: u32, params: &CostParams, accesses: u64) -> Result<NormalizedMetrics> {
    let per_access = expected_reads(n, x, k)?.total_bits;
    let a = accesses as f64;
    ratios_from_bits(per_access * a, baseline_bits(n, x) * a, a, params)
}
