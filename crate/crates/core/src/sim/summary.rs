//! One row of simulation results set against the analytic prediction.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analytic::{expected_matched_ways_closed, expected_reads, CacheConfig};
use crate::cost::{ratios_from_bits, CostParams};
use crate::error::Result;
use crate::sim::SimStats;
use crate::sweep::{fmt_real, OutputFormat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub cache_size: u64,
    pub associativity: u32,
    pub address_bits: u32,
    pub block_size: u64,
    pub tag_bits: u32,
    pub k: u32,
    pub warmup: usize,
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
    pub step1_bit_reads: u64,
    pub step2_bit_reads: u64,
    pub baseline_bit_reads: u64,
    pub bits_per_access: f64,
    pub predicted_bits_per_access: f64,
    pub relative_error: f64,
    /// Reads over the same accesses compared single-step (k = n).
    pub normalized_reads: f64,
    pub mean_survivors: f64,
    pub predicted_survivors: f64,
    pub energy_ratio: Option<f64>,
    pub mttf_ratio: Option<f64>,
}

pub const SIM_HEADER: [&str; 21] = [
    "cache_size",
    "associativity",
    "address_bits",
    "block_size",
    "tag_bits",
    "k",
    "warmup",
    "accesses",
    "hits",
    "misses",
    "step1_bit_reads",
    "step2_bit_reads",
    "baseline_bit_reads",
    "bits_per_access",
    "predicted_bits_per_access",
    "relative_error",
    "normalized_reads",
    "mean_survivors",
    "predicted_survivors",
    "energy_ratio",
    "mttf_ratio",
];

impl SimSummary {
    /// Energy and MTTF ratios use the observed bit reads against the
    /// single-step reads of the same accesses.
    pub fn new(config: &CacheConfig, stats: &SimStats, warmup: usize, params: Option<&CostParams>) -> Result<Self> {
        let (n, x, k) = (stats.tag_bits, stats.associativity, stats.k);
        let predicted = expected_reads(n, x, k)?.total_bits;
        let observed = stats.bits_per_access();
        let ratios = params
            .map(|p| {
                ratios_from_bits(
                    stats.total_bit_reads() as f64,
                    stats.baseline_bit_reads as f64,
                    stats.accesses as f64,
                    p,
                )
            })
            .transpose()?;
        Ok(SimSummary {
            cache_size: config.cache_size,
            associativity: x,
            address_bits: config.address_bits,
            block_size: config.block_size,
            tag_bits: n,
            k,
            warmup,
            accesses: stats.accesses,
            hits: stats.hits,
            misses: stats.misses,
            step1_bit_reads: stats.step1_bit_reads,
            step2_bit_reads: stats.step2_bit_reads,
            baseline_bit_reads: stats.baseline_bit_reads,
            bits_per_access: observed,
            predicted_bits_per_access: predicted,
            relative_error: (observed - predicted) / predicted,
            normalized_reads: stats.normalized_reads(),
            mean_survivors: stats.mean_survivors(),
            predicted_survivors: expected_matched_ways_closed(x, k as f64),
            energy_ratio: ratios.map(|r| r.energy_ratio),
            mttf_ratio: ratios.map(|r| r.mttf_ratio),
        })
    }

    pub fn csv_record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(fmt_real).unwrap_or_default();
        vec![
            self.cache_size.to_string(),
            self.associativity.to_string(),
            self.address_bits.to_string(),
            self.block_size.to_string(),
            self.tag_bits.to_string(),
            self.k.to_string(),
            self.warmup.to_string(),
            self.accesses.to_string(),
            self.hits.to_string(),
            self.misses.to_string(),
            self.step1_bit_reads.to_string(),
            self.step2_bit_reads.to_string(),
            self.baseline_bit_reads.to_string(),
            fmt_real(self.bits_per_access),
            fmt_real(self.predicted_bits_per_access),
            fmt_real(self.relative_error),
            fmt_real(self.normalized_reads),
            fmt_real(self.mean_survivors),
            fmt_real(self.predicted_survivors),
            opt(self.energy_ratio),
            opt(self.mttf_ratio),
        ]
    }
}

pub fn write_summaries<W: Write>(mut out: W, rows: &[SimSummary], format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(SIM_HEADER)?;
            for r in rows {
                w.write_record(r.csv_record())?;
            }
            w.flush().map_err(csv::Error::from)?;
        }
        OutputFormat::JsonLines => {
            for r in rows {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n").map_err(serde_json::Error::io)?;
            }
        }
    }
    Ok(())
}
