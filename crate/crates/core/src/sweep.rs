//! Design-space sweeps and per-step read curves, with their CSV forms.
//!
//! Reals are written with 17 significant digits so a written file parses
//! back to the exact values, and every loaded row is re-checked against
//! the model.

use std::io::Write;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::analytic::{expected_reads, CacheConfig};
use crate::cost::{normalized_metrics, CostParams};
use crate::error::{Error, Result};
use crate::optimum::k_min_integer;
use crate::par::Execution;
use crate::sim::trace::{generate_trace, TraceKind};
use crate::sim::{run_trace_warm, warmup_length, CacheState, Compare};

pub const DEFAULT_K_RANGE: RangeInclusive<u32> = 1..=10;

const KIB: u64 = 1 << 10;
const MIB: u64 = 1 << 20;

/// Trace generator whose address width and block size follow the cache
/// being simulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TraceTemplate {
    Uniform,
    Stride { base: u64, stride: u64 },
    ZipfBlock { exponent: f64, blocks: u64 },
}

impl TraceTemplate {
    pub fn for_config(&self, config: &CacheConfig) -> TraceKind {
        match *self {
            TraceTemplate::Uniform => TraceKind::Uniform {
                address_bits: config.address_bits,
            },
            TraceTemplate::Stride { base, stride } => TraceKind::Stride { base, stride },
            TraceTemplate::ZipfBlock { exponent, blocks } => TraceKind::ZipfBlock {
                exponent,
                blocks,
                block_size: config.block_size,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSettings {
    pub template: TraceTemplate,
    pub length: usize,
    pub seed: u64,
}

/// Warm-up used when none is given: one fill of every way, if the trace is
/// at least twice that long.
pub fn auto_warmup(config: &CacheConfig, length: usize) -> Result<usize> {
    let g = config.geometry()?;
    let fill = warmup_length(&g, config.associativity);
    Ok(if length >= 2 * fill { fill } else { 0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub cache_sizes: Vec<u64>,
    pub associativities: Vec<u32>,
    pub address_bits: Vec<u32>,
    pub block_size: u64,
    pub k_range: RangeInclusive<u32>,
    pub simulation: Option<TraceSettings>,
    pub params: Option<CostParams>,
    /// Access count behind the analytic energy and MTTF ratios.
    pub cost_accesses: u64,
}

fn pow2_range(lo: u64, hi: u64) -> Vec<u64> {
    std::iter::successors(Some(lo), |&v| Some(v * 2))
        .take_while(|&v| v <= hi)
        .collect()
}

impl SweepSpec {
    pub fn new(cache_sizes: Vec<u64>, associativities: Vec<u32>, address_bits: Vec<u32>) -> Self {
        SweepSpec {
            cache_sizes,
            associativities,
            address_bits,
            block_size: 64,
            k_range: DEFAULT_K_RANGE,
            simulation: None,
            params: None,
            cost_accesses: 1_000_000,
        }
    }

    /// 256 KB..8 MB, 4..64 ways, 32..64-bit addresses in steps of 4.
    pub fn conventional() -> Self {
        SweepSpec::new(
            pow2_range(256 * KIB, 8 * MIB),
            pow2_range(4, 64).into_iter().map(|v| v as u32).collect(),
            (32..=64).step_by(4).collect(),
        )
    }

    /// 256 KB..128 MB, 2..512 ways, 32..64-bit addresses in steps of 4.
    pub fn extended() -> Self {
        SweepSpec::new(
            pow2_range(256 * KIB, 128 * MIB),
            pow2_range(2, 512).into_iter().map(|v| v as u32).collect(),
            (32..=64).step_by(4).collect(),
        )
    }

    /// All grid points, or every invalid one.
    pub fn configs(&self) -> Result<Vec<CacheConfig>> {
        if self.cache_sizes.is_empty() || self.associativities.is_empty() || self.address_bits.is_empty() {
            return Err(Error::InvalidArgument("sweep grid lists must be non-empty".into()));
        }
        if self.k_range.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "empty k range {}..={}",
                self.k_range.start(),
                self.k_range.end()
            )));
        }
        let mut configs = Vec::new();
        let mut invalid = Vec::new();
        for &size in &self.cache_sizes {
            for &assoc in &self.associativities {
                for &bits in &self.address_bits {
                    let c = CacheConfig::new(bits, size, self.block_size, assoc);
                    match c.geometry() {
                        Ok(_) => configs.push(c),
                        Err(e) => invalid.push(format!("(size={size}, assoc={assoc}, addr={bits}): {e}")),
                    }
                }
            }
        }
        if !invalid.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "{} invalid grid entries:\n  {}",
                invalid.len(),
                invalid.join("\n  ")
            )));
        }
        let max_n = configs
            .iter()
            .map(|c| c.geometry().map(|g| g.tag_bits))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .max()
            .unwrap_or(0);
        if *self.k_range.end() > max_n {
            return Err(Error::InvalidArgument(format!(
                "k range ends at {} beyond the longest tag in the grid ({max_n} bits)",
                self.k_range.end()
            )));
        }
        configs.sort();
        configs.dedup();
        Ok(configs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cache_size: u64,
    pub associativity: u32,
    pub address_bits: u32,
    pub block_size: u64,
    pub tag_bits: u32,
    pub k: u32,
    pub first_step_bits: f64,
    pub second_step_bits: f64,
    pub total_bits: f64,
    pub reduction_ratio: f64,
    pub k_optimal: f64,
    pub k_min: u32,
    pub is_round_of_continuous: bool,
    pub sim_bits_per_access: Option<f64>,
    pub sim_relative_error: Option<f64>,
    pub sim_hits: Option<u64>,
    pub sim_misses: Option<u64>,
    pub energy_ratio: Option<f64>,
    pub mttf_ratio: Option<f64>,
}

pub const SWEEP_HEADER: [&str; 19] = [
    "cache_size",
    "associativity",
    "address_bits",
    "block_size",
    "tag_bits",
    "k",
    "first_step_bits",
    "second_step_bits",
    "total_bits",
    "reduction_ratio",
    "k_optimal",
    "k_min",
    "is_round_of_continuous",
    "sim_bits_per_access",
    "sim_relative_error",
    "sim_hits",
    "sim_misses",
    "energy_ratio",
    "mttf_ratio",
];

/// 17 significant digits; non-finite values as `inf`, `-inf`, `nan`.
pub fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn fmt_opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

impl SweepRow {
    pub fn config(&self) -> CacheConfig {
        CacheConfig::new(self.address_bits, self.cache_size, self.block_size, self.associativity)
    }

    fn sort_key(&self) -> (u64, u32, u32, u32) {
        (self.cache_size, self.associativity, self.address_bits, self.k)
    }

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.cache_size.to_string(),
            self.associativity.to_string(),
            self.address_bits.to_string(),
            self.block_size.to_string(),
            self.tag_bits.to_string(),
            self.k.to_string(),
            fmt_real(self.first_step_bits),
            fmt_real(self.second_step_bits),
            fmt_real(self.total_bits),
            fmt_real(self.reduction_ratio),
            fmt_real(self.k_optimal),
            self.k_min.to_string(),
            self.is_round_of_continuous.to_string(),
            fmt_opt(self.sim_bits_per_access, fmt_real),
            fmt_opt(self.sim_relative_error, fmt_real),
            fmt_opt(self.sim_hits, |v| v.to_string()),
            fmt_opt(self.sim_misses, |v| v.to_string()),
            fmt_opt(self.energy_ratio, fmt_real),
            fmt_opt(self.mttf_ratio, fmt_real),
        ]
    }

    /// Recomputes the analytic columns and checks they agree.
    pub fn validate(&self) -> Result<()> {
        let fail = |what: String| Err(Error::Invariant(format!("sweep row {:?}: {what}", self.sort_key())));
        let g = self.config().geometry()?;
        if g.tag_bits != self.tag_bits {
            return fail(format!("tag_bits {} but geometry gives {}", self.tag_bits, g.tag_bits));
        }
        let eval = expected_reads(self.tag_bits, self.associativity, self.k)?;
        if self.first_step_bits != eval.first_step_bits
            || self.second_step_bits != eval.expected_second_step_bits
            || self.total_bits != eval.total_bits
            || self.reduction_ratio != eval.reduction_ratio
        {
            return fail("analytic read columns do not match the model".into());
        }
        if self.total_bits != self.first_step_bits + self.second_step_bits {
            return fail("total_bits != first + second".into());
        }
        let opt = k_min_integer(self.tag_bits, self.associativity)?;
        if opt.k_min != self.k_min || opt.k_optimal != self.k_optimal {
            return fail(format!(
                "optimum ({}, {}) but model gives ({}, {})",
                self.k_optimal, self.k_min, opt.k_optimal, opt.k_min
            ));
        }
        if opt.is_round_of_continuous() != self.is_round_of_continuous {
            return fail("round-function flag mismatch".into());
        }
        if let (Some(sim), Some(err)) = (self.sim_bits_per_access, self.sim_relative_error) {
            let expect = (sim - self.total_bits) / self.total_bits;
            if (expect - err).abs() > 1e-12 * expect.abs().max(1.0) {
                return fail("sim_relative_error inconsistent with sim_bits_per_access".into());
            }
        }
        Ok(())
    }
}

fn evaluate_point(config: &CacheConfig, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let g = config.geometry()?;
    let n = g.tag_bits;
    let x = config.associativity;
    let opt = k_min_integer(n, x)?;
    let is_round = opt.is_round_of_continuous();
    let ks: Vec<u32> = spec.k_range.clone().filter(|&k| k <= n).collect();

    let trace = match &spec.simulation {
        Some(s) => Some(generate_trace(&s.template.for_config(config), s.length, s.seed)?),
        None => None,
    };

    let mut rows = Vec::with_capacity(ks.len());
    for k in ks {
        let eval = expected_reads(n, x, k)?;
        let mut row = SweepRow {
            cache_size: config.cache_size,
            associativity: x,
            address_bits: config.address_bits,
            block_size: config.block_size,
            tag_bits: n,
            k,
            first_step_bits: eval.first_step_bits,
            second_step_bits: eval.expected_second_step_bits,
            total_bits: eval.total_bits,
            reduction_ratio: eval.reduction_ratio,
            k_optimal: opt.k_optimal,
            k_min: opt.k_min,
            is_round_of_continuous: is_round,
            sim_bits_per_access: None,
            sim_relative_error: None,
            sim_hits: None,
            sim_misses: None,
            energy_ratio: None,
            mttf_ratio: None,
        };
        if let Some(trace) = &trace {
            let mut state = CacheState::new(*config, Compare::TwoStep { k })?;
            let warm = auto_warmup(config, trace.len())?;
            let stats = run_trace_warm(&mut state, trace, warm)?;
            stats.check_invariants()?;
            let observed = stats.bits_per_access();
            row.sim_bits_per_access = Some(observed);
            row.sim_relative_error = Some((observed - eval.total_bits) / eval.total_bits);
            row.sim_hits = Some(stats.hits);
            row.sim_misses = Some(stats.misses);
        }
        if let Some(params) = &spec.params {
            let m = normalized_metrics(n, x, k, params, spec.cost_accesses)?;
            row.energy_ratio = Some(m.energy_ratio);
            row.mttf_ratio = Some(m.mttf_ratio);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Evaluates every grid point (concurrently under [`Execution::Parallel`])
/// and returns rows sorted by `(cache_size, associativity, address_bits, k)`.
pub fn run_sweep(spec: &SweepSpec, exec: Execution) -> Result<Vec<SweepRow>> {
    let configs = spec.configs()?;
    let mut rows: Vec<SweepRow> = exec
        .try_map(configs, |c| evaluate_point(&c, spec))?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by_key(SweepRow::sort_key);
    Ok(rows)
}

/// Smallest and largest `k_min` over the rows.
pub fn k_min_span(rows: &[SweepRow]) -> Option<(u32, u32)> {
    let min = rows.iter().map(|r| r.k_min).min()?;
    let max = rows.iter().map(|r| r.k_min).max()?;
    Some((min, max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    JsonLines,
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow], format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(SWEEP_HEADER)?;
            for r in rows {
                w.write_record(r.csv_record())?;
            }
            w.flush().map_err(csv::Error::from)?;
        }
        OutputFormat::JsonLines => write_json_lines(out, rows)?,
    }
    Ok(())
}

fn write_json_lines<W: Write, T: Serialize>(mut out: W, rows: &[T]) -> Result<()> {
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(serde_json::Error::io)?;
    }
    out.flush().map_err(serde_json::Error::io)?;
    Ok(())
}

/// Parses sweep CSV and validates every row.
pub fn read_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SWEEP_HEADER {
        return Err(Error::InvalidArgument(format!("unexpected sweep header {header:?}")));
    }
    let rows = r.deserialize().collect::<std::result::Result<Vec<SweepRow>, _>>()?;
    for row in &rows {
        row.validate()?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub config_id: usize,
    pub cache_size: u64,
    pub associativity: u32,
    pub address_bits: u32,
    pub block_size: u64,
    pub tag_bits: u32,
    pub k: u32,
    pub step1_normalized: f64,
    pub step2_normalized: f64,
    pub total_normalized: f64,
}

pub const CURVE_HEADER: [&str; 10] = [
    "config_id",
    "cache_size",
    "associativity",
    "address_bits",
    "block_size",
    "tag_bits",
    "k",
    "step1_normalized",
    "step2_normalized",
    "total_normalized",
];

impl CurveRow {
    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.config_id.to_string(),
            self.cache_size.to_string(),
            self.associativity.to_string(),
            self.address_bits.to_string(),
            self.block_size.to_string(),
            self.tag_bits.to_string(),
            self.k.to_string(),
            fmt_real(self.step1_normalized),
            fmt_real(self.step2_normalized),
            fmt_real(self.total_normalized),
        ]
    }
}

/// Per-step reads normalized to the single-step baseline `n*x`, for each
/// config and each `k` in range that fits its tag.
pub fn curves(configs: &[CacheConfig], k_range: RangeInclusive<u32>) -> Result<Vec<CurveRow>> {
    let mut rows = Vec::new();
    for (id, c) in configs.iter().enumerate() {
        let g = c.geometry()?;
        let (n, x) = (g.tag_bits, c.associativity);
        let base = crate::analytic::baseline_bits(n, x);
        for k in k_range.clone().filter(|&k| k <= n) {
            let e = expected_reads(n, x, k)?;
            rows.push(CurveRow {
                config_id: id,
                cache_size: c.cache_size,
                associativity: x,
                address_bits: c.address_bits,
                block_size: c.block_size,
                tag_bits: n,
                k,
                step1_normalized: e.first_step_bits / base,
                step2_normalized: e.expected_second_step_bits / base,
                total_normalized: e.reduction_ratio,
            });
        }
    }
    Ok(rows)
}

pub fn write_curves<W: Write>(out: W, rows: &[CurveRow], format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CURVE_HEADER)?;
            for r in rows {
                w.write_record(r.csv_record())?;
            }
            w.flush().map_err(csv::Error::from)?;
        }
        OutputFormat::JsonLines => write_json_lines(out, rows)?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_has_one_row_per_k() {
        let spec = SweepSpec::new(vec![1 << 20], vec![8], vec![40]);
        let rows = run_sweep(&spec, Execution::Sequential).unwrap();
        assert_eq!(rows.len(), 10);
        assert!(rows.iter().all(|r| r.k_min == 4 && r.tag_bits == 23));
        assert_eq!(rows.iter().map(|r| r.k).collect::<Vec<_>>(), (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn rows_sorted_and_modes_agree() {
        let mut spec = SweepSpec::new(vec![4 << 20, 1 << 20], vec![16, 4], vec![48, 32]);
        spec.k_range = 0..=6;
        let seq = run_sweep(&spec, Execution::Sequential).unwrap();
        let par = run_sweep(&spec, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        assert!(seq.windows(2).all(|w| w[0].sort_key() < w[1].sort_key()));
        assert_eq!(seq[0].cache_size, 1 << 20);
    }

    #[test]
    fn invalid_entries_are_listed() {
        let spec = SweepSpec::new(vec![1 << 20, 3 << 20], vec![8, 6], vec![40]);
        let err = run_sweep(&spec, Execution::Sequential).unwrap_err().to_string();
        assert!(err.starts_with("invalid cache configuration: 3 invalid grid entries"), "{err}");

        let mut spec = SweepSpec::new(vec![1 << 20], vec![8], vec![40]);
        spec.k_range = 1..=24;
        assert!(run_sweep(&spec, Execution::Sequential).is_err());
    }

    #[test]
    fn short_tags_drop_out_of_range_k() {
        // 128 MB, 2-way, 32-bit: n = 6
        let spec = SweepSpec::new(vec![128 << 20, 256 << 10], vec![2], vec![32]);
        let rows = run_sweep(&spec, Execution::Sequential).unwrap();
        let short = rows.iter().filter(|r| r.tag_bits == 6).count();
        assert_eq!(short, 6);
    }

    #[test]
    fn csv_round_trips_and_validates() {
        let mut spec = SweepSpec::new(vec![256 << 10], vec![4, 8], vec![32, 64]);
        spec.params = Some(CostParams {
            energy_per_bit_read: 1e-15,
            fixed_energy_per_access: 1e-13,
            leakage_power: 1e-3,
            execution_time: 0.1,
            p_read_disturb: 1e-11,
        });
        spec.simulation = Some(TraceSettings {
            template: TraceTemplate::Uniform,
            length: 5000,
            seed: 3,
        });
        let rows = run_sweep(&spec, Execution::default()).unwrap();
        let mut buf = Vec::new();
        write_sweep(&mut buf, &rows, OutputFormat::Csv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(&SWEEP_HEADER.join(",")));
        assert_eq!(read_sweep_csv(&text).unwrap(), rows);

        let tampered = text.replacen(",4,", ",5,", 1);
        assert!(read_sweep_csv(&tampered).is_err());
    }

    #[test]
    fn json_lines_one_object_per_row() {
        let spec = SweepSpec::new(vec![1 << 20], vec![8], vec![40]);
        let rows = run_sweep(&spec, Execution::Sequential).unwrap();
        let mut buf = Vec::new();
        write_sweep(&mut buf, &rows, OutputFormat::JsonLines).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let back: Vec<SweepRow> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(back, rows);
    }

    #[test]
    fn curve_shapes() {
        let configs: Vec<CacheConfig> = [2, 8, 512]
            .iter()
            .map(|&a| CacheConfig::new(40, 1 << 20, 64, a))
            .collect();
        let rows = curves(&configs, 0..=12).unwrap();
        for r in &rows {
            assert!((r.step1_normalized - r.k as f64 / r.tag_bits as f64).abs() < 1e-15);
        }
        for id in 0..configs.len() {
            let c: Vec<&CurveRow> = rows.iter().filter(|r| r.config_id == id).collect();
            let n = c[0].tag_bits;
            for w in c.windows(2) {
                assert!(w[1].step2_normalized < w[0].step2_normalized);
                let k = w[0].k;
                if k + 1 < n {
                    let ratio = w[0].step2_normalized / w[1].step2_normalized;
                    let oracle = 2.0 * (n - k) as f64 / (n - k - 1) as f64;
                    assert!((ratio - oracle).abs() < 1e-12 * oracle);
                }
            }
            let best = c
                .iter()
                .min_by(|a, b| a.total_normalized.partial_cmp(&b.total_normalized).unwrap())
                .unwrap();
            assert_eq!(best.k, k_min_integer(n, 1).unwrap().k_min);
        }
    }
}
