use std::ops::RangeInclusive;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tagsplit::sweep::{OutputFormat, TraceTemplate};

#[derive(Debug, Parser)]
#[command(name = "tagsplit", version, about = "Explore two-step tag comparison in set-associative caches")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Geometry, optimum splitting point and expected reads for one cache.
    Analyze(AnalyzeArgs),
    /// Evaluate a grid of caches over a range of splitting points.
    Sweep(SweepArgs),
    /// Replay a trace through the cache and compare with the model.
    Simulate(SimulateArgs),
    /// Write a synthetic address trace.
    GenTrace(GenTraceArgs),
    /// Per-step normalized read curves against k.
    Curves(CurvesArgs),
}

/// Parses `512`, `256K`, `1M`, `2G` (binary multiples).
pub fn parse_size(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let (digits, mult) = match s.char_indices().last() {
        Some((i, c)) if c.eq_ignore_ascii_case(&'k') => (&s[..i], 1u64 << 10),
        Some((i, c)) if c.eq_ignore_ascii_case(&'m') => (&s[..i], 1 << 20),
        Some((i, c)) if c.eq_ignore_ascii_case(&'g') => (&s[..i], 1 << 30),
        _ => (s, 1),
    };
    let v: u64 = digits
        .trim()
        .parse()
        .map_err(|_| format!("invalid size {s:?}; expected bytes with optional K/M/G suffix"))?;
    v.checked_mul(mult).ok_or_else(|| format!("size {s:?} overflows"))
}

/// Parses `lo-hi`, `lo..=hi` or a single `k`; both ends inclusive.
pub fn parse_k_range(s: &str) -> Result<RangeInclusive<u32>, String> {
    let bad = || format!("invalid k range {s:?}; expected e.g. 1-10");
    let parts: Vec<&str> = if let Some((a, b)) = s.split_once("..=") {
        vec![a, b]
    } else if let Some((a, b)) = s.split_once('-') {
        vec![a, b]
    } else {
        vec![s, s]
    };
    let lo: u32 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: u32 = parts[1].trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok(lo..=hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    JsonLines,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::JsonLines => OutputFormat::JsonLines,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Uniform,
    Stride,
    ZipfBlock,
}

#[derive(Debug, Args)]
pub struct CacheArgs {
    /// Cache capacity (bytes, or with K/M/G suffix).
    #[arg(long, value_parser = parse_size)]
    pub size: u64,
    #[arg(long)]
    pub assoc: u32,
    #[arg(long)]
    pub addr_bits: u32,
    /// Block size in bytes.
    #[arg(long, default_value = "64", value_parser = parse_size)]
    pub block: u64,
}

#[derive(Debug, Args)]
pub struct GeneratorArgs {
    #[arg(long, value_enum, default_value = "uniform")]
    pub kind: Kind,
    #[arg(long, default_value_t = 1_000_000)]
    pub length: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Stride in bytes (stride traces).
    #[arg(long, default_value_t = 64)]
    pub stride: u64,
    /// First address (stride traces).
    #[arg(long, default_value_t = 0)]
    pub base: u64,
    /// Zipf exponent (zipf-block traces).
    #[arg(long, default_value_t = 1.2)]
    pub zipf_exponent: f64,
    /// Number of distinct blocks (zipf-block traces).
    #[arg(long, default_value_t = 1 << 20)]
    pub zipf_blocks: u64,
}

impl GeneratorArgs {
    pub fn template(&self) -> TraceTemplate {
        match self.kind {
            Kind::Uniform => TraceTemplate::Uniform,
            Kind::Stride => TraceTemplate::Stride {
                base: self.base,
                stride: self.stride,
            },
            Kind::ZipfBlock => TraceTemplate::ZipfBlock {
                exponent: self.zipf_exponent,
                blocks: self.zipf_blocks,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub cache: CacheArgs,
    /// Splitting point to evaluate (default: the integer optimum).
    #[arg(long)]
    pub k: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Grid {
    /// 256K..8M, 4..64 ways, 32..64-bit addresses.
    Conventional,
    /// 256K..128M, 2..512 ways, 32..64-bit addresses.
    Extended,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Preset grid; explicit lists override its axes.
    #[arg(long, value_enum)]
    pub grid: Option<Grid>,
    #[arg(long, value_delimiter = ',', value_parser = parse_size)]
    pub size: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    pub assoc: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    pub addr_bits: Vec<u32>,
    #[arg(long, default_value = "64", value_parser = parse_size)]
    pub block: u64,
    #[arg(long, default_value = "1-10", value_parser = parse_k_range)]
    pub k_range: RangeInclusive<u32>,
    /// Also simulate every grid point with a generated trace.
    #[arg(long)]
    pub simulate: bool,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    /// Energy/reliability parameter file (TOML).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Accesses assumed for analytic energy and MTTF ratios.
    #[arg(long, default_value_t = 1_000_000)]
    pub cost_accesses: u64,
    /// Check every k_min against a closed range, e.g. 3-5; exit 4 on violation.
    #[arg(long, value_parser = parse_k_range)]
    pub expect_k_min: Option<RangeInclusive<u32>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub cache: CacheArgs,
    /// Splitting points, comma separated (default: the integer optimum).
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<u32>,
    /// Trace file (`.bin` binary, otherwise text); generated if absent.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    /// Accesses excluded from statistics (default: one fill of every way
    /// when the trace is at least twice as long).
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Per-k result rows.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct GenTraceArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    /// Address width for uniform traces.
    #[arg(long, default_value_t = 40)]
    pub addr_bits: u32,
    /// Block size for zipf-block traces.
    #[arg(long, default_value = "64", value_parser = parse_size)]
    pub block: u64,
    /// `.trace` for text, `.bin` for binary.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    /// Every combination of the listed sizes, associativities and address
    /// widths becomes one config, numbered in that order.
    #[arg(long, value_delimiter = ',', value_parser = parse_size, required = true)]
    pub size: Vec<u64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub assoc: Vec<u32>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub addr_bits: Vec<u32>,
    #[arg(long, default_value = "64", value_parser = parse_size)]
    pub block: u64,
    #[arg(long, default_value = "1-10", value_parser = parse_k_range)]
    pub k_range: RangeInclusive<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}
