//! Synthetic address traces and the on-disk trace formats.
//!
//! Text traces hold one hexadecimal byte address per line (optional `0x`
//! prefix, `#` lines are comments). Binary traces are packed little-endian
//! `u64` addresses with no header.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TraceRecord {
    pub address: u64,
}

impl From<u64> for TraceRecord {
    fn from(address: u64) -> Self {
        TraceRecord { address }
    }
}

/// Address-stream generator and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TraceKind {
    /// Independent addresses, uniform over `[0, 2^address_bits)`.
    Uniform { address_bits: u32 },
    /// `base, base + stride, base + 2*stride, ...` (wrapping).
    Stride { base: u64, stride: u64 },
    /// Block indices drawn from a Zipf law over `blocks` blocks; rank 1 is
    /// block 0.
    ZipfBlock {
        exponent: f64,
        blocks: u64,
        block_size: u64,
    },
}

impl TraceKind {
    pub fn name(&self) -> &'static str {
        match self {
            TraceKind::Uniform { .. } => "uniform",
            TraceKind::Stride { .. } => "stride",
            TraceKind::ZipfBlock { .. } => "zipf-block",
        }
    }
}

/// Deterministic for a given `(kind, length, seed)`.
pub fn generate_trace(kind: &TraceKind, length: usize, seed: u64) -> Result<Vec<TraceRecord>> {
    if length == 0 {
        return Err(Error::InvalidArgument("trace length must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trace = match *kind {
        TraceKind::Uniform { address_bits } => {
            if address_bits == 0 {
                return Err(Error::InvalidArgument("address_bits must be >= 1".into()));
            }
            let mask = if address_bits >= 64 {
                u64::MAX
            } else {
                (1u64 << address_bits) - 1
            };
            (0..length)
                .map(|_| TraceRecord::from(rng.random::<u64>() & mask))
                .collect()
        }
        TraceKind::Stride { base, stride } => (0..length as u64)
            .map(|i| TraceRecord::from(base.wrapping_add(i.wrapping_mul(stride))))
            .collect(),
        TraceKind::ZipfBlock {
            exponent,
            blocks,
            block_size,
        } => {
            if !(exponent > 0.0) || !exponent.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "zipf exponent must be > 0, got {exponent}"
                )));
            }
            if blocks == 0 || block_size == 0 {
                return Err(Error::InvalidArgument(
                    "zipf-block needs blocks >= 1 and block_size >= 1".into(),
                ));
            }
            let zipf = Zipf::new(blocks as f64, exponent)
                .map_err(|e| Error::InvalidArgument(format!("zipf: {e}")))?;
            (0..length)
                .map(|_| {
                    let rank = zipf.sample(&mut rng) as u64;
                    TraceRecord::from((rank - 1).wrapping_mul(block_size))
                })
                .collect()
        }
    };
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Text,
    Binary,
}

impl TraceFormat {
    /// `.bin` is binary; anything else is text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => TraceFormat::Binary,
            _ => TraceFormat::Text,
        }
    }
}

pub fn encode_text(trace: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(trace.len() * 12);
    for r in trace {
        out.push_str(&format!("0x{:x}\n", r.address));
    }
    out
}

pub fn encode_binary(trace: &[TraceRecord]) -> Vec<u8> {
    trace
        .iter()
        .flat_map(|r| r.address.to_le_bytes())
        .collect()
}

/// `source` names the input in error messages.
pub fn parse_text(source: &str, text: &str) -> Result<Vec<TraceRecord>> {
    let mut trace = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let digits = line
            .strip_prefix("0x")
            .or_else(|| line.strip_prefix("0X"))
            .unwrap_or(line);
        let address = u64::from_str_radix(digits, 16).map_err(|e| Error::TraceParse {
            path: source.to_string(),
            line: i + 1,
            msg: format!("bad hex address {line:?}: {e}"),
        })?;
        trace.push(TraceRecord { address });
    }
    Ok(trace)
}

pub fn parse_binary(source: &str, bytes: &[u8]) -> Result<Vec<TraceRecord>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::TraceParse {
            path: source.to_string(),
            line: 0,
            msg: format!(
                "binary trace length {} is not a multiple of 8 (trailing bytes at offset {})",
                bytes.len(),
                bytes.len() - bytes.len() % 8
            ),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| TraceRecord::from(u64::from_le_bytes(c.try_into().unwrap())))
        .collect())
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let source = path.display().to_string();
    match TraceFormat::from_path(path) {
        TraceFormat::Binary => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            parse_binary(&source, &bytes)
        }
        TraceFormat::Text => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_text(&source, &text)
        }
    }
}

pub fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let bytes = match TraceFormat::from_path(path) {
        TraceFormat::Binary => encode_binary(trace),
        TraceFormat::Text => encode_text(trace).into_bytes(),
    };
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
