//! Closed-form model of tag-bit reads under two-step tag comparison.
//!
//! A request first compares the `k` low-order bits of every way's tag. Only
//! ways whose prefix matches (survivors) have their remaining `n - k` bits
//! read in the second step. With uniformly random tags each way survives
//! with probability `2^-k`, so the number of survivors is binomial.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_ADDRESS_BITS: u32 = 16;
pub const MAX_ADDRESS_BITS: u32 = 128;

/// Shape of a single set-associative cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CacheConfig {
    pub address_bits: u32,
    /// Bytes.
    pub cache_size: u64,
    /// Bytes.
    pub block_size: u64,
    /// Ways per set.
    pub associativity: u32,
}

/// Address decomposition derived from a [`CacheConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagGeometry {
    pub sets: u64,
    pub index_bits: u32,
    pub offset_bits: u32,
    pub tag_bits: u32,
}

impl CacheConfig {
    pub fn new(address_bits: u32, cache_size: u64, block_size: u64, associativity: u32) -> Self {
        CacheConfig {
            address_bits,
            cache_size,
            block_size,
            associativity,
        }
    }

    /// Checks the configuration invariants and derives the tag geometry.
    pub fn geometry(&self) -> Result<TagGeometry> {
        derive_geometry(self)
    }
}

pub fn derive_geometry(config: &CacheConfig) -> Result<TagGeometry> {
    let CacheConfig {
        address_bits,
        cache_size,
        block_size,
        associativity,
    } = *config;

    if !(MIN_ADDRESS_BITS..=MAX_ADDRESS_BITS).contains(&address_bits) {
        return Err(Error::InvalidConfig(format!(
            "address_bits {address_bits} outside [{MIN_ADDRESS_BITS}, {MAX_ADDRESS_BITS}]"
        )));
    }
    for (name, v) in [
        ("cache_size", cache_size),
        ("block_size", block_size),
        ("associativity", associativity as u64),
    ] {
        if !v.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "{name} {v} is not a power of two"
            )));
        }
    }
    let way_bytes = block_size
        .checked_mul(associativity as u64)
        .filter(|&b| b <= cache_size)
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "block_size x associativity ({block_size} x {associativity}) exceeds cache_size {cache_size}"
            ))
        })?;

    let sets = cache_size / way_bytes;
    let index_bits = sets.trailing_zeros();
    let offset_bits = block_size.trailing_zeros();
    let tag_bits = address_bits as i64 - index_bits as i64 - offset_bits as i64;
    if tag_bits <= 0 {
        return Err(Error::InvalidConfig(format!(
            "tag length not positive ({address_bits} - {index_bits} index - {offset_bits} offset = {tag_bits})"
        )));
    }
    Ok(TagGeometry {
        sets,
        index_bits,
        offset_bits,
        tag_bits: tag_bits as u32,
    })
}

/// Tag bits read per access by a conventional single-step comparison.
pub fn baseline_bits(n: u32, x: u32) -> f64 {
    n as f64 * x as f64
}

/// Probability that a random tag matches the request on its `k` low-order bits.
pub fn match_probability(k: u32) -> f64 {
    (-(k as f64)).exp2()
}

/// Expected number of step-1 survivors among `x` ways, evaluated as the
/// explicit binomial sum `sum_i i * C(x,i) p^i (1-p)^(x-i)`.
///
/// Terms are built from the ratio recurrence
/// `t(i+1) = t(i) * (x-i)/(i+1) * p/(1-p)` so that large `x` never forms
/// a binomial coefficient directly.
pub fn expected_matched_ways(x: u32, k: u32) -> f64 {
    let p = match_probability(k);
    if k == 0 {
        // p = 1: every way survives, the recurrence would divide by zero.
        return x as f64;
    }
    let q = 1.0 - p;
    let odds = p / q;
    let mut term = (x as f64 * (-p).ln_1p()).exp();
    let mut sum = 0.0;
    for i in 0..x {
        term *= (x - i) as f64 / (i + 1) as f64 * odds;
        sum += (i + 1) as f64 * term;
    }
    sum
}

/// Binomial mean `x / 2^k`; the closed form of [`expected_matched_ways`].
pub fn expected_matched_ways_closed(x: u32, k: f64) -> f64 {
    x as f64 * (-k).exp2()
}

/// Expected read cost of one access at splitting point `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitEval {
    pub k: u32,
    pub first_step_bits: f64,
    pub expected_second_step_bits: f64,
    pub total_bits: f64,
    pub reduction_ratio: f64,
}

/// Expected tag bits read per access, using the binomial sum for the
/// survivor count.
pub fn expected_reads(n: u32, x: u32, k: u32) -> Result<SplitEval> {
    check_split(n, k)?;
    let first = k as f64 * x as f64;
    let second = (n - k) as f64 * expected_matched_ways(x, k);
    let total = first + second;
    Ok(SplitEval {
        k,
        first_step_bits: first,
        expected_second_step_bits: second,
        total_bits: total,
        reduction_ratio: total / baseline_bits(n, x),
    })
}

/// `k*x + (n-k)*x/2^k`, valid for real `k`.
pub fn total_bits_closed(n: u32, x: u32, k: f64) -> f64 {
    k * x as f64 + (n as f64 - k) * expected_matched_ways_closed(x, k)
}

fn check_split(n: u32, k: u32) -> Result<()> {
    if k > n {
        return Err(Error::SplitOutOfRange { k, n });
    }
    Ok(())
}

/// `d total / dk = (x/2^k) * (ln2 * (k - n) + 2^k - 1)`.
pub fn first_derivative(n: u32, x: u32, k: f64) -> f64 {
    let pow = k.exp2();
    x as f64 / pow * (LN_2 * (k - n as f64) + pow - 1.0)
}

/// `d^2 total / dk^2 = (x/2^k) * ln2 * (2 + (n - k) * ln2)`.
pub fn second_derivative(n: u32, x: u32, k: f64) -> f64 {
    x as f64 * (-k).exp2() * LN_2 * (2.0 + (n as f64 - k) * LN_2)
}
