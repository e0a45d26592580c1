//! Trace-driven set-associative cache with two-step tag comparison.
//!
//! Every access reads the `k` low-order tag bits of all `x` ways (step 1),
//! then the remaining `n - k` bits of each valid way whose prefix matched
//! (step 2). Replacement is LRU. The hit/miss decision is the same as a
//! full single-step comparison; only the bit-read counts differ.

pub mod summary;
pub mod trace;

use serde::{Deserialize, Serialize};

use crate::analytic::{CacheConfig, TagGeometry};
use crate::error::{Error, Result};
use crate::par::Execution;

pub use trace::{generate_trace, TraceKind, TraceRecord};

/// How tags are compared on lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Compare {
    /// Conventional: all `n` bits of every way in one step.
    SingleStep,
    /// Partitioned at splitting point `k`.
    TwoStep { k: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Hit,
    Miss,
}

#[derive(Debug, Clone, Copy, Default)]
struct Way {
    valid: bool,
    tag: u128,
    lru_rank: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStats {
    pub tag_bits: u32,
    pub associativity: u32,
    pub k: u32,
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
    pub step1_bit_reads: u64,
    pub step2_bit_reads: u64,
    pub baseline_bit_reads: u64,
    /// Index `s` counts accesses with exactly `s` valid step-1 survivors.
    pub matched_way_histogram: Vec<u64>,
}

impl SimStats {
    pub fn new(tag_bits: u32, associativity: u32, k: u32) -> Self {
        SimStats {
            tag_bits,
            associativity,
            k,
            accesses: 0,
            hits: 0,
            misses: 0,
            step1_bit_reads: 0,
            step2_bit_reads: 0,
            baseline_bit_reads: 0,
            matched_way_histogram: vec![0; associativity as usize + 1],
        }
    }

    pub fn total_bit_reads(&self) -> u64 {
        self.step1_bit_reads + self.step2_bit_reads
    }

    pub fn bits_per_access(&self) -> f64 {
        self.total_bit_reads() as f64 / self.accesses as f64
    }

    /// Total reads relative to a single-step comparison of the same accesses.
    pub fn normalized_reads(&self) -> f64 {
        self.total_bit_reads() as f64 / self.baseline_bit_reads as f64
    }

    pub fn survivor_total(&self) -> u64 {
        self.matched_way_histogram
            .iter()
            .enumerate()
            .map(|(s, &c)| s as u64 * c)
            .sum()
    }

    pub fn mean_survivors(&self) -> f64 {
        self.survivor_total() as f64 / self.accesses as f64
    }

    pub fn hit_rate(&self) -> f64 {
        self.hits as f64 / self.accesses as f64
    }

    pub fn check_invariants(&self) -> Result<()> {
        let (n, x, k) = (self.tag_bits as u64, self.associativity as u64, self.k as u64);
        let fail = |what: &str| Err(Error::Invariant(format!("SimStats: {what}: {self:?}")));
        if self.hits + self.misses != self.accesses {
            return fail("hits + misses != accesses");
        }
        if self.step1_bit_reads != self.accesses * k * x {
            return fail("step1_bit_reads != accesses*k*x");
        }
        if self.baseline_bit_reads != self.accesses * n * x {
            return fail("baseline_bit_reads != accesses*n*x");
        }
        if self.step2_bit_reads != (n - k) * self.survivor_total() {
            return fail("step2_bit_reads != (n-k)*survivors");
        }
        if self.matched_way_histogram.iter().sum::<u64>() != self.accesses {
            return fail("histogram does not cover every access");
        }
        Ok(())
    }

    /// Adds another run's counters; shapes must match.
    pub fn merge(&mut self, other: &SimStats) -> Result<()> {
        if (self.tag_bits, self.associativity, self.k)
            != (other.tag_bits, other.associativity, other.k)
        {
            return Err(Error::InvalidArgument("cannot merge stats of different shapes".into()));
        }
        self.accesses += other.accesses;
        self.hits += other.hits;
        self.misses += other.misses;
        self.step1_bit_reads += other.step1_bit_reads;
        self.step2_bit_reads += other.step2_bit_reads;
        self.baseline_bit_reads += other.baseline_bit_reads;
        for (a, b) in self.matched_way_histogram.iter_mut().zip(&other.matched_way_histogram) {
            *a += b;
        }
        Ok(())
    }
}

fn low_mask(bits: u32) -> u128 {
    if bits >= 128 {
        u128::MAX
    } else {
        (1u128 << bits) - 1
    }
}

#[derive(Debug, Clone)]
pub struct CacheState {
    config: CacheConfig,
    geometry: TagGeometry,
    compare: Compare,
    ways: Vec<Way>,
}

impl CacheState {
    pub fn new(config: CacheConfig, compare: Compare) -> Result<Self> {
        let geometry = config.geometry()?;
        if let Compare::TwoStep { k } = compare {
            if k > geometry.tag_bits {
                return Err(Error::SplitOutOfRange {
                    k,
                    n: geometry.tag_bits,
                });
            }
        }
        let x = config.associativity;
        let ways = (0..geometry.sets)
            .flat_map(|_| {
                (0..x).map(|r| Way {
                    lru_rank: r,
                    ..Way::default()
                })
            })
            .collect();
        Ok(CacheState {
            config,
            geometry,
            compare,
            ways,
        })
    }

    pub fn config(&self) -> &CacheConfig {
        &self.config
    }

    pub fn geometry(&self) -> &TagGeometry {
        &self.geometry
    }

    /// Step-1 width; a single-step comparison reads all `n` bits up front.
    pub fn k(&self) -> u32 {
        match self.compare {
            Compare::SingleStep => self.geometry.tag_bits,
            Compare::TwoStep { k } => k,
        }
    }

    pub fn new_stats(&self) -> SimStats {
        SimStats::new(self.geometry.tag_bits, self.config.associativity, self.k())
    }

    fn split(&self, address: u64) -> Result<(usize, u128)> {
        let bits = self.config.address_bits;
        if bits < 64 && address >> bits != 0 {
            return Err(Error::AddressOutOfRange { address, bits });
        }
        let g = &self.geometry;
        let block = address >> g.offset_bits;
        let set = (block & (g.sets - 1)) as usize;
        let tag = (block as u128 >> g.index_bits) & low_mask(g.tag_bits);
        Ok((set, tag))
    }

    fn set_ways(&self, set: usize) -> &[Way] {
        let x = self.config.associativity as usize;
        &self.ways[set * x..(set + 1) * x]
    }

    fn full_lookup(&self, set: usize, tag: u128) -> Option<usize> {
        self.set_ways(set).iter().position(|w| w.valid && w.tag == tag)
    }

    /// Returns the hit way and the number of valid step-1 survivors.
    fn two_step_lookup(&self, set: usize, tag: u128, k: u32) -> (Option<usize>, u32) {
        let mask = low_mask(k);
        let prefix = tag & mask;
        let mut survivors = 0;
        let mut hit = None;
        for (i, w) in self.set_ways(set).iter().enumerate() {
            // invalid ways are read in step 1 but cannot survive
            if !w.valid || w.tag & mask != prefix {
                continue;
            }
            survivors += 1;
            let rest_matches = k >= 128 || (w.tag >> k) == (tag >> k);
            if rest_matches {
                hit = Some(i);
            }
        }
        (hit, survivors)
    }

    fn touch(&mut self, set: usize, way: usize) {
        let x = self.config.associativity as usize;
        let ways = &mut self.ways[set * x..(set + 1) * x];
        let old = ways[way].lru_rank;
        for w in ways.iter_mut() {
            if w.lru_rank < old {
                w.lru_rank += 1;
            }
        }
        ways[way].lru_rank = 0;
    }

    fn victim(&self, set: usize) -> usize {
        let last = self.config.associativity - 1;
        self.set_ways(set)
            .iter()
            .position(|w| w.lru_rank == last)
            .expect("lru ranks form a permutation")
    }

    pub fn access(&mut self, record: TraceRecord, stats: &mut SimStats) -> Result<Outcome> {
        let (set, tag) = self.split(record.address)?;
        let n = self.geometry.tag_bits;
        let x = self.config.associativity as u64;

        let (hit, survivors) = match self.compare {
            Compare::SingleStep => {
                let hit = self.full_lookup(set, tag);
                (hit, hit.is_some() as u32)
            }
            Compare::TwoStep { k } => {
                let (hit, survivors) = self.two_step_lookup(set, tag, k);
                debug_assert_eq!(hit, self.full_lookup(set, tag));
                (hit, survivors)
            }
        };
        let k = self.k();

        stats.accesses += 1;
        stats.step1_bit_reads += k as u64 * x;
        stats.step2_bit_reads += (n - k) as u64 * survivors as u64;
        stats.baseline_bit_reads += n as u64 * x;
        stats.matched_way_histogram[survivors as usize] += 1;

        let outcome = match hit {
            Some(way) => {
                stats.hits += 1;
                self.touch(set, way);
                Outcome::Hit
            }
            None => {
                stats.misses += 1;
                let way = self.victim(set);
                let x = self.config.associativity as usize;
                self.ways[set * x + way] = Way {
                    valid: true,
                    tag,
                    lru_rank: self.ways[set * x + way].lru_rank,
                };
                self.touch(set, way);
                Outcome::Miss
            }
        };
        Ok(outcome)
    }

    /// Checks that each set's LRU ranks are a permutation and tags fit.
    pub fn check_invariants(&self) -> Result<()> {
        let x = self.config.associativity as usize;
        let limit = low_mask(self.geometry.tag_bits);
        for (s, ways) in self.ways.chunks(x).enumerate() {
            let mut seen = vec![false; x];
            for w in ways {
                let r = w.lru_rank as usize;
                if r >= x || std::mem::replace(&mut seen[r], true) {
                    return Err(Error::Invariant(format!("set {s}: LRU ranks not a permutation")));
                }
                if w.tag & !limit != 0 {
                    return Err(Error::Invariant(format!("set {s}: tag wider than tag_bits")));
                }
            }
        }
        Ok(())
    }
}

fn run(state: &mut CacheState, trace: &[TraceRecord], warmup: usize, mut record: Option<&mut Vec<Outcome>>) -> Result<SimStats> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if warmup >= trace.len() {
        return Err(Error::InvalidArgument(format!(
            "warm-up of {warmup} accesses leaves nothing of a {}-access trace",
            trace.len()
        )));
    }
    let mut scratch = state.new_stats();
    for &r in &trace[..warmup] {
        state.access(r, &mut scratch)?;
    }
    let mut stats = state.new_stats();
    for &r in &trace[warmup..] {
        let outcome = state.access(r, &mut stats)?;
        if let Some(out) = record.as_deref_mut() {
            out.push(outcome);
        }
    }
    debug_assert!(stats.check_invariants().is_ok());
    Ok(stats)
}

pub fn run_trace(state: &mut CacheState, trace: &[TraceRecord]) -> Result<SimStats> {
    run(state, trace, 0, None)
}

/// Runs the whole trace but only counts accesses after the first `warmup`.
pub fn run_trace_warm(state: &mut CacheState, trace: &[TraceRecord], warmup: usize) -> Result<SimStats> {
    run(state, trace, warmup, None)
}

/// Like [`run_trace`], also returning the per-access outcomes.
pub fn run_trace_recording(state: &mut CacheState, trace: &[TraceRecord]) -> Result<(SimStats, Vec<Outcome>)> {
    let mut outcomes = Vec::with_capacity(trace.len());
    let stats = run(state, trace, 0, Some(&mut outcomes))?;
    Ok((stats, outcomes))
}

/// Accesses needed to fill every way of every set once on a miss-only stream.
pub fn warmup_length(geometry: &TagGeometry, associativity: u32) -> usize {
    (geometry.sets * associativity as u64) as usize
}

/// Replays `trace` once single-step and once per `k`, returning whether
/// every run produced the same per-access hit/miss sequence.
pub fn invariance_check(config: &CacheConfig, trace: &[TraceRecord], k_values: &[u32], exec: Execution) -> Result<bool> {
    let n = config.geometry()?.tag_bits;
    if let Some(&k) = k_values.iter().find(|&&k| k < 1 || k > n) {
        return Err(Error::SplitOutOfRange { k, n });
    }
    let mut schemes = vec![Compare::SingleStep];
    schemes.extend(k_values.iter().map(|&k| Compare::TwoStep { k }));
    let runs = exec.try_map(schemes, |compare| {
        let mut state = CacheState::new(*config, compare)?;
        run_trace_recording(&mut state, trace)
    })?;
    let (base_stats, base_outcomes) = &runs[0];
    Ok(runs[1..].iter().all(|(s, o)| {
        (s.hits, s.misses) == (base_stats.hits, base_stats.misses) && o == base_outcomes
    }))
}
