//! Expected tag-bit reads under two-step (partitioned) tag comparison in
//! set-associative caches: closed-form model, optimum splitting point,
//! trace-driven validation, and energy/MTTF ratios.

pub mod analytic;
pub mod cost;
pub mod error;
pub mod optimum;
pub mod par;
pub mod sim;
pub mod sweep;

pub use analytic::{derive_geometry, expected_reads, CacheConfig, SplitEval, TagGeometry};
pub use error::{Error, Result};
pub use optimum::{k_min_integer, k_optimal_continuous, lambert_w_log, OptimumResult};
pub use par::Execution;
pub use sim::{CacheState, Compare, SimStats, TraceRecord};
