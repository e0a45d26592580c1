//! Acceptance suite. Each criterion prints one PASS/FAIL line; the test
//! fails if any criterion does.
//!
//! Run with `cargo test -p tagsplit-cli --test acceptance -- --nocapture`.

use std::f64::consts::LN_2;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tagsplit::analytic::{first_derivative, total_bits_closed};
use tagsplit::cost::{normalized_metrics, CostParams};
use tagsplit::optimum::{convexity_certificate, rounding_deviations};
use tagsplit::sim::{generate_trace, invariance_check, run_trace_warm, warmup_length, TraceKind};
use tagsplit::sweep::{k_min_span, run_sweep, SweepSpec};
use tagsplit::{expected_reads, k_min_integer, k_optimal_continuous, lambert_w_log, CacheConfig, CacheState, Compare, Execution};

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed <= limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn err(e: tagsplit::Error) -> String {
    e.to_string()
}

const WAYS: [u32; 9] = [2, 4, 8, 16, 32, 64, 128, 256, 512];

/// Independent binomial expectation: sum over i of i * C(x, i) p^i (1-p)^(x-i),
/// each term formed in log space.
fn oracle_total(n: u32, x: u32, k: u32) -> f64 {
    if k == 0 {
        return (n * x) as f64;
    }
    let p = 0.5f64.powi(k as i32);
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut ln_choose = 0.0;
    let mut mean = 0.0;
    for i in 1..=x {
        ln_choose += ((x - i + 1) as f64).ln() - (i as f64).ln();
        mean += i as f64 * (ln_choose + i as f64 * lp + (x - i) as f64 * lq).exp();
    }
    (k * x) as f64 + (n - k) as f64 * mean
}

fn closed_form_identity() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 8..=64 {
        for x in WAYS {
            for k in 0..=n {
                let sum = expected_reads(n, x, k).map_err(err)?.total_bits;
                let closed = total_bits_closed(n, x, k as f64);
                let oracle = oracle_total(n, x, k);
                for (a, b) in [(sum, closed), (sum, oracle)] {
                    let rel = (a - b).abs() / b.abs();
                    worst = worst.max(rel);
                    ensure(rel <= 1e-9, || format!("n={n} x={x} k={k}: {a} vs {b}"))?;
                }
                cases += 1;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("{cases} cases, worst relative gap {worst:.2e}, {:.2?}", start.elapsed()))
}

fn reference_optimum() -> Verdict {
    let mut parts = Vec::new();
    for bits in [40, 48] {
        let config = CacheConfig::new(bits, 1 << 20, 64, 8);
        let n = config.geometry().map_err(err)?.tag_bits;
        let opt = k_min_integer(n, 8).map_err(err)?;
        ensure(opt.k_min == 4, || format!("{bits}-bit: k_min = {}", opt.k_min))?;
        parts.push(format!("{bits}-bit n={n} k_min={}", opt.k_min));
    }
    Ok(parts.join(", "))
}

fn k_min_ranges() -> Verdict {
    let start = Instant::now();
    let conv = run_sweep(&SweepSpec::conventional(), Execution::default()).map_err(err)?;
    let (clo, chi) = k_min_span(&conv).ok_or("empty conventional sweep")?;
    ensure(clo >= 3 && chi <= 5, || format!("conventional spans [{clo}, {chi}]"))?;

    let ext = run_sweep(&SweepSpec::extended(), Execution::default()).map_err(err)?;
    let (elo, ehi) = k_min_span(&ext).ok_or("empty extended sweep")?;
    ensure(elo >= 2 && ehi <= 6, || format!("extended spans [{elo}, {ehi}]"))?;
    ensure(elo == 2, || format!("extended never reaches 2 (spans [{elo}, {ehi}])"))?;
    within(start.elapsed(), Duration::from_secs(10))?;

    // k_min = 6 first appears at n = 69, beyond any tag in the grid
    let longest = ext.iter().map(|r| r.tag_bits).max().unwrap_or(0);
    let first_six = (2..=128)
        .find(|&n| k_min_integer(n, 1).map(|o| o.k_min >= 6).unwrap_or(false))
        .unwrap_or(0);
    Ok(format!(
        "conventional [{clo}, {chi}], extended [{elo}, {ehi}] (longest tag {longest} bits; k_min = 6 needs n >= {first_six}), {:.2?}",
        start.elapsed()
    ))
}

fn stationarity() -> Verdict {
    let mut worst = 0.0f64;
    for n in 8..=64u32 {
        let k = k_optimal_continuous(n).map_err(err)?;
        let ln_z = n as f64 * LN_2 + 1.0;
        let w = lambert_w_log(ln_z).map_err(err)?;
        ensure((w + w.ln() - ln_z).abs() <= 1e-12 * ln_z, || format!("n={n}: W identity off"))?;
        ensure((w.log2() - k).abs() <= 1e-12, || format!("n={n}: k_opt != log2 W"))?;
        for x in WAYS {
            let d = first_derivative(n, x, k);
            worst = worst.max(d.abs());
            ensure(d.abs() <= 1e-9, || format!("n={n} x={x}: derivative {d:e}"))?;
            let opt = k_min_integer(n, x).map_err(err)?;
            ensure(opt.brackets(), || {
                format!("n={n}: k_min {} outside [floor, ceil] of {}", opt.k_min, opt.k_optimal)
            })?;
        }
    }
    let dev = rounding_deviations(8..=64).map_err(err)?;
    let dev = if dev.is_empty() {
        "k_min = round(k_opt) for every n".to_string()
    } else {
        let list: Vec<String> = dev
            .iter()
            .map(|d| format!("n={} k_opt={:.4} k_min={}", d.n, d.k_optimal, d.k_min))
            .collect();
        format!("k_min != round(k_opt) at {}", list.join("; "))
    };
    Ok(format!("max |dE/dk| {worst:.2e}; {dev}"))
}

fn convexity() -> Verdict {
    let start = Instant::now();
    for n in 8..=64 {
        for x in WAYS {
            let ok = convexity_certificate(n, x, 1000).map_err(err)?;
            ensure(ok, || format!("n={n} x={x}: non-positive second derivative"))?;
        }
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("1000 samples for each n in 8..=64 and {} associativities, {:.2?}", WAYS.len(), start.elapsed()))
}

fn simulation_matches_model() -> Verdict {
    let start = Instant::now();
    let config = CacheConfig::new(40, 1 << 20, 64, 8);
    let g = config.geometry().map_err(err)?;
    let warmup = 4 * warmup_length(&g, 8);
    let measured = 1_000_000;
    let trace = generate_trace(&TraceKind::Uniform { address_bits: 40 }, warmup + measured, 2024).map_err(err)?;
    let mut state = CacheState::new(config, Compare::TwoStep { k: 4 }).map_err(err)?;
    let stats = run_trace_warm(&mut state, &trace, warmup).map_err(err)?;
    stats.check_invariants().map_err(err)?;
    state.check_invariants().map_err(err)?;

    let bits = stats.bits_per_access();
    let rel = (bits - 41.5) / 41.5;
    ensure(rel.abs() <= 0.01, || format!("{bits} bits/access, {:+.3}%", 100.0 * rel))?;
    let p = 1.0 / 16.0;
    let se = (8.0 * p * (1.0 - p) / stats.accesses as f64).sqrt();
    let z = (stats.mean_survivors() - 0.5) / se;
    ensure(z.abs() <= 3.0, || format!("mean survivors {} is {z:+.2} SE from 0.5", stats.mean_survivors()))?;
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "{bits:.4} bits/access ({:+.3}%), survivors {:.5} ({z:+.2} SE), {:.2?}",
        100.0 * rel,
        stats.mean_survivors(),
        start.elapsed()
    ))
}

fn hit_miss_invariance() -> Verdict {
    let config = CacheConfig::new(40, 1 << 20, 64, 8);
    let n = config.geometry().map_err(err)?.tag_bits;
    let ks = [1, 3, 5, 8, n];
    let kinds = [
        TraceKind::Uniform { address_bits: 40 },
        TraceKind::Stride { base: 0x1000, stride: 192 },
        TraceKind::ZipfBlock {
            exponent: 1.1,
            blocks: 1 << 16,
            block_size: 64,
        },
    ];
    let mut names = Vec::new();
    for (seed, kind) in kinds.iter().enumerate() {
        let trace = generate_trace(kind, 100_000, seed as u64 + 7).map_err(err)?;
        let same = invariance_check(&config, &trace, &ks, Execution::default()).map_err(err)?;
        ensure(same, || format!("{} trace: outcomes differ from single-step", kind.name()))?;
        names.push(kind.name());
    }
    Ok(format!("{} traces x k in {ks:?}: identical per-access outcomes", names.join("/")))
}

fn energy_mttf_reciprocity() -> Verdict {
    let params = CostParams {
        energy_per_bit_read: 1e-15,
        fixed_energy_per_access: 0.0,
        leakage_power: 0.0,
        execution_time: 1.0,
        p_read_disturb: 1e-12,
    };
    let configs = SweepSpec::extended().configs().map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let c = configs[rng.random_range(0..configs.len())];
        let g = c.geometry().map_err(err)?;
        let k = rng.random_range(1..=g.tag_bits.min(10));
        let m = normalized_metrics(g.tag_bits, c.associativity, k, &params, 1_000_000).map_err(err)?;
        let prod = m.energy_ratio * m.mttf_ratio;
        worst = worst.max((prod - 1.0).abs());
        ensure((prod - 1.0).abs() <= 1e-6, || format!("{c:?} k={k}: product {prod}"))?;
    }
    let m = normalized_metrics(23, 8, 4, &params, 1_000_000).map_err(err)?;
    ensure((m.mttf_ratio - 4.43).abs() < 0.01, || format!("1M/8-way/40-bit mttf ratio {}", m.mttf_ratio))?;
    Ok(format!("10 random points, max |E*M - 1| {worst:.2e}; 1M/8-way/40-bit k=4 MTTF ratio {:.3}", m.mttf_ratio))
}

fn large_reduction() -> Verdict {
    let config = CacheConfig::new(64, 256 << 10, 64, 4);
    let n = config.geometry().map_err(err)?.tag_bits;
    let opt = k_min_integer(n, 4).map_err(err)?;
    let eval = expected_reads(n, 4, opt.k_min).map_err(err)?;
    let reduction = 1.0 - eval.reduction_ratio;
    ensure(reduction >= 0.8, || format!("reduction {:.2}%", 100.0 * reduction))?;
    Ok(format!(
        "256KB/4-way/64-bit: n={n}, k_min={}, {:.2} of {} bits, reduction {:.2}% (qualitative: >= 80%)",
        opt.k_min,
        eval.total_bits,
        n * 4,
        100.0 * reduction
    ))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tagsplit"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr))
    })
}

fn read(p: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()))
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name);
    let s = |p: &Path| p.to_str().unwrap().to_string();

    let mut checked = Vec::new();
    for format in ["csv", "json-lines"] {
        let (a, b) = (path(&format!("a.{format}")), path(&format!("b.{format}")));
        for out in [&a, &b] {
            run_cli(&[
                "sweep", "--size", "256K,1M", "--assoc", "4,8", "--addr-bits", "40,48", "--k-range", "1-8",
                "--simulate", "--length", "20000", "--seed", "11", "--format", format, "--out", &s(out),
            ])?;
        }
        ensure(read(&a)? == read(&b)?, || format!("sweep {format} output differs between runs"))?;
        checked.push(format!("sweep {format}"));
    }
    for (kind, ext) in [("uniform", "trace"), ("zipf-block", "bin"), ("stride", "trace")] {
        let (a, b) = (path(&format!("a-{kind}.{ext}")), path(&format!("b-{kind}.{ext}")));
        for out in [&a, &b] {
            run_cli(&["gen-trace", "--kind", kind, "--length", "50000", "--seed", "5", "--out", &s(out)])?;
        }
        ensure(read(&a)? == read(&b)?, || format!("gen-trace {kind} output differs between runs"))?;
        checked.push(format!("gen-trace {kind}"));
    }
    Ok(format!("byte-identical reruns: {}", checked.join(", ")))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("closed form equals binomial sum", closed_form_identity),
        ("k_min = 4 for 1M 8-way 64B caches", reference_optimum),
        ("k_min ranges over grids", k_min_ranges),
        ("stationarity, Lambert W and bracketing", stationarity),
        ("convexity certificate", convexity),
        ("simulation matches model", simulation_matches_model),
        ("hit/miss invariance", hit_miss_invariance),
        ("energy x MTTF reciprocity", energy_mttf_reciprocity),
        ("large reduction at 256KB 4-way 64-bit", large_reduction),
        ("deterministic CLI output", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS [{:>2}] {name}: {detail}", i + 1),
            Err(why) => {
                println!("FAIL [{:>2}] {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
