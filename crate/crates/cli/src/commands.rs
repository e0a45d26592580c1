use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use tagsplit::cost::{CostParams, RELIABILITY_MODEL};
use tagsplit::optimum::k_min_integer;
use tagsplit::sim::summary::{write_summaries, SimSummary};
use tagsplit::sim::trace::{read_trace, write_trace};
use tagsplit::sim::{generate_trace, run_trace_warm, CacheState, Compare, TraceKind};
use tagsplit::sweep::{auto_warmup, curves, k_min_span, run_sweep, write_curves, write_sweep, OutputFormat, SweepSpec, TraceSettings};
use tagsplit::{expected_reads, CacheConfig, Error, Execution, Result};

use crate::args::{AnalyzeArgs, CacheArgs, CurvesArgs, GenTraceArgs, Grid, Kind, SimulateArgs, SweepArgs};

fn io_err(path: &str) -> impl FnOnce(io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.into(),
        source: e,
    }
}

impl CacheArgs {
    fn config(&self) -> CacheConfig {
        CacheConfig::new(self.addr_bits, self.size, self.block, self.assoc)
    }
}

fn human_size(bytes: u64) -> String {
    match bytes {
        b if b >= 1 << 20 && b % (1 << 20) == 0 => format!("{} MB", b >> 20),
        b if b >= 1 << 10 && b % (1 << 10) == 0 => format!("{} KB", b >> 10),
        b => format!("{b} B"),
    }
}

/// Writes to `path`, or stdout when absent.
fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush().map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)
        }
    }
}

pub fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let config = args.cache.config();
    let g = config.geometry()?;
    let (n, x) = (g.tag_bits, config.associativity);
    let opt = k_min_integer(n, x)?;
    let k = args.k.unwrap_or(opt.k_min);
    let eval = expected_reads(n, x, k)?;

    let mut out = io::stdout().lock();
    let w = &mut out;
    let res: io::Result<()> = (|| {
        writeln!(
            w,
            "cache            {} {}-way, {} B blocks, {}-bit addresses",
            human_size(config.cache_size),
            x,
            config.block_size,
            config.address_bits
        )?;
        writeln!(
            w,
            "geometry         sets={} index_bits={} offset_bits={} tag_bits={}",
            g.sets, g.index_bits, g.offset_bits, g.tag_bits
        )?;
        writeln!(w, "k_optimal        {:.6}", opt.k_optimal)?;
        writeln!(w, "k_min            {}", opt.k_min)?;
        writeln!(
            w,
            "round(k_optimal) {} ({})",
            opt.k_optimal.round(),
            if opt.is_round_of_continuous() { "matches k_min" } else { "differs from k_min" }
        )?;
        writeln!(w, "k                {k}")?;
        writeln!(w, "baseline_bits    {:.6}", (n * x) as f64)?;
        writeln!(w, "first_step_bits  {:.6}", eval.first_step_bits)?;
        writeln!(w, "second_step_bits {:.6}", eval.expected_second_step_bits)?;
        writeln!(w, "total_bits       {:.6}", eval.total_bits)?;
        writeln!(w, "reduction_ratio  {:.6}", eval.reduction_ratio)?;
        writeln!(w, "reduction        {:.2}%", 100.0 * (1.0 - eval.reduction_ratio))
    })();
    res.map_err(io_err("<stdout>"))
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let mut spec = match args.grid {
        Some(Grid::Conventional) => SweepSpec::conventional(),
        Some(Grid::Extended) => SweepSpec::extended(),
        None => SweepSpec::new(Vec::new(), Vec::new(), Vec::new()),
    };
    if !args.size.is_empty() {
        spec.cache_sizes = args.size.clone();
    }
    if !args.assoc.is_empty() {
        spec.associativities = args.assoc.clone();
    }
    if !args.addr_bits.is_empty() {
        spec.address_bits = args.addr_bits.clone();
    }
    spec.block_size = args.block;
    spec.k_range = args.k_range.clone();
    spec.cost_accesses = args.cost_accesses;
    if args.simulate {
        spec.simulation = Some(TraceSettings {
            template: args.generator.template(),
            length: args.generator.length,
            seed: args.generator.seed,
        });
    }
    if let Some(p) = &args.params {
        spec.params = Some(CostParams::load(p)?);
    }

    let rows = run_sweep(&spec, Execution::default())?;
    with_output(args.out.as_deref(), |w| write_sweep(w, &rows, args.format.into()))?;

    let grid_points: BTreeSet<_> = rows
        .iter()
        .map(|r| (r.cache_size, r.associativity, r.address_bits))
        .collect();
    let not_round = {
        let mut v: Vec<u32> = rows
            .iter()
            .filter(|r| !r.is_round_of_continuous)
            .map(|r| r.tag_bits)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let mut err = io::stderr().lock();
    let (lo, hi) = k_min_span(&rows).unwrap_or((0, 0));
    let _ = writeln!(err, "{} rows over {} grid points; k_min spans [{lo}, {hi}]", rows.len(), grid_points.len());
    let _ = writeln!(err, "k_min depends on tag length only; associativity enters through tag length");
    if not_round.is_empty() {
        let _ = writeln!(err, "k_min = round(k_optimal) at every grid point");
    } else {
        let _ = writeln!(err, "k_min != round(k_optimal) for tag lengths {not_round:?}");
    }
    if spec.params.is_some() {
        let _ = writeln!(err, "mttf model: {RELIABILITY_MODEL}");
    }

    if let Some(expected) = &args.expect_k_min {
        if lo < *expected.start() || hi > *expected.end() {
            return Err(Error::Invariant(format!(
                "k_min spans [{lo}, {hi}], outside expected [{}, {}]",
                expected.start(),
                expected.end()
            )));
        }
    }
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let config = args.cache.config();
    let g = config.geometry()?;
    let n = g.tag_bits;
    let ks = if args.k.is_empty() {
        vec![k_min_integer(n, config.associativity)?.k_min]
    } else {
        args.k.clone()
    };
    if let Some(&k) = ks.iter().find(|&&k| k > n) {
        return Err(Error::SplitOutOfRange { k, n });
    }
    let params = args.params.as_deref().map(CostParams::load).transpose()?;

    let (trace, source) = match &args.trace {
        Some(p) => (read_trace(p)?, p.display().to_string()),
        None => {
            let kind = args.generator.template().for_config(&config);
            let t = generate_trace(&kind, args.generator.length, args.generator.seed)?;
            (t, format!("{} x{} seed={}", kind.name(), args.generator.length, args.generator.seed))
        }
    };
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let warmup = match args.warmup {
        Some(w) => w,
        None => auto_warmup(&config, trace.len())?,
    };

    let summaries = Execution::default().try_map(ks, |k| {
        let mut state = CacheState::new(config, Compare::TwoStep { k })?;
        let stats = run_trace_warm(&mut state, &trace, warmup)?;
        stats.check_invariants()?;
        SimSummary::new(&config, &stats, warmup, params.as_ref())
    })?;

    let mut out = io::stdout().lock();
    let res: io::Result<()> = (|| {
        writeln!(
            out,
            "# {} {}-way, {} B blocks, {}-bit addresses; tag_bits={n}",
            human_size(config.cache_size),
            config.associativity,
            config.block_size,
            config.address_bits
        )?;
        writeln!(out, "# trace: {source}; {} accesses, warm-up {warmup}", trace.len())?;
        writeln!(
            out,
            "# normalized_reads is relative to the same trace compared single-step (k = n)"
        )?;
        if params.is_some() {
            writeln!(out, "# mttf model: {RELIABILITY_MODEL}")?;
        }
        for s in &summaries {
            writeln!(
                out,
                "k={:<3} hits={} misses={} bits/access={:.4} predicted={:.4} rel_err={:+.4}% normalized={:.6} survivors={:.5} (model {:.5})",
                s.k,
                s.hits,
                s.misses,
                s.bits_per_access,
                s.predicted_bits_per_access,
                100.0 * s.relative_error,
                s.normalized_reads,
                s.mean_survivors,
                s.predicted_survivors
            )?;
            if let (Some(e), Some(m)) = (s.energy_ratio, s.mttf_ratio) {
                writeln!(out, "      energy_ratio={e:.6} mttf_ratio={m:.6}")?;
            }
        }
        Ok(())
    })();
    res.map_err(io_err("<stdout>"))?;

    if let Some(p) = &args.out {
        with_output(Some(p), |w| write_summaries(w, &summaries, args.format.into()))?;
    }
    Ok(())
}

pub fn gen_trace(args: &GenTraceArgs) -> Result<()> {
    let g = &args.generator;
    let kind = match g.kind {
        Kind::Uniform => TraceKind::Uniform {
            address_bits: args.addr_bits,
        },
        Kind::Stride => TraceKind::Stride {
            base: g.base,
            stride: g.stride,
        },
        Kind::ZipfBlock => TraceKind::ZipfBlock {
            exponent: g.zipf_exponent,
            blocks: g.zipf_blocks,
            block_size: args.block,
        },
    };
    let trace = generate_trace(&kind, args.generator.length, args.generator.seed)?;
    write_trace(&args.out, &trace)
}

pub fn curves_cmd(args: &CurvesArgs) -> Result<()> {
    let mut configs = Vec::new();
    let mut invalid = Vec::new();
    for &size in &args.size {
        for &assoc in &args.assoc {
            for &bits in &args.addr_bits {
                let c = CacheConfig::new(bits, size, args.block, assoc);
                match c.geometry() {
                    Ok(_) => configs.push(c),
                    Err(e) => invalid.push(format!("(size={size}, assoc={assoc}, addr={bits}): {e}")),
                }
            }
        }
    }
    if !invalid.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "{} invalid configs:\n  {}",
            invalid.len(),
            invalid.join("\n  ")
        )));
    }
    let rows = curves(&configs, args.k_range.clone())?;
    let format: OutputFormat = args.format.into();
    with_output(args.out.as_deref(), |w| write_curves(w, &rows, format))
}
