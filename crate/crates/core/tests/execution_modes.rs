use tagsplit::sim::{generate_trace, invariance_check, TraceKind};
use tagsplit::sweep::{run_sweep, SweepSpec, TraceSettings, TraceTemplate};
use tagsplit::{CacheConfig, Execution};

#[test]
fn sequential_and_parallel_sweeps_agree() {
    let mut spec = SweepSpec::new(vec![256 << 10, 1 << 20], vec![4, 8, 16], vec![32, 40, 48]);
    spec.simulation = Some(TraceSettings {
        template: TraceTemplate::ZipfBlock {
            exponent: 1.2,
            blocks: 1 << 12,
        },
        length: 20_000,
        seed: 9,
    });
    let seq = run_sweep(&spec, Execution::Sequential).unwrap();
    let par = run_sweep(&spec, Execution::default()).unwrap();
    assert_eq!(seq, par);
    assert_eq!(seq.len(), 2 * 3 * 3 * 10);
}

#[test]
fn invariance_is_mode_independent() {
    let config = CacheConfig::new(32, 32 << 10, 64, 4);
    let trace = generate_trace(&TraceKind::Stride { base: 0, stride: 4096 }, 30_000, 1).unwrap();
    for exec in [Execution::Sequential, Execution::default()] {
        assert!(invariance_check(&config, &trace, &[1, 2, 7, 19], exec).unwrap());
    }
}
