//! Parallel vs sequential trial throughput on the two schemes that
//! dominate experiment time, plus the erasure solver on its own.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use graphcode::channels::{ChannelSpec, TrialRng, TrialStreams};
use graphcode::gf2::BitVector;
use graphcode::harness::{
    run_experiment, run_experiment_sequential, ExperimentConfig, ReportFormat, SchemeKind,
    TopologySpec,
};
use graphcode::schemes::SchemeConfig;

fn gc3_config(trials: u64) -> ExperimentConfig {
    ExperimentConfig {
        topology: TopologySpec::ExtendedEr { n: 128, c: 6.0 },
        scheme: SchemeKind::Gc3,
        params: SchemeConfig {
            channel: ChannelSpec::bec(0.45).unwrap(),
            p_ch: 0.1,
            ..Default::default()
        },
        trials,
        seed: 42,
        sweep: None,
        out: None,
        format: ReportFormat::Csv,
        p_tar: None,
    }
}

fn p2p_config(trials: u64) -> ExperimentConfig {
    ExperimentConfig {
        topology: TopologySpec::ExtendedEr { n: 256, c: 6.0 },
        scheme: SchemeKind::P2pErasure,
        params: SchemeConfig { channel: ChannelSpec::bec(0.4).unwrap(), ..Default::default() },
        trials,
        seed: 43,
        sweep: None,
        out: None,
        format: ReportFormat::Csv,
        p_tar: None,
    }
}

fn bench_trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("gc3_trials");
    group.sample_size(10);
    let cfg = gc3_config(200);
    group.bench_function("parallel", |b| b.iter(|| run_experiment(&cfg).unwrap()));
    group.bench_function("sequential", |b| b.iter(|| run_experiment_sequential(&cfg).unwrap()));
    group.finish();

    let mut group = c.benchmark_group("p2p_trials");
    group.sample_size(10);
    let cfg = p2p_config(100);
    group.bench_function("parallel", |b| b.iter(|| run_experiment(&cfg).unwrap()));
    group.bench_function("sequential", |b| b.iter(|| run_experiment_sequential(&cfg).unwrap()));
    group.finish();
}

fn bench_erasure_solver(c: &mut Criterion) {
    use graphcode::codes::{erasure_decode, gc3_from_adjacency};
    use graphcode::gf2::{Ternary, TernaryVector};

    let n = 256;
    let master = TrialRng::new(7);
    c.bench_function("erasure_solve_256", |b| {
        b.iter_batched(
            || {
                let mut st = TrialStreams::new(&master, 0, 1);
                let x = BitVector::random(n, st.setup());
                let (code, word) = {
                    use rand::Rng;
                    let p = 6.0 * (n as f64).ln() / n as f64;
                    let mut a = graphcode::gf2::BitMatrix::zeros(n, n);
                    for i in 0..n {
                        for j in 0..n {
                            if st.setup().random::<f64>() < p {
                                a.set(i, j, 1);
                            }
                        }
                    }
                    let code = gc3_from_adjacency(a);
                    let word = code.encode(&x);
                    (code, word)
                };
                let mut recv = TernaryVector::from_bitvector(&word);
                for i in 0..2 * n {
                    use rand::Rng;
                    if st.setup().random::<f64>() < 0.4 {
                        recv.set(i, Ternary::Erased);
                    }
                }
                (code, recv)
            },
            |(code, recv)| erasure_decode(code.generator(), &recv),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, bench_trials, bench_erasure_solver);
criterion_main!(benches);
