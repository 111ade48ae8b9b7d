//! Cost of one rigorous rate-bound evaluation and one inner solve of the
//! constrained optimizer, the two kernels the basin-hopping loop repeats.

use criterion::{criterion_group, criterion_main, Criterion};

use delcap::heuristic::{constrained_baa, ConstrainedBaaConfig, RunChannelMatrix};
use delcap::repetition::{md_rate, RepetitionChannelSpec, RunLengthDistribution, TruncationConfig};

fn bench_rate_bound(c: &mut Criterion) {
    let ch = RepetitionChannelSpec::bdc(0.5).unwrap();
    let p = RunLengthDistribution::geometric_with_mean(9.0, 64).unwrap();
    let tc = TruncationConfig::auto(&ch, &p);

    let mut group = c.benchmark_group("lower_bound_kernels");
    group.sample_size(20);
    group.bench_function("certify_geometric_d05", |b| {
        b.iter(|| md_rate(&ch, &p, &tc).rate)
    });

    let m = RunChannelMatrix::for_channel(&ch, 64);
    let cfg = ConstrainedBaaConfig {
        accuracy: 1e-5,
        max_iterations: 30_000,
        ..Default::default()
    };
    group.bench_function("inner_solve_d05", |b| {
        b.iter(|| constrained_baa(&m, 4.0, 9.0, &cfg).unwrap().objective)
    });
    group.finish();
}

criterion_group!(benches, bench_rate_bound);
criterion_main!(benches);
