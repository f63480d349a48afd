use std::hint::black_box;

use aoi_core::age::{
    average_age_h, average_age_q, peak_age, penalty_bias, AgeTrace, BiasModel, PenaltyKind,
    PenaltySpec,
};
use aoi_core::sim::{simulate, SimConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn trace(n: u64) -> AgeTrace {
    simulate(&SimConfig::mm1(0.53, 1.0, n, 1)).unwrap().trace
}

fn averages(c: &mut Criterion) {
    let mut g = c.benchmark_group("average_age");
    for n in [1_000u64, 100_000] {
        let t = trace(n);
        g.throughput(Throughput::Elements(n));
        g.bench_with_input(BenchmarkId::new("q_form", n), &t, |b, t| {
            b.iter(|| average_age_q(black_box(t)))
        });
        g.bench_with_input(BenchmarkId::new("h_form", n), &t, |b, t| {
            b.iter(|| average_age_h(black_box(t)))
        });
        g.bench_with_input(BenchmarkId::new("peak", n), &t, |b, t| {
            b.iter(|| peak_age(black_box(t)))
        });
    }
    g.finish();
}

fn penalties(c: &mut Criterion) {
    let t = trace(100_000);
    let bias = BiasModel::from_secs(1.0);
    let mut g = c.benchmark_group("penalty_bias");
    for kind in [
        PenaltyKind::Linear,
        PenaltyKind::Exponential,
        PenaltyKind::Logarithmic,
    ] {
        let p = PenaltySpec::new(kind, 0.5).unwrap();
        g.bench_function(kind.to_string(), |b| {
            b.iter(|| penalty_bias(black_box(&t), &bias, &p))
        });
    }
    g.finish();
}

criterion_group!(benches, averages, penalties);
criterion_main!(benches);
