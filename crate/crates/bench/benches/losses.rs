use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use eercf_bench::loss_levels;
use eercf_core::losses::{inter_loss, intra_loss, total_loss, DEFAULT_ALPHA, DEFAULT_INFONCE_TEMPERATURE};
use eercf_core::LossConfig;
use std::hint::black_box;

fn losses(c: &mut Criterion) {
    let cfg = LossConfig::default();
    for batch in [32, 128] {
        let levels = loss_levels(batch, 512, 0);
        let mut group = c.benchmark_group(format!("loss_b{batch}_d512"));
        group.bench_function(BenchmarkId::from_parameter("inter"), |b| {
            b.iter(|| inter_loss(black_box(&levels[0]), DEFAULT_INFONCE_TEMPERATURE).unwrap())
        });
        group.bench_function(BenchmarkId::from_parameter("intra"), |b| {
            b.iter(|| intra_loss(black_box(&levels[0]), DEFAULT_ALPHA).unwrap())
        });
        group.bench_function(BenchmarkId::from_parameter("total"), |b| {
            b.iter(|| total_loss(black_box(&levels), &cfg).unwrap())
        });
        group.finish();
    }
}

criterion_group!(benches, losses);
criterion_main!(benches);
