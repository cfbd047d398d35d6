use breakcast_bench::{segmentation_input, training_windows};
use breakcast_core::breaks::{pelt_detect, PeltConfig};
use breakcast_core::neural::{train, ModelKind, TrainingConfig};
use breakcast_core::wavelet::{denoise, dwt_single, BoundaryMode, WaveletFamily};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn bench_pelt(c: &mut Criterion) {
    let config = PeltConfig::default();
    let mut group = c.benchmark_group("pelt_detect");
    for n in [1_000usize, 10_000, 100_000] {
        let series = segmentation_input(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &series, |b, s| {
            b.iter(|| pelt_detect(black_box(s), &config).unwrap())
        });
    }
    group.finish();
}

fn bench_wavelet(c: &mut Criterion) {
    let signal = segmentation_input(4096);
    let filter = WaveletFamily::Db4.filter();
    c.bench_function("dwt_single_db4_4096", |b| {
        b.iter(|| dwt_single(black_box(&signal), &filter, BoundaryMode::Symmetric).unwrap())
    });
    c.bench_function("denoise_db4_j1_4096", |b| {
        b.iter(|| denoise(black_box(&signal), WaveletFamily::Db4, 1, BoundaryMode::Symmetric).unwrap())
    });
}

fn bench_training_epoch(c: &mut Criterion) {
    let dataset = training_windows(800, 30);
    let config = TrainingConfig {
        hidden: 32,
        layers: 1,
        dropout: 0.0,
        tcn_channels: 16,
        tcn_blocks: 3,
        tcn_kernel: 3,
        max_epochs: 1,
        patience: 1,
        seed: 1,
        ..TrainingConfig::default()
    };
    let mut group = c.benchmark_group("train_one_epoch");
    group.sample_size(10);
    for kind in [ModelKind::Lstm, ModelKind::Gru, ModelKind::Tcn] {
        group.bench_function(kind.name(), |b| {
            b.iter(|| train(black_box(kind), &dataset, &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_pelt, bench_wavelet, bench_training_epoch);
criterion_main!(benches);
