//! Scaling of the aggregation rules in client count and dimension.
//!
//! The adaptive aggregator runs in O(T K d) per call; doubling K or d
//! should roughly double the per-call time, in contrast to Multi-Krum's
//! O(K^2 d) pairwise distances.

use std::hint::black_box;

use brafl_bench::bench_instance;
use brafl_core::baselines::BaselineSpec;
use brafl_core::bra::{aggregate_bra, BraSettings};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn bra_scaling_in_clients(c: &mut Criterion) {
    let mut group = c.benchmark_group("bra/clients");
    let settings = BraSettings::default();
    for clients in [10usize, 20, 40, 80, 160] {
        let updates = bench_instance(1, clients, 256);
        group.throughput(Throughput::Elements(clients as u64));
        group.bench_with_input(BenchmarkId::from_parameter(clients), &updates, |b, u| {
            b.iter(|| aggregate_bra(black_box(u), &settings).unwrap());
        });
    }
    group.finish();
}

fn bra_scaling_in_dimension(c: &mut Criterion) {
    let mut group = c.benchmark_group("bra/dimension");
    let settings = BraSettings::default();
    for dim in [64usize, 256, 1024, 4096] {
        let updates = bench_instance(2, 20, dim);
        group.throughput(Throughput::Elements(dim as u64));
        group.bench_with_input(BenchmarkId::from_parameter(dim), &updates, |b, u| {
            b.iter(|| aggregate_bra(black_box(u), &settings).unwrap());
        });
    }
    group.finish();
}

fn rules_at_paper_scale(c: &mut Criterion) {
    // Twenty clients, a flattened small-model dimension.
    let updates = bench_instance(3, 20, 4096);
    let mut group = c.benchmark_group("rules/20x4096");

    let bra = BraSettings::default();
    group.bench_function("bayesian", |b| {
        b.iter(|| aggregate_bra(black_box(&updates), &bra).unwrap())
    });
    for (name, spec) in [
        ("fedavg", BaselineSpec::fedavg()),
        ("median", BaselineSpec::median()),
        ("trimmed_mean", BaselineSpec::trimmed_mean(0.2)),
        ("geometric_median", BaselineSpec::geometric_median()),
        ("multi_krum", BaselineSpec::multi_krum(16)),
    ] {
        group.bench_function(name, |b| {
            b.iter(|| spec.aggregate(black_box(&updates)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bra_scaling_in_clients,
    bra_scaling_in_dimension,
    rules_at_paper_scale
);
criterion_main!(benches);
