use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ssvcqr::graph::spectral_summary;
use ssvcqr::loss::{moreau_value_grad, prox_check, MoreauParams};
use ssvcqr::{build_graph, Bandwidth};
use ssvcqr_bench::design;

fn graph(c: &mut Criterion) {
    let mut group = c.benchmark_group("graph");
    for n in [500, 2000] {
        let sim = design(n);
        let locs = sim.train.locations().to_vec();
        group.bench_with_input(BenchmarkId::new("build", n), &n, |b, _| {
            b.iter(|| build_graph(black_box(&locs), 8, Bandwidth::Auto).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("spectral_summary", n), &n, |b, _| {
            b.iter(|| spectral_summary(&sim.graph, 60))
        });
    }
    group.finish();
}

fn scalar(c: &mut Criterion) {
    let v: Vec<f64> = (0..1024).map(|i| (i as f64 - 512.0) / 100.0).collect();
    c.bench_function("prox_check_1024", |b| {
        b.iter(|| v.iter().map(|&x| prox_check(black_box(x), 0.3, 0.25)).sum::<f64>())
    });
    let p = MoreauParams::new(0.1, 0.25);
    c.bench_function("moreau_1024", |b| {
        b.iter(|| v.iter().map(|&x| moreau_value_grad(black_box(x), p).1).sum::<f64>())
    });
}

criterion_group!(benches, graph, scalar);
criterion_main!(benches);
