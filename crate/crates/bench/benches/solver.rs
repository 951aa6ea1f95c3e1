use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use superlearner::meta::{solve, MetaSolver};
use superlearner_bench::prediction_matrix;

fn simplex(c: &mut Criterion) {
    let mut group = c.benchmark_group("meta_solver");
    for &m in &[3usize, 14, 30] {
        let (z, y) = prediction_matrix(500, m, 1);
        for method in [MetaSolver::SimplexExact, MetaSolver::NnlsNormalize] {
            group.bench_with_input(BenchmarkId::new(format!("{method:?}"), m), &m, |b, _| {
                b.iter(|| solve(method, black_box(&z), black_box(&y)).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, simplex);
criterion_main!(benches);
