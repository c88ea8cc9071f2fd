//! Sequential against parallel execution for the main pipeline stages.
//!
//! Without the `parallel` feature both variants run the sequential code.

use christoffel::christoffel::ChristoffelEvaluator;
use christoffel::geometry::sample_with;
use christoffel::prelude::*;
use criterion::{BenchmarkId, Criterion, criterion_group, criterion_main};
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench_sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample");
    let spec = SurfaceSpec::standard_torus();
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, 100_000), |b| {
            b.iter(|| sample_with(&spec, 100_000, 7, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_design(c: &mut Criterion) {
    let cloud = sample(&SurfaceSpec::Sphere { p: 3 }, 50_000, 3).unwrap();
    let basis = GradedBasis::chebyshev(3, 8, cloud.default_scale_box()).unwrap();
    let mut group = c.benchmark_group("design");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("matrix", name), |b| {
            b.iter(|| design_matrix(black_box(&cloud), &basis, exec).unwrap())
        });
        group.bench_function(BenchmarkId::new("factor", name), |b| {
            b.iter(|| DesignFactor::new(black_box(&cloud), &basis, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_lambda(c: &mut Criterion) {
    let spec = SurfaceSpec::Sphere { p: 3 };
    let cloud = sample(&spec, 20_000, 11).unwrap();
    let basis = GradedBasis::chebyshev(3, 8, cloud.default_scale_box()).unwrap();
    let factor = DesignFactor::new(&cloud, &basis, Execution::Parallel).unwrap();
    let sp = factor.spectral(8, Normalization::MeanOverN, Threshold::default()).unwrap();
    let evaluator = ChristoffelEvaluator::new(basis, sp).unwrap();
    let grid = make_grid(&spec, (72, 36)).unwrap();
    let points = grid.points;
    let mut group = c.benchmark_group("lambda_grid");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, points.len()), |b| {
            b.iter(|| evaluator.lambda_many(black_box(&points), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_sampling, bench_design, bench_lambda);
criterion_main!(benches);
