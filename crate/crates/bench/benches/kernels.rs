use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use rdopt::design::presets;
use rdopt::device::{fd_axisym_solve, GridSpec, Permittivities, SolverOptions};
use rdopt::gp::{fit, TrainingSet};
use rdopt::sampling::{sobol, BoxDomain};
use rdopt::warp::fit_warped;

fn training(count: usize) -> TrainingSet {
    let domain = BoxDomain::unnamed(vec![0.0; 7], vec![1.0; 7]).unwrap();
    let points = sobol(7, count, &domain).unwrap();
    let values = points.iter().map(|p| 0.5 + 0.4 * (p[0] * 3.0).sin() * (p[1] - 0.5) + 0.05 * p[2]).collect();
    TrainingSet::new(points, values).unwrap()
}

fn gp(c: &mut Criterion) {
    let set = training(256);
    let mut group = c.benchmark_group("gp_fit");
    group.sample_size(10);
    group.bench_function("256", |b| b.iter(|| fit(black_box(set.clone()), 0.0).unwrap()));
    group.finish();
    let model = fit(training(1024), 0.0).unwrap();
    let queries = sobol(7, 1000, &BoxDomain::unnamed(vec![0.1; 7], vec![0.9; 7]).unwrap()).unwrap();
    c.bench_function("gp_predict_mean_1024x1000", |b| b.iter(|| model.predict_mean_batch(black_box(&queries)).unwrap()));
    c.bench_function("gp_predict_1024x1000", |b| b.iter(|| model.predict_batch(black_box(&queries)).unwrap()));
}

fn warp(c: &mut Criterion) {
    let set = training(128);
    let mut group = c.benchmark_group("warp");
    group.sample_size(10);
    group.bench_function("fit_warped_128", |b| b.iter(|| fit_warped(black_box(set.clone()), 0.0, 1.0).unwrap()));
    group.finish();
}

fn fd(c: &mut Criterion) {
    let grid = GridSpec { h_grating: 10.0, h_z: 10.0, radius: 3000.0, rings: 4, ..GridSpec::default() };
    let mut group = c.benchmark_group("fd");
    group.sample_size(10);
    group.bench_function("axisym_nir_i_h10", |b| {
        b.iter(|| fd_axisym_solve(&presets::NIR_I, &Permittivities::gaas(), black_box(&grid), 1.0, &SolverOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, gp, warp, fd);
criterion_main!(benches);
