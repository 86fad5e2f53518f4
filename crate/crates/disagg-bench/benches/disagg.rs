use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use disagg_bench::instance;
use disagg_core::{
    adaptive_sp_td, build_ar1_shape, build_litterman_shape, disaggregate_classical, lars_path,
    sp_td, Method,
};
use nalgebra::{DMatrix, DVector};

fn covariance_shapes(c: &mut Criterion) {
    c.bench_function("ar1_shape_p200", |b| {
        b.iter(|| build_ar1_shape(black_box(0.8), black_box(200)).unwrap())
    });
    c.bench_function("litterman_shape_p200", |b| {
        b.iter(|| build_litterman_shape(black_box(0.8), black_box(200)).unwrap())
    });
}

fn classical(c: &mut Criterion) {
    let (out, panel, spec) = instance(17, 68, 4, 5, 0.8, 0.0, 1);
    let grid: Vec<f64> = (0..199).map(|i| -0.99 + 0.01 * i as f64).collect();
    c.bench_function("chow_lin_17x68_d5_grid199", |b| {
        b.iter(|| {
            disaggregate_classical(
                black_box(&out.y_low),
                black_box(&panel),
                &spec,
                Method::ChowLin,
                &grid,
            )
            .unwrap()
        })
    });
}

fn lars(c: &mut Criterion) {
    let (out, _, _) = instance(10, 40, 4, 100, 0.0, 0.9, 3);
    let mut x: DMatrix<f64> = out.x.clone();
    for mut col in x.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }
    let y: DVector<f64> = out.y_high.clone();
    c.bench_function("lars_path_40x100", |b| {
        b.iter(|| lars_path(black_box(&y), black_box(&x), 39).unwrap())
    });
}

fn sparse(c: &mut Criterion) {
    let (out, panel, spec) = instance(17, 68, 4, 100, 0.8, 0.98, 2);
    let grid: Vec<f64> = (0..21).map(|i| -0.9 + 0.09 * i as f64).collect();
    let mut group = c.benchmark_group("sparse");
    group.sample_size(20);
    group.bench_function("sp_td_17x68_d100_grid21", |b| {
        b.iter(|| sp_td(black_box(&out.y_low), black_box(&panel), &spec, &grid).unwrap())
    });
    group.bench_function("adaptive_sp_td_17x68_d100_grid21", |b| {
        b.iter(|| {
            adaptive_sp_td(black_box(&out.y_low), black_box(&panel), &spec, &grid).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, covariance_shapes, classical, lars, sparse);
criterion_main!(benches);
