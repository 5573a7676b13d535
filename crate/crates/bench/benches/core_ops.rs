//! Hot-path benchmarks: energy/gradient evaluation, the prejacobian and
//! Hodge solves, graph distances, and family construction.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use glmm_bench::{sphere_fixture, torus_fixture};
use glmm_core::concentration::{hodge_decompose, prejacobian};
use glmm_core::energy::{energy_value, gradient, plane_wave_solution};
use glmm_core::manifold::poincare_constant;
use glmm_core::sweep::{build_family, build_sweep_map};

fn bench_energy_and_gradient(c: &mut Criterion) {
    let (mesh, dec) = torus_fixture(64);
    let u = plane_wave_solution(&mesh, 1, 0.05).expect("solution");
    c.bench_function("energy_value_torus64", |b| {
        b.iter(|| black_box(energy_value(&dec, black_box(&u))))
    });
    c.bench_function("gradient_torus64", |b| {
        b.iter(|| black_box(gradient(&dec, black_box(&u))))
    });
}

fn bench_prejacobian_and_hodge(c: &mut Criterion) {
    let (mesh, dec) = torus_fixture(32);
    let spectral = poincare_constant(&dec).expect("spectral");
    let u = plane_wave_solution(&mesh, 1, 0.05).expect("solution");
    c.bench_function("prejacobian_torus32", |b| {
        b.iter(|| black_box(prejacobian(&dec, black_box(&u))))
    });
    c.bench_function("hodge_decompose_torus32", |b| {
        b.iter(|| black_box(hodge_decompose(&dec, &spectral, black_box(&u)).unwrap()))
    });
}

fn bench_distances(c: &mut Criterion) {
    let (mesh, _dec) = sphere_fixture(4);
    c.bench_function("dijkstra_sphere_k4", |b| {
        b.iter(|| black_box(mesh.graph_distances(black_box(0), Some(0.5))))
    });
}

fn bench_family(c: &mut Criterion) {
    let (_mesh, dec) = torus_fixture(32);
    let sweep = build_sweep_map(&dec, 7).expect("sweep map");
    c.bench_function("build_family_torus32_4x12", |b| {
        b.iter(|| black_box(build_family(&dec, &sweep, 0.1, (4, 12)).unwrap()))
    });
}

criterion_group!(
    benches,
    bench_energy_and_gradient,
    bench_prejacobian_and_hodge,
    bench_distances,
    bench_family
);
criterion_main!(benches);
