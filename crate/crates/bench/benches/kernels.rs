use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use dualkin_bench::workload;
use dualkin_core::cumulants::Cumulants;
use dualkin_core::gke::{cluster_expansion_identity, f1_series};
use dualkin_core::hartree::{hartree_solve, wave_packet, Grid1D, Kernel};
use dualkin_core::hierarchy::evolve_expansion;
use dualkin_core::meanfield::limit_evolve_spectral;
use dualkin_core::NBodyOperator;

fn groups(c: &mut Criterion) {
    let w = workload(1, 5);
    let g = w.observables.entry(3).clone();
    c.bench_function("heisenberg_s3", |b| b.iter(|| w.set.heisenberg_map(3, black_box(0.5), &g).unwrap()));
    let g5 = NBodyOperator::product(2, (1..=5).collect(), w.state.matrix()).unwrap();
    let cumulants = Cumulants::new(&w.set, 0.5).unwrap();
    c.bench_function("forward_cumulant_order5", |b| b.iter(|| cumulants.forward(None, &[1, 2, 3, 4, 5], black_box(&g5)).unwrap()));
}

fn hierarchies(c: &mut Criterion) {
    let w = workload(2, 3);
    c.bench_function("evolve_expansion_s3", |b| b.iter(|| evolve_expansion(&w.observables, black_box(0.5), &w.set).unwrap()));
    c.bench_function("limit_spectral_s3", |b| b.iter(|| limit_evolve_spectral(&w.observables, black_box(0.5), &w.model, 24).unwrap()));
}

fn kinetic(c: &mut Criterion) {
    let w = workload(3, 6);
    c.bench_function("f1_series_cap5", |b| b.iter(|| f1_series(&w.set, &w.state, black_box(0.4), 5).unwrap()));
    let f = NBodyOperator::product(2, vec![1, 2, 3, 4], w.state.matrix()).unwrap();
    c.bench_function("cluster_expansion_s2_n2", |b| b.iter(|| cluster_expansion_identity(&w.set, black_box(0.4), 2, 2, &f).unwrap()));
}

fn grid(c: &mut Criterion) {
    let grid = Grid1D::new(64, 0.5, Kernel::Gaussian { amplitude: 1.0, width: 1.0 }).unwrap();
    let psi = wave_packet(&grid, 16.0, 1.5, 1.0);
    c.bench_function("hartree_64_points_100_steps", |b| b.iter(|| hartree_solve(black_box(&psi), &grid, 1.0, 0.01).unwrap()));
}

criterion_group!(benches, groups, hierarchies, kinetic, grid);
criterion_main!(benches);
