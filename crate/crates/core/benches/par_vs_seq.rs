//! Rayon pool against a single-thread pool on the heavy kernels.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPoolBuilder;

use waveguide_core::carleman::lemma_bounded_check;
use waveguide_core::forward::{manufacture_pair, solve_heat, DataPreset};
use waveguide_core::presets::{random_smooth_field, Scenario, SeparableOracle};
use waveguide_core::stability::perturbation_sweep;
use waveguide_core::{Regime, SpaceTimeGrid, WaveguideDomain, WeightParams, WeightSystem};

fn grid(n: usize, nt: usize) -> SpaceTimeGrid {
    SpaceTimeGrid::new(WaveguideDomain::bounded(1.0, 1.0, 1.0, 0.0).unwrap(), n, n, nt).unwrap()
}

fn kernels(c: &mut Criterion) {
    let pools = [
        ("parallel", ThreadPoolBuilder::new().build().unwrap()),
        ("sequential", ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
    ];

    let g = grid(31, 64);
    let oracle = SeparableOracle::for_grid(&g, 1.0);
    let pot = oracle.potential(&g).unwrap();
    let data = oracle.boundary_data(&g).unwrap();
    let sc = Scenario::default();
    let (p0, p1) = (sc.potential(&g, 0.0).unwrap(), sc.potential(&g, 0.1).unwrap());
    let ws = WeightSystem::assemble(WeightParams::new(Regime::Bounded, 1.0, 1.0).unwrap(), &g).unwrap();
    let f = random_smooth_field(&g, 7, 4);
    let sweep_grid = grid(15, 32);

    let mut group = c.benchmark_group("kernels");
    group.sample_size(10);
    for (name, pool) in &pools {
        group.bench_with_input(BenchmarkId::new("solve_heat", name), pool, |b, pool| {
            b.iter(|| pool.install(|| solve_heat(&g, &pot, &data).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("manufacture_pair", name), pool, |b, pool| {
            b.iter(|| pool.install(|| manufacture_pair(&p0, &p1, DataPreset::Positive).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("lemma_sweep", name), pool, |b, pool| {
            b.iter(|| pool.install(|| lemma_bounded_check(&f, &ws, &[1.0, 2.0, 4.0, 8.0]).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("perturbation_sweep", name), pool, |b, pool| {
            b.iter(|| pool.install(|| perturbation_sweep(&sc, &sweep_grid, &[0.1, 0.05, 0.025], &[0.1]).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
