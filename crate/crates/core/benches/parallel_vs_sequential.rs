use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use kfree_core::diffraction::empirical_amplitude_with;
use kfree_core::kfree::{density_estimate_with, KFreeParams};
use kfree_core::lattice::{DualPoint, Lattice};
use kfree_core::patches::{census_with, FrequencyEngine, Patch};
use kfree_core::Execution;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn density(c: &mut Criterion) {
    let params = KFreeParams::new(2, 1).unwrap();
    let lat = Lattice::integer(2).unwrap();
    let mut g = c.benchmark_group("density_z2_r300");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| density_estimate_with(&params, &lat, black_box(300.0), exec).unwrap())
        });
    }
    g.finish();
}

fn census(c: &mut Criterion) {
    let params = KFreeParams::new(2, 1).unwrap();
    let lat = Lattice::integer(2).unwrap();
    let mut g = c.benchmark_group("census_z2_rho1.5_scan150");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| census_with(&params, &lat, 1.5, black_box(150.0), exec).unwrap())
        });
    }
    g.finish();
}

fn amplitude(c: &mut Criterion) {
    let params = KFreeParams::new(2, 1).unwrap();
    let lat = Lattice::integer(2).unwrap();
    let y = DualPoint::from_fraction(&[1, 2], 3);
    let mut g = c.benchmark_group("amplitude_z2_r300");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| empirical_amplitude_with(&y, &params, &lat, black_box(300.0), exec).unwrap())
        });
    }
    g.finish();
}

fn frequency(c: &mut Criterion) {
    let params = KFreeParams::new(2, 1).unwrap();
    let lat = Lattice::integer(2).unwrap();
    // radius 2.1 window: 21 sites, the single-site patch leaves 20 free
    let patch = Patch::new(vec![kfree_core::LatticePoint::new(vec![0, 0])], 2.1);
    let mut g = c.benchmark_group("frequency_z2_rho2.1");
    g.sample_size(10);
    for (name, exec) in MODES {
        let engine = FrequencyEngine::with_execution(&params, &lat, 2.1, exec).unwrap();
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| engine.evaluate(black_box(&patch), 1e-10).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, density, census, amplitude, frequency);
criterion_main!(benches);
