use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use mildsol_core::builtin::builtin_system;
use mildsol_core::coeffs::Overrides;
use mildsol_core::convolution::{build_grid, pth_power_gap_bound};
use mildsol_core::measure::sample_jump_path;
use mildsol_core::solver::{direct_scheme, picard_solve, SolverSettings};
use mildsol_core::StateVector;

fn bench_jump_sampling(c: &mut Criterion) {
    let sys = builtin_system("linear-ou-jump", &Overrides::new(), None).unwrap().spec;
    let mut seed = 0u64;
    c.bench_function("sample_jump_path", |b| {
        b.iter(|| {
            seed = seed.wrapping_add(1);
            black_box(sample_jump_path(&sys.nu, 1.0, seed).unwrap())
        })
    });
}

fn bench_direct_path(c: &mut Criterion) {
    let sys = builtin_system("cubic-dissipative", &Overrides::new(), None).unwrap().spec;
    let path = sample_jump_path(&sys.nu, sys.horizon, 7).unwrap();
    let jump_times: Vec<f64> = path.jump_times().collect();
    let grid = build_grid(sys.horizon, 512, &jump_times);
    let x0 = StateVector::uniform_with_norm(sys.dim(), 1.0);
    let settings = SolverSettings::default();
    c.bench_function("direct_scheme_cubic_512", |b| {
        b.iter(|| black_box(direct_scheme(&sys, &path, &grid, &x0, &settings).unwrap()))
    });
}

fn bench_picard_sweeps(c: &mut Criterion) {
    let sys = builtin_system("linear-ou-jump", &Overrides::new(), None).unwrap().spec;
    let settings = SolverSettings { resolution: 128, ..Default::default() };
    c.bench_function("picard_4_sweeps_8_paths", |b| {
        b.iter(|| black_box(picard_solve(&sys, 4, 8, 3, &settings, 0.0).unwrap()))
    });
}

fn bench_gap_bound(c: &mut Criterion) {
    let x = StateVector::new(vec![0.3, -1.1, 2.2, 0.9]).unwrap();
    let y = StateVector::new(vec![-0.4, 0.8, 0.1, -1.7]).unwrap();
    c.bench_function("pth_power_gap_bound_p4", |b| {
        b.iter(|| black_box(pth_power_gap_bound(&x, &y, 4.0).unwrap()))
    });
}

criterion_group!(
    benches,
    bench_jump_sampling,
    bench_direct_path,
    bench_picard_sweeps,
    bench_gap_bound
);
criterion_main!(benches);
