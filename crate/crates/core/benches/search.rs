use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ssrkit::decompose::decompose;
use ssrkit::generate;
use ssrkit::observability::sparse_observability_report;
use ssrkit::simulate::{measure, random_attack};
use ssrkit::solvers::{brute_force_ssr, SolveOptions};
use ssrkit::{SearchConfig, Tolerances};

fn configs() -> [(&'static str, SearchConfig); 2] {
    [
        ("sequential", SearchConfig { parallel: false, ..SearchConfig::default() }),
        ("parallel", SearchConfig { parallel: true, ..SearchConfig::default() }),
    ]
}

fn sparse_index(c: &mut Criterion) {
    let tol = Tolerances::default();
    let mut group = c.benchmark_group("sparse_index");
    group.sample_size(10);
    for n_sensors in [10, 14] {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sys = generate::bench_system(2, 2, n_sensors, &mut rng).unwrap();
        for (name, cfg) in configs() {
            group.bench_with_input(BenchmarkId::new(name, n_sensors), &sys, |b, sys| {
                b.iter(|| black_box(sparse_observability_report(sys, &tol, &cfg)))
            });
        }
    }
    group.finish();
}

fn brute_force(c: &mut Criterion) {
    let tol = Tolerances::default();
    let mut group = c.benchmark_group("brute_force");
    group.sample_size(10);
    for n_sensors in [10, 14] {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sys = generate::bench_system(2, 2, n_sensors, &mut rng).unwrap();
        let bundle = decompose(&sys, &tol, &SearchConfig::default()).unwrap();
        let x0 = generate::random_state(sys.n(), &mut rng);
        let attack = random_attack(&bundle.observability, 2, 10.0, 3).unwrap();
        let meas = measure(&bundle.observability, &x0, &attack, 0.0, 0).unwrap();
        for (name, cfg) in configs() {
            let opts = SolveOptions { search: cfg, ..SolveOptions::default() };
            group.bench_function(BenchmarkId::new(name, n_sensors), |b| {
                b.iter(|| black_box(brute_force_ssr(&bundle, &meas, 2, &opts).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, sparse_index, brute_force);
criterion_main!(benches);
