//! Compares the data-parallel paths against a single-thread pool. With the
//! `parallel` feature disabled only the sequential variants run.

use criterion::{criterion_group, criterion_main, Criterion};

use softgate::admissibility::{check_gate, ProbeGrid};
use softgate::gates::GateKind;
use softgate::toysim::{run_training, TrainConfig};

#[cfg(feature = "parallel")]
fn single_thread_pool() -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
}

fn bench_admissibility(c: &mut Criterion) {
    let default_grid = ProbeGrid::default();
    // Ten times the default probe density; enough work per point for the
    // pool to pay for itself.
    let fine_grid = ProbeGrid::new(0.001, 1000.0).unwrap();
    let mut group = c.benchmark_group("admissibility_grid");
    group.sample_size(20);
    group.bench_function("erf_tau5_default_pool", |b| {
        b.iter(|| check_gate(GateKind::Erf, 5.0, &default_grid).unwrap())
    });
    group.bench_function("erf_tau5_fine_default_pool", |b| {
        b.iter(|| check_gate(GateKind::Erf, 5.0, &fine_grid).unwrap())
    });
    #[cfg(feature = "parallel")]
    {
        let pool = single_thread_pool();
        group.bench_function("erf_tau5_single_thread", |b| {
            b.iter(|| pool.install(|| check_gate(GateKind::Erf, 5.0, &default_grid).unwrap()))
        });
        group.bench_function("erf_tau5_fine_single_thread", |b| {
            b.iter(|| pool.install(|| check_gate(GateKind::Erf, 5.0, &fine_grid).unwrap()))
        });
    }
    group.finish();
}

fn bench_training(c: &mut Criterion) {
    let config = TrainConfig {
        steps: 20,
        queries_per_batch: 8,
        ..TrainConfig::default()
    };
    let mut group = c.benchmark_group("training_run");
    group.sample_size(10);
    group.bench_function("20_steps_default_pool", |b| {
        b.iter(|| run_training(&config).unwrap())
    });
    #[cfg(feature = "parallel")]
    group.bench_function("20_steps_single_thread", |b| {
        let pool = single_thread_pool();
        b.iter(|| pool.install(|| run_training(&config).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, bench_admissibility, bench_training);
criterion_main!(benches);
