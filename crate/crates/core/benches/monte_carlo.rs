use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kolmo_core::domain::{CoefficientField, LipschitzDomain, OmegaBox};
use kolmo_core::group::GroupPoint;
use kolmo_core::par::Execution;
use kolmo_core::simulate::{hitting_ensemble, simulate_transition, SdeConfig};

fn exits(c: &mut Criterion) {
    let bx = OmegaBox::new(LipschitzDomain::half_space(1), GroupPoint::origin(1), 1.0).unwrap();
    let start = GroupPoint::scalar(0.5, -0.1, 0.5);
    let a = CoefficientField::diag_bump(1, 2.0, 1.0, 1.0, true).unwrap();
    let mut g = c.benchmark_group("hitting_ensemble");
    g.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let cfg = SdeConfig::new(a.clone(), 1.0 / 128.0, 1).with_execution(exec);
        g.bench_with_input(BenchmarkId::new(format!("{exec:?}"), 8192), &cfg, |b, cfg| {
            b.iter(|| hitting_ensemble(&start, &bx, cfg, 8192).unwrap())
        });
    }
    g.finish();
}

fn transitions(c: &mut Criterion) {
    let start = GroupPoint::origin(2);
    let a = CoefficientField::identity(2);
    let mut g = c.benchmark_group("transition");
    g.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let cfg = SdeConfig::new(a.clone(), 1.0 / 256.0, 1).with_execution(exec);
        g.bench_with_input(BenchmarkId::new(format!("{exec:?}"), 16384), &cfg, |b, cfg| {
            b.iter(|| simulate_transition(&start, 1.0, cfg, 16384).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, exits, transitions);
criterion_main!(benches);
