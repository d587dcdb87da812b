use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use dynascore::equilibrium::fpa_equilibrium_solve;
use dynascore::oracle::{dp_solve, DpSpec};
use dynascore::revenue::simulate_arms;
use dynascore::{MarketParams, ValueDistribution};
use dynascore_bench::{one_sweep, revenue_pair};

fn dp(c: &mut Criterion) {
    let mut group = c.benchmark_group("dp_solve");
    group.sample_size(10);
    group.bench_function("spa_reserve", |b| {
        b.iter(|| dp_solve(black_box(&DpSpec::spa_reserve(0.6, 0.4))).unwrap())
    });
    group.bench_function("fpa_discounted_rho_0.1", |b| {
        b.iter(|| dp_solve(black_box(&DpSpec::fpa_discounted(1.0, 0.8, 0.1))).unwrap())
    });
    group.bench_function("spa_three", |b| {
        b.iter(|| dp_solve(black_box(&DpSpec::spa_three(0.5, 0.3))).unwrap())
    });
    group.finish();
}

fn simulate(c: &mut Criterion) {
    let dist = ValueDistribution::uniform();
    let arms = revenue_pair(0.5);
    let mut group = c.benchmark_group("simulate_arms");
    group.sample_size(10);
    for n in [10_000u64, 100_000] {
        group.throughput(Throughput::Elements(n));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| simulate_arms(&dist, &arms, n, 7).unwrap())
        });
    }
    group.finish();
}

fn equilibrium(c: &mut Criterion) {
    let dist = ValueDistribution::uniform();
    let mut group = c.benchmark_group("best_response_sweep");
    group.sample_size(10);
    for r in [0.0, 0.05] {
        let params = MarketParams::new(0.5, 1.0, r, 2).unwrap();
        group.bench_with_input(BenchmarkId::new("r", r), &params, |b, params| {
            b.iter(|| fpa_equilibrium_solve(&dist, params, &one_sweep(128, 256)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, dp, simulate, equilibrium);
criterion_main!(benches);
