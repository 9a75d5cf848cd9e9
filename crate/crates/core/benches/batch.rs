use criterion::{criterion_group, criterion_main, Criterion};

use sdvn::batch::{run_batch, run_sequential, Job};
use sdvn::controller::{Strategy, StrategyConfig};
use sdvn::scenario::{random_scenario, RandomSpec, Scenario};

fn jobs(scenarios: &[Scenario]) -> Vec<Job<'_>> {
    scenarios
        .iter()
        .flat_map(|s| [Strategy::Baseline, Strategy::Optimized].map(|st| (s, StrategyConfig::with_strategy(st))))
        .collect()
}

fn batch(c: &mut Criterion) {
    let scenarios: Vec<Scenario> = (0..16)
        .map(|seed| random_scenario(seed, &RandomSpec::default()))
        .collect();
    let jobs = jobs(&scenarios);
    let mut g = c.benchmark_group("random_16x2");
    g.sample_size(10);
    g.bench_function("sequential", |b| b.iter(|| run_sequential(&jobs)));
    g.bench_function("batch", |b| b.iter(|| run_batch(&jobs)));
    g.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
