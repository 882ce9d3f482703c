use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use msl_core::adversarial::{sample_gamma_stats, ImpossibilityParams};
use msl_core::hypothesis::erm;
use msl_core::procedures::rank_based_procedure;
use msl_core::theory::{eps, general_pooling_bound, minimax_rate, oracle_bound};
use msl_core::{
    HypothesisClass, Label, Marginal, MultisourceInstance, Noise, ProcedureConfig, RateQuery, Side, TaskDistribution,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn noisy_threshold(b: f64) -> TaskDistribution {
    TaskDistribution::threshold(Marginal::Uniform { a: 0.0, b }, 0.5, Side::Left, Noise::Flip { q: 0.1 }).unwrap()
}

fn erm_sweep(c: &mut Criterion) {
    let class = HypothesisClass::thresholds(0.0, 1.0, Side::Left).unwrap();
    let dist = noisy_threshold(1.0);
    let mut group = c.benchmark_group("erm_thresholds");
    for n in [1_000, 10_000, 100_000] {
        let s = dist.sample(n, &mut ChaCha8Rng::seed_from_u64(1));
        group.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| b.iter(|| erm(&class, black_box(s))));
    }
    group.finish();
}

fn rank_based(c: &mut Criterion) {
    let class = HypothesisClass::thresholds(0.0, 2.0, Side::Left).unwrap();
    let mut group = c.benchmark_group("rank_based");
    for sources in [4usize, 16, 64] {
        let mut tasks: Vec<TaskDistribution> = (0..sources).map(|_| noisy_threshold(2.0)).collect();
        tasks.push(noisy_threshold(1.0));
        let inst =
            MultisourceInstance::new(tasks, vec![32; sources + 1], vec![1.0; sources + 1], 1.0, 2.0, 2.0, class.clone())
                .unwrap();
        let z = inst.sample(&mut ChaCha8Rng::seed_from_u64(2));
        let ranking = inst.ranking();
        let config = ProcedureConfig::default();
        group.bench_with_input(BenchmarkId::from_parameter(sources), &z, |b, z| {
            b.iter(|| rank_based_procedure(black_box(z), &ranking, &class, &config).unwrap())
        });
    }
    group.finish();
}

fn gamma_stats(c: &mut Criterion) {
    let p = ImpossibilityParams {
        beta: 0.0,
        n: 1,
        n_target: 16,
        n_p: 1 << 24,
        n_q: 16,
        c0: 0.25,
        c1: 1.0 / 1024.0,
        sigma: Label::Neg,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    c.bench_function("sample_gamma_stats_2^24", |b| b.iter(|| sample_gamma_stats(black_box(&p), &mut rng).unwrap()));
}

fn calculators(c: &mut Criterion) {
    let rhos: Vec<f64> = (0..100).map(|i| 1.0 + i as f64 * 0.05).collect();
    let q = RateQuery::new(rhos, vec![1_000; 100], 0.5);
    c.bench_function("eps", |b| b.iter(|| eps(black_box(10_000), 0.1, 3)));
    c.bench_function("minimax_rate_100", |b| b.iter(|| minimax_rate(black_box(&q)).unwrap()));
    c.bench_function("oracle_bound_100", |b| b.iter(|| oracle_bound(black_box(&q)).unwrap()));
    c.bench_function("general_pooling_bound_100", |b| b.iter(|| general_pooling_bound(black_box(&q)).unwrap()));
}

criterion_group!(benches, erm_sweep, rank_based, gamma_stats, calculators);
criterion_main!(benches);
