use std::hint::black_box;

use arousal_core::eval::roc_auc;
use arousal_core::explain::explain_row;
use arousal_core::models::{train, BoostParams, ForestParams, Matrix, ModelSpec};
use arousal_core::{impute_series, ImputationConfig};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NAMES: [&str; 9] = ["f0", "f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8"];

fn data(n: usize, seed: u64) -> (Matrix, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..9).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let y = rows.iter().map(|r| r[0] + 0.5 * r[3] > rng.random_range(-0.5..0.5)).collect();
    (Matrix::from_rows(&rows).unwrap(), y)
}

fn training(c: &mut Criterion) {
    let (x, y) = data(2000, 1);
    let mut g = c.benchmark_group("train");
    g.sample_size(10);
    g.bench_function("gradient_boost_2000x9", |b| {
        let spec = ModelSpec::GradientBoost(BoostParams::default());
        b.iter(|| train(&spec, &x, &y, &NAMES, 0).unwrap())
    });
    g.bench_function("random_forest_2000x9", |b| {
        let spec = ModelSpec::RandomForest(ForestParams::default());
        b.iter(|| train(&spec, &x, &y, &NAMES, 0).unwrap())
    });
    g.finish();
}

fn treeshap(c: &mut Criterion) {
    let (x, y) = data(2000, 2);
    let model = train(&ModelSpec::GradientBoost(BoostParams::default()), &x, &y, &NAMES, 0).unwrap();
    let probe = [0.1, -0.2, 0.3, 0.0, 0.5, -0.7, 0.2, 0.9, -0.4];
    c.bench_function("treeshap_gradient_boost_row", |b| b.iter(|| explain_row(&model, black_box(&probe)).unwrap()));
}

fn auc(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scores: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    let labels: Vec<bool> = scores.iter().map(|s| rng.random::<f64>() < *s).collect();
    c.bench_function("roc_auc_10000", |b| b.iter(|| roc_auc(black_box(&scores), black_box(&labels)).unwrap()));
}

fn kalman(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut level = 75.0;
    let series: Vec<Option<f64>> = (0..3600)
        .map(|_| {
            level += rng.random_range(-1.0..1.0);
            rng.random_bool(0.95).then_some(level)
        })
        .collect();
    let cfg = ImputationConfig::default();
    c.bench_function("impute_series_3600", |b| {
        b.iter_batched(|| series.clone(), |s| impute_series(&s, &cfg), BatchSize::SmallInput)
    });
}

criterion_group!(benches, training, treeshap, auc, kalman);
criterion_main!(benches);
