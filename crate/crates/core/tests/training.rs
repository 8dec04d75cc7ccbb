mod common;

use common::{random_dataset, random_propensity};
use proptest::prelude::*;
use tritrain::mf::{
    gradient, ips_samples, naive_samples, objective_value, train, Objective, Sample,
};
use tritrain::propensity::UniformScore;
use tritrain::{FactorModel, TrainConfig};

fn small_model(seed: u64) -> FactorModel<f64> {
    let cfg = TrainConfig {
        dim: 2,
        seed,
        ..TrainConfig::default()
    };
    let mut model = FactorModel::init(3, 3, &cfg).unwrap();
    model.set_global_bias(2.5);
    model
}

/// Largest relative deviation between analytic and central-difference gradients.
fn max_relative_error(model: &FactorModel<f64>, samples: &[Sample<f64>], l2: f64) -> f64 {
    let analytic = gradient(model, samples, l2);
    let base = model.params();
    let h = 1e-4;
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        let mut p = base.clone();
        p[k] = base[k] + h;
        probe.set_params(&p).unwrap();
        let up = objective_value(&probe, samples, l2);
        p[k] = base[k] - h;
        probe.set_params(&p).unwrap();
        let down = objective_value(&probe, samples, l2);
        let fd = (up - down) / (2.0 * h);
        let scale = analytic[k].abs().max(fd.abs());
        if scale > 1e-7 {
            worst = worst.max((analytic[k] - fd).abs() / scale);
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn naive_gradient_matches_finite_differences(seed in any::<u64>()) {
        let ds = random_dataset(3, 3, 4, seed);
        let model = small_model(seed);
        let samples = naive_samples::<f64>(&ds);
        prop_assert!(max_relative_error(&model, &samples, 0.05) < 1e-4);
    }

    #[test]
    fn ips_gradient_matches_finite_differences(seed in any::<u64>()) {
        let ds = random_dataset(3, 3, 4, seed);
        let model = small_model(seed);
        let prop = random_propensity(3, 3, 0.1, seed ^ 7);
        let samples = ips_samples(&ds, &prop).unwrap();
        prop_assert!(max_relative_error(&model, &samples, 0.05) < 1e-4);
    }

    #[test]
    fn seeded_training_is_deterministic(seed in any::<u64>()) {
        let ds = random_dataset(6, 5, 10, seed);
        let cfg = TrainConfig { dim: 3, epochs: 5, batch_size: 4, seed, ..TrainConfig::default() };
        let run = || {
            let mut m = FactorModel::<f64>::init(6, 5, &cfg).unwrap();
            train(&mut m, &ds, Objective::Naive, &cfg, None).unwrap();
            m
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn uniform_ips_training_equals_naive(seed in any::<u64>()) {
        let ds = random_dataset(5, 5, 8, seed);
        let cfg = TrainConfig { dim: 2, epochs: 5, batch_size: 3, seed, ..TrainConfig::default() };
        let rate = ds.len() as f64 / ds.grid_size() as f64;
        let uniform = UniformScore(rate);
        let mut a = FactorModel::<f64>::init(5, 5, &cfg).unwrap();
        let mut b = a.clone();
        train(&mut a, &ds, Objective::Naive, &cfg, None).unwrap();
        train(&mut b, &ds, Objective::Ips(&uniform), &cfg, None).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn full_batch_objective_is_non_increasing() {
    let ds = random_dataset(5, 5, 10, 11);
    let cfg = TrainConfig {
        dim: 2,
        learning_rate: 1e-3,
        batch_size: ds.len(),
        epochs: 50,
        l2: 1e-3,
        patience: None,
        seed: 3,
        ..TrainConfig::default()
    };
    let mut model = FactorModel::<f64>::init(5, 5, &cfg).unwrap();
    let out = train(&mut model, &ds, Objective::Naive, &cfg, None).unwrap();
    assert_eq!(out.trace.len(), 50);
    for w in out.trace.windows(2) {
        assert!(
            w[1] <= w[0] + 1e-8,
            "objective rose from {} to {}",
            w[0],
            w[1]
        );
    }
}

#[test]
fn l2_pulls_parameters_toward_zero() {
    let ds = random_dataset(5, 5, 10, 4);
    let fit = |l2: f64| {
        let cfg = TrainConfig {
            dim: 3,
            l2,
            epochs: 60,
            batch_size: 8,
            patience: None,
            seed: 9,
            ..TrainConfig::default()
        };
        let mut m = FactorModel::<f64>::init(5, 5, &cfg).unwrap();
        train(&mut m, &ds, Objective::Naive, &cfg, None).unwrap();
        m.l2_norm_sq()
    };
    assert!(fit(1.0) < fit(0.0));
}

#[test]
fn objective_is_weighted_mean_of_squared_errors() {
    let ds = random_dataset(3, 3, 0, 1);
    let model = FactorModel::<f64>::zeros(3, 3, 2);
    let samples = naive_samples::<f64>(&ds);
    let expected: f64 = ds
        .records()
        .iter()
        .map(|r| (r.rating as f64).powi(2))
        .sum::<f64>()
        / ds.len() as f64;
    assert!((objective_value(&model, &samples, 0.3) - expected).abs() < 1e-12);
}

#[test]
fn f32_training_runs() {
    let ds = random_dataset(4, 4, 6, 2);
    let cfg = TrainConfig {
        dim: 2,
        epochs: 10,
        ..TrainConfig::default()
    };
    let mut m = tritrain::FactorModel32::init(4, 4, &cfg).unwrap();
    train(&mut m, &ds, Objective::Naive, &cfg, None).unwrap();
    assert!(m.is_finite());
}
