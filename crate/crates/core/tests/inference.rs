mod common;

use clsvm_core::clsvm::{
    fitness, incorrect_branches, infer_score_given_attributes, loss_augmented_infer, potentials, predict,
};
use clsvm_core::numerics::{dot, Matrix, QpOptions};
use clsvm_core::synth::grid_oracle_fitness;
use clsvm_core::{AttributeSchema, ClsvmModel, CooccurrenceMatrix, LinearPredictors, TradeoffParams};
use proptest::prelude::*;
use rand::Rng;

fn opts(seed: u64) -> QpOptions {
    QpOptions {
        seed,
        ..QpOptions::default()
    }
}

#[test]
fn predict_reaches_grid_optimum() {
    let mut rng = common::rng(21);
    for k in 0..12 {
        let n = 1 + k % 3;
        let model = common::random_model(&mut rng, 3, n, k % 2 == 0);
        let x = common::uniform_vec(&mut rng, 3, -1.0, 1.0);
        let pred = predict(&x, &model, &opts(k as u64)).unwrap();
        let got = fitness(&x, &pred.a_confidence, pred.y_relaxed, &model).unwrap();
        let step = if n == 3 { 0.02 } else { 1e-3 };
        let grid = grid_oracle_fitness(&x, &model, step).unwrap();
        assert!(got >= grid.value - 1e-6, "n = {n}: {got} < grid {}", grid.value);
        assert!((got - pred.fitness_relaxed).abs() < 1e-9);
    }
}

#[test]
fn score_given_attributes_is_weighted_mean() {
    let n = 2;
    let mut predictors = LinearPredictors::zeros(1, n);
    predictors.b_xy = 2.0;
    predictors.b_ay = 6.0;
    let params = TradeoffParams {
        beta1: 1.0,
        beta2: 3.0,
        lambda: vec![1.0; n],
        p: Matrix::zeros(n, n),
    };
    let model = ClsvmModel::new(
        predictors,
        params,
        CooccurrenceMatrix::zeros(n),
        AttributeSchema::anonymous(n),
        0.5,
    );
    let y = infer_score_given_attributes(&[0.0], &[1.0, 0.0], &model).unwrap();
    assert_eq!(y, 5.0);
}

#[test]
fn relabeling_attributes_permutes_solution() {
    let mut rng = common::rng(22);
    let model = common::random_model(&mut rng, 4, 3, true);
    let perm = [2usize, 0, 1];
    let mut swapped = model.clone();
    let p = &model.predictors;
    swapped.predictors.w_xa = Matrix::from_fn(4, 3, |i, j| p.w_xa[(i, perm[j])]);
    swapped.predictors.b_xa = perm.iter().map(|&j| p.b_xa[j]).collect();
    swapped.predictors.w_ay = perm.iter().map(|&j| p.w_ay[j]).collect();
    swapped.params.lambda = perm.iter().map(|&j| model.params.lambda[j]).collect();
    swapped.params.p = Matrix::from_fn(3, 3, |i, j| model.params.p[(perm[i], perm[j])]);
    let m = model.cooccurrence.matrix();
    swapped.cooccurrence = CooccurrenceMatrix::new(Matrix::from_fn(3, 3, |i, j| m[(perm[i], perm[j])])).unwrap();
    let x = common::uniform_vec(&mut rng, 4, -1.0, 1.0);
    let a = predict(&x, &model, &opts(0)).unwrap();
    let b = predict(&x, &swapped, &opts(0)).unwrap();
    assert!((a.y_relaxed - b.y_relaxed).abs() < 1e-7);
    for (j, &src) in perm.iter().enumerate() {
        assert!((b.a_confidence[j] - a.a_confidence[src]).abs() < 1e-6);
    }
}

#[test]
fn branches_exclude_margin_exactly() {
    for y in [0.0, 0.3, 0.5, 4.9, 9.5, 9.7, 10.0, 0.1 + 0.2] {
        for (lo, hi) in incorrect_branches(y, 0.5, (0.0, 10.0)).unwrap() {
            assert!(lo <= hi);
            for v in [lo, hi] {
                assert!((v - y).abs() >= 0.5, "y = {y}, bound {v}");
            }
        }
    }
    assert!(incorrect_branches(5.0, 6.0, (0.0, 10.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn loss_augmented_respects_margin(seed in 0u64..10_000, y in 0.0f64..10.0, n in 1usize..4) {
        let mut rng = common::rng(seed);
        let model = common::random_model(&mut rng, 3, n, false);
        let x = common::uniform_vec(&mut rng, 3, -1.0, 1.0);
        let aug = loss_augmented_infer(&x, y, &model, 1.0, &opts(seed)).unwrap();
        prop_assert!((aug.y_bar - y).abs() >= model.epsilon);
        prop_assert!(aug.a.iter().all(|v| (0.0..=1.0).contains(v)));
        let recomputed = fitness(&x, &aug.a, aug.y_bar, &model).unwrap() + (y - aug.y_bar).abs();
        prop_assert!((recomputed - aug.value).abs() < 1e-9);
    }

    #[test]
    fn prediction_dominates_feasible_probes(seed in 0u64..10_000, n in 1usize..5) {
        let mut rng = common::rng(seed);
        let model = common::random_model(&mut rng, 3, n, true);
        let x = common::uniform_vec(&mut rng, 3, -1.0, 1.0);
        let pred = predict(&x, &model, &opts(seed)).unwrap();
        prop_assert!(pred.a_confidence.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!((0.0..=10.0).contains(&pred.y_relaxed));
        for _ in 0..100 {
            let a = common::uniform_vec(&mut rng, n, 0.0, 1.0);
            let y = rng.random_range(0.0..10.0);
            prop_assert!(common::reference_fitness(&x, &a, y, &model) <= pred.fitness_relaxed + 1e-9);
        }
    }

    #[test]
    fn potentials_reproduce_fitness(seed in 0u64..10_000, n in 1usize..6, d in 1usize..6) {
        let mut rng = common::rng(seed);
        let model = common::random_model(&mut rng, d, n, false);
        let x = common::uniform_vec(&mut rng, d, -2.0, 2.0);
        let a = common::uniform_vec(&mut rng, n, 0.0, 1.0);
        let y = rng.random_range(0.0..10.0);
        let phi = potentials(&x, &a, y, &model.predictors, &model.cooccurrence).unwrap();
        let lhs = dot(&model.params.to_z(), &phi.flatten());
        prop_assert!((lhs - common::reference_fitness(&x, &a, y, &model)).abs() < 1e-10);
    }
}
