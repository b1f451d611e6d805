mod common;

use clsvm_core::numerics::dot;
use clsvm_core::svr::{primal_objective, train_attribute_regressors, train_svr, SvrConfig};
use clsvm_core::Sample;
use proptest::prelude::*;
use rand::Rng;

fn noisy_instance(seed: u64, m: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = common::rng(seed);
    let xs: Vec<Vec<f64>> = (0..m).map(|_| common::uniform_vec(&mut rng, d, -2.0, 2.0)).collect();
    let w = common::uniform_vec(&mut rng, d, -1.5, 1.5);
    let ys = xs
        .iter()
        .map(|x| dot(&w, x) + 0.4 + rng.random_range(-0.8..0.8))
        .collect();
    (xs, ys)
}

#[test]
fn primal_matches_dual_oracle() {
    for (seed, c) in [(1, 1.0), (2, 0.1), (3, 10.0), (4, 1.0)] {
        let config = SvrConfig {
            c,
            ..SvrConfig::default()
        };
        let (xs, ys) = noisy_instance(seed, 25, 3);
        let fit = train_svr(&xs, &ys, &config).unwrap();
        let got = primal_objective(&fit.w, fit.b, &xs, &ys, &config);
        let oracle = common::dual_svr_primal_optimum(&xs, &ys, c, config.epsilon_tube);
        assert!((got - oracle).abs() <= 1e-3 * oracle, "C = {c}: {got} vs {oracle}");
    }
}

#[test]
fn realizable_data_lands_in_tube() {
    let mut rng = common::rng(9);
    let xs: Vec<Vec<f64>> = (0..200).map(|_| common::uniform_vec(&mut rng, 4, -1.0, 1.0)).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x[0] - x[3] + 1.0).collect();
    let config = SvrConfig {
        c: 10.0,
        ..SvrConfig::default()
    };
    let fit = train_svr(&xs, &ys, &config).unwrap();
    let inside = xs
        .iter()
        .zip(&ys)
        .filter(|(x, y)| (fit.predict(x) - *y).abs() <= config.epsilon_tube + 1e-9)
        .count();
    assert!(inside * 100 >= 99 * xs.len());
}

#[test]
fn constant_targets_give_flat_fit() {
    let mut rng = common::rng(10);
    let xs: Vec<Vec<f64>> = (0..30).map(|_| common::uniform_vec(&mut rng, 3, -1.0, 1.0)).collect();
    let ys = vec![4.2; 30];
    let fit = train_svr(&xs, &ys, &SvrConfig::default()).unwrap();
    assert!(fit.w.iter().all(|w| w.abs() < 1e-6), "{:?}", fit.w);
    for x in &xs {
        assert!((fit.predict(x) - 4.2).abs() <= 0.1 + 1e-6);
    }
}

#[test]
fn single_feature_matches_one_dimensional_oracle() {
    let (xs, ys) = noisy_instance(11, 30, 1);
    let config = SvrConfig::default();
    let fit = train_svr(&xs, &ys, &config).unwrap();
    let got = primal_objective(&fit.w, fit.b, &xs, &ys, &config);
    // brute force over the slope, exact bias scan per slope
    let mut best = f64::INFINITY;
    for k in -40_000..=40_000 {
        let w = k as f64 * 1e-4;
        let resid: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - w * x[0]).collect();
        for b in resid.iter().flat_map(|r| [r - 0.1, r + 0.1]) {
            best = best.min(primal_objective(&[w], b, &xs, &ys, &config));
        }
    }
    assert!(got <= best + 1e-6, "{got} vs grid {best}");
}

#[test]
fn duplicated_column_splits_weight() {
    let (xs, ys) = noisy_instance(12, 30, 2);
    let config = SvrConfig::default();
    let base = train_svr(&xs, &ys, &config).unwrap();
    let dup: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0], x[0], x[1]]).collect();
    let fit = train_svr(&dup, &ys, &config).unwrap();
    // the norm penalty splits a duplicated feature evenly
    assert!((fit.w[0] - fit.w[1]).abs() < 1e-4);
    let a = primal_objective(&base.w, base.b, &xs, &ys, &config);
    let b = primal_objective(&fit.w, fit.b, &dup, &ys, &config);
    assert!(b <= a + 1e-6);
}

#[test]
fn noiseless_attributes_recovered() {
    let mut rng = common::rng(13);
    let (d, n) = (6, 3);
    let truth = common::uniform_vec(&mut rng, d * n, -1.0, 1.0);
    let samples: Vec<Sample> = (0..300)
        .map(|i| {
            let x = common::uniform_vec(&mut rng, d, -1.0, 1.0);
            let a = (0..n)
                .map(|j| {
                    if dot(&truth[j * d..(j + 1) * d], &x) >= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            Sample::new(format!("{i}"), x, Some(a), Some(5.0))
        })
        .collect();
    let (w, b) = train_attribute_regressors(&samples, &SvrConfig::attribute_default()).unwrap();
    let mut err = 0.0;
    let mut count = 0.0;
    for s in &samples {
        let a = s.a.as_ref().unwrap();
        for j in 0..n {
            let pred = dot(&w.col(j), &s.x) + b[j];
            err += (if pred >= 0.5 { 1.0 } else { 0.0 } - a[j]).abs();
            count += 1.0;
        }
    }
    assert!(err / count <= 0.05, "binary attribute error {}", err / count);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sample_order_does_not_change_objective(seed in 0u64..1000, rot in 1usize..20) {
        let (xs, ys) = noisy_instance(seed, 20, 2);
        let config = SvrConfig::default();
        let fit = train_svr(&xs, &ys, &config).unwrap();
        let mut px = xs.clone();
        let mut py = ys.clone();
        px.rotate_left(rot);
        py.rotate_left(rot);
        let refit = train_svr(&px, &py, &config).unwrap();
        let a = primal_objective(&fit.w, fit.b, &xs, &ys, &config);
        let b = primal_objective(&refit.w, refit.b, &xs, &ys, &config);
        prop_assert!((a - b).abs() <= 1e-6 * a.max(1.0));
    }

    #[test]
    fn scaling_targets_scales_solution(seed in 0u64..1000, s in 0.5f64..3.0) {
        // with the tube and C scaled by s, (w, b) scales by s and the objective by s²
        let (xs, ys) = noisy_instance(seed, 20, 2);
        let config = SvrConfig::default();
        let fit = train_svr(&xs, &ys, &config).unwrap();
        let scaled: Vec<f64> = ys.iter().map(|y| s * y).collect();
        let sc = SvrConfig { c: s * config.c, epsilon_tube: s * config.epsilon_tube, ..config };
        let refit = train_svr(&xs, &scaled, &sc).unwrap();
        let a = primal_objective(&fit.w, fit.b, &xs, &ys, &config);
        let b = primal_objective(&refit.w, refit.b, &xs, &scaled, &sc);
        prop_assert!((b - s * s * a).abs() <= 1e-6 * b.max(1.0), "{} vs {}", b, s * s * a);
    }
}
