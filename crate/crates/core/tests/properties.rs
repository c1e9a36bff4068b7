//! Randomized checks of the bridge between CART and boosted stumps.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{random_binary, random_probes, random_regression};
use tsb::experiments::format_selector;
use tsb::{
    closed_form_weight, export_leaf_weights, fit_cart, fit_gbs, predict_cart, predict_gbs, train, train_traced,
    Dataset, GbsConfig, Lambda, LeafSelector, LossKind, TsbConfig, WeightVector,
};

fn dataset(seed: u64, n: usize, d: usize, binary: bool) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if binary {
        random_binary(&mut rng, n, d)
    } else {
        random_regression(&mut rng, n, d)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lambda_zero_matches_cart(seed in any::<u64>(), n in 10usize..60, d in 1usize..5, depth in 1usize..5) {
        let data = dataset(seed, n, d, false);
        let model = train(&data, &TsbConfig::new(depth, Lambda::zero(), LossKind::SquaredError)).unwrap();
        let cart = fit_cart(&data, depth).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for x in data.rows().map(<[f64]>::to_vec).chain(random_probes(&mut rng, 50, d)) {
            prop_assert!((model.predict(&x).unwrap() - predict_cart(&cart, &x).unwrap()).abs() <= 1e-9);
        }
    }

    #[test]
    fn infinite_lambda_matches_boosted_stumps(
        seed in any::<u64>(),
        n in 10usize..60,
        depth in 1usize..5,
        binary in any::<bool>(),
        shrinkage in 0.05f64..1.0,
    ) {
        let data = dataset(seed, n, 2, binary);
        let loss = if binary { LossKind::BinomialDeviance } else { LossKind::SquaredError };
        let model = train(&data, &TsbConfig::new(depth, Lambda::Infinite, loss).with_shrinkage(shrinkage)).unwrap();
        let gbs = fit_gbs(&data, &GbsConfig { rounds: depth, loss, shrinkage }).unwrap();
        prop_assert_eq!(model.root.n_internal(), (1 << depth) - 1);
        for x in data.rows() {
            prop_assert!((model.predict(x).unwrap() - predict_gbs(&gbs, x).unwrap()).abs() <= 1e-9);
        }
    }

    #[test]
    fn weighted_loss_never_increases_down_a_path(seed in any::<u64>(), lambda in 0.01f64..50.0) {
        let data = dataset(seed, 40, 2, false);
        let cfg = TsbConfig::new(4, Lambda::Finite(lambda), LossKind::SquaredError);
        let mut ok = true;
        train_traced(&data, &cfg, |visit| {
            if let Some((stump, left, right)) = visit.split {
                let ctx = visit.context;
                let before: f64 = (0..data.n_samples())
                    .map(|i| ctx.weights[i] * (data.labels()[i] - ctx.f_values[i]).powi(2))
                    .sum();
                let after: f64 = (0..data.n_samples())
                    .map(|i| {
                        let step = if stump.goes_left(data.row(i)) { left } else { right };
                        ctx.weights[i] * (data.labels()[i] - ctx.f_values[i] - step).powi(2)
                    })
                    .sum();
                ok &= after <= before + 1e-12;
            }
        }).unwrap();
        prop_assert!(ok);
    }

    #[test]
    fn exported_leaf_weights_follow_the_closed_form(seed in any::<u64>(), lambda in 0.05f64..20.0) {
        let data = dataset(seed, 50, 2, true);
        let cfg = TsbConfig::new(3, Lambda::Finite(lambda), LossKind::BinomialDeviance).with_shrinkage(0.3);
        let model = train(&data, &cfg).unwrap();
        let probe = data.row(0).to_vec();
        let path: Vec<tsb::PathStep> = model
            .route(&probe)
            .unwrap()
            .into_iter()
            .map(|(node, branch)| match node {
                tsb::TsbNode::Internal { stump, .. } => tsb::PathStep { stump: *stump, branch },
                tsb::TsbNode::Leaf => unreachable!(),
            })
            .collect();
        let selector = LeafSelector::from_path(&path);
        let leaf = export_leaf_weights(&data, &cfg, &selector).unwrap();
        let masks: Vec<Vec<bool>> = path
            .iter()
            .map(|s| data.rows().map(|x| s.stump.goes_left(x) == (s.branch == tsb::Branch::Left)).collect())
            .collect();
        let closed = closed_form_weight(&WeightVector::uniform(50), &masks, Lambda::Finite(lambda)).unwrap();
        for (a, b) in leaf.weights.as_slice().iter().zip(closed.as_slice()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        let reparsed: LeafSelector = format_selector(&path).parse().unwrap();
        prop_assert!(reparsed.matches(&path));
    }
}

#[test]
fn weights_flatten_as_lambda_grows() {
    let data = dataset(4, 60, 2, true);
    let mut previous = f64::INFINITY;
    for lambda in [0.1, 1.0, 10.0, 100.0] {
        let cfg = TsbConfig::new(3, Lambda::Finite(lambda), LossKind::BinomialDeviance).with_shrinkage(0.3);
        let mut spread = 0.0f64;
        train_traced(&data, &cfg, |visit| {
            if visit.split.is_none() {
                let w = visit.context.weights.as_slice();
                let hi = w.iter().copied().fold(0.0, f64::max);
                let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
                spread = spread.max(hi / lo);
            }
        })
        .unwrap();
        assert!(spread < previous, "lambda {lambda}: {spread} >= {previous}");
        previous = spread;
    }
}
