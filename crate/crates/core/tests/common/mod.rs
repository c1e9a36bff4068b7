//! Random problem generators shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use tsb::{Dataset, LabelKind};

/// Features on a coarse grid so that ties between instances are common.
pub fn random_features<R: Rng>(rng: &mut R, n: usize, d: usize) -> Vec<Vec<f64>> {
    let coarse = rng.random_bool(0.5);
    (0..n)
        .map(|_| {
            (0..d)
                .map(|_| {
                    let v: f64 = rng.random_range(-5.0..5.0);
                    if coarse {
                        (v * 2.0).round() / 2.0
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect()
}

pub fn random_regression<R: Rng>(rng: &mut R, n: usize, d: usize) -> Dataset {
    let rows = random_features(rng, n, d);
    let labels = rows
        .iter()
        .map(|x| {
            let signal = if x[0] > 0.0 { 2.0 } else { -1.0 } + x.iter().sum::<f64>() * 0.3;
            signal + rng.random_range(-1.0..1.0)
        })
        .collect();
    Dataset::new(rows, labels, None, LabelKind::Continuous).unwrap()
}

/// Binary labels with both classes present.
pub fn random_binary<R: Rng>(rng: &mut R, n: usize, d: usize) -> Dataset {
    assert!(n >= 2);
    let rows = random_features(rng, n, d);
    let mut labels: Vec<f64> = rows
        .iter()
        .map(|x| {
            let p = if x[0] + rng.random_range(-2.0..2.0) > 0.0 { 0.85 } else { 0.2 };
            if rng.random_bool(p) {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    labels[0] = 1.0;
    labels[1] = -1.0;
    Dataset::new(rows, labels, None, LabelKind::Binary).unwrap()
}

/// Probe points drawn from a box slightly wider than the training data.
pub fn random_probes<R: Rng>(rng: &mut R, count: usize, d: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..d).map(|_| rng.random_range(-6.0..6.0)).collect())
        .collect()
}

pub fn random_mask<R: Rng>(rng: &mut R, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.random_bool(0.5)).collect()
}

pub fn random_positive_weights<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.05..1.0)).collect()
}
