//! Weighted least-squares stump search.
//!
//! Candidate thresholds are midpoints between consecutive distinct values of
//! a feature among instances with strictly positive weight. Splits whose
//! weighted SSE differs by at most [`TIE_TOLERANCE`] (scaled by the node's
//! weighted sum of squares when that exceeds one) are tied; ties go to the
//! smaller feature index, then the smaller threshold.

use crate::error::{Result, TsbError};
use crate::model::{Dataset, Stump, WeightVector};

pub const TIE_TOLERANCE: f64 = 1e-12;

/// Threshold between two consecutive distinct sorted values `a < b`.
///
/// Always satisfies `a <= t < b`, so `a` goes left and `b` goes right.
#[inline]
pub fn midpoint(a: f64, b: f64) -> f64 {
    let mid = 0.5 * a + 0.5 * b;
    if mid >= b {
        a
    } else {
        mid
    }
}

/// Tie tolerance for a node whose weighted sum of squared targets is `scale`.
#[inline]
pub fn tie_tolerance(scale: f64) -> f64 {
    TIE_TOLERANCE * scale.max(1.0)
}

/// Instance indices sorted by value, one list per feature.
#[derive(Debug, Clone)]
pub struct SortedFeatures {
    order: Vec<Vec<usize>>,
}

impl SortedFeatures {
    pub fn new(data: &Dataset) -> Self {
        let order = (0..data.n_features())
            .map(|j| {
                let mut idx: Vec<usize> = (0..data.n_samples()).collect();
                idx.sort_by(|&a, &b| data.value(a, j).total_cmp(&data.value(b, j)).then(a.cmp(&b)));
                idx
            })
            .collect();
        SortedFeatures { order }
    }

    pub fn feature(&self, j: usize) -> &[usize] {
        &self.order[j]
    }
}

/// Weighted SSE of `stump` against `targets`.
pub fn weighted_sse(stump: &Stump, data: &Dataset, targets: &[f64], w: &WeightVector) -> f64 {
    (0..data.n_samples())
        .map(|i| {
            let e = targets[i] - stump.predict(data.row(i));
            w[i] * e * e
        })
        .sum()
}

/// Fits the stump minimizing `sum_i w_i (r_i - h(x_i))^2`.
pub fn fit_stump(data: &Dataset, residuals: &[f64], w: &WeightVector) -> Result<Stump> {
    fit_stump_sorted(data, &SortedFeatures::new(data), residuals, w)
}

struct Scan {
    gain: f64,
    threshold: f64,
    left_weight: f64,
    left_sum: f64,
}

/// Walks one feature in sorted order and reports every candidate split as
/// `(threshold, gain, left weight, left weighted sum)`. Gain is
/// `S_L^2 / W_L + S_R^2 / W_R`; SSE is the node's sum of squares minus gain.
fn scan_feature<F: FnMut(Scan)>(
    data: &Dataset,
    order: &[usize],
    feature: usize,
    residuals: &[f64],
    w: &[f64],
    total_weight: f64,
    total_sum: f64,
    mut visit: F,
) {
    let mut left_weight = 0.0;
    let mut left_sum = 0.0;
    let mut prev: Option<f64> = None;
    for &i in order {
        let wi = w[i];
        if wi <= 0.0 {
            continue;
        }
        let v = data.value(i, feature);
        if let Some(p) = prev {
            if v > p {
                let right_weight = total_weight - left_weight;
                let right_sum = total_sum - left_sum;
                if left_weight > 0.0 && right_weight > 0.0 {
                    visit(Scan {
                        gain: left_sum * left_sum / left_weight + right_sum * right_sum / right_weight,
                        threshold: midpoint(p, v),
                        left_weight,
                        left_sum,
                    });
                }
            }
        }
        left_weight += wi;
        left_sum += wi * residuals[i];
        prev = Some(v);
    }
}

/// [`fit_stump`] with the per-feature orderings precomputed.
pub fn fit_stump_sorted(
    data: &Dataset,
    sorted: &SortedFeatures,
    residuals: &[f64],
    w: &WeightVector,
) -> Result<Stump> {
    let n = data.n_samples();
    if residuals.len() != n || w.len() != n {
        return Err(TsbError::DimensionMismatch {
            expected: n,
            got: residuals.len().min(w.len()),
        });
    }
    let w = w.as_slice();
    let mut total_weight = 0.0;
    let mut total_sum = 0.0;
    let mut total_sq = 0.0;
    for i in 0..n {
        if w[i] > 0.0 {
            let r = residuals[i];
            if !r.is_finite() {
                return Err(TsbError::Numerical(format!("non-finite residual at row {i}")));
            }
            total_weight += w[i];
            total_sum += w[i] * r;
            total_sq += w[i] * r * r;
        }
    }
    if !(total_weight > 0.0) {
        return Err(TsbError::Numerical(
            "cannot fit a stump: no instance has positive weight".into(),
        ));
    }

    let mut best_per_feature = vec![f64::NEG_INFINITY; data.n_features()];
    for (j, best) in best_per_feature.iter_mut().enumerate() {
        scan_feature(
            data,
            sorted.feature(j),
            j,
            residuals,
            w,
            total_weight,
            total_sum,
            |s| {
                if s.gain > *best {
                    *best = s.gain;
                }
            },
        );
    }
    let best_gain = best_per_feature.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if best_gain == f64::NEG_INFINITY {
        let mean = total_sum / total_weight;
        return Ok(Stump {
            feature: 0,
            threshold: f64::NEG_INFINITY,
            left_value: mean,
            right_value: mean,
        });
    }

    let cutoff = best_gain - tie_tolerance(total_sq);
    let feature = best_per_feature
        .iter()
        .position(|&g| g >= cutoff)
        .expect("best feature exists");
    let mut chosen: Option<Scan> = None;
    scan_feature(
        data,
        sorted.feature(feature),
        feature,
        residuals,
        w,
        total_weight,
        total_sum,
        |s| {
            if chosen.is_none() && s.gain >= cutoff {
                chosen = Some(s);
            }
        },
    );
    let s = chosen.expect("rescan reproduces the best split");
    Ok(Stump {
        feature,
        threshold: s.threshold,
        left_value: s.left_sum / s.left_weight,
        right_value: (total_sum - s.left_sum) / (total_weight - s.left_weight),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LabelKind;
    use proptest::prelude::*;

    fn column(xs: &[f64]) -> Dataset {
        Dataset::new(
            xs.iter().map(|&x| vec![x]).collect(),
            vec![0.0; xs.len()],
            None,
            LabelKind::Continuous,
        )
        .unwrap()
    }

    /// Exhaustive oracle over every (feature, midpoint) pair using direct SSE.
    fn brute_force_sse(data: &Dataset, r: &[f64], w: &WeightVector) -> f64 {
        let mut best = f64::INFINITY;
        for j in 0..data.n_features() {
            let mut vals: Vec<f64> = (0..data.n_samples())
                .filter(|&i| w[i] > 0.0)
                .map(|i| data.value(i, j))
                .collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for pair in vals.windows(2) {
                let t = (pair[0] + pair[1]) / 2.0;
                let side_mean = |left: bool| {
                    let (mut sw, mut s) = (0.0, 0.0);
                    for i in 0..data.n_samples() {
                        if (data.value(i, j) <= t) == left {
                            sw += w[i];
                            s += w[i] * r[i];
                        }
                    }
                    s / sw
                };
                let stump = Stump {
                    feature: j,
                    threshold: t,
                    left_value: side_mean(true),
                    right_value: side_mean(false),
                };
                best = best.min(weighted_sse(&stump, data, r, w));
            }
        }
        best
    }

    #[test]
    fn separable_residuals() {
        let data = column(&[1.0, 2.0, 3.0, 4.0]);
        let r = [1.0, 1.0, -1.0, -1.0];
        let w = WeightVector::uniform(4);
        let s = fit_stump(&data, &r, &w).unwrap();
        assert_eq!(
            s,
            Stump {
                feature: 0,
                threshold: 2.5,
                left_value: 1.0,
                right_value: -1.0
            }
        );
        assert_eq!(weighted_sse(&s, &data, &r, &w), 0.0);
    }

    #[test]
    fn constant_residuals_pick_first_candidate() {
        let data = Dataset::new(
            vec![vec![3.0, 1.0], vec![1.0, 2.0], vec![2.0, 0.0]],
            vec![0.0; 3],
            None,
            LabelKind::Continuous,
        )
        .unwrap();
        let s = fit_stump(&data, &[0.7; 3], &WeightVector::uniform(3)).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 1.5);
        assert_eq!(s.left_value, 0.7);
        assert_eq!(s.right_value, 0.7);
    }

    #[test]
    fn zero_weight_instances_do_not_create_thresholds() {
        let data = column(&[1.0, 2.0, 3.0, 4.0]);
        let w = WeightVector::from_unnormalized(vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let s = fit_stump(&data, &[1.0, 5.0, 5.0, -1.0], &w).unwrap();
        assert_eq!(s.threshold, 2.5);
        assert_eq!((s.left_value, s.right_value), (1.0, -1.0));
    }

    #[test]
    fn identical_points_give_degenerate_stump() {
        let data = column(&[2.0, 2.0, 2.0]);
        let s = fit_stump(&data, &[1.0, 2.0, 3.0], &WeightVector::uniform(3)).unwrap();
        assert!(s.is_degenerate());
        assert_eq!(s.left_value, 2.0);
        assert_eq!(s.right_value, 2.0);
        assert!(!s.goes_left(&[2.0]));
    }

    #[test]
    fn no_positive_weight_is_an_error() {
        let data = column(&[1.0, 2.0]);
        let w = WeightVector::from_raw(vec![0.0, 0.0]);
        assert!(matches!(fit_stump(&data, &[0.0, 0.0], &w), Err(TsbError::Numerical(_))));
    }

    #[test]
    fn midpoint_of_adjacent_floats_stays_below_upper() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let t = midpoint(a, b);
        assert!(a <= t && t < b);
    }

    fn instance_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
        (2usize..=12, 1usize..=4).prop_flat_map(|(n, d)| {
            (
                prop::collection::vec(prop::collection::vec((-20i32..20).prop_map(|v| v as f64 * 0.25), d), n),
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..1.0], n),
            )
        })
    }

    proptest! {
        #[test]
        fn matches_exhaustive_enumeration((rows, r, raw_w) in instance_strategy()) {
            prop_assume!(raw_w.iter().any(|&v| v > 0.0));
            let n = rows.len();
            let data = Dataset::new(rows, vec![0.0; n], None, LabelKind::Continuous).unwrap();
            let w = WeightVector::from_unnormalized(raw_w).unwrap();
            let s = fit_stump(&data, &r, &w).unwrap();
            let oracle = brute_force_sse(&data, &r, &w);
            let got = weighted_sse(&s, &data, &r, &w);
            if oracle.is_finite() {
                prop_assert!((got - oracle).abs() < 1e-10, "got {got}, oracle {oracle}");
            } else {
                prop_assert!(s.is_degenerate());
            }
        }
    }
}
