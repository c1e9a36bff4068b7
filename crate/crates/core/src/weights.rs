//! Instance re-weighting between parent and child nodes.
//!
//! A child multiplies the weight of every instance inside its partition by
//! `lambda + 1` and every instance outside by `lambda`, then renormalizes.
//! Repeating this down a path has the closed form implemented by
//! [`closed_form_weight`], which the tests use as an oracle.

use crate::error::{Result, TsbError};
use crate::model::{Lambda, WeightVector};

/// Renormalized child weights `w_i * (lambda + [i in side])`.
pub fn child_weights(w: &WeightVector, in_side: &[bool], lambda: Lambda) -> Result<WeightVector> {
    debug_assert_eq!(w.len(), in_side.len());
    let Some(lambda) = lambda.effective() else {
        return Ok(w.clone());
    };
    let scaled: Vec<f64> = w
        .as_slice()
        .iter()
        .zip(in_side)
        .map(|(&wi, &inside)| wi * (lambda + if inside { 1.0 } else { 0.0 }))
        .collect();
    let total: f64 = scaled.iter().sum();
    if !(total > 0.0) {
        return Err(TsbError::Numerical(
            "child partition carries no weight; it must not be grown".into(),
        ));
    }
    Ok(WeightVector::from_raw(scaled.into_iter().map(|v| v / total).collect()))
}

/// Left and right child weights for the partition `left_mask`.
///
/// With an infinite ratio both children receive `w` unchanged.
pub fn update_weights(
    w: &WeightVector,
    left_mask: &[bool],
    lambda: Lambda,
) -> Result<(WeightVector, WeightVector)> {
    let right_mask: Vec<bool> = left_mask.iter().map(|&b| !b).collect();
    Ok((
        child_weights(w, left_mask, lambda)?,
        child_weights(w, &right_mask, lambda)?,
    ))
}

/// Weights at the end of a path, computed directly rather than by
/// iterating [`child_weights`].
///
/// Each mask marks membership in the partition taken at that level. The
/// result is proportional to `w0_i * (lambda + 1)^a_i * lambda^b_i`, where
/// `a_i` and `b_i` count the levels at which instance `i` was inside and
/// outside the taken partition. `0^0` is one. Powers are evaluated as
/// `(1 + 1/lambda)^a` relative to a common `lambda^depth` factor so large
/// depths do not overflow.
pub fn closed_form_weight(
    w0: &WeightVector,
    path_masks: &[Vec<bool>],
    lambda: Lambda,
) -> Result<WeightVector> {
    let n = w0.len();
    if let Some(mask) = path_masks.iter().find(|m| m.len() != n) {
        return Err(TsbError::DimensionMismatch {
            expected: n,
            got: mask.len(),
        });
    }
    let lambda = match lambda.effective() {
        Some(v) => v,
        None => return Ok(w0.clone()),
    };
    let inside_counts: Vec<i32> = (0..n)
        .map(|i| path_masks.iter().filter(|m| m[i]).count() as i32)
        .collect();
    let depth = path_masks.len() as i32;
    let raw: Vec<f64> = if lambda == 0.0 {
        (0..n)
            .map(|i| if inside_counts[i] == depth { w0[i] } else { 0.0 })
            .collect()
    } else {
        // (lambda+1)^a * lambda^(depth-a) = lambda^depth * (1 + 1/lambda)^a; the
        // common factor cancels in the normalization. Rescale by the largest
        // exponent to keep values in range.
        let log_ratio = (1.0 / lambda).ln_1p();
        let max_a = inside_counts.iter().copied().max().unwrap_or(0);
        (0..n)
            .map(|i| w0[i] * ((inside_counts[i] - max_a) as f64 * log_ratio).exp())
            .collect()
    };
    WeightVector::from_unnormalized(raw)
}
