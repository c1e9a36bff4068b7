//! Losses, pseudo-residuals, initial values and per-side step sizes.
//!
//! Squared error is `(y - F)^2 / 2`, so its negative gradient is the plain
//! residual. Binomial deviance uses labels in {-1, +1} and the margin convention
//! `l(y, F) = log(1 + exp(-2yF))`, so `P(y = 1 | x) = 1 / (1 + exp(-2F))`.

use log::warn;

use crate::error::{Result, TsbError};
use crate::model::{LossKind, WeightVector};

/// Arguments to `exp` are clamped to this magnitude.
pub const EXP_CLAMP: f64 = 500.0;

/// Base-value log-odds clamp for single-class label vectors.
const MEAN_CLAMP: f64 = 1.0 - 1e-12;

/// Newton denominators below this are treated as a zero step.
const NEWTON_FLOOR: f64 = 1e-150;

#[inline]
fn clamped_exp(z: f64) -> f64 {
    z.clamp(-EXP_CLAMP, EXP_CLAMP).exp()
}

/// `log(1 + exp(z))` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn check_finite(y: f64, f: f64) -> Result<()> {
    if !y.is_finite() || !f.is_finite() {
        return Err(TsbError::Numerical(format!(
            "non-finite loss input (y = {y}, F = {f})"
        )));
    }
    Ok(())
}

pub fn loss_value(loss: LossKind, y: f64, f: f64) -> f64 {
    match loss {
        LossKind::SquaredError => 0.5 * (y - f) * (y - f),
        LossKind::BinomialDeviance => softplus((-2.0 * y * f).clamp(-EXP_CLAMP, EXP_CLAMP)),
    }
}

/// `-dl/dF` at `(y, f)`.
pub fn negative_gradient(loss: LossKind, y: f64, f: f64) -> Result<f64> {
    check_finite(y, f)?;
    Ok(match loss {
        LossKind::SquaredError => y - f,
        LossKind::BinomialDeviance => {
            if y != 1.0 && y != -1.0 {
                return Err(TsbError::InvalidDataset(format!(
                    "deviance label must be -1 or +1, got {y}"
                )));
            }
            2.0 * y / (1.0 + clamped_exp(2.0 * y * f))
        }
    })
}

pub fn negative_gradients(loss: LossKind, labels: &[f64], f_values: &[f64]) -> Result<Vec<f64>> {
    labels
        .iter()
        .zip(f_values)
        .map(|(&y, &f)| negative_gradient(loss, y, f))
        .collect()
}

pub fn margin_to_probability(margin: f64) -> f64 {
    1.0 / (1.0 + clamped_exp(-2.0 * margin))
}

fn weighted_mean(values: &[f64], w: &WeightVector) -> f64 {
    let (num, den) = values
        .iter()
        .zip(w.as_slice())
        .fold((0.0, 0.0), |(n, d), (&v, &wi)| (n + wi * v, d + wi));
    num / den
}

/// The constant minimizing the weighted loss: the mean for squared error,
/// half the log-odds for deviance.
pub fn base_value(loss: LossKind, labels: &[f64], w: &WeightVector) -> f64 {
    let mean = weighted_mean(labels, w);
    match loss {
        LossKind::SquaredError => mean,
        LossKind::BinomialDeviance => {
            let clamped = mean.clamp(-MEAN_CLAMP, MEAN_CLAMP);
            if clamped != mean {
                warn!("all labels belong to one class; clamping initial log-odds");
            }
            0.5 * ((1.0 + clamped) / (1.0 - clamped)).ln()
        }
    }
}

/// Step size for the instances selected by `member_mask`.
///
/// Squared error returns the weighted mean residual of the side, which is
/// the exact minimizer. Deviance returns one Newton step.
pub fn side_increment(
    loss: LossKind,
    residuals: &[f64],
    raw_labels: &[f64],
    f_values: &[f64],
    w: &WeightVector,
    member_mask: &[bool],
) -> Result<f64> {
    debug_assert_eq!(residuals.len(), raw_labels.len());
    debug_assert_eq!(residuals.len(), f_values.len());
    let mut weight = 0.0;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..residuals.len() {
        if !member_mask[i] || w[i] == 0.0 {
            continue;
        }
        let r = residuals[i];
        weight += w[i];
        num += w[i] * r;
        den += match loss {
            LossKind::SquaredError => w[i],
            LossKind::BinomialDeviance => w[i] * r.abs() * (2.0 - r.abs()),
        };
    }
    if !(weight > 0.0) {
        return Err(TsbError::Numerical(
            "side increment requested for a side with zero weight".into(),
        ));
    }
    if den.abs() < NEWTON_FLOOR {
        return Ok(0.0);
    }
    let step = num / den;
    if !step.is_finite() {
        return Err(TsbError::Numerical(format!("non-finite step size {step}")));
    }
    Ok(step)
}

/// Per-instance losses and their weighted sum.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEvaluation {
    pub per_instance: Vec<f64>,
    pub weighted_total: f64,
}

pub fn evaluate(loss: LossKind, labels: &[f64], f_values: &[f64], w: &WeightVector) -> LossEvaluation {
    let per_instance: Vec<f64> = labels
        .iter()
        .zip(f_values)
        .map(|(&y, &f)| loss_value(loss, y, f))
        .collect();
    let weighted_total = per_instance
        .iter()
        .zip(w.as_slice())
        .map(|(l, wi)| l * wi)
        .sum();
    LossEvaluation {
        per_instance,
        weighted_total,
    }
}
