//! Reference CART and gradient-boosted-stump learners.
//!
//! These are the two endpoints the tree-structured ensemble interpolates
//! between, and both are used as test oracles. CART here is the
//! least-squares regression tree; its split search is written separately
//! from [`crate::stump`] but follows the same candidate and tie-break rules.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TsbError};
use crate::loss::{base_value, negative_gradients, side_increment};
use crate::model::{check_dimension, Dataset, LossKind, Stump, WeightVector};
use crate::stump::{fit_stump_sorted, midpoint, tie_tolerance, SortedFeatures};
use crate::trainer::validate_loss;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum CartNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<CartNode>,
        right: Box<CartNode>,
    },
    Leaf {
        value: f64,
        n_samples: usize,
    },
}

impl CartNode {
    pub fn leaf_for<'a>(&'a self, x: &[f64]) -> &'a CartNode {
        let mut node = self;
        while let CartNode::Split {
            feature,
            threshold,
            left,
            right,
        } = node
        {
            node = if x[*feature] <= *threshold { left } else { right };
        }
        node
    }

    /// `(feature, threshold)` of every split in pre-order, left subtree first.
    pub fn splits(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        fn walk(node: &CartNode, out: &mut Vec<(usize, f64)>) {
            if let CartNode::Split {
                feature,
                threshold,
                left,
                right,
            } = node
            {
                out.push((*feature, *threshold));
                walk(left, out);
                walk(right, out);
            }
        }
        walk(self, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartModel {
    pub root: CartNode,
    pub max_depth: usize,
    pub feature_names: Vec<String>,
}

struct CartBuilder<'a> {
    data: &'a Dataset,
    max_depth: usize,
}

impl CartBuilder<'_> {
    fn build(&self, indices: &[usize], depth: usize) -> CartNode {
        let y = self.data.labels();
        let n = indices.len();
        let mean = indices.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
        let leaf = CartNode::Leaf {
            value: mean,
            n_samples: n,
        };
        let first = y[indices[0]];
        if depth >= self.max_depth || n == 1 || indices.iter().all(|&i| y[i] == first) {
            return leaf;
        }
        match self.best_split(indices, mean) {
            None => leaf,
            Some((feature, threshold)) => {
                let (left, right): (Vec<usize>, Vec<usize>) = indices
                    .iter()
                    .partition(|&&i| self.data.value(i, feature) <= threshold);
                CartNode::Split {
                    feature,
                    threshold,
                    left: Box::new(self.build(&left, depth + 1)),
                    right: Box::new(self.build(&right, depth + 1)),
                }
            }
        }
    }

    /// Minimizes the mean within-child squared deviation of `y`.
    fn best_split(&self, indices: &[usize], mean: f64) -> Option<(usize, f64)> {
        let y = self.data.labels();
        let n = indices.len() as f64;
        let unit = 1.0 / n;
        let total_weight: f64 = indices.iter().map(|_| unit).sum();
        let centered_total: f64 = indices.iter().map(|&i| unit * (y[i] - mean)).sum();
        let scale: f64 = indices.iter().map(|&i| unit * (y[i] - mean).powi(2)).sum();

        // Per feature: every (threshold, gain) candidate in ascending threshold order.
        let mut candidates: Vec<Vec<(f64, f64)>> = Vec::with_capacity(self.data.n_features());
        let mut sorted = indices.to_vec();
        for j in 0..self.data.n_features() {
            sorted.sort_by(|&a, &b| {
                self.data.value(a, j).total_cmp(&self.data.value(b, j)).then(a.cmp(&b))
            });
            let mut list = Vec::new();
            let (mut count, mut sum) = (0.0, 0.0);
            for pair in sorted.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                count += unit;
                sum += unit * (y[a] - mean);
                let (va, vb) = (self.data.value(a, j), self.data.value(b, j));
                if vb > va {
                    let rest = centered_total - sum;
                    let gain = sum * sum / count + rest * rest / (total_weight - count);
                    list.push((midpoint(va, vb), gain));
                }
            }
            candidates.push(list);
        }
        let best = candidates
            .iter()
            .flatten()
            .map(|&(_, g)| g)
            .fold(f64::NEG_INFINITY, f64::max);
        if best == f64::NEG_INFINITY {
            return None;
        }
        let cutoff = best - tie_tolerance(scale);
        candidates.iter().enumerate().find_map(|(j, list)| {
            list.iter()
                .find(|&&(_, g)| g >= cutoff)
                .map(|&(t, _)| (j, t))
        })
    }
}

pub fn fit_cart(data: &Dataset, max_depth: usize) -> Result<CartModel> {
    if data.n_samples() == 0 {
        return Err(TsbError::InvalidDataset("cannot fit CART on an empty dataset".into()));
    }
    let indices: Vec<usize> = (0..data.n_samples()).collect();
    let root = CartBuilder { data, max_depth }.build(&indices, 0);
    Ok(CartModel {
        root,
        max_depth,
        feature_names: data.feature_names().to_vec(),
    })
}

pub fn predict_cart(model: &CartModel, x: &[f64]) -> Result<f64> {
    check_dimension(model.feature_names.len(), x)?;
    match model.root.leaf_for(x) {
        CartNode::Leaf { value, .. } => Ok(*value),
        CartNode::Split { .. } => unreachable!("leaf_for stops at a leaf"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbsConfig {
    pub rounds: usize,
    pub loss: LossKind,
    pub shrinkage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbsStage {
    pub stump: Stump,
    pub left_increment: f64,
    pub right_increment: f64,
}

impl GbsStage {
    #[inline]
    pub fn contribution(&self, x: &[f64]) -> f64 {
        if self.stump.goes_left(x) {
            self.left_increment
        } else {
            self.right_increment
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbsModel {
    pub base_value: f64,
    pub stages: Vec<GbsStage>,
    pub loss: LossKind,
    pub shrinkage: f64,
    pub feature_names: Vec<String>,
}

pub fn fit_gbs(data: &Dataset, config: &GbsConfig) -> Result<GbsModel> {
    if !(config.shrinkage > 0.0 && config.shrinkage <= 1.0) {
        return Err(TsbError::Usage(format!(
            "shrinkage must lie in (0, 1], got {}",
            config.shrinkage
        )));
    }
    validate_loss(config.loss, data)?;
    let n = data.n_samples();
    let labels = data.labels();
    let w = WeightVector::uniform(n);
    let sorted = SortedFeatures::new(data);
    let base = base_value(config.loss, labels, &w);
    let mut f = vec![base; n];
    let mut stages = Vec::with_capacity(config.rounds);
    let all = vec![true; n];
    for _ in 0..config.rounds {
        let residuals = negative_gradients(config.loss, labels, &f)?;
        let stump = fit_stump_sorted(data, &sorted, &residuals, &w)?;
        let left_mask = stump.left_mask(data);
        let right_mask: Vec<bool> = left_mask.iter().map(|&b| !b).collect();
        let increment = |mask: &[bool]| -> Result<f64> {
            let side = if mask.iter().any(|&m| m) { mask } else { &all[..] };
            Ok(config.shrinkage * side_increment(config.loss, &residuals, labels, &f, &w, side)?)
        };
        let stage = GbsStage {
            stump,
            left_increment: increment(&left_mask)?,
            right_increment: increment(&right_mask)?,
        };
        for (fi, &left) in f.iter_mut().zip(&left_mask) {
            *fi += if left {
                stage.left_increment
            } else {
                stage.right_increment
            };
        }
        stages.push(stage);
    }
    Ok(GbsModel {
        base_value: base,
        stages,
        loss: config.loss,
        shrinkage: config.shrinkage,
        feature_names: data.feature_names().to_vec(),
    })
}

pub fn predict_gbs(model: &GbsModel, x: &[f64]) -> Result<f64> {
    check_dimension(model.feature_names.len(), x)?;
    Ok(model
        .stages
        .iter()
        .fold(model.base_value, |f, stage| f + stage.contribution(x)))
}
