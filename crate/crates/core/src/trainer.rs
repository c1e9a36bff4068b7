//! Recursive growth of the tree-structured ensemble.
//!
//! Every node fits a stump to the pseudo-residuals of the *whole* training
//! set under that node's instance weights, adds the per-side increments to
//! the running margin of every instance, and hands each child a re-weighted
//! copy of the weights. A child is grown unless its weights would carry no
//! mass, which only happens at `lambda = 0` when no training instance of the
//! node's domain falls on that side.

use crate::error::{Result, TsbError};
use crate::loss::{base_value, negative_gradients, side_increment};
use crate::model::{Branch, Dataset, Lambda, LossKind, Stump, TsbModel, TsbNode, WeightVector};
use crate::stump::{fit_stump_sorted, SortedFeatures};
use crate::weights::child_weights;

#[derive(Debug, Clone, PartialEq)]
pub struct TsbConfig {
    /// Number of stump levels.
    pub depth: usize,
    pub lambda: Lambda,
    pub loss: LossKind,
    /// Learning rate applied to every increment, in (0, 1].
    pub shrinkage: f64,
    /// Defaults to uniform.
    pub initial_weights: Option<WeightVector>,
}

impl TsbConfig {
    pub fn new(depth: usize, lambda: Lambda, loss: LossKind) -> Self {
        TsbConfig {
            depth,
            lambda,
            loss,
            shrinkage: 1.0,
            initial_weights: None,
        }
    }

    pub fn with_shrinkage(mut self, shrinkage: f64) -> Self {
        self.shrinkage = shrinkage;
        self
    }

    pub fn with_initial_weights(mut self, w0: WeightVector) -> Self {
        self.initial_weights = Some(w0);
        self
    }

    pub(crate) fn validate(&self, data: &Dataset) -> Result<()> {
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(TsbError::Usage(format!(
                "shrinkage must lie in (0, 1], got {}",
                self.shrinkage
            )));
        }
        validate_loss(self.loss, data)?;
        if let Some(w0) = &self.initial_weights {
            if w0.len() != data.n_samples() {
                return Err(TsbError::DimensionMismatch {
                    expected: data.n_samples(),
                    got: w0.len(),
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn validate_loss(loss: LossKind, data: &Dataset) -> Result<()> {
    if loss == LossKind::BinomialDeviance && data.label_kind() != crate::model::LabelKind::Binary {
        return Err(TsbError::InvalidDataset(
            "deviance loss needs binary labels".into(),
        ));
    }
    Ok(())
}

/// State of a node at the moment it is visited during training.
#[derive(Debug, Clone)]
pub struct NodeContext {
    /// Number of stumps above this node.
    pub depth: usize,
    pub weights: WeightVector,
    /// Training instances inside the intersection of the path's partitions.
    pub member_mask: Vec<bool>,
    /// Margin of every training instance before this node's stump.
    pub f_values: Vec<f64>,
}

/// One step on a root-to-node path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStep {
    pub stump: Stump,
    pub branch: Branch,
}

/// What a training observer sees at each node.
#[derive(Debug)]
pub struct NodeVisit<'a> {
    pub path: &'a [PathStep],
    pub context: &'a NodeContext,
    /// The node's own stump and increments; `None` for leaves.
    pub split: Option<(Stump, f64, f64)>,
}

pub fn train(data: &Dataset, config: &TsbConfig) -> Result<TsbModel> {
    train_traced(data, config, |_| {})
}

/// [`train`], calling `observe` once for every node after it is fitted.
pub fn train_traced<F>(data: &Dataset, config: &TsbConfig, mut observe: F) -> Result<TsbModel>
where
    F: FnMut(&NodeVisit<'_>),
{
    config.validate(data)?;
    let n = data.n_samples();
    let w0 = match &config.initial_weights {
        Some(w) => w.normalized()?,
        None => WeightVector::uniform(n),
    };
    let base = base_value(config.loss, data.labels(), &w0);
    let grower = Grower {
        data,
        sorted: SortedFeatures::new(data),
        config,
    };
    let root_ctx = NodeContext {
        depth: 0,
        member_mask: vec![true; n],
        f_values: vec![base; n],
        weights: w0,
    };
    let root = grower.grow(root_ctx, &mut Vec::new(), &mut observe)?;
    Ok(TsbModel {
        root,
        base_value: base,
        depth: config.depth,
        lambda: config.lambda,
        loss: config.loss,
        shrinkage: config.shrinkage,
        feature_names: data.feature_names().to_vec(),
    })
}

struct Grower<'a> {
    data: &'a Dataset,
    sorted: SortedFeatures,
    config: &'a TsbConfig,
}

impl Grower<'_> {
    fn grow<F>(&self, ctx: NodeContext, path: &mut Vec<PathStep>, observe: &mut F) -> Result<TsbNode>
    where
        F: FnMut(&NodeVisit<'_>),
    {
        if ctx.depth >= self.config.depth {
            observe(&NodeVisit {
                path,
                context: &ctx,
                split: None,
            });
            return Ok(TsbNode::Leaf);
        }
        let data = self.data;
        let labels = data.labels();
        let loss = self.config.loss;
        let nu = self.config.shrinkage;

        let residuals = negative_gradients(loss, labels, &ctx.f_values)?;
        let stump = fit_stump_sorted(data, &self.sorted, &residuals, &ctx.weights)?;
        let left_mask = stump.left_mask(data);
        let right_mask: Vec<bool> = left_mask.iter().map(|&b| !b).collect();

        let w = &ctx.weights;
        let has_mass = |mask: &[bool]| mask.iter().zip(w.as_slice()).any(|(&m, &wi)| m && wi > 0.0);
        let all = vec![true; left_mask.len()];
        let increment = |mask: &[bool]| -> Result<f64> {
            let side = if has_mass(mask) { mask } else { &all[..] };
            Ok(nu * side_increment(loss, &residuals, labels, &ctx.f_values, w, side)?)
        };
        let left_increment = increment(&left_mask)?;
        let right_increment = increment(&right_mask)?;

        observe(&NodeVisit {
            path,
            context: &ctx,
            split: Some((stump, left_increment, right_increment)),
        });

        let f_values: Vec<f64> = ctx
            .f_values
            .iter()
            .zip(&left_mask)
            .map(|(&f, &left)| f + if left { left_increment } else { right_increment })
            .collect();

        let mut child = |side_mask: &[bool], branch: Branch| -> Result<TsbNode> {
            let Ok(weights) = child_weights(w, side_mask, self.config.lambda) else {
                // Zero-mass child at lambda = 0: the domain is empty on this side.
                return Ok(TsbNode::Leaf);
            };
            let member_mask = ctx
                .member_mask
                .iter()
                .zip(side_mask)
                .map(|(&a, &b)| a && b)
                .collect();
            path.push(PathStep { stump, branch });
            let node = self.grow(
                NodeContext {
                    depth: ctx.depth + 1,
                    weights,
                    member_mask,
                    f_values: f_values.clone(),
                },
                path,
                observe,
            );
            path.pop();
            node
        };
        let left = child(&left_mask, Branch::Left)?;
        let right = child(&right_mask, Branch::Right)?;

        Ok(TsbNode::Internal {
            stump,
            left_increment,
            right_increment,
            left: Box::new(left),
            right: Box::new(right),
        })
    }
}
