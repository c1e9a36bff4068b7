//! Domain types shared by the trainer, the baselines and the experiment
//! harness: datasets, instance weights, the re-weighting ratio, stumps and
//! the tree-structured ensemble itself.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, TsbError};

/// Finite ratios below this value behave exactly like zero.
pub const LAMBDA_ZERO_CUTOFF: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    /// Every label is -1 or +1.
    Binary,
    Continuous,
}

/// An `N x d` numeric design matrix with one label per row.
///
/// Features are stored row-major. Binary labels are always `-1.0` / `+1.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<f64>,
    n_features: usize,
    feature_names: Vec<String>,
    label_kind: LabelKind,
}

impl Dataset {
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<f64>,
        feature_names: Option<Vec<String>>,
        label_kind: LabelKind,
    ) -> Result<Self> {
        let n_rows = rows.len();
        if n_rows == 0 {
            return Err(TsbError::InvalidDataset("dataset has no rows".into()));
        }
        let n_features = rows[0].len();
        if n_features == 0 {
            return Err(TsbError::InvalidDataset("dataset has no feature columns".into()));
        }
        let mut features = Vec::with_capacity(n_rows * n_features);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_features {
                return Err(TsbError::InvalidDataset(format!(
                    "row {i} has {} features, expected {n_features}",
                    row.len()
                )));
            }
            features.extend(row);
        }
        Self::from_flat(features, n_features, labels, feature_names, label_kind)
    }

    /// Builds a dataset from a row-major buffer of length `labels.len() * n_features`.
    pub fn from_flat(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<f64>,
        feature_names: Option<Vec<String>>,
        label_kind: LabelKind,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 || n_features == 0 {
            return Err(TsbError::InvalidDataset(
                "dataset needs at least one row and one feature".into(),
            ));
        }
        if features.len() != n * n_features {
            return Err(TsbError::InvalidDataset(format!(
                "feature buffer holds {} values, expected {}",
                features.len(),
                n * n_features
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(TsbError::InvalidDataset(format!(
                "non-finite feature value at row {}, feature {}",
                pos / n_features,
                pos % n_features
            )));
        }
        if let Some(pos) = labels.iter().position(|v| !v.is_finite()) {
            return Err(TsbError::InvalidDataset(format!(
                "non-finite label at row {pos}"
            )));
        }
        if label_kind == LabelKind::Binary {
            if let Some(pos) = labels.iter().position(|&v| v != 1.0 && v != -1.0) {
                return Err(TsbError::InvalidDataset(format!(
                    "binary label at row {pos} is {}, expected -1 or +1",
                    labels[pos]
                )));
            }
        }
        let feature_names = match feature_names {
            Some(names) if names.len() != n_features => {
                return Err(TsbError::InvalidDataset(format!(
                    "{} feature names for {n_features} features",
                    names.len()
                )))
            }
            Some(names) => names,
            None => (1..=n_features).map(|k| format!("X{k}")).collect(),
        };
        Ok(Dataset {
            features,
            labels,
            n_features,
            feature_names,
            label_kind,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub fn value(&self, i: usize, feature: usize) -> f64 {
        self.features[i * self.n_features + feature]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_kind(&self) -> LabelKind {
        self.label_kind
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features)
    }

    /// A new dataset holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset::from_flat(
            features,
            self.n_features,
            labels,
            Some(self.feature_names.clone()),
            self.label_kind,
        )
    }
}

/// Per-instance weights. Values are non-negative and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn uniform(n: usize) -> Self {
        WeightVector(vec![1.0 / n as f64; n])
    }

    /// Normalizes arbitrary non-negative weights to a distribution.
    pub fn from_unnormalized(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(TsbError::Numerical(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = values.iter().sum();
        if !(total > 0.0) {
            return Err(TsbError::Numerical("weights have zero total mass".into()));
        }
        Ok(WeightVector(values.into_iter().map(|v| v / total).collect()))
    }

    /// Wraps values as-is; the caller guarantees the distribution invariant.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        WeightVector(values)
    }

    pub fn normalized(&self) -> Result<Self> {
        Self::from_unnormalized(self.0.clone())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// The re-weighting ratio. `Infinite` is the exact gradient-boosting limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Finite(f64),
    Infinite,
}

impl Lambda {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value < 0.0 {
            return Err(TsbError::Usage(format!(
                "lambda must be non-negative, got {value}"
            )));
        }
        if value.is_infinite() {
            return Ok(Lambda::Infinite);
        }
        Ok(Lambda::Finite(value))
    }

    pub fn zero() -> Self {
        Lambda::Finite(0.0)
    }

    /// The finite value with tiny ratios snapped to zero; `None` for infinity.
    pub fn effective(self) -> Option<f64> {
        match self {
            Lambda::Finite(v) if v < LAMBDA_ZERO_CUTOFF => Some(0.0),
            Lambda::Finite(v) => Some(v),
            Lambda::Infinite => None,
        }
    }

    pub fn is_zero(self) -> bool {
        self.effective() == Some(0.0)
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Lambda::Infinite)
    }

    /// Numeric value, with infinity mapped to `f64::INFINITY`.
    pub fn as_f64(self) -> f64 {
        match self {
            Lambda::Finite(v) => v,
            Lambda::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Lambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lambda::Finite(v) => write!(f, "{v}"),
            Lambda::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Lambda {
    type Err = TsbError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(Lambda::Infinite);
        }
        let value: f64 = s
            .parse()
            .map_err(|_| TsbError::Usage(format!("invalid lambda {s:?}")))?;
        if value.is_infinite() {
            return Err(TsbError::Usage(format!(
                "invalid lambda {s:?}; use the token \"inf\""
            )));
        }
        Lambda::new(value)
    }
}

impl Serialize for Lambda {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Lambda::Finite(v) => serializer.serialize_f64(*v),
            Lambda::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Lambda {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Token(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Number(v) => Lambda::new(v).map_err(serde::de::Error::custom),
            Repr::Token(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    SquaredError,
    /// Two-class deviance `log(1 + exp(-2yF))` with labels in {-1, +1}.
    BinomialDeviance,
}

impl FromStr for LossKind {
    type Err = TsbError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" | "squared_error" | "ls" => Ok(LossKind::SquaredError),
            "deviance" | "binomial_deviance" => Ok(LossKind::BinomialDeviance),
            other => Err(TsbError::Usage(format!(
                "unknown loss {other:?}; expected squared or deviance"
            ))),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::SquaredError => "squared",
            LossKind::BinomialDeviance => "deviance",
        })
    }
}

/// Axis-aligned split with one constant output per side.
///
/// An input goes left iff `x[feature] <= threshold`. A threshold of
/// negative infinity sends everything right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    #[serde(with = "crate::io::extended_float")]
    pub threshold: f64,
    pub left_value: f64,
    pub right_value: f64,
}

impl Stump {
    #[inline]
    pub fn goes_left(&self, x: &[f64]) -> bool {
        x[self.feature] <= self.threshold
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.goes_left(x) {
            self.left_value
        } else {
            self.right_value
        }
    }

    /// Membership mask of the left partition over the rows of `data`.
    pub fn left_mask(&self, data: &Dataset) -> Vec<bool> {
        (0..data.n_samples())
            .map(|i| data.value(i, self.feature) <= self.threshold)
            .collect()
    }

    pub fn is_degenerate(&self) -> bool {
        self.threshold == f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TsbNode {
    Internal {
        stump: Stump,
        /// Shrinkage and step size already applied.
        left_increment: f64,
        right_increment: f64,
        left: Box<TsbNode>,
        right: Box<TsbNode>,
    },
    Leaf,
}

impl TsbNode {
    /// The root-to-leaf path of `x`: every internal node visited and the branch taken.
    pub fn route<'a>(&'a self, x: &[f64]) -> Vec<(&'a TsbNode, Branch)> {
        let mut path = Vec::new();
        let mut node = self;
        while let TsbNode::Internal {
            stump, left, right, ..
        } = node
        {
            if stump.goes_left(x) {
                path.push((node, Branch::Left));
                node = left;
            } else {
                path.push((node, Branch::Right));
                node = right;
            }
        }
        path
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TsbNode::Leaf)
    }

    pub fn depth(&self) -> usize {
        match self {
            TsbNode::Leaf => 0,
            TsbNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Count of internal nodes.
    pub fn n_internal(&self) -> usize {
        match self {
            TsbNode::Leaf => 0,
            TsbNode::Internal { left, right, .. } => 1 + left.n_internal() + right.n_internal(),
        }
    }

    /// Calls `f` with the stump sequence along every root-to-leaf path.
    pub fn for_each_path<F: FnMut(&[(Stump, Branch, f64)])>(&self, f: &mut F) {
        fn walk<F: FnMut(&[(Stump, Branch, f64)])>(
            node: &TsbNode,
            prefix: &mut Vec<(Stump, Branch, f64)>,
            f: &mut F,
        ) {
            match node {
                TsbNode::Leaf => f(prefix),
                TsbNode::Internal {
                    stump,
                    left_increment,
                    right_increment,
                    left,
                    right,
                } => {
                    prefix.push((*stump, Branch::Left, *left_increment));
                    walk(left, prefix, f);
                    prefix.pop();
                    prefix.push((*stump, Branch::Right, *right_increment));
                    walk(right, prefix, f);
                    prefix.pop();
                }
            }
        }
        walk(self, &mut Vec::new(), f);
    }
}

pub(crate) fn check_dimension(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(TsbError::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

/// A trained tree-structured ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsbModel {
    pub root: TsbNode,
    pub base_value: f64,
    pub depth: usize,
    pub lambda: Lambda,
    pub loss: LossKind,
    pub shrinkage: f64,
    pub feature_names: Vec<String>,
}

impl TsbModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn route(&self, x: &[f64]) -> Result<Vec<(&TsbNode, Branch)>> {
        check_dimension(self.n_features(), x)?;
        Ok(self.root.route(x))
    }

    /// Accumulated margin `F(x)`: base value plus every increment on the path.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dimension(self.n_features(), x)?;
        Ok(self.margin_unchecked(x))
    }

    pub(crate) fn margin_unchecked(&self, x: &[f64]) -> f64 {
        let mut f = self.base_value;
        let mut node = &self.root;
        while let TsbNode::Internal {
            stump,
            left_increment,
            right_increment,
            left,
            right,
        } = node
        {
            if stump.goes_left(x) {
                f += left_increment;
                node = left;
            } else {
                f += right_increment;
                node = right;
            }
        }
        f
    }

    /// Predicted class in {-1, +1}; a zero margin maps to +1.
    pub fn predict_label(&self, x: &[f64]) -> Result<f64> {
        Ok(sign_label(self.predict(x)?))
    }

    /// Probability of the +1 class under the deviance link.
    pub fn predict_probability(&self, x: &[f64]) -> Result<f64> {
        Ok(crate::loss::margin_to_probability(self.predict(x)?))
    }
}

/// `sign(F)` with ties broken towards +1.
#[inline]
pub fn sign_label(margin: f64) -> f64 {
    if margin >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump(feature: usize, threshold: f64) -> Stump {
        Stump {
            feature,
            threshold,
            left_value: -1.0,
            right_value: 1.0,
        }
    }

    fn internal(s: Stump, left: TsbNode, right: TsbNode) -> TsbNode {
        TsbNode::Internal {
            stump: s,
            left_increment: s.left_value,
            right_increment: s.right_value,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    #[test]
    fn leaf_route_is_empty() {
        assert!(TsbNode::Leaf.route(&[1.0, 2.0]).is_empty());
    }

    #[test]
    fn single_stump_routes_left_on_equal_or_below() {
        let root = internal(stump(0, 2.0), TsbNode::Leaf, TsbNode::Leaf);
        assert_eq!(root.route(&[1.0])[0].1, Branch::Left);
        assert_eq!(root.route(&[2.0])[0].1, Branch::Left);
        assert_eq!(root.route(&[2.5])[0].1, Branch::Right);
    }

    #[test]
    fn perfect_tree_paths_have_full_length() {
        fn build(depth: usize, k: usize) -> TsbNode {
            if depth == 0 {
                return TsbNode::Leaf;
            }
            internal(
                stump(k % 2, k as f64 * 0.1),
                build(depth - 1, 2 * k + 1),
                build(depth - 1, 2 * k + 2),
            )
        }
        let root = build(3, 0);
        for x in [[-5.0, 0.3], [0.05, 9.0], [1.0, 1.0], [0.2, -0.2]] {
            assert_eq!(root.route(&x).len(), 3);
        }
    }

    #[test]
    fn predict_accumulates_increments() {
        let model = TsbModel {
            root: internal(stump(0, 2.0), TsbNode::Leaf, TsbNode::Leaf),
            base_value: 0.0,
            depth: 1,
            lambda: Lambda::zero(),
            loss: LossKind::SquaredError,
            shrinkage: 1.0,
            feature_names: vec!["X1".into()],
        };
        assert_eq!(model.predict(&[1.0]).unwrap(), -1.0);
        assert_eq!(model.predict(&[3.0]).unwrap(), 1.0);
        assert!(matches!(
            model.predict(&[1.0, 2.0]),
            Err(TsbError::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn leaf_only_model_predicts_base() {
        let model = TsbModel {
            root: TsbNode::Leaf,
            base_value: 0.5,
            depth: 0,
            lambda: Lambda::Infinite,
            loss: LossKind::SquaredError,
            shrinkage: 1.0,
            feature_names: vec!["a".into(), "b".into()],
        };
        assert_eq!(model.predict(&[100.0, -3.0]).unwrap(), 0.5);
    }

    #[test]
    fn lambda_parsing() {
        assert_eq!("inf".parse::<Lambda>().unwrap(), Lambda::Infinite);
        assert_eq!("0.5".parse::<Lambda>().unwrap(), Lambda::Finite(0.5));
        assert!("-1".parse::<Lambda>().is_err());
        assert!("abc".parse::<Lambda>().is_err());
        assert!(Lambda::Finite(1e-9).is_zero());
        assert!(!Lambda::Finite(1e-3).is_zero());
    }

    #[test]
    fn binary_dataset_rejects_other_labels() {
        let err = Dataset::new(vec![vec![1.0], vec![2.0]], vec![1.0, 0.0], None, LabelKind::Binary);
        assert!(err.is_err());
        let nan = Dataset::new(
            vec![vec![f64::NAN], vec![2.0]],
            vec![1.0, 2.0],
            None,
            LabelKind::Continuous,
        );
        assert!(nan.is_err());
    }

    #[test]
    fn weight_normalization_is_idempotent() {
        let w = WeightVector::from_unnormalized(vec![0.3, 1.7, 2.2, 0.0, 5.1]).unwrap();
        let again = w.normalized().unwrap();
        for (a, b) in w.as_slice().iter().zip(again.as_slice()) {
            assert!((a - b).abs() <= 1e-15);
        }
        assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stump_mask_partitions_indices() {
        let data = Dataset::new(
            vec![vec![1.0], vec![3.0], vec![2.0], vec![5.0]],
            vec![0.0; 4],
            None,
            LabelKind::Continuous,
        )
        .unwrap();
        let mask = stump(0, 2.0).left_mask(&data);
        assert_eq!(mask, vec![true, false, true, false]);
    }
}
