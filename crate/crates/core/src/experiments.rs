//! Cross-validated lambda sweeps, the synthetic two-class generator, and
//! per-leaf instance weight export.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::baselines::{fit_cart, fit_gbs, predict_cart, predict_gbs, GbsConfig};
use crate::error::{Result, TsbError};
use crate::model::{sign_label, Branch, Dataset, LabelKind, Lambda, LossKind, WeightVector};
use crate::trainer::{train, train_traced, PathStep, TsbConfig};

/// `{0, 0.05, 0.15, 0.4, 1, 2.5, 6, 15, 60, inf}`.
pub fn default_lambda_grid() -> Vec<Lambda> {
    [0.0, 0.05, 0.15, 0.4, 1.0, 2.5, 6.0, 15.0, 60.0]
        .into_iter()
        .map(Lambda::Finite)
        .chain(std::iter::once(Lambda::Infinite))
        .collect()
}

/// Learning rates used for the UCI benchmarks and the synthetic set.
pub fn table_shrinkage(dataset: &str) -> Option<f64> {
    match dataset.to_ascii_lowercase().as_str() {
        "breast_tissue" | "breast-tissue" | "breasttissue" => Some(0.3),
        "ilpd" => Some(0.3),
        "spectf" => Some(0.3),
        "wisconsin" | "wdbc" => Some(0.7),
        "synthetic" => Some(0.1),
        _ => None,
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn deal(order: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::with_capacity(order.len() / k + 1); k];
    for (pos, &i) in order.iter().enumerate() {
        folds[pos % k].push(i);
    }
    folds
}

fn check_folds(n: usize, k: usize) -> Result<()> {
    if k < 2 || k > n {
        return Err(TsbError::Usage(format!(
            "need 2 <= folds <= samples, got {k} folds for {n} samples"
        )));
    }
    Ok(())
}

/// Shuffles `0..n` and deals it into `k` folds of size `floor(n/k)` or `ceil(n/k)`.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    kfold_with(n, k, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn kfold_with(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<usize>>> {
    check_folds(n, k)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    Ok(deal(&order, k))
}

/// Like [`kfold_split`] but keeps the class proportions of binary labels.
///
/// Each class is shuffled separately and the concatenation is dealt
/// round-robin, so fold sizes still differ by at most one.
pub fn stratified_kfold(labels: &[f64], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    stratified_with(labels, k, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn stratified_with(labels: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<usize>>> {
    check_folds(labels.len(), k)?;
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] > 0.0).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] <= 0.0).collect();
    pos.shuffle(rng);
    neg.shuffle(rng);
    pos.extend(neg);
    Ok(deal(&pos, k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub lambda_grid: Vec<Lambda>,
    pub depth: usize,
    pub loss: LossKind,
    pub shrinkage: f64,
    pub folds: usize,
    pub trials: usize,
    pub seed: u64,
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() {
            return Err(TsbError::Usage("lambda grid is empty".into()));
        }
        if self.folds < 2 || self.trials < 1 {
            return Err(TsbError::Usage("need folds >= 2 and trials >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub lambda: Lambda,
    pub trial: usize,
    pub fold: usize,
    pub train_error: f64,
    pub test_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Baseline {
    Cart,
    Gbs,
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Baseline::Cart => "cart",
            Baseline::Gbs => "gbs",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineRow {
    pub algorithm: Baseline,
    pub trial: usize,
    pub fold: usize,
    pub train_error: f64,
    pub test_error: f64,
}

/// Mean and standard error of train and test error over all folds and trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub mean_train: f64,
    pub se_train: f64,
    pub mean_test: f64,
    pub se_test: f64,
    pub measurements: usize,
}

impl ErrorSummary {
    fn from_pairs(pairs: impl Iterator<Item = (f64, f64)>) -> Self {
        let (train, test): (Vec<f64>, Vec<f64>) = pairs.unzip();
        ErrorSummary {
            mean_train: mean(&train),
            se_train: standard_error(&train),
            mean_test: mean(&test),
            se_test: standard_error(&test),
            measurements: train.len(),
        }
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation over `sqrt(n)`; NaN below two measurements.
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Sorted by (grid position, trial, fold).
    pub rows: Vec<SweepRow>,
    /// Sorted by (algorithm, trial, fold).
    pub baseline_rows: Vec<BaselineRow>,
    /// One entry per grid value, in grid order.
    pub aggregates: Vec<(Lambda, ErrorSummary)>,
    pub baseline_aggregates: Vec<(Baseline, ErrorSummary)>,
    /// (trial, fold) pairs skipped because the training part had one class.
    pub degenerate_folds: Vec<(usize, usize)>,
}

impl SweepResult {
    pub fn baseline(&self, which: Baseline) -> Option<&ErrorSummary> {
        self.baseline_aggregates
            .iter()
            .find(|(b, _)| *b == which)
            .map(|(_, s)| s)
    }

    /// Grid value with the lowest mean test error (first on ties).
    pub fn best_lambda(&self) -> Option<Lambda> {
        self.aggregates
            .iter()
            .filter(|(_, s)| !s.mean_test.is_nan())
            .fold(None::<(Lambda, f64)>, |best, (l, s)| match best {
                Some((_, e)) if e <= s.mean_test => best,
                _ => Some((*l, s.mean_test)),
            })
            .map(|(l, _)| l)
    }
}

/// Misclassification rate for binary labels, mean squared error otherwise.
fn error_rate<F: Fn(&[f64]) -> f64>(data: &Dataset, predict: F) -> f64 {
    let n = data.n_samples() as f64;
    let labels = data.labels();
    match data.label_kind() {
        LabelKind::Binary => {
            data.rows()
                .zip(labels)
                .filter(|(x, &y)| sign_label(predict(x)) != y)
                .count() as f64
                / n
        }
        LabelKind::Continuous => {
            data.rows()
                .zip(labels)
                .map(|(x, &y)| (y - predict(x)).powi(2))
                .sum::<f64>()
                / n
        }
    }
}

struct FoldOutcome {
    trial: usize,
    fold: usize,
    tsb: Vec<(f64, f64)>,
    cart: (f64, f64),
    gbs: (f64, f64),
}

fn run_fold(
    data: &Dataset,
    cfg: &SweepConfig,
    trial: usize,
    fold: usize,
    test_idx: &[usize],
) -> Result<Option<FoldOutcome>> {
    let mut in_test = vec![false; data.n_samples()];
    test_idx.iter().for_each(|&i| in_test[i] = true);
    let train_idx: Vec<usize> = (0..data.n_samples()).filter(|&i| !in_test[i]).collect();
    let train_set = data.subset(&train_idx)?;
    let test_set = data.subset(test_idx)?;
    if data.label_kind() == LabelKind::Binary {
        let first = train_set.labels()[0];
        if train_set.labels().iter().all(|&y| y == first) {
            warn!("trial {trial} fold {fold}: training portion holds a single class; skipped");
            return Ok(None);
        }
    }

    let mut tsb = Vec::with_capacity(cfg.lambda_grid.len());
    for &lambda in &cfg.lambda_grid {
        let model = train(
            &train_set,
            &TsbConfig::new(cfg.depth, lambda, cfg.loss).with_shrinkage(cfg.shrinkage),
        )?;
        let f = |x: &[f64]| model.margin_unchecked(x);
        tsb.push((error_rate(&train_set, f), error_rate(&test_set, f)));
    }

    let cart = fit_cart(&train_set, cfg.depth)?;
    let cart_err = {
        let f = |x: &[f64]| predict_cart(&cart, x).expect("dimension checked");
        (error_rate(&train_set, f), error_rate(&test_set, f))
    };
    let gbs = fit_gbs(
        &train_set,
        &GbsConfig {
            rounds: cfg.depth,
            loss: cfg.loss,
            shrinkage: cfg.shrinkage,
        },
    )?;
    let gbs_err = {
        let f = |x: &[f64]| predict_gbs(&gbs, x).expect("dimension checked");
        (error_rate(&train_set, f), error_rate(&test_set, f))
    };
    Ok(Some(FoldOutcome {
        trial,
        fold,
        tsb,
        cart: cart_err,
        gbs: gbs_err,
    }))
}

/// Repeated k-fold cross-validation of the ensemble at every grid value,
/// with CART and gradient-boosted stumps of the same depth on each fold.
///
/// Folds are stratified for binary labels. Work items run in parallel; the
/// output is sorted, so it does not depend on scheduling.
pub fn run_sweep(data: &Dataset, cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let mut items = Vec::with_capacity(cfg.trials * cfg.folds);
    for trial in 0..cfg.trials {
        let mut rng = trial_rng(cfg.seed, trial);
        let folds = match data.label_kind() {
            LabelKind::Binary => stratified_with(data.labels(), cfg.folds, &mut rng)?,
            LabelKind::Continuous => kfold_with(data.n_samples(), cfg.folds, &mut rng)?,
        };
        for (fold, test_idx) in folds.into_iter().enumerate() {
            items.push((trial, fold, test_idx));
        }
    }

    let outcomes: Vec<Result<Option<FoldOutcome>>> = items
        .par_iter()
        .map(|(trial, fold, test_idx)| run_fold(data, cfg, *trial, *fold, test_idx))
        .collect();

    let mut done = Vec::with_capacity(outcomes.len());
    let mut degenerate_folds = Vec::new();
    for ((trial, fold, _), outcome) in items.iter().zip(outcomes) {
        match outcome? {
            Some(o) => done.push(o),
            None => degenerate_folds.push((*trial, *fold)),
        }
    }

    let mut rows = Vec::with_capacity(done.len() * cfg.lambda_grid.len());
    for (g, &lambda) in cfg.lambda_grid.iter().enumerate() {
        for o in &done {
            rows.push(SweepRow {
                lambda,
                trial: o.trial,
                fold: o.fold,
                train_error: o.tsb[g].0,
                test_error: o.tsb[g].1,
            });
        }
    }
    let mut baseline_rows = Vec::with_capacity(2 * done.len());
    for algorithm in [Baseline::Cart, Baseline::Gbs] {
        for o in &done {
            let (train_error, test_error) = match algorithm {
                Baseline::Cart => o.cart,
                Baseline::Gbs => o.gbs,
            };
            baseline_rows.push(BaselineRow {
                algorithm,
                trial: o.trial,
                fold: o.fold,
                train_error,
                test_error,
            });
        }
    }

    let aggregates = cfg
        .lambda_grid
        .iter()
        .enumerate()
        .map(|(g, &lambda)| (lambda, ErrorSummary::from_pairs(done.iter().map(|o| o.tsb[g]))))
        .collect();
    let baseline_aggregates = vec![
        (Baseline::Cart, ErrorSummary::from_pairs(done.iter().map(|o| o.cart))),
        (Baseline::Gbs, ErrorSummary::from_pairs(done.iter().map(|o| o.gbs))),
    ];
    Ok(SweepResult {
        rows,
        baseline_rows,
        aggregates,
        baseline_aggregates,
        degenerate_folds,
    })
}

/// Two overlapping isotropic Gaussian classes in the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_red: usize,
    pub n_green: usize,
    pub red_center: [f64; 2],
    pub green_center: [f64; 2],
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_red: 58,
            n_green: 42,
            red_center: [3.0, 5.0],
            green_center: [6.0, 2.0],
            sigma: 1.5,
            seed: 0,
        }
    }
}

/// Red points (label +1) first, then green points (label -1).
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    if cfg.n_red == 0 || cfg.n_green == 0 {
        return Err(TsbError::Usage("both classes need at least one point".into()));
    }
    let normal = Normal::new(0.0, cfg.sigma)
        .map_err(|e| TsbError::Usage(format!("invalid sigma {}: {e}", cfg.sigma)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.n_red + cfg.n_green);
    let mut labels = Vec::with_capacity(rows.capacity());
    for (count, center, label) in [
        (cfg.n_red, cfg.red_center, 1.0),
        (cfg.n_green, cfg.green_center, -1.0),
    ] {
        for _ in 0..count {
            rows.push(vec![
                center[0] + normal.sample(&mut rng),
                center[1] + normal.sample(&mut rng),
            ]);
            labels.push(label);
        }
    }
    Dataset::new(rows, labels, None, LabelKind::Binary)
}

/// One atom of a leaf selector such as `X2>2.95`.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    /// Zero-based.
    pub feature: usize,
    pub branch: Branch,
    pub threshold: f64,
    /// Half a unit in the last written decimal place.
    pub tolerance: f64,
}

impl Condition {
    fn matches(&self, step: &PathStep) -> bool {
        step.stump.feature == self.feature
            && step.branch == self.branch
            && (step.stump.threshold - self.threshold).abs() <= self.tolerance
    }
}

/// A conjunction of `Xk>v` / `Xk<=v` atoms with one-based feature indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafSelector {
    pub conditions: Vec<Condition>,
}

impl LeafSelector {
    /// Selector describing an existing path exactly.
    pub fn from_path(path: &[PathStep]) -> Self {
        LeafSelector {
            conditions: path
                .iter()
                .map(|s| Condition {
                    feature: s.stump.feature,
                    branch: s.branch,
                    threshold: s.stump.threshold,
                    tolerance: 0.0,
                })
                .collect(),
        }
    }

    pub fn matches(&self, path: &[PathStep]) -> bool {
        if path.len() != self.conditions.len() {
            return false;
        }
        let mut used = vec![false; path.len()];
        self.conditions.iter().all(|c| {
            match (0..path.len()).find(|&k| !used[k] && c.matches(&path[k])) {
                Some(k) => {
                    used[k] = true;
                    true
                }
                None => false,
            }
        })
    }
}

impl FromStr for LeafSelector {
    type Err = TsbError;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.replace('∧', "&").replace("&&", "&").replace(" and ", "&").replace(',', "&");
        let mut conditions = Vec::new();
        for atom in normalized.split('&').map(str::trim).filter(|a| !a.is_empty()) {
            conditions.push(parse_condition(atom)?);
        }
        if conditions.is_empty() {
            return Err(TsbError::Selector(format!("empty leaf selector {s:?}")));
        }
        Ok(LeafSelector { conditions })
    }
}

fn parse_condition(atom: &str) -> Result<Condition> {
    let bad = || TsbError::Selector(format!("cannot parse leaf condition {atom:?}; expected Xk>v or Xk<=v"));
    let rest = atom.strip_prefix(['X', 'x']).ok_or_else(bad)?;
    let op_at = rest.find(['<', '>']).ok_or_else(bad)?;
    let feature: usize = rest[..op_at].trim().parse().map_err(|_| bad())?;
    if feature == 0 {
        return Err(TsbError::Selector(format!("feature indices are one-based in {atom:?}")));
    }
    let tail = &rest[op_at..];
    let (branch, value) = if let Some(v) = tail.strip_prefix("<=") {
        (Branch::Left, v)
    } else if let Some(v) = tail.strip_prefix('<') {
        (Branch::Left, v)
    } else if let Some(v) = tail.strip_prefix('>') {
        if v.starts_with('=') {
            return Err(bad());
        }
        (Branch::Right, v)
    } else {
        return Err(bad());
    };
    let value = value.trim();
    let threshold: f64 = value.parse().map_err(|_| bad())?;
    let decimals = value
        .split_once('.')
        .map(|(_, frac)| frac.chars().take_while(char::is_ascii_digit).count())
        .unwrap_or(0);
    Ok(Condition {
        feature: feature - 1,
        branch,
        threshold,
        tolerance: 0.5 * 10f64.powi(-(decimals as i32)) * (1.0 + 1e-9),
    })
}

/// A training instance and the weight it carries at the selected leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafWeightRow {
    pub features: Vec<f64>,
    pub label: f64,
    pub weight: f64,
}

/// The selected leaf's path and the weights of every training instance there.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafWeights {
    pub path: Vec<PathStep>,
    pub weights: WeightVector,
    pub rows: Vec<LeafWeightRow>,
}

/// Trains the ensemble and reports the instance weights at the one leaf
/// matched by `selector`.
pub fn export_leaf_weights(data: &Dataset, cfg: &TsbConfig, selector: &LeafSelector) -> Result<LeafWeights> {
    let mut matches: Vec<(Vec<PathStep>, WeightVector)> = Vec::new();
    train_traced(data, cfg, |visit| {
        if visit.split.is_none() && selector.matches(visit.path) {
            matches.push((visit.path.to_vec(), visit.context.weights.clone()));
        }
    })?;
    match matches.len() {
        0 => Err(TsbError::Selector("leaf selector matches no leaf".into())),
        1 => {
            let (path, weights) = matches.pop().expect("one match");
            let rows = data
                .rows()
                .zip(data.labels())
                .zip(weights.as_slice())
                .map(|((x, &label), &weight)| LeafWeightRow {
                    features: x.to_vec(),
                    label,
                    weight,
                })
                .collect();
            Ok(LeafWeights { path, weights, rows })
        }
        k => Err(TsbError::Selector(format!("leaf selector matches {k} leaves"))),
    }
}

/// Selector text (`X2>2.95 & X1<=5.55` style) for a path.
pub fn format_selector(path: &[PathStep]) -> String {
    path.iter()
        .map(|s| {
            let op = match s.branch {
                Branch::Left => "<=",
                Branch::Right => ">",
            };
            format!("X{}{}{}", s.stump.feature + 1, op, s.stump.threshold)
        })
        .collect::<Vec<_>>()
        .join(" & ")
}
