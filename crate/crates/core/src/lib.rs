//! Tree-structured boosting.
//!
//! A tree-structured ensemble grows a perfect binary tree of stumps. Each
//! child re-fits the full training set with instance weights multiplied by
//! `lambda + 1` inside its branch and by `lambda` outside. At `lambda = 0`
//! the result is a least-squares CART tree; as `lambda` grows without bound
//! every path carries the same gradient-boosted stump sequence.
//!
//! ```
//! use tsb::{train, Dataset, LabelKind, Lambda, LossKind, TsbConfig};
//!
//! let data = Dataset::new(
//!     vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
//!     vec![1.0, 1.0, -1.0, -1.0],
//!     None,
//!     LabelKind::Continuous,
//! )?;
//! let model = train(&data, &TsbConfig::new(1, Lambda::Finite(1.0), LossKind::SquaredError))?;
//! assert_eq!(model.predict(&[1.5])?, 1.0);
//! # Ok::<(), tsb::TsbError>(())
//! ```

pub mod baselines;
pub mod error;
pub mod experiments;
pub mod io;
pub mod loss;
pub mod model;
pub mod stump;
pub mod trainer;
pub mod weights;

pub use baselines::{fit_cart, fit_gbs, predict_cart, predict_gbs, CartModel, CartNode, GbsConfig, GbsModel, GbsStage};
pub use error::{ErrorCategory, Result, TsbError};
pub use experiments::{
    export_leaf_weights, generate_synthetic, kfold_split, run_sweep, stratified_kfold, LeafSelector, SweepConfig,
    SweepResult, SyntheticConfig,
};
pub use io::{load_csv, load_model, save_model, Model, ModelDocument, TrainingEcho};
pub use loss::{base_value, negative_gradient, side_increment};
pub use model::{Branch, Dataset, LabelKind, Lambda, LossKind, Stump, TsbModel, TsbNode, WeightVector};
pub use stump::fit_stump;
pub use trainer::{train, train_traced, NodeContext, NodeVisit, PathStep, TsbConfig};
pub use weights::{closed_form_weight, update_weights};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/weights.md")]
    mod weights {}
    #[doc = include_str!("../../../book/src/endpoints.md")]
    mod endpoints {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
