//! Path integrated gradients (PIG), Greedy PIG and subset-selection
//! evaluation for gradient-based feature attribution.
//!
//! An [`Objective`] is a differentiable function `g: [0, 1]^n -> R` over
//! feature masks; `G(S) = g(1_S)` is the set function it induces. The
//! attribution algorithms rank features by integrating `grad g` along paths
//! in the unit cube, and the evaluation module measures how good the
//! resulting selections are for `G`.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN. Index
// loops over compressed-row ranges read better than zipped iterators.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod attribution;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod models;
pub mod objective;
pub mod objectives;
pub mod path;
pub mod result;
pub mod rng;
pub mod selection;
pub mod synthetic;

pub use attribution::{
    build_minibatch_schedule, greedy_pig, greedy_pig_groups, integrated_gradients, sequential_gradient, Algorithm,
    MinibatchSchedule,
};
pub use error::{Error, Result};
pub use evaluation::{
    attribution_quality, brute_force_best_subset, curve_and_auc, greedy_subset, marginal_gains,
    pig_marginal_bound_check, pointing_accuracy, CurveMetric, QualityCurve,
};
pub use graph::{EdgeMask, SparseGraph};
pub use models::dataset::TabularDataset;
pub use models::gcn::TinyGcn;
pub use models::gradcheck::grad_check;
pub use models::linreg::{linreg_objective, linreg_solve, LinRegProblem};
pub use models::mlp::SoftmaxNet;
pub use objective::{eval_set, DynObjective, FnObjective, Objective, SetFunction, SetFunctionView};
pub use objectives::{kl_objective, posthoc_objective, topclass_objective};
pub use path::{interpolate, line_point, FeatureMask, PathSpec};
pub use result::{AlgoConfig, AttributionResult, GroupSpec, RoundRecord};
pub use selection::{mask_from_selection, RankingMode, SelectionState};
