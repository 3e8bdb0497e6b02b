//! Welfare evaluation pipeline comparing ranking policies.
//!
//! The pipeline has three layers. [`fit_hire_given_apply`] and
//! [`fit_apply`] estimate the two probability models behind the welfare
//! index. [`optimal_set`] turns per-vacancy predictions into the
//! counterfactual list that maximizes expected welfare. [`evaluate_arms`]
//! drives both across repeated sample splits and aggregates the result.

mod evaluate;
mod model;
mod optimal;

pub use evaluate::{
    evaluate_arms, ArmWelfare, CounterfactualList, MetricSummary, SplitSpec, WelfareDesign,
    WelfareEstimates,
};
pub use model::{
    fit_apply, fit_hire_given_apply, gamma_hat, gamma_hat_scaled, ProbModel, ScoreTransform,
    Standardizer,
};
pub use optimal::{optimal_set, OptimalEntry, OptimalSet, PoolPrediction};
