//! Regression and maximum-likelihood estimators with clustered inference.

mod cf;
mod data;
mod fe_logit;
mod hazard;
mod inference;
mod reduced_form;
mod structural;

pub(crate) use data::assemble_design;

pub use cf::{fit_lpm_cf, fit_poisson_cf, CfOptions, ControlFunctionFit};
pub use fe_logit::fit_conditional_logit_fe;
pub use data::{
    dataset_from_log, LogColumn, LogDesign, OutcomeKind, PairDataset, PairDatasetBuilder,
};
pub use hazard::{fit_hazard_calibration, HazardDataset, HazardFit, HazardRow, RankEffects};
pub use inference::{logit_fit, ols_fit, poisson_fit, Convergence, FitResult, WaldTest};
pub use reduced_form::{fit_logit, fit_reduced_form};
pub use structural::{recover_structural, StructuralEstimate};
