//! Experiment-level fits on a pair dataset.

use super::data::{assemble_design, PairDataset};
use super::inference::{logit_fit, ols_fit, FitResult};
use crate::error::Result;

/// OLS of the outcome on arm dummies plus controls, with a joint Wald test
/// that all arm effects are zero. The reference arm must already be the
/// omitted category; including every arm alongside the intercept trips the
/// rank-deficiency error.
pub fn fit_reduced_form(data: &PairDataset) -> Result<FitResult> {
    let (names, x) = assemble_design(
        &[data.instrument_columns(), data.control_columns()],
        true,
        data.n_rows(),
    );
    let arm_names = data.instrument_names();
    ols_fit(
        &names,
        &x,
        data.outcome(),
        data.clusters(),
        Some(&arm_names),
    )
}

/// Binary logit of the outcome on the regressors plus controls and an
/// intercept.
pub fn fit_logit(data: &PairDataset) -> Result<FitResult> {
    let (names, x) = assemble_design(
        &[data.regressor_columns(), data.control_columns()],
        true,
        data.n_rows(),
    );
    logit_fit(&names, &x, data.outcome(), data.clusters(), None)
}
