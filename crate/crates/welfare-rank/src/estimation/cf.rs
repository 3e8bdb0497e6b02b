//! Control-function estimation for endogenous or mismeasured regressors.
//!
//! Every regressor column is treated as endogenous and projected on the
//! instruments and controls; the second stage adds the first-stage
//! residuals as regressors. For the linear model this reproduces two-stage
//! least squares coefficient for coefficient, and both routes are computed
//! so the identity is observable. Inference on the second stage uses a
//! nonparametric cluster bootstrap because the residual regressors are
//! generated.

use super::data::{assemble_design, PairDataset};
use super::inference::{cluster_groups, ols_fit, poisson_fit, FitResult, WaldTest};
use crate::error::{Error, Result};
use crate::sim::rng::{substream, TAG_BOOTSTRAP};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Knobs for control-function inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfOptions {
    /// Cluster bootstrap replications for second-stage standard errors;
    /// zero disables the bootstrap.
    pub bootstrap_reps: usize,
    pub seed: u64,
}

impl Default for CfOptions {
    fn default() -> Self {
        CfOptions {
            bootstrap_reps: 200,
            seed: 0,
        }
    }
}

/// First stage, second stage, and diagnostics of a control-function fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlFunctionFit {
    /// One projection per regressor, on instruments plus controls.
    pub first_stage: Vec<FitResult>,
    /// Joint instrument tests, aligned with `first_stage`.
    pub first_stage_tests: Vec<WaldTest>,
    /// Set when any first-stage instrument F statistic falls below 1.
    pub weak_instruments: bool,
    pub residual_names: Vec<String>,
    /// Outcome on regressors, controls, first-stage residuals, intercept.
    pub second_stage: FitResult,
    /// Two-stage least squares route (linear model only).
    pub two_stage: Option<FitResult>,
    /// Largest coefficient gap between the two routes over the shared
    /// columns (linear model only).
    pub max_route_gap: Option<f64>,
    /// Residual coefficients: (name, estimate, sandwich standard error).
    pub rho: Vec<(String, f64, f64)>,
    /// Bootstrap standard errors aligned with `second_stage.names`.
    pub bootstrap_se: Option<Vec<f64>>,
    pub bootstrap_failures: usize,
    /// Poisson only: coefficient times the mean fitted rate, aligned with
    /// `second_stage.names`.
    pub average_marginal_effects: Option<Vec<f64>>,
    pub notes: Vec<String>,
}

impl ControlFunctionFit {
    /// Bootstrap standard error for one coefficient, falling back to the
    /// sandwich value when the bootstrap is disabled.
    pub fn std_error(&self, name: &str) -> Option<f64> {
        let idx = self.second_stage.index_of(name)?;
        match &self.bootstrap_se {
            Some(se) => Some(se[idx]),
            None => Some(self.second_stage.std_errors[idx]),
        }
    }
}

enum SecondStage {
    Linear,
    Poisson,
}

fn ols_point(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    Cholesky::new(x.tr_mul(x)).map(|chol| chol.solve(&x.tr_mul(y)))
}

/// Shared first-stage plumbing: projects every regressor on
/// `[instruments, controls, const]` and returns fits, tests, and residual
/// columns.
fn first_stages(
    data: &PairDataset,
    x1_names: &[String],
    x1: &DMatrix<f64>,
) -> Result<(Vec<FitResult>, Vec<WaldTest>, Vec<(String, Vec<f64>)>)> {
    let t_names = data.instrument_names();
    let mut fits = Vec::new();
    let mut tests = Vec::new();
    let mut residuals = Vec::new();
    for (name, w) in data.regressor_columns() {
        let fit = ols_fit(x1_names, x1, w, data.clusters(), Some(&t_names))?;
        let theta = DVector::from_column_slice(&fit.estimates);
        let fitted = x1 * &theta;
        let v: Vec<f64> = w.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
        // In-sample OLS residuals are orthogonal to every included column;
        // anything else means the solve went bad.
        let v_norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for t_name in &t_names {
            let t = data.column(t_name).expect("instrument column exists");
            let t_norm = t.iter().map(|a| a * a).sum::<f64>().sqrt();
            let dot: f64 = v.iter().zip(t).map(|(a, b)| a * b).sum();
            if dot.abs() > 1e-8 * v_norm.max(1.0) * t_norm.max(1.0) {
                return Err(Error::numeric(format!(
                    "first-stage residuals for '{name}' are not orthogonal to '{t_name}'"
                )));
            }
        }
        tests.push(fit.joint_test.clone().expect("joint test requested"));
        fits.push(fit);
        residuals.push((format!("v_{name}"), v));
    }
    Ok((fits, tests, residuals))
}

fn fit_cf(data: &PairDataset, opts: &CfOptions, stage: SecondStage) -> Result<ControlFunctionFit> {
    if data.regressor_columns().is_empty() {
        return Err(Error::config("control function needs at least one regressor"));
    }
    if data.instrument_columns().is_empty() {
        return Err(Error::config("control function needs at least one instrument"));
    }
    let n = data.n_rows();
    let (x1_names, x1) = assemble_design(
        &[data.instrument_columns(), data.control_columns()],
        true,
        n,
    );
    let (first_stage, first_stage_tests, residuals) = first_stages(data, &x1_names, &x1)?;
    let mut notes = Vec::new();
    let weak_instruments = first_stage_tests.iter().any(|t| t.statistic < 1.0);
    if weak_instruments {
        notes.push("weak first stage: an instrument F statistic is below 1".to_string());
    }

    let (x2_names, x2) = assemble_design(
        &[
            data.regressor_columns(),
            data.control_columns(),
            &residuals,
        ],
        true,
        n,
    );
    let second_stage = match stage {
        SecondStage::Linear => ols_fit(&x2_names, &x2, data.outcome(), data.clusters(), None)?,
        SecondStage::Poisson => {
            poisson_fit(&x2_names, &x2, data.outcome(), data.clusters(), None)?
        }
    };

    let (two_stage, max_route_gap) = match stage {
        SecondStage::Linear => {
            let fitted: Vec<(String, Vec<f64>)> = data
                .regressor_columns()
                .iter()
                .zip(&residuals)
                .map(|((name, w), (_, v))| {
                    (
                        name.clone(),
                        w.iter().zip(v).map(|(a, b)| a - b).collect(),
                    )
                })
                .collect();
            let (xh_names, xh) =
                assemble_design(&[&fitted, data.control_columns()], true, n);
            let tsls = ols_fit(&xh_names, &xh, data.outcome(), data.clusters(), None)?;
            let gap = xh_names
                .iter()
                .map(|name| {
                    (second_stage.estimate(name).unwrap() - tsls.estimate(name).unwrap()).abs()
                })
                .fold(0.0f64, f64::max);
            (Some(tsls), Some(gap))
        }
        SecondStage::Poisson => (None, None),
    };

    let rho: Vec<(String, f64, f64)> = residuals
        .iter()
        .map(|(name, _)| {
            (
                name.clone(),
                second_stage.estimate(name).unwrap(),
                second_stage.std_error(name).unwrap(),
            )
        })
        .collect();

    let average_marginal_effects = match stage {
        SecondStage::Poisson => {
            let theta = DVector::from_column_slice(&second_stage.estimates);
            let eta = &x2 * &theta;
            let mean_rate =
                eta.iter().map(|e| e.clamp(-700.0, 700.0).exp()).sum::<f64>() / n as f64;
            Some(
                second_stage
                    .estimates
                    .iter()
                    .map(|t| t * mean_rate)
                    .collect(),
            )
        }
        SecondStage::Linear => None,
    };

    let (bootstrap_se, bootstrap_failures) = if opts.bootstrap_reps > 0 {
        bootstrap(data, opts, &stage, &x1, &x2_names, &mut notes)?
    } else {
        (None, 0)
    };

    Ok(ControlFunctionFit {
        first_stage,
        first_stage_tests,
        weak_instruments,
        residual_names: residuals.into_iter().map(|(n, _)| n).collect(),
        second_stage,
        two_stage,
        max_route_gap,
        rho,
        bootstrap_se,
        bootstrap_failures,
        average_marginal_effects,
        notes,
    })
}

/// Cluster bootstrap over both stages; generated regressors are rebuilt
/// inside every replication.
fn bootstrap(
    data: &PairDataset,
    opts: &CfOptions,
    stage: &SecondStage,
    x1: &DMatrix<f64>,
    x2_names: &[String],
    notes: &mut Vec<String>,
) -> Result<(Option<Vec<f64>>, usize)> {
    let groups = cluster_groups(data.clusters());
    let g = groups.len();
    let mut draws: Vec<Vec<f64>> = Vec::with_capacity(opts.bootstrap_reps);
    let mut failures = 0usize;
    for rep in 0..opts.bootstrap_reps {
        let mut rng = substream(opts.seed, TAG_BOOTSTRAP, &[rep as u64]);
        let mut rows: Vec<usize> = Vec::with_capacity(data.n_rows());
        let mut clusters: Vec<u64> = Vec::with_capacity(data.n_rows());
        for d in 0..g {
            let pick = rng.gen_range(0..g);
            rows.extend(groups[pick].1.iter().copied());
            clusters.extend(std::iter::repeat(d as u64).take(groups[pick].1.len()));
        }
        match bootstrap_once(data, stage, x1, x2_names, &rows, &clusters) {
            Some(theta) => draws.push(theta),
            None => failures += 1,
        }
    }
    if draws.len() < 2 {
        notes.push(format!(
            "bootstrap produced {} usable replications; standard errors unavailable",
            draws.len()
        ));
        return Ok((None, failures));
    }
    let k = x2_names.len();
    let reps = draws.len() as f64;
    let mut se = vec![0.0; k];
    for (j, se_j) in se.iter_mut().enumerate() {
        let mean = draws.iter().map(|d| d[j]).sum::<f64>() / reps;
        let var = draws.iter().map(|d| (d[j] - mean).powi(2)).sum::<f64>() / (reps - 1.0);
        *se_j = var.sqrt();
    }
    if failures > 0 {
        notes.push(format!("{failures} bootstrap replications failed and were skipped"));
    }
    Ok((Some(se), failures))
}

fn bootstrap_once(
    data: &PairDataset,
    stage: &SecondStage,
    x1: &DMatrix<f64>,
    x2_names: &[String],
    rows: &[usize],
    clusters: &[u64],
) -> Option<Vec<f64>> {
    let nb = rows.len();
    let x1b = x1.select_rows(rows.iter());
    let gather = |col: &[f64]| -> Vec<f64> { rows.iter().map(|&i| col[i]).collect() };

    let mut residuals: Vec<(String, Vec<f64>)> = Vec::new();
    for (name, w) in data.regressor_columns() {
        let wb = DVector::from_vec(gather(w));
        let pi = ols_point(&x1b, &wb)?;
        let fitted = &x1b * &pi;
        residuals.push((
            format!("v_{name}"),
            wb.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect(),
        ));
    }
    let w_cols: Vec<(String, Vec<f64>)> = data
        .regressor_columns()
        .iter()
        .map(|(name, w)| (name.clone(), gather(w)))
        .collect();
    let z_cols: Vec<(String, Vec<f64>)> = data
        .control_columns()
        .iter()
        .map(|(name, z)| (name.clone(), gather(z)))
        .collect();
    let (names, x2b) = assemble_design(&[&w_cols, &z_cols, &residuals], true, nb);
    debug_assert_eq!(names, x2_names);
    let yb = gather(data.outcome());
    match stage {
        SecondStage::Linear => {
            ols_point(&x2b, &DVector::from_vec(yb)).map(|t| t.iter().copied().collect())
        }
        SecondStage::Poisson => poisson_fit(&names, &x2b, &yb, clusters, None)
            .ok()
            .map(|f| f.estimates),
    }
}

/// Linear-probability control function; identical to two-stage least
/// squares on the same design, and both routes are returned.
pub fn fit_lpm_cf(data: &PairDataset, opts: &CfOptions) -> Result<ControlFunctionFit> {
    fit_cf(data, opts, SecondStage::Linear)
}

/// Poisson control function for rare binary outcomes, with average
/// marginal effects.
pub fn fit_poisson_cf(data: &PairDataset, opts: &CfOptions) -> Result<ControlFunctionFit> {
    fit_cf(data, opts, SecondStage::Poisson)
}
