//! Steps 1-3 of the welfare pipeline: predict hiring conditional on
//! application, predict application, and combine the two into the
//! per-pair welfare index.

use crate::error::{Error, Result};
use crate::estimation::{assemble_design, logit_fit, FitResult};
use crate::model::logistic_cdf;
use crate::sim::InteractionLog;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Predicted probabilities are kept strictly inside (0, 1) so that
/// downstream logs and the welfare index stay finite.
const P_EPS: f64 = 1e-12;

/// Standardization record for one score column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTransform {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

/// Per-column affine transforms that standardize scores to mean 0, sd 1
/// over the estimation sample. Kept alongside every fit so the same
/// transform can be replayed on held-out pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    transforms: Vec<ScoreTransform>,
}

impl Standardizer {
    /// Transforms from masked rows of a raw score matrix. Population
    /// moments; a column that is constant over the sample cannot be
    /// standardized and is reported as a numeric error.
    pub(super) fn fit_masked(raw: &DMatrix<f64>, mask: &[bool], names: &[String]) -> Result<Self> {
        let n = mask.iter().filter(|m| **m).count();
        if n < 2 {
            return Err(Error::schema(format!(
                "standardization needs at least 2 rows, got {n}"
            )));
        }
        let mut transforms = Vec::with_capacity(names.len());
        for (j, name) in names.iter().enumerate() {
            let mut sum = 0.0;
            for i in 0..raw.nrows() {
                if mask[i] {
                    sum += raw[(i, j)];
                }
            }
            let mean = sum / n as f64;
            let mut ss = 0.0;
            for i in 0..raw.nrows() {
                if mask[i] {
                    let d = raw[(i, j)] - mean;
                    ss += d * d;
                }
            }
            let sd = (ss / n as f64).sqrt();
            if sd < 1e-12 {
                return Err(Error::numeric(format!(
                    "score column '{name}' is constant over the estimation sample"
                )));
            }
            transforms.push(ScoreTransform {
                name: name.clone(),
                mean,
                sd,
            });
        }
        Ok(Standardizer { transforms })
    }

    /// Transforms with the whole log as the estimation sample.
    pub fn from_log(log: &InteractionLog, columns: &[String]) -> Result<Self> {
        let ex = Extracted::from_log(log, columns)?;
        Self::fit_masked(&ex.raw, &vec![true; ex.raw.nrows()], &ex.col_names)
    }

    pub fn transforms(&self) -> &[ScoreTransform] {
        &self.transforms
    }

    pub(super) fn z(&self, j: usize, raw: f64) -> f64 {
        (raw - self.transforms[j].mean) / self.transforms[j].sd
    }

    /// Standardizes one raw score vector, in transform order.
    pub fn apply_row(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().enumerate().map(|(j, &v)| self.z(j, v)).collect()
    }
}

/// Interaction rows unpacked into column form for repeated fitting.
pub(super) struct Extracted {
    pub col_names: Vec<String>,
    /// Raw scores, one row per interaction, columns in `col_names` order.
    pub raw: DMatrix<f64>,
    pub seeker: Vec<u64>,
    pub arm: Vec<u32>,
    pub slot: Vec<u32>,
    pub applied: Vec<bool>,
    pub hired: Vec<bool>,
    pub max_slot: u32,
}

impl Extracted {
    pub(super) fn from_log(log: &InteractionLog, columns: &[String]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::config("need at least one score column"));
        }
        if log.rows.is_empty() {
            return Err(Error::schema("interaction log has no rows"));
        }
        let idx: Vec<usize> = columns
            .iter()
            .map(|c| log.score_index(c))
            .collect::<Result<_>>()?;
        let n = log.rows.len();
        let mut raw = DMatrix::zeros(n, idx.len());
        for (i, row) in log.rows.iter().enumerate() {
            for (j, &c) in idx.iter().enumerate() {
                raw[(i, j)] = row.scores[c];
            }
        }
        Ok(Extracted {
            col_names: columns.to_vec(),
            raw,
            seeker: log.rows.iter().map(|r| r.seeker_id).collect(),
            arm: log.rows.iter().map(|r| r.arm).collect(),
            slot: log.rows.iter().map(|r| r.slot).collect(),
            applied: log.rows.iter().map(|r| r.applied).collect(),
            hired: log.rows.iter().map(|r| r.hired).collect(),
            max_slot: log.rows.iter().map(|r| r.slot).max().unwrap_or(1),
        })
    }
}

/// A fitted logistic probability model over standardized scores with
/// optional display-position effects (position 1 is the baseline).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbModel {
    outcome: String,
    score_names: Vec<String>,
    score_coefs: Vec<f64>,
    slot_levels: Vec<u32>,
    slot_coefs: Vec<f64>,
    intercept: f64,
    /// Set when the outcome was constant over the sample; the model then
    /// predicts that rate everywhere.
    constant: Option<f64>,
    pub fit: Option<FitResult>,
    pub notes: Vec<String>,
}

impl ProbModel {
    pub fn outcome(&self) -> &str {
        &self.outcome
    }

    pub fn score_names(&self) -> &[String] {
        &self.score_names
    }

    pub fn score_coefficient(&self, name: &str) -> Option<f64> {
        self.score_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.score_coefs[i])
    }

    pub fn is_constant(&self) -> bool {
        self.constant.is_some()
    }

    /// Linear index at standardized scores `z` and display position `slot`.
    /// Positions without a fitted effect (the baseline and any level not
    /// observed during estimation) contribute nothing.
    pub fn index(&self, z: &[f64], slot: u32) -> f64 {
        let mut eta = self.intercept;
        for (c, v) in self.score_coefs.iter().zip(z) {
            eta += c * v;
        }
        if let Some(i) = self.slot_levels.iter().position(|&l| l == slot) {
            eta += self.slot_coefs[i];
        }
        eta
    }

    /// Predicted probability, clamped strictly inside (0, 1).
    pub fn predict(&self, z: &[f64], slot: u32) -> f64 {
        match self.constant {
            Some(rate) => rate.clamp(P_EPS, 1.0 - P_EPS),
            None => logistic_cdf(self.index(z, slot)).clamp(P_EPS, 1.0 - P_EPS),
        }
    }
}

pub(super) enum StepOutcome {
    /// Hired, fit on the applied subsample.
    HiredGivenApplied,
    /// Applied, fit on all displayed rows.
    Applied,
}

/// Shared core of Steps 1 and 2: a logit of the step outcome on
/// standardized scores, display-position dummies (when enabled) and a
/// constant, clustered by seeker.
pub(super) fn fit_step(
    ex: &Extracted,
    std: &Standardizer,
    mask: &[bool],
    outcome: StepOutcome,
    slot_controls: bool,
) -> Result<ProbModel> {
    let (rows, y, name): (Vec<usize>, Vec<f64>, &str) = match outcome {
        StepOutcome::HiredGivenApplied => {
            let rows: Vec<usize> = (0..ex.raw.nrows())
                .filter(|&i| mask[i] && ex.applied[i])
                .collect();
            if rows.len() < 30 {
                return Err(Error::schema(format!(
                    "hiring step needs at least 30 applied rows, got {}",
                    rows.len()
                )));
            }
            let y: Vec<f64> = rows.iter().map(|&i| f64::from(u8::from(ex.hired[i]))).collect();
            if y.iter().all(|&v| v == 0.0) {
                return Err(Error::domain(
                    "hiring outcome is degenerate: no hires among applied rows",
                ));
            }
            (rows, y, "hired")
        }
        StepOutcome::Applied => {
            let rows: Vec<usize> = (0..ex.raw.nrows()).filter(|&i| mask[i]).collect();
            let y: Vec<f64> = rows.iter().map(|&i| f64::from(u8::from(ex.applied[i]))).collect();
            let applications = y.iter().filter(|&&v| v == 1.0).count();
            if applications < 30 {
                return Err(Error::schema(format!(
                    "application step needs at least 30 applications, got {applications}"
                )));
            }
            (rows, y, "applied")
        }
    };

    let score_names = ex.col_names.clone();
    if y.iter().all(|&v| v == 1.0) {
        return Ok(ProbModel {
            outcome: name.into(),
            score_coefs: vec![0.0; score_names.len()],
            score_names,
            slot_levels: vec![],
            slot_coefs: vec![],
            intercept: 0.0,
            constant: Some(1.0),
            fit: None,
            notes: vec![format!("{name} is constant over the sample; intercept-only model")],
        });
    }

    let n = rows.len();
    let mut columns: Vec<(String, Vec<f64>)> = score_names
        .iter()
        .enumerate()
        .map(|(j, c)| {
            (
                c.clone(),
                rows.iter().map(|&i| std.z(j, ex.raw[(i, j)])).collect(),
            )
        })
        .collect();
    let mut slot_levels = Vec::new();
    if slot_controls {
        for level in 2..=ex.max_slot {
            let col: Vec<f64> = rows
                .iter()
                .map(|&i| f64::from(u8::from(ex.slot[i] == level)))
                .collect();
            if col.iter().any(|&v| v == 1.0) {
                columns.push((format!("slot_{level}"), col));
                slot_levels.push(level);
            }
        }
    }
    let (names, x) = assemble_design(&[&columns], true, n);
    let clusters: Vec<u64> = rows.iter().map(|&i| ex.seeker[i]).collect();
    let fit = logit_fit(&names, &x, &y, &clusters, None)?;

    let k = score_names.len();
    Ok(ProbModel {
        outcome: name.into(),
        score_coefs: fit.estimates[..k].to_vec(),
        score_names,
        slot_coefs: fit.estimates[k..k + slot_levels.len()].to_vec(),
        slot_levels,
        intercept: *fit.estimates.last().expect("design has a constant"),
        constant: None,
        notes: fit.notes.clone(),
        fit: Some(fit),
    })
}

/// Step 1: hiring conditional on application, fit on the applied rows of
/// the log, using `std` transforms fit on the estimation sample.
pub fn fit_hire_given_apply(
    log: &InteractionLog,
    columns: &[String],
    std: &Standardizer,
    slot_controls: bool,
) -> Result<ProbModel> {
    let ex = Extracted::from_log(log, columns)?;
    fit_step(
        &ex,
        std,
        &vec![true; ex.raw.nrows()],
        StepOutcome::HiredGivenApplied,
        slot_controls,
    )
}

/// Step 2: application probability on the full sample of displayed pairs.
pub fn fit_apply(
    log: &InteractionLog,
    columns: &[String],
    std: &Standardizer,
    slot_controls: bool,
) -> Result<ProbModel> {
    let ex = Extracted::from_log(log, columns)?;
    fit_step(
        &ex,
        std,
        &vec![true; ex.raw.nrows()],
        StepOutcome::Applied,
        slot_controls,
    )
}

/// Step 3: the per-pair welfare index `p * (-log(1 - p_a))` at unit
/// taste-shock scale.
pub fn gamma_hat(p_hat: f64, pa_hat: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(Error::domain(format!(
            "hiring probability must lie in [0, 1], got {p_hat}"
        )));
    }
    if !(0.0..1.0).contains(&pa_hat) {
        return Err(Error::domain(format!(
            "application probability must lie in [0, 1), got {pa_hat}"
        )));
    }
    Ok(p_hat * -(-pa_hat).ln_1p())
}

/// [`gamma_hat`] rescaled by an estimated taste-shock scale, for
/// sensitivity analysis; the default pipeline normalizes the scale to 1.
pub fn gamma_hat_scaled(p_hat: f64, pa_hat: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!(
            "taste-shock scale must be > 0, got {sigma}"
        )));
    }
    Ok(sigma * gamma_hat(p_hat, pa_hat)?)
}
