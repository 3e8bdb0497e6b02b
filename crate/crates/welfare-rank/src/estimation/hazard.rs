//! Discrete-hazard calibration of hiring from application sequences.
//!
//! Each application is one Bernoulli trial: the hire probability is a
//! logistic function of the match score plus optional "weariness" shifts
//! for how deep into its sequence each side is. Completed spells end in a
//! hire; censored spells just stop.

use super::data::assemble_design;
use super::inference::{logit_fit, FitResult};
use crate::error::{Error, Result};
use crate::scorers::CalibrationCoefficients;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One application within a seeker's chronological sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardRow {
    pub seeker_id: u64,
    /// 1-based position in the seeker's application sequence.
    pub application_rank: u32,
    /// 1-based position in the vacancy's applicant queue, when tracked.
    pub vacancy_rank: Option<u32>,
    pub score: f64,
    pub hired: bool,
}

/// Which weariness shifts enter the hazard index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankEffects {
    /// Score and intercept only; identical to a pooled logit.
    None,
    /// Dummies for the seeker-side application rank, rank 1 as baseline.
    ApplicationRank,
    /// Seeker-side and vacancy-side rank dummies, both baselined at 1.
    TwoSided,
}

/// Application sequences validated for chronological order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardDataset {
    rows: Vec<HazardRow>,
}

impl HazardDataset {
    /// Rows must arrive grouped by seeker with strictly increasing ranks,
    /// and a hire can only close a sequence.
    pub fn new(rows: Vec<HazardRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::schema("hazard dataset has no applications"));
        }
        let mut last: BTreeMap<u64, (u32, bool)> = BTreeMap::new();
        for (i, row) in rows.iter().enumerate() {
            if !row.score.is_finite() {
                return Err(Error::schema(format!("score at row {i} is not finite")));
            }
            if row.application_rank == 0 || row.vacancy_rank == Some(0) {
                return Err(Error::schema(format!("ranks are 1-based; row {i} has 0")));
            }
            match last.get(&row.seeker_id) {
                Some(&(_, true)) => {
                    return Err(Error::schema(format!(
                        "seeker {} applies again after a hire at row {i}",
                        row.seeker_id
                    )));
                }
                Some(&(prev, false)) if row.application_rank <= prev => {
                    return Err(Error::schema(format!(
                        "seeker {} ranks are not strictly increasing at row {i}",
                        row.seeker_id
                    )));
                }
                _ => {}
            }
            last.insert(row.seeker_id, (row.application_rank, row.hired));
        }
        Ok(HazardDataset { rows })
    }

    pub fn rows(&self) -> &[HazardRow] {
        &self.rows
    }

    pub fn n_hires(&self) -> usize {
        self.rows.iter().filter(|r| r.hired).count()
    }
}

/// A fitted hazard: logistic in the score with optional rank shifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardFit {
    pub mode: RankEffects,
    pub slope: f64,
    pub slope_se: f64,
    /// Baseline (rank 1) log-odds at score zero.
    pub intercept: f64,
    /// (rank level, shift) for observed seeker-side levels above 1.
    pub application_rank_effects: Vec<(u32, f64)>,
    /// (rank level, shift) for observed vacancy-side levels above 1.
    pub vacancy_rank_effects: Vec<(u32, f64)>,
    pub log_likelihood: f64,
    pub aic: f64,
    pub fit: FitResult,
    pub notes: Vec<String>,
}

impl HazardFit {
    /// Score-to-probability map at baseline ranks.
    pub fn calibration(&self) -> Result<CalibrationCoefficients> {
        CalibrationCoefficients::new(self.intercept, self.slope)
    }
}

fn rank_dummies(
    prefix: &str,
    levels: impl Iterator<Item = u32> + Clone,
    n: usize,
    notes: &mut Vec<String>,
) -> Vec<(String, Vec<f64>, u32)> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for level in levels.clone() {
        *counts.entry(level).or_default() += 1;
    }
    let max = counts.keys().max().copied().unwrap_or(1);
    let mut dummies = Vec::new();
    for level in 2..=max {
        if !counts.contains_key(&level) {
            notes.push(format!(
                "{prefix} rank {level} has no observations; dummy dropped"
            ));
            continue;
        }
        let mut col = vec![0.0; n];
        for (i, l) in levels.clone().enumerate() {
            if l == level {
                col[i] = 1.0;
            }
        }
        dummies.push((format!("{prefix}_rank_{level}"), col, level));
    }
    dummies
}

/// Pooled-logit MLE of the discrete hazard, clustered by seeker.
pub fn fit_hazard_calibration(data: &HazardDataset, mode: RankEffects) -> Result<HazardFit> {
    let rows = data.rows();
    let n = rows.len();
    if matches!(mode, RankEffects::TwoSided) && rows.iter().any(|r| r.vacancy_rank.is_none()) {
        return Err(Error::schema(
            "two-sided rank effects need a vacancy rank on every row",
        ));
    }

    let mut notes = Vec::new();
    let mut columns: Vec<(String, Vec<f64>)> =
        vec![("score".into(), rows.iter().map(|r| r.score).collect())];
    let mut app_levels = Vec::new();
    let mut vac_levels = Vec::new();
    if !matches!(mode, RankEffects::None) {
        for (name, col, level) in rank_dummies(
            "application",
            rows.iter().map(|r| r.application_rank),
            n,
            &mut notes,
        ) {
            columns.push((name, col));
            app_levels.push(level);
        }
    }
    if matches!(mode, RankEffects::TwoSided) {
        for (name, col, level) in rank_dummies(
            "vacancy",
            rows.iter().map(|r| r.vacancy_rank.expect("validated above")),
            n,
            &mut notes,
        ) {
            columns.push((name, col));
            vac_levels.push(level);
        }
    }

    let (names, x) = assemble_design(&[&columns], true, n);
    let y: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r.hired))).collect();
    let clusters: Vec<u64> = rows.iter().map(|r| r.seeker_id).collect();
    let mut fit = logit_fit(&names, &x, &y, &clusters, None)?;
    fit.notes.extend(notes.iter().cloned());

    let log_likelihood = fit
        .convergence
        .log_likelihood
        .expect("logit reports its likelihood");
    let aic = 2.0 * names.len() as f64 - 2.0 * log_likelihood;
    let effects = |prefix: &str, levels: &[u32]| -> Vec<(u32, f64)> {
        levels
            .iter()
            .map(|&l| {
                (
                    l,
                    fit.estimate(&format!("{prefix}_rank_{l}"))
                        .expect("dummy was included"),
                )
            })
            .collect()
    };
    Ok(HazardFit {
        mode,
        slope: fit.estimate("score").expect("score column present"),
        slope_se: fit.std_error("score").expect("score column present"),
        intercept: fit.estimate("const").expect("intercept present"),
        application_rank_effects: effects("application", &app_levels),
        vacancy_rank_effects: effects("vacancy", &vac_levels),
        log_likelihood,
        aic,
        fit,
        notes,
    })
}
