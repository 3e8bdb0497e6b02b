//! Pair-level regression dataset and its bridge from interaction logs.

use crate::error::{Error, Result};
use crate::sim::InteractionLog;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// One outcome plus three named column groups at the seeker-vacancy pair
/// level: regressors `W`, instruments `T` (typically arm dummies with the
/// reference arm omitted), and controls `Z` (typically slot dummies with
/// the top slot omitted). Every row carries a cluster id; all inference
/// downstream clusters on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDataset {
    outcome_name: String,
    outcome: Vec<f64>,
    regressors: Vec<(String, Vec<f64>)>,
    instruments: Vec<(String, Vec<f64>)>,
    controls: Vec<(String, Vec<f64>)>,
    clusters: Vec<u64>,
    seeker_ids: Option<Vec<u64>>,
    vacancy_ids: Option<Vec<u64>>,
}

/// Incremental constructor for [`PairDataset`]; validates on `build`.
#[derive(Debug, Clone, Default)]
pub struct PairDatasetBuilder {
    outcome_name: String,
    outcome: Vec<f64>,
    regressors: Vec<(String, Vec<f64>)>,
    instruments: Vec<(String, Vec<f64>)>,
    controls: Vec<(String, Vec<f64>)>,
    clusters: Vec<u64>,
    seeker_ids: Option<Vec<u64>>,
    vacancy_ids: Option<Vec<u64>>,
}

impl PairDatasetBuilder {
    pub fn regressor(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        self.regressors.push((name.into(), values));
        self
    }

    pub fn instrument(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        self.instruments.push((name.into(), values));
        self
    }

    pub fn control(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        self.controls.push((name.into(), values));
        self
    }

    pub fn clusters(mut self, ids: Vec<u64>) -> Self {
        self.clusters = ids;
        self
    }

    pub fn pair_ids(mut self, seekers: Vec<u64>, vacancies: Vec<u64>) -> Self {
        self.seeker_ids = Some(seekers);
        self.vacancy_ids = Some(vacancies);
        self
    }

    pub fn build(self) -> Result<PairDataset> {
        let n = self.outcome.len();
        if n == 0 {
            return Err(Error::schema("dataset has no rows"));
        }
        if self.clusters.len() != n {
            return Err(Error::schema(format!(
                "cluster ids must cover every row: {} ids for {n} rows",
                self.clusters.len()
            )));
        }
        for ids in [&self.seeker_ids, &self.vacancy_ids].into_iter().flatten() {
            if ids.len() != n {
                return Err(Error::schema(format!(
                    "pair ids must cover every row: {} ids for {n} rows",
                    ids.len()
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        let groups = [
            ("regressor", &self.regressors),
            ("instrument", &self.instruments),
            ("control", &self.controls),
        ];
        for (kind, cols) in groups {
            for (name, values) in cols.iter() {
                if values.len() != n {
                    return Err(Error::schema(format!(
                        "{kind} column '{name}' has {} values for {n} rows",
                        values.len()
                    )));
                }
                if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::schema(format!(
                        "{kind} column '{name}' is not finite at row {bad}"
                    )));
                }
                if name == "const" || !seen.insert(name.clone()) {
                    return Err(Error::schema(format!(
                        "column name '{name}' is duplicated or reserved"
                    )));
                }
            }
        }
        if let Some(bad) = self.outcome.iter().position(|v| !v.is_finite()) {
            return Err(Error::schema(format!(
                "outcome '{}' is not finite at row {bad}",
                self.outcome_name
            )));
        }
        Ok(PairDataset {
            outcome_name: self.outcome_name,
            outcome: self.outcome,
            regressors: self.regressors,
            instruments: self.instruments,
            controls: self.controls,
            clusters: self.clusters,
            seeker_ids: self.seeker_ids,
            vacancy_ids: self.vacancy_ids,
        })
    }
}

impl PairDataset {
    pub fn builder(outcome_name: impl Into<String>, outcome: Vec<f64>) -> PairDatasetBuilder {
        PairDatasetBuilder {
            outcome_name: outcome_name.into(),
            outcome,
            ..PairDatasetBuilder::default()
        }
    }

    pub fn n_rows(&self) -> usize {
        self.outcome.len()
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome_name
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn clusters(&self) -> &[u64] {
        &self.clusters
    }

    pub fn seeker_ids(&self) -> Option<&[u64]> {
        self.seeker_ids.as_deref()
    }

    pub fn vacancy_ids(&self) -> Option<&[u64]> {
        self.vacancy_ids.as_deref()
    }

    pub fn regressor_names(&self) -> Vec<String> {
        self.regressors.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn instrument_names(&self) -> Vec<String> {
        self.instruments.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn control_names(&self) -> Vec<String> {
        self.controls.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.regressors
            .iter()
            .chain(&self.instruments)
            .chain(&self.controls)
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub(crate) fn regressor_columns(&self) -> &[(String, Vec<f64>)] {
        &self.regressors
    }

    pub(crate) fn instrument_columns(&self) -> &[(String, Vec<f64>)] {
        &self.instruments
    }

    pub(crate) fn control_columns(&self) -> &[(String, Vec<f64>)] {
        &self.controls
    }
}

/// Stacks named columns (plus an optional trailing intercept) into a dense
/// design matrix.
pub(crate) fn assemble_design(
    groups: &[&[(String, Vec<f64>)]],
    add_const: bool,
    n: usize,
) -> (Vec<String>, DMatrix<f64>) {
    let mut names = Vec::new();
    let k: usize = groups.iter().map(|g| g.len()).sum::<usize>() + usize::from(add_const);
    let mut x = DMatrix::zeros(n, k);
    let mut j = 0;
    for group in groups {
        for (name, values) in group.iter() {
            names.push(name.clone());
            for (i, v) in values.iter().enumerate() {
                x[(i, j)] = *v;
            }
            j += 1;
        }
    }
    if add_const {
        names.push("const".to_string());
        for i in 0..n {
            x[(i, j)] = 1.0;
        }
    }
    (names, x)
}

/// Which interaction outcome becomes the dependent variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Clicked,
    Applied,
    Hired,
}

impl OutcomeKind {
    pub fn name(self) -> &'static str {
        match self {
            OutcomeKind::Clicked => "clicked",
            OutcomeKind::Applied => "applied",
            OutcomeKind::Hired => "hired",
        }
    }
}

/// A regressor drawn from an interaction log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogColumn {
    /// A synthesized score column, by name.
    Score(String),
    /// Reciprocal of the true hiring probability.
    InverseTrueP,
    TrueU,
    TrueP,
}

/// Design choices for [`dataset_from_log`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogDesign {
    pub outcome: OutcomeKind,
    pub regressors: Vec<LogColumn>,
    /// Add one dummy instrument per arm, omitting the first arm.
    pub arm_instruments: bool,
    /// Add one dummy control per display slot, omitting slot 1.
    pub slot_controls: bool,
}

/// Flattens an interaction log into a regression-ready dataset, clustered
/// by seeker.
pub fn dataset_from_log(log: &InteractionLog, design: &LogDesign) -> Result<PairDataset> {
    if log.rows.is_empty() {
        return Err(Error::schema("interaction log has no rows"));
    }
    let n = log.rows.len();
    let outcome = log
        .rows
        .iter()
        .map(|r| match design.outcome {
            OutcomeKind::Clicked => f64::from(u8::from(r.clicked)),
            OutcomeKind::Applied => f64::from(u8::from(r.applied)),
            OutcomeKind::Hired => f64::from(u8::from(r.hired)),
        })
        .collect();
    let mut b = PairDataset::builder(design.outcome.name(), outcome)
        .clusters(log.rows.iter().map(|r| r.seeker_id).collect())
        .pair_ids(
            log.rows.iter().map(|r| r.seeker_id).collect(),
            log.rows.iter().map(|r| r.vacancy_id).collect(),
        );
    for col in &design.regressors {
        let (name, values): (String, Vec<f64>) = match col {
            LogColumn::Score(name) => {
                let idx = log.score_index(name)?;
                (
                    name.clone(),
                    log.rows.iter().map(|r| r.scores[idx]).collect(),
                )
            }
            // True probabilities are clipped away from zero upstream, so the
            // reciprocal is always finite.
            LogColumn::InverseTrueP => (
                "inv_p".into(),
                log.rows.iter().map(|r| 1.0 / r.true_p).collect(),
            ),
            LogColumn::TrueU => ("true_u".into(), log.rows.iter().map(|r| r.true_u).collect()),
            LogColumn::TrueP => ("true_p".into(), log.rows.iter().map(|r| r.true_p).collect()),
        };
        b = b.regressor(name, values);
    }
    if design.arm_instruments {
        if log.arm_names.len() < 2 {
            return Err(Error::schema(
                "arm instruments need at least two arms; the first is the reference",
            ));
        }
        for (a, name) in log.arm_names.iter().enumerate().skip(1) {
            let values = log
                .rows
                .iter()
                .map(|r| f64::from(u8::from(r.arm as usize == a)))
                .collect();
            b = b.instrument(format!("arm_{name}"), values);
        }
    }
    if design.slot_controls {
        let max_slot = log.rows.iter().map(|r| r.slot).max().unwrap_or(1);
        for s in 2..=max_slot {
            let values = log
                .rows
                .iter()
                .map(|r| f64::from(u8::from(r.slot == s)))
                .collect();
            b = b.control(format!("slot_{s}"), values);
        }
    }
    debug_assert_eq!(n, log.rows.len());
    b.build()
}
