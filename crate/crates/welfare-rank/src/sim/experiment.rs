//! The randomized beta-test harness: noisy score columns per algorithm,
//! per-arm top-list display with availability dropout, and the
//! click/application/hire interaction model.
//!
//! One taste shock per displayed (seeker, vacancy) pair drives both the
//! click and the application decision; the click threshold sits a
//! nonnegative offset below the application threshold, so applications are
//! always a subset of clicks. Hires are Bernoulli in the true hiring
//! probability, conditional on applying.

use std::collections::{BTreeMap, HashSet};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{surplus, ModelParams};
use crate::scorers::{
    consideration_set, mix_rank, rank_top_k, sort_desc_stable_by_id, ConsiderationCutoffs,
    MixFraction, MixOptions,
};

use super::assign::{AssignmentTable, ExperimentDesign};
use super::market::Market;
use super::rng::{draw_logistic, draw_standard_normal, substream, TAG_EXPERIMENT, TAG_SCORE};

/// Ground-truth signal a noisy score column is anchored to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreBase {
    /// The true match utility U.
    TrueU,
    /// The log-odds of the true hiring probability.
    TrueLogitP,
    /// No anchor; the column is surplus weight times Delta plus noise.
    Zero,
}

/// How one score column is synthesized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    /// `base + surplus_weight * Delta + Normal(0, noise_sd)`, drawn on a
    /// per-(column, seeker) substream.
    Noisy {
        base: ScoreBase,
        surplus_weight: f64,
        noise_sd: f64,
    },
    /// Deterministic pool-wide ordinal mix: keep the top `ceil(keep_fraction
    /// * pool)` by the hiring column, re-rank the kept block by the utility
    /// column, and score every vacancy by minus its final position.
    OrdinalMix {
        p_column: String,
        u_column: String,
        keep_fraction: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// The six-column layout used throughout the synthetic study: an agency
/// relevance score, two hiring predictors of different quality, an
/// application-propensity proxy, an ordinal mix of the better hiring
/// predictor with the agency score, and a noisier external predictor.
pub fn benchmark_score_columns() -> Vec<ScoreColumnSpec> {
    let noisy = |name: &str, base: ScoreBase, w: f64, sd: f64| ScoreColumnSpec {
        name: name.into(),
        kind: ColumnKind::Noisy {
            base,
            surplus_weight: w,
            noise_sd: sd,
        },
    };
    vec![
        noisy("u", ScoreBase::TrueU, 0.0, 0.8),
        noisy("v0", ScoreBase::TrueLogitP, 0.0, 1.2),
        noisy("v2", ScoreBase::TrueLogitP, 0.45, 0.6),
        noisy("app", ScoreBase::Zero, 1.0, 1.0),
        ScoreColumnSpec {
            name: "mix".into(),
            kind: ColumnKind::OrdinalMix {
                p_column: "v2".into(),
                u_column: "u".into(),
                keep_fraction: 0.5,
            },
        },
        noisy("boost", ScoreBase::TrueLogitP, 0.0, 1.6),
    ]
}

/// Named score matrices over (seeker, vacancy) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    names: Vec<String>,
    matrices: Vec<DMatrix<f64>>,
}

impl ScoreSet {
    /// Wraps externally produced score matrices. All matrices must share
    /// the same (seeker, vacancy) shape and hold finite values.
    pub fn new(names: Vec<String>, matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        if names.is_empty() || names.len() != matrices.len() {
            return Err(Error::schema(format!(
                "score set needs one matrix per name, got {} names and {} matrices",
                names.len(),
                matrices.len()
            )));
        }
        let shape = matrices[0].shape();
        for (name, m) in names.iter().zip(&matrices) {
            if m.shape() != shape {
                return Err(Error::schema(format!(
                    "score column {name} has shape {:?}, expected {shape:?}",
                    m.shape()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::schema(format!("score column {name} holds non-finite values")));
            }
        }
        Ok(ScoreSet { names, matrices })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<&DMatrix<f64>> {
        self.index_of(name)
            .map(|i| &self.matrices[i])
            .ok_or_else(|| Error::schema(format!("no score column named {name}")))
    }

    /// All column values at one pair, in declaration order.
    pub fn values_at(&self, seeker: usize, vacancy: usize) -> Vec<f64> {
        self.matrices.iter().map(|m| m[(seeker, vacancy)]).collect()
    }

    /// `(vacancy id, score)` pairs over the whole pool of one seeker.
    pub fn pairs(&self, name: &str, seeker: usize) -> Result<Vec<(u64, f64)>> {
        let m = self.column(name)?;
        Ok((0..m.ncols()).map(|j| (j as u64, m[(seeker, j)])).collect())
    }
}

/// Builds score columns for every pair in the market. Noisy columns draw
/// from per-(column, seeker) substreams; ordinal mixes are deterministic
/// functions of columns declared before them.
pub fn synthesize_score_columns(
    market: &Market,
    specs: &[ScoreColumnSpec],
    seed: u64,
) -> Result<ScoreSet> {
    if specs.is_empty() {
        return Err(Error::config("need at least one score column"));
    }
    let mut seen: Vec<&str> = Vec::new();
    for spec in specs {
        if spec.name.is_empty() {
            return Err(Error::config("score column names must be nonempty"));
        }
        if seen.contains(&spec.name.as_str()) {
            return Err(Error::config(format!("duplicate score column {}", spec.name)));
        }
        match &spec.kind {
            ColumnKind::Noisy {
                surplus_weight,
                noise_sd,
                ..
            } => {
                if !(*noise_sd >= 0.0) || !noise_sd.is_finite() || !surplus_weight.is_finite() {
                    return Err(Error::config(format!(
                        "column {}: noise_sd must be >= 0 and weights finite",
                        spec.name
                    )));
                }
            }
            ColumnKind::OrdinalMix {
                p_column,
                u_column,
                keep_fraction,
            } => {
                if !(*keep_fraction > 0.0 && *keep_fraction <= 1.0) {
                    return Err(Error::config(format!(
                        "column {}: keep_fraction must lie in (0, 1], got {keep_fraction}",
                        spec.name
                    )));
                }
                for dep in [p_column, u_column] {
                    if !seen.contains(&dep.as_str()) {
                        return Err(Error::config(format!(
                            "column {} references {dep}, which is not declared before it",
                            spec.name
                        )));
                    }
                }
            }
        }
        seen.push(&spec.name);
    }

    let (ns, nv) = (market.n_seekers(), market.n_vacancies());
    let mut names = Vec::with_capacity(specs.len());
    let mut matrices: Vec<DMatrix<f64>> = Vec::with_capacity(specs.len());
    for (ci, spec) in specs.iter().enumerate() {
        let matrix = match &spec.kind {
            ColumnKind::Noisy {
                base,
                surplus_weight,
                noise_sd,
            } => {
                let rows: Vec<Vec<f64>> = (0..ns)
                    .into_par_iter()
                    .map(|i| {
                        let mut rng = substream(seed, TAG_SCORE, &[ci as u64, i as u64]);
                        (0..nv)
                            .map(|j| {
                                let anchor = match base {
                                    ScoreBase::TrueU => market.true_u[(i, j)],
                                    ScoreBase::TrueLogitP => {
                                        let p = market.true_p[(i, j)];
                                        (p / (1.0 - p)).ln()
                                    }
                                    ScoreBase::Zero => 0.0,
                                };
                                anchor
                                    + surplus_weight * market.surplus_at(i, j)
                                    + noise_sd * draw_standard_normal(&mut rng)
                            })
                            .collect()
                    })
                    .collect();
                DMatrix::from_row_iterator(ns, nv, rows.into_iter().flatten())
            }
            ColumnKind::OrdinalMix {
                p_column,
                u_column,
                keep_fraction,
            } => {
                let pi = names.iter().position(|n| n == p_column).expect("validated");
                let ui = names.iter().position(|n| n == u_column).expect("validated");
                let keep = ((keep_fraction * nv as f64).ceil() as usize).min(nv);
                let mut m = DMatrix::zeros(ns, nv);
                for i in 0..ns {
                    let mut by_p: Vec<(u64, f64)> =
                        (0..nv).map(|j| (j as u64, matrices[pi][(i, j)])).collect();
                    sort_desc_stable_by_id(&mut by_p);
                    let (kept, rest) = by_p.split_at(keep);
                    let mut kept: Vec<(u64, f64)> = kept
                        .iter()
                        .map(|&(id, _)| (id, matrices[ui][(i, id as usize)]))
                        .collect();
                    sort_desc_stable_by_id(&mut kept);
                    for (pos, (id, _)) in kept.iter().chain(rest.iter()).enumerate() {
                        m[(i, *id as usize)] = -(pos as f64);
                    }
                }
                m
            }
        };
        names.push(spec.name.clone());
        matrices.push(matrix);
    }
    Ok(ScoreSet { names, matrices })
}

/// A ranking algorithm an arm can run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArmScorer {
    /// Rank the pool by one score column, descending, ties by vacancy id.
    Column { column: String },
    /// Build the consideration set from the utility and hiring rankings,
    /// then apply the ordinal mix with the given preselection weight.
    ConsiderationMix {
        p_column: String,
        u_column: String,
        fraction: MixFraction,
        #[serde(default)]
        cutoffs: ConsiderationCutoffs,
        #[serde(default = "default_preselect")]
        preselect: usize,
    },
}

fn default_preselect() -> usize {
    15
}

impl ArmScorer {
    fn columns(&self) -> Vec<&str> {
        match self {
            ArmScorer::Column { column } => vec![column],
            ArmScorer::ConsiderationMix {
                p_column, u_column, ..
            } => vec![p_column, u_column],
        }
    }
}

/// Named scorers arms can reference.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScorerRegistry {
    entries: BTreeMap<String, ArmScorer>,
}

impl ScorerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, scorer: ArmScorer) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(Error::config(format!("scorer {name} is already registered")));
        }
        self.entries.insert(name.into(), scorer);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ArmScorer> {
        self.entries.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    /// One column scorer per benchmark score column.
    pub fn benchmark() -> Self {
        let mut reg = ScorerRegistry::new();
        for name in ["u", "v0", "v2", "app", "mix", "boost"] {
            reg.register(name, ArmScorer::Column { column: name.into() })
                .expect("fresh registry");
        }
        reg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRow {
    pub seeker_id: u64,
    /// Index into the log's arm names.
    pub arm: u32,
    pub vacancy_id: u64,
    /// Display position, 1-based.
    pub slot: u32,
    /// All score columns at this pair, in the log's column order.
    pub scores: Vec<f64>,
    pub clicked: bool,
    pub applied: bool,
    pub hired: bool,
    pub true_p: f64,
    pub true_u: f64,
    /// Set when this seeker's list came up shorter than requested.
    pub short_list: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionLog {
    pub arm_names: Vec<String>,
    pub score_names: Vec<String>,
    pub rows: Vec<InteractionRow>,
    pub notes: Vec<String>,
}

impl InteractionLog {
    pub fn score_index(&self, name: &str) -> Result<usize> {
        self.score_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::schema(format!("log has no score column {name}")))
    }

    pub fn clicks(&self) -> usize {
        self.rows.iter().filter(|r| r.clicked).count()
    }

    pub fn applications(&self) -> usize {
        self.rows.iter().filter(|r| r.applied).count()
    }

    pub fn hires(&self) -> usize {
        self.rows.iter().filter(|r| r.hired).count()
    }

    /// Checks the structural invariants every generated log must satisfy:
    /// applications imply clicks, hires imply applications, slots unique
    /// per seeker, probabilities in range, score vectors full width.
    pub fn validate(&self) -> Result<()> {
        let mut slots: BTreeMap<u64, HashSet<u32>> = BTreeMap::new();
        for (idx, row) in self.rows.iter().enumerate() {
            if row.applied && !row.clicked {
                return Err(Error::schema(format!("row {idx}: applied without a click")));
            }
            if row.hired && !row.applied {
                return Err(Error::schema(format!("row {idx}: hired without an application")));
            }
            if !(row.true_p > 0.0 && row.true_p < 1.0) {
                return Err(Error::schema(format!("row {idx}: true p out of range")));
            }
            if row.scores.len() != self.score_names.len() {
                return Err(Error::schema(format!("row {idx}: score vector width mismatch")));
            }
            if (row.arm as usize) >= self.arm_names.len() {
                return Err(Error::schema(format!("row {idx}: arm index out of range")));
            }
            if !slots.entry(row.seeker_id).or_default().insert(row.slot) {
                return Err(Error::schema(format!(
                    "row {idx}: duplicate slot {} for seeker {}",
                    row.slot, row.seeker_id
                )));
            }
        }
        Ok(())
    }
}

fn draw_availability(
    rng: &mut rand_chacha::ChaCha8Rng,
    n_vacancies: usize,
    dropout: f64,
) -> Vec<bool> {
    (0..n_vacancies).map(|_| rng.gen::<f64>() >= dropout).collect()
}

/// Runs the randomized display experiment and returns the interaction log.
///
/// `behavior` and `click_offset` govern the application model; passing the
/// market's own params and resolved offset reproduces the environment the
/// seekers' rV0 was solved under. Draws come from per-seeker substreams,
/// so the log is identical no matter how many threads run the loop.
#[allow(clippy::too_many_arguments)]
pub fn run_experiment(
    market: &Market,
    scores: &ScoreSet,
    assignment: &AssignmentTable,
    registry: &ScorerRegistry,
    design: &ExperimentDesign,
    behavior: &ModelParams,
    click_offset: f64,
    seed: u64,
) -> Result<InteractionLog> {
    design.validate()?;
    behavior.validate()?;
    if !(click_offset >= 0.0) || !click_offset.is_finite() {
        return Err(Error::config(format!(
            "click offset must be >= 0 so applications imply clicks, got {click_offset}"
        )));
    }
    let design_names: Vec<&str> = design.arms.iter().map(|a| a.name.as_str()).collect();
    if assignment.arm_names.iter().map(String::as_str).collect::<Vec<_>>() != design_names {
        return Err(Error::config("assignment table arms do not match the design"));
    }
    if assignment.rows.len() != market.n_seekers() {
        return Err(Error::schema(format!(
            "assignment covers {} seekers, market has {}",
            assignment.rows.len(),
            market.n_seekers()
        )));
    }
    for (i, row) in assignment.rows.iter().enumerate() {
        if row.seeker_id != market.seekers[i].id {
            return Err(Error::schema(format!(
                "assignment row {i} is for seeker {}, expected {}",
                row.seeker_id, market.seekers[i].id
            )));
        }
    }
    for arm in &design.arms {
        let scorer = registry
            .get(&arm.scorer)
            .ok_or_else(|| Error::config(format!("arm {} names unregistered scorer {}", arm.name, arm.scorer)))?;
        for col in scorer.columns() {
            scores.column(col)?;
        }
    }
    let nv = market.n_vacancies();
    if scores.matrices.iter().any(|m| m.nrows() != market.n_seekers() || m.ncols() != nv) {
        return Err(Error::schema("score matrices do not match the market dimensions"));
    }

    let per_seeker: Vec<(Vec<InteractionRow>, Option<String>)> = (0..market.n_seekers())
        .into_par_iter()
        .map(|i| -> Result<(Vec<InteractionRow>, Option<String>)> {
            let seeker_id = market.seekers[i].id;
            let arm = assignment.rows[i].arm;
            let scorer = registry
                .get(&design.arms[arm as usize].scorer)
                .expect("validated above");
            let mut rng = substream(seed, TAG_EXPERIMENT, &[seeker_id]);
            let avail = draw_availability(&mut rng, nv, design.availability_dropout);
            let want = design.list_length;

            let mut note = None;
            let (displayed, short_list) = match scorer {
                ArmScorer::Column { column } => {
                    let mut pairs = scores.pairs(column, i)?;
                    sort_desc_stable_by_id(&mut pairs);
                    let ids: Vec<u64> = pairs
                        .iter()
                        .map(|&(id, _)| id)
                        .filter(|&id| avail[id as usize])
                        .take(want)
                        .collect();
                    let short = ids.len() < want;
                    (ids, short)
                }
                ArmScorer::ConsiderationMix {
                    p_column,
                    u_column,
                    fraction,
                    cutoffs,
                    preselect,
                } => {
                    let u_pairs = scores.pairs(u_column, i)?;
                    let p_pairs = scores.pairs(p_column, i)?;
                    let u_ranks = rank_top_k(seeker_id, &u_pairs, nv)?;
                    let p_ranks = rank_top_k(seeker_id, &p_pairs, nv)?;
                    let cs = consideration_set(&u_ranks, &p_ranks, *cutoffs)?;
                    let mask: HashSet<u64> = avail
                        .iter()
                        .enumerate()
                        .filter(|(_, &a)| a)
                        .map(|(j, _)| j as u64)
                        .collect();
                    let opts = MixOptions {
                        n_preselect: (*preselect).max(want),
                        n_show: want,
                    };
                    match mix_rank(seeker_id, &cs, *fraction, &p_pairs, &u_pairs, Some(&mask), opts)
                    {
                        Ok(list) => {
                            let ids = list.top_ids(want);
                            let short = list.short_list || ids.len() < want;
                            (ids, short)
                        }
                        Err(e) => {
                            note = Some(format!("seeker {seeker_id}: empty display ({e})"));
                            (Vec::new(), true)
                        }
                    }
                }
            };

            let mut rows = Vec::with_capacity(displayed.len());
            for (slot0, &vid) in displayed.iter().enumerate() {
                let j = vid as usize;
                // One shock per displayed pair; the hire draw is always
                // consumed so streams stay aligned across behavior params.
                let eps = draw_logistic(&mut rng, behavior.sigma);
                let hire_draw = rng.gen::<f64>();
                let delta = surplus(
                    market.true_u[(i, j)],
                    market.true_p[(i, j)],
                    market.seekers[i].true_rv0,
                    behavior,
                )?;
                let applied = delta + eps > 0.0;
                let clicked = delta + eps + click_offset > 0.0;
                let hired = applied && hire_draw < market.true_p[(i, j)];
                rows.push(InteractionRow {
                    seeker_id,
                    arm,
                    vacancy_id: vid,
                    slot: (slot0 + 1) as u32,
                    scores: scores.values_at(i, j),
                    clicked,
                    applied,
                    hired,
                    true_p: market.true_p[(i, j)],
                    true_u: market.true_u[(i, j)],
                    short_list,
                });
            }
            Ok((rows, note))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for (seeker_rows, note) in per_seeker {
        rows.extend(seeker_rows);
        notes.extend(note);
    }
    Ok(InteractionLog {
        arm_names: assignment.arm_names.clone(),
        score_names: scores.names.clone(),
        rows,
        notes,
    })
}
