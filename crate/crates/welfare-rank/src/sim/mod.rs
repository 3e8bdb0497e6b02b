//! Synthetic labor market and randomized beta-test harness.
//!
//! The layer generates populations with ground-truth `(p, U)` per
//! seeker-vacancy pair, solves each seeker's value of unemployment on their
//! own pool, randomizes seekers to ranking arms inside strata, simulates
//! top-list displays with availability dropout and the click/apply/hire
//! model, and can replay individual search spells and inject classical
//! measurement error for the econometric layer.
//!
//! Everything is a pure function of `(inputs, seed)`: randomness comes
//! from per-entity substreams, so parallel runs reproduce sequential
//! output bit for bit and replaying a configuration reproduces every log
//! byte for byte.

mod assign;
mod experiment;
mod market;
mod noise;
pub(crate) mod rng;
mod sequential;

pub use assign::{
    assign_treatments, ArmSpec, AssignmentRow, AssignmentTable, ExperimentDesign, StratumField,
};
pub use experiment::{
    benchmark_score_columns, run_experiment, synthesize_score_columns, ArmScorer, ColumnKind,
    InteractionLog, InteractionRow, ScoreBase, ScoreColumnSpec, ScoreSet, ScorerRegistry,
};
pub use market::{
    sample_market, seeker_reservation, LatentFactorSpec, Market, MarketMeta, MarketSpec,
    SeekerProfile, StrataLabels, StrataSpec, VacancyRecord, P_MIN,
};
pub use noise::{inject_measurement_error, MeasurementErrorSpec};
pub use sequential::{simulate_sequential_search, SpellRecord};
