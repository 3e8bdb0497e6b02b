//! Search-theoretic welfare evaluation of job-recommendation rankings.
//!
//! The crate packages four layers that build on one another:
//!
//! * [`model`] - a partial-equilibrium job-search model in which every
//!   vacancy is a lottery `(p, U)`: a hiring probability conditional on
//!   applying and a utility rate if hired. The model yields a closed-form
//!   welfare index per encountered vacancy, its decomposition into hiring
//!   and application margins, the value of unemployment as a fixed point,
//!   and a forward-looking extension for seekers who anticipate how
//!   recommendations shift their outside option.
//! * [`scorers`] - the ranking rules compared in the evaluation: a
//!   criteria-weighted score, a triplet-trained block-bilinear hiring
//!   score with logistic calibration, ordinal mixtures, an application
//!   score, and the welfare-optimal score, plus recall metrics and
//!   rank-divergence diagnostics.
//! * [`sim`] - a synthetic labor market with ground-truth `(p, U)` per
//!   seeker-vacancy pair, stratified randomized assignment of ranking
//!   algorithms, and a click/application/hire interaction simulator.
//! * [`estimation`] and [`welfare`] - the econometric layer: clustered
//!   OLS and logit fits, control-function IV, conditional fixed-effects
//!   logit, discrete-hazard calibration, structural recovery of the model
//!   primitives from application behavior, and the split-sample pipeline
//!   that ranks algorithms by estimated welfare against a counterfactual
//!   optimal recommendation set.
//!
//! The [`cli`] module ties the layers into a deterministic, manifest-audited
//! pipeline behind the `welfare-rank` binary. Byte-identical reruns under a
//! fixed seed are a hard guarantee; see the guide in `book/` for a tour.

pub mod cli;
pub mod error;
pub mod estimation;
pub mod model;
pub mod scorers;
pub mod sim;
pub mod welfare;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testutil;

#[cfg(doctest)]
mod book;
