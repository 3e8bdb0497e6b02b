//! Decomposition of a ranking system's value effect into a pure ranking
//! effect and an information effect.
//!
//! A job seeker holds subjective beliefs about the vacancy pool; the
//! ranking system draws from the true pool. The value gain over searching
//! under beliefs splits into the gain from better-ordered true vacancies
//! (pure effect) and the gain from the pool being better than believed
//! (information effect).

use crate::error::Result;
use crate::model::params::{ModelParams, VacancyDistribution};
use crate::model::value::{solve_value_unemployment, value_with_rs_myopic};

/// Value levels and effect decomposition for a ranking system evaluated
/// against subjective beliefs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeliefEffects {
    /// Baseline value rate under the seeker's subjective pool.
    pub rv0_subjective: f64,
    /// Baseline value rate under the true pool.
    pub rv0_truth: f64,
    /// Myopic value rate under the ranking system on the true pool.
    pub rv1_myopic: f64,
    /// Total effect: ranked true pool versus subjective search.
    pub full: f64,
    /// Ranked true pool versus unranked true pool.
    pub pure: f64,
    /// Unranked true pool versus subjective search.
    pub info: f64,
}

/// Splits the value effect of a ranking system into pure and information
/// components: `full = pure + info` by construction.
///
/// The myopic seeker keeps the reservation rule implied by their own
/// beliefs, so the ranked value is evaluated at the subjective baseline.
pub fn belief_decomposition(
    subjective: &VacancyDistribution,
    truth: &VacancyDistribution,
    scores_on_truth: &[f64],
    s: f64,
    params: &ModelParams,
) -> Result<BeliefEffects> {
    let rv0_subjective = solve_value_unemployment(params, subjective)?;
    let rv0_truth = solve_value_unemployment(params, truth)?;
    let rv1_myopic = value_with_rs_myopic(params, truth, scores_on_truth, s, rv0_subjective)?;
    Ok(BeliefEffects {
        rv0_subjective,
        rv0_truth,
        rv1_myopic,
        full: rv1_myopic - rv0_subjective,
        pure: rv1_myopic - rv0_truth,
        info: rv0_truth - rv0_subjective,
    })
}
