//! Job-search model primitives and welfare-index evaluations.
//!
//! A vacancy is a lottery `(p, U)`: `p` is the probability of being hired
//! conditional on applying, `U` the utility rate while employed. A seeker
//! facing the lottery applies when the surplus plus a logistic taste shock
//! is positive. The expected welfare contribution of encountering one
//! vacancy, the index `gamma`, has a closed form and an equivalent
//! decomposition into hiring probability, application probability, and
//! conditional surplus, which is what makes ranking by predicted hiring
//! or application probability alone recoverably suboptimal.

mod beliefs;
mod gamma;
mod non_myopic;
mod params;
mod quadrature;
mod selection;
mod shock;
mod value;

pub use beliefs::{belief_decomposition, BeliefEffects};
pub use gamma::{
    application_probability, decompose_gamma, employment_value_gain, gamma_closed, gamma_numeric,
    m_factor, reservation_utility, surplus, GammaFactors,
};
pub use non_myopic::{
    bracket_delta_adj, reservation_shift, scan_shifted_scores, solve_adjusted_value, theta,
    AdjustedSolution, AdjustedValueProblem, DeltaBracket, ShiftScanRow,
};
pub use params::{ModelParams, VacancyDistribution, VacancyLottery, WeightedAtom};
pub use quadrature::GaussLegendre;
pub use shock::ShockFamily;
pub use value::{solve_value_unemployment, value_with_rs_myopic};

pub(crate) use gamma::{logistic_cdf, softplus};
