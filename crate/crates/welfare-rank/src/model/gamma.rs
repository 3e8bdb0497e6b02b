//! Reservation utility, surplus, application probability, and the welfare
//! index of encountering one vacancy.
//!
//! The index for a lottery `(p, U)` with surplus `delta = U - U*(p)` and
//! logistic taste shock of scale `sigma` is
//!
//! ```text
//! gamma = p * sigma * log(1 + exp(delta / sigma))
//! ```
//!
//! and factors exactly into hiring probability, application probability,
//! and expected surplus conditional on applying. The conditional-surplus
//! factor exceeds the naive hiring-rate ranking precisely when application
//! probabilities are high, which is why ranking by predicted hires alone
//! is not welfare optimal.

use crate::error::{Error, Result};
use crate::model::params::ModelParams;
use crate::model::quadrature::GaussLegendre;
use crate::model::shock::ShockFamily;

/// Numerically stable `log(1 + exp(x))`. The branch point matches the
/// asymptote `x + log1p(exp(-x))` used for large arguments.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Standard logistic CDF.
pub(crate) fn logistic_cdf(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Minimum utility rate that makes applying to a lottery with hiring
/// probability `p` worthwhile, given the baseline value rate `rv0`.
///
/// Rejection costs net out at `p = 1`; as `p` falls the expected
/// application and rejection costs per hire rise like `1/p`.
pub fn reservation_utility(rv0: f64, p: f64, params: &ModelParams) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::domain(format!(
            "reservation utility undefined for hiring probability {p}"
        )));
    }
    let kbar = params.apply_cost_rate();
    let rbar = params.reject_cost_rate();
    Ok(rv0 - rbar + (kbar + rbar) / p)
}

/// Surplus `delta = U - U*(p)` of a vacancy relative to the reservation
/// utility at its hiring probability.
pub fn surplus(u: f64, p: f64, rv0: f64, params: &ModelParams) -> Result<f64> {
    Ok(u - reservation_utility(rv0, p, params)?)
}

/// Probability of applying: logistic CDF of `delta / sigma`.
pub fn application_probability(delta: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::domain(format!("taste-shock scale must be > 0, got {sigma}")));
    }
    Ok(logistic_cdf(delta / sigma))
}

/// Closed-form welfare index `p * sigma * log(1 + exp(delta / sigma))`,
/// evaluated overflow-safe.
pub fn gamma_closed(p: f64, delta: f64, sigma: f64) -> Result<f64> {
    check_p_sigma(p, sigma)?;
    Ok(p * sigma * softplus(delta / sigma))
}

/// Welfare index by quadrature over the shock distribution:
/// `p * E[(delta + eps)^+]` with `eps = sigma` times the standardized
/// family member. For the logistic family this agrees with
/// [`gamma_closed`] to quadrature accuracy. Every supported family is a
/// variant of [`ShockFamily`], so an unsupported family cannot reach this
/// function; config parsing rejects unknown names upstream.
pub fn gamma_numeric(
    p: f64,
    delta: f64,
    sigma: f64,
    family: ShockFamily,
    nodes: usize,
) -> Result<f64> {
    check_p_sigma(p, sigma)?;
    if nodes < 32 {
        return Err(Error::domain(format!("quadrature needs at least 32 nodes, got {nodes}")));
    }
    let (lo, hi) = family.integration_bounds();
    // The integrand is (delta + sigma*e) * f(e) above the application
    // threshold e = -delta/sigma and zero below it.
    let cut = -delta / sigma;
    if cut >= hi {
        return Ok(0.0);
    }
    let rule = GaussLegendre::new(nodes)?;
    let value = rule.integrate(cut.max(lo), hi, |e| (delta + sigma * e) * family.pdf(e));
    Ok(p * value)
}

/// Conditional-surplus factor `m(p_a) = -log(1 - p_a) / p_a`, extended by
/// continuity to `m(0) = 1`. Diverges as `p_a` approaches 1.
pub fn m_factor(p_a: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p_a) {
        return Err(Error::domain(format!(
            "conditional-surplus factor needs application probability in [0, 1), got {p_a}"
        )));
    }
    if p_a == 0.0 {
        return Ok(1.0);
    }
    Ok(-(-p_a).ln_1p() / p_a)
}

/// The three factors of the welfare index. The product equals
/// [`gamma_closed`] up to a few units in the last place; the hire
/// probability is the product of the first two factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFactors {
    /// Hiring probability conditional on applying.
    pub p: f64,
    /// Application probability.
    pub application: f64,
    /// Expected surplus conditional on applying, `sigma * m(p_a)`.
    pub conditional_surplus: f64,
}

impl GammaFactors {
    /// Product of the three factors, equal to the closed-form index.
    pub fn product(&self) -> f64 {
        self.p * self.application * self.conditional_surplus
    }

    /// Unconditional hiring probability `p_h = p * p_a`.
    pub fn hire_probability(&self) -> f64 {
        self.p * self.application
    }
}

/// Factors the welfare index into `(p, p_a, sigma * m(p_a))`.
///
/// The conditional-surplus slot is computed through the same softplus as
/// the closed form (mathematically identical to `sigma * m(p_a)`), so the
/// product identity holds to rounding even where `log(1 - p_a)` would
/// cancel catastrophically.
pub fn decompose_gamma(p: f64, delta: f64, sigma: f64) -> Result<GammaFactors> {
    check_p_sigma(p, sigma)?;
    let x = delta / sigma;
    let application = logistic_cdf(x);
    let conditional_surplus = if application == 0.0 {
        // Underflow limit: m(0) = 1.
        sigma
    } else {
        sigma * softplus(x) / application
    };
    Ok(GammaFactors {
        p,
        application,
        conditional_surplus,
    })
}

/// Capitalized value gain of taking a job at realized utility rate `w`
/// over staying unemployed: `(w - rv0) / (r + q)`.
pub fn employment_value_gain(w: f64, rv0: f64, params: &ModelParams) -> f64 {
    (w - rv0) / params.effective_discount()
}

fn check_p_sigma(p: f64, sigma: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!("hiring probability must be in (0, 1], got {p}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::domain(format!("taste-shock scale must be > 0, got {sigma}")));
    }
    Ok(())
}
