//! Mapping application-logit coefficients back to search primitives.
//!
//! A logit of "applied" on match utility, inverse hiring probability and a
//! constant identifies the taste-shock scale and the combined application
//! and rejection cost rate: the index is `alpha*U + gamma - beta/p` with
//! `alpha = 1/sigma` and `beta/alpha` the cost rate.

use super::inference::FitResult;
use crate::error::{Error, Result};
use crate::model::{gamma_closed, softplus};
use serde::{Deserialize, Serialize};

/// Search primitives recovered from an application logit, with
/// delta-method standard errors for the nonlinear transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralEstimate {
    /// Utility slope, `1/sigma`.
    pub alpha: f64,
    pub alpha_se: f64,
    /// Negated slope on inverse hiring probability.
    pub beta: f64,
    pub beta_se: f64,
    /// Intercept of the application index.
    pub gamma: f64,
    pub gamma_se: f64,
    /// Taste-shock scale `1/alpha`.
    pub sigma: f64,
    pub sigma_se: f64,
    /// Flow application plus rejection cost rate, `beta/alpha`.
    pub total_cost: f64,
    pub total_cost_se: f64,
}

impl StructuralEstimate {
    /// Surplus of a vacancy over the reservation line implied by the fit.
    pub fn delta_hat(&self, p: f64, u: f64) -> Result<f64> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::domain(format!(
                "surplus undefined for hiring probability {p}"
            )));
        }
        Ok(u - self.total_cost / p + self.gamma / self.alpha)
    }

    /// Welfare index straight from the logit coefficients,
    /// `p * softplus(alpha*u + gamma - beta/p) / alpha`.
    pub fn gamma_hat(&self, p: f64, u: f64) -> Result<f64> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::domain(format!(
                "hiring probability must be in (0, 1], got {p}"
            )));
        }
        Ok(p * softplus(self.alpha * u + self.gamma - self.beta / p) / self.alpha)
    }

    /// Same index through the model layer, for cross-checks.
    pub fn gamma_via_model(&self, p: f64, u: f64) -> Result<f64> {
        gamma_closed(p, self.delta_hat(p, u)?, self.sigma)
    }
}

fn coefficient(fit: &FitResult, name: &str) -> Result<(usize, f64, f64)> {
    match fit.index_of(name) {
        Some(i) => Ok((i, fit.estimates[i], fit.std_errors[i])),
        None => Err(Error::schema(format!(
            "application logit has no column named '{name}'"
        ))),
    }
}

/// Reads `(alpha, beta, gamma)` off a fitted application logit whose
/// index is `alpha*u + gamma - beta/p`, so `u_name` carries utility and
/// `inv_p_name` carries inverse hiring probability.
pub fn recover_structural(
    fit: &FitResult,
    u_name: &str,
    inv_p_name: &str,
) -> Result<StructuralEstimate> {
    let (ui, alpha, alpha_se) = coefficient(fit, u_name)?;
    let (vi, theta_v, theta_v_se) = coefficient(fit, inv_p_name)?;
    let (_, gamma, gamma_se) = coefficient(fit, "const")?;
    if alpha <= 0.0 {
        return Err(Error::domain(format!(
            "utility slope {alpha} is not positive; the taste-shock scale \
             1/alpha has the wrong sign, so the fit does not describe a \
             search model"
        )));
    }
    let beta = -theta_v;
    let sigma = 1.0 / alpha;
    // Delta method: d(1/alpha)/d(alpha) = -1/alpha^2.
    let sigma_se = alpha_se / (alpha * alpha);

    let total_cost = beta / alpha;
    // total_cost = -theta_v / theta_u, gradient (theta_v/theta_u^2, -1/theta_u).
    let g_u = theta_v / (alpha * alpha);
    let g_v = -1.0 / alpha;
    let cov = &fit.covariance;
    let var = g_u * g_u * cov[ui][ui] + 2.0 * g_u * g_v * cov[ui][vi] + g_v * g_v * cov[vi][vi];
    let total_cost_se = var.max(0.0).sqrt();

    Ok(StructuralEstimate {
        alpha,
        alpha_se,
        beta,
        beta_se: theta_v_se,
        gamma,
        gamma_se,
        sigma,
        sigma_se,
        total_cost,
        total_cost_se,
    })
}
