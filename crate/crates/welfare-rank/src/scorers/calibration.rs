//! Logistic calibration mapping a raw hiring score to a probability.

use crate::error::{Error, Result};
use crate::model::logistic_cdf;
use serde::{Deserialize, Serialize};

/// Intercept and slope of the logistic map from raw score to hiring
/// probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCoefficients {
    pub intercept: f64,
    pub slope: f64,
}

impl CalibrationCoefficients {
    pub fn new(intercept: f64, slope: f64) -> Result<Self> {
        if !intercept.is_finite() || !slope.is_finite() {
            return Err(Error::domain(format!(
                "calibration coefficients must be finite, got ({intercept}, {slope})"
            )));
        }
        Ok(CalibrationCoefficients { intercept, slope })
    }

    /// True when higher raw scores map to higher probabilities.
    pub fn is_increasing(&self) -> bool {
        self.slope > 0.0
    }
}

/// Calibrated hiring probability: standard logistic of
/// `intercept + slope * score`. Always strictly inside `(0, 1)`.
pub fn apply_calibration(score: f64, coeff: &CalibrationCoefficients) -> f64 {
    logistic_cdf(coeff.intercept + coeff.slope * score)
        .clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}
