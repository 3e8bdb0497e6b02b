//! Classical measurement error injected into logged score columns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::experiment::InteractionLog;
use super::rng::{draw_standard_normal, substream, TAG_NOISE};

/// Which score columns to perturb and how much.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementErrorSpec {
    /// Score columns receiving noise. Outcome and ground-truth columns are
    /// not addressable here by construction.
    pub columns: Vec<String>,
    /// Variance of the added noise.
    pub variance: f64,
    /// Declares the error classical (mean zero, independent of everything).
    /// Only the classical model is implemented.
    pub classical: bool,
    pub seed: u64,
}

impl MeasurementErrorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::config("measurement error needs at least one target column"));
        }
        if !(self.variance >= 0.0) || !self.variance.is_finite() {
            return Err(Error::config(format!(
                "error variance must be >= 0, got {}",
                self.variance
            )));
        }
        if !self.classical {
            return Err(Error::config(
                "only classical i.i.d. measurement error is implemented",
            ));
        }
        Ok(())
    }
}

/// Returns a log whose designated score columns carry added i.i.d. noise.
/// Outcomes, display structure, and the ground-truth columns are copied
/// untouched, so the original log stays available as the oracle.
pub fn inject_measurement_error(
    log: &InteractionLog,
    spec: &MeasurementErrorSpec,
) -> Result<InteractionLog> {
    spec.validate()?;
    let mut targets = Vec::with_capacity(spec.columns.len());
    for name in &spec.columns {
        // score_index refuses outcome and truth fields: they are struct
        // fields, not score columns, which is the schema guard.
        targets.push(log.score_index(name)?);
    }
    if spec.variance == 0.0 {
        return Ok(log.clone());
    }
    let sd = spec.variance.sqrt();

    let mut noisy = log.clone();
    for row in noisy.rows.iter_mut() {
        let mut rng = substream(spec.seed, TAG_NOISE, &[row.seeker_id, row.slot as u64]);
        for &t in &targets {
            row.scores[t] += sd * draw_standard_normal(&mut rng);
        }
    }
    Ok(noisy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::assign::{assign_treatments, ExperimentDesign};
    use crate::sim::experiment::{
        benchmark_score_columns, run_experiment, synthesize_score_columns, ScorerRegistry,
    };
    use crate::sim::market::{sample_market, MarketSpec};

    fn sample_log() -> InteractionLog {
        let spec = MarketSpec::calibrated(150, 40, 70).unwrap();
        let market = sample_market(&spec).unwrap();
        let scores = synthesize_score_columns(&market, &benchmark_score_columns(), 71).unwrap();
        let design =
            ExperimentDesign::equal_shares(&[("u", "u"), ("v2", "v2")], vec![], 10, 0.2);
        let table = assign_treatments(&market.seekers, &design, &spec.strata, 72).unwrap();
        run_experiment(
            &market,
            &scores,
            &table,
            &ScorerRegistry::benchmark(),
            &design,
            &market.spec.params,
            market.spec.resolved_click_offset(),
            73,
        )
        .unwrap()
    }

    #[test]
    fn zero_variance_is_the_identity() {
        let log = sample_log();
        let spec = MeasurementErrorSpec {
            columns: vec!["v0".into()],
            variance: 0.0,
            classical: true,
            seed: 1,
        };
        assert_eq!(inject_measurement_error(&log, &spec).unwrap(), log);
    }

    #[test]
    fn noise_is_mean_zero_with_the_declared_variance() {
        let log = sample_log();
        let spec = MeasurementErrorSpec {
            columns: vec!["v0".into()],
            variance: 0.49,
            classical: true,
            seed: 2,
        };
        let noisy = inject_measurement_error(&log, &spec).unwrap();
        let idx = log.score_index("v0").unwrap();
        let diffs: Vec<f64> = log
            .rows
            .iter()
            .zip(&noisy.rows)
            .map(|(a, b)| b.scores[idx] - a.scores[idx])
            .collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let sd = (diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() <= 3.0 * 0.7 / n.sqrt(), "noise mean {mean} at n {n}");
        assert!((sd - 0.7).abs() < 0.05, "noise sd {sd}");
    }

    #[test]
    fn untargeted_columns_outcomes_and_truth_are_untouched() {
        let log = sample_log();
        let spec = MeasurementErrorSpec {
            columns: vec!["v0".into(), "u".into()],
            variance: 1.0,
            classical: true,
            seed: 3,
        };
        let noisy = inject_measurement_error(&log, &spec).unwrap();
        let keep: Vec<usize> = log
            .score_names
            .iter()
            .enumerate()
            .filter(|(_, n)| *n != "v0" && *n != "u")
            .map(|(i, _)| i)
            .collect();
        for (a, b) in log.rows.iter().zip(&noisy.rows) {
            assert_eq!(a.clicked, b.clicked);
            assert_eq!(a.applied, b.applied);
            assert_eq!(a.hired, b.hired);
            assert_eq!(a.true_p, b.true_p);
            assert_eq!(a.true_u, b.true_u);
            assert_eq!(a.slot, b.slot);
            for &k in &keep {
                assert_eq!(a.scores[k], b.scores[k]);
            }
        }
    }

    #[test]
    fn outcome_columns_are_not_addressable() {
        let log = sample_log();
        for bad in ["applied", "hired", "clicked", "true_p", "true_u"] {
            let spec = MeasurementErrorSpec {
                columns: vec![bad.into()],
                variance: 1.0,
                classical: true,
                seed: 4,
            };
            assert!(
                inject_measurement_error(&log, &spec).is_err(),
                "{bad} must not be perturbable"
            );
        }
    }

    #[test]
    fn non_classical_specs_are_rejected() {
        let log = sample_log();
        let spec = MeasurementErrorSpec {
            columns: vec!["v0".into()],
            variance: 1.0,
            classical: false,
            seed: 5,
        };
        assert!(inject_measurement_error(&log, &spec).is_err());
    }

    #[test]
    fn injection_is_deterministic() {
        let log = sample_log();
        let spec = MeasurementErrorSpec {
            columns: vec!["v2".into()],
            variance: 0.8,
            classical: true,
            seed: 6,
        };
        let a = inject_measurement_error(&log, &spec).unwrap();
        let b = inject_measurement_error(&log, &spec).unwrap();
        assert_eq!(a, b);
    }
}
