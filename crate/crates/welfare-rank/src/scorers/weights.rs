//! Criteria-weighted matching score used by the employment agency.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Ordered list of matching criteria with nonnegative weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    criteria: Vec<(String, f64)>,
}

impl WeightProfile {
    /// Builds a profile from (criterion name, weight) pairs.
    pub fn new(criteria: Vec<(String, f64)>) -> Result<Self> {
        if criteria.is_empty() {
            return Err(Error::schema("weight profile needs at least one criterion"));
        }
        for (name, w) in &criteria {
            if !(*w >= 0.0) || !w.is_finite() {
                return Err(Error::schema(format!(
                    "criterion {name} has invalid weight {w}; weights must be >= 0"
                )));
            }
        }
        Ok(WeightProfile { criteria })
    }

    /// The public employment agency's published weights. They sum to
    /// 0.998, not 1, and are used as published without renormalization.
    pub fn agency_default() -> Self {
        let criteria = [
            ("occupation", 0.332),
            ("occupation_skills", 0.332),
            ("geographic_mobility", 0.1),
            ("reservation_wage", 0.066),
            ("diploma", 0.033),
            ("working_hours", 0.033),
            ("driving_license", 0.033),
            ("languages", 0.033),
            ("occupation_experience", 0.033),
            ("contract", 0.003),
        ];
        WeightProfile {
            criteria: criteria.iter().map(|(n, w)| (n.to_string(), *w)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.criteria.len()
    }

    pub fn is_empty(&self) -> bool {
        self.criteria.is_empty()
    }

    pub fn criteria(&self) -> &[(String, f64)] {
        &self.criteria
    }

    pub fn weight_sum(&self) -> f64 {
        self.criteria.iter().map(|(_, w)| w).sum()
    }
}

/// Per-criterion consistency between one seeker and one vacancy, each
/// entry in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyVector {
    values: Vec<f64>,
}

impl ConsistencyVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(v) {
                return Err(Error::schema(format!(
                    "consistency entry {i} must be in [0, 1], got {v}"
                )));
            }
        }
        Ok(ConsistencyVector { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Weighted sum of consistency values: the agency's matching score.
pub fn u_score(c: &ConsistencyVector, w: &WeightProfile) -> Result<f64> {
    if c.len() != w.len() {
        return Err(Error::schema(format!(
            "consistency vector has {} entries but the weight profile has {} criteria",
            c.len(),
            w.len()
        )));
    }
    Ok(c.values()
        .iter()
        .zip(w.criteria())
        .map(|(c_k, (_, w_k))| c_k * w_k)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_matches_published_weights() {
        let w = WeightProfile::agency_default();
        assert_eq!(w.len(), 10);
        let expected = [
            ("occupation", 0.332),
            ("occupation_skills", 0.332),
            ("geographic_mobility", 0.1),
            ("reservation_wage", 0.066),
            ("diploma", 0.033),
            ("working_hours", 0.033),
            ("driving_license", 0.033),
            ("languages", 0.033),
            ("occupation_experience", 0.033),
            ("contract", 0.003),
        ];
        for ((name, weight), (en, ew)) in w.criteria().iter().zip(expected) {
            assert_eq!(name, en);
            assert_eq!(*weight, ew);
        }
        // Published weights are kept as-is; they do not sum to one.
        assert!((w.weight_sum() - 0.998).abs() < 1e-12);
    }

    #[test]
    fn score_is_weighted_sum() {
        let w = WeightProfile::agency_default();
        let zeros = ConsistencyVector::new(vec![0.0; 10]).unwrap();
        assert_eq!(u_score(&zeros, &w).unwrap(), 0.0);

        let ones = ConsistencyVector::new(vec![1.0; 10]).unwrap();
        assert!((u_score(&ones, &w).unwrap() - 0.998).abs() < 1e-12);

        let mut only_first = vec![0.0; 10];
        only_first[0] = 1.0;
        let c = ConsistencyVector::new(only_first).unwrap();
        assert_eq!(u_score(&c, &w).unwrap(), 0.332);
    }

    #[test]
    fn shape_and_range_violations_are_schema_errors() {
        let w = WeightProfile::agency_default();
        let short = ConsistencyVector::new(vec![1.0; 3]).unwrap();
        assert!(matches!(u_score(&short, &w), Err(crate::Error::Schema(_))));
        assert!(ConsistencyVector::new(vec![1.2]).is_err());
        assert!(ConsistencyVector::new(vec![-0.1]).is_err());
        assert!(WeightProfile::new(vec![]).is_err());
        assert!(WeightProfile::new(vec![("x".into(), -1.0)]).is_err());
    }
}
