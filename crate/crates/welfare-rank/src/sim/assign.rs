//! Stratified balanced-block randomization of seekers to ranking arms.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::market::{SeekerProfile, StrataSpec};
use super::rng::{substream, TAG_ASSIGN};

/// Which label dimensions define the randomization blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratumField {
    OccupationGroup,
    SupportLevel,
    Location,
}

/// One experimental arm: a display name, the registered scorer it runs,
/// and its share of seekers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub name: String,
    pub scorer: String,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDesign {
    pub arms: Vec<ArmSpec>,
    /// Randomization strata; empty means one block holding everyone.
    #[serde(default)]
    pub strata: Vec<StratumField>,
    /// Number of recommendations displayed per seeker.
    pub list_length: usize,
    /// Probability a vacancy is unavailable at display time.
    pub availability_dropout: f64,
}

impl ExperimentDesign {
    /// Equal-share design over the given (name, scorer) pairs.
    pub fn equal_shares(
        arms: &[(&str, &str)],
        strata: Vec<StratumField>,
        list_length: usize,
        availability_dropout: f64,
    ) -> Self {
        let share = 1.0 / arms.len() as f64;
        ExperimentDesign {
            arms: arms
                .iter()
                .map(|(name, scorer)| ArmSpec {
                    name: (*name).into(),
                    scorer: (*scorer).into(),
                    share,
                })
                .collect(),
            strata,
            list_length,
            availability_dropout,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.arms.is_empty() {
            return Err(Error::config("experiment design needs at least one arm"));
        }
        let mut names: Vec<&str> = self.arms.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.arms.len() {
            return Err(Error::config("arm names must be unique"));
        }
        let total: f64 = self.arms.iter().map(|a| a.share).sum();
        if self.arms.iter().any(|a| !(a.share >= 0.0) || !a.share.is_finite()) {
            return Err(Error::config("arm shares must be finite and nonnegative"));
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("arm shares must sum to 1, got {total}")));
        }
        if self.list_length == 0 {
            return Err(Error::config("list length must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.availability_dropout) {
            return Err(Error::config(format!(
                "availability dropout must lie in [0, 1), got {}",
                self.availability_dropout
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentRow {
    pub seeker_id: u64,
    /// Index into the design's arm list.
    pub arm: u32,
}

/// Result of stratified randomization, rows sorted by seeker id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentTable {
    pub arm_names: Vec<String>,
    pub rows: Vec<AssignmentRow>,
    /// One note per skipped (empty) stratum.
    pub notes: Vec<String>,
}

impl AssignmentTable {
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0usize; self.arm_names.len()];
        for row in &self.rows {
            c[row.arm as usize] += 1;
        }
        c
    }

    /// One-hot treatment dummies T_i, rows aligned with the table.
    pub fn dummies(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows.len(), self.arm_names.len());
        for (i, row) in self.rows.iter().enumerate() {
            m[(i, row.arm as usize)] = 1.0;
        }
        m
    }
}

fn label_of(seeker: &SeekerProfile, field: StratumField) -> &str {
    match field {
        StratumField::OccupationGroup => &seeker.strata.occupation_group,
        StratumField::SupportLevel => &seeker.strata.support_level,
        StratumField::Location => &seeker.strata.location,
    }
}

fn declared_sets<'a>(spec: &'a StrataSpec, field: StratumField) -> &'a [String] {
    match field {
        StratumField::OccupationGroup => &spec.occupation_groups,
        StratumField::SupportLevel => &spec.support_levels,
        StratumField::Location => &spec.locations,
    }
}

/// Largest-remainder apportionment of `n` slots to the arm shares; every
/// count differs from `n * share` by strictly less than one.
fn apportion(n: usize, shares: &[f64]) -> Vec<usize> {
    let mut counts: Vec<usize> = shares.iter().map(|s| (n as f64 * s).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut rema: Vec<(usize, f64)> = shares
        .iter()
        .enumerate()
        .map(|(a, s)| (a, n as f64 * s - counts[a] as f64))
        .collect();
    rema.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    for &(a, _) in rema.iter().take(n - assigned) {
        counts[a] += 1;
    }
    counts
}

/// Assigns every seeker to an arm with balanced blocks inside each stratum:
/// arm counts within a stratum deviate from `share * stratum size` by less
/// than one. Strata are the cross product of the declared label sets for
/// the design's stratification fields; empty cells are skipped with a note.
pub fn assign_treatments(
    seekers: &[SeekerProfile],
    design: &ExperimentDesign,
    strata: &StrataSpec,
    seed: u64,
) -> Result<AssignmentTable> {
    design.validate()?;
    strata.validate()?;
    if seekers.is_empty() {
        return Err(Error::config("cannot assign treatments to zero seekers"));
    }

    // Enumerate declared cells in a fixed order so stratum substreams are
    // stable across runs.
    let mut cells: Vec<Vec<String>> = vec![Vec::new()];
    for &field in &design.strata {
        let set = declared_sets(strata, field);
        cells = cells
            .iter()
            .flat_map(|prefix| {
                set.iter().map(move |label| {
                    let mut next = prefix.clone();
                    next.push(label.clone());
                    next
                })
            })
            .collect();
    }

    let mut members: BTreeMap<Vec<String>, Vec<u64>> = BTreeMap::new();
    for seeker in seekers {
        let key: Vec<String> = design
            .strata
            .iter()
            .map(|&f| label_of(seeker, f).to_string())
            .collect();
        members.entry(key).or_default().push(seeker.id);
    }

    let shares: Vec<f64> = design.arms.iter().map(|a| a.share).collect();
    let mut rows: Vec<AssignmentRow> = Vec::with_capacity(seekers.len());
    let mut notes = Vec::new();
    for (stratum_index, cell) in cells.iter().enumerate() {
        let Some(ids) = members.get(cell) else {
            notes.push(format!("stratum ({}) is empty, skipped", cell.join(", ")));
            continue;
        };
        let mut ids = ids.clone();
        ids.sort_unstable();
        let counts = apportion(ids.len(), &shares);
        let mut labels: Vec<u32> = counts
            .iter()
            .enumerate()
            .flat_map(|(a, &c)| std::iter::repeat(a as u32).take(c))
            .collect();
        let mut rng = substream(seed, TAG_ASSIGN, &[stratum_index as u64]);
        labels.shuffle(&mut rng);
        rows.extend(
            ids.iter()
                .zip(labels)
                .map(|(&seeker_id, arm)| AssignmentRow { seeker_id, arm }),
        );
    }
    rows.sort_by_key(|r| r.seeker_id);

    Ok(AssignmentTable {
        arm_names: design.arms.iter().map(|a| a.name.clone()).collect(),
        rows,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::market::{sample_market, MarketSpec, StrataLabels};
    use crate::testutil::ks_uniform_pvalue;
    use statrs::distribution::{ContinuousCDF, FisherSnedecor};

    fn toy_seekers(n: usize) -> Vec<SeekerProfile> {
        (0..n)
            .map(|i| SeekerProfile {
                id: i as u64,
                strata: StrataLabels {
                    occupation_group: if i % 2 == 0 { "care" } else { "admin" }.into(),
                    support_level: "guided".into(),
                    location: "north".into(),
                },
                features: vec![],
                taste_shift: 0.0,
                true_rv0: 0.0,
            })
            .collect()
    }

    fn two_group_strata() -> StrataSpec {
        StrataSpec {
            occupation_groups: vec!["care".into(), "admin".into()],
            support_levels: vec!["guided".into()],
            locations: vec!["north".into()],
        }
    }

    #[test]
    fn fifty_fifty_on_a_block_of_100_is_exact() {
        let design = ExperimentDesign::equal_shares(
            &[("a", "s_a"), ("b", "s_b")],
            vec![],
            10,
            0.0,
        );
        let table = assign_treatments(&toy_seekers(100), &design, &two_group_strata(), 4).unwrap();
        assert_eq!(table.counts(), vec![50, 50]);
    }

    #[test]
    fn single_arm_takes_everyone() {
        let design = ExperimentDesign::equal_shares(&[("only", "s")], vec![], 10, 0.0);
        let table = assign_treatments(&toy_seekers(37), &design, &two_group_strata(), 4).unwrap();
        assert_eq!(table.counts(), vec![37]);
    }

    #[test]
    fn within_stratum_deviation_is_below_one() {
        let design = ExperimentDesign {
            arms: vec![
                ArmSpec { name: "a".into(), scorer: "s".into(), share: 0.5 },
                ArmSpec { name: "b".into(), scorer: "s".into(), share: 0.3 },
                ArmSpec { name: "c".into(), scorer: "s".into(), share: 0.2 },
            ],
            strata: vec![StratumField::OccupationGroup],
            list_length: 10,
            availability_dropout: 0.0,
        };
        let seekers = toy_seekers(173);
        let table = assign_treatments(&seekers, &design, &two_group_strata(), 11).unwrap();
        for group in ["care", "admin"] {
            let members: Vec<u64> = seekers
                .iter()
                .filter(|s| s.strata.occupation_group == group)
                .map(|s| s.id)
                .collect();
            let mut counts = vec![0usize; 3];
            for row in &table.rows {
                if members.contains(&row.seeker_id) {
                    counts[row.arm as usize] += 1;
                }
            }
            for (a, arm) in design.arms.iter().enumerate() {
                let target = members.len() as f64 * arm.share;
                assert!(
                    (counts[a] as f64 - target).abs() < 1.0,
                    "stratum {group} arm {a}: {} vs target {target}",
                    counts[a]
                );
            }
        }
    }

    #[test]
    fn empty_declared_stratum_is_noted() {
        let mut strata = two_group_strata();
        strata.occupation_groups.push("tech".into());
        let design = ExperimentDesign::equal_shares(
            &[("a", "s"), ("b", "s")],
            vec![StratumField::OccupationGroup],
            10,
            0.0,
        );
        let table = assign_treatments(&toy_seekers(40), &design, &strata, 4).unwrap();
        assert!(table.notes.iter().any(|n| n.contains("tech")));
        assert_eq!(table.rows.len(), 40);
    }

    #[test]
    fn assignment_is_deterministic_and_covers_everyone_once() {
        let design = ExperimentDesign::equal_shares(
            &[("a", "s"), ("b", "s"), ("c", "s")],
            vec![StratumField::OccupationGroup],
            10,
            0.0,
        );
        let seekers = toy_seekers(91);
        let t1 = assign_treatments(&seekers, &design, &two_group_strata(), 5).unwrap();
        let t2 = assign_treatments(&seekers, &design, &two_group_strata(), 5).unwrap();
        assert_eq!(t1, t2);
        let mut ids: Vec<u64> = t1.rows.iter().map(|r| r.seeker_id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 91);
        let t3 = assign_treatments(&seekers, &design, &two_group_strata(), 6).unwrap();
        assert_ne!(t1, t3, "different seeds should reshuffle");
    }

    #[test]
    fn invalid_designs_are_rejected() {
        let mut design = ExperimentDesign::equal_shares(&[("a", "s"), ("b", "s")], vec![], 10, 0.0);
        design.arms[0].share = 0.7;
        assert!(design.validate().is_err());
        let dup = ExperimentDesign::equal_shares(&[("a", "s"), ("a", "s")], vec![], 10, 0.0);
        assert!(dup.validate().is_err());
        let drop = ExperimentDesign::equal_shares(&[("a", "s")], vec![], 10, 1.0);
        assert!(drop.validate().is_err());
    }

    /// Joint F-test p-value for arm dummies in an OLS of y on [1, dummies].
    fn balance_f_pvalue(y: &[f64], arms: &[u32], n_arms: usize) -> f64 {
        let n = y.len();
        let mean = y.iter().sum::<f64>() / n as f64;
        let rss0: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
        let mut rss1 = 0.0;
        for a in 0..n_arms {
            let group: Vec<f64> = y
                .iter()
                .zip(arms)
                .filter(|(_, &g)| g as usize == a)
                .map(|(v, _)| *v)
                .collect();
            let gm = group.iter().sum::<f64>() / group.len() as f64;
            rss1 += group.iter().map(|v| (v - gm) * (v - gm)).sum::<f64>();
        }
        let q = (n_arms - 1) as f64;
        let df2 = (n - n_arms) as f64;
        let f = ((rss0 - rss1) / q) / (rss1 / df2);
        let dist = FisherSnedecor::new(q, df2).unwrap();
        1.0 - dist.cdf(f)
    }

    #[test]
    fn covariate_balance_f_pvalues_look_uniform_across_seeds() {
        let spec = MarketSpec::calibrated(240, 4, 77).unwrap();
        let market = sample_market(&spec).unwrap();
        let design = ExperimentDesign::equal_shares(
            &[("a", "s"), ("b", "s"), ("c", "s")],
            vec![StratumField::SupportLevel],
            10,
            0.0,
        );
        let covariate: Vec<f64> = market.seekers.iter().map(|s| s.features[0]).collect();
        let pvals: Vec<f64> = (0..200)
            .map(|seed| {
                let table =
                    assign_treatments(&market.seekers, &design, &spec.strata, seed).unwrap();
                let arms: Vec<u32> = table.rows.iter().map(|r| r.arm).collect();
                balance_f_pvalue(&covariate, &arms, 3)
            })
            .collect();
        let p = ks_uniform_pvalue(pvals);
        assert!(p > 0.01, "balance p-values not uniform: KS p = {p}");
    }
}
