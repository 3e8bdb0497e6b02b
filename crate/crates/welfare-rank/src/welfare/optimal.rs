//! Step 4: the counterfactual recommendation set that maximizes the
//! welfare index over a seeker's full vacancy pool.

use super::model::gamma_hat;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One vacancy of a seeker's pool with its predicted probabilities,
/// evaluated at the baseline display position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolPrediction {
    pub vacancy_id: u64,
    pub p_hat: f64,
    pub pa_hat: f64,
}

/// A selected vacancy with its welfare index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalEntry {
    pub vacancy_id: u64,
    pub p_hat: f64,
    pub pa_hat: f64,
    pub gamma_star: f64,
}

/// The welfare-ranked counterfactual list of one seeker, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalSet {
    pub seeker_id: u64,
    pub entries: Vec<OptimalEntry>,
    /// Set when the pool could not fill the requested length.
    pub short: bool,
}

impl OptimalSet {
    pub fn vacancy_ids(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.vacancy_id).collect()
    }
}

/// Ranks the pool by the welfare index and keeps the top `k`. Since the
/// index is additive across displayed vacancies, the greedy top-k set is
/// exactly the total-welfare-maximizing k-subset. Ties break toward the
/// smaller vacancy id; a pool shorter than `k` yields a short, flagged
/// list rather than an error.
pub fn optimal_set(seeker_id: u64, pool: &[PoolPrediction], k: usize) -> Result<OptimalSet> {
    if k == 0 {
        return Err(Error::config("counterfactual list length must be >= 1"));
    }
    let mut entries: Vec<OptimalEntry> = pool
        .iter()
        .map(|v| {
            Ok(OptimalEntry {
                vacancy_id: v.vacancy_id,
                p_hat: v.p_hat,
                pa_hat: v.pa_hat,
                gamma_star: gamma_hat(v.p_hat, v.pa_hat)?,
            })
        })
        .collect::<Result<_>>()?;
    entries.sort_by(|a, b| {
        b.gamma_star
            .partial_cmp(&a.gamma_star)
            .expect("gamma_hat returns finite values")
            .then(a.vacancy_id.cmp(&b.vacancy_id))
    });
    let short = entries.len() < k;
    entries.truncate(k);
    Ok(OptimalSet {
        seeker_id,
        entries,
        short,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::rng::{substream, TAG_NOISE};
    use rand::Rng;

    fn random_pool(n: usize, seed: u64) -> Vec<PoolPrediction> {
        let mut rng = substream(seed, TAG_NOISE, &[n as u64]);
        (0..n)
            .map(|j| PoolPrediction {
                vacancy_id: j as u64,
                p_hat: rng.gen_range(0.01..0.4),
                pa_hat: rng.gen_range(0.001..0.3),
            })
            .collect()
    }

    #[test]
    fn matches_exhaustive_subset_search_on_small_pools() {
        for (n, k, seed) in [(8usize, 3usize, 1u64), (12, 5, 2), (10, 10, 3), (12, 1, 4)] {
            let pool = random_pool(n, seed);
            let set = optimal_set(77, &pool, k).unwrap();
            assert!(!set.short);

            // Brute force: the k-subset with the largest summed index.
            let gammas: Vec<f64> = pool
                .iter()
                .map(|v| gamma_hat(v.p_hat, v.pa_hat).unwrap())
                .collect();
            let mut best = (f64::NEG_INFINITY, 0usize);
            for mask in 0u32..1 << n {
                if mask.count_ones() as usize != k {
                    continue;
                }
                let total: f64 =
                    (0..n).filter(|j| mask >> j & 1 == 1).map(|j| gammas[j]).sum();
                if total > best.0 {
                    best = (total, mask as usize);
                }
            }
            let mut expect: Vec<u64> =
                (0..n).filter(|j| best.1 >> j & 1 == 1).map(|j| j as u64).collect();
            let mut got = set.vacancy_ids();
            expect.sort_unstable();
            got.sort_unstable();
            assert_eq!(got, expect, "n={n} k={k}");
        }
    }

    #[test]
    fn rank_for_rank_the_optimal_list_dominates_any_subset() {
        let pool = random_pool(40, 9);
        let set = optimal_set(0, &pool, 10).unwrap();
        let mut rng = substream(9, TAG_NOISE, &[99]);
        for _ in 0..50 {
            // A random "arm" showing 10 of the same pool.
            let mut shown: Vec<f64> = (0..40)
                .filter(|_| rng.gen_range(0.0..1.0) < 0.4)
                .take(10)
                .map(|j| gamma_hat(pool[j].p_hat, pool[j].pa_hat).unwrap())
                .collect();
            shown.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (r, g) in shown.iter().enumerate() {
                assert!(
                    set.entries[r].gamma_star >= *g,
                    "rank {r}: {} < {g}",
                    set.entries[r].gamma_star
                );
            }
        }
    }

    #[test]
    fn short_pools_flag_and_bad_inputs_error() {
        let pool = random_pool(4, 5);
        let set = optimal_set(1, &pool, 10).unwrap();
        assert!(set.short);
        assert_eq!(set.entries.len(), 4);
        assert!(
            set.entries.windows(2).all(|w| w[0].gamma_star >= w[1].gamma_star),
            "descending order"
        );
        assert!(optimal_set(1, &pool, 0).is_err());
        let bad = vec![PoolPrediction {
            vacancy_id: 0,
            p_hat: 0.2,
            pa_hat: 1.0,
        }];
        assert!(optimal_set(1, &bad, 1).is_err());
    }
}
