//! Retrieval metrics over ranked lists: recall at a cutoff and the
//! cross-rank divergence between two score families.

use crate::error::{Error, Result};
use crate::scorers::ranking::RankedList;
use std::collections::HashMap;

/// Recall at a cutoff, with the number of seekers excluded because their
/// realized match was missing from the ranked pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecallResult {
    pub recall: f64,
    pub included: usize,
    pub excluded: usize,
}

/// Fraction of seekers whose realized match appears in the top `k` of
/// their ranked list. Seekers whose match is absent from their list's
/// pool (or who have no list) are excluded and counted.
pub fn recall_at_k(
    lists: &[RankedList],
    matches: &[(u64, u64)],
    k: usize,
) -> Result<RecallResult> {
    if k == 0 {
        return Err(Error::domain("recall needs k >= 1"));
    }
    if matches.is_empty() {
        return Err(Error::schema("recall needs at least one realized match"));
    }
    let by_seeker: HashMap<u64, &RankedList> =
        lists.iter().map(|l| (l.seeker_id, l)).collect();
    let mut hits = 0usize;
    let mut included = 0usize;
    let mut excluded = 0usize;
    for &(seeker_id, vacancy_id) in matches {
        match by_seeker.get(&seeker_id).and_then(|l| l.rank_of(vacancy_id)) {
            Some(rank) => {
                included += 1;
                if rank as usize <= k {
                    hits += 1;
                }
            }
            None => excluded += 1,
        }
    }
    if included == 0 {
        return Err(Error::schema(
            "every realized match was missing from its ranked pool",
        ));
    }
    Ok(RecallResult {
        recall: hits as f64 / included as f64,
        included,
        excluded,
    })
}

/// Cross-ranks for one seeker: where each family's favorite vacancy lands
/// in the other family's ranking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossRanks {
    pub seeker_id: u64,
    /// Rank under the matching score of the hiring score's top vacancy.
    pub u_rank_of_p_top: u32,
    /// Rank under the hiring score of the matching score's top vacancy.
    pub p_rank_of_u_top: u32,
}

/// Distribution summary of cross-ranks across seekers.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDivergence {
    pub rows: Vec<CrossRanks>,
    pub median_u_rank_of_p_top: f64,
    pub median_p_rank_of_u_top: f64,
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// How far apart two score families rank each other's favorites. Both
/// inputs must hold full rankings over each seeker's pool; seekers are
/// matched by id and must appear in both.
pub fn rank_divergence(
    u_lists: &[RankedList],
    p_lists: &[RankedList],
) -> Result<RankDivergence> {
    if u_lists.is_empty() {
        return Err(Error::schema("rank divergence needs at least one seeker"));
    }
    let p_by_seeker: HashMap<u64, &RankedList> =
        p_lists.iter().map(|l| (l.seeker_id, l)).collect();
    let mut rows = Vec::with_capacity(u_lists.len());
    for u in u_lists {
        let p = p_by_seeker.get(&u.seeker_id).ok_or_else(|| {
            Error::schema(format!("seeker {} missing from hiring-score rankings", u.seeker_id))
        })?;
        let u_top = u
            .entries()
            .first()
            .ok_or_else(|| Error::schema(format!("seeker {} has an empty ranking", u.seeker_id)))?
            .vacancy_id;
        let p_top = p
            .entries()
            .first()
            .ok_or_else(|| Error::schema(format!("seeker {} has an empty ranking", u.seeker_id)))?
            .vacancy_id;
        let u_rank_of_p_top = u.rank_of(p_top).ok_or_else(|| {
            Error::schema(format!(
                "vacancy {p_top} missing from seeker {}'s matching ranking",
                u.seeker_id
            ))
        })?;
        let p_rank_of_u_top = p.rank_of(u_top).ok_or_else(|| {
            Error::schema(format!(
                "vacancy {u_top} missing from seeker {}'s hiring ranking",
                u.seeker_id
            ))
        })?;
        rows.push(CrossRanks {
            seeker_id: u.seeker_id,
            u_rank_of_p_top,
            p_rank_of_u_top,
        });
    }
    let median_u = median(rows.iter().map(|r| r.u_rank_of_p_top as f64).collect());
    let median_p = median(rows.iter().map(|r| r.p_rank_of_u_top as f64).collect());
    Ok(RankDivergence {
        rows,
        median_u_rank_of_p_top: median_u,
        median_p_rank_of_u_top: median_p,
    })
}
