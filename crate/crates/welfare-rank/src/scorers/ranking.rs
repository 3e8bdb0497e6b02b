//! Ranked lists, consideration sets, and the ranking rules under
//! comparison: score-threshold top-k, ordinal mixes, and the
//! welfare-index rule built from predicted probabilities.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

/// One vacancy in a ranked list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub vacancy_id: u64,
    pub score: f64,
    /// 1-based; rank 1 is the highest score.
    pub rank: u32,
}

/// Ordered recommendations for one seeker. Scores are non-increasing by
/// rank and ties are broken by ascending vacancy id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub seeker_id: u64,
    entries: Vec<RankEntry>,
    /// Set when fewer vacancies than requested were available.
    pub short_list: bool,
}

impl RankedList {
    fn from_sorted(seeker_id: u64, sorted: Vec<(u64, f64)>, short_list: bool) -> Self {
        let entries = sorted
            .into_iter()
            .enumerate()
            .map(|(i, (vacancy_id, score))| RankEntry {
                vacancy_id,
                score,
                rank: (i + 1) as u32,
            })
            .collect();
        RankedList {
            seeker_id,
            entries,
            short_list,
        }
    }

    pub fn entries(&self) -> &[RankEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rank of a vacancy in this list, if present.
    pub fn rank_of(&self, vacancy_id: u64) -> Option<u32> {
        self.entries.iter().find(|e| e.vacancy_id == vacancy_id).map(|e| e.rank)
    }

    /// Vacancy ids of the first `k` entries.
    pub fn top_ids(&self, k: usize) -> Vec<u64> {
        self.entries.iter().take(k).map(|e| e.vacancy_id).collect()
    }
}

pub(crate) fn sort_desc_stable_by_id(items: &mut [(u64, f64)]) {
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// Top `k` vacancies by score, ties broken by ascending vacancy id. When
/// fewer than `k` vacancies exist, all are returned and the list is
/// flagged short.
pub fn rank_top_k(seeker_id: u64, scores: &[(u64, f64)], k: usize) -> Result<RankedList> {
    if scores.is_empty() {
        return Err(Error::schema(format!(
            "cannot rank an empty vacancy list for seeker {seeker_id}"
        )));
    }
    if k == 0 {
        return Err(Error::domain("ranking needs k >= 1"));
    }
    if let Some((id, s)) = scores.iter().find(|(_, s)| !s.is_finite()) {
        return Err(Error::domain(format!("vacancy {id} has non-finite score {s}")));
    }
    let mut items = scores.to_vec();
    sort_desc_stable_by_id(&mut items);
    let short_list = items.len() < k;
    items.truncate(k);
    Ok(RankedList::from_sorted(seeker_id, items, short_list))
}

/// Cutoffs defining the consideration set, defaulting to 25/50/100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsiderationCutoffs {
    pub narrow: usize,
    pub mid: usize,
    pub wide: usize,
}

impl Default for ConsiderationCutoffs {
    fn default() -> Self {
        ConsiderationCutoffs {
            narrow: 25,
            mid: 50,
            wide: 100,
        }
    }
}

impl ConsiderationCutoffs {
    pub fn validate(&self) -> Result<()> {
        if self.narrow == 0 || self.narrow > self.mid || self.mid > self.wide {
            return Err(Error::config(format!(
                "consideration cutoffs must satisfy 0 < narrow <= mid <= wide, got {}/{}/{}",
                self.narrow, self.mid, self.wide
            )));
        }
        Ok(())
    }
}

/// Vacancies worth comparing across the two score families, with a flag
/// recording when a small pool forced the whole pool in.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsiderationSet {
    /// Ascending vacancy ids for deterministic iteration.
    pub vacancy_ids: Vec<u64>,
    pub whole_pool: bool,
}

/// Union of the short heads of both rankings plus the cross-intersections
/// of their longer heads: top-narrow of each, mid-of-one intersected with
/// wide-of-the-other, both ways.
pub fn consideration_set(
    u_ranks: &RankedList,
    p_ranks: &RankedList,
    cutoffs: ConsiderationCutoffs,
) -> Result<ConsiderationSet> {
    cutoffs.validate()?;
    let u_pool: HashSet<u64> = u_ranks.entries().iter().map(|e| e.vacancy_id).collect();
    let p_pool: HashSet<u64> = p_ranks.entries().iter().map(|e| e.vacancy_id).collect();
    if u_pool != p_pool {
        return Err(Error::schema(format!(
            "consideration set needs both rankings over the same pool ({} vs {} vacancies)",
            u_pool.len(),
            p_pool.len()
        )));
    }
    if u_pool.len() < cutoffs.narrow {
        let mut ids: Vec<u64> = u_pool.into_iter().collect();
        ids.sort_unstable();
        return Ok(ConsiderationSet {
            vacancy_ids: ids,
            whole_pool: true,
        });
    }
    let head = |list: &RankedList, k: usize| -> HashSet<u64> {
        list.entries().iter().take(k).map(|e| e.vacancy_id).collect()
    };
    let u_narrow = head(u_ranks, cutoffs.narrow);
    let p_narrow = head(p_ranks, cutoffs.narrow);
    let u_mid = head(u_ranks, cutoffs.mid);
    let p_mid = head(p_ranks, cutoffs.mid);
    let u_wide = head(u_ranks, cutoffs.wide);
    let p_wide = head(p_ranks, cutoffs.wide);

    let mut ids: HashSet<u64> = &u_narrow | &p_narrow;
    ids.extend(u_mid.intersection(&p_wide));
    ids.extend(p_mid.intersection(&u_wide));
    let mut ids: Vec<u64> = ids.into_iter().collect();
    ids.sort_unstable();
    Ok(ConsiderationSet {
        vacancy_ids: ids,
        whole_pool: false,
    })
}

/// Weight placed on the hiring-score preselection in an ordinal mix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixFraction {
    Quarter,
    Half,
    ThreeQuarters,
    Full,
}

impl MixFraction {
    pub fn as_f64(self) -> f64 {
        match self {
            MixFraction::Quarter => 0.25,
            MixFraction::Half => 0.5,
            MixFraction::ThreeQuarters => 0.75,
            MixFraction::Full => 1.0,
        }
    }

    pub const ALL: [MixFraction; 4] = [
        MixFraction::Quarter,
        MixFraction::Half,
        MixFraction::ThreeQuarters,
        MixFraction::Full,
    ];
}

/// Options for [`mix_rank`]; the defaults preselect 15 and display 10.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixOptions {
    pub n_preselect: usize,
    pub n_show: usize,
}

impl Default for MixOptions {
    fn default() -> Self {
        MixOptions {
            n_preselect: 15,
            n_show: 10,
        }
    }
}

/// Ordinal hybrid: filter the consideration set to its hiring-score head
/// (the larger of `n_preselect` and the ceiling of `f * L`), drop
/// vacancies not in the availability mask when one is supplied, re-rank
/// the survivors by the agency score, and return the top `n_preselect`.
pub fn mix_rank(
    seeker_id: u64,
    cs: &ConsiderationSet,
    fraction: MixFraction,
    p_scores: &[(u64, f64)],
    u_scores: &[(u64, f64)],
    available: Option<&HashSet<u64>>,
    opts: MixOptions,
) -> Result<RankedList> {
    if cs.vacancy_ids.is_empty() {
        return Err(Error::schema("mix ranking needs a nonempty consideration set"));
    }
    if opts.n_preselect == 0 || opts.n_show > opts.n_preselect {
        return Err(Error::config(format!(
            "mix options need 0 < n_show <= n_preselect, got show {} preselect {}",
            opts.n_show, opts.n_preselect
        )));
    }
    let p_map: HashMap<u64, f64> = p_scores.iter().copied().collect();
    let u_map: HashMap<u64, f64> = u_scores.iter().copied().collect();
    let lookup = |map: &HashMap<u64, f64>, id: u64, what: &str| -> Result<f64> {
        map.get(&id).copied().ok_or_else(|| {
            Error::schema(format!("vacancy {id} in consideration set lacks a {what} score"))
        })
    };

    let len = cs.vacancy_ids.len();
    let keep = opts.n_preselect.max((fraction.as_f64() * len as f64).ceil() as usize);
    let mut by_p: Vec<(u64, f64)> = cs
        .vacancy_ids
        .iter()
        .map(|&id| Ok((id, lookup(&p_map, id, "hiring")?)))
        .collect::<Result<_>>()?;
    sort_desc_stable_by_id(&mut by_p);
    by_p.truncate(keep);

    let mut by_u: Vec<(u64, f64)> = by_p
        .into_iter()
        .filter(|(id, _)| available.is_none_or(|mask| mask.contains(id)))
        .map(|(id, _)| Ok((id, lookup(&u_map, id, "matching")?)))
        .collect::<Result<_>>()?;
    if by_u.is_empty() {
        return Err(Error::schema(format!(
            "availability mask removed every preselected vacancy for seeker {seeker_id}"
        )));
    }
    sort_desc_stable_by_id(&mut by_u);
    let short_list = by_u.len() < opts.n_preselect;
    by_u.truncate(opts.n_preselect);
    Ok(RankedList::from_sorted(seeker_id, by_u, short_list))
}

/// Welfare-index ranking from predicted probabilities: each vacancy is
/// scored by `p_hat * (-log(1 - pa_hat))` and the top `k` are returned.
/// This is the index up to the positive scale that cancels in ranking.
pub fn gamma_rank(
    seeker_id: u64,
    predictions: &[(u64, f64, f64)],
    k: usize,
) -> Result<RankedList> {
    let mut scores = Vec::with_capacity(predictions.len());
    for &(id, p_hat, pa_hat) in predictions {
        if !(p_hat > 0.0 && p_hat < 1.0) {
            return Err(Error::domain(format!(
                "vacancy {id}: predicted hiring probability must be in (0, 1), got {p_hat}"
            )));
        }
        if !(pa_hat > 0.0 && pa_hat < 1.0) {
            return Err(Error::domain(format!(
                "vacancy {id}: predicted application probability must be in (0, 1), got {pa_hat}"
            )));
        }
        scores.push((id, p_hat * -(-pa_hat).ln_1p()));
    }
    rank_top_k(seeker_id, &scores, k)
}
