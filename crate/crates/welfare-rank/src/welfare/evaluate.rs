//! Step 5: split-sample comparison of recommendation arms against the
//! welfare-optimal counterfactual set.
//!
//! Each split fits the hiring and application models on one half of the
//! enrolled seekers and evaluates every arm, plus a synthetic arm built
//! from the counterfactual lists, on the other half. Reported numbers are
//! medians across splits of the estimates and of the confidence bounds.

use super::model::{fit_step, gamma_hat_scaled, Extracted, Standardizer, StepOutcome};
use super::optimal::{optimal_set, PoolPrediction};
use crate::error::{Error, Result};
use crate::sim::rng::{substream, TAG_BOOTSTRAP, TAG_SPLIT};
use crate::sim::{InteractionLog, ScoreSet};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::collections::BTreeMap;

/// Dominance comparisons ignore float dust below this absolute slack.
const DOMINANCE_TOL: f64 = 1e-12;

/// How the sample of enrolled seekers is split and resampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Number of accepted splits entering the medians.
    pub splits: usize,
    /// Share of seekers in the estimation half.
    pub fraction: f64,
    /// Cluster-bootstrap replications behind the gap confidence bounds.
    pub bootstrap_reps: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    /// 50 splits is the desk-scale default; full runs use 500.
    fn default() -> Self {
        SplitSpec {
            splits: 50,
            fraction: 0.5,
            bootstrap_reps: 1000,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.splits == 0 {
            return Err(Error::config("need at least one split"));
        }
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return Err(Error::config(format!(
                "split fraction must lie in (0, 1), got {}",
                self.fraction
            )));
        }
        if self.bootstrap_reps < 2 {
            return Err(Error::config("bootstrap needs at least 2 replications"));
        }
        Ok(())
    }
}

/// What enters the welfare models and the counterfactual search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareDesign {
    /// Score columns entering both probability models.
    pub score_columns: Vec<String>,
    /// Include display-position dummies among the controls.
    pub slot_controls: bool,
    /// Length of the counterfactual list.
    pub top_k: usize,
    /// Evaluate the counterfactual on at most this many held-out seekers
    /// per split; `None` uses all of them.
    pub pseudo_cap: Option<usize>,
    /// Taste-shock scale multiplying the welfare index; the pipeline
    /// normalizes to 1, other values are for sensitivity analysis.
    pub sigma: f64,
}

impl WelfareDesign {
    pub fn new<I: Into<String>>(columns: impl IntoIterator<Item = I>) -> Self {
        WelfareDesign {
            score_columns: columns.into_iter().map(Into::into).collect(),
            slot_controls: true,
            top_k: 10,
            pseudo_cap: None,
            sigma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.score_columns.is_empty() {
            return Err(Error::config("need at least one score column"));
        }
        if self.top_k == 0 {
            return Err(Error::config("counterfactual list length must be >= 1"));
        }
        if self.pseudo_cap == Some(0) {
            return Err(Error::config("counterfactual seeker cap must be >= 1 when set"));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::config(format!(
                "taste-shock scale must be > 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// A point estimate with confidence bounds; after aggregation each number
/// is the median of its per-split counterparts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub estimate: f64,
    pub ci95: (f64, f64),
    pub ci99: (f64, f64),
}

/// Across-split welfare summary of one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmWelfare {
    pub arm: String,
    /// Mean predicted hiring probability conditional on application.
    pub p_hat: MetricSummary,
    /// Mean predicted application probability.
    pub pa_hat: MetricSummary,
    /// Mean predicted hiring probability, the row-wise product.
    pub ph_hat: MetricSummary,
    /// Mean welfare index.
    pub gamma: MetricSummary,
    /// Mean counterfactual-minus-displayed welfare gap.
    pub gamma_gap: MetricSummary,
    /// Splits where this arm's held-out rows had no application; metrics
    /// for those splits are reported as zero rather than dropped.
    pub zero_application_splits: usize,
}

/// Counterfactual list of one held-out seeker: vacancies best-first with
/// their welfare index at the display position they would occupy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualList {
    pub seeker_id: u64,
    pub vacancy_ids: Vec<u64>,
    pub gamma_star: Vec<f64>,
    pub short: bool,
}

/// Output of [`evaluate_arms`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareEstimates {
    pub arms: Vec<ArmWelfare>,
    /// The synthetic arm showing each seeker their counterfactual list.
    pub optimal: ArmWelfare,
    /// Lists from the first accepted split.
    pub counterfactual: Vec<CounterfactualList>,
    pub splits_used: usize,
    /// Splits discarded because some arm had no held-out seeker.
    pub resampled_splits: usize,
    /// Count of (split, arm, metric) cells where the synthetic arm fell
    /// below a real arm by more than float dust.
    pub dominance_violations: usize,
    /// Largest observed gap between the two evaluation routes of the
    /// row-wise identity p_h = p * p_a.
    pub ph_identity_max_gap: f64,
    pub notes: Vec<String>,
}

impl WelfareEstimates {
    pub fn arm(&self, name: &str) -> Option<&ArmWelfare> {
        self.arms.iter().find(|a| a.arm == name)
    }
}

const N_METRICS: usize = 5;

#[derive(Clone, Copy)]
struct Stat {
    est: f64,
    lo95: f64,
    hi95: f64,
    lo99: f64,
    hi99: f64,
}

impl Stat {
    fn zero() -> Self {
        Stat {
            est: 0.0,
            lo95: 0.0,
            hi95: 0.0,
            lo99: 0.0,
            hi99: 0.0,
        }
    }

    fn from_mean(est: f64, se: f64, clusters: usize) -> Self {
        if se == 0.0 || clusters < 2 {
            return Stat {
                est,
                lo95: est,
                hi95: est,
                lo99: est,
                hi99: est,
            };
        }
        let df = (clusters - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
        let (q95, q99) = (t.inverse_cdf(0.975), t.inverse_cdf(0.995));
        Stat {
            est,
            lo95: est - q95 * se,
            hi95: est + q95 * se,
            lo99: est - q99 * se,
            hi99: est + q99 * se,
        }
    }
}

struct SplitArm {
    stats: [Stat; N_METRICS],
    zero_applications: bool,
}

struct SplitOutcome {
    arms: Vec<SplitArm>,
    pseudo: SplitArm,
    violations: usize,
    identity_gap: f64,
    lists: Vec<CounterfactualList>,
    notes: Vec<String>,
}

/// Mean with a cluster-robust standard error (clusters minus one scaling).
fn cluster_mean(values: &[f64], clusters: &[u64]) -> (f64, f64, usize) {
    debug_assert_eq!(values.len(), clusters.len());
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0, 0);
    }
    let mut groups: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    let mut total = 0.0;
    for (v, c) in values.iter().zip(clusters) {
        let e = groups.entry(*c).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
        total += v;
    }
    let mean = total / n as f64;
    let g = groups.len();
    if g < 2 {
        return (mean, 0.0, g);
    }
    let meat: f64 = groups
        .values()
        .map(|(s, ng)| {
            let d = s - *ng as f64 * mean;
            d * d
        })
        .sum();
    let var = meat * g as f64 / ((g - 1) as f64 * (n as f64) * (n as f64));
    (mean, var.max(0.0).sqrt(), g)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("metrics are finite"));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

struct Prepared<'a> {
    ex: Extracted,
    pool: Vec<&'a DMatrix<f64>>,
    /// Distinct seekers in id order.
    seekers: Vec<u64>,
    /// Arm of each seeker, aligned with `seekers`.
    seeker_arm: Vec<u32>,
    /// Log row indices of each seeker, aligned with `seekers`.
    seeker_rows: Vec<Vec<usize>>,
    /// Position in `seekers` of each log row's seeker.
    row_seeker: Vec<usize>,
    n_arms: usize,
    n_half: usize,
}

fn prepare<'a>(
    log: &InteractionLog,
    pool_scores: &'a ScoreSet,
    design: &WelfareDesign,
    split: &SplitSpec,
) -> Result<Prepared<'a>> {
    let ex = Extracted::from_log(log, &design.score_columns)?;
    let pool: Vec<&DMatrix<f64>> = design
        .score_columns
        .iter()
        .map(|c| pool_scores.column(c))
        .collect::<Result<_>>()?;
    let (pool_ns, pool_nv) = pool[0].shape();
    if pool_nv < design.top_k {
        return Err(Error::config(format!(
            "counterfactual list of {} needs a pool of at least that many vacancies, got {pool_nv}",
            design.top_k
        )));
    }

    let n_arms = log.arm_names.len();
    let mut index: BTreeMap<u64, usize> = BTreeMap::new();
    for &sid in &ex.seeker {
        if sid as usize >= pool_ns {
            return Err(Error::schema(format!(
                "seeker {sid} is outside the score pool of {pool_ns} seekers"
            )));
        }
        let next = index.len();
        index.entry(sid).or_insert(next);
    }
    // BTreeMap iteration fixes id order; re-derive positions from it.
    let seekers: Vec<u64> = index.keys().copied().collect();
    for (pos, s) in seekers.iter().enumerate() {
        *index.get_mut(s).expect("just inserted") = pos;
    }

    let mut seeker_arm = vec![u32::MAX; seekers.len()];
    let mut seeker_rows: Vec<Vec<usize>> = vec![Vec::new(); seekers.len()];
    let mut row_seeker = Vec::with_capacity(ex.seeker.len());
    for (i, (&sid, &arm)) in ex.seeker.iter().zip(&ex.arm).enumerate() {
        let pos = index[&sid];
        row_seeker.push(pos);
        seeker_rows[pos].push(i);
        if seeker_arm[pos] == u32::MAX {
            seeker_arm[pos] = arm;
        } else if seeker_arm[pos] != arm {
            return Err(Error::schema(format!("seeker {sid} appears under two arms")));
        }
    }
    for a in 0..n_arms {
        if !seeker_arm.iter().any(|&x| x as usize == a) {
            return Err(Error::schema(format!(
                "arm '{}' has no rows in the log",
                log.arm_names[a]
            )));
        }
    }

    let n_half = (seekers.len() as f64 * split.fraction).floor() as usize;
    if n_half == 0 || n_half >= seekers.len() {
        return Err(Error::config(format!(
            "splitting {} seekers at fraction {} leaves an empty half",
            seekers.len(),
            split.fraction
        )));
    }
    Ok(Prepared {
        ex,
        pool,
        seekers,
        seeker_arm,
        seeker_rows,
        row_seeker,
        n_arms,
        n_half,
    })
}

/// One evaluation attempt. `Ok(None)` means some arm had no held-out
/// seeker and the split must be redrawn.
fn run_split(
    p: &Prepared,
    design: &WelfareDesign,
    split: &SplitSpec,
    attempt: u64,
) -> Result<Option<SplitOutcome>> {
    let n_seekers = p.seekers.len();
    let mut rng = substream(split.seed, TAG_SPLIT, &[attempt]);
    let mut perm: Vec<usize> = (0..n_seekers).collect();
    perm.shuffle(&mut rng);
    let (s1, s2) = perm.split_at(p.n_half);

    let mut arm_present = vec![false; p.n_arms];
    for &si in s2 {
        arm_present[p.seeker_arm[si] as usize] = true;
    }
    if arm_present.iter().any(|ok| !ok) {
        return Ok(None);
    }

    let mut in1 = vec![false; n_seekers];
    for &si in s1 {
        in1[si] = true;
    }
    let row_mask: Vec<bool> = p.row_seeker.iter().map(|&pos| in1[pos]).collect();

    let std = Standardizer::fit_masked(&p.ex.raw, &row_mask, &p.ex.col_names)?;
    let b1 = fit_step(&p.ex, &std, &row_mask, StepOutcome::HiredGivenApplied, design.slot_controls)?;
    let b2 = fit_step(&p.ex, &std, &row_mask, StepOutcome::Applied, design.slot_controls)?;
    let mut notes: Vec<String> = Vec::new();
    notes.extend(b1.notes.iter().map(|n| format!("hiring model: {n}")));
    notes.extend(b2.notes.iter().map(|n| format!("application model: {n}")));

    // Predictions for every held-out row.
    let n_cols = p.ex.col_names.len();
    let mut identity_gap = 0.0f64;
    let mut row_pred: BTreeMap<usize, [f64; 4]> = BTreeMap::new();
    let mut z_buf = vec![0.0; n_cols];
    for (i, masked) in row_mask.iter().enumerate() {
        if *masked {
            continue;
        }
        for j in 0..n_cols {
            z_buf[j] = std.z(j, p.ex.raw[(i, j)]);
        }
        let slot = p.ex.slot[i];
        let (ph, pa) = (b1.predict(&z_buf, slot), b2.predict(&z_buf, slot));
        let phh = ph * pa;
        let gh = gamma_hat_scaled(ph, pa, design.sigma)?;
        identity_gap = identity_gap.max((phh - (ph.ln() + pa.ln()).exp()).abs());
        row_pred.insert(i, [ph, pa, phh, gh]);
    }

    // Counterfactual lists for the capped held-out subsample.
    let cap = design.pseudo_cap.unwrap_or(s2.len()).min(s2.len());
    let nv = p.pool[0].ncols();
    let mut lists = Vec::with_capacity(cap);
    let mut star_by_seeker: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut pseudo_vals: [Vec<f64>; 4] = Default::default();
    let mut pseudo_clusters = Vec::new();
    let mut z_pool = vec![vec![0.0; n_cols]; nv];
    for &si in &s2[..cap] {
        let sid = p.seekers[si] as usize;
        for (j, z_row) in z_pool.iter_mut().enumerate() {
            for (c, z) in z_row.iter_mut().enumerate() {
                *z = std.z(c, p.pool[c][(sid, j)]);
            }
        }
        let pool: Vec<PoolPrediction> = z_pool
            .iter()
            .enumerate()
            .map(|(j, z)| PoolPrediction {
                vacancy_id: j as u64,
                p_hat: b1.predict(z, 1),
                pa_hat: b2.predict(z, 1),
            })
            .collect();
        let best = optimal_set(p.seekers[si], &pool, design.top_k)?;

        let mut stars = Vec::with_capacity(best.entries.len());
        let mut ids = Vec::with_capacity(best.entries.len());
        for (rank0, entry) in best.entries.iter().enumerate() {
            let slot = (rank0 + 1) as u32;
            let z = &z_pool[entry.vacancy_id as usize];
            let (ph, pa) = (b1.predict(z, slot), b2.predict(z, slot));
            let phh = ph * pa;
            let gh = gamma_hat_scaled(ph, pa, design.sigma)?;
            identity_gap = identity_gap.max((phh - (ph.ln() + pa.ln()).exp()).abs());
            for (k, v) in [ph, pa, phh, gh].into_iter().enumerate() {
                pseudo_vals[k].push(v);
            }
            pseudo_clusters.push(p.seekers[si]);
            stars.push(gh);
            ids.push(entry.vacancy_id);
        }
        lists.push(CounterfactualList {
            seeker_id: p.seekers[si],
            vacancy_ids: ids,
            gamma_star: stars.clone(),
            short: best.short,
        });
        star_by_seeker.insert(si, stars);
    }

    // The synthetic arm's own summary, including its self-comparison gap.
    let mut pseudo_stats = [Stat::zero(); N_METRICS];
    for m in 0..4 {
        let (est, se, g) = cluster_mean(&pseudo_vals[m], &pseudo_clusters);
        pseudo_stats[m] = Stat::from_mean(est, se, g);
    }
    let self_diffs: Vec<(u64, Vec<f64>)> = star_by_seeker
        .iter()
        .map(|(si, stars)| (p.seekers[*si], vec![0.0; stars.len()]))
        .collect();
    pseudo_stats[4] = gap_stat(&self_diffs, split, attempt, p.n_arms as u64);
    let pseudo = SplitArm {
        stats: pseudo_stats,
        zero_applications: false,
    };

    // Per-arm summaries over held-out displayed rows.
    let mut arms = Vec::with_capacity(p.n_arms);
    let mut violations = 0usize;
    for a in 0..p.n_arms {
        let mut vals: [Vec<f64>; 4] = Default::default();
        let mut clusters = Vec::new();
        let mut any_application = false;
        let mut diffs: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for &si in s2 {
            if p.seeker_arm[si] as usize != a {
                continue;
            }
            for &i in &p.seeker_rows[si] {
                let pred = row_pred[&i];
                for (k, v) in pred.into_iter().enumerate() {
                    vals[k].push(v);
                }
                clusters.push(p.seekers[si]);
                any_application |= p.ex.applied[i];
                if let Some(stars) = star_by_seeker.get(&si) {
                    let rank0 = (p.ex.slot[i] - 1) as usize;
                    if let Some(star) = stars.get(rank0) {
                        diffs.entry(si).or_default().push(star - pred[3]);
                    }
                }
            }
        }

        if !any_application {
            arms.push(SplitArm {
                stats: [Stat::zero(); N_METRICS],
                zero_applications: true,
            });
            continue;
        }
        let mut stats = [Stat::zero(); N_METRICS];
        for m in 0..4 {
            let (est, se, g) = cluster_mean(&vals[m], &clusters);
            stats[m] = Stat::from_mean(est, se, g);
            if pseudo.stats[m].est < stats[m].est - DOMINANCE_TOL {
                violations += 1;
            }
        }
        let arm_diffs: Vec<(u64, Vec<f64>)> = diffs
            .into_iter()
            .map(|(si, d)| (p.seekers[si], d))
            .collect();
        if arm_diffs.is_empty() {
            notes.push(format!(
                "arm '{a}' had no seeker in the counterfactual subsample of attempt {attempt}"
            ));
        }
        stats[4] = gap_stat(&arm_diffs, split, attempt, a as u64);
        arms.push(SplitArm {
            stats,
            zero_applications: false,
        });
    }

    Ok(Some(SplitOutcome {
        arms,
        pseudo,
        violations,
        identity_gap,
        lists,
        notes,
    }))
}

/// Mean welfare gap with a seeker-level bootstrap standard error.
fn gap_stat(diffs: &[(u64, Vec<f64>)], split: &SplitSpec, attempt: u64, arm: u64) -> Stat {
    let g = diffs.len();
    let n: usize = diffs.iter().map(|(_, d)| d.len()).sum();
    if g == 0 || n == 0 {
        return Stat::zero();
    }
    let mean = diffs.iter().flat_map(|(_, d)| d).sum::<f64>() / n as f64;
    if g < 2 {
        return Stat::from_mean(mean, 0.0, g);
    }
    let mut rng = substream(split.seed, TAG_BOOTSTRAP, &[attempt, arm]);
    let mut reps = Vec::with_capacity(split.bootstrap_reps);
    for _ in 0..split.bootstrap_reps {
        let mut total = 0.0;
        let mut count = 0usize;
        for _ in 0..g {
            let (_, d) = &diffs[rng.gen_range(0..g)];
            total += d.iter().sum::<f64>();
            count += d.len();
        }
        if count > 0 {
            reps.push(total / count as f64);
        }
    }
    let rn = reps.len() as f64;
    let rmean = reps.iter().sum::<f64>() / rn;
    let se = (reps.iter().map(|r| (r - rmean) * (r - rmean)).sum::<f64>() / (rn - 1.0)).sqrt();
    Stat::from_mean(mean, se, g)
}

fn summarize(per_split: &[SplitOutcome], pick: impl Fn(&SplitOutcome) -> &SplitArm, name: &str) -> ArmWelfare {
    let metric = |m: usize| -> MetricSummary {
        let col = |f: &dyn Fn(&Stat) -> f64| -> f64 {
            median(per_split.iter().map(|s| f(&pick(s).stats[m])).collect())
        };
        MetricSummary {
            estimate: col(&|s| s.est),
            ci95: (col(&|s| s.lo95), col(&|s| s.hi95)),
            ci99: (col(&|s| s.lo99), col(&|s| s.hi99)),
        }
    };
    ArmWelfare {
        arm: name.to_string(),
        p_hat: metric(0),
        pa_hat: metric(1),
        ph_hat: metric(2),
        gamma: metric(3),
        gamma_gap: metric(4),
        zero_application_splits: per_split.iter().filter(|s| pick(s).zero_applications).count(),
    }
}

/// Runs the full split-sample pipeline: per split, fit the two
/// probability models on the estimation half, evaluate all arms and the
/// counterfactual on the held-out half, then aggregate medians.
pub fn evaluate_arms(
    log: &InteractionLog,
    pool_scores: &ScoreSet,
    design: &WelfareDesign,
    split: &SplitSpec,
) -> Result<WelfareEstimates> {
    design.validate()?;
    split.validate()?;
    let prepared = prepare(log, pool_scores, design, split)?;

    let mut accepted: Vec<SplitOutcome> = Vec::new();
    let mut resampled = 0usize;
    let mut next_attempt = 0u64;
    let attempt_cap = (split.splits as u64) * 100 + 1000;
    while accepted.len() < split.splits {
        if next_attempt >= attempt_cap {
            return Err(Error::numeric(format!(
                "gave up after {next_attempt} split attempts; some arm is almost never \
                 in the held-out half"
            )));
        }
        let need = split.splits - accepted.len();
        let batch: Vec<Result<Option<SplitOutcome>>> = (0..need as u64)
            .into_par_iter()
            .map(|o| run_split(&prepared, design, split, next_attempt + o))
            .collect();
        for outcome in batch {
            match outcome? {
                Some(s) => accepted.push(s),
                None => resampled += 1,
            }
        }
        next_attempt += need as u64;
    }

    let arm_summaries: Vec<ArmWelfare> = (0..prepared.n_arms)
        .map(|a| summarize(&accepted, |s| &s.arms[a], &log.arm_names[a]))
        .collect();
    let optimal = summarize(&accepted, |s| &s.pseudo, "gamma-optimal");

    let mut notes: Vec<String> = Vec::new();
    if resampled > 0 {
        notes.push(format!(
            "{resampled} splits were discarded and redrawn because an arm was missing \
             from the held-out half"
        ));
    }
    for s in &accepted {
        for n in &s.notes {
            if !notes.contains(n) {
                notes.push(n.clone());
            }
        }
    }

    Ok(WelfareEstimates {
        arms: arm_summaries,
        optimal,
        counterfactual: accepted[0].lists.clone(),
        splits_used: accepted.len(),
        resampled_splits: resampled,
        dominance_violations: accepted.iter().map(|s| s.violations).sum(),
        ph_identity_max_gap: accepted
            .iter()
            .map(|s| s.identity_gap)
            .fold(0.0, f64::max),
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gamma_closed;
    use crate::sim::rng::{draw_standard_normal, substream as sub, TAG_NOISE};
    use crate::sim::{
        assign_treatments, benchmark_score_columns, run_experiment, sample_market,
        synthesize_score_columns, ExperimentDesign, Market, MarketSpec, ScorerRegistry,
    };
    use crate::welfare::model::tests::{columns, planted_log};

    fn market_pipeline(
        ns: usize,
        nv: usize,
        arms: &[(&str, &str)],
        seed: u64,
    ) -> (Market, ScoreSet, InteractionLog) {
        let spec = MarketSpec::calibrated(ns, nv, seed).unwrap();
        let market = sample_market(&spec).unwrap();
        let scores =
            synthesize_score_columns(&market, &benchmark_score_columns(), seed ^ 1).unwrap();
        let design = ExperimentDesign::equal_shares(arms, vec![], 10, 0.3);
        let table = assign_treatments(&market.seekers, &design, &spec.strata, seed ^ 2).unwrap();
        let log = run_experiment(
            &market,
            &scores,
            &table,
            &ScorerRegistry::benchmark(),
            &design,
            &market.spec.params,
            market.spec.resolved_click_offset(),
            seed ^ 3,
        )
        .unwrap();
        (market, scores, log)
    }

    fn true_gamma_by_arm(market: &Market, log: &InteractionLog) -> Vec<f64> {
        let sigma = market.spec.params.sigma;
        let mut sums = vec![(0.0, 0usize); log.arm_names.len()];
        for row in &log.rows {
            let (i, j) = (row.seeker_id as usize, row.vacancy_id as usize);
            let g = gamma_closed(market.true_p[(i, j)], market.surplus_at(i, j), sigma).unwrap();
            let e = &mut sums[row.arm as usize];
            e.0 += g;
            e.1 += 1;
        }
        sums.iter().map(|(s, n)| s / *n as f64).collect()
    }

    #[test]
    fn synthetic_market_dominance_ordering_and_self_comparison() {
        let arms = [("u", "u"), ("v0", "v0"), ("app", "app"), ("boost", "boost")];
        let (market, scores, log) = market_pipeline(3_000, 120, &arms, 41);
        let design = WelfareDesign::new(columns());
        let split = SplitSpec {
            splits: 10,
            bootstrap_reps: 200,
            seed: 5,
            ..SplitSpec::default()
        };
        let est = evaluate_arms(&log, &scores, &design, &split).unwrap();

        assert_eq!(est.splits_used, 10);
        assert!(est.ph_identity_max_gap <= 1e-14, "{}", est.ph_identity_max_gap);

        // The synthetic arm's self-comparison gap is exactly zero, and on
        // the welfare metrics it beats every arm. Dominance on the
        // conditional-hire metric alone is not structural (a pure
        // firm-value ranking can win it on a generic market), so the
        // all-metric violation counter is not pinned here.
        assert_eq!(est.optimal.gamma_gap.estimate, 0.0);
        assert_eq!(est.optimal.gamma_gap.ci99, (0.0, 0.0));
        for arm in &est.arms {
            assert_eq!(arm.zero_application_splits, 0);
            for (o, a) in [
                (est.optimal.ph_hat.estimate, arm.ph_hat.estimate),
                (est.optimal.gamma.estimate, arm.gamma.estimate),
            ] {
                assert!(o >= a - DOMINANCE_TOL, "{}: {o} < {a}", arm.arm);
            }
            assert!(
                arm.gamma_gap.estimate >= -DOMINANCE_TOL,
                "{}: gap {}",
                arm.arm,
                arm.gamma_gap.estimate
            );
        }

        // Where the true welfare gap between two arms clears twice the
        // estimated CI half-width, the estimated ordering matches truth.
        let truth = true_gamma_by_arm(&market, &log);
        let mut checked = 0;
        for a in 0..est.arms.len() {
            for b in (a + 1)..est.arms.len() {
                let (ea, eb) = (&est.arms[a], &est.arms[b]);
                let half = |m: &MetricSummary| 0.5 * (m.ci95.1 - m.ci95.0);
                let guard = 2.0 * half(&ea.gamma).max(half(&eb.gamma));
                let true_gap = truth[a] - truth[b];
                if true_gap.abs() > guard {
                    checked += 1;
                    assert_eq!(
                        (ea.gamma.estimate - eb.gamma.estimate).signum(),
                        true_gap.signum(),
                        "{} vs {}",
                        ea.arm,
                        eb.arm
                    );
                }
            }
        }
        assert!(checked >= 2, "calibration should separate some arms");
    }

    #[test]
    fn single_split_and_determinism() {
        let arms = [("u", "u"), ("v2", "v2")];
        let (_, scores, log) = market_pipeline(1_500, 60, &arms, 7);
        let design = WelfareDesign {
            pseudo_cap: Some(40),
            ..WelfareDesign::new(columns())
        };
        let split = SplitSpec {
            splits: 1,
            bootstrap_reps: 50,
            seed: 9,
            ..SplitSpec::default()
        };
        let a = evaluate_arms(&log, &scores, &design, &split).unwrap();
        let b = evaluate_arms(&log, &scores, &design, &split).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.splits_used, 1);
        assert_eq!(a.counterfactual.len(), 40);
        for l in &a.counterfactual {
            assert_eq!(l.vacancy_ids.len(), 10);
            assert!(!l.short);
            // Baseline ordering puts the best-first structure into the
            // slot-adjusted values only approximately; the list length
            // and id ranges are the hard guarantees.
            for &v in &l.vacancy_ids {
                assert!((v as usize) < 60);
            }
        }
        let t4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let c = t4.install(|| evaluate_arms(&log, &scores, &design, &split).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn held_out_outcomes_never_reach_the_models() {
        let arms = [("u", "u"), ("v0", "v0")];
        let (_, scores, log) = market_pipeline(1_500, 60, &arms, 13);
        let design = WelfareDesign {
            pseudo_cap: Some(50),
            ..WelfareDesign::new(columns())
        };
        let split = SplitSpec {
            splits: 1,
            bootstrap_reps: 50,
            seed: 3,
            ..SplitSpec::default()
        };
        let base = evaluate_arms(&log, &scores, &design, &split).unwrap();

        // Reconstruct the single split's estimation half, then poison
        // every held-out outcome. Nothing may move.
        let mut seekers: Vec<u64> = log.rows.iter().map(|r| r.seeker_id).collect();
        seekers.sort_unstable();
        seekers.dedup();
        let mut perm: Vec<usize> = (0..seekers.len()).collect();
        perm.shuffle(&mut sub(split.seed, TAG_SPLIT, &[0]));
        let half: std::collections::BTreeSet<u64> = perm[..seekers.len() / 2]
            .iter()
            .map(|&i| seekers[i])
            .collect();
        let mut poisoned = log.clone();
        let mut changed = 0;
        for row in &mut poisoned.rows {
            if !half.contains(&row.seeker_id) {
                changed += usize::from(!(row.clicked && row.applied && row.hired));
                row.clicked = true;
                row.applied = true;
                row.hired = true;
            }
        }
        assert!(changed > 100, "poison must actually flip outcomes");
        let after = evaluate_arms(&poisoned, &scores, &design, &split).unwrap();
        assert_eq!(base, after);
    }

    #[test]
    fn arm_with_no_applications_is_flagged_zero() {
        let mut log = planted_log(300, 5, [0.4, 0.0, 0.0, 0.8, 0.0], -0.6, [0.3; 5], -1.0, 31);
        log.arm_names = vec!["live".into(), "dead".into()];
        for row in &mut log.rows {
            if row.seeker_id % 3 == 0 {
                row.arm = 1;
                row.clicked = false;
                row.applied = false;
                row.hired = false;
            }
        }
        let nv = 40;
        let mut mats = Vec::new();
        let mut rng = sub(77, TAG_NOISE, &[0]);
        for _ in 0..5 {
            mats.push(DMatrix::from_fn(300, nv, |_, _| draw_standard_normal(&mut rng)));
        }
        let pool = ScoreSet::new(columns(), mats).unwrap();
        let design = WelfareDesign {
            top_k: 5,
            pseudo_cap: Some(30),
            ..WelfareDesign::new(columns())
        };
        let split = SplitSpec {
            splits: 4,
            bootstrap_reps: 50,
            seed: 1,
            ..SplitSpec::default()
        };
        let est = evaluate_arms(&log, &pool, &design, &split).unwrap();
        let dead = est.arm("dead").unwrap();
        assert_eq!(dead.zero_application_splits, 4);
        assert_eq!(dead.gamma.estimate, 0.0);
        assert_eq!(dead.p_hat.ci99, (0.0, 0.0));
        let live = est.arm("live").unwrap();
        assert_eq!(live.zero_application_splits, 0);
        assert!(live.gamma.estimate > 0.0);
        assert_eq!(est.dominance_violations, 0);
    }

    #[test]
    fn median_of_split_estimates_disperses_less_with_more_splits() {
        let log = planted_log(700, 5, [0.5, 0.2, 0.0, 0.7, 0.0], -0.9, [0.4; 5], -1.3, 53);
        let nv = 50;
        let mut rng = sub(54, TAG_NOISE, &[1]);
        let mats = (0..5)
            .map(|_| DMatrix::from_fn(700, nv, |_, _| draw_standard_normal(&mut rng)))
            .collect();
        let pool = ScoreSet::new(columns(), mats).unwrap();
        let design = WelfareDesign {
            top_k: 5,
            pseudo_cap: Some(40),
            ..WelfareDesign::new(columns())
        };

        let dispersion = |splits: usize| -> f64 {
            let medians: Vec<f64> = (1..=6u64)
                .map(|seed| {
                    let spec = SplitSpec {
                        splits,
                        bootstrap_reps: 10,
                        seed,
                        ..SplitSpec::default()
                    };
                    evaluate_arms(&log, &pool, &design, &spec).unwrap().arms[0]
                        .gamma
                        .estimate
                })
                .collect();
            let m = medians.iter().sum::<f64>() / medians.len() as f64;
            (medians.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (medians.len() - 1) as f64)
                .sqrt()
        };
        let (d10, d50, d200) = (dispersion(10), dispersion(50), dispersion(200));
        assert!(d200 < d10, "sd at 200 splits {d200} vs 10 splits {d10}");
        assert!(d50 < 1.2 * d10, "sd at 50 splits {d50} vs 10 splits {d10}");
        assert!(d200 < 1.2 * d50, "sd at 200 splits {d200} vs 50 splits {d50}");
    }

    #[test]
    fn low_application_rates_put_gamma_near_the_product_approximation() {
        let log = planted_log(3_000, 5, [0.2, 0.0, 0.0, 0.3, 0.0], -5.2, [0.5; 5], -1.0, 59);
        let cols = columns();
        let std = Standardizer::from_log(&log, &cols).unwrap();
        let b1 = crate::welfare::fit_hire_given_apply(&log, &cols, &std, true).unwrap();
        let b2 = crate::welfare::fit_apply(&log, &cols, &std, true).unwrap();
        let (mut g_sum, mut approx_sum, mut max_pa, mut n) = (0.0, 0.0, 0.0f64, 0);
        for row in &log.rows {
            let z = std.apply_row(&row.scores);
            let (ph, pa) = (b1.predict(&z, row.slot), b2.predict(&z, row.slot));
            g_sum += crate::welfare::gamma_hat(ph, pa).unwrap();
            approx_sum += ph * pa * (1.0 + pa / 2.0);
            max_pa = max_pa.max(pa);
            n += 1;
        }
        assert!(max_pa <= 0.08, "calibration: max pa {max_pa}");
        let rel = ((g_sum - approx_sum) / g_sum).abs();
        assert!(rel < 0.01, "relative gap {rel} over {n} rows");
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let log = planted_log(100, 4, [0.5; 5], -0.5, [0.3; 5], -1.0, 61);
        let nv = 20;
        let mut rng = sub(8, TAG_NOISE, &[3]);
        let mats = (0..5)
            .map(|_| DMatrix::from_fn(100, nv, |_, _| draw_standard_normal(&mut rng)))
            .collect();
        let pool = ScoreSet::new(columns(), mats).unwrap();
        let good = WelfareDesign {
            top_k: 5,
            ..WelfareDesign::new(columns())
        };
        let split = SplitSpec {
            splits: 1,
            bootstrap_reps: 10,
            seed: 2,
            ..SplitSpec::default()
        };

        let zero_splits = SplitSpec { splits: 0, ..split };
        assert!(evaluate_arms(&log, &pool, &good, &zero_splits).is_err());

        let deep = WelfareDesign { top_k: 21, ..good.clone() };
        assert!(evaluate_arms(&log, &pool, &deep, &split).is_err());

        let mut ghost = log.clone();
        ghost.arm_names.push("ghost".into());
        let err = evaluate_arms(&ghost, &pool, &good, &split).unwrap_err();
        assert!(err.to_string().contains("ghost"), "{err}");

        let mut stray = log.clone();
        stray.rows[0].seeker_id = 5_000;
        assert!(evaluate_arms(&stray, &pool, &good, &split).is_err());
    }
}
