//! Forward-looking job seekers under a ranking system.
//!
//! A seeker who understands that recommendations come from the top of the
//! ranked pool re-solves their value, which shifts every reservation
//! utility by the same amount. The shift has the same sign as the myopic
//! value gain but is damped by the extra hiring hazard, and it can be
//! bracketed in closed form from the myopic quantities alone.

use crate::error::{Error, Result};
use crate::model::params::{ModelParams, VacancyDistribution};
use crate::model::selection::{top_share, SelectedAtom};
use crate::model::value::{gamma_at, value_with_rs_myopic};
use crate::model::{logistic_cdf, softplus};

const BISECTION_TOL: f64 = 1e-10;

/// A forward-looking seeker's environment: the ranked pool, the selection
/// share, and the baseline value their myopic twin would keep using.
#[derive(Debug, Clone)]
pub struct AdjustedValueProblem<'a> {
    params: &'a ModelParams,
    dist: &'a VacancyDistribution,
    scores: &'a [f64],
    s: f64,
    rv0_baseline: f64,
    selected: Vec<SelectedAtom>,
}

impl<'a> AdjustedValueProblem<'a> {
    /// Builds a problem, fixing the selected set. Selection depends on the
    /// scores only, so it does not change while the value is re-solved.
    pub fn new(
        params: &'a ModelParams,
        dist: &'a VacancyDistribution,
        scores: &'a [f64],
        s: f64,
        rv0_baseline: f64,
    ) -> Result<Self> {
        if !rv0_baseline.is_finite() {
            return Err(Error::domain(format!(
                "baseline value rate must be finite, got {rv0_baseline}"
            )));
        }
        let weights: Vec<f64> = dist.atoms().iter().map(|a| a.weight).collect();
        let selected = top_share(&weights, scores, s)?;
        Ok(AdjustedValueProblem {
            params,
            dist,
            scores,
            s,
            rv0_baseline,
            selected,
        })
    }

    /// Value map over the fixed selected set at candidate value `z`.
    fn map(&self, z: f64) -> f64 {
        let mean: f64 = self
            .selected
            .iter()
            .map(|sel| sel.weight * gamma_at(self.params, &self.dist.atoms()[sel.index].lottery, z))
            .sum::<f64>()
            / self.s;
        self.params.u_b + self.params.alpha1 / self.params.effective_discount() * mean
    }
}

/// Solved adjusted value together with its myopic companions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjustedSolution {
    /// Fixed point of the forward-looking value map.
    pub rv1_adj: f64,
    /// Myopic value at the frozen baseline reservation rule.
    pub rv1_myopic: f64,
    /// Myopic value gain over the baseline.
    pub delta_m: f64,
    /// Forward-looking value gain over the baseline.
    pub delta_adj: f64,
}

/// Solves the forward-looking value: the fixed point of the value map
/// restricted to the selected pool. The map is strictly decreasing in the
/// candidate value, so bisection on `[u_b, rv1_myopic + |delta_m|]` finds
/// the unique fixed point.
pub fn solve_adjusted_value(prob: &AdjustedValueProblem) -> Result<AdjustedSolution> {
    let rv1_myopic = value_with_rs_myopic(
        prob.params,
        prob.dist,
        prob.scores,
        prob.s,
        prob.rv0_baseline,
    )?;
    let delta_m = rv1_myopic - prob.rv0_baseline;

    let mut lo = prob.params.u_b;
    let mut hi = rv1_myopic + delta_m.abs();
    let h_lo = prob.map(lo) - lo;
    let h_hi = prob.map(hi) - hi;
    // The map sits above the identity at u_b and below it at the upper
    // endpoint; tolerate rounding at an endpoint that is itself the root.
    let slack = 1e-9 * (1.0 + hi.abs());
    if h_lo < -slack || h_hi > slack {
        return Err(Error::numeric(format!(
            "adjusted value not bracketed on [{lo}, {hi}]: residuals ({h_lo}, {h_hi})"
        )));
    }
    let mut rv1_adj = 0.5 * (lo + hi);
    for _ in 0..200 {
        if hi - lo < BISECTION_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if prob.map(mid) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
        rv1_adj = 0.5 * (lo + hi);
    }
    Ok(AdjustedSolution {
        rv1_adj,
        rv1_myopic,
        delta_m,
        delta_adj: rv1_adj - prob.rv0_baseline,
    })
}

/// Expected hiring rate over the selected pool when the seeker's outside
/// value is `z`: the selection-weighted mean of `p * F(delta/sigma)`.
pub fn theta(prob: &AdjustedValueProblem, z: f64) -> Result<f64> {
    let params = prob.params;
    let kbar = params.apply_cost_rate();
    let rbar = params.reject_cost_rate();
    let rate = prob
        .selected
        .iter()
        .map(|sel| {
            let lot = &prob.dist.atoms()[sel.index].lottery;
            let u_star = z - rbar + (kbar + rbar) / lot.p;
            sel.weight * lot.p * logistic_cdf((lot.u - u_star) / params.sigma)
        })
        .sum::<f64>()
        / prob.s;
    Ok(rate)
}

/// Closed-form bracket for the forward-looking value gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaBracket {
    pub lower: f64,
    pub upper: f64,
    /// First-order magnitude estimate; equals the lower endpoint.
    pub approx: f64,
}

/// Brackets the forward-looking gain from myopic quantities alone:
/// the gain is the myopic gain damped by the hiring hazard, with the
/// hazard evaluated somewhere between the myopic and adjusted values.
/// Requires a nonnegative myopic gain, the case the ordering covers.
pub fn bracket_delta_adj(
    delta_m: f64,
    theta_m: f64,
    theta_adj: f64,
    params: &ModelParams,
) -> Result<DeltaBracket> {
    if !(delta_m >= 0.0) {
        return Err(Error::domain(format!(
            "bracket requires a nonnegative myopic gain, got {delta_m}"
        )));
    }
    for (name, value) in [("theta_m", theta_m), ("theta_adj", theta_adj)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::domain(format!("{name} must be a rate in [0, 1], got {value}")));
        }
    }
    let rq = params.effective_discount();
    Ok(DeltaBracket {
        lower: delta_m * rq / (rq + params.alpha0 * theta_m),
        upper: delta_m * rq / (rq + params.alpha0 * theta_adj),
        approx: delta_m * rq / (rq + params.alpha0 * theta_m),
    })
}

/// Adjusted reservation utility at a sure hire: the baseline threshold
/// shifted one-for-one by the forward-looking gain.
pub fn reservation_shift(delta_adj: f64, u0_star_at_p1: f64) -> f64 {
    u0_star_at_p1 + delta_adj
}

/// One row of the shifted-score diagnostic scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftScanRow {
    /// Surplus shift applied inside the score.
    pub x: f64,
    /// Forward-looking value under the shifted score.
    pub rv1_adj: f64,
    /// Forward-looking gain under the shifted score.
    pub delta_adj: f64,
}

/// Diagnostic scan over scores built from a shifted surplus,
/// `S_x = p * sigma * log(1 + exp((delta - x)/sigma))` with the surplus
/// taken at the baseline value. Reports the forward-looking value at each
/// shift without claiming any shift is optimal.
pub fn scan_shifted_scores(
    params: &ModelParams,
    dist: &VacancyDistribution,
    s: f64,
    rv0_baseline: f64,
    xs: &[f64],
) -> Result<Vec<ShiftScanRow>> {
    let kbar = params.apply_cost_rate();
    let rbar = params.reject_cost_rate();
    let mut rows = Vec::with_capacity(xs.len());
    for &x in xs {
        if !x.is_finite() {
            return Err(Error::domain(format!("score shift must be finite, got {x}")));
        }
        let scores: Vec<f64> = dist
            .atoms()
            .iter()
            .map(|a| {
                let u_star = rv0_baseline - rbar + (kbar + rbar) / a.lottery.p;
                let delta = a.lottery.u - u_star;
                a.lottery.p * params.sigma * softplus((delta - x) / params.sigma)
            })
            .collect();
        let prob = AdjustedValueProblem::new(params, dist, &scores, s, rv0_baseline)?;
        let solution = solve_adjusted_value(&prob)?;
        rows.push(ShiftScanRow {
            x,
            rv1_adj: solution.rv1_adj,
            delta_adj: solution.delta_adj,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::VacancyLottery;
    use crate::model::value::solve_value_unemployment;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(alpha0: f64, alpha1: f64) -> ModelParams {
        ModelParams::new(0.05, 0.15, 0.2, 0.3, 0.5, 1.0, alpha0)
            .unwrap()
            .with_alpha1(alpha1)
            .unwrap()
    }

    fn random_pool(rng: &mut ChaCha8Rng, n: usize) -> VacancyDistribution {
        let lotteries = (0..n)
            .map(|_| {
                VacancyLottery::new(rng.gen_range(0.05..1.0), rng.gen_range(-1.0..3.0)).unwrap()
            })
            .collect();
        VacancyDistribution::uniform(lotteries).unwrap()
    }

    fn index_scores(p: &ModelParams, d: &VacancyDistribution, rv0: f64) -> Vec<f64> {
        d.atoms().iter().map(|a| gamma_at(p, &a.lottery, rv0)).collect()
    }

    #[test]
    fn full_share_same_environment_recovers_baseline() {
        let p = params(0.6, 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = random_pool(&mut rng, 6);
        let rv0 = solve_value_unemployment(&p, &d).unwrap();
        let scores = vec![0.0; 6];
        let prob = AdjustedValueProblem::new(&p, &d, &scores, 1.0, rv0).unwrap();
        let sol = solve_adjusted_value(&prob).unwrap();
        assert!((sol.rv1_adj - rv0).abs() < 1e-8, "{} vs {rv0}", sol.rv1_adj);
        assert!(sol.delta_m.abs() < 1e-8);
        assert!(sol.delta_adj.abs() < 1e-8);
    }

    #[test]
    fn agrees_with_damped_iteration_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..40 {
            let p = params(rng.gen_range(0.1..1.5), rng.gen_range(0.1..2.0));
            let n = rng.gen_range(2..10);
            let d = random_pool(&mut rng, n);
            let rv0 = solve_value_unemployment(&p, &d).unwrap();
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = rng.gen_range(0.15..1.0);
            let prob = AdjustedValueProblem::new(&p, &d, &scores, s, rv0).unwrap();
            let sol = solve_adjusted_value(&prob).unwrap();

            // Independent route: damped fixed-point iteration on the same map.
            let mut z = p.u_b;
            for _ in 0..200_000 {
                let next = prob.map(z);
                if (next - z).abs() < 1e-13 {
                    break;
                }
                z += 0.5 * (next - z);
            }
            assert!((sol.rv1_adj - z).abs() < 1e-9, "{} vs {z}", sol.rv1_adj);
        }
    }

    #[test]
    fn hiring_rate_decreases_in_outside_value_and_vanishes() {
        let p = params(0.6, 0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = random_pool(&mut rng, 8);
        let scores: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..1.0)).collect();
        let prob = AdjustedValueProblem::new(&p, &d, &scores, 0.5, 0.4).unwrap();
        let mut prev = f64::INFINITY;
        for z in [-2.0, 0.0, 1.0, 3.0, 10.0] {
            let th = theta(&prob, z).unwrap();
            assert!((0.0..=1.0).contains(&th));
            assert!(th < prev, "theta not decreasing at z={z}");
            prev = th;
        }
        assert!(theta(&prob, 1e8).unwrap() < 1e-12);
    }

    #[test]
    fn myopic_hazard_dominates_adjusted_hazard_for_positive_gains() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut checked = 0;
        while checked < 30 {
            let a0 = rng.gen_range(0.2..1.0);
            let p = params(a0, a0 * rng.gen_range(1.0..2.5));
            let n = rng.gen_range(3..10);
            let d = random_pool(&mut rng, n);
            let rv0 = solve_value_unemployment(&p, &d).unwrap();
            let scores = index_scores(&p, &d, rv0);
            let s = rng.gen_range(0.2..0.9);
            let prob = AdjustedValueProblem::new(&p, &d, &scores, s, rv0).unwrap();
            let sol = solve_adjusted_value(&prob).unwrap();
            if sol.delta_m <= 1e-8 {
                continue;
            }
            let theta_m = theta(&prob, rv0).unwrap();
            let theta_adj = theta(&prob, sol.rv1_adj).unwrap();
            assert!(theta_m >= theta_adj - 1e-12, "{theta_m} < {theta_adj}");
            checked += 1;
        }
    }

    #[test]
    fn gain_signs_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..60 {
            let p = params(rng.gen_range(0.1..1.2), rng.gen_range(0.05..2.0));
            let n = rng.gen_range(2..10);
            let d = random_pool(&mut rng, n);
            let rv0 = solve_value_unemployment(&p, &d).unwrap();
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let prob =
                AdjustedValueProblem::new(&p, &d, &scores, rng.gen_range(0.1..1.0), rv0).unwrap();
            let sol = solve_adjusted_value(&prob).unwrap();
            if sol.delta_m > 1e-8 {
                assert!(sol.delta_adj > -1e-9, "dm {} dadj {}", sol.delta_m, sol.delta_adj);
            } else if sol.delta_m < -1e-8 {
                assert!(sol.delta_adj < 1e-9, "dm {} dadj {}", sol.delta_m, sol.delta_adj);
            }
        }
    }

    #[test]
    fn solved_gain_lies_in_closed_form_bracket() {
        // The bracket is derived for a seeker facing the same arrival rate
        // with and without the ranking, so instances hold alpha1 = alpha0.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut checked = 0;
        let mut attempts = 0;
        while checked < 100 {
            attempts += 1;
            assert!(attempts < 3000, "could not build 100 positive-gain instances");
            let a = rng.gen_range(0.2..1.5);
            let p = params(a, a);
            let n = rng.gen_range(3..12);
            let d = random_pool(&mut rng, n);
            let rv0 = solve_value_unemployment(&p, &d).unwrap();
            let scores = index_scores(&p, &d, rv0);
            let s = rng.gen_range(0.15..0.85);
            let prob = AdjustedValueProblem::new(&p, &d, &scores, s, rv0).unwrap();
            let sol = solve_adjusted_value(&prob).unwrap();
            if sol.delta_m <= 1e-7 {
                continue;
            }
            let theta_m = theta(&prob, rv0).unwrap();
            let theta_adj = theta(&prob, sol.rv1_adj).unwrap();
            let bracket = bracket_delta_adj(sol.delta_m, theta_m, theta_adj, &p).unwrap();
            assert!(bracket.lower <= bracket.upper + 1e-12);
            assert_eq!(bracket.approx, bracket.lower);
            assert!(
                sol.delta_adj >= bracket.lower - 1e-8 && sol.delta_adj <= bracket.upper + 1e-8,
                "delta_adj {} outside [{}, {}]",
                sol.delta_adj,
                bracket.lower,
                bracket.upper
            );
            checked += 1;
        }
    }

    #[test]
    fn bracket_degenerate_cases() {
        let p = params(0.7, 0.7);
        let b = bracket_delta_adj(0.4, 0.3, 0.3, &p).unwrap();
        assert_eq!(b.lower, b.upper);
        assert_eq!(b.lower, b.approx);

        let no_search = params(0.0, 0.0);
        let b = bracket_delta_adj(0.4, 0.9, 0.1, &no_search).unwrap();
        assert!((b.lower - 0.4).abs() < 1e-15);
        assert!((b.upper - 0.4).abs() < 1e-15);

        assert!(bracket_delta_adj(-0.1, 0.5, 0.4, &p).is_err());
        assert!(bracket_delta_adj(0.1, 1.5, 0.4, &p).is_err());
    }

    #[test]
    fn reservation_shift_is_exact_addition() {
        assert_eq!(reservation_shift(0.0, 1.7), 1.7);
        assert!(reservation_shift(0.25, 1.7) > 1.7);
        for (a, b) in [(0.125, 2.5), (-0.5, 0.75), (1e-9, 3.0)] {
            assert!((reservation_shift(a, b) - (a + b)).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_shift_scan_matches_index_score_solution() {
        let p = params(0.5, 0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let d = random_pool(&mut rng, 7);
        let rv0 = solve_value_unemployment(&p, &d).unwrap();
        let scores = index_scores(&p, &d, rv0);
        let prob = AdjustedValueProblem::new(&p, &d, &scores, 0.4, rv0).unwrap();
        let direct = solve_adjusted_value(&prob).unwrap();

        let rows = scan_shifted_scores(&p, &d, 0.4, rv0, &[-0.5, 0.0, 0.5]).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].x, 0.0);
        assert!((rows[1].rv1_adj - direct.rv1_adj).abs() < 1e-12);
        assert!(scan_shifted_scores(&p, &d, 0.4, rv0, &[f64::NAN]).is_err());
    }
}
