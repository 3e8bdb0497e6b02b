//! Unemployment value without recommendations and the myopic value under
//! a ranking system.
//!
//! The baseline value rate solves a one-dimensional fixed point: a higher
//! candidate value raises every reservation utility, which lowers every
//! surplus and hence the expected index, so the map is strictly decreasing
//! and crosses the identity exactly once.

use crate::error::{Error, Result};
use crate::model::params::{ModelParams, VacancyDistribution, VacancyLottery};
use crate::model::selection::top_share;
use crate::model::softplus;

const FIXED_POINT_TOL: f64 = 1e-10;
const MAX_DAMPED_ITERS: usize = 10_000;

/// Welfare index of one lottery when the outside value rate is `z`.
pub(crate) fn gamma_at(params: &ModelParams, lot: &VacancyLottery, z: f64) -> f64 {
    let kbar = params.apply_cost_rate();
    let rbar = params.reject_cost_rate();
    let u_star = z - rbar + (kbar + rbar) / lot.p;
    lot.p * params.sigma * softplus((lot.u - u_star) / params.sigma)
}

fn value_map(params: &ModelParams, dist: &VacancyDistribution, z: f64) -> f64 {
    let expected = dist.expect(|lot| gamma_at(params, lot, z));
    params.u_b + params.alpha0 / params.effective_discount() * expected
}

/// Solves the value rate of unemployment without recommendations: the
/// fixed point of `z = u_b + alpha0/(r+q) * E[gamma(p, U; z)]`.
///
/// Damped iteration (factor 0.5) from `u_b`; if it has not converged
/// within the iteration budget, falls back to bisection, which cannot
/// stall because the map is decreasing.
pub fn solve_value_unemployment(params: &ModelParams, dist: &VacancyDistribution) -> Result<f64> {
    let mut z = params.u_b;
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_DAMPED_ITERS {
        let next = value_map(params, dist, z);
        residual = next - z;
        z += 0.5 * residual;
        if residual.abs() < FIXED_POINT_TOL {
            return Ok(z);
        }
    }

    // The fixed point lies between u_b (where the map sits above the
    // identity) and the map's value there (decreasing map).
    let mut lo = params.u_b;
    let mut hi = value_map(params, dist, lo);
    if !(hi >= lo) {
        return Err(Error::numeric(format!(
            "value fixed point not bracketed: map({lo}) = {hi}, last residual {residual}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if value_map(params, dist, mid) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < FIXED_POINT_TOL {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::numeric(format!(
        "value fixed point did not converge: last residual {residual}"
    )))
}

/// Value rate of a myopic job seeker whose applications come from the top
/// `s` mass of the vacancy pool ranked by `scores`. The welfare index of
/// each selected vacancy is evaluated at the frozen baseline `rv0`, which
/// is what makes the seeker myopic: the ranking changes the pool but not
/// the reservation rule.
pub fn value_with_rs_myopic(
    params: &ModelParams,
    dist: &VacancyDistribution,
    scores: &[f64],
    s: f64,
    rv0_baseline: f64,
) -> Result<f64> {
    let atoms = dist.atoms();
    let weights: Vec<f64> = atoms.iter().map(|a| a.weight).collect();
    let selected = top_share(&weights, scores, s)?;
    let mean: f64 = selected
        .iter()
        .map(|sel| sel.weight * gamma_at(params, &atoms[sel.index].lottery, rv0_baseline))
        .sum::<f64>()
        / s;
    Ok(params.u_b + params.alpha1 / params.effective_discount() * mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha0: f64) -> ModelParams {
        ModelParams::new(0.05, 0.15, 0.3, 0.5, 1.0, 1.0, alpha0).unwrap()
    }

    fn pool() -> VacancyDistribution {
        VacancyDistribution::uniform(vec![
            VacancyLottery::new(0.2, 1.5).unwrap(),
            VacancyLottery::new(0.5, 0.8).unwrap(),
            VacancyLottery::new(0.9, 0.2).unwrap(),
            VacancyLottery::new(0.05, 4.0).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn no_vacancies_means_flow_value() {
        let p = params(0.0);
        let rv0 = solve_value_unemployment(&p, &pool()).unwrap();
        assert_eq!(rv0, 0.3);
    }

    #[test]
    fn solution_is_a_fixed_point() {
        let p = params(0.8);
        let d = pool();
        let rv0 = solve_value_unemployment(&p, &d).unwrap();
        let mapped = value_map(&p, &d, rv0);
        assert!((mapped - rv0).abs() < 1e-9, "residual {}", mapped - rv0);
        assert!(rv0 >= p.u_b);
    }

    #[test]
    fn single_high_value_atom_matches_bisection_oracle() {
        // One sure-hire vacancy: z = u_b + (alpha0/(r+q)) * sigma *
        // softplus((U - z - kbar)/sigma). Oracle: plain bisection on that
        // scalar equation, written independently of the solver under test.
        let p = params(0.6);
        let d = VacancyDistribution::uniform(vec![VacancyLottery::new(1.0, 8.0).unwrap()]).unwrap();
        let rv0 = solve_value_unemployment(&p, &d).unwrap();

        let g = |z: f64| {
            p.u_b
                + p.alpha0 / p.effective_discount()
                    * p.sigma
                    * ((8.0 - z - p.apply_cost_rate()) / p.sigma).exp().ln_1p()
        };
        let (mut lo, mut hi) = (p.u_b, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > mid {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert!((rv0 - oracle).abs() < 1e-9, "{rv0} vs {oracle}");
    }

    #[test]
    fn value_weakly_increases_in_arrival_rate() {
        let d = pool();
        let mut prev = f64::NEG_INFINITY;
        for alpha0 in [0.0, 0.2, 0.5, 1.0, 2.0, 5.0] {
            let rv0 = solve_value_unemployment(&params(alpha0), &d).unwrap();
            assert!(rv0 >= prev - 1e-12, "alpha0={alpha0}: {rv0} < {prev}");
            prev = rv0;
        }
    }

    #[test]
    fn value_map_is_decreasing_at_the_solution() {
        let p = params(1.2);
        let d = pool();
        let rv0 = solve_value_unemployment(&p, &d).unwrap();
        let h = 1e-5;
        let slope = (value_map(&p, &d, rv0 + h) - value_map(&p, &d, rv0 - h)) / (2.0 * h);
        assert!(slope < 0.0, "slope {slope}");
    }

    #[test]
    fn full_share_equals_unselected_mean() {
        let p = params(0.8);
        let d = pool();
        let rv0 = solve_value_unemployment(&p, &d).unwrap();
        let scores = [3.0, -1.0, 0.5, 2.0];
        let with_rs = value_with_rs_myopic(&p, &d, &scores, 1.0, rv0).unwrap();
        let unselected =
            p.u_b + p.alpha0 / p.effective_discount() * d.expect(|lot| gamma_at(&p, lot, rv0));
        assert!((with_rs - unselected).abs() < 1e-12);
    }

    #[test]
    fn index_score_is_optimal_among_random_scores() {
        let p = params(0.8);
        let d = pool();
        let rv0 = solve_value_unemployment(&p, &d).unwrap();
        let index_scores: Vec<f64> =
            d.atoms().iter().map(|a| gamma_at(&p, &a.lottery, rv0)).collect();
        for s in [0.25, 0.4, 0.5, 0.75] {
            let best = value_with_rs_myopic(&p, &d, &index_scores, s, rv0).unwrap();
            for alt in [
                vec![1.0, 2.0, 3.0, 4.0],
                vec![4.0, 3.0, 2.0, 1.0],
                vec![0.0, 0.0, 0.0, 0.0],
                vec![-1.0, 5.0, -2.0, 0.3],
            ] {
                let val = value_with_rs_myopic(&p, &d, &alt, s, rv0).unwrap();
                assert!(val <= best + 1e-12, "s={s}: {val} > {best}");
            }
        }
    }

    #[test]
    fn vacancy_term_is_linear_in_recommendation_arrival_rate() {
        let p = params(0.8);
        let doubled = p.clone().with_alpha1(1.6).unwrap();
        let d = pool();
        let rv0 = solve_value_unemployment(&p, &d).unwrap();
        let scores = [0.1, 0.9, 0.4, 0.7];
        let base = value_with_rs_myopic(&p, &d, &scores, 0.5, rv0).unwrap();
        let twice = value_with_rs_myopic(&doubled, &d, &scores, 0.5, rv0).unwrap();
        assert!((twice - p.u_b - 2.0 * (base - p.u_b)).abs() < 1e-12);
    }

    #[test]
    fn bad_share_is_rejected() {
        let p = params(0.8);
        let d = pool();
        assert!(value_with_rs_myopic(&p, &d, &[1.0, 2.0, 3.0, 4.0], 0.0, 0.5).is_err());
        assert!(value_with_rs_myopic(&p, &d, &[1.0, 2.0], 0.5, 0.5).is_err());
    }
}
