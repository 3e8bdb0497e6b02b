//! Conditional fixed-effects logit with exact group likelihoods.
//!
//! Seeker-level intercepts are conditioned out by working with the
//! distribution of outcomes given each group's outcome total. Groups where
//! that total is 0 or the group size carry no information and are dropped.
//! The conditioning sum runs over all within-group arrangements with the
//! observed total, evaluated exactly by dynamic programming, so group
//! sizes are capped at 20.

use super::data::{assemble_design, PairDataset};
use super::inference::{cluster_groups, Convergence, FitResult};
use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector};

const MAX_GROUP: usize = 20;

struct Group {
    rows: Vec<usize>,
    successes: usize,
}

/// Per-group likelihood pieces at the current estimate: log of the
/// arrangement sum plus its first two derivatives.
struct ArrangementSum {
    log_f: f64,
    dlog: DVector<f64>,
    /// Negative Hessian contribution (a covariance, so PSD).
    curvature: DMatrix<f64>,
}

/// Dynamic program over items and selected counts. Exponentials are
/// centered on the group's max index so the sums stay inside f64 range.
fn arrangement_sum(
    x: &DMatrix<f64>,
    eta: &[f64],
    rows: &[usize],
    successes: usize,
) -> Result<ArrangementSum> {
    let k = x.ncols();
    let s = successes;
    let center = rows
        .iter()
        .map(|&i| eta[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut f = vec![0.0; s + 1];
    let mut df = vec![DVector::<f64>::zeros(k); s + 1];
    let mut d2f = vec![DMatrix::<f64>::zeros(k, k); s + 1];
    f[0] = 1.0;
    for (j, &i) in rows.iter().enumerate() {
        let e = (eta[i] - center).exp();
        let xi = x.row(i).transpose();
        let top = s.min(j + 1);
        for c in (1..=top).rev() {
            // f[c] picks up every arrangement that adds item j to a
            // (c-1)-sized one.
            let (head, tail) = d2f.split_at_mut(c);
            tail[0] += (&head[c - 1] + &xi * df[c - 1].transpose()
                + &df[c - 1] * xi.transpose()
                + &xi * xi.transpose() * f[c - 1])
                * e;
            let (dh, dt) = df.split_at_mut(c);
            dt[0] += (&dh[c - 1] + &xi * f[c - 1]) * e;
            f[c] += e * f[c - 1];
        }
    }
    if !(f[s].is_finite() && f[s] > 0.0) {
        return Err(Error::numeric(
            "conditional likelihood underflowed; group indices span too wide a range",
        ));
    }
    let dlog = &df[s] / f[s];
    let curvature = &d2f[s] / f[s] - &dlog * dlog.transpose();
    Ok(ArrangementSum {
        log_f: f[s].ln() + s as f64 * center,
        dlog,
        curvature,
    })
}

/// Conditional maximum likelihood over mover groups, clustered by group.
/// The design is regressors plus controls with no intercept; group
/// intercepts are absorbed by the conditioning.
pub fn fit_conditional_logit_fe(data: &PairDataset) -> Result<FitResult> {
    let (names, x) = assemble_design(
        &[data.regressor_columns(), data.control_columns()],
        false,
        data.n_rows(),
    );
    let k = names.len();
    if k == 0 {
        return Err(Error::config("conditional logit needs at least one regressor"));
    }
    let y = data.outcome();
    if let Some(bad) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::schema(format!(
            "conditional logit outcome must be 0/1; row {bad} is {}",
            y[bad]
        )));
    }

    let mut movers = Vec::new();
    let mut dropped = 0usize;
    for (id, rows) in cluster_groups(data.clusters()) {
        if rows.len() > MAX_GROUP {
            return Err(Error::domain(format!(
                "group {id} has {} rows; exact conditioning supports at most {MAX_GROUP}",
                rows.len()
            )));
        }
        let successes = rows.iter().filter(|&&i| y[i] == 1.0).count();
        if successes == 0 || successes == rows.len() {
            dropped += 1;
        } else {
            movers.push(Group { rows, successes });
        }
    }
    let total_groups = movers.len() + dropped;
    if movers.is_empty() {
        return Err(Error::domain(
            "no movers: every group is all-zero or all-one, nothing identifies the slopes",
        ));
    }
    if movers.len() < 2 {
        return Err(Error::schema(
            "cluster-robust inference needs at least two mover groups",
        ));
    }

    let n_rows: usize = movers.iter().map(|g| g.rows.len()).sum();
    let success_x_sum: Vec<DVector<f64>> = movers
        .iter()
        .map(|g| {
            let mut acc = DVector::zeros(k);
            for &i in &g.rows {
                if y[i] == 1.0 {
                    acc += x.row(i).transpose();
                }
            }
            acc
        })
        .collect();
    let success_eta = |eta: &[f64], g: &Group| -> f64 {
        g.rows.iter().filter(|&&i| y[i] == 1.0).map(|&i| eta[i]).sum()
    };

    let mut theta = DVector::<f64>::zeros(k);
    let mut eta: Vec<f64> = vec![0.0; data.n_rows()];
    let evaluate = |eta: &[f64]| -> Result<(f64, Vec<ArrangementSum>)> {
        let mut ll = 0.0;
        let mut sums = Vec::with_capacity(movers.len());
        for g in &movers {
            let piece = arrangement_sum(&x, eta, &g.rows, g.successes)?;
            ll += success_eta(eta, g) - piece.log_f;
            sums.push(piece);
        }
        Ok((ll, sums))
    };
    let (mut loglik, mut sums) = evaluate(&eta)?;

    let max_iter = 100;
    let mut grad_norm = f64::INFINITY;
    for iter in 0..max_iter {
        let mut gradient = DVector::<f64>::zeros(k);
        let mut hessian = DMatrix::<f64>::zeros(k, k);
        for (g, piece) in sums.iter().enumerate() {
            gradient += &success_x_sum[g] - &piece.dlog;
            hessian += &piece.curvature;
        }
        grad_norm = gradient.amax();
        if grad_norm < 1e-8 {
            let chol = Cholesky::new(hessian).ok_or_else(|| {
                Error::numeric("conditional information matrix is singular at the optimum")
            })?;
            let bread_inv = chol.inverse();
            let mut meat = DMatrix::<f64>::zeros(k, k);
            for (g, piece) in sums.iter().enumerate() {
                let score = &success_x_sum[g] - &piece.dlog;
                meat += &score * score.transpose();
            }
            let gm = movers.len() as f64;
            let cov = &bread_inv * meat * &bread_inv * (gm / (gm - 1.0));
            let mut fit = super::inference::finish_mle_fit(
                &names,
                theta,
                cov,
                n_rows,
                movers.len(),
                Convergence {
                    converged: true,
                    iterations: iter,
                    gradient_norm: grad_norm,
                    log_likelihood: Some(loglik),
                },
            )?;
            fit.notes.push(format!(
                "{dropped} of {total_groups} groups were all-zero or all-one and dropped"
            ));
            return Ok(fit);
        }

        let chol = Cholesky::new(hessian).ok_or_else(|| {
            Error::numeric(format!(
                "conditional information matrix is singular at iteration {iter}"
            ))
        })?;
        let direction = chol.solve(&gradient);
        let noise = 1e-10 * (1.0 + loglik.abs());
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let candidate = &theta + &direction * step;
            let mut cand_eta = eta.clone();
            for g in &movers {
                for &i in &g.rows {
                    cand_eta[i] = (x.row(i) * &candidate)[0];
                }
            }
            match evaluate(&cand_eta) {
                Ok((cand_ll, cand_sums)) if cand_ll > loglik - noise => {
                    theta = candidate;
                    eta = cand_eta;
                    loglik = cand_ll;
                    sums = cand_sums;
                    improved = true;
                    break;
                }
                _ => step /= 2.0,
            }
        }
        if !improved {
            return Err(Error::numeric(format!(
                "step halving stalled at iteration {iter}; gradient max-norm {grad_norm:.3e}"
            )));
        }
        if theta.amax() > 50.0 {
            return Err(Error::numeric(
                "perfect separation suspected: a conditional-logit coefficient walked past 50",
            ));
        }
    }
    Err(Error::numeric(format!(
        "no convergence after {max_iter} iterations; gradient max-norm {grad_norm:.3e}"
    )))
}
