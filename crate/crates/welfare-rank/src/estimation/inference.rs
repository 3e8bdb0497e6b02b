//! Regression cores: OLS, logit, and Poisson maximum likelihood, all with
//! cluster-robust sandwich covariance and Wald tests.
//!
//! Every fit takes an explicit design matrix with named columns plus a
//! cluster id per row. The module is deliberately narrow: no weights,
//! offsets, or other link functions.

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};
use std::collections::BTreeMap;

/// Iteration record of an estimator run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub converged: bool,
    pub iterations: usize,
    /// Max-norm of the score at the final estimate; 0 for closed forms.
    pub gradient_norm: f64,
    pub log_likelihood: Option<f64>,
}

impl Convergence {
    fn closed_form() -> Self {
        Convergence {
            converged: true,
            iterations: 1,
            gradient_norm: 0.0,
            log_likelihood: None,
        }
    }
}

/// Cluster-robust Wald test of a coefficient subset being jointly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldTest {
    pub names: Vec<String>,
    pub statistic: f64,
    pub p_value: f64,
    pub df_num: usize,
    /// Clusters minus one.
    pub df_den: usize,
}

/// Named coefficients with cluster-robust inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Two-sided p-values from a t distribution with `clusters - 1`
    /// degrees of freedom.
    pub p_values: Vec<f64>,
    /// Symmetric positive semidefinite, row-major.
    pub covariance: Vec<Vec<f64>>,
    pub joint_test: Option<WaldTest>,
    pub n_rows: usize,
    pub n_clusters: usize,
    pub convergence: Convergence,
    pub notes: Vec<String>,
}

impl FitResult {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.estimates[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.std_errors[i])
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let k = self.names.len();
        DMatrix::from_fn(k, k, |i, j| self.covariance[i][j])
    }

    /// Wald test that the named coefficients are jointly zero.
    pub fn wald(&self, names: &[String]) -> Result<WaldTest> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.index_of(n)
                    .ok_or_else(|| Error::config(format!("no coefficient named '{n}'")))
            })
            .collect::<Result<_>>()?;
        let (statistic, p_value) = wald_statistic(
            &DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.estimates[i])),
            &DMatrix::from_fn(idx.len(), idx.len(), |a, b| {
                self.covariance[idx[a]][idx[b]]
            }),
            self.n_clusters - 1,
        )?;
        Ok(WaldTest {
            names: names.to_vec(),
            statistic,
            p_value,
            df_num: idx.len(),
            df_den: self.n_clusters - 1,
        })
    }
}

/// Sums `f` over fixed 4096-row blocks and reduces the block totals in a
/// fixed pairwise order, so the result is identical for any thread count.
pub(crate) fn block_tree_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(std::ops::Range<usize>) -> f64 + Sync,
{
    const BLOCK: usize = 4096;
    if n == 0 {
        return 0.0;
    }
    let blocks = n.div_ceil(BLOCK);
    let mut parts: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| f(b * BLOCK..((b + 1) * BLOCK).min(n)))
        .collect();
    let mut len = parts.len();
    while len > 1 {
        let half = len / 2;
        for i in 0..half {
            parts[i] = parts[2 * i] + parts[2 * i + 1];
        }
        if len % 2 == 1 {
            parts[half] = parts[len - 1];
        }
        len = half + len % 2;
    }
    parts[0]
}

/// ln(1 + e^x) without overflow.
fn softplus_raw(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x.clamp(-700.0, 700.0)).exp())
}

/// Indices of columns that are (numerically) linear combinations of
/// earlier ones, by modified Gram-Schmidt.
fn dependent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for j in 0..x.ncols() {
        let mut v = x.column(j).into_owned();
        let original = v.norm();
        for b in &basis {
            let proj = b.dot(&v);
            v.axpy(-proj, b, 1.0);
        }
        // Re-orthogonalize once; plain MGS loses accuracy on near-collinear
        // columns.
        for b in &basis {
            let proj = b.dot(&v);
            v.axpy(-proj, b, 1.0);
        }
        let remaining = v.norm();
        if remaining <= 1e-10 * original.max(1e-300) {
            dependent.push(j);
        } else {
            basis.push(v / remaining);
        }
    }
    dependent
}

fn rank_deficiency_error(names: &[String], x: &DMatrix<f64>) -> Error {
    let cols = dependent_columns(x);
    let listed: Vec<&str> = cols.iter().map(|&j| names[j].as_str()).collect();
    Error::numeric(format!(
        "design matrix is rank deficient; dependent columns: [{}]",
        listed.join(", ")
    ))
}

fn check_design(names: &[String], x: &DMatrix<f64>, y: &[f64], clusters: &[u64]) -> Result<()> {
    let (n, k) = x.shape();
    if names.len() != k {
        return Err(Error::schema(format!(
            "{} names for {k} design columns",
            names.len()
        )));
    }
    if y.len() != n || clusters.len() != n {
        return Err(Error::schema(format!(
            "design has {n} rows but outcome has {} and clusters {}",
            y.len(),
            clusters.len()
        )));
    }
    if n <= k {
        return Err(Error::schema(format!(
            "need more rows than columns: {n} rows, {k} columns"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::schema("design or outcome contains non-finite values"));
    }
    Ok(())
}

/// Row indices grouped by cluster id, in ascending id order.
pub(super) fn cluster_groups(clusters: &[u64]) -> Vec<(u64, Vec<usize>)> {
    let mut map: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, &c) in clusters.iter().enumerate() {
        map.entry(c).or_default().push(i);
    }
    map.into_iter().collect()
}

/// Sandwich covariance with per-row score `x_i * e_i`, summed within
/// clusters. `correction` is the finite-sample scaling.
fn sandwich(
    x: &DMatrix<f64>,
    e: &DVector<f64>,
    groups: &[(u64, Vec<usize>)],
    bread_inv: &DMatrix<f64>,
    correction: f64,
) -> DMatrix<f64> {
    let k = x.ncols();
    let mut group_scores = DMatrix::zeros(groups.len(), k);
    for (g, (_, rows)) in groups.iter().enumerate() {
        for &i in rows {
            for j in 0..k {
                group_scores[(g, j)] += x[(i, j)] * e[i];
            }
        }
    }
    let meat = group_scores.tr_mul(&group_scores);
    let mut cov = bread_inv * meat * bread_inv * correction;
    // Symmetrize away accumulation drift.
    let t = cov.transpose();
    cov += t;
    cov /= 2.0;
    cov
}

fn wald_statistic(r_theta: &DVector<f64>, v: &DMatrix<f64>, df_den: usize) -> Result<(f64, f64)> {
    let q = r_theta.len();
    if q == 0 {
        return Err(Error::config("empty coefficient subset for Wald test"));
    }
    let stat = match Cholesky::new(v.clone()) {
        Some(chol) => {
            let solved = chol.solve(r_theta);
            (r_theta.dot(&solved) / q as f64).max(0.0)
        }
        None if r_theta.amax() < 1e-12 => 0.0,
        None => {
            return Err(Error::numeric(
                "Wald covariance block is singular with nonzero estimates",
            ))
        }
    };
    let dist = FisherSnedecor::new(q as f64, df_den as f64)
        .map_err(|e| Error::numeric(format!("F distribution: {e}")))?;
    Ok((stat, (1.0 - dist.cdf(stat)).clamp(0.0, 1.0)))
}

fn two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

fn assemble_result(
    names: &[String],
    theta: DVector<f64>,
    cov: DMatrix<f64>,
    joint: Option<&[String]>,
    n_rows: usize,
    n_clusters: usize,
    convergence: Convergence,
) -> Result<FitResult> {
    let k = names.len();
    let df = (n_clusters - 1) as f64;
    let std_errors: Vec<f64> = (0..k).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    let p_values: Vec<f64> = (0..k)
        .map(|j| {
            if std_errors[j] == 0.0 {
                if theta[j].abs() < 1e-12 {
                    1.0
                } else {
                    0.0
                }
            } else {
                two_sided_p(theta[j] / std_errors[j], df)
            }
        })
        .collect();
    let mut result = FitResult {
        names: names.to_vec(),
        estimates: theta.iter().copied().collect(),
        std_errors,
        p_values,
        covariance: (0..k)
            .map(|i| (0..k).map(|j| cov[(i, j)]).collect())
            .collect(),
        joint_test: None,
        n_rows,
        n_clusters,
        convergence,
        notes: Vec::new(),
    };
    if let Some(subset) = joint {
        result.joint_test = Some(result.wald(subset)?);
    }
    Ok(result)
}

/// Packages externally computed MLE output (estimates plus covariance)
/// into a [`FitResult`] with the shared p-value conventions.
pub(super) fn finish_mle_fit(
    names: &[String],
    theta: DVector<f64>,
    cov: DMatrix<f64>,
    n_rows: usize,
    n_clusters: usize,
    convergence: Convergence,
) -> Result<FitResult> {
    assemble_result(names, theta, cov, None, n_rows, n_clusters, convergence)
}

fn require_clusters(groups: &[(u64, Vec<usize>)]) -> Result<()> {
    if groups.len() < 2 {
        return Err(Error::schema(
            "cluster-robust inference needs at least two clusters",
        ));
    }
    Ok(())
}

/// Least squares of `y` on `x` with cluster-robust covariance and an
/// optional joint Wald test over named columns.
pub fn ols_fit(
    names: &[String],
    x: &DMatrix<f64>,
    y: &[f64],
    clusters: &[u64],
    joint: Option<&[String]>,
) -> Result<FitResult> {
    check_design(names, x, y, clusters)?;
    let groups = cluster_groups(clusters);
    require_clusters(&groups)?;
    let (n, k) = x.shape();
    let xtx = x.tr_mul(x);
    let chol = Cholesky::new(xtx).ok_or_else(|| rank_deficiency_error(names, x))?;
    let yv = DVector::from_column_slice(y);
    let theta = chol.solve(&(x.tr_mul(&yv)));
    let residuals = &yv - x * &theta;
    let g = groups.len() as f64;
    let correction = g / (g - 1.0) * ((n - 1) as f64 / (n - k) as f64);
    let cov = sandwich(x, &residuals, &groups, &chol.inverse(), correction);
    assemble_result(
        names,
        theta,
        cov,
        joint,
        n,
        groups.len(),
        Convergence::closed_form(),
    )
}

enum Family {
    Logit,
    Poisson,
}

impl Family {
    fn loglik(&self, eta: &[f64], y: &[f64]) -> f64 {
        match self {
            // y*eta - ln(1 + e^eta)
            Family::Logit => block_tree_sum(y.len(), |range| {
                range.map(|i| y[i] * eta[i] - softplus_raw(eta[i])).sum()
            }),
            // y*eta - e^eta, dropping the ln(y!) constant
            Family::Poisson => block_tree_sum(y.len(), |range| {
                range
                    .map(|i| y[i] * eta[i] - eta[i].clamp(-700.0, 700.0).exp())
                    .sum()
            }),
        }
    }

    fn mean(&self, eta: f64) -> f64 {
        match self {
            Family::Logit => sigmoid(eta),
            Family::Poisson => eta.clamp(-700.0, 700.0).exp(),
        }
    }

    fn weight(&self, mu: f64) -> f64 {
        match self {
            Family::Logit => mu * (1.0 - mu),
            Family::Poisson => mu,
        }
    }
}

/// Newton-Raphson with step halving. Converges when the score max-norm
/// falls below 1e-8; estimates walking past 50 in absolute value trip the
/// separation error.
fn newton_mle(
    family: Family,
    names: &[String],
    x: &DMatrix<f64>,
    y: &[f64],
    clusters: &[u64],
    joint: Option<&[String]>,
) -> Result<FitResult> {
    check_design(names, x, y, clusters)?;
    let groups = cluster_groups(clusters);
    require_clusters(&groups)?;
    let (n, k) = x.shape();
    if Cholesky::new(x.tr_mul(x)).is_none() {
        return Err(rank_deficiency_error(names, x));
    }

    let mut theta = DVector::zeros(k);
    let mut eta = vec![0.0; n];
    let mut loglik = family.loglik(&eta, y);
    let mut grad_norm = f64::INFINITY;
    let max_iter = 100;
    for iter in 0..max_iter {
        let mu: Vec<f64> = eta.iter().map(|&e| family.mean(e)).collect();
        let score = DVector::from_iterator(n, (0..n).map(|i| y[i] - mu[i]));
        let gradient = x.tr_mul(&score);
        grad_norm = gradient.amax();
        if grad_norm < 1e-8 {
            let bread = weighted_hessian(x, &mu, &family);
            let chol = Cholesky::new(bread).ok_or_else(|| {
                Error::numeric("information matrix is singular at the optimum")
            })?;
            let g = groups.len() as f64;
            let cov = sandwich(x, &score, &groups, &chol.inverse(), g / (g - 1.0));
            return assemble_result(
                names,
                theta,
                cov,
                joint,
                n,
                groups.len(),
                Convergence {
                    converged: true,
                    iterations: iter,
                    gradient_norm: grad_norm,
                    log_likelihood: Some(loglik),
                },
            );
        }

        let hessian = weighted_hessian(x, &mu, &family);
        let chol = Cholesky::new(hessian).ok_or_else(|| {
            Error::numeric(format!(
                "information matrix is singular at iteration {iter}"
            ))
        })?;
        let direction = chol.solve(&gradient);

        // Accept any step that does not lose more than the log-likelihood's
        // own rounding noise; near the optimum the true gain per Newton step
        // sits below that floor.
        let noise = 1e-10 * (1.0 + loglik.abs());
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let candidate = &theta + &direction * step;
            let cand_eta: Vec<f64> = (x * &candidate).iter().copied().collect();
            let cand_ll = family.loglik(&cand_eta, y);
            if cand_ll > loglik - noise {
                theta = candidate;
                eta = cand_eta;
                loglik = cand_ll;
                improved = true;
                break;
            }
            step /= 2.0;
        }
        if !improved {
            return Err(Error::numeric(format!(
                "step halving stalled at iteration {iter}; gradient max-norm {grad_norm:.3e}"
            )));
        }
        if theta.amax() > 50.0 {
            let j = theta.iter().map(|v| v.abs()).enumerate().fold(
                (0, 0.0),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );
            return Err(Error::numeric(format!(
                "perfect separation suspected: coefficient '{}' walked past 50 with the \
                 log-likelihood still improving",
                names[j.0]
            )));
        }
    }
    Err(Error::numeric(format!(
        "no convergence after {max_iter} iterations; gradient max-norm {grad_norm:.3e}"
    )))
}

fn weighted_hessian(x: &DMatrix<f64>, mu: &[f64], family: &Family) -> DMatrix<f64> {
    let mut xw = x.clone();
    for (i, &m) in mu.iter().enumerate() {
        let w = family.weight(m).max(0.0).sqrt();
        xw.row_mut(i).scale_mut(w);
    }
    xw.tr_mul(&xw)
}

/// Binary logit by maximum likelihood.
pub fn logit_fit(
    names: &[String],
    x: &DMatrix<f64>,
    y: &[f64],
    clusters: &[u64],
    joint: Option<&[String]>,
) -> Result<FitResult> {
    if let Some(bad) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::schema(format!(
            "logit outcome must be 0/1; row {bad} is {}",
            y[bad]
        )));
    }
    newton_mle(Family::Logit, names, x, y, clusters, joint)
}

/// Poisson regression by maximum likelihood.
pub fn poisson_fit(
    names: &[String],
    x: &DMatrix<f64>,
    y: &[f64],
    clusters: &[u64],
    joint: Option<&[String]>,
) -> Result<FitResult> {
    if let Some(bad) = y.iter().position(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::schema(format!(
            "Poisson outcome must be a nonnegative count; row {bad} is {}",
            y[bad]
        )));
    }
    if y.iter().all(|&v| v == 0.0) {
        return Err(Error::domain(
            "outcome is identically zero; the Poisson fit is degenerate",
        ));
    }
    newton_mle(Family::Poisson, names, x, y, clusters, joint)
}
