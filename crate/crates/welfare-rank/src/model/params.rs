//! Structural parameters, vacancy lotteries, and atomic vacancy distributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structural primitives of the search environment.
///
/// All rates are per period. Costs `apply_cost` and `reject_cost` are stock
/// utility amounts paid at the application and rejection events; their
/// rate-unit equivalents are `(r + q)` times the stock, exposed through
/// [`ModelParams::apply_cost_rate`] and [`ModelParams::reject_cost_rate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Discount rate, strictly positive.
    pub r: f64,
    /// Job-separation rate, nonnegative.
    pub q: f64,
    /// Flow utility while unemployed.
    pub u_b: f64,
    /// Cost of sending one application, nonnegative.
    pub apply_cost: f64,
    /// Cost of a rejected application, nonnegative.
    pub reject_cost: f64,
    /// Scale of the logistic taste shock, strictly positive.
    pub sigma: f64,
    /// Vacancy arrival rate without recommendations, nonnegative.
    pub alpha0: f64,
    /// Vacancy arrival rate under recommendations, nonnegative.
    pub alpha1: f64,
}

impl ModelParams {
    /// Validates and builds a parameter set. The recommendation arrival
    /// rate defaults to the baseline rate; override it with
    /// [`ModelParams::with_alpha1`].
    pub fn new(
        r: f64,
        q: f64,
        u_b: f64,
        apply_cost: f64,
        reject_cost: f64,
        sigma: f64,
        alpha0: f64,
    ) -> Result<Self> {
        let params = ModelParams {
            r,
            q,
            u_b,
            apply_cost,
            reject_cost,
            sigma,
            alpha0,
            alpha1: alpha0,
        };
        params.validate()?;
        Ok(params)
    }

    /// Replaces the arrival rate under recommendations.
    pub fn with_alpha1(mut self, alpha1: f64) -> Result<Self> {
        self.alpha1 = alpha1;
        self.validate()?;
        Ok(self)
    }

    /// Checks every parameter invariant; used by constructors and after
    /// deserializing configuration.
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(Error::domain(format!("discount rate must be > 0, got {}", self.r)));
        }
        if !(self.q >= 0.0) || !self.q.is_finite() {
            return Err(Error::domain(format!("separation rate must be >= 0, got {}", self.q)));
        }
        if !self.u_b.is_finite() {
            return Err(Error::domain("unemployment flow utility must be finite"));
        }
        if !(self.apply_cost >= 0.0) || !self.apply_cost.is_finite() {
            return Err(Error::domain(format!("application cost must be >= 0, got {}", self.apply_cost)));
        }
        if !(self.reject_cost >= 0.0) || !self.reject_cost.is_finite() {
            return Err(Error::domain(format!("rejection cost must be >= 0, got {}", self.reject_cost)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::domain(format!("taste-shock scale must be > 0, got {}", self.sigma)));
        }
        if !(self.alpha0 >= 0.0) || !self.alpha0.is_finite() {
            return Err(Error::domain(format!("arrival rate alpha0 must be >= 0, got {}", self.alpha0)));
        }
        if !(self.alpha1 >= 0.0) || !self.alpha1.is_finite() {
            return Err(Error::domain(format!("arrival rate alpha1 must be >= 0, got {}", self.alpha1)));
        }
        Ok(())
    }

    /// Effective discount rate on employment spells, `r + q`.
    pub fn effective_discount(&self) -> f64 {
        self.r + self.q
    }

    /// Application cost in utility-rate units, `(r + q) * apply_cost`.
    pub fn apply_cost_rate(&self) -> f64 {
        self.effective_discount() * self.apply_cost
    }

    /// Rejection cost in utility-rate units, `(r + q) * reject_cost`.
    pub fn reject_cost_rate(&self) -> f64 {
        self.effective_discount() * self.reject_cost
    }
}

/// A vacancy as a lottery: hiring probability conditional on applying and
/// the utility rate the job delivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VacancyLottery {
    /// Hiring probability conditional on applying, in `(0, 1]`.
    pub p: f64,
    /// Utility rate if hired.
    pub u: f64,
}

impl VacancyLottery {
    pub fn new(p: f64, u: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::domain(format!("hiring probability must be in (0, 1], got {p}")));
        }
        if !u.is_finite() {
            return Err(Error::domain(format!("vacancy utility must be finite, got {u}")));
        }
        Ok(VacancyLottery { p, u })
    }
}

/// One atom of a finite vacancy distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedAtom {
    pub lottery: VacancyLottery,
    pub weight: f64,
}

/// A finite weighted list of vacancy lotteries representing the offer
/// distribution a seeker samples from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VacancyDistribution {
    atoms: Vec<WeightedAtom>,
}

/// Weights must sum to one within this slack.
const WEIGHT_SUM_TOL: f64 = 1e-12;

impl VacancyDistribution {
    /// Builds a distribution from `(lottery, weight)` pairs. Weights must
    /// be nonnegative and sum to one within `1e-12`.
    pub fn new(atoms: Vec<(VacancyLottery, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::domain("vacancy distribution needs at least one atom"));
        }
        let mut sum = 0.0;
        for (_, w) in &atoms {
            if !(*w >= 0.0) || !w.is_finite() {
                return Err(Error::domain(format!("atom weight must be >= 0, got {w}")));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::domain(format!(
                "atom weights must sum to 1 within {WEIGHT_SUM_TOL}, got {sum}"
            )));
        }
        Ok(VacancyDistribution {
            atoms: atoms
                .into_iter()
                .map(|(lottery, weight)| WeightedAtom { lottery, weight })
                .collect(),
        })
    }

    /// Equal-weight distribution over the given lotteries.
    pub fn uniform(lotteries: Vec<VacancyLottery>) -> Result<Self> {
        if lotteries.is_empty() {
            return Err(Error::domain("vacancy distribution needs at least one atom"));
        }
        let w = 1.0 / lotteries.len() as f64;
        // Equal weights of 1/n sum to 1 only up to rounding; pin the last
        // weight so the invariant holds exactly.
        let n = lotteries.len();
        let mut pairs: Vec<(VacancyLottery, f64)> =
            lotteries.into_iter().map(|l| (l, w)).collect();
        let partial: f64 = w * (n as f64 - 1.0);
        pairs[n - 1].1 = 1.0 - partial;
        VacancyDistribution::new(pairs)
    }

    pub fn atoms(&self) -> &[WeightedAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Expectation of `f(lottery)` under the atom weights.
    pub fn expect(&self, mut f: impl FnMut(&VacancyLottery) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.weight * f(&a.lottery)).sum()
    }
}
