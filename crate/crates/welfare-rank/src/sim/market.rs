//! Synthetic market generation with ground-truth hiring probabilities and
//! match utilities.
//!
//! Each seeker i carries a latent feature vector x_i and each vacancy j two
//! loading vectors (h_j, g_j). The match-utility index is the normalized
//! inner product with h_j, the hiring index mixes the h and g inner
//! products through a correlation knob, and both feed monotone maps onto
//! utility levels and probabilities. Every seeker's true value of
//! unemployment is then solved on their own vacancy pool, so the simulated
//! behavior is internally consistent with the search model.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    reservation_utility, solve_value_unemployment, surplus, ModelParams, VacancyDistribution,
    VacancyLottery,
};

use super::rng::{draw_standard_normal, substream, TAG_SEEKER, TAG_VACANCIES};

/// Hard floor keeping every generated probability strictly inside (0, 1),
/// applied after the spec's own clipping band and reported in metadata.
pub const P_MIN: f64 = 1e-4;

/// Finite label sets the simulator draws stratification variables from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrataSpec {
    pub occupation_groups: Vec<String>,
    pub support_levels: Vec<String>,
    pub locations: Vec<String>,
}

impl Default for StrataSpec {
    fn default() -> Self {
        StrataSpec {
            occupation_groups: vec![
                "construction".into(),
                "logistics".into(),
                "care".into(),
                "retail".into(),
                "admin".into(),
                "hospitality".into(),
            ],
            support_levels: vec!["self_directed".into(), "guided".into(), "reinforced".into()],
            locations: vec!["north".into(), "south".into(), "east".into(), "west".into()],
        }
    }
}

impl StrataSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, set) in [
            ("occupation_groups", &self.occupation_groups),
            ("support_levels", &self.support_levels),
            ("locations", &self.locations),
        ] {
            if set.is_empty() {
                return Err(Error::config(format!("strata set {name} must be nonempty")));
            }
        }
        Ok(())
    }
}

/// Stratification labels attached to one seeker.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StrataLabels {
    pub occupation_group: String,
    pub support_level: String,
    pub location: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeekerProfile {
    pub id: u64,
    pub strata: StrataLabels,
    /// Latent feature vector x_i.
    pub features: Vec<f64>,
    /// Individual utility shifter c_i.
    pub taste_shift: f64,
    /// Value of unemployment (rate units) solved on this seeker's pool.
    pub true_rv0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VacancyRecord {
    pub id: u64,
    /// Concatenated loading vectors (h_j, g_j).
    pub features: Vec<f64>,
}

/// Latent-factor model tying features to true (p, U).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatentFactorSpec {
    /// Latent dimension shared by seekers and vacancies.
    pub dim: usize,
    /// Standard deviation of the seeker utility shifter c_i.
    pub taste_sd: f64,
    /// Location of the match-utility index.
    pub u_location: f64,
    /// Scale on the utility index.
    pub u_scale: f64,
    /// Intercept of the hiring-probability logit.
    pub p_intercept: f64,
    /// Slope of the hiring-probability logit.
    pub p_slope: f64,
    /// Lower clipping bound on generated p.
    pub p_floor: f64,
    /// Upper clipping bound on generated p.
    pub p_ceiling: f64,
}

impl Default for LatentFactorSpec {
    /// Calibration under which hiring probabilities, application rates, and
    /// arm orderings fall in realistic ranges for a public-employment-service
    /// style market.
    fn default() -> Self {
        LatentFactorSpec {
            dim: 4,
            taste_sd: 0.3,
            u_location: -5.55,
            u_scale: 0.9,
            p_intercept: -2.44,
            p_slope: 0.5,
            p_floor: 0.02,
            p_ceiling: 0.30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub n_seekers: usize,
    pub n_vacancies: usize,
    #[serde(default)]
    pub latent: LatentFactorSpec,
    /// Correlation knob between the utility index and the hiring index,
    /// in [-1, 1]; 0 makes them independent.
    pub p_u_correlation: f64,
    pub params: ModelParams,
    /// Click-threshold offset; `None` resolves to two taste-shock scales.
    #[serde(default)]
    pub click_offset: Option<f64>,
    #[serde(default)]
    pub strata: StrataSpec,
    pub seed: u64,
}

impl MarketSpec {
    /// A market at the default calibration with standard search parameters.
    pub fn calibrated(n_seekers: usize, n_vacancies: usize, seed: u64) -> Result<Self> {
        let params = ModelParams::new(0.05, 0.15, 0.0, 0.1, 0.1, 1.0, 0.5)?;
        Ok(MarketSpec {
            n_seekers,
            n_vacancies,
            latent: LatentFactorSpec::default(),
            p_u_correlation: 0.85,
            params,
            click_offset: None,
            strata: StrataSpec::default(),
            seed,
        })
    }

    /// Offset on the click threshold, defaulting to 2 sigma.
    pub fn resolved_click_offset(&self) -> f64 {
        self.click_offset.unwrap_or(2.0 * self.params.sigma)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_seekers == 0 || self.n_vacancies == 0 {
            return Err(Error::config(format!(
                "market needs at least one seeker and one vacancy, got {} x {}",
                self.n_seekers, self.n_vacancies
            )));
        }
        if !(self.p_u_correlation.abs() <= 1.0) {
            return Err(Error::config(format!(
                "correlation knob must lie in [-1, 1], got {}",
                self.p_u_correlation
            )));
        }
        let l = &self.latent;
        for (name, v) in [
            ("taste_sd", l.taste_sd),
            ("u_location", l.u_location),
            ("u_scale", l.u_scale),
            ("p_intercept", l.p_intercept),
            ("p_slope", l.p_slope),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("latent factor {name} must be finite, got {v}")));
            }
        }
        if l.taste_sd < 0.0 {
            return Err(Error::config("taste_sd must be >= 0"));
        }
        if !(l.p_floor > 0.0 && l.p_floor < l.p_ceiling && l.p_ceiling < 1.0) {
            return Err(Error::config(format!(
                "need 0 < p_floor < p_ceiling < 1, got {} and {}",
                l.p_floor, l.p_ceiling
            )));
        }
        if let Some(c) = self.click_offset {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::config(format!("click offset must be >= 0, got {c}")));
            }
        }
        self.params.validate()?;
        self.strata.validate()
    }

    /// Warnings for specs that are valid but carry no signal somewhere.
    fn degeneracy_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let l = &self.latent;
        if l.dim == 0 {
            w.push("latent dimension is 0: all match indices are constant".into());
        }
        if l.u_scale == 0.0 {
            w.push("u_scale is 0: utilities do not vary with the latent index".into());
        }
        if l.p_slope == 0.0 {
            w.push("p_slope is 0: hiring probabilities do not vary".into());
        }
        w
    }
}

/// Generation metadata: the hard probability floor and what got clipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketMeta {
    pub p_min: f64,
    pub clipped_low: usize,
    pub clipped_high: usize,
    pub warnings: Vec<String>,
}

/// A sampled market: seeker and vacancy populations plus the ground-truth
/// pair-level matrices (seekers index rows, vacancies columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    pub spec: MarketSpec,
    pub seekers: Vec<SeekerProfile>,
    pub vacancies: Vec<VacancyRecord>,
    pub true_p: DMatrix<f64>,
    pub true_u: DMatrix<f64>,
    pub meta: MarketMeta,
}

impl Market {
    pub fn n_seekers(&self) -> usize {
        self.seekers.len()
    }

    pub fn n_vacancies(&self) -> usize {
        self.vacancies.len()
    }

    pub fn lottery(&self, seeker: usize, vacancy: usize) -> VacancyLottery {
        VacancyLottery {
            p: self.true_p[(seeker, vacancy)],
            u: self.true_u[(seeker, vacancy)],
        }
    }

    /// True surplus of a pair over the seeker's reservation utility.
    pub fn surplus_at(&self, seeker: usize, vacancy: usize) -> f64 {
        surplus(
            self.true_u[(seeker, vacancy)],
            self.true_p[(seeker, vacancy)],
            self.seekers[seeker].true_rv0,
            &self.spec.params,
        )
        .expect("market probabilities are validated positive")
    }

    /// True application probability of a pair.
    pub fn application_probability_at(&self, seeker: usize, vacancy: usize) -> f64 {
        let d = self.surplus_at(seeker, vacancy) / self.spec.params.sigma;
        1.0 / (1.0 + (-d).exp())
    }

    /// The seeker's pool as a uniform finite lottery distribution.
    pub fn pool(&self, seeker: usize) -> Result<VacancyDistribution> {
        let lots = (0..self.n_vacancies())
            .map(|j| VacancyLottery::new(self.true_p[(seeker, j)], self.true_u[(seeker, j)]))
            .collect::<Result<Vec<_>>>()?;
        VacancyDistribution::uniform(lots)
    }
}

struct SeekerDraw {
    profile: SeekerProfile,
    u_row: Vec<f64>,
    p_row: Vec<f64>,
    clipped_low: usize,
    clipped_high: usize,
}

/// Samples a full market from the spec. Deterministic in the seed; seekers
/// are generated on independent substreams so the result does not depend
/// on thread count or iteration order.
pub fn sample_market(spec: &MarketSpec) -> Result<Market> {
    spec.validate()?;
    let warnings = spec.degeneracy_warnings();
    let l = spec.latent;
    let (ns, nv, dim) = (spec.n_seekers, spec.n_vacancies, l.dim);
    let norm = if dim > 0 { 1.0 / (dim as f64).sqrt() } else { 0.0 };
    let lam = spec.p_u_correlation;
    let lam_orth = (1.0 - lam * lam).max(0.0).sqrt();

    // Vacancy loadings come off one market-level stream, drawn per vacancy
    // as (h_j, g_j) so the layout is stable.
    let mut vac_rng = substream(spec.seed, TAG_VACANCIES, &[]);
    let mut h = vec![vec![0.0; dim]; nv];
    let mut g = vec![vec![0.0; dim]; nv];
    for j in 0..nv {
        for v in h[j].iter_mut() {
            *v = draw_standard_normal(&mut vac_rng);
        }
        for v in g[j].iter_mut() {
            *v = draw_standard_normal(&mut vac_rng);
        }
    }
    let vacancies: Vec<VacancyRecord> = (0..nv)
        .map(|j| VacancyRecord {
            id: j as u64,
            features: h[j].iter().chain(g[j].iter()).copied().collect(),
        })
        .collect();

    let draws: Vec<SeekerDraw> = (0..ns)
        .into_par_iter()
        .map(|i| -> Result<SeekerDraw> {
            // Draw order is part of the replay contract: features, taste
            // shifter, then the three strata labels.
            let mut rng = substream(spec.seed, TAG_SEEKER, &[i as u64]);
            let x: Vec<f64> = (0..dim).map(|_| draw_standard_normal(&mut rng)).collect();
            let taste = l.taste_sd * draw_standard_normal(&mut rng);
            let pick = |rng: &mut rand_chacha::ChaCha8Rng, set: &[String]| -> String {
                set[rng.gen_range(0..set.len())].clone()
            };
            let strata = StrataLabels {
                occupation_group: pick(&mut rng, &spec.strata.occupation_groups),
                support_level: pick(&mut rng, &spec.strata.support_levels),
                location: pick(&mut rng, &spec.strata.locations),
            };

            let mut u_row = vec![0.0; nv];
            let mut p_row = vec![0.0; nv];
            let (mut clipped_low, mut clipped_high) = (0usize, 0usize);
            for j in 0..nv {
                let dot = |w: &[f64]| x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
                let zu = norm * dot(&h[j]);
                let zq = norm * dot(&g[j]);
                let zp = lam * zu + lam_orth * zq;
                u_row[j] = l.u_location + l.u_scale * zu + taste;
                let raw = 1.0 / (1.0 + (-(l.p_intercept + l.p_slope * zp)).exp());
                let lo = l.p_floor.max(P_MIN);
                let hi = l.p_ceiling.min(1.0 - P_MIN);
                if raw < lo {
                    clipped_low += 1;
                } else if raw > hi {
                    clipped_high += 1;
                }
                p_row[j] = raw.clamp(lo, hi);
            }

            let lots = u_row
                .iter()
                .zip(&p_row)
                .map(|(&u, &p)| VacancyLottery::new(p, u))
                .collect::<Result<Vec<_>>>()?;
            let dist = VacancyDistribution::uniform(lots)?;
            let rv0 = solve_value_unemployment(&spec.params, &dist)?;

            Ok(SeekerDraw {
                profile: SeekerProfile {
                    id: i as u64,
                    strata,
                    features: x,
                    taste_shift: taste,
                    true_rv0: rv0,
                },
                u_row,
                p_row,
                clipped_low,
                clipped_high,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let true_u = DMatrix::from_row_iterator(ns, nv, draws.iter().flat_map(|d| d.u_row.iter().copied()));
    let true_p = DMatrix::from_row_iterator(ns, nv, draws.iter().flat_map(|d| d.p_row.iter().copied()));
    let meta = MarketMeta {
        p_min: P_MIN,
        clipped_low: draws.iter().map(|d| d.clipped_low).sum(),
        clipped_high: draws.iter().map(|d| d.clipped_high).sum(),
        warnings,
    };
    let seekers = draws.into_iter().map(|d| d.profile).collect();

    Ok(Market {
        spec: spec.clone(),
        seekers,
        vacancies,
        true_p,
        true_u,
        meta,
    })
}

/// Convenience: the reservation utility a seeker holds against a given
/// hiring probability, from their solved rV0.
pub fn seeker_reservation(market: &Market, seeker: usize, p: f64) -> Result<f64> {
    reservation_utility(market.seekers[seeker].true_rv0, p, &market.spec.params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gamma_closed;

    fn pearson(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let mut cov = 0.0;
        let mut va = 0.0;
        let mut vb = 0.0;
        for (x, y) in a.iter().zip(b.iter()) {
            cov += (x - ma) * (y - mb);
            va += (x - ma) * (x - ma);
            vb += (y - mb) * (y - mb);
        }
        cov / (va.sqrt() * vb.sqrt())
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = MarketSpec::calibrated(40, 25, 9).unwrap();
        let a = sample_market(&spec).unwrap();
        let b = sample_market(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn correlation_knob_zero_decouples_p_and_u() {
        // A richer latent space tightens the shared-loading fluctuation of
        // the pairwise correlation, which scales like 1/sqrt(dim * n_vac).
        let mut spec = MarketSpec::calibrated(50, 200, 31).unwrap();
        spec.latent.dim = 25;
        spec.p_u_correlation = 0.0;
        let m = sample_market(&spec).unwrap();
        assert!(m.true_p.len() >= 10_000);
        let r0 = pearson(&m.true_p, &m.true_u);
        assert!(r0.abs() < 0.05, "corr under knob 0 was {r0}");

        spec.p_u_correlation = 0.85;
        let m1 = sample_market(&spec).unwrap();
        let r1 = pearson(&m1.true_p, &m1.true_u);
        assert!(r1 > r0 + 0.1, "knob 0.85 gave corr {r1} vs {r0}");
    }

    #[test]
    fn probabilities_respect_clipping_and_metadata_reports_the_floor() {
        let spec = MarketSpec::calibrated(60, 50, 3).unwrap();
        let m = sample_market(&spec).unwrap();
        assert_eq!(m.meta.p_min, 1e-4);
        assert!(m.meta.clipped_low > 0, "calibration should clip some low p");
        let (lo, hi) = (spec.latent.p_floor, spec.latent.p_ceiling);
        assert!(m.true_p.iter().all(|&p| p >= lo && p <= hi));
    }

    #[test]
    fn degenerate_spec_warns_instead_of_failing() {
        let mut spec = MarketSpec::calibrated(10, 8, 5).unwrap();
        spec.latent.u_scale = 0.0;
        let m = sample_market(&spec).unwrap();
        assert!(m.meta.warnings.iter().any(|w| w.contains("u_scale")));
        let mut spec0 = MarketSpec::calibrated(6, 4, 5).unwrap();
        spec0.latent.dim = 0;
        let m0 = sample_market(&spec0).unwrap();
        assert!(m0.meta.warnings.iter().any(|w| w.contains("dimension")));
    }

    #[test]
    fn strata_come_from_declared_sets() {
        let spec = MarketSpec::calibrated(30, 10, 7).unwrap();
        let m = sample_market(&spec).unwrap();
        for s in &m.seekers {
            assert!(spec.strata.occupation_groups.contains(&s.strata.occupation_group));
            assert!(spec.strata.support_levels.contains(&s.strata.support_level));
            assert!(spec.strata.locations.contains(&s.strata.location));
        }
    }

    #[test]
    fn solved_rv0_satisfies_the_value_fixed_point() {
        let spec = MarketSpec::calibrated(5, 60, 13).unwrap();
        let m = sample_market(&spec).unwrap();
        let pr = &spec.params;
        for i in 0..3 {
            let rv0 = m.seekers[i].true_rv0;
            let mean_gamma = (0..m.n_vacancies())
                .map(|j| {
                    gamma_closed(m.true_p[(i, j)], m.surplus_at(i, j), pr.sigma).unwrap()
                })
                .sum::<f64>()
                / m.n_vacancies() as f64;
            let rhs = pr.u_b + pr.alpha0 / pr.effective_discount() * mean_gamma;
            assert!((rv0 - rhs).abs() < 1e-8, "fixed point residual {}", rv0 - rhs);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(MarketSpec::calibrated(0, 10, 1).unwrap().validate().is_err());
        let mut spec = MarketSpec::calibrated(5, 5, 1).unwrap();
        spec.p_u_correlation = 1.5;
        assert!(spec.validate().is_err());
        let mut spec2 = MarketSpec::calibrated(5, 5, 1).unwrap();
        spec2.latent.p_floor = 0.0;
        assert!(spec2.validate().is_err());
    }
}
