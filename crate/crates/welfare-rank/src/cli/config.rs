//! Run configuration: one TOML document describing the whole pipeline.
//!
//! Unknown keys are rejected everywhere, every section has calibrated
//! defaults, and parse -> serialize -> parse is a fixed point, so the
//! resolved copy written next to the artifacts can be re-run verbatim.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::RankEffects;
use crate::model::ModelParams;
use crate::scorers::TripletHyper;
use crate::sim::{
    benchmark_score_columns, ArmScorer, ArmSpec, ExperimentDesign, LatentFactorSpec, MarketSpec,
    ScoreColumnSpec, ScorerRegistry, StrataSpec, StratumField,
};
use crate::welfare::{SplitSpec, WelfareDesign};

/// Search-model parameters as they appear in a config file. Mirrors
/// [`ModelParams`] with the recommendation arrival rate optional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsSection {
    pub r: f64,
    pub q: f64,
    pub u_b: f64,
    pub apply_cost: f64,
    pub reject_cost: f64,
    pub sigma: f64,
    pub alpha0: f64,
    /// Arrival rate under recommendations; defaults to `alpha0`.
    pub alpha1: Option<f64>,
}

impl Default for ParamsSection {
    fn default() -> Self {
        ParamsSection {
            r: 0.05,
            q: 0.15,
            u_b: 0.0,
            apply_cost: 0.1,
            reject_cost: 0.1,
            sigma: 1.0,
            alpha0: 0.5,
            alpha1: None,
        }
    }
}

impl ParamsSection {
    pub fn to_params(self) -> Result<ModelParams> {
        let p = ModelParams::new(
            self.r,
            self.q,
            self.u_b,
            self.apply_cost,
            self.reject_cost,
            self.sigma,
            self.alpha0,
        )?;
        match self.alpha1 {
            Some(a1) => p.with_alpha1(a1),
            None => Ok(p),
        }
    }
}

/// Market-generation section; the master seed comes from the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketSection {
    pub seekers: usize,
    pub vacancies: usize,
    pub latent: LatentFactorSpec,
    pub p_u_correlation: f64,
    pub params: ParamsSection,
    pub click_offset: Option<f64>,
    pub strata: StrataSpec,
}

impl Default for MarketSection {
    fn default() -> Self {
        MarketSection {
            seekers: 1_000,
            vacancies: 500,
            latent: LatentFactorSpec::default(),
            p_u_correlation: 0.85,
            params: ParamsSection::default(),
            click_offset: None,
            strata: StrataSpec::default(),
        }
    }
}

impl MarketSection {
    pub fn to_spec(&self, seed: u64) -> Result<MarketSpec> {
        let spec = MarketSpec {
            n_seekers: self.seekers,
            n_vacancies: self.vacancies,
            latent: self.latent,
            p_u_correlation: self.p_u_correlation,
            params: self.params.to_params()?,
            click_offset: self.click_offset,
            strata: self.strata.clone(),
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoresSection {
    /// Synthesized score columns; defaults to the six-column benchmark.
    pub columns: Vec<ScoreColumnSpec>,
}

impl Default for ScoresSection {
    fn default() -> Self {
        ScoresSection {
            columns: benchmark_score_columns(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Seekers whose simulated hire becomes a training match.
    pub matches: usize,
    /// Seekers reserved for the recall evaluation, taken after the
    /// training block.
    pub holdout: usize,
    pub recall_k: usize,
    pub embed_dim: usize,
    /// Width of the optional hidden layer on both side maps.
    pub hidden: Option<usize>,
    pub hyper: TripletHyper,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            matches: 500,
            holdout: 200,
            recall_k: 10,
            embed_dim: 8,
            hidden: None,
            hyper: TripletHyper {
                epochs: 15,
                ..TripletHyper::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankSection {
    /// List length written to the rankings artifact.
    pub top_k: usize,
    /// Match-quality column of the divergence diagnostic.
    pub u_column: String,
    /// Hiring column of the divergence diagnostic.
    pub p_column: String,
}

impl Default for RankSection {
    fn default() -> Self {
        RankSection {
            top_k: 10,
            u_column: "u".into(),
            p_column: "v2".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub arms: Vec<ArmSpec>,
    /// Extra scorers beyond plain score-column rankers, keyed by the name
    /// arms refer to.
    pub scorers: BTreeMap<String, ArmScorer>,
    pub strata: Vec<StratumField>,
    pub list_length: usize,
    pub availability_dropout: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let share = 1.0 / 3.0;
        let arm = |name: &str| ArmSpec {
            name: name.into(),
            scorer: name.into(),
            share,
        };
        ExperimentSection {
            arms: vec![arm("u"), arm("v2"), arm("app")],
            scorers: BTreeMap::new(),
            strata: vec![
                StratumField::OccupationGroup,
                StratumField::SupportLevel,
                StratumField::Location,
            ],
            list_length: 10,
            availability_dropout: 0.3,
        }
    }
}

impl ExperimentSection {
    pub fn to_design(&self) -> ExperimentDesign {
        ExperimentDesign {
            arms: self.arms.clone(),
            strata: self.strata.clone(),
            list_length: self.list_length,
            availability_dropout: self.availability_dropout,
        }
    }

    /// Registry resolving every arm's scorer: explicit entries win, any
    /// other scorer name must match a score column and ranks by it.
    pub fn registry(&self, columns: &[ScoreColumnSpec]) -> Result<ScorerRegistry> {
        let mut reg = ScorerRegistry::new();
        for (name, scorer) in &self.scorers {
            reg.register(name, scorer.clone())?;
        }
        for arm in &self.arms {
            if reg.get(&arm.scorer).is_some() {
                continue;
            }
            if columns.iter().any(|c| c.name == arm.scorer) {
                reg.register(
                    &arm.scorer,
                    ArmScorer::Column {
                        column: arm.scorer.clone(),
                    },
                )?;
            } else {
                return Err(Error::config(format!(
                    "arm '{}' wants scorer '{}', which is neither a configured scorer \
                     nor a score column",
                    arm.name, arm.scorer
                )));
            }
        }
        Ok(reg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationSection {
    /// Score column whose calibration the hazard fit recovers.
    pub hazard_score_column: String,
    pub hazard_rank_effects: RankEffects,
    /// Fit the structural recovery of (sigma, total cost).
    pub structural: bool,
    /// Fit the control-function check on the hiring-odds regressor.
    pub control_function: bool,
    pub bootstrap_reps: usize,
}

impl Default for EstimationSection {
    fn default() -> Self {
        EstimationSection {
            hazard_score_column: "v2".into(),
            hazard_rank_effects: RankEffects::ApplicationRank,
            structural: true,
            control_function: true,
            bootstrap_reps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WelfareSection {
    pub splits: usize,
    pub fraction: f64,
    pub bootstrap_reps: usize,
    /// Columns entering the welfare models; defaults to every configured
    /// score column.
    pub score_columns: Option<Vec<String>>,
    pub slot_controls: bool,
    pub top_k: usize,
    pub pseudo_cap: Option<usize>,
    pub sigma: f64,
}

impl Default for WelfareSection {
    fn default() -> Self {
        WelfareSection {
            splits: 50,
            fraction: 0.5,
            bootstrap_reps: 1000,
            score_columns: None,
            slot_controls: true,
            top_k: 10,
            pseudo_cap: Some(800),
            sigma: 1.0,
        }
    }
}

impl WelfareSection {
    pub fn split_spec(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            splits: self.splits,
            fraction: self.fraction,
            bootstrap_reps: self.bootstrap_reps,
            seed,
        }
    }

    pub fn design(&self, columns: &[ScoreColumnSpec]) -> WelfareDesign {
        let cols = self
            .score_columns
            .clone()
            .unwrap_or_else(|| columns.iter().map(|c| c.name.clone()).collect());
        WelfareDesign {
            score_columns: cols,
            slot_controls: self.slot_controls,
            top_k: self.top_k,
            pseudo_cap: self.pseudo_cap,
            sigma: self.sigma,
        }
    }
}

/// The whole pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every stage derives its own substreams from it.
    pub seed: u64,
    /// Artifact directory; stages share it through the manifest.
    pub out_dir: PathBuf,
    /// Worker cap for stage-internal parallelism; `None` lets the runtime
    /// decide. Results never depend on it.
    pub threads: Option<usize>,
    pub market: MarketSection,
    pub scores: ScoresSection,
    pub train: TrainSection,
    pub rank: RankSection,
    pub experiment: ExperimentSection,
    pub estimation: EstimationSection,
    pub welfare: WelfareSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            threads: None,
            market: MarketSection::default(),
            scores: ScoresSection::default(),
            train: TrainSection::default(),
            rank: RankSection::default(),
            experiment: ExperimentSection::default(),
            estimation: EstimationSection::default(),
            welfare: WelfareSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| Error::config(format!("config does not parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::config(format!("config does not serialize: {e}")))
    }

    /// Applies command-line overrides; the result is what stages run on
    /// and what gets written next to the artifacts.
    pub fn resolved(
        mut self,
        seed: Option<u64>,
        out: Option<PathBuf>,
        threads: Option<usize>,
    ) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out {
            self.out_dir = o;
        }
        if let Some(t) = threads {
            self.threads = Some(t);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.market.to_spec(self.seed)?;
        if self.scores.columns.is_empty() {
            return Err(Error::config("need at least one score column"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.scores.columns {
            if !seen.insert(&c.name) {
                return Err(Error::config(format!("duplicate score column '{}'", c.name)));
            }
        }
        if self.experiment.arms.is_empty() {
            return Err(Error::config("experiment needs at least one arm"));
        }
        self.experiment.registry(&self.scores.columns)?;
        if self.train.matches == 0 {
            return Err(Error::config("training needs at least one match"));
        }
        if self.train.matches + self.train.holdout > self.market.seekers {
            return Err(Error::config(format!(
                "training matches ({}) plus holdout ({}) exceed the {} seekers",
                self.train.matches, self.train.holdout, self.market.seekers
            )));
        }
        if self.rank.top_k == 0 {
            return Err(Error::config("ranking depth must be >= 1"));
        }
        for col in [&self.rank.u_column, &self.rank.p_column] {
            if !self.scores.columns.iter().any(|c| &c.name == col) {
                return Err(Error::config(format!(
                    "rank divergence column '{col}' is not a configured score column"
                )));
            }
        }
        if !self
            .scores
            .columns
            .iter()
            .any(|c| c.name == self.estimation.hazard_score_column)
        {
            return Err(Error::config(format!(
                "hazard score column '{}' is not a configured score column",
                self.estimation.hazard_score_column
            )));
        }
        self.welfare.split_spec(self.seed).validate()?;
        let design = self.welfare.design(&self.scores.columns);
        design.validate()?;
        for col in &design.score_columns {
            if !self.scores.columns.iter().any(|c| &c.name == col) {
                return Err(Error::config(format!(
                    "welfare score column '{col}' is not a configured score column"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
        // Fixed point: serializing the reparse reproduces the text.
        assert_eq!(text, back.to_toml().unwrap());
    }

    #[test]
    fn minimal_config_gets_calibrated_defaults() {
        let cfg = RunConfig::from_toml("seed = 9\n[market]\nseekers = 50\nvacancies = 20\n")
            .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.market.seekers, 50);
        assert_eq!(cfg.market.params.sigma, 1.0);
        assert_eq!(cfg.welfare.splits, 50);
        assert_eq!(cfg.scores.columns.len(), 6);
        let spec = cfg.market.to_spec(cfg.seed).unwrap();
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.p_u_correlation, 0.85);
    }

    #[test]
    fn unknown_keys_are_rejected_with_the_key_named() {
        for (text, key) in [
            ("sedd = 1\n", "sedd"),
            ("[market]\nseekers = 10\nvacancies = 5\ntypo_knob = 2\n", "typo_knob"),
            ("[welfare]\nsplits = 3\nfractoin = 0.5\n", "fractoin"),
        ] {
            let err = RunConfig::from_toml(text).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{err}");
            assert!(err.to_string().contains(key), "{err}");
        }
    }

    #[test]
    fn cross_references_are_validated() {
        let bad_arm = "[experiment]\narms = [{ name = \"a\", scorer = \"nope\", share = 1.0 }]\n";
        let err = RunConfig::from_toml(bad_arm).unwrap_err();
        assert!(err.to_string().contains("nope"), "{err}");

        let bad_hazard = "[estimation]\nhazard_score_column = \"ghost\"\n";
        let err = RunConfig::from_toml(bad_hazard).unwrap_err();
        assert!(err.to_string().contains("ghost"), "{err}");

        let bad_welfare = "[welfare]\nscore_columns = [\"u\", \"ghost\"]\n";
        let err = RunConfig::from_toml(bad_welfare).unwrap_err();
        assert!(err.to_string().contains("ghost"), "{err}");

        let bad_split = "[train]\nmatches = 900\nholdout = 200\n";
        let err = RunConfig::from_toml(bad_split).unwrap_err();
        assert!(err.to_string().contains("holdout"), "{err}");
    }

    #[test]
    fn overrides_apply_in_order() {
        let cfg = RunConfig::default().resolved(Some(5), Some(PathBuf::from("x")), Some(2));
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.out_dir, PathBuf::from("x"));
        assert_eq!(cfg.threads, Some(2));
        let cfg = cfg.resolved(None, None, None);
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.threads, Some(2));
    }

    #[test]
    fn registry_resolves_columns_and_explicit_scorers() {
        let mut section = ExperimentSection::default();
        section.scorers.insert(
            "mixed".into(),
            ArmScorer::ConsiderationMix {
                p_column: "v2".into(),
                u_column: "u".into(),
                fraction: crate::scorers::MixFraction::Half,
                cutoffs: Default::default(),
                preselect: 15,
            },
        );
        section.arms[0].scorer = "mixed".into();
        let reg = section.registry(&benchmark_score_columns()).unwrap();
        assert!(reg.get("mixed").is_some());
        assert!(reg.get("v2").is_some());
    }
}
