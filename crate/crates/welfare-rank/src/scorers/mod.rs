//! Vacancy-scoring rules and retrieval metrics.
//!
//! Two score families anchor the comparison: the agency's
//! criteria-weighted matching score and a trained bilinear hiring score
//! calibrated to a probability. On top of them sit the ranking rules
//! (plain top-k, ordinal mixes over a consideration set, and the
//! welfare-index rule) plus recall and rank-divergence diagnostics.

mod bilinear;
mod calibration;
mod metrics;
mod ranking;
mod triplet;
mod weights;

pub use bilinear::{bilinear_score, BilinearScorer, Block, FeatureMap, TripletHyper};
pub use calibration::{apply_calibration, CalibrationCoefficients};
pub use metrics::{rank_divergence, recall_at_k, CrossRanks, RankDivergence, RecallResult};
pub use ranking::{
    consideration_set, gamma_rank, mix_rank, rank_top_k, ConsiderationCutoffs, ConsiderationSet,
    MixFraction, MixOptions, RankEntry, RankedList,
};
pub use triplet::{train_triplet, train_triplet_from, BlockSpec, MatchPair};
pub use weights::{u_score, ConsistencyVector, WeightProfile};

pub(crate) use ranking::sort_desc_stable_by_id;
