//! Classification metrics, NDCG ranking evaluation and permutation importance.

mod classification;
mod importance;
mod ranking;

pub use classification::{classification_metrics, confusion, evaluate, ClassMetrics, ConfusionMatrix, MetricsReport};
pub use importance::{permutation_importance, PermutationImportance};
pub use ranking::{
    evaluate_ranking, grades_from_ranking, ndcg_at_k, ndcg_curve, rank_correlation, FeatureRanking, RankingEval,
    TruthRanking,
};
