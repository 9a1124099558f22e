use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use ifenet::ife::global_ranking;
use ifenet::metrics::{
    evaluate, grades_from_ranking, ndcg_curve, permutation_importance, rank_correlation, MetricsReport, TruthRanking,
};
use ifenet::model::{importance_scores, predict, Architecture, IfeNetParams};
use ifenet::seed::{derive_seed, tag};
use ifenet::train::{SearchSpace, StopReason, TrainConfig, TrainHistory};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::{SplitSummary, Splits, Summary};
use crate::tables::{rank_rows, NdcgRow, RankRow};

pub const REPORT_VERSION: &str = "ifenet-report/1";

/// Everything needed to rerun a command, defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: String,
    pub train: TrainConfig,
    pub oracle_repeats: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SearchSpace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistorySummary {
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
}

impl From<&TrainHistory> for HistorySummary {
    fn from(h: &TrainHistory) -> Self {
        Self {
            best_epoch: h.best_epoch,
            best_val_accuracy: h.best_val_accuracy,
            epochs_run: h.records.len(),
            stop_reason: h.stop_reason,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    /// Planted order shipped with synthetic data.
    Planted,
    /// Permutation importance on the test split.
    Permutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub kind: OracleKind,
    pub truth: String,
    pub ndcg: Vec<NdcgRow>,
    /// Spearman rho against the oracle when it has no ties.
    pub spearman: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub dataset: SplitSummary,
    pub metrics: BTreeMap<String, MetricsReport>,
    pub history: Option<HistorySummary>,
    pub ranking: Vec<RankRow>,
    pub oracle: Option<OracleReport>,
}

pub fn split_metrics(params: &IfeNetParams, splits: &Splits) -> Result<BTreeMap<String, MetricsReport>> {
    let mut out = BTreeMap::new();
    for (name, ds) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
        let pred = predict(params, ds.x())?;
        out.insert(name.to_string(), evaluate(&pred.classes, ds.y(), ds.n_classes())?);
    }
    Ok(out)
}

/// Metrics on every split, the train-split IFE ranking, and NDCG against
/// the planted truth (synthetic data) or a permutation-importance oracle.
pub fn build(
    command: &str,
    config: RunConfig,
    splits: &Splits,
    params: &IfeNetParams,
    history: Option<&TrainHistory>,
) -> Result<RunReport> {
    let names = &splits.manifest.feature_names;
    let mut ranking = Vec::new();
    let mut oracle = None;
    if params.arch() == Architecture::IfeNet {
        let global = global_ranking(&importance_scores(params, splits.train.x())?)?;
        ranking = rank_rows(&global, names);
        let d = names.len();
        let (kind, truth) = match splits.truth() {
            Some(t) => (OracleKind::Planted, t.clone()),
            None => {
                let seed = derive_seed(config.train.seed, &[tag::PERMUTE]);
                let pi = permutation_importance(params, &splits.test, config.oracle_repeats, seed)?;
                (OracleKind::Permutation, TruthRanking::from_order(pi.ranking.order())?)
            }
        };
        let grades = grades_from_ranking(&truth);
        let ks: Vec<usize> = (1..=d).collect();
        let ndcg = if grades.iter().any(|&g| g > 0.0) {
            ndcg_curve(global.order(), &grades, &ks)?
                .into_iter()
                .map(|(k, ndcg)| NdcgRow { k, ndcg })
                .collect()
        } else {
            Vec::new()
        };
        let spearman = if truth.groups().len() == d {
            let order: Vec<usize> = truth.groups().iter().map(|g| g[0]).collect();
            Some(rank_correlation(global.order(), &order)?)
        } else {
            None
        };
        oracle = Some(OracleReport {
            kind,
            truth: truth.to_text(names),
            ndcg,
            spearman,
        });
    }
    Ok(RunReport {
        version: REPORT_VERSION.into(),
        command: command.into(),
        seed: config.train.seed,
        dataset: splits.manifest.summary.clone(),
        metrics: split_metrics(params, splits)?,
        history: history.map(HistorySummary::from),
        ranking,
        oracle,
        config,
    })
}

/// Accepts a report (`config.train`), a `{ "train": ... }` wrapper, or a bare
/// training config.
pub fn read_train_config(path: &Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let inner = value
        .pointer("/config/train")
        .or_else(|| value.get("train"))
        .unwrap_or(&value)
        .clone();
    serde_json::from_value(inner).with_context(|| format!("{} does not hold a training config", path.display()))
}

impl OracleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleKind::Planted => "planted",
            OracleKind::Permutation => "permutation",
        }
    }
}

pub fn summary_line(s: &Summary) -> String {
    format!("n={} d={} C={}", s.n, s.d, s.classes)
}
