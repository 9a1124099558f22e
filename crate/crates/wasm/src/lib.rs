//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes plain numbers or strings and returns a JSON string, so
//! the page needs no generated TypeScript types.

use ifenet::data::{split, synth_dataset, EncodedDataset, SplitSizes, SplitSpec};
use ifenet::ife::global_ranking;
use ifenet::metrics::{evaluate_ranking, grades_from_ranking, ndcg_curve, rank_correlation, TruthRanking};
use ifenet::model::{importance_scores, Architecture};
use ifenet::train::{accuracy, fit, sweep_r, TrainConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_N: usize = 20_000;
const MAX_D: usize = 40;

type DemoResult<T> = Result<T, String>;

#[derive(Debug, Serialize)]
pub struct FeatureBar {
    pub feature: String,
    pub score: f64,
    pub rank: usize,
    /// Position group in the planted order, 0 for the strongest.
    pub planted_group: usize,
}

#[derive(Debug, Serialize)]
pub struct TrainOutput {
    pub arch: &'static str,
    pub test_accuracy: f64,
    pub best_epoch: usize,
    pub epochs: usize,
    pub val_curve: Vec<f64>,
    pub bars: Vec<FeatureBar>,
    pub ndcg: Vec<(usize, f64)>,
    pub truth: String,
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub r: f64,
    pub test_accuracy: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Serialize)]
pub struct NdcgOutput {
    pub ndcg: Vec<(usize, f64)>,
    pub grades: Vec<f64>,
    pub spearman: Option<f64>,
}

fn synth_splits(n: usize, d: usize, k: usize, noise: f64, seed: u64) -> DemoResult<[EncodedDataset; 3]> {
    if n > MAX_N || d > MAX_D {
        return Err(format!("keep n <= {MAX_N} and d <= {MAX_D} in the browser"));
    }
    let full = synth_dataset(n, d, k, noise, seed).map_err(|e| e.to_string())?;
    let spec = SplitSpec {
        sizes: SplitSizes::Fractions([0.7, 0.15, 0.15]),
        seed,
        stratify: true,
    };
    let (tr, va, te) = split(&full, &spec).map_err(|e| e.to_string())?;
    Ok([tr, va, te])
}

pub fn run_train(n: usize, d: usize, k: usize, noise: f64, r: f64, seed: u64, ablation: bool) -> DemoResult<TrainOutput> {
    let [tr, va, te] = synth_splits(n, d, k, noise, seed)?;
    let cfg = TrainConfig {
        arch: if ablation { Architecture::Fnn } else { Architecture::IfeNet },
        r,
        seed,
        ..TrainConfig::default()
    };
    let (params, history) = fit(&tr, &va, &cfg).map_err(|e| e.to_string())?;
    let names = tr.feature_names();
    let truth = tr.truth().ok_or("synthetic data without planted order")?;
    let mut group_of = vec![0; d];
    for (g, members) in truth.groups().iter().enumerate() {
        for &j in members {
            group_of[j] = g;
        }
    }

    let (bars, ndcg) = if ablation {
        (Vec::new(), Vec::new())
    } else {
        let s = importance_scores(&params, tr.x()).map_err(|e| e.to_string())?;
        let ranking = global_ranking(&s).map_err(|e| e.to_string())?;
        let mut rank = vec![0; d];
        for (pos, &j) in ranking.order().iter().enumerate() {
            rank[j] = pos + 1;
        }
        let bars = (0..d)
            .map(|j| FeatureBar {
                feature: names[j].clone(),
                score: ranking.scores()[j],
                rank: rank[j],
                planted_group: group_of[j],
            })
            .collect();
        let ks: Vec<usize> = (1..=d).collect();
        let ndcg = ndcg_curve(ranking.order(), &grades_from_ranking(truth), &ks).map_err(|e| e.to_string())?;
        (bars, ndcg)
    };

    Ok(TrainOutput {
        arch: cfg.arch.as_str(),
        test_accuracy: accuracy(&params, &te).map_err(|e| e.to_string())?,
        best_epoch: history.best_epoch,
        epochs: history.records.len(),
        val_curve: history.records.iter().map(|r| r.val_accuracy).collect(),
        bars,
        ndcg,
        truth: truth.to_text(names),
    })
}

pub fn parse_r_list(text: &str) -> DemoResult<Vec<f64>> {
    let rs = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("`{s}` is not a number")))
        .collect::<DemoResult<Vec<f64>>>()?;
    if rs.is_empty() {
        return Err("give at least one r value".into());
    }
    Ok(rs)
}

pub fn run_sweep(n: usize, d: usize, k: usize, noise: f64, seed: u64, r_list: &str) -> DemoResult<Vec<SweepPoint>> {
    let rs = parse_r_list(r_list)?;
    let [tr, va, te] = synth_splits(n, d, k, noise, seed)?;
    let base = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let rows = sweep_r(&rs, &base, &tr, &va, &te, 1).map_err(|e| e.to_string())?;
    Ok(rows
        .into_iter()
        .map(|row| SweepPoint {
            r: row.r,
            test_accuracy: row.test_accuracy,
            best_epoch: row.best_epoch,
        })
        .collect())
}

/// `ranking` lists feature names best first, separated by commas or
/// whitespace; `truth` uses `;` between levels and `,` inside a tie.
pub fn run_ndcg(ranking: &str, truth: &str) -> DemoResult<NdcgOutput> {
    let names: Vec<String> = ranking
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    let truth = TruthRanking::parse(truth.trim(), &names).map_err(|e| e.to_string())?;
    let order: Vec<usize> = (0..names.len()).collect();
    let ks: Vec<usize> = (1..=names.len()).collect();
    let eval = evaluate_ranking(&order, &truth, &ks).map_err(|e| e.to_string())?;
    let spearman = if truth.groups().len() == names.len() {
        let strict: Vec<usize> = truth.groups().iter().map(|g| g[0]).collect();
        rank_correlation(&order, &strict).ok()
    } else {
        None
    };
    Ok(NdcgOutput {
        ndcg: eval.ndcg,
        grades: eval.grades,
        spearman,
    })
}

fn to_js<T: Serialize>(r: DemoResult<T>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = trainSynthetic)]
pub fn train_synthetic(
    n: usize,
    d: usize,
    k: usize,
    noise: f64,
    r: f64,
    seed: u32,
    ablation: bool,
) -> Result<String, JsError> {
    to_js(run_train(n, d, k, noise, r, seed.into(), ablation))
}

#[wasm_bindgen(js_name = sweepAmplification)]
pub fn sweep_amplification(n: usize, d: usize, k: usize, noise: f64, seed: u32, r_list: &str) -> Result<String, JsError> {
    to_js(run_sweep(n, d, k, noise, seed.into(), r_list))
}

#[wasm_bindgen(js_name = ndcgCurve)]
pub fn ndcg(ranking: &str, truth: &str) -> Result<String, JsError> {
    to_js(run_ndcg(ranking, truth))
}
