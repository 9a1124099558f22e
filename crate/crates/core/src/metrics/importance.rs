use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::FeatureRanking;
use crate::data::EncodedDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{predict, IfeNetParams};
use crate::seed::{self, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationImportance {
    pub baseline_accuracy: f64,
    pub importance: Vec<f64>,
    pub ranking: FeatureRanking,
}

fn hits(params: &IfeNetParams, x: &Matrix, y: &[usize]) -> Result<u64> {
    let pred = predict(params, x)?;
    Ok(pred.classes.iter().zip(y).filter(|(p, t)| p == t).count() as u64)
}

/// Accuracy drop when one column is shuffled, averaged over `repeats`.
///
/// Feature j, repeat r shuffles with the stream `(seed, PERMUTE, j, r)`.
/// Counts are accumulated as integers, so a no-op shuffle scores exactly 0.
pub fn permutation_importance(
    params: &IfeNetParams,
    ds: &EncodedDataset,
    repeats: usize,
    seed: u64,
) -> Result<PermutationImportance> {
    if repeats == 0 {
        return Err(Error::invalid("permutation importance needs repeats >= 1"));
    }
    params.check_input(ds.x())?;
    let n = ds.n();
    let base = hits(params, ds.x(), ds.y())?;
    let mut x = ds.x().clone();
    let mut importance = Vec::with_capacity(ds.d());
    for j in 0..ds.d() {
        let original = ds.x().column(j);
        let mut shuffled_hits = 0u64;
        for rep in 0..repeats {
            let mut col = original.clone();
            col.shuffle(&mut seed::rng(seed, &[tag::PERMUTE, j as u64, rep as u64]));
            x.set_column(j, &col);
            shuffled_hits += hits(params, &x, ds.y())?;
        }
        x.set_column(j, &original);
        let drop = base as i64 * repeats as i64 - shuffled_hits as i64;
        importance.push(drop as f64 / (n * repeats) as f64);
    }
    Ok(PermutationImportance {
        baseline_accuracy: base as f64 / n as f64,
        ranking: FeatureRanking::from_scores(importance.clone()),
        importance,
    })
}
