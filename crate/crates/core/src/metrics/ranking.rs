use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Features ordered by descending score. `scores` stays in feature order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    order: Vec<usize>,
    scores: Vec<f64>,
}

impl FeatureRanking {
    /// Sorts descending; equal scores keep ascending feature index.
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        Self { order, scores }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn d(&self) -> usize {
        self.order.len()
    }

    pub fn top(&self, k: usize) -> &[usize] {
        &self.order[..k.min(self.order.len())]
    }
}

/// Ground-truth order made of tie groups, most important group first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRanking {
    groups: Vec<Vec<usize>>,
}

impl TruthRanking {
    pub fn new(groups: Vec<Vec<usize>>, d: usize) -> Result<Self> {
        let mut seen = vec![false; d];
        for g in &groups {
            if g.is_empty() {
                return Err(Error::invalid("truth ranking has an empty group"));
            }
            for &j in g {
                if j >= d {
                    return Err(Error::invalid(format!("truth feature {j} out of range for d = {d}")));
                }
                if std::mem::replace(&mut seen[j], true) {
                    return Err(Error::invalid(format!("truth lists feature {j} twice")));
                }
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("truth ranking does not cover feature {j}")));
        }
        Ok(Self { groups })
    }

    pub fn from_order(order: &[usize]) -> Result<Self> {
        Self::new(order.iter().map(|&j| vec![j]).collect(), order.len())
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn d(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Parses `a;b;c,d`: groups separated by `;`, tied names by `,`.
    pub fn parse(text: &str, names: &[String]) -> Result<Self> {
        let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let groups = text
            .trim()
            .split(';')
            .map(|g| {
                g.split(',')
                    .map(|name| {
                        let name = name.trim();
                        index
                            .get(name)
                            .copied()
                            .ok_or_else(|| Error::invalid(format!("unknown feature `{name}` in truth")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(groups, names.len())
    }

    pub fn to_text(&self, names: &[String]) -> String {
        let groups: Vec<String> = self
            .groups
            .iter()
            .map(|g| g.iter().map(|&j| names[j].as_str()).collect::<Vec<_>>().join(","))
            .collect();
        groups.join(";")
    }
}

/// Group g of G gets grade G - 1 - g.
pub fn grades_from_ranking(truth: &TruthRanking) -> Vec<f64> {
    let g_total = truth.groups.len();
    let mut grades = vec![0.0; truth.d()];
    for (g, members) in truth.groups.iter().enumerate() {
        for &j in members {
            grades[j] = (g_total - 1 - g) as f64;
        }
    }
    grades
}

fn check_permutation(order: &[usize], d: usize) -> Result<()> {
    if order.len() != d {
        return Err(Error::DimensionMismatch {
            what: "ranking length".into(),
            expected: d,
            found: order.len(),
        });
    }
    let mut seen = vec![false; d];
    for &j in order {
        if j >= d || std::mem::replace(&mut seen[j], true) {
            return Err(Error::invalid("ranking is not a permutation of the feature set"));
        }
    }
    Ok(())
}

fn dcg(grades: impl Iterator<Item = f64>) -> f64 {
    grades
        .enumerate()
        .map(|(i, g)| g / ((i + 2) as f64).log2())
        .sum()
}

pub fn ndcg_at_k(order: &[usize], grades: &[f64], k: usize) -> Result<f64> {
    let d = grades.len();
    check_permutation(order, d)?;
    if k == 0 || k > d {
        return Err(Error::invalid(format!("K = {k} outside 1..={d}")));
    }
    if grades.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
        return Err(Error::invalid("grades must be finite and non-negative"));
    }
    let mut ideal = grades.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(ideal.into_iter().take(k));
    if idcg == 0.0 {
        return Err(Error::invalid("all relevance grades are zero"));
    }
    Ok(dcg(order.iter().take(k).map(|&j| grades[j])) / idcg)
}

/// NDCG@K for each K in `ks`.
pub fn ndcg_curve(order: &[usize], grades: &[f64], ks: &[usize]) -> Result<Vec<(usize, f64)>> {
    ks.iter().map(|&k| Ok((k, ndcg_at_k(order, grades, k)?))).collect()
}

/// Spearman rho between two strict orders of the same features.
pub fn rank_correlation(a: &[usize], b: &[usize]) -> Result<f64> {
    let d = a.len();
    check_permutation(a, d)?;
    check_permutation(b, d)?;
    if d < 2 {
        return Err(Error::invalid("rank correlation needs at least two features"));
    }
    let mut pos_b = vec![0usize; d];
    for (i, &j) in b.iter().enumerate() {
        pos_b[j] = i;
    }
    let sum_sq: f64 = a
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let diff = i as f64 - pos_b[j] as f64;
            diff * diff
        })
        .sum();
    let n = d as f64;
    Ok(1.0 - 6.0 * sum_sq / (n * (n * n - 1.0)))
}

/// Predicted order scored against a tie-grouped truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEval {
    pub predicted: Vec<usize>,
    pub truth: TruthRanking,
    pub grades: Vec<f64>,
    pub ndcg: Vec<(usize, f64)>,
}

pub fn evaluate_ranking(predicted: &[usize], truth: &TruthRanking, ks: &[usize]) -> Result<RankingEval> {
    let grades = grades_from_ranking(truth);
    let ndcg = ndcg_curve(predicted, &grades, ks)?;
    Ok(RankingEval {
        predicted: predicted.to_vec(),
        truth: truth.clone(),
        grades,
        ndcg,
    })
}
