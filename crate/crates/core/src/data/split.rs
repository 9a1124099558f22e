use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EncodedDataset;
use crate::error::{Error, Result};
use crate::seed::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSizes {
    /// Train/validation/test fractions, each > 0, summing to 1.
    Fractions([f64; 3]),
    /// Absolute train/validation/test counts summing to n.
    Counts([usize; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub sizes: SplitSizes,
    pub seed: u64,
    pub stratify: bool,
}

impl SplitSpec {
    pub fn counts(&self, n: usize) -> Result<[usize; 3]> {
        let counts = match self.sizes {
            SplitSizes::Counts(c) => c,
            SplitSizes::Fractions(f) => {
                if f.iter().any(|&v| !(v > 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::InfeasibleSplit(format!(
                        "fractions {f:?} must be positive and sum to 1"
                    )));
                }
                let train = (f[0] * n as f64).round() as usize;
                let val = (f[1] * n as f64).round() as usize;
                if train + val >= n {
                    return Err(Error::InfeasibleSplit(format!(
                        "fractions {f:?} leave no test rows out of {n}"
                    )));
                }
                [train, val, n - train - val]
            }
        };
        if counts.iter().sum::<usize>() != n {
            return Err(Error::InfeasibleSplit(format!(
                "counts {counts:?} sum to {}, dataset has {n} rows",
                counts.iter().sum::<usize>()
            )));
        }
        if counts.contains(&0) {
            return Err(Error::InfeasibleSplit(format!("counts {counts:?} contain an empty split")));
        }
        Ok(counts)
    }
}

fn cut(order: &[usize], counts: [usize; 3]) -> [Vec<usize>; 3] {
    let (a, rest) = order.split_at(counts[0]);
    let (b, c) = rest.split_at(counts[1]);
    [a.to_vec(), b.to_vec(), c.to_vec()]
}

/// Row indices for train, validation and test.
///
/// Stratified splits shuffle each class, give every member the key
/// `(rank + 0.5) / class_size`, and cut the key-sorted sequence, so each
/// split receives each class in proportion up to rounding. When some split
/// would miss a class the split falls back to an unstratified shuffle.
pub fn split_indices(labels: &[usize], spec: &SplitSpec) -> Result<[Vec<usize>; 3]> {
    let n = labels.len();
    let counts = spec.counts(n)?;
    let mut rng = seed::rng(spec.seed, &[tag::SPLIT]);

    if spec.stratify {
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
        for (i, &l) in labels.iter().enumerate() {
            members[l].push(i);
        }
        let mut keyed = Vec::with_capacity(n);
        for (class, m) in members.iter_mut().enumerate() {
            m.shuffle(&mut rng);
            let size = m.len() as f64;
            for (rank, &i) in m.iter().enumerate() {
                keyed.push(((rank as f64 + 0.5) / size, class, i));
            }
        }
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let order: Vec<usize> = keyed.into_iter().map(|k| k.2).collect();
        let parts = cut(&order, counts);
        let present: Vec<usize> = (0..n_classes).filter(|&c| !members[c].is_empty()).collect();
        let complete = parts
            .iter()
            .all(|p| present.iter().all(|&c| p.iter().any(|&i| labels[i] == c)));
        if complete {
            return Ok(parts);
        }
        log::warn!("stratified split cannot place every class in every split; using an unstratified split");
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    Ok(cut(&order, counts))
}

pub fn split(ds: &EncodedDataset, spec: &SplitSpec) -> Result<(EncodedDataset, EncodedDataset, EncodedDataset)> {
    let [a, b, c] = split_indices(ds.y(), spec)?;
    Ok((ds.subset(&a)?, ds.subset(&b)?, ds.subset(&c)?))
}
