use rand::Rng;
use rand_distr::StandardNormal;

use super::EncodedDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::TruthRanking;
use crate::seed::{self, tag};

/// Binary classification data with a planted importance order.
///
/// Features are i.i.d. standard normal. The label is
/// `sum_{i<k} (k - i) * x_i + noise * eps > 0`, so feature 0 matters most,
/// feature k-1 least among the informative ones, and features k.. carry no
/// signal. The truth ranking lists the informative features in coefficient
/// order followed by one tie group holding the rest.
pub fn synth_dataset(n: usize, d: usize, k_informative: usize, noise: f64, seed: u64) -> Result<EncodedDataset> {
    if n < 10 {
        return Err(Error::invalid(format!("synth: n must be >= 10, got {n}")));
    }
    if d < 2 {
        return Err(Error::invalid(format!("synth: d must be >= 2, got {d}")));
    }
    if k_informative < 1 || k_informative > d {
        return Err(Error::invalid(format!(
            "synth: need 1 <= k <= d, got k={k_informative}, d={d}"
        )));
    }
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::invalid(format!("synth: noise must be finite and >= 0, got {noise}")));
    }
    let mut rng = seed::rng(seed, &[tag::SYNTH]);
    let mut x = Matrix::zeros(n, d);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        for v in x.row_mut(i) {
            *v = rng.sample(StandardNormal);
        }
        let eps: f64 = rng.sample(StandardNormal);
        let signal: f64 = x.row(i)[..k_informative]
            .iter()
            .enumerate()
            .map(|(j, v)| (k_informative - j) as f64 * v)
            .sum();
        y.push(usize::from(signal + noise * eps > 0.0));
    }
    let names = (0..d).map(|j| format!("x{j}")).collect();
    let mut groups: Vec<Vec<usize>> = (0..k_informative).map(|j| vec![j]).collect();
    if k_informative < d {
        groups.push((k_informative..d).collect());
    }
    let truth = TruthRanking::new(groups, d)?;
    Ok(EncodedDataset::new(x, y, names, 2)?.with_truth(truth))
}
