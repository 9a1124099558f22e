//! Iterative feature exclusion.
//!
//! For every feature `j` the input batch is masked so column `j` is zero,
//! passed through attention unit `j` (a bias-free `d x C` linear map followed
//! by a softmax over classes), and re-projected onto the features through the
//! amplified weights `exp(r * w_j)`. The `d` resulting score vectors are
//! averaged over the exclusion axis and squashed with a softmax into one
//! importance distribution per instance.

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::FeatureRanking;
use crate::tape::{ElementwiseKind, Tape, ValueId};

/// Upper bound applied to `r * w` before exponentiation.
pub const EXP_CLAMP: f64 = 50.0;

/// Weights of the `d` attention units plus the amplification coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct IfeParams {
    weights: Vec<Matrix>,
    r: f64,
}

impl IfeParams {
    pub fn new(weights: Vec<Matrix>, r: f64) -> Result<Self> {
        let d = weights.len();
        if d < 2 {
            return Err(Error::invalid(format!("IFE needs d >= 2 units, got {d}")));
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::invalid(format!("amplification r must be > 0, got {r}")));
        }
        let c = weights[0].cols();
        for (j, w) in weights.iter().enumerate() {
            if w.shape() != (d, c) || c == 0 {
                return Err(Error::Shape {
                    op: "ife unit weights",
                    left: w.shape(),
                    right: (d, c),
                });
            }
            if !w.is_finite() {
                return Err(Error::invalid(format!("unit {j}: non-finite weight")));
            }
        }
        Ok(IfeParams { weights, r })
    }

    /// Entries drawn i.i.d. from `U[-1/sqrt(d), 1/sqrt(d)]`.
    pub fn init<R: Rng>(d: usize, n_classes: usize, r: f64, rng: &mut R) -> Result<Self> {
        let bound = 1.0 / (d as f64).sqrt();
        let weights = (0..d)
            .map(|_| {
                let data = (0..d * n_classes)
                    .map(|_| rng.random_range(-bound..=bound))
                    .collect();
                Matrix::from_vec(d, n_classes, data)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(weights, r)
    }

    pub fn zeros(d: usize, n_classes: usize, r: f64) -> Result<Self> {
        Self::new(vec![Matrix::zeros(d, n_classes); d], r)
    }

    pub fn d(&self) -> usize {
        self.weights.len()
    }

    pub fn n_classes(&self) -> usize {
        self.weights[0].cols()
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(Matrix::len).sum()
    }
}

/// `d` exclusion masks; mask `j` is all ones except a zero at `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskBank {
    masks: Vec<Vec<f64>>,
}

impl MaskBank {
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn mask(&self, j: usize) -> &[f64] {
        &self.masks[j]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.masks.iter().map(Vec::as_slice)
    }
}

pub fn build_masks(d: usize) -> Result<MaskBank> {
    if d < 2 {
        return Err(Error::invalid(format!("cannot build exclusion masks for d = {d}")));
    }
    let masks = (0..d)
        .map(|j| (0..d).map(|i| if i == j { 0.0 } else { 1.0 }).collect())
        .collect();
    Ok(MaskBank { masks })
}

/// Multiplies every row of `x` by `mask`. The mask enters as a constant.
pub fn mask_input(tape: &mut Tape, x: ValueId, mask: &[f64]) -> Result<ValueId> {
    if mask.len() != x.cols() {
        return Err(Error::Shape {
            op: "mask_input",
            left: x.shape(),
            right: (1, mask.len()),
        });
    }
    let mut m = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        m.row_mut(i).copy_from_slice(mask);
    }
    let m = tape.constant(m)?;
    tape.mul(x, m)
}

/// `row_softmax(x_masked * w)`: one class distribution per instance.
pub fn attention_unit(tape: &mut Tape, x_masked: ValueId, w: ValueId) -> Result<ValueId> {
    let logits = tape.matmul(x_masked, w)?;
    tape.row_softmax(logits)
}

/// `z * exp(min(r * w, EXP_CLAMP))^T`: per instance, feature `i` scores
/// `sum_c exp(r * w[i, c]) * z[c]`.
pub fn amplified_scores(tape: &mut Tape, w: ValueId, r: f64, z: ValueId) -> Result<ValueId> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("amplification r must be > 0, got {r}")));
    }
    if z.cols() != w.cols() {
        return Err(Error::Shape {
            op: "amplified_scores",
            left: w.shape(),
            right: z.shape(),
        });
    }
    let scaled = tape.scale(w, r)?;
    if tape.value(scaled).as_slice().iter().any(|&v| v > EXP_CLAMP) {
        log::warn!("amplified weight exceeds {EXP_CLAMP}; clamping before exp");
    }
    let clamped = tape.elementwise(ElementwiseKind::ClampMax(EXP_CLAMP), scaled, None)?;
    let amplified = tape.exp(clamped);
    let projected = tape.transpose(amplified);
    tape.matmul(z, projected)
}

/// Averages the per-exclusion score rows and applies a softmax.
///
/// Returns `(mean, S)`, both `B x d`: for instance `b`, `mean[b]` is the
/// column mean of the stacked `d x d` matrix whose row `j` is `a_j[b]`.
pub fn aggregate(tape: &mut Tape, scores: &[ValueId]) -> Result<(ValueId, ValueId)> {
    let Some((&first, rest)) = scores.split_first() else {
        return Err(Error::invalid("aggregate: no score vectors"));
    };
    if scores.len() != first.cols() {
        return Err(Error::Shape {
            op: "aggregate",
            left: first.shape(),
            right: (first.rows(), scores.len()),
        });
    }
    let mut total = first;
    for &a in rest {
        total = tape.add(total, a)?;
    }
    let mean = tape.scale(total, 1.0 / scores.len() as f64)?;
    let s = tape.row_softmax(mean)?;
    Ok((mean, s))
}

/// Tape handles of every intermediate of one IFE pass.
#[derive(Debug, Clone)]
pub struct IfeActivations {
    pub masked: Vec<ValueId>,
    pub z: Vec<ValueId>,
    pub a: Vec<ValueId>,
    pub mean: ValueId,
    pub scores: ValueId,
}

impl IfeActivations {
    /// The stacked `d x d` matrix for one instance; row `j` is `a_j`.
    pub fn stacked(&self, tape: &Tape, instance: usize) -> Matrix {
        let rows: Vec<&[f64]> = self.a.iter().map(|&a| tape.value(a).row(instance)).collect();
        Matrix::from_rows(&rows).expect("equal-length score rows")
    }
}

/// Full IFE pass over a batch, with unit weights already on the tape.
pub fn ife_forward(tape: &mut Tape, x: ValueId, weights: &[ValueId], r: f64) -> Result<IfeActivations> {
    let d = x.cols();
    if weights.len() != d {
        return Err(Error::DimensionMismatch {
            what: "IFE attention units".into(),
            expected: d,
            found: weights.len(),
        });
    }
    let masks = build_masks(d)?;
    let mut masked = Vec::with_capacity(d);
    let mut z = Vec::with_capacity(d);
    let mut a = Vec::with_capacity(d);
    for (mask, &w) in masks.iter().zip(weights) {
        if w.rows() != d {
            return Err(Error::Shape {
                op: "ife_forward",
                left: x.shape(),
                right: w.shape(),
            });
        }
        let xm = mask_input(tape, x, mask)?;
        let zj = attention_unit(tape, xm, w)?;
        let aj = amplified_scores(tape, w, r, zj)?;
        masked.push(xm);
        z.push(zj);
        a.push(aj);
    }
    let (mean, scores) = aggregate(tape, &a)?;
    Ok(IfeActivations {
        masked,
        z,
        a,
        mean,
        scores,
    })
}

/// Convenience wrapper registering `params` as tape parameters.
pub fn ife_forward_params(tape: &mut Tape, x: ValueId, params: &IfeParams) -> Result<(Vec<ValueId>, IfeActivations)> {
    if params.d() != x.cols() {
        return Err(Error::DimensionMismatch {
            what: "IFE input features".into(),
            expected: params.d(),
            found: x.cols(),
        });
    }
    let ids = params
        .weights()
        .iter()
        .map(|w| tape.parameter(w.clone()))
        .collect::<Result<Vec<_>>>()?;
    let act = ife_forward(tape, x, &ids, params.r())?;
    Ok((ids, act))
}

/// Importance scores for a batch without keeping the tape around.
pub fn importance_scores(x: &Matrix, params: &IfeParams) -> Result<Matrix> {
    let mut tape = Tape::new();
    let xid = tape.constant(x.clone())?;
    let (_, act) = ife_forward_params(&mut tape, xid, params)?;
    Ok(tape.value(act.scores).clone())
}

/// Dataset-level ranking: mean of the per-instance score rows, sorted
/// descending with ties broken by the lower feature index.
pub fn global_ranking(scores: &Matrix) -> Result<FeatureRanking> {
    if scores.rows() == 0 {
        return Err(Error::EmptyDataset("global_ranking".into()));
    }
    let n = scores.rows() as f64;
    let mut mean = vec![0.0; scores.cols()];
    for i in 0..scores.rows() {
        for (m, v) in mean.iter_mut().zip(scores.row(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    Ok(FeatureRanking::from_scores(mean))
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::EXP_CLAMP;
    use crate::matrix::Matrix;

    /// Per-instance re-implementation with plain loops and no tape.
    pub fn oracle_scores(x: &[f64], weights: &[Matrix], r: f64) -> Vec<f64> {
        let d = x.len();
        let c = weights[0].cols();
        let mut stacked = vec![vec![0.0; d]; d];
        for j in 0..d {
            let xm: Vec<f64> = (0..d).map(|i| if i == j { 0.0 } else { x[i] }).collect();
            let logits: Vec<f64> = (0..c)
                .map(|k| (0..d).map(|i| xm[i] * weights[j][(i, k)]).sum())
                .collect();
            let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
            let tot: f64 = e.iter().sum();
            let z: Vec<f64> = e.iter().map(|v| v / tot).collect();
            for i in 0..d {
                stacked[j][i] = (0..c)
                    .map(|k| (r * weights[j][(i, k)]).min(EXP_CLAMP).exp() * z[k])
                    .sum();
            }
        }
        let mean: Vec<f64> = (0..d)
            .map(|i| (0..d).map(|j| stacked[j][i]).sum::<f64>() / d as f64)
            .collect();
        let mx = mean.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = mean.iter().map(|m| (m - mx).exp()).collect();
        let tot: f64 = e.iter().sum();
        e.iter().map(|v| v / tot).collect()
    }
}
