//! IFENet: batch normalization, feature exclusion scoring, score-weighted
//! input and a two-layer ReLU network. The plain network (`Fnn`) shares the
//! same pipeline minus the weighting step.

mod checkpoint;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{from_text, load, save, to_text, CHECKPOINT_VERSION};

use crate::error::{Error, Result};
use crate::ife::{ife_forward, IfeParams};
use crate::matrix::Matrix;
use crate::seed::{self, tag};
use crate::tape::{softmax_rows, ElementwiseKind, Tape, ValueId};

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    IfeNet,
    Fnn,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::IfeNet => "ifenet",
            Architecture::Fnn => "fnn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// How the normalized input is weighted before the hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// `Z = S * X_norm` with `S` from the exclusion module.
    Ife,
    /// `Z = X_norm`.
    Plain,
    /// `Z = 1 * X_norm`; the diagnostic twin of `Plain` through a multiply.
    Ones,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState {
    pub gamma: Matrix,
    pub beta: Matrix,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

impl BatchNormState {
    pub fn new(d: usize) -> Self {
        BatchNormState {
            gamma: Matrix::ones(1, d),
            beta: Matrix::zeros(1, d),
            running_mean: vec![0.0; d],
            running_var: vec![1.0; d],
            momentum: BN_MOMENTUM,
            epsilon: BN_EPSILON,
        }
    }

    /// `running <- (1 - momentum) * running + momentum * batch`.
    pub fn update_running(&mut self, batch_mean: &[f64], batch_var: &[f64]) {
        let m = self.momentum;
        for (r, b) in self.running_mean.iter_mut().zip(batch_mean) {
            *r = (1.0 - m) * *r + m * b;
        }
        for (r, b) in self.running_var.iter_mut().zip(batch_var) {
            *r = (1.0 - m) * *r + m * b;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnnParams {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

impl FnnParams {
    pub fn hidden(&self) -> usize {
        self.w1.cols()
    }

    pub fn zeros(d: usize, hidden: usize, n_classes: usize) -> Self {
        FnnParams {
            w1: Matrix::zeros(d, hidden),
            b1: Matrix::zeros(1, hidden),
            w2: Matrix::zeros(hidden, n_classes),
            b2: Matrix::zeros(1, n_classes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub arch: Architecture,
    pub d: usize,
    pub n_classes: usize,
    pub hidden: usize,
    pub r: f64,
    pub seed: u64,
    /// SHA-256 of the encoder document the model was trained against.
    pub encoder: Option<String>,
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IfeNetParams {
    pub meta: ModelMeta,
    pub bn: BatchNormState,
    pub ife: IfeParams,
    pub fnn: FnnParams,
}

fn uniform_matrix<R: Rng>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized buffer")
}

/// Fresh parameters. `hidden` defaults to `d`.
pub fn init(arch: Architecture, d: usize, n_classes: usize, hidden: Option<usize>, r: f64, seed: u64) -> Result<IfeNetParams> {
    let hidden = hidden.unwrap_or(d);
    if d < 2 || n_classes < 2 || hidden < 1 {
        return Err(Error::invalid(format!(
            "init needs d >= 2, C >= 2, h >= 1 (got d={d}, C={n_classes}, h={hidden})"
        )));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("amplification r must be > 0, got {r}")));
    }
    let mut rng = seed::rng(seed, &[tag::INIT]);
    let ife = IfeParams::init(d, n_classes, r, &mut rng)?;
    let w1 = uniform_matrix(d, hidden, 1.0 / (d as f64).sqrt(), &mut rng);
    let w2 = uniform_matrix(hidden, n_classes, 1.0 / (hidden as f64).sqrt(), &mut rng);
    Ok(IfeNetParams {
        meta: ModelMeta {
            arch,
            d,
            n_classes,
            hidden,
            r,
            seed,
            encoder: None,
            feature_names: (0..d).map(|j| format!("x{j}")).collect(),
        },
        bn: BatchNormState::new(d),
        ife,
        fnn: FnnParams {
            w1,
            b1: Matrix::zeros(1, hidden),
            w2,
            b2: Matrix::zeros(1, n_classes),
        },
    })
}

/// Tape handles of every trainable tensor, in [`IfeNetParams::trainable`] order.
#[derive(Debug, Clone)]
pub struct ParamIds {
    pub gamma: ValueId,
    pub beta: ValueId,
    pub ife: Vec<ValueId>,
    pub w1: ValueId,
    pub b1: ValueId,
    pub w2: ValueId,
    pub b2: ValueId,
}

impl ParamIds {
    pub fn all(&self) -> Vec<ValueId> {
        let mut v = vec![self.gamma, self.beta];
        v.extend(&self.ife);
        v.extend([self.w1, self.b1, self.w2, self.b2]);
        v
    }
}

#[derive(Debug, Clone)]
pub struct Forward {
    pub logits: ValueId,
    pub ids: ParamIds,
    pub normalized: ValueId,
    /// Per-instance importance scores (IFE weighting only).
    pub scores: Option<ValueId>,
    /// Biased batch mean and variance (train mode only).
    pub batch_stats: Option<(Vec<f64>, Vec<f64>)>,
}

impl IfeNetParams {
    pub fn d(&self) -> usize {
        self.meta.d
    }

    pub fn n_classes(&self) -> usize {
        self.meta.n_classes
    }

    pub fn arch(&self) -> Architecture {
        self.meta.arch
    }

    /// Trainable tensors: gamma, beta, the `d` unit weights, W1, b1, W2, b2.
    pub fn trainable(&self) -> Vec<&Matrix> {
        let mut v = vec![&self.bn.gamma, &self.bn.beta];
        v.extend(self.ife.weights());
        v.extend([&self.fnn.w1, &self.fnn.b1, &self.fnn.w2, &self.fnn.b2]);
        v
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = vec![&mut self.bn.gamma, &mut self.bn.beta];
        v.extend(self.ife.weights_mut().iter_mut());
        v.extend([
            &mut self.fnn.w1,
            &mut self.fnn.b1,
            &mut self.fnn.w2,
            &mut self.fnn.b2,
        ]);
        v
    }

    pub fn n_params(&self) -> usize {
        self.trainable().iter().map(|m| m.len()).sum()
    }

    pub fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.d() {
            return Err(Error::DimensionMismatch {
                what: "model input features".into(),
                expected: self.d(),
                found: x.cols(),
            });
        }
        Ok(())
    }

    /// Forward pass following the model's own architecture.
    pub fn forward(&self, tape: &mut Tape, x: &Matrix, mode: Mode) -> Result<Forward> {
        let weighting = match self.arch() {
            Architecture::IfeNet => Weighting::Ife,
            Architecture::Fnn => Weighting::Plain,
        };
        forward_with(self, tape, x, mode, weighting)
    }

    /// Eval-mode logits.
    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let fwd = self.forward(&mut tape, x, Mode::Eval)?;
        Ok(tape.value(fwd.logits).clone())
    }
}

fn broadcast_rows(tape: &mut Tape, ones: ValueId, row: ValueId) -> Result<ValueId> {
    tape.matmul(ones, row)
}

/// Batch normalization composed from tape primitives.
///
/// Train mode normalizes with the biased batch statistics and returns them
/// alongside the output; eval mode uses the running statistics as constants.
pub fn batchnorm_forward(
    tape: &mut Tape,
    x: ValueId,
    state: &BatchNormState,
    gamma: ValueId,
    beta: ValueId,
    mode: Mode,
) -> Result<(ValueId, Option<(Vec<f64>, Vec<f64>)>)> {
    let (b, d) = x.shape();
    if gamma.shape() != (1, d) || beta.shape() != (1, d) {
        return Err(Error::Shape {
            op: "batchnorm",
            left: x.shape(),
            right: gamma.shape(),
        });
    }
    let ones = tape.constant(Matrix::ones(b, 1))?;
    let (normalized, stats) = match mode {
        Mode::Train => {
            if b < 2 {
                return Err(Error::invalid(format!("train-mode batch norm needs B >= 2, got {b}")));
            }
            let mean = tape.mean_over_rows(x)?;
            let mean_b = broadcast_rows(tape, ones, mean)?;
            let neg = tape.scale(mean_b, -1.0)?;
            let centered = tape.add(x, neg)?;
            let sq = tape.mul(centered, centered)?;
            let var = tape.mean_over_rows(sq)?;
            let eps = tape.constant(Matrix::filled(1, d, state.epsilon))?;
            let shifted = tape.add(var, eps)?;
            let inv = tape.elementwise(ElementwiseKind::InvSqrt, shifted, None)?;
            let inv_b = broadcast_rows(tape, ones, inv)?;
            let normalized = tape.mul(centered, inv_b)?;
            let stats = (
                tape.value(mean).as_slice().to_vec(),
                tape.value(var).as_slice().to_vec(),
            );
            (normalized, Some(stats))
        }
        Mode::Eval => {
            let mut shift = Matrix::zeros(b, d);
            let mut scale = Matrix::zeros(b, d);
            for i in 0..b {
                for j in 0..d {
                    shift[(i, j)] = -state.running_mean[j];
                    scale[(i, j)] = 1.0 / (state.running_var[j] + state.epsilon).sqrt();
                }
            }
            let shift = tape.constant(shift)?;
            let scale = tape.constant(scale)?;
            let centered = tape.add(x, shift)?;
            (tape.mul(centered, scale)?, None)
        }
    };
    let gamma_b = broadcast_rows(tape, ones, gamma)?;
    let beta_b = broadcast_rows(tape, ones, beta)?;
    let scaled = tape.mul(normalized, gamma_b)?;
    Ok((tape.add(scaled, beta_b)?, stats))
}

/// Shared pipeline; `weighting` selects IFENet, the plain network, or the
/// all-ones diagnostic.
pub fn forward_with(params: &IfeNetParams, tape: &mut Tape, x: &Matrix, mode: Mode, weighting: Weighting) -> Result<Forward> {
    params.check_input(x)?;
    if x.rows() == 0 {
        return Err(Error::EmptyDataset("forward".into()));
    }
    let ids = ParamIds {
        gamma: tape.parameter(params.bn.gamma.clone())?,
        beta: tape.parameter(params.bn.beta.clone())?,
        ife: params
            .ife
            .weights()
            .iter()
            .map(|w| tape.parameter(w.clone()))
            .collect::<Result<Vec<_>>>()?,
        w1: tape.parameter(params.fnn.w1.clone())?,
        b1: tape.parameter(params.fnn.b1.clone())?,
        w2: tape.parameter(params.fnn.w2.clone())?,
        b2: tape.parameter(params.fnn.b2.clone())?,
    };
    let xid = tape.constant(x.clone())?;
    let (normalized, batch_stats) = batchnorm_forward(tape, xid, &params.bn, ids.gamma, ids.beta, mode)?;

    let (weighted, scores) = match weighting {
        Weighting::Ife => {
            let act = ife_forward(tape, normalized, &ids.ife, params.ife.r())?;
            (tape.mul(act.scores, normalized)?, Some(act.scores))
        }
        Weighting::Plain => (normalized, None),
        Weighting::Ones => {
            let ones = tape.constant(Matrix::ones(x.rows(), x.cols()))?;
            (tape.mul(ones, normalized)?, None)
        }
    };

    let ones = tape.constant(Matrix::ones(x.rows(), 1))?;
    let pre = tape.matmul(weighted, ids.w1)?;
    let b1 = broadcast_rows(tape, ones, ids.b1)?;
    let pre = tape.add(pre, b1)?;
    let hidden = tape.relu(pre);
    let out = tape.matmul(hidden, ids.w2)?;
    let b2 = broadcast_rows(tape, ones, ids.b2)?;
    let logits = tape.add(out, b2)?;
    Ok(Forward {
        logits,
        ids,
        normalized,
        scores,
        batch_stats,
    })
}

pub fn ifenet_forward(params: &IfeNetParams, tape: &mut Tape, x: &Matrix, mode: Mode) -> Result<Forward> {
    forward_with(params, tape, x, mode, Weighting::Ife)
}

pub fn fnn_forward(params: &IfeNetParams, tape: &mut Tape, x: &Matrix, mode: Mode) -> Result<Forward> {
    forward_with(params, tape, x, mode, Weighting::Plain)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub classes: Vec<usize>,
    pub probabilities: Matrix,
}

/// Row argmax with ties going to the lowest class index.
pub fn argmax_rows(m: &Matrix) -> Vec<usize> {
    (0..m.rows())
        .map(|i| {
            let row = m.row(i);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

pub fn predict(params: &IfeNetParams, x: &Matrix) -> Result<Prediction> {
    let logits = params.logits(x)?;
    Ok(Prediction {
        classes: argmax_rows(&logits),
        probabilities: softmax_rows(&logits),
    })
}

/// Eval-mode importance scores of the model's exclusion module.
pub fn importance_scores(params: &IfeNetParams, x: &Matrix) -> Result<Matrix> {
    let mut tape = Tape::new();
    let fwd = forward_with(params, &mut tape, x, Mode::Eval, Weighting::Ife)?;
    Ok(tape.value(fwd.scores.expect("ife weighting yields scores")).clone())
}
