//! Reverse-mode differentiation over a closed set of matrix operations.
//!
//! A [`Tape`] records nodes in creation order, so every node's inputs have
//! smaller ids and a single reverse sweep visits them in topological order.
//! Only nodes created with [`Tape::parameter`] receive adjoints in the
//! resulting [`GradientMap`].

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ValueId {
    id: usize,
    shape: (usize, usize),
}

impl ValueId {
    pub fn index(self) -> usize {
        self.id
    }

    pub fn shape(self) -> (usize, usize) {
        self.shape
    }

    pub fn rows(self) -> usize {
        self.shape.0
    }

    pub fn cols(self) -> usize {
        self.shape.1
    }
}

/// Pointwise operations. `Add` and `Mul` are binary, the rest unary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementwiseKind {
    Add,
    Mul,
    Exp,
    Relu,
    Scale(f64),
    /// `x^(-1/2)`; input must be strictly positive.
    InvSqrt,
    /// `min(x, c)`; gradient is zero where the input exceeds `c`.
    ClampMax(f64),
}

impl ElementwiseKind {
    fn is_binary(self) -> bool {
        matches!(self, ElementwiseKind::Add | ElementwiseKind::Mul)
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Parameter,
    MatMul(usize, usize),
    Transpose(usize),
    Binary(ElementwiseKind, usize, usize),
    Unary(ElementwiseKind, usize),
    RowSoftmax(usize),
    MeanOverRows(usize),
    CrossEntropy { logits: usize, labels: Vec<usize> },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Matrix,
}

/// Append-only record of a forward computation.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints of every parameter node on a tape, keyed by the parameter handle.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMap {
    grads: BTreeMap<usize, Matrix>,
}

impl GradientMap {
    /// Adjoint for `param`; `None` when `param` is not a parameter node.
    pub fn get(&self, param: ValueId) -> Option<&Matrix> {
        self.grads.get(&param.id)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Matrix)> {
        self.grads.iter().map(|(&k, v)| (k, v))
    }
}

fn check_finite(op: &'static str, data: &Matrix) -> Result<()> {
    if data.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{op}: non-finite entry")))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Forward value of a recorded node.
    pub fn value(&self, id: ValueId) -> &Matrix {
        &self.nodes[id.id].value
    }

    fn push(&mut self, op: Op, value: Matrix) -> ValueId {
        let shape = value.shape();
        let id = self.nodes.len();
        self.nodes.push(Node { op, value });
        ValueId { id, shape }
    }

    pub fn constant(&mut self, data: Matrix) -> Result<ValueId> {
        check_finite("constant", &data)?;
        Ok(self.push(Op::Constant, data))
    }

    pub fn parameter(&mut self, data: Matrix) -> Result<ValueId> {
        check_finite("parameter", &data)?;
        Ok(self.push(Op::Parameter, data))
    }

    pub fn matmul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        if a.cols() != b.rows() {
            return Err(Error::Shape {
                op: "matmul",
                left: a.shape,
                right: b.shape,
            });
        }
        let value = self.value(a).matmul(self.value(b));
        Ok(self.push(Op::MatMul(a.id, b.id), value))
    }

    pub fn transpose(&mut self, a: ValueId) -> ValueId {
        let value = self.value(a).transpose();
        self.push(Op::Transpose(a.id), value)
    }

    pub fn elementwise(
        &mut self,
        kind: ElementwiseKind,
        a: ValueId,
        b: Option<ValueId>,
    ) -> Result<ValueId> {
        match (kind.is_binary(), b) {
            (true, Some(b)) => {
                if a.shape != b.shape {
                    return Err(Error::Shape {
                        op: "elementwise",
                        left: a.shape,
                        right: b.shape,
                    });
                }
                let (x, y) = (self.value(a), self.value(b));
                let value = match kind {
                    ElementwiseKind::Add => x.zip_map(y, |p, q| p + q),
                    _ => x.zip_map(y, |p, q| p * q),
                };
                Ok(self.push(Op::Binary(kind, a.id, b.id), value))
            }
            (true, None) => Err(Error::invalid(format!("{kind:?} needs two operands"))),
            (false, Some(_)) => Err(Error::invalid(format!("{kind:?} takes one operand"))),
            (false, None) => {
                let x = self.value(a);
                let value = match kind {
                    ElementwiseKind::Exp => x.map(f64::exp),
                    ElementwiseKind::Relu => x.map(|v| if v > 0.0 { v } else { 0.0 }),
                    ElementwiseKind::Scale(c) => {
                        if !c.is_finite() {
                            return Err(Error::invalid("scale: non-finite factor"));
                        }
                        x.map(|v| c * v)
                    }
                    ElementwiseKind::InvSqrt => {
                        if x.as_slice().iter().any(|&v| v <= 0.0) {
                            return Err(Error::invalid("inv_sqrt: non-positive entry"));
                        }
                        x.map(|v| 1.0 / v.sqrt())
                    }
                    ElementwiseKind::ClampMax(c) => {
                        if !c.is_finite() {
                            return Err(Error::invalid("clamp_max: non-finite bound"));
                        }
                        x.map(|v| v.min(c))
                    }
                    ElementwiseKind::Add | ElementwiseKind::Mul => unreachable!(),
                };
                Ok(self.push(Op::Unary(kind, a.id), value))
            }
        }
    }

    pub fn add(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        self.elementwise(ElementwiseKind::Add, a, Some(b))
    }

    pub fn mul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        self.elementwise(ElementwiseKind::Mul, a, Some(b))
    }

    pub fn exp(&mut self, a: ValueId) -> ValueId {
        self.elementwise(ElementwiseKind::Exp, a, None)
            .expect("unary exp")
    }

    pub fn relu(&mut self, a: ValueId) -> ValueId {
        self.elementwise(ElementwiseKind::Relu, a, None)
            .expect("unary relu")
    }

    pub fn scale(&mut self, a: ValueId, c: f64) -> Result<ValueId> {
        self.elementwise(ElementwiseKind::Scale(c), a, None)
    }

    /// Softmax of every row, shifted by the row max before exponentiation.
    pub fn row_softmax(&mut self, a: ValueId) -> Result<ValueId> {
        if a.cols() == 0 {
            return Err(Error::Shape {
                op: "row_softmax",
                left: a.shape,
                right: (a.rows(), 1),
            });
        }
        let value = softmax_rows(self.value(a));
        Ok(self.push(Op::RowSoftmax(a.id), value))
    }

    /// Column means as a `1 x cols` row.
    pub fn mean_over_rows(&mut self, a: ValueId) -> Result<ValueId> {
        if a.rows() == 0 {
            return Err(Error::Shape {
                op: "mean_over_rows",
                left: a.shape,
                right: (1, a.cols()),
            });
        }
        let x = self.value(a);
        let mut out = Matrix::zeros(1, x.cols());
        for i in 0..x.rows() {
            for (o, v) in out.as_mut_slice().iter_mut().zip(x.row(i)) {
                *o += v;
            }
        }
        let n = x.rows() as f64;
        let out = out.map(|v| v / n);
        Ok(self.push(Op::MeanOverRows(a.id), out))
    }

    /// Mean negative log-likelihood of `labels` under `row_softmax(logits)`.
    pub fn cross_entropy_loss(&mut self, logits: ValueId, labels: &[usize]) -> Result<ValueId> {
        if logits.rows() != labels.len() || labels.is_empty() {
            return Err(Error::Shape {
                op: "cross_entropy_loss",
                left: logits.shape,
                right: (labels.len(), logits.cols()),
            });
        }
        let classes = logits.cols();
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let x = self.value(logits);
        let mut total = 0.0;
        for (i, &label) in labels.iter().enumerate() {
            let row = x.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[label];
        }
        let loss = Matrix::filled(1, 1, total / labels.len() as f64);
        Ok(self.push(
            Op::CrossEntropy {
                logits: logits.id,
                labels: labels.to_vec(),
            },
            loss,
        ))
    }

    /// Reverse sweep from a `1 x 1` loss node.
    pub fn backward(&self, loss: ValueId) -> Result<GradientMap> {
        if loss.shape != (1, 1) {
            return Err(Error::NonScalarLoss(loss.shape));
        }
        let mut adjoints: Vec<Option<Matrix>> = vec![None; loss.id + 1];
        adjoints[loss.id] = Some(Matrix::ones(1, 1));

        fn accumulate(slot: &mut Option<Matrix>, delta: Matrix) {
            match slot {
                Some(acc) => acc.add_assign(&delta),
                None => *slot = Some(delta),
            }
        }

        for id in (0..=loss.id).rev() {
            let Some(upstream) = adjoints[id].take() else {
                continue;
            };
            let node = &self.nodes[id];
            match &node.op {
                Op::Constant => {}
                Op::Parameter => {
                    adjoints[id] = Some(upstream);
                }
                Op::MatMul(a, b) => {
                    let av = &self.nodes[*a].value;
                    let bv = &self.nodes[*b].value;
                    let da = upstream.matmul(&bv.transpose());
                    let db = av.transpose().matmul(&upstream);
                    accumulate(&mut adjoints[*a], da);
                    accumulate(&mut adjoints[*b], db);
                }
                Op::Transpose(a) => accumulate(&mut adjoints[*a], upstream.transpose()),
                Op::Binary(kind, a, b) => {
                    let (da, db) = match kind {
                        ElementwiseKind::Add => (upstream.clone(), upstream),
                        _ => {
                            let av = &self.nodes[*a].value;
                            let bv = &self.nodes[*b].value;
                            (upstream.zip_map(bv, |g, y| g * y), upstream.zip_map(av, |g, x| g * x))
                        }
                    };
                    accumulate(&mut adjoints[*a], da);
                    accumulate(&mut adjoints[*b], db);
                }
                Op::Unary(kind, a) => {
                    let input = &self.nodes[*a].value;
                    let out = &node.value;
                    let da = match *kind {
                        ElementwiseKind::Exp => upstream.zip_map(out, |g, y| g * y),
                        ElementwiseKind::Relu => {
                            upstream.zip_map(input, |g, x| if x > 0.0 { g } else { 0.0 })
                        }
                        ElementwiseKind::Scale(c) => upstream.map(|g| c * g),
                        // d(x^-1/2)/dx = -1/2 * y^3
                        ElementwiseKind::InvSqrt => {
                            upstream.zip_map(out, |g, y| -0.5 * g * y * y * y)
                        }
                        ElementwiseKind::ClampMax(c) => {
                            upstream.zip_map(input, |g, x| if x > c { 0.0 } else { g })
                        }
                        ElementwiseKind::Add | ElementwiseKind::Mul => unreachable!(),
                    };
                    accumulate(&mut adjoints[*a], da);
                }
                Op::RowSoftmax(a) => {
                    let s = &node.value;
                    let mut da = Matrix::zeros(s.rows(), s.cols());
                    for i in 0..s.rows() {
                        let (srow, grow) = (s.row(i), upstream.row(i));
                        let dot: f64 = srow.iter().zip(grow).map(|(p, g)| p * g).sum();
                        for (k, d) in da.row_mut(i).iter_mut().enumerate() {
                            *d = srow[k] * (grow[k] - dot);
                        }
                    }
                    accumulate(&mut adjoints[*a], da);
                }
                Op::MeanOverRows(a) => {
                    let rows = self.nodes[*a].value.rows();
                    let scale = 1.0 / rows as f64;
                    let mut da = Matrix::zeros(rows, upstream.cols());
                    for i in 0..rows {
                        for (d, g) in da.row_mut(i).iter_mut().zip(upstream.row(0)) {
                            *d = g * scale;
                        }
                    }
                    accumulate(&mut adjoints[*a], da);
                }
                Op::CrossEntropy { logits, labels } => {
                    let g = upstream[(0, 0)];
                    let mut da = softmax_rows(&self.nodes[*logits].value);
                    let n = labels.len() as f64;
                    for (i, &label) in labels.iter().enumerate() {
                        da[(i, label)] -= 1.0;
                        for v in da.row_mut(i) {
                            *v *= g / n;
                        }
                    }
                    accumulate(&mut adjoints[*logits], da);
                }
            }
        }

        let mut grads = BTreeMap::new();
        for (id, node) in self.nodes.iter().enumerate() {
            if let Op::Parameter = node.op {
                let adj = adjoints
                    .get_mut(id)
                    .and_then(Option::take)
                    .unwrap_or_else(|| Matrix::zeros(node.value.rows(), node.value.cols()));
                grads.insert(id, adj);
            }
        }
        Ok(GradientMap { grads })
    }
}

pub(crate) fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

/// Compares tape adjoints of every parameter entry against central differences.
///
/// `build` receives a fresh tape and one parameter handle per entry of
/// `params` and must return a scalar loss. Returns the largest
/// `|tape - fd| / max(1e-8, |tape| + |fd|)` over all entries.
pub fn grad_check<F>(build: F, params: &[Matrix], eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[ValueId]) -> Result<ValueId>,
{
    if !(eps > 0.0) {
        return Err(Error::invalid("grad_check: eps must be positive"));
    }
    let eval = |values: &[Matrix]| -> Result<(Tape, Vec<ValueId>, ValueId)> {
        let mut tape = Tape::new();
        let ids = values
            .iter()
            .map(|m| tape.parameter(m.clone()))
            .collect::<Result<Vec<_>>>()?;
        let loss = build(&mut tape, &ids)?;
        Ok((tape, ids, loss))
    };

    let (tape, ids, loss) = eval(params)?;
    let grads = tape.backward(loss)?;

    let mut worst: f64 = 0.0;
    let mut probe = params.to_vec();
    for (p, id) in ids.iter().enumerate() {
        let analytic = grads.get(*id).expect("parameter adjoint");
        for k in 0..params[p].len() {
            let orig = params[p].as_slice()[k];
            probe[p].as_mut_slice()[k] = orig + eps;
            let (t, _, l) = eval(&probe)?;
            let plus = t.value(l)[(0, 0)];
            probe[p].as_mut_slice()[k] = orig - eps;
            let (t, _, l) = eval(&probe)?;
            let minus = t.value(l)[(0, 0)];
            probe[p].as_mut_slice()[k] = orig;

            let fd = (plus - minus) / (2.0 * eps);
            let ad = analytic.as_slice()[k];
            let rel = (ad - fd).abs() / (ad.abs() + fd.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
