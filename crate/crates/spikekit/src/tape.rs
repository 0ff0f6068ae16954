//! Minimal reverse-mode autodiff on a flat tape.
//!
//! Nodes are appended in execution order, so creation order is already a
//! topological order; `backward` walks it once in reverse and accumulates
//! gradients per node. Everything is index-based (no RefCells, no
//! interior mutability), which keeps repeat backward passes bitwise
//! identical.
//!
//! The op set is exactly what the spiking networks here need: matmul and
//! a time-batched linear map, elementwise arithmetic with scalar
//! broadcasting, lead-axis slice/stack/mean for unrolling time, the
//! quantizer node with its straight-through rules, a rectangular-window
//! Heaviside surrogate, and a fused softmax cross-entropy.

use crate::error::TensorError;
use crate::quantizer::{
    quantize_backward_alpha, quantize_backward_x, quantize_forward, BoundMode, QuantizerSpec,
};
use crate::tensor::DenseArray;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    /// `w` is [out x in], `x` is [T x B x in]; output [T x B x out].
    LinearTime { w: NodeId, x: NodeId },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    ScaleConst(NodeId, f64),
    /// `x` is [B x out], `b` is [out], broadcast over rows.
    AddBias { x: NodeId, b: NodeId },
    /// Clipped-round quantizer; gradients live in the quantizer module.
    Quantize { u: NodeId, alpha: NodeId, spec: QuantizerSpec },
    /// `theta(u - threshold)` with rectangular surrogate of half-width
    /// `width` around the threshold.
    Heaviside { u: NodeId, threshold: NodeId, width: f64 },
    Sigmoid(NodeId),
    Detach,
    SliceLead { x: NodeId, index: usize },
    StackLead(Vec<NodeId>),
    Reshape { x: NodeId },
    MeanLead(NodeId),
    Sum(NodeId),
    /// Mean softmax cross-entropy from logits [B x C].
    CrossEntropy { logits: NodeId, labels: Vec<usize> },
}

struct Node {
    value: DenseArray,
    op: Op,
    requires_grad: bool,
}

pub struct Tape {
    nodes: Vec<Node>,
}

/// Per-node gradients from one backward pass, indexed by `NodeId`.
pub struct Gradients {
    grads: Vec<Option<DenseArray>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&DenseArray> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }
}

fn ensure_finite(data: &[f64], op: &'static str) -> Result<(), TensorError> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(TensorError::NonFinite { op })
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &DenseArray {
        &self.nodes[id.0].value
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    pub fn leaf(&mut self, value: DenseArray, requires_grad: bool) -> NodeId {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: DenseArray) -> NodeId {
        self.leaf(value, false)
    }

    fn push(&mut self, value: DenseArray, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn any_grad(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(v, Op::Add(a, b), self.any_grad(&[a, b])))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.push(v, Op::Sub(a, b), self.any_grad(&[a, b])))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let v = self.value(a).mul(self.value(b))?;
        Ok(self.push(v, Op::Mul(a, b), self.any_grad(&[a, b])))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId, TensorError> {
        let v = self.value(a).scale(c)?;
        Ok(self.push(v, Op::ScaleConst(a, c), self.nodes[a.0].requires_grad))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b), self.any_grad(&[a, b])))
    }

    pub fn linear_time(&mut self, w: NodeId, x: NodeId) -> Result<NodeId, TensorError> {
        let wv = self.value(w);
        let xv = self.value(x);
        let (out, input) = match wv.shape()[..] {
            [o, i] => (o, i),
            _ => {
                return Err(TensorError::BadRank {
                    op: "linear_time",
                    expected: "a 2-D weight",
                    got: wv.shape().to_vec(),
                })
            }
        };
        let (t, b, feat) = match xv.shape()[..] {
            [t, b, f] => (t, b, f),
            _ => {
                return Err(TensorError::BadRank {
                    op: "linear_time",
                    expected: "a [T x B x features] input",
                    got: xv.shape().to_vec(),
                })
            }
        };
        if feat != input {
            return Err(TensorError::ShapeMismatch {
                op: "linear_time",
                lhs: wv.shape().to_vec(),
                rhs: xv.shape().to_vec(),
            });
        }
        let mut data = vec![0.0; t * b * out];
        for tb in 0..t * b {
            let xrow = &xv.data()[tb * input..(tb + 1) * input];
            let zrow = &mut data[tb * out..(tb + 1) * out];
            for (o, z) in zrow.iter_mut().enumerate() {
                let wrow = &wv.data()[o * input..(o + 1) * input];
                *z = wrow.iter().zip(xrow).map(|(&wi, &xi)| wi * xi).sum();
            }
        }
        let v = DenseArray::new(vec![t, b, out], data)?;
        Ok(self.push(v, Op::LinearTime { w, x }, self.any_grad(&[w, x])))
    }

    pub fn add_bias(&mut self, x: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let xv = self.value(x);
        let bv = self.value(b);
        let (rows, cols) = match xv.shape()[..] {
            [r, c] => (r, c),
            _ => {
                return Err(TensorError::BadRank {
                    op: "add_bias",
                    expected: "a 2-D input",
                    got: xv.shape().to_vec(),
                })
            }
        };
        if bv.shape() != [cols] {
            return Err(TensorError::ShapeMismatch {
                op: "add_bias",
                lhs: xv.shape().to_vec(),
                rhs: bv.shape().to_vec(),
            });
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(xv.data()[r * cols + c] + bv.data()[c]);
            }
        }
        let v = DenseArray::new(vec![rows, cols], data)?;
        Ok(self.push(v, Op::AddBias { x, b }, self.any_grad(&[x, b])))
    }

    /// Record a quantizer application. `alpha` is its own node so the
    /// offset gradient lands there; `trainable_alpha` on the recorded
    /// rule follows that node's requires-grad flag.
    pub fn quantize(
        &mut self,
        u: NodeId,
        alpha: NodeId,
        d: u32,
        n: f64,
        grad_scale: f64,
        bound_mode: BoundMode,
    ) -> Result<NodeId, TensorError> {
        let spec = QuantizerSpec::new(
            self.value(alpha).clone(),
            d,
            n,
            grad_scale,
            bound_mode,
            self.nodes[alpha.0].requires_grad,
        )?;
        let v = quantize_forward(self.value(u), &spec)?;
        Ok(self.push(v, Op::Quantize { u, alpha, spec }, self.any_grad(&[u, alpha])))
    }

    pub fn heaviside_surrogate(
        &mut self,
        u: NodeId,
        threshold: NodeId,
        width: f64,
    ) -> Result<NodeId, TensorError> {
        let v = self.value(u).sub(self.value(threshold))?.heaviside();
        Ok(self.push(
            v,
            Op::Heaviside { u, threshold, width },
            self.any_grad(&[u, threshold]),
        ))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId, TensorError> {
        let v = self.value(x).map(|a| 1.0 / (1.0 + (-a).exp()));
        ensure_finite(v.data(), "sigmoid")?;
        Ok(self.push(v, Op::Sigmoid(x), self.nodes[x.0].requires_grad))
    }

    pub fn detach(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).clone();
        self.push(v, Op::Detach, false)
    }

    pub fn slice_lead(&mut self, x: NodeId, index: usize) -> Result<NodeId, TensorError> {
        let xv = self.value(x);
        let shape = xv.shape();
        if shape.is_empty() || index >= shape[0] {
            return Err(TensorError::Invalid(format!(
                "slice_lead index {index} out of bounds for shape {shape:?}"
            )));
        }
        let rest: Vec<usize> = shape[1..].to_vec();
        let block: usize = rest.iter().product();
        let data = xv.data()[index * block..(index + 1) * block].to_vec();
        let v = DenseArray::new(rest, data)?;
        Ok(self.push(v, Op::SliceLead { x, index }, self.nodes[x.0].requires_grad))
    }

    pub fn stack_lead(&mut self, parts: &[NodeId]) -> Result<NodeId, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::Invalid("stack_lead needs at least one part".into()));
        }
        let first = self.value(parts[0]).shape().to_vec();
        let mut data = Vec::new();
        for &p in parts {
            let pv = self.value(p);
            if pv.shape() != first {
                return Err(TensorError::ShapeMismatch {
                    op: "stack_lead",
                    lhs: first,
                    rhs: pv.shape().to_vec(),
                });
            }
            data.extend_from_slice(pv.data());
        }
        let mut shape = vec![parts.len()];
        shape.extend_from_slice(&first);
        let v = DenseArray::new(shape, data)?;
        let rg = self.any_grad(parts);
        Ok(self.push(v, Op::StackLead(parts.to_vec()), rg))
    }

    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> Result<NodeId, TensorError> {
        let v = self.value(x).reshape(shape)?;
        Ok(self.push(v, Op::Reshape { x }, self.nodes[x.0].requires_grad))
    }

    pub fn mean_lead(&mut self, x: NodeId) -> Result<NodeId, TensorError> {
        let xv = self.value(x);
        let shape = xv.shape();
        if shape.is_empty() {
            return Err(TensorError::BadRank {
                op: "mean_lead",
                expected: "rank >= 1",
                got: shape.to_vec(),
            });
        }
        let lead = shape[0];
        let rest: Vec<usize> = shape[1..].to_vec();
        let block: usize = rest.iter().product();
        let mut data = vec![0.0; block];
        for l in 0..lead {
            for (i, v) in data.iter_mut().enumerate() {
                *v += xv.data()[l * block + i];
            }
        }
        for v in data.iter_mut() {
            *v /= lead as f64;
        }
        let v = DenseArray::new(rest, data)?;
        Ok(self.push(v, Op::MeanLead(x), self.nodes[x.0].requires_grad))
    }

    pub fn sum_all(&mut self, x: NodeId) -> Result<NodeId, TensorError> {
        let v = DenseArray::scalar(self.value(x).sum())?;
        Ok(self.push(v, Op::Sum(x), self.nodes[x.0].requires_grad))
    }

    pub fn cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId, TensorError> {
        let lv = self.value(logits);
        let (b, c) = match lv.shape()[..] {
            [b, c] => (b, c),
            _ => {
                return Err(TensorError::BadRank {
                    op: "cross_entropy",
                    expected: "2-D logits",
                    got: lv.shape().to_vec(),
                })
            }
        };
        if labels.len() != b {
            return Err(TensorError::Invalid(format!(
                "cross_entropy: {b} rows of logits but {} labels",
                labels.len()
            )));
        }
        let mut total = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            if y >= c {
                return Err(TensorError::Invalid(format!(
                    "cross_entropy: label {y} out of range for {c} classes"
                )));
            }
            let row = &lv.data()[i * c..(i + 1) * c];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
            total += lse - row[y];
        }
        let v = DenseArray::scalar(total / b as f64)?;
        Ok(self.push(
            v,
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
            },
            self.nodes[logits.0].requires_grad,
        ))
    }

    /// Reverse pass from a scalar loss. Visits nodes in reverse creation
    /// order (a topological order by construction) exactly once.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, TensorError> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(TensorError::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<DenseArray>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(DenseArray::ones(lv.shape()));
        for id in (0..=loss.0).rev() {
            if grads[id].is_none() || !self.nodes[id].requires_grad {
                continue;
            }
            let g = grads[id].clone().unwrap();
            self.propagate(id, &g, &mut grads)?;
        }
        Ok(Gradients { grads })
    }

    fn accumulate(
        &self,
        grads: &mut [Option<DenseArray>],
        target: NodeId,
        delta: DenseArray,
    ) -> Result<(), TensorError> {
        if !self.nodes[target.0].requires_grad {
            return Ok(());
        }
        ensure_finite(delta.data(), "backward")?;
        grads[target.0] = Some(match grads[target.0].take() {
            Some(existing) => existing.add(&delta)?,
            None => delta,
        });
        Ok(())
    }

    /// Gradient of a broadcast binary op's operand: if the operand was a
    /// scalar stretched over the other side, its gradient is the sum.
    fn reduce_for(&self, operand: NodeId, g: DenseArray) -> Result<DenseArray, TensorError> {
        let shape = self.value(operand).shape();
        if g.shape() == shape {
            Ok(g)
        } else {
            debug_assert!(self.value(operand).is_scalar());
            DenseArray::new(shape.to_vec(), vec![g.sum()])
        }
    }

    fn propagate(
        &self,
        id: usize,
        g: &DenseArray,
        grads: &mut [Option<DenseArray>],
    ) -> Result<(), TensorError> {
        match &self.nodes[id].op {
            Op::Leaf | Op::Detach => Ok(()),
            Op::Add(a, b) => {
                let ga = self.reduce_for(*a, g.clone())?;
                self.accumulate(grads, *a, ga)?;
                let gb = self.reduce_for(*b, g.clone())?;
                self.accumulate(grads, *b, gb)
            }
            Op::Sub(a, b) => {
                let ga = self.reduce_for(*a, g.clone())?;
                self.accumulate(grads, *a, ga)?;
                let gb = self.reduce_for(*b, g.scale(-1.0)?)?;
                self.accumulate(grads, *b, gb)
            }
            Op::Mul(a, b) => {
                let ga = self.reduce_for(*a, g.mul(self.value(*b))?)?;
                self.accumulate(grads, *a, ga)?;
                let gb = self.reduce_for(*b, g.mul(self.value(*a))?)?;
                self.accumulate(grads, *b, gb)
            }
            Op::ScaleConst(a, c) => self.accumulate(grads, *a, g.scale(*c)?),
            Op::MatMul(a, b) => {
                let da = g.matmul(&self.value(*b).transpose()?)?;
                self.accumulate(grads, *a, da)?;
                let db = self.value(*a).transpose()?.matmul(g)?;
                self.accumulate(grads, *b, db)
            }
            Op::LinearTime { w, x } => {
                let wv = self.value(*w);
                let xv = self.value(*x);
                let [out, input] = wv.shape()[..] else { unreachable!() };
                let [t, b, _] = xv.shape()[..] else { unreachable!() };
                let mut dw = vec![0.0; out * input];
                let mut dx = vec![0.0; t * b * input];
                for tb in 0..t * b {
                    let grow = &g.data()[tb * out..(tb + 1) * out];
                    let xrow = &xv.data()[tb * input..(tb + 1) * input];
                    let dxrow = &mut dx[tb * input..(tb + 1) * input];
                    for (o, &go) in grow.iter().enumerate() {
                        if go == 0.0 {
                            continue;
                        }
                        let wrow = &wv.data()[o * input..(o + 1) * input];
                        let dwrow = &mut dw[o * input..(o + 1) * input];
                        for i in 0..input {
                            dwrow[i] += go * xrow[i];
                            dxrow[i] += go * wrow[i];
                        }
                    }
                }
                self.accumulate(grads, *w, DenseArray::new(vec![out, input], dw)?)?;
                self.accumulate(grads, *x, DenseArray::new(vec![t, b, input], dx)?)
            }
            Op::AddBias { x, b } => {
                self.accumulate(grads, *x, g.clone())?;
                let [_, cols] = self.value(*x).shape()[..] else { unreachable!() };
                let mut db = vec![0.0; cols];
                for (i, &gv) in g.data().iter().enumerate() {
                    db[i % cols] += gv;
                }
                self.accumulate(grads, *b, DenseArray::new(vec![cols], db)?)
            }
            Op::Quantize { u, alpha, spec } => {
                let uv = self.value(*u);
                if self.nodes[u.0].requires_grad {
                    let du = quantize_backward_x(g, uv, spec)?;
                    self.accumulate(grads, *u, du)?;
                }
                if self.nodes[alpha.0].requires_grad {
                    let da = quantize_backward_alpha(g, uv, spec)?;
                    self.accumulate(grads, *alpha, da)?;
                }
                Ok(())
            }
            Op::Heaviside { u, threshold, width } => {
                let uv = self.value(*u);
                let tv = self.value(*threshold);
                let scalar_th = tv.is_scalar();
                let th_at = |i: usize| {
                    if scalar_th {
                        tv.item()
                    } else {
                        tv.data()[i]
                    }
                };
                let mut du = Vec::with_capacity(uv.len());
                for (i, &x) in uv.data().iter().enumerate() {
                    let inside = (x - th_at(i)).abs() <= *width;
                    du.push(if inside { g.data()[i] } else { 0.0 });
                }
                if self.nodes[threshold.0].requires_grad {
                    let dth = if scalar_th {
                        DenseArray::new(tv.shape().to_vec(), vec![-du.iter().sum::<f64>()])?
                    } else {
                        DenseArray::new(tv.shape().to_vec(), du.iter().map(|v| -v).collect())?
                    };
                    self.accumulate(grads, *threshold, dth)?;
                }
                self.accumulate(grads, *u, DenseArray::new(uv.shape().to_vec(), du)?)
            }
            Op::Sigmoid(x) => {
                let y = &self.nodes[id].value;
                let dy = y.map(|s| s * (1.0 - s));
                self.accumulate(grads, *x, g.mul(&dy)?)
            }
            Op::SliceLead { x, index } => {
                let xv = self.value(*x);
                let block = g.len();
                let mut dx = vec![0.0; xv.len()];
                dx[index * block..(index + 1) * block].copy_from_slice(g.data());
                self.accumulate(grads, *x, DenseArray::new(xv.shape().to_vec(), dx)?)
            }
            Op::StackLead(parts) => {
                let block = g.len() / parts.len();
                for (k, &p) in parts.iter().enumerate() {
                    let dp = DenseArray::new(
                        self.value(p).shape().to_vec(),
                        g.data()[k * block..(k + 1) * block].to_vec(),
                    )?;
                    self.accumulate(grads, p, dp)?;
                }
                Ok(())
            }
            Op::Reshape { x } => {
                let dx = g.reshape(self.value(*x).shape().to_vec())?;
                self.accumulate(grads, *x, dx)
            }
            Op::MeanLead(x) => {
                let xv = self.value(*x);
                let lead = xv.shape()[0];
                let scaled = g.scale(1.0 / lead as f64)?;
                let mut dx = Vec::with_capacity(xv.len());
                for _ in 0..lead {
                    dx.extend_from_slice(scaled.data());
                }
                self.accumulate(grads, *x, DenseArray::new(xv.shape().to_vec(), dx)?)
            }
            Op::Sum(x) => {
                let xv = self.value(*x);
                self.accumulate(grads, *x, DenseArray::full(xv.shape(), g.item()))
            }
            Op::CrossEntropy { logits, labels } => {
                let lv = self.value(*logits);
                let [b, c] = lv.shape()[..] else { unreachable!() };
                let scale = g.item() / b as f64;
                let mut dz = Vec::with_capacity(b * c);
                for (i, &y) in labels.iter().enumerate() {
                    let row = &lv.data()[i * c..(i + 1) * c];
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let denom: f64 = row.iter().map(|&z| (z - max).exp()).sum();
                    for (j, &z) in row.iter().enumerate() {
                        let p = (z - max).exp() / denom;
                        let onehot = if j == y { 1.0 } else { 0.0 };
                        dz.push(scale * (p - onehot));
                    }
                }
                self.accumulate(grads, *logits, DenseArray::new(vec![b, c], dz)?)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central finite differences over a flat parameter vector.
    fn fd_grad(f: &dyn Fn(&[f64]) -> f64, at: &[f64], eps: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(at.len());
        let mut p = at.to_vec();
        for i in 0..at.len() {
            let orig = p[i];
            p[i] = orig + eps;
            let hi = f(&p);
            p[i] = orig - eps;
            let lo = f(&p);
            p[i] = orig;
            out.push((hi - lo) / (2.0 * eps));
        }
        out
    }

    #[test]
    fn sum_backward_is_ones() {
        let mut t = Tape::new();
        let x = t.leaf(DenseArray::from_vec(vec![1.0, -2.0, 3.0]).unwrap(), true);
        let s = t.sum_all(x).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn elementwise_square_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(DenseArray::from_vec(vec![1.0, 2.0]).unwrap(), true);
        let sq = t.mul(x, x).unwrap();
        let s = t.sum_all(sq).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_gradients_match_finite_differences() {
        let a0: Vec<f64> = (0..12).map(|i| (i as f64) * 0.37 - 2.0).collect();
        let b0: Vec<f64> = (0..6).map(|i| (i as f64) * -0.21 + 0.5).collect();
        let run = |av: &[f64], bv: &[f64]| -> (f64, Vec<f64>, Vec<f64>) {
            let mut t = Tape::new();
            let a = t.leaf(DenseArray::new(vec![4, 3], av.to_vec()).unwrap(), true);
            let b = t.leaf(DenseArray::new(vec![3, 2], bv.to_vec()).unwrap(), true);
            let c = t.matmul(a, b).unwrap();
            let sq = t.mul(c, c).unwrap();
            let s = t.sum_all(sq).unwrap();
            let g = t.backward(s).unwrap();
            (
                t.value(s).item(),
                g.get(a).unwrap().data().to_vec(),
                g.get(b).unwrap().data().to_vec(),
            )
        };
        let (_, da, db) = run(&a0, &b0);
        let fa = fd_grad(&|av| run(av, &b0).0, &a0, 1e-4);
        let fb = fd_grad(&|bv| run(&a0, bv).0, &b0, 1e-4);
        for (x, y) in da.iter().zip(&fa) {
            assert!((x - y).abs() < 1e-5, "dA {x} vs FD {y}");
        }
        for (x, y) in db.iter().zip(&fb) {
            assert!((x - y).abs() < 1e-5, "dB {x} vs FD {y}");
        }
    }

    #[test]
    fn linear_time_matches_per_step_matmul() {
        let mut t = Tape::new();
        let w = t.leaf(DenseArray::new(vec![2, 3], vec![1.0, 0.5, -1.0, 0.0, 2.0, 1.0]).unwrap(), true);
        let x = t.leaf(
            DenseArray::new(vec![2, 1, 3], vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0]).unwrap(),
            true,
        );
        let z = t.linear_time(w, x).unwrap();
        assert_eq!(t.value(z).shape(), &[2, 1, 2]);
        // step 0: W [1,2,3] = [1 + 1 - 3, 4 + 3] = [-1, 7]
        // step 1: W [-1,0.5,0] = [-1 + 0.25, 1] = [-0.75, 1]
        assert_eq!(t.value(z).data(), &[-1.0, 7.0, -0.75, 1.0]);
        let s = t.sum_all(z).unwrap();
        let g = t.backward(s).unwrap();
        // dW[o][i] = sum over (t,b) of x[t,b,i]
        assert_eq!(
            g.get(w).unwrap().data(),
            &[0.0, 2.5, 3.0, 0.0, 2.5, 3.0]
        );
        // dx[t,b,i] = sum over o of w[o][i]
        assert_eq!(g.get(x).unwrap().data(), &[1.0, 2.5, 0.0, 1.0, 2.5, 0.0]);
    }

    #[test]
    fn slice_stack_round_trip_gradients() {
        let mut t = Tape::new();
        let x = t.leaf(DenseArray::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap(), true);
        let a = t.slice_lead(x, 0).unwrap();
        let b = t.slice_lead(x, 1).unwrap();
        let restacked = t.stack_lead(&[b, a]).unwrap();
        assert_eq!(t.value(restacked).data(), &[3.0, 4.0, 1.0, 2.0]);
        let doubled = t.scale(b, 2.0).unwrap();
        let joined = t.stack_lead(&[a, doubled]).unwrap();
        let s = t.sum_all(joined).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn cross_entropy_gradient_is_softmax_minus_onehot() {
        let mut t = Tape::new();
        let z = t.leaf(DenseArray::new(vec![1, 3], vec![1.0, 2.0, 0.5]).unwrap(), true);
        let loss = t.cross_entropy(z, &[1]).unwrap();
        let g = t.backward(loss).unwrap();
        let row = [1.0f64, 2.0, 0.5];
        let denom: f64 = row.iter().map(|z| z.exp()).sum();
        let expect: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(j, z)| z.exp() / denom - if j == 1 { 1.0 } else { 0.0 })
            .collect();
        for (a, b) in g.get(z).unwrap().data().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn quantize_node_routes_both_rules() {
        let mut t = Tape::new();
        let u = t.leaf(DenseArray::from_vec(vec![-1.0, 2.0, 7.0]).unwrap(), true);
        let alpha = t.leaf(DenseArray::scalar(0.0).unwrap(), true);
        let y = t.quantize(u, alpha, 4, 1.0, 1.0, BoundMode::Integerized).unwrap();
        assert_eq!(t.value(y).data(), &[0.0, 2.0, 4.0]);
        let w = t.constant(DenseArray::from_vec(vec![0.5, -0.2, 0.3]).unwrap());
        let weighted = t.mul(y, w).unwrap();
        let s = t.sum_all(weighted).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(u).unwrap().data(), &[0.0, -0.2, 0.0]);
        assert!((g.get(alpha).unwrap().item() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn detach_blocks_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(DenseArray::from_vec(vec![1.0, 2.0]).unwrap(), true);
        let d = t.detach(x);
        let y = t.mul(x, d).unwrap();
        let s = t.sum_all(y).unwrap();
        let g = t.backward(s).unwrap();
        // d(x * stop(x))/dx = stop(x), not 2x.
        assert_eq!(g.get(x).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn heaviside_surrogate_has_rectangular_window() {
        let mut t = Tape::new();
        let u = t.leaf(DenseArray::from_vec(vec![0.2, 0.9, 1.6, 1.5]).unwrap(), true);
        let th = t.constant(DenseArray::scalar(1.0).unwrap());
        let s = t.heaviside_surrogate(u, th, 0.5).unwrap();
        assert_eq!(t.value(s).data(), &[0.0, 0.0, 1.0, 1.0]);
        let total = t.sum_all(s).unwrap();
        let g = t.backward(total).unwrap();
        // |u - 1| <= 0.5 passes gradient; 0.2 and 1.6 are outside.
        assert_eq!(g.get(u).unwrap().data(), &[0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn repeat_backward_is_bitwise_identical() {
        let mut t = Tape::new();
        let x = t.leaf(DenseArray::from_vec(vec![0.3, -1.7, 2.9]).unwrap(), true);
        let alpha = t.leaf(DenseArray::scalar(-0.5).unwrap(), true);
        let q = t.quantize(x, alpha, 2, 2.0, 1.5, BoundMode::Integerized).unwrap();
        let y = t.mul(q, x).unwrap();
        let s = t.sum_all(y).unwrap();
        let g1 = t.backward(s).unwrap();
        let g2 = t.backward(s).unwrap();
        for id in [x, alpha] {
            let a = g1.get(id).unwrap().data();
            let b = g2.get(id).unwrap().data();
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn backward_rejects_vector_loss() {
        let mut t = Tape::new();
        let x = t.leaf(DenseArray::from_vec(vec![1.0, 2.0]).unwrap(), true);
        assert!(matches!(
            t.backward(x),
            Err(TensorError::NonScalarLoss(_))
        ));
    }

    #[test]
    fn mean_lead_averages_time() {
        let mut t = Tape::new();
        let x = t.leaf(DenseArray::new(vec![2, 1, 2], vec![1.0, 2.0, 3.0, 6.0]).unwrap(), true);
        let m = t.mean_lead(x).unwrap();
        assert_eq!(t.value(m).data(), &[2.0, 4.0]);
        let s = t.sum_all(m).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn sigmoid_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(DenseArray::scalar(0.0).unwrap(), true);
        let y = t.sigmoid(x).unwrap();
        assert_eq!(t.value(y).item(), 0.5);
        let g = t.backward(y).unwrap();
        assert!((g.get(x).unwrap().item() - 0.25).abs() < 1e-15);
    }
}
