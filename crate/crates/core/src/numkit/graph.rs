//! Append-only computation graph with reverse-mode differentiation.
//!
//! Nodes are recorded in topological order (parents always precede
//! children); [`Graph::backward`] walks the node list once in reverse and
//! accumulates gradients into every node that transitively depends on a
//! trainable leaf. A graph can be differentiated exactly once — a second
//! call is rejected so gradients can never silently accumulate across
//! steps.

use super::kernels;
use super::tensor::Tensor;
use super::LOG_CLAMP;
use crate::error::{Error, Result};

/// Index of a node on the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul,
    Conv2d { kernel: usize, stride: usize, pad: usize },
    AddBias,
    LeakyRelu { slope: f64 },
    Sigmoid,
    SoftmaxChannels,
    Add,
    Sub,
    Mul,
    Affine { mul: f64 },
    Abs,
    Sum,
    LogClamped,
    Dot,
    PowConst { exp: f64 },
    Concat,
}

struct Node {
    op: Op,
    parents: Vec<NodeId>,
    shape: Vec<usize>,
    value: Vec<f64>,
    grad: Option<Vec<f64>>,
    needs_grad: bool,
}

/// Recorded forward computation.
pub struct Graph {
    nodes: Vec<Node>,
    backward_done: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::with_capacity(64),
            backward_done: false,
        }
    }

    fn push(&mut self, op: Op, parents: Vec<NodeId>, shape: Vec<usize>, value: Vec<f64>) -> NodeId {
        let needs_grad = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node {
            op,
            parents,
            shape,
            value,
            grad: None,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Records a non-trainable input.
    pub fn constant(&mut self, t: &Tensor) -> NodeId {
        self.push(Op::Leaf, vec![], t.shape().to_vec(), t.data().to_vec())
    }

    /// Records a trainable leaf; gradients will be available after
    /// [`Graph::backward`].
    pub fn leaf(&mut self, t: &Tensor) -> NodeId {
        let id = self.push(Op::Leaf, vec![], t.shape().to_vec(), t.data().to_vec());
        self.nodes[id.0].needs_grad = true;
        id
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    /// Value of a single-element node.
    pub fn scalar_value(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.nodes[id.0].value.len(), 1);
        self.nodes[id.0].value[0]
    }

    /// Gradient of a node, if backward has touched it.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].grad.as_deref()
    }

    /// Copies a leaf's gradient into the tensor it was created from.
    pub fn grad_into(&self, id: NodeId, t: &mut Tensor) -> Result<()> {
        let g = self
            .grad(id)
            .ok_or_else(|| Error::contract("node has no gradient"))?;
        t.set_grad(g.to_vec())
    }

    // ---- ops -----------------------------------------------------------

    /// a[M×K] · b[K×N] → [M×N]
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 {
            return Err(Error::shape("matmul expects rank-2 tensors"));
        }
        let (m, k, k2, n) = (sa[0], sa[1], sb[0], sb[1]);
        if k != k2 {
            return Err(Error::shape(format!(
                "matmul inner dims disagree: {k} vs {k2}"
            )));
        }
        let mut out = vec![0.0; m * n];
        kernels::matmul(self.value(a), self.value(b), m, k, n, &mut out);
        Ok(self.push(Op::MatMul, vec![a, b], vec![m, n], out))
    }

    /// Cross-correlation of x[C×H×W] with w[O×C×k×k].
    ///
    /// Padding is `(k-1)/2`, so 3×3 stride-1 preserves H×W, stride 2 yields
    /// ceil(H/2)×ceil(W/2), and 1×1 kernels act per pixel.
    pub fn conv2d(&mut self, x: NodeId, w: NodeId, stride: usize) -> Result<NodeId> {
        if !(stride == 1 || stride == 2) {
            return Err(Error::contract(format!("conv2d stride {stride} not in {{1,2}}")));
        }
        let (sx, sw) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if sx.len() != 3 || sw.len() != 4 {
            return Err(Error::shape("conv2d expects x[C,H,W], w[O,C,k,k]"));
        }
        let (c_in, h, wd) = (sx[0], sx[1], sx[2]);
        let (c_out, c_in2, k, k2) = (sw[0], sw[1], sw[2], sw[3]);
        if k != k2 {
            return Err(Error::shape("conv2d kernel must be square"));
        }
        if c_in != c_in2 {
            return Err(Error::shape(format!(
                "conv2d channel mismatch: input {c_in}, kernel {c_in2}"
            )));
        }
        let pad = (k - 1) / 2;
        let ho = kernels::conv_out_dim(h, k, stride, pad);
        let wo = kernels::conv_out_dim(wd, k, stride, pad);
        let mut out = vec![0.0; c_out * ho * wo];
        kernels::conv2d(
            self.value(x),
            c_in,
            h,
            wd,
            self.value(w),
            c_out,
            k,
            stride,
            pad,
            &mut out,
        );
        Ok(self.push(
            Op::Conv2d {
                kernel: k,
                stride,
                pad,
            },
            vec![x, w],
            vec![c_out, ho, wo],
            out,
        ))
    }

    /// x[C×H×W] + b[C] broadcast over pixels.
    pub fn add_bias(&mut self, x: NodeId, b: NodeId) -> Result<NodeId> {
        let sx = self.shape(x).to_vec();
        if sx.len() != 3 || self.shape(b) != [sx[0]] {
            return Err(Error::shape("add_bias expects x[C,H,W] and b[C]"));
        }
        let hw = sx[1] * sx[2];
        let mut out = self.value(x).to_vec();
        let bv = self.value(b).to_vec();
        for (c, bc) in bv.iter().enumerate() {
            for v in &mut out[c * hw..(c + 1) * hw] {
                *v += bc;
            }
        }
        Ok(self.push(Op::AddBias, vec![x, b], sx, out))
    }

    pub fn leaky_relu(&mut self, x: NodeId, slope: f64) -> NodeId {
        let out: Vec<f64> = self
            .value(x)
            .iter()
            .map(|&v| if v > 0.0 { v } else { slope * v })
            .collect();
        let shape = self.shape(x).to_vec();
        self.push(Op::LeakyRelu { slope }, vec![x], shape, out)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self
            .value(x)
            .iter()
            .map(|&v| 1.0 / (1.0 + (-v).exp()))
            .collect();
        let shape = self.shape(x).to_vec();
        self.push(Op::Sigmoid, vec![x], shape, out)
    }

    /// Per-pixel softmax over the leading (class) axis of [K,H,W].
    /// Max-subtraction keeps the exponentials in range.
    pub fn softmax_channels(&mut self, x: NodeId) -> Result<NodeId> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 {
            return Err(Error::shape("softmax_channels expects [K,H,W]"));
        }
        let (k, hw) = (s[0], s[1] * s[2]);
        let mut out = vec![0.0; k * hw];
        kernels::softmax_channels(self.value(x), k, hw, &mut out);
        Ok(self.push(Op::SoftmaxChannels, vec![x], s, out))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise(a, b, Op::Add, |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise(a, b, Op::Sub, |x, y| x - y)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise(a, b, Op::Mul, |x, y| x * y)
    }

    fn elementwise(
        &mut self,
        a: NodeId,
        b: NodeId,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(format!(
                "elementwise shapes disagree: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let out: Vec<f64> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(op, vec![a, b], shape, out))
    }

    /// mul·x + add, elementwise.
    pub fn affine(&mut self, x: NodeId, mul: f64, add: f64) -> NodeId {
        let out: Vec<f64> = self.value(x).iter().map(|&v| mul * v + add).collect();
        let shape = self.shape(x).to_vec();
        self.push(Op::Affine { mul }, vec![x], shape, out)
    }

    pub fn abs(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self.value(x).iter().map(|v| v.abs()).collect();
        let shape = self.shape(x).to_vec();
        self.push(Op::Abs, vec![x], shape, out)
    }

    /// Sum of all elements → scalar [1].
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s: f64 = self.value(x).iter().sum();
        self.push(Op::Sum, vec![x], vec![1], vec![s])
    }

    /// Mean of all elements → scalar [1].
    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let n = self.nodes[x.0].value.len() as f64;
        let s = self.sum(x);
        self.affine(s, 1.0 / n, 0.0)
    }

    /// ln(max(x, LOG_CLAMP)) elementwise; gradient is zero below the
    /// clamp. NaN inputs stay NaN (f64::max would swallow them) so a
    /// poisoned forward pass surfaces at the loss.
    pub fn log_clamped(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self
            .value(x)
            .iter()
            .map(|&v| if v.is_nan() { v } else { v.max(LOG_CLAMP).ln() })
            .collect();
        let shape = self.shape(x).to_vec();
        self.push(Op::LogClamped, vec![x], shape, out)
    }

    /// Inner product of two same-shape tensors → scalar [1].
    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.value(a).len() != self.value(b).len() {
            return Err(Error::shape("dot operands must have equal length"));
        }
        let s = kernels::dot(self.value(a), self.value(b));
        Ok(self.push(Op::Dot, vec![a, b], vec![1], vec![s]))
    }

    /// x^exp elementwise. Used on strictly positive values (norms).
    pub fn pow_const(&mut self, x: NodeId, exp: f64) -> NodeId {
        let out: Vec<f64> = self.value(x).iter().map(|&v| v.powf(exp)).collect();
        let shape = self.shape(x).to_vec();
        self.push(Op::PowConst { exp }, vec![x], shape, out)
    }

    /// Flattens the parts in order into a 1-D node.
    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut out = Vec::new();
        for &p in parts {
            out.extend_from_slice(self.value(p));
        }
        let len = out.len();
        self.push(Op::Concat, parts.to_vec(), vec![len], out)
    }

    // ---- backward -------------------------------------------------------

    /// Populates gradients of every trainable leaf reachable from `loss`.
    ///
    /// The loss must be a scalar, and a graph can only be differentiated
    /// once.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.backward_done {
            return Err(Error::contract(
                "backward already run on this graph; record a fresh graph per step",
            ));
        }
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::contract("backward requires a scalar loss node"));
        }
        self.backward_done = true;
        self.nodes[loss.0].grad = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            if self.nodes[i].grad.is_none() || !self.nodes[i].needs_grad {
                continue;
            }
            // Split off the current node so parents can be borrowed mutably.
            let (before, rest) = self.nodes.split_at_mut(i);
            let node = &mut rest[0];
            let gout = node.grad.as_ref().unwrap();
            let parents: Vec<usize> = node.parents.iter().map(|p| p.0).collect();
            // Ensure parent grad buffers exist for parents that need them.
            for &p in &parents {
                if before[p].needs_grad && before[p].grad.is_none() {
                    before[p].grad = Some(vec![0.0; before[p].value.len()]);
                }
            }
            match node.op {
                Op::Leaf => {}
                Op::MatMul => {
                    let (pa, pb) = (parents[0], parents[1]);
                    let (m, k) = (before[pa].shape[0], before[pa].shape[1]);
                    let n = before[pb].shape[1];
                    let a_needs = before[pa].needs_grad;
                    let b_needs = before[pb].needs_grad;
                    let mut da = vec![0.0; m * k];
                    let mut db = vec![0.0; k * n];
                    kernels::matmul_backward(
                        &before[pa].value,
                        &before[pb].value,
                        gout,
                        m,
                        k,
                        n,
                        &mut da,
                        &mut db,
                    );
                    if a_needs {
                        accumulate(before[pa].grad.as_mut().unwrap(), &da);
                    }
                    if b_needs {
                        accumulate(before[pb].grad.as_mut().unwrap(), &db);
                    }
                }
                Op::Conv2d {
                    kernel,
                    stride,
                    pad,
                } => {
                    let (px, pw) = (parents[0], parents[1]);
                    let (c_in, h, w) = (
                        before[px].shape[0],
                        before[px].shape[1],
                        before[px].shape[2],
                    );
                    let c_out = before[pw].shape[0];
                    if before[px].needs_grad {
                        let mut dx = before[px].grad.take().unwrap();
                        kernels::conv2d_backward_input(
                            gout,
                            &before[pw].value,
                            c_in,
                            h,
                            w,
                            c_out,
                            kernel,
                            stride,
                            pad,
                            &mut dx,
                        );
                        before[px].grad = Some(dx);
                    }
                    if before[pw].needs_grad {
                        let mut dw = before[pw].grad.take().unwrap();
                        kernels::conv2d_backward_weight(
                            gout,
                            &before[px].value,
                            c_in,
                            h,
                            w,
                            c_out,
                            kernel,
                            stride,
                            pad,
                            &mut dw,
                        );
                        before[pw].grad = Some(dw);
                    }
                }
                Op::AddBias => {
                    let (px, pb) = (parents[0], parents[1]);
                    let hw = before[px].shape[1] * before[px].shape[2];
                    if before[px].needs_grad {
                        accumulate(before[px].grad.as_mut().unwrap(), gout);
                    }
                    if before[pb].needs_grad {
                        let db = before[pb].grad.as_mut().unwrap();
                        for (c, dbc) in db.iter_mut().enumerate() {
                            let mut s = 0.0;
                            for &g in &gout[c * hw..(c + 1) * hw] {
                                s += g;
                            }
                            *dbc += s;
                        }
                    }
                }
                Op::LeakyRelu { slope } => {
                    let p = parents[0];
                    if before[p].needs_grad {
                        let xv = &before[p].value;
                        let dx: Vec<f64> = xv
                            .iter()
                            .zip(gout)
                            .map(|(&x, &g)| if x > 0.0 { g } else { slope * g })
                            .collect();
                        accumulate(before[p].grad.as_mut().unwrap(), &dx);
                    }
                }
                Op::Sigmoid => {
                    let p = parents[0];
                    if before[p].needs_grad {
                        let dx: Vec<f64> = node
                            .value
                            .iter()
                            .zip(gout)
                            .map(|(&s, &g)| g * s * (1.0 - s))
                            .collect();
                        accumulate(before[p].grad.as_mut().unwrap(), &dx);
                    }
                }
                Op::SoftmaxChannels => {
                    let p = parents[0];
                    if before[p].needs_grad {
                        let (k, hw) = (node.shape[0], node.shape[1] * node.shape[2]);
                        let pv = node.value.clone();
                        kernels::softmax_channels_backward(
                            &pv,
                            gout,
                            k,
                            hw,
                            before[p].grad.as_mut().unwrap(),
                        );
                    }
                }
                Op::Add => {
                    for &p in &parents {
                        if before[p].needs_grad {
                            accumulate(before[p].grad.as_mut().unwrap(), gout);
                        }
                    }
                }
                Op::Sub => {
                    let (pa, pb) = (parents[0], parents[1]);
                    if before[pa].needs_grad {
                        accumulate(before[pa].grad.as_mut().unwrap(), gout);
                    }
                    if before[pb].needs_grad {
                        let neg: Vec<f64> = gout.iter().map(|g| -g).collect();
                        accumulate(before[pb].grad.as_mut().unwrap(), &neg);
                    }
                }
                Op::Mul => {
                    let (pa, pb) = (parents[0], parents[1]);
                    if before[pa].needs_grad {
                        let bv = before[pb].value.clone();
                        let da: Vec<f64> = gout.iter().zip(&bv).map(|(&g, &b)| g * b).collect();
                        accumulate(before[pa].grad.as_mut().unwrap(), &da);
                    }
                    if before[pb].needs_grad {
                        let av = before[pa].value.clone();
                        let db: Vec<f64> = gout.iter().zip(&av).map(|(&g, &a)| g * a).collect();
                        accumulate(before[pb].grad.as_mut().unwrap(), &db);
                    }
                }
                Op::Affine { mul, .. } => {
                    let p = parents[0];
                    if before[p].needs_grad {
                        let dx: Vec<f64> = gout.iter().map(|&g| mul * g).collect();
                        accumulate(before[p].grad.as_mut().unwrap(), &dx);
                    }
                }
                Op::Abs => {
                    let p = parents[0];
                    if before[p].needs_grad {
                        let xv = &before[p].value;
                        // subgradient 0 at x == 0
                        let dx: Vec<f64> = xv
                            .iter()
                            .zip(gout)
                            .map(|(&x, &g)| {
                                if x > 0.0 {
                                    g
                                } else if x < 0.0 {
                                    -g
                                } else {
                                    0.0
                                }
                            })
                            .collect();
                        accumulate(before[p].grad.as_mut().unwrap(), &dx);
                    }
                }
                Op::Sum => {
                    let p = parents[0];
                    if before[p].needs_grad {
                        let g = gout[0];
                        for d in before[p].grad.as_mut().unwrap() {
                            *d += g;
                        }
                    }
                }
                Op::LogClamped => {
                    let p = parents[0];
                    if before[p].needs_grad {
                        let xv = &before[p].value;
                        let dx: Vec<f64> = xv
                            .iter()
                            .zip(gout)
                            .map(|(&x, &g)| if x >= LOG_CLAMP { g / x } else { 0.0 })
                            .collect();
                        accumulate(before[p].grad.as_mut().unwrap(), &dx);
                    }
                }
                Op::Dot => {
                    let (pa, pb) = (parents[0], parents[1]);
                    let g = gout[0];
                    if before[pa].needs_grad {
                        let bv = before[pb].value.clone();
                        let da: Vec<f64> = bv.iter().map(|&b| g * b).collect();
                        accumulate(before[pa].grad.as_mut().unwrap(), &da);
                    }
                    if before[pb].needs_grad {
                        let av = before[pa].value.clone();
                        let db: Vec<f64> = av.iter().map(|&a| g * a).collect();
                        accumulate(before[pb].grad.as_mut().unwrap(), &db);
                    }
                }
                Op::PowConst { exp } => {
                    let p = parents[0];
                    if before[p].needs_grad {
                        let xv = &before[p].value;
                        let dx: Vec<f64> = xv
                            .iter()
                            .zip(gout)
                            .map(|(&x, &g)| g * exp * x.powf(exp - 1.0))
                            .collect();
                        accumulate(before[p].grad.as_mut().unwrap(), &dx);
                    }
                }
                Op::Concat => {
                    let mut offset = 0;
                    for &p in &parents {
                        let len = before[p].value.len();
                        if before[p].needs_grad {
                            accumulate(
                                before[p].grad.as_mut().unwrap(),
                                &gout[offset..offset + len],
                            );
                        }
                        offset += len;
                    }
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn accumulate(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
