//! Reverse-mode tape over the fixed layer-op set.
//!
//! A [`Tape`] records one forward pass; [`Tape::backward`] walks the records
//! in reverse creation order and accumulates gradients into the leaves. The
//! tape is rebuilt on every forward pass; nothing is cached across passes.

use crate::kernels::{self, Padding};
use crate::rng::RngStream;
use crate::tensor::Tensor;
use crate::TensorError;

/// SELU scale constant.
pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
/// SELU negative-branch constant.
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;

/// Forward-pass behavior switch: training enables dropout and batch
/// statistics, inference is deterministic.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Handle to a node on a [`Tape`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    Conv2d { x: usize, k: usize, stride: (usize, usize), pad: Padding },
    Depthwise { x: usize, k: usize, stride: (usize, usize), pad: Padding },
    AvgPool { x: usize, pool: (usize, usize), stride: (usize, usize) },
    BatchNorm { x: usize, gamma: usize, beta: usize, mean: Tensor, var: Tensor, eps: f64, batch_stats: bool },
    Selu { x: usize },
    Prelu { x: usize, alpha: usize },
    Dropout { x: usize, mask: Tensor },
    Linear { x: usize, w: usize, b: Option<usize> },
    AddBias { x: usize, b: usize },
    Add { a: usize, b: usize },
    Scale { x: usize, c: f64 },
    AddScaledConst { x: usize, s: usize, base: Tensor },
    Matmul { a: usize, b: usize },
    TransposeLast2 { x: usize },
    Softmax { x: usize, axis: usize },
    ConcatLast { parts: Vec<usize> },
    Reshape { x: usize },
    PairwiseAdd { src: usize, dst: usize },
    EdgeWeightedSum { alpha: usize, v: usize },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Leaf gradients collected by [`Tape::backward`].
pub struct Grads {
    store: Vec<Option<Tensor>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.store.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.store.get_mut(v.0).and_then(|g| g.take())
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn conv2d(
        &mut self,
        x: Var,
        k: Var,
        stride: (usize, usize),
        pad: Padding,
    ) -> Result<Var, TensorError> {
        let y = kernels::conv2d_forward(self.value(x), self.value(k), stride, pad)?;
        let rg = self.requires(x) || self.requires(k);
        Ok(self.push(y, Op::Conv2d { x: x.0, k: k.0, stride, pad }, rg))
    }

    pub fn depthwise_conv2d(
        &mut self,
        x: Var,
        k: Var,
        stride: (usize, usize),
        pad: Padding,
    ) -> Result<Var, TensorError> {
        let y = kernels::depthwise_forward(self.value(x), self.value(k), stride, pad)?;
        let rg = self.requires(x) || self.requires(k);
        Ok(self.push(y, Op::Depthwise { x: x.0, k: k.0, stride, pad }, rg))
    }

    /// Depthwise stage followed by a 1x1 pointwise mix.
    pub fn separable_conv2d(
        &mut self,
        x: Var,
        depthwise_kernel: Var,
        pointwise_kernel: Var,
        stride: (usize, usize),
        pad: Padding,
    ) -> Result<Var, TensorError> {
        let mid = self.depthwise_conv2d(x, depthwise_kernel, stride, pad)?;
        self.conv2d(mid, pointwise_kernel, (1, 1), Padding::Valid)
    }

    pub fn avg_pool(
        &mut self,
        x: Var,
        pool: (usize, usize),
        stride: (usize, usize),
    ) -> Result<Var, TensorError> {
        let y = kernels::avg_pool_forward(self.value(x), pool, stride)?;
        let rg = self.requires(x);
        Ok(self.push(y, Op::AvgPool { x: x.0, pool, stride }, rg))
    }

    /// Batch normalization against batch statistics; returns the node plus
    /// the statistics so the caller can fold them into running estimates.
    pub fn batch_norm_train(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        eps: f64,
    ) -> (Var, Tensor, Tensor) {
        let (mean, var) = kernels::batch_stats(self.value(x));
        let y = kernels::batch_norm_forward(
            self.value(x),
            self.value(gamma),
            self.value(beta),
            &mean,
            &var,
            eps,
        );
        let rg = self.requires(x) || self.requires(gamma) || self.requires(beta);
        let node = self.push(
            y,
            Op::BatchNorm {
                x: x.0,
                gamma: gamma.0,
                beta: beta.0,
                mean: mean.clone(),
                var: var.clone(),
                eps,
                batch_stats: true,
            },
            rg,
        );
        (node, mean, var)
    }

    /// Batch normalization against fixed (running) statistics.
    pub fn batch_norm_infer(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mean: &Tensor,
        var: &Tensor,
        eps: f64,
    ) -> Var {
        let y = kernels::batch_norm_forward(
            self.value(x),
            self.value(gamma),
            self.value(beta),
            mean,
            var,
            eps,
        );
        let rg = self.requires(x) || self.requires(gamma) || self.requires(beta);
        self.push(
            y,
            Op::BatchNorm {
                x: x.0,
                gamma: gamma.0,
                beta: beta.0,
                mean: mean.clone(),
                var: var.clone(),
                eps,
                batch_stats: false,
            },
            rg,
        )
    }

    pub fn selu(&mut self, x: Var) -> Var {
        let y = self.value(x).map(|v| {
            if v > 0.0 {
                SELU_LAMBDA * v
            } else {
                SELU_LAMBDA * SELU_ALPHA * (v.exp() - 1.0)
            }
        });
        let rg = self.requires(x);
        self.push(y, Op::Selu { x: x.0 }, rg)
    }

    /// PReLU with one learnable scalar alpha.
    pub fn prelu(&mut self, x: Var, alpha: Var) -> Result<Var, TensorError> {
        if self.value(alpha).numel() != 1 {
            return Err(TensorError::InvalidArgument {
                op: "prelu",
                detail: format!("alpha must be a scalar, got {:?}", self.value(alpha).shape()),
            });
        }
        let a = self.value(alpha).data()[0];
        let y = self.value(x).map(|v| if v > 0.0 { v } else { a * v });
        let rg = self.requires(x) || self.requires(alpha);
        Ok(self.push(y, Op::Prelu { x: x.0, alpha: alpha.0 }, rg))
    }

    /// Inverted dropout: identity at inference or rate 0; during training,
    /// zero with probability `rate` and scale survivors by 1/(1-rate).
    pub fn dropout(
        &mut self,
        x: Var,
        rate: f64,
        mode: Mode,
        rng: &mut RngStream,
    ) -> Result<Var, TensorError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::InvalidArgument {
                op: "dropout",
                detail: format!("rate {rate} outside [0, 1)"),
            });
        }
        if mode == Mode::Infer || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let mask = Tensor::new(
            self.value(x).shape(),
            (0..self.value(x).numel())
                .map(|_| if rng.bernoulli(rate) { 0.0 } else { keep })
                .collect(),
        );
        let y = self.value(x).zip_map(&mask, |v, m| v * m);
        let rg = self.requires(x);
        Ok(self.push(y, Op::Dropout { x: x.0, mask }, rg))
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, TensorError> {
        let y = kernels::linear_forward(
            self.value(x),
            self.value(w),
            b.map(|b| self.value(b)),
        )?;
        let rg = self.requires(x)
            || self.requires(w)
            || b.map(|b| self.requires(b)).unwrap_or(false);
        Ok(self.push(y, Op::Linear { x: x.0, w: w.0, b: b.map(|b| b.0) }, rg))
    }

    /// Broadcast a feature-length bias over the trailing axis.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var, TensorError> {
        let f = *self.value(x).shape().last().unwrap();
        if self.value(b).shape() != [f] {
            return Err(TensorError::ShapeMismatch {
                op: "add_bias",
                detail: format!("bias {:?} vs features {f}", self.value(b).shape()),
            });
        }
        let bd = self.value(b).clone();
        let mut y = self.value(x).clone();
        let rows = y.numel() / f;
        for r in 0..rows {
            for ff in 0..f {
                y.data_mut()[r * f + ff] += bd.data()[ff];
            }
        }
        let rg = self.requires(x) || self.requires(b);
        Ok(self.push(y, Op::AddBias { x: x.0, b: b.0 }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(TensorError::ShapeMismatch {
                op: "add",
                detail: format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            });
        }
        let y = self.value(a).zip_map(self.value(b), |u, v| u + v);
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(y, Op::Add { a: a.0, b: b.0 }, rg))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let y = self.value(x).map(|v| c * v);
        let rg = self.requires(x);
        self.push(y, Op::Scale { x: x.0, c }, rg)
    }

    /// y = x + s * base, where `s` is a learnable scalar and `base` a
    /// constant broadcast over the leading axes of x.
    pub fn add_scaled_const(
        &mut self,
        x: Var,
        s: Var,
        base: Tensor,
    ) -> Result<Var, TensorError> {
        if self.value(s).numel() != 1 {
            return Err(TensorError::InvalidArgument {
                op: "add_scaled_const",
                detail: "scale must be a scalar".into(),
            });
        }
        let xs = self.value(x).shape();
        if base.numel() == 0 || xs.len() < base.rank() || xs[xs.len() - base.rank()..] != *base.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "add_scaled_const",
                detail: format!("base {:?} not a suffix of {:?}", base.shape(), xs),
            });
        }
        let sv = self.value(s).data()[0];
        let n = base.numel();
        let mut y = self.value(x).clone();
        let rows = y.numel() / n;
        for r in 0..rows {
            for e in 0..n {
                y.data_mut()[r * n + e] += sv * base.data()[e];
            }
        }
        let rg = self.requires(x) || self.requires(s);
        Ok(self.push(y, Op::AddScaledConst { x: x.0, s: s.0, base }, rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let y = kernels::matmul_forward(self.value(a), self.value(b))?;
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(y, Op::Matmul { a: a.0, b: b.0 }, rg))
    }

    pub fn transpose_last2(&mut self, x: Var) -> Result<Var, TensorError> {
        let y = kernels::transpose_last2(self.value(x))?;
        let rg = self.requires(x);
        Ok(self.push(y, Op::TransposeLast2 { x: x.0 }, rg))
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var, TensorError> {
        let y = kernels::softmax_forward(self.value(x), axis, None)?;
        let rg = self.requires(x);
        Ok(self.push(y, Op::Softmax { x: x.0, axis }, rg))
    }

    /// Softmax restricted to positions where `mask` > 0.5 (broadcastable).
    pub fn masked_softmax(
        &mut self,
        x: Var,
        axis: usize,
        mask: &Tensor,
    ) -> Result<Var, TensorError> {
        let y = kernels::softmax_forward(self.value(x), axis, Some(mask))?;
        let rg = self.requires(x);
        Ok(self.push(y, Op::Softmax { x: x.0, axis }, rg))
    }

    pub fn concat_last(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "concat_last",
                detail: "no parts".into(),
            });
        }
        let lead = self.value(parts[0]).shape()[..self.value(parts[0]).rank() - 1].to_vec();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.value(p).shape();
            if s[..s.len() - 1] != lead[..] {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_last",
                    detail: format!("leading dims differ: {:?} vs {:?}", &s[..s.len() - 1], lead),
                });
            }
            widths.push(*s.last().unwrap());
        }
        let total: usize = widths.iter().sum();
        let rows: usize = lead.iter().product();
        let mut shape = lead;
        shape.push(total);
        let mut y = Tensor::zeros(&shape);
        let mut off = 0;
        for (&p, &wid) in parts.iter().zip(&widths) {
            let pd = self.value(p).data().to_vec();
            for r in 0..rows {
                y.data_mut()[r * total + off..r * total + off + wid]
                    .copy_from_slice(&pd[r * wid..(r + 1) * wid]);
            }
            off += wid;
        }
        let rg = parts.iter().any(|&p| self.requires(p));
        Ok(self.push(y, Op::ConcatLast { parts: parts.iter().map(|p| p.0).collect() }, rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let y = self.value(x).reshape(shape)?;
        let rg = self.requires(x);
        Ok(self.push(y, Op::Reshape { x: x.0 }, rg))
    }

    pub fn pairwise_add(&mut self, src: Var, dst: Var) -> Result<Var, TensorError> {
        let y = kernels::pairwise_add_forward(self.value(src), self.value(dst))?;
        let rg = self.requires(src) || self.requires(dst);
        Ok(self.push(y, Op::PairwiseAdd { src: src.0, dst: dst.0 }, rg))
    }

    pub fn edge_weighted_sum(&mut self, alpha: Var, v: Var) -> Result<Var, TensorError> {
        let y = kernels::edge_weighted_sum_forward(self.value(alpha), self.value(v))?;
        let rg = self.requires(alpha) || self.requires(v);
        Ok(self.push(y, Op::EdgeWeightedSum { alpha: alpha.0, v: v.0 }, rg))
    }

    /// Reverse sweep from `root`, seeding d(loss)/d(root) = `seed`.
    /// Returns gradients for every grad-requiring leaf.
    pub fn backward(&self, root: Var, seed: Tensor) -> Result<Grads, TensorError> {
        if seed.shape() != self.value(root).shape() {
            return Err(TensorError::ShapeMismatch {
                op: "backward",
                detail: format!(
                    "seed {:?} vs root value {:?}",
                    seed.shape(),
                    self.value(root).shape()
                ),
            });
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(seed);

        for i in (0..=root.0).rev() {
            if !self.nodes[i].requires_grad {
                grads[i] = None;
                continue;
            }
            if matches!(self.nodes[i].op, Op::Leaf) {
                continue; // keep the accumulated gradient
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop(i, &g, &mut grads);
        }
        Ok(Grads { store: grads })
    }

    fn accum(&self, grads: &mut [Option<Tensor>], idx: usize, delta: Tensor) {
        if !self.nodes[idx].requires_grad {
            return;
        }
        match &mut grads[idx] {
            Some(g) => g.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        }
    }

    fn backprop(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Conv2d { x, k, stride, pad } => {
                let (gx, gk) = kernels::conv2d_backward(
                    &self.nodes[*x].value,
                    &self.nodes[*k].value,
                    g,
                    *stride,
                    *pad,
                    self.nodes[*x].requires_grad,
                    self.nodes[*k].requires_grad,
                );
                if let Some(gx) = gx {
                    self.accum(grads, *x, gx);
                }
                if let Some(gk) = gk {
                    self.accum(grads, *k, gk);
                }
            }
            Op::Depthwise { x, k, stride, pad } => {
                let (gx, gk) = kernels::depthwise_backward(
                    &self.nodes[*x].value,
                    &self.nodes[*k].value,
                    g,
                    *stride,
                    *pad,
                    self.nodes[*x].requires_grad,
                    self.nodes[*k].requires_grad,
                );
                if let Some(gx) = gx {
                    self.accum(grads, *x, gx);
                }
                if let Some(gk) = gk {
                    self.accum(grads, *k, gk);
                }
            }
            Op::AvgPool { x, pool, stride } => {
                let gx = kernels::avg_pool_backward(
                    self.nodes[*x].value.shape(),
                    g,
                    *pool,
                    *stride,
                );
                self.accum(grads, *x, gx);
            }
            Op::BatchNorm { x, gamma, beta, mean, var, eps, batch_stats } => {
                let (gx, ggamma, gbeta) = kernels::batch_norm_backward(
                    &self.nodes[*x].value,
                    &self.nodes[*gamma].value,
                    mean,
                    var,
                    *eps,
                    g,
                    *batch_stats,
                    self.nodes[*x].requires_grad,
                );
                if let Some(gx) = gx {
                    self.accum(grads, *x, gx);
                }
                self.accum(grads, *gamma, ggamma);
                self.accum(grads, *beta, gbeta);
            }
            Op::Selu { x } => {
                let gx = self.nodes[*x].value.zip_map(g, |v, gv| {
                    if v > 0.0 {
                        SELU_LAMBDA * gv
                    } else {
                        SELU_LAMBDA * SELU_ALPHA * v.exp() * gv
                    }
                });
                self.accum(grads, *x, gx);
            }
            Op::Prelu { x, alpha } => {
                let a = self.nodes[*alpha].value.data()[0];
                let xv = &self.nodes[*x].value;
                let gx = xv.zip_map(g, |v, gv| if v > 0.0 { gv } else { a * gv });
                self.accum(grads, *x, gx);
                let ga: f64 = xv
                    .data()
                    .iter()
                    .zip(g.data())
                    .filter(|(v, _)| **v <= 0.0)
                    .map(|(v, gv)| v * gv)
                    .sum();
                self.accum(grads, *alpha, Tensor::scalar(ga));
            }
            Op::Dropout { x, mask } => {
                let gx = g.zip_map(mask, |gv, m| gv * m);
                self.accum(grads, *x, gx);
            }
            Op::Linear { x, w, b } => {
                let (gx, gw, gb) = kernels::linear_backward(
                    &self.nodes[*x].value,
                    &self.nodes[*w].value,
                    g,
                    self.nodes[*x].requires_grad,
                    self.nodes[*w].requires_grad,
                    b.map(|b| self.nodes[b].requires_grad).unwrap_or(false),
                );
                if let Some(gx) = gx {
                    self.accum(grads, *x, gx);
                }
                if let Some(gw) = gw {
                    self.accum(grads, *w, gw);
                }
                if let (Some(b), Some(gb)) = (b, gb) {
                    self.accum(grads, *b, gb);
                }
            }
            Op::AddBias { x, b } => {
                self.accum(grads, *x, g.clone());
                let f = *g.shape().last().unwrap();
                let rows = g.numel() / f;
                let mut gb = vec![0.0; f];
                for r in 0..rows {
                    for (ff, acc) in gb.iter_mut().enumerate() {
                        *acc += g.data()[r * f + ff];
                    }
                }
                self.accum(grads, *b, Tensor::new(&[f], gb));
            }
            Op::Add { a, b } => {
                self.accum(grads, *a, g.clone());
                self.accum(grads, *b, g.clone());
            }
            Op::Scale { x, c } => {
                self.accum(grads, *x, g.map(|v| v * c));
            }
            Op::AddScaledConst { x, s, base } => {
                self.accum(grads, *x, g.clone());
                let n = base.numel();
                let rows = g.numel() / n;
                let mut gs = 0.0;
                for r in 0..rows {
                    for e in 0..n {
                        gs += g.data()[r * n + e] * base.data()[e];
                    }
                }
                self.accum(grads, *s, Tensor::scalar(gs));
            }
            Op::Matmul { a, b } => {
                let (ga, gb) =
                    kernels::matmul_backward(&self.nodes[*a].value, &self.nodes[*b].value, g);
                self.accum(grads, *a, ga);
                self.accum(grads, *b, gb);
            }
            Op::TransposeLast2 { x } => {
                let gx = kernels::transpose_last2(g).expect("shape validated in forward");
                self.accum(grads, *x, gx);
            }
            Op::Softmax { x, axis } => {
                let gx = kernels::softmax_backward(&self.nodes[i].value, g, *axis);
                self.accum(grads, *x, gx);
            }
            Op::ConcatLast { parts } => {
                let total = *g.shape().last().unwrap();
                let rows = g.numel() / total;
                let mut off = 0;
                for &p in parts {
                    let wid = *self.nodes[p].value.shape().last().unwrap();
                    let mut gp = Tensor::zeros(self.nodes[p].value.shape());
                    for r in 0..rows {
                        gp.data_mut()[r * wid..(r + 1) * wid]
                            .copy_from_slice(&g.data()[r * total + off..r * total + off + wid]);
                    }
                    self.accum(grads, p, gp);
                    off += wid;
                }
            }
            Op::Reshape { x } => {
                let gx = g
                    .reshape(self.nodes[*x].value.shape())
                    .expect("element count preserved");
                self.accum(grads, *x, gx);
            }
            Op::PairwiseAdd { src, dst } => {
                let (gs, gd) = kernels::pairwise_add_backward(g);
                self.accum(grads, *src, gs);
                self.accum(grads, *dst, gd);
            }
            Op::EdgeWeightedSum { alpha, v } => {
                let (ga, gv) = kernels::edge_weighted_sum_backward(
                    &self.nodes[*alpha].value,
                    &self.nodes[*v].value,
                    g,
                );
                self.accum(grads, *alpha, ga);
                self.accum(grads, *v, gv);
            }
        }
    }
}
