//! Define-by-run reverse-mode differentiation over matrix-valued nodes.
//!
//! Every op appends a node holding its forward value. [`Tape::backward`]
//! consumes the tape, walks it once in reverse and returns the gradients of
//! the leaves. Operand shapes are checked eagerly and a mismatch panics, the
//! same way indexing out of bounds does; model code validates user-facing
//! shapes before building a graph.

use crate::autograd::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Geometry of a batched 1-D convolution.
///
/// Each input row holds `channels` consecutive signals of `length` samples.
/// The kernel has one row per filter, laid out as `channels x width`. The
/// output row holds one signal of [`Conv1dGeometry::out_len`] samples per
/// filter. Zero padding of `padding` samples is applied on both ends; with
/// `padding == 0` this is a valid cross-correlation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv1dGeometry {
    pub channels: usize,
    pub length: usize,
    pub width: usize,
    pub padding: usize,
}

impl Conv1dGeometry {
    pub fn out_len(&self) -> usize {
        self.length + 2 * self.padding + 1 - self.width
    }

    fn check(&self) -> Result<()> {
        if self.width == 0 || self.channels == 0 {
            return Err(Error::InvalidArgument(
                "convolution needs a nonzero width and channel count".into(),
            ));
        }
        if self.width > self.length + 2 * self.padding {
            return Err(Error::Shape(format!(
                "kernel width {} exceeds padded input length {}",
                self.width,
                self.length + 2 * self.padding
            )));
        }
        Ok(())
    }
}

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Slice {
        src: Var,
        start: usize,
    },
    Concat(Vec<Var>),
    Conv1d {
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        geom: Conv1dGeometry,
    },
    Sum(Var),
    SumSquares(Var),
    Mse {
        pred: Var,
        target: Tensor,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Vec<f64>,
    },
    Softmax(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A leaf whose gradient is reported by [`Tape::backward`].
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that is treated as a constant.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn grad_flag(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        let t = &self.nodes[v.0].value;
        (t.rows(), t.cols())
    }

    fn elementwise(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (ra, ca) = self.dims(a);
        assert_eq!((ra, ca), self.dims(b), "elementwise operands differ in shape");
        let data = self.value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.value(a).shape().to_vec();
        let needs = self.grad_flag(&[a, b]);
        self.push(Tensor::new(shape, data).expect("shape"), op, needs)
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.value(a).map(f);
        let needs = self.grad_flag(&[a]);
        self.push(value, op, needs)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.elementwise(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.elementwise(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.elementwise(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        self.unary(a, |x| x * k, Op::Scale(a, k))
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.dims(a);
        let (kb, n) = self.dims(b);
        assert_eq!(k, kb, "matmul inner dimensions differ");
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.value(a).data(),
            (k, 1),
            self.value(b).data(),
            (n, 1),
            0.0,
            &mut out,
            n,
        );
        let needs = self.grad_flag(&[a, b]);
        self.push(
            Tensor::matrix(m, n, out).expect("shape"),
            Op::MatMul(a, b),
            needs,
        )
    }

    /// Adds a length-`n` bias to every row of an `[m, n]` operand.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Var {
        let (m, n) = self.dims(a);
        assert_eq!(self.value(bias).len(), n, "bias length differs from column count");
        let b = self.value(bias).data();
        let mut out = self.value(a).data().to_vec();
        for row in out.chunks_exact_mut(n) {
            for (x, &bv) in row.iter_mut().zip(b) {
                *x += bv;
            }
        }
        let needs = self.grad_flag(&[a, bias]);
        self.push(
            Tensor::matrix(m, n, out).expect("shape"),
            Op::AddBias(a, bias),
            needs,
        )
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    /// Columns `start..start + len` of every row.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let (m, n) = self.dims(a);
        assert!(start + len <= n, "column slice out of range");
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(m * len);
        for row in src.chunks_exact(n) {
            out.extend_from_slice(&row[start..start + len]);
        }
        let needs = self.grad_flag(&[a]);
        self.push(
            Tensor::matrix(m, len, out).expect("shape"),
            Op::Slice { src: a, start },
            needs,
        )
    }

    /// Joins operands with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat needs at least one operand");
        let m = self.dims(parts[0]).0;
        let widths: Vec<usize> = parts
            .iter()
            .map(|&p| {
                let (r, c) = self.dims(p);
                assert_eq!(r, m, "concat operands differ in row count");
                c
            })
            .collect();
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * total);
        for r in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let needs = self.grad_flag(parts);
        self.push(
            Tensor::matrix(m, total, out).expect("shape"),
            Op::Concat(parts.to_vec()),
            needs,
        )
    }

    /// Batched 1-D cross-correlation, see [`Conv1dGeometry`].
    pub fn conv1d(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        geom: Conv1dGeometry,
    ) -> Result<Var> {
        geom.check()?;
        let (batch, in_cols) = self.dims(input);
        if in_cols != geom.channels * geom.length {
            return Err(Error::Shape(format!(
                "conv input has {in_cols} columns, geometry needs {}",
                geom.channels * geom.length
            )));
        }
        let (filters, kcols) = self.dims(kernel);
        if kcols != geom.channels * geom.width {
            return Err(Error::Shape(format!(
                "kernel has {kcols} columns, geometry needs {}",
                geom.channels * geom.width
            )));
        }
        if let Some(b) = bias {
            if self.value(b).len() != filters {
                return Err(Error::Shape("conv bias length differs from filter count".into()));
            }
        }
        let out_len = geom.out_len();
        let x = self.value(input).data();
        let w = self.value(kernel).data();
        let mut out = vec![0.0; batch * filters * out_len];
        for (xr, or) in x
            .chunks_exact(in_cols)
            .zip(out.chunks_exact_mut(filters * out_len))
        {
            for f in 0..filters {
                let orow = &mut or[f * out_len..(f + 1) * out_len];
                if let Some(b) = bias {
                    orow.fill(self.nodes[b.0].value.data()[f]);
                }
                for c in 0..geom.channels {
                    let sig = &xr[c * geom.length..(c + 1) * geom.length];
                    for j in 0..geom.width {
                        let kv = w[f * kcols + c * geom.width + j];
                        let (lo, hi) = tap_range(geom, j, out_len);
                        let off = j as isize - geom.padding as isize;
                        for i in lo..hi {
                            orow[i] += kv * sig[(i as isize + off) as usize];
                        }
                    }
                }
            }
        }
        let mut vars = vec![input, kernel];
        vars.extend(bias);
        let needs = self.grad_flag(&vars);
        Ok(self.push(
            Tensor::matrix(batch, filters * out_len, out).expect("shape"),
            Op::Conv1d {
                input,
                kernel,
                bias,
                geom,
            },
            needs,
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let needs = self.grad_flag(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), needs)
    }

    pub fn sum_squares(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().map(|x| x * x).sum();
        let needs = self.grad_flag(&[a]);
        self.push(Tensor::scalar(s), Op::SumSquares(a), needs)
    }

    /// Mean squared error over every element.
    pub fn mse(&mut self, pred: Var, target: Tensor) -> Var {
        let p = self.value(pred);
        assert_eq!(
            (p.rows(), p.cols()),
            (target.rows(), target.cols()),
            "mse target shape differs from prediction"
        );
        let n = p.len() as f64;
        let loss = p
            .data()
            .iter()
            .zip(target.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n;
        let needs = self.grad_flag(&[pred]);
        self.push(Tensor::scalar(loss), Op::Mse { pred, target }, needs)
    }

    /// Mean over rows of the categorical cross-entropy of `softmax(row)`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let (m, k) = self.dims(logits);
        assert_eq!(m, targets.len(), "one target per logits row");
        let z = self.value(logits).data();
        let mut probs = vec![0.0; m * k];
        let mut loss = 0.0;
        for ((zr, pr), &t) in z.chunks_exact(k).zip(probs.chunks_exact_mut(k)).zip(targets) {
            assert!(t < k, "target class out of range");
            let lse = log_sum_exp(zr);
            for (p, &zv) in pr.iter_mut().zip(zr) {
                *p = (zv - lse).exp();
            }
            loss += lse - zr[t];
        }
        let needs = self.grad_flag(&[logits]);
        self.push(
            Tensor::scalar(loss / m as f64),
            Op::SoftmaxCrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            needs,
        )
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let (m, k) = self.dims(a);
        let mut out = Vec::with_capacity(m * k);
        for row in self.value(a).data().chunks_exact(k) {
            out.extend(softmax(row));
        }
        let needs = self.grad_flag(&[a]);
        self.push(
            Tensor::new(self.value(a).shape().to_vec(), out).expect("shape"),
            Op::Softmax(a),
            needs,
        )
    }

    /// Propagates `d loss / d node` back to every leaf created with
    /// [`Tape::param`].
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        let root = &self.nodes[loss.0].value;
        if root.len() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.shape()
            )));
        }
        if !root.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        let nodes = self.nodes;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let node = &nodes[i];
            if matches!(node.op, Op::Leaf) || !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let mut ctx = Backprop {
                nodes: &nodes,
                grads: &mut grads,
            };
            ctx.apply(node, &g);
        }

        let leaves = nodes
            .iter()
            .zip(grads)
            .map(|(node, g)| match (&node.op, node.needs_grad) {
                (Op::Leaf, true) => Some(match g {
                    Some(g) => Tensor::new(node.value.shape().to_vec(), g).expect("shape"),
                    None => Tensor::zeros(node.value.shape()),
                }),
                _ => None,
            })
            .collect();
        Ok(Gradients { leaves })
    }
}

/// Leaf gradients produced by [`Tape::backward`].
pub struct Gradients {
    leaves: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of a [`Tape::param`] leaf; `None` for anything else.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.leaves.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.leaves.get_mut(v.0).and_then(Option::take)
    }
}

struct Backprop<'a> {
    nodes: &'a [Node],
    grads: &'a mut [Option<Vec<f64>>],
}

impl Backprop<'_> {
    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn slot(&mut self, v: Var) -> &mut [f64] {
        let len = self.nodes[v.0].value.len();
        self.grads[v.0].get_or_insert_with(|| vec![0.0; len])
    }

    fn accumulate(&mut self, v: Var, g: &[f64], f: impl Fn(f64) -> f64) {
        if !self.wants(v) {
            return;
        }
        for (d, &gv) in self.slot(v).iter_mut().zip(g) {
            *d += f(gv);
        }
    }

    fn apply(&mut self, node: &Node, g: &[f64]) {
        let out = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(*a, g, |x| x);
                self.accumulate(*b, g, |x| x);
            }
            Op::Sub(a, b) => {
                self.accumulate(*a, g, |x| x);
                self.accumulate(*b, g, |x| -x);
            }
            Op::Mul(a, b) => {
                let (a, b) = (*a, *b);
                let nodes = self.nodes;
                if self.wants(a) {
                    let bv = nodes[b.0].value.data();
                    for ((d, &gv), &y) in self.slot(a).iter_mut().zip(g).zip(bv) {
                        *d += gv * y;
                    }
                }
                if self.wants(b) {
                    let av = nodes[a.0].value.data();
                    for ((d, &gv), &x) in self.slot(b).iter_mut().zip(g).zip(av) {
                        *d += gv * x;
                    }
                }
            }
            Op::Scale(a, k) => {
                let k = *k;
                self.accumulate(*a, g, |x| x * k);
            }
            Op::MatMul(a, b) => {
                let (a, b) = (*a, *b);
                let (m, k) = (self.value(a).rows(), self.value(a).cols());
                let n = self.value(b).cols();
                let nodes = self.nodes;
                if self.wants(a) {
                    // dA = dC . B^T
                    let bv = nodes[b.0].value.data();
                    gemm(m, n, k, g, (n, 1), bv, (1, n), 1.0, self.slot(a), k);
                }
                if self.wants(b) {
                    // dB = A^T . dC
                    let av = nodes[a.0].value.data();
                    gemm(k, m, n, av, (1, k), g, (n, 1), 1.0, self.slot(b), n);
                }
            }
            Op::AddBias(a, bias) => {
                self.accumulate(*a, g, |x| x);
                if self.wants(*bias) {
                    let n = node.value.cols();
                    let db = self.slot(*bias);
                    for row in g.chunks_exact(n) {
                        for (d, &gv) in db.iter_mut().zip(row) {
                            *d += gv;
                        }
                    }
                }
            }
            Op::Sigmoid(a) => {
                if self.wants(*a) {
                    for ((d, &gv), &y) in self.slot(*a).iter_mut().zip(g).zip(out) {
                        *d += gv * y * (1.0 - y);
                    }
                }
            }
            Op::Tanh(a) => {
                if self.wants(*a) {
                    for ((d, &gv), &y) in self.slot(*a).iter_mut().zip(g).zip(out) {
                        *d += gv * (1.0 - y * y);
                    }
                }
            }
            Op::Relu(a) => {
                if self.wants(*a) {
                    for ((d, &gv), &y) in self.slot(*a).iter_mut().zip(g).zip(out) {
                        if y > 0.0 {
                            *d += gv;
                        }
                    }
                }
            }
            Op::Slice { src, start } => {
                if self.wants(*src) {
                    let len = node.value.cols();
                    let n = self.value(*src).cols();
                    let start = *start;
                    let ds = self.slot(*src);
                    for (drow, grow) in ds.chunks_exact_mut(n).zip(g.chunks_exact(len)) {
                        for (d, &gv) in drow[start..start + len].iter_mut().zip(grow) {
                            *d += gv;
                        }
                    }
                }
            }
            Op::Concat(parts) => {
                let total = node.value.cols();
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    if self.wants(p) {
                        let dp = self.slot(p);
                        for (drow, grow) in dp.chunks_exact_mut(w).zip(g.chunks_exact(total)) {
                            for (d, &gv) in drow.iter_mut().zip(&grow[offset..offset + w]) {
                                *d += gv;
                            }
                        }
                    }
                    offset += w;
                }
            }
            Op::Conv1d {
                input,
                kernel,
                bias,
                geom,
            } => self.conv1d_backward(*input, *kernel, *bias, *geom, g),
            Op::Sum(a) => {
                let s = g[0];
                self.accumulate_fill(*a, s);
            }
            Op::SumSquares(a) => {
                if self.wants(*a) {
                    let s = g[0];
                    let nodes = self.nodes;
                    let av = nodes[a.0].value.data();
                    for (d, &x) in self.slot(*a).iter_mut().zip(av) {
                        *d += 2.0 * x * s;
                    }
                }
            }
            Op::Mse { pred, target } => {
                if self.wants(*pred) {
                    let s = g[0] * 2.0 / target.len() as f64;
                    let nodes = self.nodes;
                    let pv = nodes[pred.0].value.data();
                    for ((d, &p), &t) in self.slot(*pred).iter_mut().zip(pv).zip(target.data()) {
                        *d += s * (p - t);
                    }
                }
            }
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                probs,
            } => {
                if self.wants(*logits) {
                    let k = self.value(*logits).cols();
                    let s = g[0] / targets.len() as f64;
                    let dz = self.slot(*logits);
                    for ((drow, prow), &t) in dz
                        .chunks_exact_mut(k)
                        .zip(probs.chunks_exact(k))
                        .zip(targets)
                    {
                        for (j, (d, &p)) in drow.iter_mut().zip(prow).enumerate() {
                            let onehot = if j == t { 1.0 } else { 0.0 };
                            *d += s * (p - onehot);
                        }
                    }
                }
            }
            Op::Softmax(a) => {
                if self.wants(*a) {
                    let k = node.value.cols();
                    let da = self.slot(*a);
                    for ((drow, yrow), grow) in da
                        .chunks_exact_mut(k)
                        .zip(out.chunks_exact(k))
                        .zip(g.chunks_exact(k))
                    {
                        let dot: f64 = yrow.iter().zip(grow).map(|(y, gv)| y * gv).sum();
                        for ((d, &y), &gv) in drow.iter_mut().zip(yrow).zip(grow) {
                            *d += y * (gv - dot);
                        }
                    }
                }
            }
        }
    }

    fn accumulate_fill(&mut self, v: Var, s: f64) {
        if self.wants(v) {
            for d in self.slot(v) {
                *d += s;
            }
        }
    }

    fn conv1d_backward(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        geom: Conv1dGeometry,
        g: &[f64],
    ) {
        let nodes = self.nodes;
        let x = nodes[input.0].value.data();
        let w = nodes[kernel.0].value.data();
        let filters = nodes[kernel.0].value.rows();
        let kcols = geom.channels * geom.width;
        let in_cols = geom.channels * geom.length;
        let out_len = geom.out_len();
        let out_cols = filters * out_len;

        if let Some(b) = bias.filter(|&b| self.wants(b)) {
            let db = self.slot(b);
            for grow in g.chunks_exact(out_cols) {
                for (f, d) in db.iter_mut().enumerate() {
                    *d += grow[f * out_len..(f + 1) * out_len].iter().sum::<f64>();
                }
            }
        }
        if self.wants(kernel) {
            let dw = self.slot(kernel);
            for (xr, grow) in x.chunks_exact(in_cols).zip(g.chunks_exact(out_cols)) {
                for f in 0..filters {
                    let gf = &grow[f * out_len..(f + 1) * out_len];
                    for c in 0..geom.channels {
                        let sig = &xr[c * geom.length..(c + 1) * geom.length];
                        for j in 0..geom.width {
                            let (lo, hi) = tap_range(geom, j, out_len);
                            let off = j as isize - geom.padding as isize;
                            let mut acc = 0.0;
                            for i in lo..hi {
                                acc += gf[i] * sig[(i as isize + off) as usize];
                            }
                            dw[f * kcols + c * geom.width + j] += acc;
                        }
                    }
                }
            }
        }
        if self.wants(input) {
            let dx = self.slot(input);
            for (dxr, grow) in dx.chunks_exact_mut(in_cols).zip(g.chunks_exact(out_cols)) {
                for f in 0..filters {
                    let gf = &grow[f * out_len..(f + 1) * out_len];
                    for c in 0..geom.channels {
                        let dsig = &mut dxr[c * geom.length..(c + 1) * geom.length];
                        for j in 0..geom.width {
                            let kv = w[f * kcols + c * geom.width + j];
                            let (lo, hi) = tap_range(geom, j, out_len);
                            let off = j as isize - geom.padding as isize;
                            for i in lo..hi {
                                dsig[(i as isize + off) as usize] += kv * gf[i];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Output positions `i` for which tap `j` lands inside the unpadded signal.
fn tap_range(geom: Conv1dGeometry, j: usize, out_len: usize) -> (usize, usize) {
    let off = j as isize - geom.padding as isize;
    let lo = (-off).max(0) as usize;
    let hi = ((geom.length as isize - off).max(0) as usize).min(out_len);
    (lo.min(hi), hi)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Numerically stable softmax of one vector.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &[f64]) -> Tensor {
        Tensor::matrix(1, v.len(), v.to_vec()).unwrap()
    }

    #[test]
    fn conv1d_valid_hand_example() {
        let mut tape = Tape::new();
        let x = tape.constant(row(&[1.0, 2.0, 3.0, 4.0]));
        let k = tape.constant(row(&[1.0, 0.0, -1.0]));
        let geom = Conv1dGeometry {
            channels: 1,
            length: 4,
            width: 3,
            padding: 0,
        };
        let y = tape.conv1d(x, k, None, geom).unwrap();
        assert_eq!(tape.value(y).data(), &[-2.0, -2.0]);
    }

    #[test]
    fn conv1d_identity_kernel() {
        let mut tape = Tape::new();
        let x = tape.constant(row(&[0.5, -1.0, 7.0]));
        let k = tape.constant(row(&[1.0]));
        let geom = Conv1dGeometry {
            channels: 1,
            length: 3,
            width: 1,
            padding: 0,
        };
        let y = tape.conv1d(x, k, None, geom).unwrap();
        assert_eq!(tape.value(y).data(), &[0.5, -1.0, 7.0]);
    }

    #[test]
    fn conv1d_rejects_wide_kernel() {
        let mut tape = Tape::new();
        let x = tape.constant(row(&[1.0, 2.0]));
        let k = tape.constant(row(&[1.0, 1.0, 1.0]));
        let geom = Conv1dGeometry {
            channels: 1,
            length: 2,
            width: 3,
            padding: 0,
        };
        assert!(matches!(tape.conv1d(x, k, None, geom), Err(Error::Shape(_))));
    }

    #[test]
    fn padded_conv_keeps_length() {
        let geom = Conv1dGeometry {
            channels: 2,
            length: 6,
            width: 5,
            padding: 2,
        };
        assert_eq!(geom.out_len(), 6);
    }

    #[test]
    fn softmax_uniform_and_stable() {
        let p = softmax(&[0.0, 0.0, 0.0]);
        for v in &p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = softmax(&[1000.0, 0.0, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_equals_logsumexp_minus_target() {
        let z = [0.3, -1.2, 2.5, 0.0];
        let mut tape = Tape::new();
        let v = tape.param(row(&z));
        let l = tape.softmax_cross_entropy(v, &[1]);
        let expected = log_sum_exp(&z) - z[1];
        assert!((tape.value(l).item() - expected).abs() < 1e-12);
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let c = tape.constant(row(&[1.0, 2.0]));
        let p = tape.param(row(&[3.0, 4.0]));
        let prod = tape.mul(c, p);
        let s = tape.sum(prod);
        let grads = tape.backward(s).unwrap();
        assert!(grads.get(c).is_none());
        assert_eq!(grads.get(p).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn unused_param_gets_zero_gradient() {
        let mut tape = Tape::new();
        let p = tape.param(row(&[3.0, 4.0]));
        let q = tape.param(row(&[1.0]));
        let s = tape.sum(p);
        let grads = tape.backward(s).unwrap();
        assert_eq!(grads.get(q).unwrap().data(), &[0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = Tape::new();
        let p = tape.param(row(&[3.0, 4.0]));
        assert!(tape.backward(p).is_err());
    }
}
