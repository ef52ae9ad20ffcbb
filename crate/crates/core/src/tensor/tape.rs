use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::spectral::Fft2Plan;

use super::conv::{col2im, im2col, ConvGeometry};
use super::{Real, Tensor};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dOptions {
    pub stride: usize,
    pub padding: usize,
}

impl Default for Conv2dOptions {
    fn default() -> Self {
        Conv2dOptions { stride: 1, padding: 0 }
    }
}

enum Op<T: Real> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Square(Var),
    Sum(Var),
    Mean(Var),
    MatMul {
        a: Var,
        b: Var,
        m: usize,
        k: usize,
        n: usize,
    },
    Conv2d {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        geom: ConvGeometry,
        cols: Vec<T>,
    },
    Upsample {
        input: Var,
        factor: usize,
    },
    Relu(Var),
    LeakyRelu(Var, T),
    Tanh(Var),
    Sigmoid(Var),
    Narrow {
        input: Var,
        start: usize,
    },
    Concat(Vec<Var>),
    Crop(Var),
    Reshape(Var),
    Fft2 {
        input: Var,
        inverse: bool,
        plan: Arc<Fft2Plan<T>>,
    },
    SpectralMul {
        input: Var,
        transfer: Arc<[Complex<T>]>,
    },
    Abs2(Var),
}

struct Node<T: Real> {
    value: Tensor<T>,
    op: Op<T>,
    tracked: bool,
}

/// Reverse-mode autodiff tape.
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order and the graph cannot contain cycles. A tape is meant to
/// live for one optimization step and then be dropped.
///
/// Only nodes that depend on a [`Tape::variable`] are tracked; constants and
/// [`Tape::detach`]ed values receive no gradient and pass none upstream.
pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn complex_pair_dims(op: &'static str, shape: &[usize]) -> Result<(usize, usize)> {
    match shape {
        [2, h, w] => Ok((*h, *w)),
        _ => Err(Error::InvalidShape {
            op,
            msg: format!("expected a [2, H, W] complex pair, got {shape:?}"),
        }),
    }
}

fn to_complex<T: Real>(data: &[T]) -> Vec<Complex<T>> {
    let half = data.len() / 2;
    data[..half]
        .iter()
        .zip(&data[half..])
        .map(|(&re, &im)| Complex::new(re, im))
        .collect()
}

fn from_complex<T: Real>(buf: &[Complex<T>]) -> Vec<T> {
    let mut out = Vec::with_capacity(buf.len() * 2);
    out.extend(buf.iter().map(|c| c.re));
    out.extend(buf.iter().map(|c| c.im));
    out
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), grads: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node<T> {
        &self.nodes[v.0]
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    /// A leaf that receives gradients (a parameter).
    pub fn variable(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives gradients.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Value-identical copy that cuts every gradient path through `v`.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.node(v).value.clone();
        self.constant(value)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.node(v).value.shape()
    }

    /// Accumulated gradient of a tracked leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<Tensor<T>> {
        self.grads[v.0]
            .as_ref()
            .map(|g| Tensor::new(self.node(v).value.shape().to_vec(), g.clone()).expect("grad shape"))
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    fn binary_same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::ShapeMismatch { op, lhs: sa.to_vec(), rhs: sb.to_vec() });
        }
        Ok(())
    }

    fn zip_map(&self, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Tensor<T> {
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(va.shape().to_vec(), data).expect("same shape")
    }

    fn map(&self, a: Var, f: impl Fn(T) -> T) -> Tensor<T> {
        let va = self.value(a);
        Tensor::new(va.shape().to_vec(), va.data().iter().map(|&x| f(x)).collect())
            .expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("add", a, b)?;
        let value = self.zip_map(a, b, |x, y| x + y);
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Add(a, b), tracked))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("sub", a, b)?;
        let value = self.zip_map(a, b, |x, y| x - y);
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Sub(a, b), tracked))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("mul", a, b)?;
        let value = self.zip_map(a, b, |x, y| x * y);
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Mul(a, b), tracked))
    }

    pub fn scale(&mut self, a: Var, factor: T) -> Var {
        let value = self.map(a, |x| x * factor);
        let tracked = self.tracked(a);
        self.push(value, Op::Scale(a, factor), tracked)
    }

    pub fn add_scalar(&mut self, a: Var, offset: T) -> Var {
        let value = self.map(a, |x| x + offset);
        let tracked = self.tracked(a);
        self.push(value, Op::AddScalar(a), tracked)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.map(a, |x| x * x);
        let tracked = self.tracked(a);
        self.push(value, Op::Square(a), tracked)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total: T = self.value(a).data().iter().copied().sum();
        let tracked = self.tracked(a);
        self.push(Tensor::scalar(total), Op::Sum(a), tracked)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let total: T = va.data().iter().copied().sum();
        let mean = total / T::lit(va.numel() as f64);
        let tracked = self.tracked(a);
        self.push(Tensor::scalar(mean), Op::Mean(a), tracked)
    }

    /// Mean squared difference of two same-shape tensors.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let diff = self.sub(a, b)?;
        let sq = self.square(diff);
        Ok(self.mean(sq))
    }

    /// `sum_i weights[i] * terms[i]` with plain constant weights.
    pub fn weighted_sum(&mut self, terms: &[Var], weights: &[T]) -> Result<Var> {
        if terms.is_empty() || terms.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "weighted_sum: {} terms vs {} weights",
                terms.len(),
                weights.len()
            )));
        }
        let mut acc = self.scale(terms[0], weights[0]);
        for (&t, &w) in terms.iter().zip(weights).skip(1) {
            let scaled = self.scale(t, w);
            acc = self.add(acc, scaled)?;
        }
        Ok(acc)
    }

    /// Plain 2-D matrix product `[m, k] x [k, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let (m, k, n) = match (sa.as_slice(), sb.as_slice()) {
            ([m, k], [k2, n]) if k == k2 => (*m, *k, *n),
            _ => return Err(Error::ShapeMismatch { op: "matmul", lhs: sa, rhs: sb }),
        };
        let mut out = vec![T::zero(); m * n];
        T::gemm(m, k, n, T::one(), self.value(a).data(), false, self.value(b).data(), false, T::zero(), &mut out);
        let tracked = self.tracked(a) || self.tracked(b);
        let value = Tensor::new(vec![m, n], out)?;
        Ok(self.push(value, Op::MatMul { a, b, m, k, n }, tracked))
    }

    /// Cross-correlation of a `[C, H, W]` input with `[C_out, C, kh, kw]` weights.
    pub fn conv2d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        options: Conv2dOptions,
    ) -> Result<Var> {
        let geom = ConvGeometry::infer(self.shape(input), self.shape(weight), options)?;
        if let Some(b) = bias {
            if self.shape(b) != [geom.c_out] {
                return Err(Error::ShapeMismatch {
                    op: "conv2d bias",
                    lhs: self.shape(b).to_vec(),
                    rhs: vec![geom.c_out],
                });
            }
        }
        let cols = im2col(self.value(input).data(), &geom);
        let (rows, spatial) = (geom.col_rows(), geom.out_spatial());
        let mut out = vec![T::zero(); geom.c_out * spatial];
        if let Some(b) = bias {
            for (chunk, &bv) in out.chunks_mut(spatial).zip(self.value(b).data()) {
                chunk.fill(bv);
            }
        }
        T::gemm(geom.c_out, rows, spatial, T::one(), self.value(weight).data(), false, &cols, false, T::one(), &mut out);
        let tracked = self.tracked(input) || self.tracked(weight) || bias.is_some_and(|b| self.tracked(b));
        let value = Tensor::new(vec![geom.c_out, geom.h_out, geom.w_out], out)?;
        Ok(self.push(value, Op::Conv2d { input, weight, bias, geom, cols }, tracked))
    }

    /// Nearest-neighbour upsampling of a `[C, H, W]` tensor by an integer factor.
    pub fn upsample_nearest(&mut self, input: Var, factor: usize) -> Result<Var> {
        let (c, h, w) = match self.shape(input) {
            &[c, h, w] => (c, h, w),
            s => {
                return Err(Error::InvalidShape { op: "upsample", msg: format!("expected [C, H, W], got {s:?}") })
            }
        };
        if factor == 0 {
            return Err(Error::InvalidArgument("upsample factor must be positive".into()));
        }
        let (ho, wo) = (h * factor, w * factor);
        let src = self.value(input).data();
        let mut out = Vec::with_capacity(c * ho * wo);
        for ch in 0..c {
            for y in 0..ho {
                let row = &src[(ch * h + y / factor) * w..][..w];
                for x in 0..wo {
                    out.push(row[x / factor]);
                }
            }
        }
        let tracked = self.tracked(input);
        let value = Tensor::new(vec![c, ho, wo], out)?;
        Ok(self.push(value, Op::Upsample { input, factor }, tracked))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.map(a, |x| if x > T::zero() { x } else { T::zero() });
        let tracked = self.tracked(a);
        self.push(value, Op::Relu(a), tracked)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: T) -> Var {
        let value = self.map(a, |x| if x > T::zero() { x } else { x * slope });
        let tracked = self.tracked(a);
        self.push(value, Op::LeakyRelu(a, slope), tracked)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.map(a, |x| x.tanh());
        let tracked = self.tracked(a);
        self.push(value, Op::Tanh(a), tracked)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.map(a, |x| T::one() / (T::one() + (-x).exp()));
        let tracked = self.tracked(a);
        self.push(value, Op::Sigmoid(a), tracked)
    }

    /// Slice `len` entries of the leading axis starting at `start`.
    pub fn narrow(&mut self, input: Var, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        let Some((&lead, rest)) = shape.split_first() else {
            return Err(Error::InvalidShape { op: "narrow", msg: "cannot slice a 0-d tensor".into() });
        };
        if start + len > lead || len == 0 {
            return Err(Error::InvalidShape {
                op: "narrow",
                msg: format!("range {start}..{} out of bounds for leading axis {lead}", start + len),
            });
        }
        let stride: usize = rest.iter().product();
        let data = self.value(input).data()[start * stride..(start + len) * stride].to_vec();
        let mut out_shape = vec![len];
        out_shape.extend_from_slice(rest);
        let tracked = self.tracked(input);
        let value = Tensor::new(out_shape, data)?;
        Ok(self.push(value, Op::Narrow { input, start }, tracked))
    }

    /// Concatenate along the leading axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::InvalidArgument("concat of zero tensors".into()));
        };
        let tail = self.shape(first).get(1..).map(<[usize]>::to_vec).unwrap_or_default();
        if self.shape(first).is_empty() {
            return Err(Error::InvalidShape { op: "concat", msg: "cannot concatenate 0-d tensors".into() });
        }
        let mut lead = 0;
        let mut data = Vec::new();
        for &p in parts {
            let s = self.shape(p);
            if s.len() != tail.len() + 1 || s[1..] != tail[..] {
                return Err(Error::ShapeMismatch { op: "concat", lhs: self.shape(first).to_vec(), rhs: s.to_vec() });
            }
            lead += s[0];
            data.extend_from_slice(self.value(p).data());
        }
        let mut shape = vec![lead];
        shape.extend(tail);
        let tracked = parts.iter().any(|&p| self.tracked(p));
        let value = Tensor::new(shape, data)?;
        Ok(self.push(value, Op::Concat(parts.to_vec()), tracked))
    }

    /// Keep the top-left `height x width` window of every channel of a `[C, H, W]` tensor.
    pub fn crop(&mut self, input: Var, height: usize, width: usize) -> Result<Var> {
        let (c, h, w) = match self.shape(input) {
            &[c, h, w] => (c, h, w),
            s => return Err(Error::InvalidShape { op: "crop", msg: format!("expected [C, H, W], got {s:?}") }),
        };
        if height == 0 || width == 0 || height > h || width > w {
            return Err(Error::InvalidShape { op: "crop", msg: format!("cannot crop {h}x{w} to {height}x{width}") });
        }
        let src = self.value(input).data();
        let mut out = Vec::with_capacity(c * height * width);
        for ch in 0..c {
            for y in 0..height {
                out.extend_from_slice(&src[(ch * h + y) * w..][..width]);
            }
        }
        let tracked = self.tracked(input);
        let value = Tensor::new(vec![c, height, width], out)?;
        Ok(self.push(value, Op::Crop(input), tracked))
    }

    pub fn reshape(&mut self, input: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        let value = self.value(input).clone().reshaped(shape)?;
        let tracked = self.tracked(input);
        Ok(self.push(value, Op::Reshape(input), tracked))
    }

    /// 2-D DFT of a `[2, H, W]` (real, imag) pair. The forward direction is
    /// unnormalized, the inverse carries the `1/(H W)` factor.
    pub fn fft2(&mut self, input: Var, plan: &Arc<Fft2Plan<T>>, inverse: bool) -> Result<Var> {
        let (h, w) = complex_pair_dims("fft2", self.shape(input))?;
        if (h, w) != (plan.height(), plan.width()) {
            return Err(Error::ShapeMismatch {
                op: "fft2",
                lhs: vec![2, h, w],
                rhs: vec![2, plan.height(), plan.width()],
            });
        }
        let mut buf = to_complex(self.value(input).data());
        if inverse {
            plan.inverse(&mut buf);
        } else {
            plan.forward(&mut buf);
        }
        let tracked = self.tracked(input);
        let value = Tensor::new(vec![2, h, w], from_complex(&buf))?;
        Ok(self.push(value, Op::Fft2 { input, inverse, plan: Arc::clone(plan) }, tracked))
    }

    /// Pointwise product of a `[2, H, W]` spectrum with a constant transfer function.
    pub fn spectral_mul(&mut self, input: Var, transfer: &Arc<[Complex<T>]>) -> Result<Var> {
        let (h, w) = complex_pair_dims("spectral_mul", self.shape(input))?;
        if transfer.len() != h * w {
            return Err(Error::InvalidShape {
                op: "spectral_mul",
                msg: format!("transfer has {} entries, field grid is {h}x{w}", transfer.len()),
            });
        }
        let buf: Vec<Complex<T>> = to_complex(self.value(input).data())
            .iter()
            .zip(transfer.iter())
            .map(|(x, p)| x * p)
            .collect();
        let tracked = self.tracked(input);
        let value = Tensor::new(vec![2, h, w], from_complex(&buf))?;
        Ok(self.push(value, Op::SpectralMul { input, transfer: Arc::clone(transfer) }, tracked))
    }

    /// Squared magnitude of a `[2, H, W]` pair, giving `[H, W]`.
    pub fn abs2(&mut self, input: Var) -> Result<Var> {
        let (h, w) = complex_pair_dims("abs2", self.shape(input))?;
        let data = self.value(input).data();
        let n = h * w;
        let out = (0..n).map(|i| data[i] * data[i] + data[n + i] * data[n + i]).collect();
        let tracked = self.tracked(input);
        let value = Tensor::new(vec![h, w], out)?;
        Ok(self.push(value, Op::Abs2(input), tracked))
    }

    /// Accumulate `d loss / d leaf` into every tracked leaf reachable from `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let root = self.node(loss);
        if root.value.numel() != 1 {
            return Err(Error::NonScalarLoss(root.value.shape().to_vec()));
        }
        if !root.tracked {
            return Ok(());
        }
        let Tape { nodes, grads } = self;
        let mut adj: Vec<Option<Vec<T>>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &nodes[i];
            if !node.tracked {
                continue;
            }
            let mut send = |v: Var, contribution: Vec<T>| accumulate(&mut adj, nodes, v, contribution);
            match &node.op {
                Op::Leaf => match &mut grads[i] {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &b)| *a = *a + b),
                    slot => *slot = Some(g),
                },
                Op::Add(a, b) => {
                    send(*a, g.clone());
                    send(*b, g);
                }
                Op::Sub(a, b) => {
                    send(*a, g.clone());
                    send(*b, g.iter().map(|&x| -x).collect());
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                    send(*a, g.iter().zip(vb).map(|(&x, &y)| x * y).collect());
                    send(*b, g.iter().zip(va).map(|(&x, &y)| x * y).collect());
                }
                Op::Scale(a, factor) => send(*a, g.iter().map(|&x| x * *factor).collect()),
                Op::AddScalar(a) => send(*a, g),
                Op::Square(a) => {
                    let va = nodes[a.0].value.data();
                    let two = T::lit(2.0);
                    send(*a, g.iter().zip(va).map(|(&x, &y)| two * x * y).collect());
                }
                Op::Sum(a) => send(*a, vec![g[0]; nodes[a.0].value.numel()]),
                Op::Mean(a) => {
                    let n = nodes[a.0].value.numel();
                    send(*a, vec![g[0] / T::lit(n as f64); n]);
                }
                Op::MatMul { a, b, m, k, n } => {
                    let (m, k, n) = (*m, *k, *n);
                    if nodes[a.0].tracked {
                        let mut da = vec![T::zero(); m * k];
                        T::gemm(m, n, k, T::one(), &g, false, nodes[b.0].value.data(), true, T::zero(), &mut da);
                        send(*a, da);
                    }
                    if nodes[b.0].tracked {
                        let mut db = vec![T::zero(); k * n];
                        T::gemm(k, m, n, T::one(), nodes[a.0].value.data(), true, &g, false, T::zero(), &mut db);
                        send(*b, db);
                    }
                }
                Op::Conv2d { input, weight, bias, geom, cols } => {
                    let (rows, spatial) = (geom.col_rows(), geom.out_spatial());
                    if nodes[weight.0].tracked {
                        let mut dw = vec![T::zero(); geom.c_out * rows];
                        T::gemm(geom.c_out, spatial, rows, T::one(), &g, false, cols, true, T::zero(), &mut dw);
                        send(*weight, dw);
                    }
                    if let Some(b) = bias {
                        if nodes[b.0].tracked {
                            send(*b, g.chunks(spatial).map(|c| c.iter().copied().sum()).collect());
                        }
                    }
                    if nodes[input.0].tracked {
                        let mut dcols = vec![T::zero(); rows * spatial];
                        T::gemm(rows, geom.c_out, spatial, T::one(), nodes[weight.0].value.data(), true, &g, false, T::zero(), &mut dcols);
                        send(*input, col2im(&dcols, geom));
                    }
                }
                Op::Upsample { input, factor } => {
                    let shape = nodes[input.0].value.shape();
                    let (c, h, w) = (shape[0], shape[1], shape[2]);
                    let f = *factor;
                    let wo = w * f;
                    let mut d = vec![T::zero(); c * h * w];
                    for ch in 0..c {
                        for y in 0..h * f {
                            let grow = &g[(ch * h * f + y) * wo..][..wo];
                            let drow = &mut d[(ch * h + y / f) * w..][..w];
                            for (x, &gv) in grow.iter().enumerate() {
                                drow[x / f] = drow[x / f] + gv;
                            }
                        }
                    }
                    send(*input, d);
                }
                Op::Relu(a) => {
                    let va = nodes[a.0].value.data();
                    send(*a, g.iter().zip(va).map(|(&x, &y)| if y > T::zero() { x } else { T::zero() }).collect());
                }
                Op::LeakyRelu(a, slope) => {
                    let va = nodes[a.0].value.data();
                    send(*a, g.iter().zip(va).map(|(&x, &y)| if y > T::zero() { x } else { x * *slope }).collect());
                }
                Op::Tanh(a) => {
                    let out = node.value.data();
                    send(*a, g.iter().zip(out).map(|(&x, &y)| x * (T::one() - y * y)).collect());
                }
                Op::Sigmoid(a) => {
                    let out = node.value.data();
                    send(*a, g.iter().zip(out).map(|(&x, &y)| x * y * (T::one() - y)).collect());
                }
                Op::Narrow { input, start } => {
                    let src = &nodes[input.0].value;
                    let stride: usize = src.shape()[1..].iter().product();
                    let mut d = vec![T::zero(); src.numel()];
                    d[start * stride..start * stride + g.len()].copy_from_slice(&g);
                    send(*input, d);
                }
                Op::Crop(input) => {
                    let (c, height, width) = {
                        let s = node.value.shape();
                        (s[0], s[1], s[2])
                    };
                    let src_shape = nodes[input.0].value.shape();
                    let (h, w) = (src_shape[1], src_shape[2]);
                    let mut d = vec![T::zero(); c * h * w];
                    for ch in 0..c {
                        for y in 0..height {
                            d[(ch * h + y) * w..][..width].copy_from_slice(&g[(ch * height + y) * width..][..width]);
                        }
                    }
                    send(*input, d);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = nodes[p.0].value.numel();
                        send(p, g[offset..offset + n].to_vec());
                        offset += n;
                    }
                }
                Op::Reshape(a) => send(*a, g),
                Op::Fft2 { input, inverse, plan } => {
                    let mut buf = to_complex(&g);
                    if *inverse {
                        // adjoint of F^H / N is F / N
                        plan.process(&mut buf, false);
                        let s = T::one() / T::lit(plan.len() as f64);
                        buf.iter_mut().for_each(|c| *c = *c * s);
                    } else {
                        // adjoint of F is F^H (unnormalized)
                        plan.process(&mut buf, true);
                    }
                    send(*input, from_complex(&buf));
                }
                Op::SpectralMul { input, transfer } => {
                    let buf: Vec<Complex<T>> =
                        to_complex(&g).iter().zip(transfer.iter()).map(|(x, p)| x * p.conj()).collect();
                    send(*input, from_complex(&buf));
                }
                Op::Abs2(a) => {
                    let va = nodes[a.0].value.data();
                    let n = g.len();
                    let two = T::lit(2.0);
                    let mut d = Vec::with_capacity(2 * n);
                    d.extend((0..n).map(|i| two * va[i] * g[i]));
                    d.extend((0..n).map(|i| two * va[n + i] * g[i]));
                    send(*a, d);
                }
            }
        }
        Ok(())
    }
}

fn accumulate<T: Real>(adj: &mut [Option<Vec<T>>], nodes: &[Node<T>], v: Var, contribution: Vec<T>) {
    if !nodes[v.0].tracked {
        return;
    }
    match &mut adj[v.0] {
        Some(acc) => acc.iter_mut().zip(&contribution).for_each(|(a, &b)| *a = *a + b),
        slot => *slot = Some(contribution),
    }
}
