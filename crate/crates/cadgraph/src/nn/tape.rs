//! Reverse-mode differentiation tape.
//!
//! A [`Tape`] owns every tensor produced during a forward pass, in creation
//! (hence topological) order. Each op validates shapes, computes its value,
//! and records which parents it came from; [`Tape::backward`] replays the
//! records in reverse. A tape is confined to one thread for the duration of a
//! forward/backward pass; independent passes on separate tapes can run
//! concurrently.
//!
//! Reduction order: every reduction loop here runs in ascending index order,
//! except [`Tape::gated_neighbor_sum`] and [`Tape::row_sum_exact`], whose
//! forward sums use the order-independent accumulator from [`super::acc`].

use std::sync::Arc;

use super::acc::ExactSum;
use super::scalar::Real;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a tape.
pub type ValueId = usize;

/// Per-destination incoming directed edges: `(source row, edge row)`.
#[derive(Debug, Clone)]
pub struct Incoming {
    pub lists: Vec<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone)]
pub enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    ScalarMul(f64),
    ScalarAdd(f64),
    BiasAdd,
    MatMul,
    Relu,
    Sigmoid,
    Log,
    Exp,
    Concat { axis: usize },
    SumAxis { axis: usize },
    SumAll,
    L2Norm,
    CosinePairs { a_norms: Vec<f64>, b_norms: Vec<f64> },
    Conv2d { pad: (usize, usize) },
    Conv1d { pad: usize },
    AdaptiveAvgPool2d { out: (usize, usize) },
    AdaptiveAvgPool1d { out: usize },
    Reshape,
    RowGather { indices: Arc<Vec<usize>> },
    GatedNeighborSum { incoming: Arc<Incoming> },
    RowSumExact,
}

struct Node<R: Real> {
    value: Tensor<R>,
    op: Op,
    parents: Vec<ValueId>,
    requires_grad: bool,
}

/// Gradients produced by a backward pass, indexed by [`ValueId`].
#[derive(Debug)]
pub struct Gradients<R: Real> {
    grads: Vec<Option<Tensor<R>>>,
}

impl<R: Real> Gradients<R> {
    pub fn get(&self, id: ValueId) -> Option<&Tensor<R>> {
        self.grads.get(id).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, id: ValueId) -> Option<Tensor<R>> {
        self.grads.get_mut(id).and_then(|g| g.take())
    }
}

#[derive(Default)]
pub struct Tape<R: Real> {
    nodes: Vec<Node<R>>,
}

impl<R: Real> Tape<R> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: ValueId) -> &Tensor<R> {
        &self.nodes[id].value
    }

    /// Record an input. `requires_grad` marks it as a differentiation target.
    pub fn leaf(&mut self, value: Tensor<R>, requires_grad: bool) -> ValueId {
        self.push(value, Op::Leaf, vec![], requires_grad)
    }

    /// Record a non-differentiable input (masks, raw features, index data).
    pub fn constant(&mut self, value: Tensor<R>) -> ValueId {
        self.leaf(value, false)
    }

    fn push(&mut self, value: Tensor<R>, op: Op, parents: Vec<ValueId>, requires_grad: bool) -> ValueId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            value,
            op,
            parents,
            requires_grad,
        });
        id
    }

    fn any_grad(&self, ids: &[ValueId]) -> bool {
        ids.iter().any(|&i| self.nodes[i].requires_grad)
    }

    fn record(&mut self, value: Tensor<R>, op: Op, parents: Vec<ValueId>) -> ValueId {
        let rg = self.any_grad(&parents);
        self.push(value, op, parents, rg)
    }

    // ---- elementwise ----

    pub fn add(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let (ta, tb) = (self.value(a), self.value(b));
        same_shape("add", ta, tb)?;
        let data = zip_map(ta, tb, |x, y| x + y);
        Ok(self.record(data, Op::Add, vec![a, b]))
    }

    pub fn sub(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let (ta, tb) = (self.value(a), self.value(b));
        same_shape("sub", ta, tb)?;
        let data = zip_map(ta, tb, |x, y| x - y);
        Ok(self.record(data, Op::Sub, vec![a, b]))
    }

    pub fn mul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let (ta, tb) = (self.value(a), self.value(b));
        same_shape("mul", ta, tb)?;
        let data = zip_map(ta, tb, |x, y| x * y);
        Ok(self.record(data, Op::Mul, vec![a, b]))
    }

    pub fn scalar_mul(&mut self, a: ValueId, c: f64) -> ValueId {
        let rc = R::from_f64(c);
        let value = self.value(a).map(|x| x * rc);
        self.record(value, Op::ScalarMul(c), vec![a])
    }

    pub fn scalar_add(&mut self, a: ValueId, c: f64) -> ValueId {
        let rc = R::from_f64(c);
        let value = self.value(a).map(|x| x + rc);
        self.record(value, Op::ScalarAdd(c), vec![a])
    }

    /// `x + b` broadcast over the last axis: `x [.., d]`, `b [d]`.
    pub fn bias_add(&mut self, x: ValueId, b: ValueId) -> Result<ValueId> {
        let (tx, tb) = (self.value(x), self.value(b));
        let d = *tx.shape().last().unwrap_or(&0);
        if tb.rank() != 1 || tb.shape()[0] != d {
            return Err(shape_err("bias_add", tx, tb));
        }
        let bd = tb.data();
        let mut out = Vec::with_capacity(tx.len());
        for (i, &v) in tx.data().iter().enumerate() {
            out.push(v + bd[i % d]);
        }
        let value = Tensor::from_vec(tx.shape(), out)?;
        Ok(self.record(value, Op::BiasAdd, vec![x, b]))
    }

    pub fn relu(&mut self, a: ValueId) -> ValueId {
        let value = self.value(a).map(|x| if x > R::ZERO { x } else { R::ZERO });
        self.record(value, Op::Relu, vec![a])
    }

    pub fn sigmoid(&mut self, a: ValueId) -> ValueId {
        let value = self.value(a).map(|x| R::ONE / (R::ONE + (-x).exp()));
        self.record(value, Op::Sigmoid, vec![a])
    }

    pub fn log(&mut self, a: ValueId) -> Result<ValueId> {
        let ta = self.value(a);
        if ta.data().iter().any(|&x| x <= R::ZERO) {
            return Err(Error::NumericGuard(
                "log of a non-positive value".to_string(),
            ));
        }
        let value = ta.map(|x| x.ln());
        Ok(self.record(value, Op::Log, vec![a]))
    }

    pub fn exp(&mut self, a: ValueId) -> ValueId {
        let value = self.value(a).map(|x| x.exp());
        self.record(value, Op::Exp, vec![a])
    }

    // ---- structure ----

    pub fn reshape(&mut self, a: ValueId, shape: &[usize]) -> Result<ValueId> {
        let value = self.value(a).reshape(shape)?;
        Ok(self.record(value, Op::Reshape, vec![a]))
    }

    /// Concatenate along `axis`. All other dimensions must agree.
    pub fn concat(&mut self, axis: usize, parts: &[ValueId]) -> Result<ValueId> {
        if parts.is_empty() {
            return Err(Error::Contract("concat of zero tensors".into()));
        }
        let first = self.value(parts[0]).shape().to_vec();
        if axis >= first.len() {
            return Err(Error::Contract(format!(
                "concat axis {axis} out of range for rank {}",
                first.len()
            )));
        }
        let mut axis_total = 0;
        for &p in parts {
            let s = self.value(p).shape();
            if s.len() != first.len()
                || s.iter()
                    .zip(first.iter())
                    .enumerate()
                    .any(|(i, (a, b))| i != axis && a != b)
            {
                return Err(Error::Shape {
                    op: "concat",
                    lhs: first.clone(),
                    rhs: s.to_vec(),
                });
            }
            axis_total += s[axis];
        }
        let mut out_shape = first.clone();
        out_shape[axis] = axis_total;
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(out_shape.iter().product());
        for o in 0..outer {
            for &p in parts {
                let t = self.value(p);
                let alen = t.shape()[axis];
                let block = alen * inner;
                out.extend_from_slice(&t.data()[o * block..(o + 1) * block]);
            }
        }
        let value = Tensor::from_vec(&out_shape, out)?;
        Ok(self.record(value, Op::Concat { axis }, parts.to_vec()))
    }

    /// Select rows of a rank-2 tensor (indices may repeat).
    pub fn row_gather(&mut self, a: ValueId, indices: Arc<Vec<usize>>) -> Result<ValueId> {
        let ta = self.value(a);
        if ta.rank() != 2 {
            return Err(Error::Contract(format!(
                "row_gather expects rank 2, got {:?}",
                ta.shape()
            )));
        }
        let (n, d) = (ta.shape()[0], ta.shape()[1]);
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::Contract(format!(
                "row_gather index {bad} out of range {n}"
            )));
        }
        let mut out = Vec::with_capacity(indices.len() * d);
        for &i in indices.iter() {
            out.extend_from_slice(&ta.data()[i * d..(i + 1) * d]);
        }
        let value = Tensor::from_vec(&[indices.len(), d], out)?;
        Ok(self.record(value, Op::RowGather { indices }, vec![a]))
    }

    // ---- reductions ----

    pub fn sum_axis(&mut self, a: ValueId, axis: usize) -> Result<ValueId> {
        let ta = self.value(a);
        if axis >= ta.rank() {
            return Err(Error::Contract(format!(
                "sum_axis {axis} out of range for rank {}",
                ta.rank()
            )));
        }
        let shape = ta.shape();
        let outer: usize = shape[..axis].iter().product();
        let mid = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let mut out_shape = shape.to_vec();
        out_shape.remove(axis);
        let mut out = vec![R::ZERO; outer * inner];
        let data = ta.data();
        for o in 0..outer {
            for m in 0..mid {
                let base = (o * mid + m) * inner;
                for i in 0..inner {
                    out[o * inner + i] += data[base + i];
                }
            }
        }
        let value = Tensor::from_vec(&out_shape, out)?;
        Ok(self.record(value, Op::SumAxis { axis }, vec![a]))
    }

    pub fn sum_all(&mut self, a: ValueId) -> ValueId {
        let mut s = R::ZERO;
        for &x in self.value(a).data() {
            s += x;
        }
        self.record(Tensor::scalar(s), Op::SumAll, vec![a])
    }

    pub fn mean_all(&mut self, a: ValueId) -> ValueId {
        let n = self.value(a).len().max(1);
        let s = self.sum_all(a);
        self.scalar_mul(s, 1.0 / n as f64)
    }

    /// Euclidean norm of the flattened tensor.
    pub fn l2_norm(&mut self, a: ValueId) -> ValueId {
        let mut s = 0.0f64;
        for &x in self.value(a).data() {
            let v = x.to_f64();
            s += v * v;
        }
        let value = Tensor::scalar(R::from_f64(s.sqrt()));
        self.record(value, Op::L2Norm, vec![a])
    }

    /// Cosine similarity between all row pairs: `a [n,d] x b [m,d] -> [n,m]`.
    /// Rank-1 inputs are treated as single rows; two rank-1 inputs produce a
    /// scalar. Errors if any row has (near-)zero norm.
    pub fn cosine_pairs(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (ra, rb) = (ta.rank(), tb.rank());
        if !(1..=2).contains(&ra) || !(1..=2).contains(&rb) {
            return Err(shape_err("cosine_pairs", ta, tb));
        }
        let d = *ta.shape().last().unwrap();
        if *tb.shape().last().unwrap() != d {
            return Err(shape_err("cosine_pairs", ta, tb));
        }
        let n = if ra == 2 { ta.shape()[0] } else { 1 };
        let m = if rb == 2 { tb.shape()[0] } else { 1 };
        let guard = R::NORM_GUARD.to_f64();
        let norms = |t: &Tensor<R>, rows: usize, side: &str| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(rows);
            for i in 0..rows {
                let row = &t.data()[i * d..(i + 1) * d];
                let mut s = 0.0f64;
                for &x in row {
                    let v = x.to_f64();
                    s += v * v;
                }
                let norm = s.sqrt();
                if norm < guard {
                    return Err(Error::NumericGuard(format!(
                        "cosine_pairs: zero-norm row {i} on {side} side"
                    )));
                }
                out.push(norm);
            }
            Ok(out)
        };
        let a_norms = norms(ta, n, "left")?;
        let b_norms = norms(tb, m, "right")?;
        let mut out = Vec::with_capacity(n * m);
        for i in 0..n {
            let ar = &ta.data()[i * d..(i + 1) * d];
            for j in 0..m {
                let br = &tb.data()[j * d..(j + 1) * d];
                let mut dot = 0.0f64;
                for t in 0..d {
                    dot += ar[t].to_f64() * br[t].to_f64();
                }
                out.push(R::from_f64(dot / (a_norms[i] * b_norms[j])));
            }
        }
        let shape: Vec<usize> = if ra == 1 && rb == 1 { vec![] } else { vec![n, m] };
        let value = Tensor::from_vec(&shape, out)?;
        Ok(self.record(value, Op::CosinePairs { a_norms, b_norms }, vec![a, b]))
    }

    /// Column sums of a rank-2 tensor via the exact accumulator:
    /// `x [n,d] -> [d]`. Bitwise independent of row order.
    pub fn row_sum_exact(&mut self, a: ValueId) -> Result<ValueId> {
        let ta = self.value(a);
        if ta.rank() != 2 {
            return Err(Error::Contract(format!(
                "row_sum_exact expects rank 2, got {:?}",
                ta.shape()
            )));
        }
        let (n, d) = (ta.shape()[0], ta.shape()[1]);
        let data = ta.data();
        let mut acc = ExactSum::new();
        let mut out = Vec::with_capacity(d);
        for c in 0..d {
            acc.reset();
            for r in 0..n {
                acc.add(data[r * d + c].to_f64());
            }
            out.push(R::from_f64(acc.total()));
        }
        let value = Tensor::from_vec(&[d], out)?;
        Ok(self.record(value, Op::RowSumExact, vec![a]))
    }

    /// Gated neighborhood aggregation: `out[v] = Σ_{(u,e) -> v} gate[e] ⊙ h[u]`,
    /// summed per component with the exact accumulator (so the result is
    /// independent of edge and node ordering).
    pub fn gated_neighbor_sum(
        &mut self,
        h: ValueId,
        gate: ValueId,
        incoming: Arc<Incoming>,
    ) -> Result<ValueId> {
        let (th, tg) = (self.value(h), self.value(gate));
        if th.rank() != 2 || tg.rank() != 2 || th.shape()[1] != tg.shape()[1] {
            return Err(shape_err("gated_neighbor_sum", th, tg));
        }
        let (v_count, d) = (th.shape()[0], th.shape()[1]);
        let e_count = tg.shape()[0];
        if incoming.lists.len() != v_count {
            return Err(Error::Contract(format!(
                "gated_neighbor_sum: {} lists for {} nodes",
                incoming.lists.len(),
                v_count
            )));
        }
        for list in &incoming.lists {
            for &(u, e) in list {
                if u >= v_count || e >= e_count {
                    return Err(Error::Contract(format!(
                        "gated_neighbor_sum: entry ({u},{e}) out of range"
                    )));
                }
            }
        }
        let hd = th.data();
        let gd = tg.data();
        let mut out = vec![R::ZERO; v_count * d];
        let mut acc = ExactSum::new();
        for (v, list) in incoming.lists.iter().enumerate() {
            if list.is_empty() {
                continue; // empty neighborhood contributes zero
            }
            for c in 0..d {
                acc.reset();
                for &(u, e) in list {
                    acc.add(gd[e * d + c].to_f64() * hd[u * d + c].to_f64());
                }
                out[v * d + c] = R::from_f64(acc.total());
            }
        }
        let value = Tensor::from_vec(&[v_count, d], out)?;
        Ok(self.record(value, Op::GatedNeighborSum { incoming }, vec![h, gate]))
    }

    // ---- linear algebra ----

    /// `a [m,k] @ b [k,n] -> [m,n]`.
    pub fn matmul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(shape_err("matmul", ta, tb));
        }
        let (m, k) = (ta.shape()[0], ta.shape()[1]);
        let n = tb.shape()[1];
        let value = Tensor::from_vec(&[m, n], matmul_raw(ta.data(), tb.data(), m, k, n))?;
        Ok(self.record(value, Op::MatMul, vec![a, b]))
    }

    /// 2-D convolution, stride 1, zero "same" padding. Input `[B,C,H,W]`,
    /// weight `[O,C,kh,kw]` (odd kernels), bias `[O]`.
    pub fn conv2d(&mut self, input: ValueId, weight: ValueId, bias: ValueId) -> Result<ValueId> {
        let (ti, tw) = (self.value(input), self.value(weight));
        let tb = self.value(bias);
        if ti.rank() != 4 || tw.rank() != 4 || ti.shape()[1] != tw.shape()[1] {
            return Err(shape_err("conv2d", ti, tw));
        }
        let (kh, kw) = (tw.shape()[2], tw.shape()[3]);
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::Contract(format!(
                "conv2d same padding requires odd kernels, got {kh}x{kw}"
            )));
        }
        let o_ch = tw.shape()[0];
        if tb.rank() != 1 || tb.shape()[0] != o_ch {
            return Err(shape_err("conv2d bias", tw, tb));
        }
        let (bsz, c, h, w) = (ti.shape()[0], ti.shape()[1], ti.shape()[2], ti.shape()[3]);
        let pad = (kh / 2, kw / 2);
        let mut out = vec![R::ZERO; bsz * o_ch * h * w];
        let (id, wd, bd) = (ti.data(), tw.data(), tb.data());
        for b in 0..bsz {
            for oc in 0..o_ch {
                for y in 0..h {
                    for x in 0..w {
                        let mut s = bd[oc];
                        for ic in 0..c {
                            for dy in 0..kh {
                                let iy = y + dy;
                                if iy < pad.0 || iy - pad.0 >= h {
                                    continue;
                                }
                                let iy = iy - pad.0;
                                for dx in 0..kw {
                                    let ix = x + dx;
                                    if ix < pad.1 || ix - pad.1 >= w {
                                        continue;
                                    }
                                    let ix = ix - pad.1;
                                    s += id[((b * c + ic) * h + iy) * w + ix]
                                        * wd[((oc * c + ic) * kh + dy) * kw + dx];
                                }
                            }
                        }
                        out[((b * o_ch + oc) * h + y) * w + x] = s;
                    }
                }
            }
        }
        let value = Tensor::from_vec(&[bsz, o_ch, h, w], out)?;
        Ok(self.record(value, Op::Conv2d { pad }, vec![input, weight, bias]))
    }

    /// 1-D convolution, stride 1, zero "same" padding. Input `[B,C,L]`,
    /// weight `[O,C,k]` (odd k), bias `[O]`.
    pub fn conv1d(&mut self, input: ValueId, weight: ValueId, bias: ValueId) -> Result<ValueId> {
        let (ti, tw) = (self.value(input), self.value(weight));
        let tb = self.value(bias);
        if ti.rank() != 3 || tw.rank() != 3 || ti.shape()[1] != tw.shape()[1] {
            return Err(shape_err("conv1d", ti, tw));
        }
        let k = tw.shape()[2];
        if k % 2 == 0 {
            return Err(Error::Contract(format!(
                "conv1d same padding requires an odd kernel, got {k}"
            )));
        }
        let o_ch = tw.shape()[0];
        if tb.rank() != 1 || tb.shape()[0] != o_ch {
            return Err(shape_err("conv1d bias", tw, tb));
        }
        let (bsz, c, l) = (ti.shape()[0], ti.shape()[1], ti.shape()[2]);
        let pad = k / 2;
        let mut out = vec![R::ZERO; bsz * o_ch * l];
        let (id, wd, bd) = (ti.data(), tw.data(), tb.data());
        for b in 0..bsz {
            for oc in 0..o_ch {
                for x in 0..l {
                    let mut s = bd[oc];
                    for ic in 0..c {
                        for dx in 0..k {
                            let ix = x + dx;
                            if ix < pad || ix - pad >= l {
                                continue;
                            }
                            s += id[(b * c + ic) * l + (ix - pad)] * wd[(oc * c + ic) * k + dx];
                        }
                    }
                    out[(b * o_ch + oc) * l + x] = s;
                }
            }
        }
        let value = Tensor::from_vec(&[bsz, o_ch, l], out)?;
        Ok(self.record(value, Op::Conv1d { pad }, vec![input, weight, bias]))
    }

    /// Adaptive average pooling `[B,C,H,W] -> [B,C,oh,ow]`.
    pub fn adaptive_avg_pool2d(&mut self, a: ValueId, out_hw: (usize, usize)) -> Result<ValueId> {
        let ta = self.value(a);
        if ta.rank() != 4 {
            return Err(Error::Contract(format!(
                "adaptive_avg_pool2d expects rank 4, got {:?}",
                ta.shape()
            )));
        }
        let (bsz, c, h, w) = (ta.shape()[0], ta.shape()[1], ta.shape()[2], ta.shape()[3]);
        let (oh, ow) = out_hw;
        if oh == 0 || ow == 0 || oh > h || ow > w {
            return Err(Error::Contract(format!(
                "adaptive_avg_pool2d output {oh}x{ow} invalid for input {h}x{w}"
            )));
        }
        let data = ta.data();
        let mut out = vec![R::ZERO; bsz * c * oh * ow];
        for b in 0..bsz {
            for ch in 0..c {
                for oy in 0..oh {
                    let (y0, y1) = pool_span(oy, h, oh);
                    for ox in 0..ow {
                        let (x0, x1) = pool_span(ox, w, ow);
                        let mut s = R::ZERO;
                        for y in y0..y1 {
                            for x in x0..x1 {
                                s += data[((b * c + ch) * h + y) * w + x];
                            }
                        }
                        let count = ((y1 - y0) * (x1 - x0)) as f64;
                        out[((b * c + ch) * oh + oy) * ow + ox] = s * R::from_f64(1.0 / count);
                    }
                }
            }
        }
        let value = Tensor::from_vec(&[bsz, c, oh, ow], out)?;
        Ok(self.record(value, Op::AdaptiveAvgPool2d { out: out_hw }, vec![a]))
    }

    /// Adaptive average pooling `[B,C,L] -> [B,C,ol]`.
    pub fn adaptive_avg_pool1d(&mut self, a: ValueId, out_l: usize) -> Result<ValueId> {
        let ta = self.value(a);
        if ta.rank() != 3 {
            return Err(Error::Contract(format!(
                "adaptive_avg_pool1d expects rank 3, got {:?}",
                ta.shape()
            )));
        }
        let (bsz, c, l) = (ta.shape()[0], ta.shape()[1], ta.shape()[2]);
        if out_l == 0 || out_l > l {
            return Err(Error::Contract(format!(
                "adaptive_avg_pool1d output {out_l} invalid for input {l}"
            )));
        }
        let data = ta.data();
        let mut out = vec![R::ZERO; bsz * c * out_l];
        for b in 0..bsz {
            for ch in 0..c {
                for ox in 0..out_l {
                    let (x0, x1) = pool_span(ox, l, out_l);
                    let mut s = R::ZERO;
                    for x in x0..x1 {
                        s += data[(b * c + ch) * l + x];
                    }
                    out[(b * c + ch) * out_l + ox] = s * R::from_f64(1.0 / (x1 - x0) as f64);
                }
            }
        }
        let value = Tensor::from_vec(&[bsz, c, out_l], out)?;
        Ok(self.record(value, Op::AdaptiveAvgPool1d { out: out_l }, vec![a]))
    }

    // ---- backward ----

    /// Backward pass from a scalar loss. Gradients cover every recorded value
    /// with `requires_grad` reachable from the loss.
    pub fn backward(&self, loss: ValueId) -> Result<Gradients<R>> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let seed = Tensor::full(self.value(loss).shape(), R::ONE);
        self.backward_from(loss, seed)
    }

    /// Backward pass seeded with an explicit output gradient (used to stitch
    /// per-graph tapes to a shared loss tape).
    pub fn backward_from(&self, output: ValueId, seed: Tensor<R>) -> Result<Gradients<R>> {
        if seed.shape() != self.value(output).shape() {
            return Err(Error::Shape {
                op: "backward_from",
                lhs: self.value(output).shape().to_vec(),
                rhs: seed.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor<R>>> = vec![None; self.nodes.len()];
        grads[output] = Some(seed);
        for id in (0..=output).rev() {
            if !self.nodes[id].requires_grad {
                continue;
            }
            let Some(grad) = grads[id].clone() else {
                continue;
            };
            let node = &self.nodes[id];
            let contributions = self.op_backward(node, &grad)?;
            for (pid, pg) in contributions {
                if !self.nodes[pid].requires_grad {
                    continue;
                }
                grads[pid] = Some(match grads[pid].take() {
                    None => pg,
                    Some(existing) => {
                        Tensor::from_vec(existing.shape(), {
                            existing
                                .data()
                                .iter()
                                .zip(pg.data().iter())
                                .map(|(&a, &b)| a + b)
                                .collect()
                        })?
                    }
                });
            }
        }
        Ok(Gradients { grads })
    }

    fn op_backward(&self, node: &Node<R>, grad: &Tensor<R>) -> Result<Vec<(ValueId, Tensor<R>)>> {
        let p = &node.parents;
        let v = |i: usize| self.value(p[i]);
        let out = match &node.op {
            Op::Leaf => vec![],
            Op::Add => vec![(p[0], grad.clone()), (p[1], grad.clone())],
            Op::Sub => vec![(p[0], grad.clone()), (p[1], grad.map(|g| -g))],
            Op::Mul => vec![
                (p[0], zip_map(grad, v(1), |g, b| g * b)),
                (p[1], zip_map(grad, v(0), |g, a| g * a)),
            ],
            Op::ScalarMul(c) => {
                let rc = R::from_f64(*c);
                vec![(p[0], grad.map(|g| g * rc))]
            }
            Op::ScalarAdd(_) => vec![(p[0], grad.clone())],
            Op::BiasAdd => {
                let d = self.value(p[1]).shape()[0];
                let mut db = vec![R::ZERO; d];
                for (i, &g) in grad.data().iter().enumerate() {
                    db[i % d] += g;
                }
                vec![(p[0], grad.clone()), (p[1], Tensor::from_vec(&[d], db)?)]
            }
            Op::MatMul => {
                let (ta, tb) = (v(0), v(1));
                let (m, k) = (ta.shape()[0], ta.shape()[1]);
                let n = tb.shape()[1];
                let (g, a, b) = (grad.data(), ta.data(), tb.data());
                // da[i,p] = Σ_j g[i,j] b[p,j]
                let mut da = vec![R::ZERO; m * k];
                for i in 0..m {
                    for pp in 0..k {
                        let mut s = R::ZERO;
                        let grow = &g[i * n..(i + 1) * n];
                        let brow = &b[pp * n..(pp + 1) * n];
                        for j in 0..n {
                            s += grow[j] * brow[j];
                        }
                        da[i * k + pp] = s;
                    }
                }
                // db[p,j] = Σ_i a[i,p] g[i,j]
                let mut db = vec![R::ZERO; k * n];
                for i in 0..m {
                    let grow = &g[i * n..(i + 1) * n];
                    for pp in 0..k {
                        let av = a[i * k + pp];
                        if av == R::ZERO {
                            continue;
                        }
                        let drow = &mut db[pp * n..(pp + 1) * n];
                        for j in 0..n {
                            drow[j] += av * grow[j];
                        }
                    }
                }
                vec![
                    (p[0], Tensor::from_vec(&[m, k], da)?),
                    (p[1], Tensor::from_vec(&[k, n], db)?),
                ]
            }
            Op::Relu => vec![(
                p[0],
                zip_map(grad, v(0), |g, x| if x > R::ZERO { g } else { R::ZERO }),
            )],
            Op::Sigmoid => vec![(
                p[0],
                zip_map(grad, &node.value, |g, s| g * s * (R::ONE - s)),
            )],
            Op::Log => vec![(p[0], zip_map(grad, v(0), |g, x| g / x))],
            Op::Exp => vec![(p[0], zip_map(grad, &node.value, |g, e| g * e))],
            Op::Concat { axis } => {
                let axis = *axis;
                let mut outs = Vec::with_capacity(p.len());
                let gshape = grad.shape();
                let outer: usize = gshape[..axis].iter().product();
                let inner: usize = gshape[axis + 1..].iter().product();
                let total_axis = gshape[axis];
                let mut offset = 0;
                for &pid in p {
                    let pshape = self.value(pid).shape().to_vec();
                    let alen = pshape[axis];
                    let mut part = Vec::with_capacity(self.value(pid).len());
                    for o in 0..outer {
                        let start = (o * total_axis + offset) * inner;
                        part.extend_from_slice(&grad.data()[start..start + alen * inner]);
                    }
                    outs.push((pid, Tensor::from_vec(&pshape, part)?));
                    offset += alen;
                }
                outs
            }
            Op::SumAxis { axis } => {
                let axis = *axis;
                let pshape = v(0).shape().to_vec();
                let outer: usize = pshape[..axis].iter().product();
                let mid = pshape[axis];
                let inner: usize = pshape[axis + 1..].iter().product();
                let mut dx = vec![R::ZERO; v(0).len()];
                let g = grad.data();
                for o in 0..outer {
                    for m in 0..mid {
                        let base = (o * mid + m) * inner;
                        for i in 0..inner {
                            dx[base + i] = g[o * inner + i];
                        }
                    }
                }
                vec![(p[0], Tensor::from_vec(&pshape, dx)?)]
            }
            Op::SumAll => {
                let g = grad.item();
                vec![(p[0], Tensor::full(v(0).shape(), g))]
            }
            Op::L2Norm => {
                let norm = node.value.item();
                let g = grad.item();
                let dx = if norm == R::ZERO {
                    Tensor::zeros(v(0).shape())
                } else {
                    v(0).map(|x| g * x / norm)
                };
                vec![(p[0], dx)]
            }
            Op::CosinePairs { a_norms, b_norms } => {
                let (ta, tb) = (v(0), v(1));
                let d = *ta.shape().last().unwrap();
                let n = a_norms.len();
                let m = b_norms.len();
                let s = node.value.data();
                let g = grad.data();
                let mut da = vec![0.0f64; n * d];
                let mut db = vec![0.0f64; m * d];
                for i in 0..n {
                    let ar = &ta.data()[i * d..(i + 1) * d];
                    for j in 0..m {
                        let gij = g[i * m + j].to_f64();
                        if gij == 0.0 {
                            continue;
                        }
                        let br = &tb.data()[j * d..(j + 1) * d];
                        let sij = s[i * m + j].to_f64();
                        let (na, nb) = (a_norms[i], b_norms[j]);
                        for t in 0..d {
                            let ahat = ar[t].to_f64() / na;
                            let bhat = br[t].to_f64() / nb;
                            da[i * d + t] += gij * (bhat - sij * ahat) / na;
                            db[j * d + t] += gij * (ahat - sij * bhat) / nb;
                        }
                    }
                }
                vec![
                    (p[0], Tensor::from_f64_slice(ta.shape(), &da)?),
                    (p[1], Tensor::from_f64_slice(tb.shape(), &db)?),
                ]
            }
            Op::Conv2d { pad } => {
                let (ti, tw) = (v(0), v(1));
                let (bsz, c, h, w) = (ti.shape()[0], ti.shape()[1], ti.shape()[2], ti.shape()[3]);
                let (o_ch, kh, kw) = (tw.shape()[0], tw.shape()[2], tw.shape()[3]);
                let (id, wd, g) = (ti.data(), tw.data(), grad.data());
                let mut di = vec![R::ZERO; ti.len()];
                let mut dw = vec![R::ZERO; tw.len()];
                let mut dbias = vec![R::ZERO; o_ch];
                for b in 0..bsz {
                    for oc in 0..o_ch {
                        for y in 0..h {
                            for x in 0..w {
                                let gv = g[((b * o_ch + oc) * h + y) * w + x];
                                if gv == R::ZERO {
                                    continue;
                                }
                                dbias[oc] += gv;
                                for ic in 0..c {
                                    for dy in 0..kh {
                                        let iy = y + dy;
                                        if iy < pad.0 || iy - pad.0 >= h {
                                            continue;
                                        }
                                        let iy = iy - pad.0;
                                        for dx in 0..kw {
                                            let ix = x + dx;
                                            if ix < pad.1 || ix - pad.1 >= w {
                                                continue;
                                            }
                                            let ix = ix - pad.1;
                                            di[((b * c + ic) * h + iy) * w + ix] +=
                                                gv * wd[((oc * c + ic) * kh + dy) * kw + dx];
                                            dw[((oc * c + ic) * kh + dy) * kw + dx] +=
                                                gv * id[((b * c + ic) * h + iy) * w + ix];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                vec![
                    (p[0], Tensor::from_vec(ti.shape(), di)?),
                    (p[1], Tensor::from_vec(tw.shape(), dw)?),
                    (p[2], Tensor::from_vec(&[o_ch], dbias)?),
                ]
            }
            Op::Conv1d { pad } => {
                let (ti, tw) = (v(0), v(1));
                let (bsz, c, l) = (ti.shape()[0], ti.shape()[1], ti.shape()[2]);
                let (o_ch, k) = (tw.shape()[0], tw.shape()[2]);
                let (id, wd, g) = (ti.data(), tw.data(), grad.data());
                let mut di = vec![R::ZERO; ti.len()];
                let mut dw = vec![R::ZERO; tw.len()];
                let mut dbias = vec![R::ZERO; o_ch];
                for b in 0..bsz {
                    for oc in 0..o_ch {
                        for x in 0..l {
                            let gv = g[(b * o_ch + oc) * l + x];
                            if gv == R::ZERO {
                                continue;
                            }
                            dbias[oc] += gv;
                            for ic in 0..c {
                                for dx in 0..k {
                                    let ix = x + dx;
                                    if ix < *pad || ix - pad >= l {
                                        continue;
                                    }
                                    di[(b * c + ic) * l + (ix - pad)] +=
                                        gv * wd[(oc * c + ic) * k + dx];
                                    dw[(oc * c + ic) * k + dx] +=
                                        gv * id[(b * c + ic) * l + (ix - pad)];
                                }
                            }
                        }
                    }
                }
                vec![
                    (p[0], Tensor::from_vec(ti.shape(), di)?),
                    (p[1], Tensor::from_vec(tw.shape(), dw)?),
                    (p[2], Tensor::from_vec(&[o_ch], dbias)?),
                ]
            }
            Op::AdaptiveAvgPool2d { out } => {
                let ti = v(0);
                let (bsz, c, h, w) = (ti.shape()[0], ti.shape()[1], ti.shape()[2], ti.shape()[3]);
                let (oh, ow) = *out;
                let g = grad.data();
                let mut di = vec![R::ZERO; ti.len()];
                for b in 0..bsz {
                    for ch in 0..c {
                        for oy in 0..oh {
                            let (y0, y1) = pool_span(oy, h, oh);
                            for ox in 0..ow {
                                let (x0, x1) = pool_span(ox, w, ow);
                                let gv = g[((b * c + ch) * oh + oy) * ow + ox]
                                    * R::from_f64(1.0 / ((y1 - y0) * (x1 - x0)) as f64);
                                for y in y0..y1 {
                                    for x in x0..x1 {
                                        di[((b * c + ch) * h + y) * w + x] += gv;
                                    }
                                }
                            }
                        }
                    }
                }
                vec![(p[0], Tensor::from_vec(ti.shape(), di)?)]
            }
            Op::AdaptiveAvgPool1d { out } => {
                let ti = v(0);
                let (bsz, c, l) = (ti.shape()[0], ti.shape()[1], ti.shape()[2]);
                let g = grad.data();
                let mut di = vec![R::ZERO; ti.len()];
                for b in 0..bsz {
                    for ch in 0..c {
                        for ox in 0..*out {
                            let (x0, x1) = pool_span(ox, l, *out);
                            let gv =
                                g[(b * c + ch) * out + ox] * R::from_f64(1.0 / (x1 - x0) as f64);
                            for x in x0..x1 {
                                di[(b * c + ch) * l + x] += gv;
                            }
                        }
                    }
                }
                vec![(p[0], Tensor::from_vec(ti.shape(), di)?)]
            }
            Op::Reshape => vec![(p[0], grad.reshape(v(0).shape())?)],
            Op::RowGather { indices } => {
                let ti = v(0);
                let d = ti.shape()[1];
                let mut di = vec![R::ZERO; ti.len()];
                let g = grad.data();
                for (r, &i) in indices.iter().enumerate() {
                    for t in 0..d {
                        di[i * d + t] += g[r * d + t];
                    }
                }
                vec![(p[0], Tensor::from_vec(ti.shape(), di)?)]
            }
            Op::GatedNeighborSum { incoming } => {
                let (th, tg) = (v(0), v(1));
                let d = th.shape()[1];
                let (hd, gd, g) = (th.data(), tg.data(), grad.data());
                let mut dh = vec![R::ZERO; th.len()];
                let mut dgate = vec![R::ZERO; tg.len()];
                for (vtx, list) in incoming.lists.iter().enumerate() {
                    for &(u, e) in list {
                        for c in 0..d {
                            let gv = g[vtx * d + c];
                            dh[u * d + c] += gv * gd[e * d + c];
                            dgate[e * d + c] += gv * hd[u * d + c];
                        }
                    }
                }
                vec![
                    (p[0], Tensor::from_vec(th.shape(), dh)?),
                    (p[1], Tensor::from_vec(tg.shape(), dgate)?),
                ]
            }
            Op::RowSumExact => {
                let ti = v(0);
                let (n, d) = (ti.shape()[0], ti.shape()[1]);
                let g = grad.data();
                let mut di = Vec::with_capacity(n * d);
                for _ in 0..n {
                    di.extend_from_slice(&g[..d]);
                }
                vec![(p[0], Tensor::from_vec(ti.shape(), di)?)]
            }
        };
        Ok(out)
    }
}

/// Pooling input span for output cell `i` (PyTorch-style adaptive pooling).
fn pool_span(i: usize, input: usize, output: usize) -> (usize, usize) {
    let start = i * input / output;
    let end = (i + 1) * input / output;
    (start, end.max(start + 1))
}

fn matmul_raw<R: Real>(a: &[R], b: &[R], m: usize, k: usize, n: usize) -> Vec<R> {
    let mut out = vec![R::ZERO; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == R::ZERO {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
    out
}

fn zip_map<R: Real>(a: &Tensor<R>, b: &Tensor<R>, f: impl Fn(R, R) -> R) -> Tensor<R> {
    debug_assert_eq!(a.shape(), b.shape());
    Tensor::from_vec(
        a.shape(),
        a.data()
            .iter()
            .zip(b.data().iter())
            .map(|(&x, &y)| f(x, y))
            .collect(),
    )
    .expect("zip_map shapes checked")
}

fn same_shape<R: Real>(op: &'static str, a: &Tensor<R>, b: &Tensor<R>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

fn shape_err<R: Real>(op: &'static str, a: &Tensor<R>, b: &Tensor<R>) -> Error {
    Error::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}
