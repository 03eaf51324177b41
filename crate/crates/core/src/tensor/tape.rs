use std::sync::Arc;

use super::array::Tensor;
use super::gemm::{gemm, Trans};
use crate::error::{Error, Result};

/// A linear operator with an explicit adjoint, recorded on the tape as a
/// single node. The imaging operators implement this.
pub trait LinearMap: Send + Sync {
    fn input_len(&self) -> usize;
    fn output_len(&self) -> usize;
    /// Overwrites `output` with `A·input`.
    fn apply(&self, input: &[f64], output: &mut [f64]);
    /// Overwrites `input_grad` with `Aᵀ·output_grad`.
    fn adjoint(&self, output_grad: &[f64], input_grad: &mut [f64]);
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

enum Value<'p> {
    Owned(Tensor),
    Borrowed(&'p Tensor),
}

impl Value<'_> {
    fn get(&self) -> &Tensor {
        match self {
            Value::Owned(t) => t,
            Value::Borrowed(t) => t,
        }
    }
}

enum Op {
    Input,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MatMul(Var, Var),
    Sum(Var),
    Mean(Var),
    RowSums(Var),
    Exp(Var),
    Log(Var),
    Relu(Var),
    Sigmoid(Var),
    Square(Var),
    Scale(Var, f64),
    Shift(Var),
    Clamp(Var, f64, f64),
    Concat { parts: Vec<Var>, axis: usize },
    Narrow { input: Var, axis: usize, start: usize },
    IndexSelect { input: Var, rows: Vec<usize> },
    RepeatRows(Var),
    Reshape(Var),
    Linear { input: Var, maps: Vec<Arc<dyn LinearMap>> },
}

struct Node<'p> {
    value: Value<'p>,
    op: Op,
    requires_grad: bool,
}

/// Records a forward computation for one backward pass.
///
/// Parameters are borrowed for the tape's lifetime, so an optimizer can only
/// mutate them once the tape is dropped.
#[derive(Default)]
pub struct Tape<'p> {
    nodes: Vec<Node<'p>>,
}

/// Result of [`Tape::backward`]: d(loss)/d(node) for every node that
/// requires a gradient and lies upstream of the loss.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Like [`Gradients::wrt`] but a missing gradient is a contract error.
    pub fn expect(&self, v: Var) -> Result<&Tensor> {
        self.wrt(v)
            .ok_or_else(|| Error::contract(format!("no gradient recorded for node {}", v.0)))
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn broadcast_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<Vec<usize>> {
    if a.shape() == b.shape() || b.is_scalar() {
        Ok(a.shape().to_vec())
    } else if a.is_scalar() {
        Ok(b.shape().to_vec())
    } else {
        Err(Error::Shape {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        })
    }
}

fn elementwise(a: &Tensor, b: &Tensor, shape: Vec<usize>, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let n: usize = shape.iter().product();
    let (ad, bd) = (a.data(), b.data());
    let data = if ad.len() == n && bd.len() == n {
        ad.iter().zip(bd).map(|(&x, &y)| f(x, y)).collect()
    } else if ad.len() == n {
        let y = bd[0];
        ad.iter().map(|&x| f(x, y)).collect()
    } else {
        let x = ad[0];
        bd.iter().map(|&y| f(x, y)).collect()
    };
    Tensor::new(shape, data).expect("broadcast shape")
}

fn outer_inner(shape: &[usize], axis: usize) -> (usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, inner)
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        self.nodes[v.0].value.get()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A value that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input, false)
    }

    /// An owned leaf that receives a gradient.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input, true)
    }

    /// A borrowed parameter leaf; no copy of the data is made.
    pub fn param(&mut self, t: &'p Tensor) -> Var {
        self.nodes.push(Node {
            value: Value::Borrowed(t),
            op: Op::Input,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let shape = broadcast_shape("add", ta, tb)?;
        let out = elementwise(ta, tb, shape, |x, y| x + y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let shape = broadcast_shape("sub", ta, tb)?;
        let out = elementwise(ta, tb, shape, |x, y| x - y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let shape = broadcast_shape("mul", ta, tb)?;
        let out = elementwise(ta, tb, shape, |x, y| x * y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    /// `[m,k]·[k,n] → [m,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::Shape {
                op: "matmul",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm(Trans::No, Trans::No, m, k, n, 1.0, ta.data(), tb.data(), 0.0, &mut out);
        let out = Tensor::new(vec![m, n], out)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(&[a]);
        self.push(out, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let out = Tensor::scalar(t.sum() / t.len().max(1) as f64);
        let rg = self.rg(&[a]);
        self.push(out, Op::Mean(a), rg)
    }

    /// `[r, c…] → [r]`: sum of each row.
    pub fn row_sums(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.shape().is_empty() {
            return Err(Error::Shape {
                op: "row_sums",
                lhs: t.shape().to_vec(),
                rhs: vec![],
            });
        }
        let out: Vec<f64> = (0..t.rows()).map(|i| t.row(i).iter().sum()).collect();
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::vector(out), Op::RowSums(a), rg))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out = self.value(a).map(f);
        let rg = self.rg(&[a]);
        self.push(out, op, rg)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, f64::ln, Op::Log(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| c * x, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| x + c, Op::Shift(a))
    }

    /// Gradient flows only where the input lies inside `[lo, hi]`.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.unary(a, |x| x.clamp(lo, hi), Op::Clamp(a, lo, hi))
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::contract("concat of zero tensors"))?;
        let base = self.value(*first).shape().to_vec();
        if axis >= base.len() {
            return Err(Error::Shape {
                op: "concat",
                lhs: base,
                rhs: vec![axis],
            });
        }
        let mut total = 0;
        for p in parts {
            let s = self.value(*p).shape();
            let ok = s.len() == base.len() && s.iter().zip(&base).enumerate().all(|(d, (x, y))| d == axis || x == y);
            if !ok {
                return Err(Error::Shape {
                    op: "concat",
                    lhs: base,
                    rhs: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = total;
        let (outer, inner) = outer_inner(&base, axis);
        let mut data = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for p in parts {
                let t = self.value(*p);
                let chunk = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let out = Tensor::new(shape, data)?;
        let rg = self.rg(parts);
        Ok(self.push(
            out,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Sub-range `[start, start+len)` along `axis`.
    pub fn narrow(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a);
        let s = t.shape().to_vec();
        if axis >= s.len() || start + len > s[axis] {
            return Err(Error::Shape {
                op: "narrow",
                lhs: s,
                rhs: vec![axis, start, len],
            });
        }
        let (outer, inner) = outer_inner(&s, axis);
        let src_chunk = s[axis] * inner;
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * src_chunk + start * inner;
            data.extend_from_slice(&t.data()[base..base + len * inner]);
        }
        let mut shape = s;
        shape[axis] = len;
        let out = Tensor::new(shape, data)?;
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::Narrow { input: a, axis, start }, rg))
    }

    /// Gathers rows (axis 0). Backward scatters into the selected rows only.
    pub fn index_select(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let t = self.value(a);
        let n = t.rows();
        if t.shape().is_empty() {
            return Err(Error::Shape {
                op: "index_select",
                lhs: vec![],
                rhs: vec![rows.len()],
            });
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::Lookup(format!("row {bad} out of range for {n} rows")));
        }
        let w = t.row_len();
        let mut data = Vec::with_capacity(rows.len() * w);
        for &r in rows {
            data.extend_from_slice(t.row(r));
        }
        let mut shape = t.shape().to_vec();
        shape[0] = rows.len();
        let out = Tensor::new(shape, data)?;
        let rg = self.rg(&[a]);
        Ok(self.push(
            out,
            Op::IndexSelect {
                input: a,
                rows: rows.to_vec(),
            },
            rg,
        ))
    }

    /// `[n] → [count, n]` by stacking copies; the explicit stand-in for
    /// row broadcasting (e.g. a bias over a minibatch).
    pub fn repeat_rows(&mut self, a: Var, count: usize) -> Result<Var> {
        let t = self.value(a);
        if t.shape().len() != 1 {
            return Err(Error::Shape {
                op: "repeat_rows",
                lhs: t.shape().to_vec(),
                rhs: vec![count],
            });
        }
        let n = t.len();
        let mut data = Vec::with_capacity(count * n);
        for _ in 0..count {
            data.extend_from_slice(t.data());
        }
        let out = Tensor::new(vec![count, n], data)?;
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::RepeatRows(a), rg))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).clone().reshape(shape)?;
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::Reshape(a), rg))
    }

    /// Applies one linear map per row of a `[rows, in]` input, or a single
    /// shared map to every row (`maps.len() == 1`). A 1-D input is one row.
    pub fn linear_rows(&mut self, a: Var, maps: Vec<Arc<dyn LinearMap>>) -> Result<Var> {
        let t = self.value(a);
        let one_d = t.shape().len() == 1;
        let rows = if one_d { 1 } else { t.rows() };
        let width = if one_d { t.len() } else { t.row_len() };
        let first = maps
            .first()
            .ok_or_else(|| Error::contract("linear_rows needs at least one map"))?;
        if maps.len() != 1 && maps.len() != rows {
            return Err(Error::Shape {
                op: "linear_rows",
                lhs: t.shape().to_vec(),
                rhs: vec![maps.len()],
            });
        }
        let out_len = first.output_len();
        for m in &maps {
            if m.input_len() != width || m.output_len() != out_len {
                return Err(Error::Shape {
                    op: "linear_rows",
                    lhs: t.shape().to_vec(),
                    rhs: vec![m.input_len(), m.output_len()],
                });
            }
        }
        let mut data = vec![0.0; rows * out_len];
        for r in 0..rows {
            let map = &maps[if maps.len() == 1 { 0 } else { r }];
            map.apply(
                &t.data()[r * width..(r + 1) * width],
                &mut data[r * out_len..(r + 1) * out_len],
            );
        }
        let shape = if one_d { vec![out_len] } else { vec![rows, out_len] };
        let out = Tensor::new(shape, data)?;
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::Linear { input: a, maps }, rg))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if !lt.is_scalar() {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lt.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![1.0]);
        }
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                g.filter(|_| self.nodes[i].requires_grad)
                    .map(|g| Tensor::new(self.nodes[i].value.get().shape().to_vec(), g).expect("gradient shape"))
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn acc<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> Option<&'g mut Vec<f64>> {
        if !self.nodes[v.0].requires_grad {
            return None;
        }
        let n = self.value(v).len();
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; n]))
    }

    /// Adds `g` (shaped like the output) into the gradient of a broadcast
    /// operand `v`, reducing to a scalar if `v` was broadcast.
    fn acc_broadcast(&self, grads: &mut [Option<Vec<f64>>], v: Var, g: impl Iterator<Item = f64>) {
        let scalar = self.value(v).is_scalar();
        if let Some(dst) = self.acc(grads, v) {
            if scalar && dst.len() == 1 {
                dst[0] += g.sum::<f64>();
            } else {
                dst.iter_mut().zip(g).for_each(|(d, x)| *d += x);
            }
        }
    }

    fn propagate(&self, node: &Node<'_>, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = node.value.get();
        match &node.op {
            Op::Input => {}
            Op::Add(a, b) => {
                self.acc_broadcast(grads, *a, g.iter().copied());
                self.acc_broadcast(grads, *b, g.iter().copied());
            }
            Op::Sub(a, b) => {
                self.acc_broadcast(grads, *a, g.iter().copied());
                self.acc_broadcast(grads, *b, g.iter().map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let pick = |t: &Tensor, i: usize| if t.is_scalar() { t.data()[0] } else { t.data()[i] };
                self.acc_broadcast(grads, *a, g.iter().enumerate().map(|(i, x)| x * pick(tb, i)));
                self.acc_broadcast(grads, *b, g.iter().enumerate().map(|(i, x)| x * pick(ta, i)));
            }
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                if let Some(da) = self.acc(grads, *a) {
                    gemm(Trans::No, Trans::Yes, m, n, k, 1.0, g, tb.data(), 1.0, da);
                }
                if let Some(db) = self.acc(grads, *b) {
                    gemm(Trans::Yes, Trans::No, k, m, n, 1.0, ta.data(), g, 1.0, db);
                }
            }
            Op::Sum(a) => {
                let n = self.value(*a).len();
                self.acc_broadcast(grads, *a, std::iter::repeat_n(g[0], n));
            }
            Op::Mean(a) => {
                let n = self.value(*a).len();
                let v = g[0] / n.max(1) as f64;
                self.acc_broadcast(grads, *a, std::iter::repeat_n(v, n));
            }
            Op::RowSums(a) => {
                let w = self.value(*a).row_len();
                self.acc_broadcast(grads, *a, g.iter().flat_map(|&x| std::iter::repeat_n(x, w)));
            }
            Op::Exp(a) => {
                self.acc_broadcast(grads, *a, g.iter().zip(out.data()).map(|(x, y)| x * y));
            }
            Op::Log(a) => {
                let ta = self.value(*a);
                self.acc_broadcast(grads, *a, g.iter().zip(ta.data()).map(|(x, y)| x / y));
            }
            Op::Relu(a) => {
                let ta = self.value(*a);
                self.acc_broadcast(
                    grads,
                    *a,
                    g.iter().zip(ta.data()).map(|(x, y)| if *y > 0.0 { *x } else { 0.0 }),
                );
            }
            Op::Sigmoid(a) => {
                self.acc_broadcast(grads, *a, g.iter().zip(out.data()).map(|(x, s)| x * s * (1.0 - s)));
            }
            Op::Square(a) => {
                let ta = self.value(*a);
                self.acc_broadcast(grads, *a, g.iter().zip(ta.data()).map(|(x, y)| 2.0 * x * y));
            }
            Op::Scale(a, c) => {
                self.acc_broadcast(grads, *a, g.iter().map(|x| c * x));
            }
            Op::Shift(a) | Op::Reshape(a) => {
                self.acc_broadcast(grads, *a, g.iter().copied());
            }
            Op::Clamp(a, lo, hi) => {
                let ta = self.value(*a);
                self.acc_broadcast(
                    grads,
                    *a,
                    g.iter()
                        .zip(ta.data())
                        .map(|(x, y)| if (*lo..=*hi).contains(y) { *x } else { 0.0 }),
                );
            }
            Op::Concat { parts, axis } => {
                let (outer, inner) = outer_inner(out.shape(), *axis);
                let out_chunk = out.shape()[*axis] * inner;
                let mut offset = 0;
                for p in parts {
                    let chunk = self.value(*p).shape()[*axis] * inner;
                    if let Some(dst) = self.acc(grads, *p) {
                        for o in 0..outer {
                            let src = &g[o * out_chunk + offset..o * out_chunk + offset + chunk];
                            dst[o * chunk..(o + 1) * chunk]
                                .iter_mut()
                                .zip(src)
                                .for_each(|(d, s)| *d += s);
                        }
                    }
                    offset += chunk;
                }
            }
            Op::Narrow { input, axis, start } => {
                let in_shape = self.value(*input).shape().to_vec();
                let (outer, inner) = outer_inner(&in_shape, *axis);
                let len = out.shape()[*axis];
                if let Some(dst) = self.acc(grads, *input) {
                    let src_chunk = in_shape[*axis] * inner;
                    for o in 0..outer {
                        let base = o * src_chunk + start * inner;
                        let src = &g[o * len * inner..(o + 1) * len * inner];
                        dst[base..base + len * inner]
                            .iter_mut()
                            .zip(src)
                            .for_each(|(d, s)| *d += s);
                    }
                }
            }
            Op::IndexSelect { input, rows } => {
                let w = self.value(*input).row_len();
                if let Some(dst) = self.acc(grads, *input) {
                    for (k, &r) in rows.iter().enumerate() {
                        dst[r * w..(r + 1) * w]
                            .iter_mut()
                            .zip(&g[k * w..(k + 1) * w])
                            .for_each(|(d, s)| *d += s);
                    }
                }
            }
            Op::RepeatRows(a) => {
                let n = self.value(*a).len();
                if let Some(dst) = self.acc(grads, *a) {
                    for row in g.chunks(n) {
                        dst.iter_mut().zip(row).for_each(|(d, s)| *d += s);
                    }
                }
            }
            Op::Linear { input, maps } => {
                let in_w = maps[0].input_len();
                let out_w = maps[0].output_len();
                if let Some(dst) = self.acc(grads, *input) {
                    let mut buf = vec![0.0; in_w];
                    for (r, gr) in g.chunks(out_w).enumerate() {
                        let map = &maps[if maps.len() == 1 { 0 } else { r }];
                        map.adjoint(gr, &mut buf);
                        dst[r * in_w..(r + 1) * in_w]
                            .iter_mut()
                            .zip(&buf)
                            .for_each(|(d, s)| *d += s);
                    }
                }
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let i = tape.constant(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let c = tape.matmul(a, i).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn relu_and_sigmoid_definitions() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![-1.0, 0.0, 2.0]));
        let r = tape.relu(x);
        assert_eq!(tape.value(r).data(), &[0.0, 0.0, 2.0]);
        let z = tape.constant(Tensor::scalar(0.0));
        let s = tape.sigmoid(z);
        assert_eq!(tape.value(s).item().unwrap(), 0.5);
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 3]));
        let err = tape.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
        let c = tape_const(&mut tape, &[3]);
        assert!(tape.add(a, c).is_err());
    }

    fn tape_const(tape: &mut Tape<'_>, shape: &[usize]) -> Var {
        tape.constant(Tensor::zeros(shape))
    }

    #[test]
    fn grad_of_sum_of_squares() {
        let w = Tensor::vector(vec![3.0]);
        let mut tape = Tape::new();
        let v = tape.param(&w);
        let sq = tape.square(v);
        let loss = tape.sum(sq);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.expect(v).unwrap().data(), &[6.0]);
    }

    #[test]
    fn grad_of_sigmoid_at_zero() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::scalar(0.0));
        let x = tape.constant(Tensor::scalar(1.0));
        let wx = tape.mul(w, x).unwrap();
        let s = tape.sigmoid(wx);
        let g = tape.backward(s).unwrap();
        assert!((g.expect(w).unwrap().item().unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn backward_of_sum_is_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![2, 3, 4], (0..24).map(f64::from).collect()).unwrap());
        let s = tape.sum(x);
        let g = tape.backward(s).unwrap();
        let gx = g.expect(x).unwrap();
        assert_eq!(gx.shape(), &[2, 3, 4]);
        assert!(gx.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[3]));
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::vector(vec![1.0, 2.0]));
        let w = tape.leaf(Tensor::vector(vec![0.5, 0.5]));
        let p = tape.mul(c, w).unwrap();
        let l = tape.sum(p);
        let g = tape.backward(l).unwrap();
        assert!(g.wrt(c).is_none());
        assert_eq!(g.expect(w).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn index_select_scatters_to_selected_rows_only() {
        let mut tape = Tape::new();
        let t = tape.leaf(Tensor::matrix(4, 2, (0..8).map(f64::from).collect()).unwrap());
        let sel = tape.index_select(t, &[3, 3, 1]).unwrap();
        assert_eq!(tape.value(sel).data(), &[6.0, 7.0, 6.0, 7.0, 2.0, 3.0]);
        let l = tape.sum(sel);
        let g = tape.backward(l).unwrap();
        assert_eq!(g.expect(t).unwrap().data(), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
        assert!(matches!(tape.index_select(t, &[4]), Err(Error::Lookup(_))));
    }

    #[test]
    fn concat_and_narrow_round_trip() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let b = tape.leaf(Tensor::matrix(2, 1, vec![5.0, 6.0]).unwrap());
        let c = tape.concat(&[a, b], 1).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        let back = tape.narrow(c, 1, 2, 1).unwrap();
        assert_eq!(tape.value(back).data(), &[5.0, 6.0]);
        let l = tape.sum(back);
        let g = tape.backward(l).unwrap();
        assert_eq!(g.expect(b).unwrap().data(), &[1.0, 1.0]);
        assert_eq!(g.expect(a).unwrap().data(), &[0.0; 4]);
    }
}
