use super::{matmul_into, transpose, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EwiseKind {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
}

/// Which operand (if any) is a vector broadcast along the last axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    None,
    Lhs,
    Rhs,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul {
        a: Var,
        b: Var,
        m: usize,
        n: usize,
        p: usize,
    },
    Ewise {
        kind: EwiseKind,
        a: Var,
        b: Var,
        bcast: Broadcast,
    },
    Act {
        kind: Activation,
        x: Var,
    },
    Softmax {
        x: Var,
        outer: usize,
        n: usize,
        inner: usize,
    },
    Concat {
        inputs: Vec<Var>,
        outer: usize,
        /// Per-input chunk length (extent along axis times inner size).
        chunks: Vec<usize>,
    },
    Stack {
        inputs: Vec<Var>,
    },
    MaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    Transpose {
        x: Var,
        rows: usize,
        cols: usize,
    },
    Affine {
        x: Var,
        scale: f64,
    },
    Sum {
        x: Var,
    },
    Mean {
        x: Var,
    },
    SliceCols {
        x: Var,
        cols: usize,
        start: usize,
        end: usize,
    },
    SliceRows {
        x: Var,
        cols: usize,
        start: usize,
    },
    Reshape {
        x: Var,
    },
    LnClamped {
        x: Var,
        floor: f64,
    },
    Gather {
        x: Var,
        cols: usize,
        index: Vec<usize>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Tensor>,
}

/// Ordered record of executed operations.
///
/// Nodes are appended as operations execute, so every operation's inputs
/// precede it and a reverse scan is a valid topological order.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Records a leaf that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Records a trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let (m, n, vector_lhs) = match sa.as_slice() {
            [n] => (1, *n, true),
            [m, n] => (*m, *n, false),
            _ => return Err(Error::dim("matmul", &sa, &sb)),
        };
        let p = match sb.as_slice() {
            [k, p] if *k == n => *p,
            _ => return Err(Error::dim("matmul", &sa, &sb)),
        };
        let mut out = vec![0.0; m * p];
        matmul_into(self.value(a).data(), self.value(b).data(), &mut out, m, n, p);
        let shape = if vector_lhs { vec![p] } else { vec![m, p] };
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::from_parts(shape, out), Op::MatMul { a, b, m, n, p }, rg))
    }

    pub fn ewise(&mut self, kind: EwiseKind, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let bcast = if sa == sb {
            Broadcast::None
        } else if sb.len() == 1 && sa.len() >= 2 && sa.last() == sb.last() {
            Broadcast::Rhs
        } else if sa.len() == 1 && sb.len() >= 2 && sa.last() == sb.last() {
            Broadcast::Lhs
        } else {
            return Err(Error::dim("ewise", sa, sb));
        };
        let (va, vb) = (self.value(a), self.value(b));
        let f = match kind {
            EwiseKind::Add => |x: f64, y: f64| x + y,
            EwiseKind::Sub => |x: f64, y: f64| x - y,
            EwiseKind::Mul => |x: f64, y: f64| x * y,
        };
        let (shape, data) = match bcast {
            Broadcast::None => (
                va.shape().to_vec(),
                va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect(),
            ),
            Broadcast::Rhs => {
                let c = vb.len();
                (
                    va.shape().to_vec(),
                    va.data()
                        .iter()
                        .enumerate()
                        .map(|(i, &x)| f(x, vb.data()[i % c]))
                        .collect(),
                )
            }
            Broadcast::Lhs => {
                let c = va.len();
                (
                    vb.shape().to_vec(),
                    vb.data()
                        .iter()
                        .enumerate()
                        .map(|(i, &y)| f(va.data()[i % c], y))
                        .collect(),
                )
            }
        };
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::from_parts(shape, data), Op::Ewise { kind, a, b, bcast }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.ewise(EwiseKind::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.ewise(EwiseKind::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.ewise(EwiseKind::Mul, a, b)
    }

    pub fn activation(&mut self, kind: Activation, x: Var) -> Var {
        let out = match kind {
            Activation::Sigmoid => self.value(x).map(sigmoid),
            Activation::Tanh => self.value(x).map(f64::tanh),
            Activation::Relu => self.value(x).map(|v| v.max(0.0)),
        };
        let rg = self.rg(x);
        self.push(out, Op::Act { kind, x }, rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.activation(Activation::Sigmoid, x)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.activation(Activation::Tanh, x)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.activation(Activation::Relu, x)
    }

    /// Softmax along `axis`, stabilized by subtracting the per-slice maximum.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let (outer, n, inner) = axis_split(&shape, axis)
            .ok_or_else(|| Error::Domain(format!("softmax axis {axis} for shape {shape:?}")))?;
        let src = self.value(x).data();
        let mut out = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let idx = |j: usize| o * n * inner + j * inner + i;
                let max = (0..n).map(|j| src[idx(j)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for j in 0..n {
                    let e = (src[idx(j)] - max).exp();
                    out[idx(j)] = e;
                    total += e;
                }
                for j in 0..n {
                    out[idx(j)] /= total;
                }
            }
        }
        let rg = self.rg(x);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Softmax { x, outer, n, inner }, rg))
    }

    /// Softmax over the last axis where entries with `keep[j] == false` are
    /// treated as −∞ and receive exactly zero weight.
    pub fn masked_softmax(&mut self, x: Var, keep: &[bool]) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let n = *shape.last().unwrap_or(&1);
        if keep.len() != n {
            return Err(Error::dim("masked_softmax", &shape, &[keep.len()]));
        }
        let src = self.value(x).data();
        let mut out = vec![0.0; src.len()];
        for (row_in, row_out) in src.chunks(n).zip(out.chunks_mut(n)) {
            let max = row_in
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(&v, _)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                continue;
            }
            let mut total = 0.0;
            for j in 0..n {
                if keep[j] {
                    row_out[j] = (row_in[j] - max).exp();
                    total += row_out[j];
                }
            }
            for v in row_out.iter_mut() {
                *v /= total;
            }
        }
        let rg = self.rg(x);
        let outer = src.len() / n;
        // Masked entries are exactly 0 in the output, so the plain softmax
        // backward rule routes no gradient to them.
        Ok(self.push(
            Tensor::from_parts(shape, out),
            Op::Softmax { x, outer, n, inner: 1 },
            rg,
        ))
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::Domain(format!("concat axis {axis} for shape {base:?}")));
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut extent = 0;
        let mut chunks = Vec::with_capacity(inputs.len());
        for &v in inputs {
            let s = self.shape(v);
            let compatible =
                s.len() == base.len() && s.iter().zip(&base).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::dim("concat", &base, s));
            }
            extent += s[axis];
            chunks.push(s[axis] * inner);
        }
        let total: usize = chunks.iter().sum();
        let mut data = Vec::with_capacity(outer * total);
        for o in 0..outer {
            for (&v, &c) in inputs.iter().zip(&chunks) {
                data.extend_from_slice(&self.value(v).data()[o * c..(o + 1) * c]);
            }
        }
        let mut shape = base;
        shape[axis] = extent;
        let rg = inputs.iter().any(|&v| self.rg(v));
        Ok(self.push(
            Tensor::from_parts(shape, data),
            Op::Concat {
                inputs: inputs.to_vec(),
                outer,
                chunks,
            },
            rg,
        ))
    }

    /// Stacks equal-length vectors as the rows of a matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Contract("stack of zero tensors".into()))?;
        let s = self.shape(*first).to_vec();
        if s.len() != 1 {
            return Err(Error::dim("stack", &s, &[]));
        }
        let mut data = Vec::with_capacity(rows.len() * s[0]);
        for &r in rows {
            if self.shape(r) != s.as_slice() {
                return Err(Error::dim("stack", &s, self.shape(r)));
            }
            data.extend_from_slice(self.value(r).data());
        }
        let rg = rows.iter().any(|&v| self.rg(v));
        Ok(self.push(
            Tensor::from_parts(vec![rows.len(), s[0]], data),
            Op::Stack { inputs: rows.to_vec() },
            rg,
        ))
    }

    /// Column-wise maximum over the rows of an `l×d` matrix.
    ///
    /// Only rows with `keep[i] == true` take part when a mask is given. Ties
    /// resolve to the lowest row index. Returns the pooled `[d]` vector and
    /// the winning row for each column.
    pub fn max_pool(&mut self, x: Var, keep: Option<&[bool]>) -> Result<(Var, Vec<usize>)> {
        let shape = self.shape(x).to_vec();
        let (l, d) = match shape.as_slice() {
            [l, d] => (*l, *d),
            _ => return Err(Error::dim("max_pool", &shape, &[])),
        };
        if let Some(k) = keep {
            if k.len() != l {
                return Err(Error::dim("max_pool", &shape, &[k.len()]));
            }
        }
        let active = |i: usize| keep.is_none_or(|k| k[i]);
        if !(0..l).any(active) {
            return Err(Error::Domain("max_pool over an empty (fully masked) axis".into()));
        }
        let src = self.value(x).data();
        let mut values = vec![f64::NEG_INFINITY; d];
        let mut argmax = vec![usize::MAX; d];
        for i in (0..l).filter(|&i| active(i)) {
            for j in 0..d {
                let v = src[i * d + j];
                if argmax[j] == usize::MAX || v > values[j] {
                    values[j] = v;
                    argmax[j] = i;
                }
            }
        }
        let rg = self.rg(x);
        let out = self.push(
            Tensor::from_parts(vec![d], values),
            Op::MaxPool {
                x,
                argmax: argmax.clone(),
            },
            rg,
        );
        Ok((out, argmax))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let (rows, cols) = match shape.as_slice() {
            [r, c] => (*r, *c),
            _ => return Err(Error::dim("transpose", &shape, &[])),
        };
        let data = transpose(self.value(x).data(), rows, cols);
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::from_parts(vec![cols, rows], data),
            Op::Transpose { x, rows, cols },
            rg,
        ))
    }

    /// `scale · x + shift`, element-wise.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let out = self.value(x).map(|v| scale * v + shift);
        let rg = self.rg(x);
        self.push(out, Op::Affine { x, scale }, rg)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.affine(x, c, 0.0)
    }

    /// `1 − x`, element-wise.
    pub fn one_minus(&mut self, x: Var) -> Var {
        self.affine(x, -1.0, 1.0)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum { x }, rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let m = v.data().iter().sum::<f64>() / v.len() as f64;
        let rg = self.rg(x);
        self.push(Tensor::scalar(m), Op::Mean { x }, rg)
    }

    /// Columns `start..end` of the last axis (vectors or matrices).
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let cols = *shape.last().unwrap_or(&1);
        if shape.is_empty() || shape.len() > 2 || start >= end || end > cols {
            return Err(Error::dim("slice_cols", &shape, &[start, end]));
        }
        let width = end - start;
        let data: Vec<f64> = self
            .value(x)
            .data()
            .chunks(cols)
            .flat_map(|row| row[start..end].iter().copied())
            .collect();
        let mut out_shape = shape;
        *out_shape.last_mut().unwrap() = width;
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::from_parts(out_shape, data),
            Op::SliceCols { x, cols, start, end },
            rg,
        ))
    }

    /// Row `i` of a matrix as a vector.
    pub fn row(&mut self, x: Var, i: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        match shape.as_slice() {
            [r, c] if i < *r => {
                let data = self.value(x).data()[i * c..(i + 1) * c].to_vec();
                let rg = self.rg(x);
                Ok(self.push(
                    Tensor::from_parts(vec![*c], data),
                    Op::SliceRows { x, cols: *c, start: i },
                    rg,
                ))
            }
            _ => Err(Error::dim("row", &shape, &[i])),
        }
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).reshape(shape)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Reshape { x }, rg))
    }

    /// `ln(max(x, floor))`, element-wise. Gradient is zero where clamped.
    /// NaN inputs stay NaN.
    pub fn ln_clamped(&mut self, x: Var, floor: f64) -> Var {
        let out = self.value(x).map(|v| if v.is_nan() { v } else { v.max(floor).ln() });
        let rg = self.rg(x);
        self.push(out, Op::LnClamped { x, floor }, rg)
    }

    /// Picks `x[b, index[b]]` from each row of a `B×C` matrix.
    pub fn gather(&mut self, x: Var, index: &[usize]) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let (rows, cols) = match shape.as_slice() {
            [r, c] => (*r, *c),
            _ => return Err(Error::dim("gather", &shape, &[index.len()])),
        };
        if index.len() != rows || index.iter().any(|&i| i >= cols) {
            return Err(Error::dim("gather", &shape, &[index.len()]));
        }
        let src = self.value(x).data();
        let data = index.iter().enumerate().map(|(b, &i)| src[b * cols + i]).collect();
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::from_parts(vec![rows], data),
            Op::Gather {
                x,
                cols,
                index: index.to_vec(),
            },
            rg,
        ))
    }

    /// Propagates d(loss)/d(node) back through the tape and adds the result
    /// into every trainable leaf's gradient slot.
    ///
    /// Repeated calls accumulate; use [`Tape::zero_grad`] to reset.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let lv = &self.nodes[loss.0].value;
        if lv.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                grads[id] = Some(g);
                continue;
            }
            self.backward_node(id, &g, &mut grads);
        }

        for (id, g) in grads.into_iter().enumerate() {
            let Some(g) = g else { continue };
            let node = &mut self.nodes[id];
            if !(node.requires_grad && matches!(node.op, Op::Leaf)) {
                continue;
            }
            match &mut node.grad {
                Some(acc) => {
                    for (a, v) in acc.data_mut().iter_mut().zip(&g) {
                        *a += v;
                    }
                }
                None => node.grad = Some(Tensor::from_parts(node.value.shape().to_vec(), g)),
            }
        }
        Ok(())
    }

    fn backward_node(&self, id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[id];
        let out = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b, m, n, p } => {
                let (m, n, p) = (*m, *n, *p);
                if self.rg(*a) {
                    // dA = G · Bᵀ
                    let bt = transpose(self.value(*b).data(), n, p);
                    let mut da = vec![0.0; m * n];
                    matmul_into(g, &bt, &mut da, m, p, n);
                    accumulate(grads, *a, &da);
                }
                if self.rg(*b) {
                    // dB = Aᵀ · G
                    let at = transpose(self.value(*a).data(), m, n);
                    let mut db = vec![0.0; n * p];
                    matmul_into(&at, g, &mut db, n, m, p);
                    accumulate(grads, *b, &db);
                }
            }
            Op::Ewise { kind, a, b, bcast } => {
                let va = self.value(*a).data();
                let vb = self.value(*b).data();
                let (ca, cb) = (va.len(), vb.len());
                // Local derivative of the output w.r.t. each operand at flat index i.
                let idx_a = |i: usize| if *bcast == Broadcast::Lhs { i % ca } else { i };
                let idx_b = |i: usize| if *bcast == Broadcast::Rhs { i % cb } else { i };
                if self.rg(*a) {
                    let mut da = vec![0.0; ca];
                    for (i, &gi) in g.iter().enumerate() {
                        let d = match kind {
                            EwiseKind::Add | EwiseKind::Sub => 1.0,
                            EwiseKind::Mul => vb[idx_b(i)],
                        };
                        da[idx_a(i)] += gi * d;
                    }
                    accumulate(grads, *a, &da);
                }
                if self.rg(*b) {
                    let mut db = vec![0.0; cb];
                    for (i, &gi) in g.iter().enumerate() {
                        let d = match kind {
                            EwiseKind::Add => 1.0,
                            EwiseKind::Sub => -1.0,
                            EwiseKind::Mul => va[idx_a(i)],
                        };
                        db[idx_b(i)] += gi * d;
                    }
                    accumulate(grads, *b, &db);
                }
            }
            Op::Act { kind, x } => {
                let xin = self.value(*x).data();
                let dx: Vec<f64> = match kind {
                    Activation::Sigmoid => g.iter().zip(out).map(|(gi, y)| gi * y * (1.0 - y)).collect(),
                    Activation::Tanh => g.iter().zip(out).map(|(gi, y)| gi * (1.0 - y * y)).collect(),
                    Activation::Relu => g
                        .iter()
                        .zip(xin)
                        .map(|(gi, &v)| if v > 0.0 { *gi } else { 0.0 })
                        .collect(),
                };
                accumulate(grads, *x, &dx);
            }
            Op::Softmax { x, outer, n, inner } => {
                let (outer, n, inner) = (*outer, *n, *inner);
                let mut dx = vec![0.0; out.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let idx = |j: usize| o * n * inner + j * inner + i;
                        let dot: f64 = (0..n).map(|j| g[idx(j)] * out[idx(j)]).sum();
                        for j in 0..n {
                            dx[idx(j)] = out[idx(j)] * (g[idx(j)] - dot);
                        }
                    }
                }
                accumulate(grads, *x, &dx);
            }
            Op::Concat { inputs, outer, chunks } => {
                let total: usize = chunks.iter().sum();
                let mut offset = 0;
                for (&v, &c) in inputs.iter().zip(chunks) {
                    if self.rg(v) {
                        let mut dv = Vec::with_capacity(outer * c);
                        for o in 0..*outer {
                            let start = o * total + offset;
                            dv.extend_from_slice(&g[start..start + c]);
                        }
                        accumulate(grads, v, &dv);
                    }
                    offset += c;
                }
            }
            Op::Stack { inputs } => {
                let width = g.len() / inputs.len();
                for (r, &v) in inputs.iter().enumerate() {
                    if self.rg(v) {
                        accumulate(grads, v, &g[r * width..(r + 1) * width]);
                    }
                }
            }
            Op::MaxPool { x, argmax } => {
                let d = argmax.len();
                let mut dx = vec![0.0; self.value(*x).len()];
                for (j, &row) in argmax.iter().enumerate() {
                    dx[row * d + j] += g[j];
                }
                accumulate(grads, *x, &dx);
            }
            Op::Transpose { x, rows, cols } => {
                // g has shape cols×rows
                let dx = transpose(g, *cols, *rows);
                accumulate(grads, *x, &dx);
            }
            Op::Affine { x, scale } => {
                let dx: Vec<f64> = g.iter().map(|gi| gi * scale).collect();
                accumulate(grads, *x, &dx);
            }
            Op::Sum { x } => {
                let dx = vec![g[0]; self.value(*x).len()];
                accumulate(grads, *x, &dx);
            }
            Op::Mean { x } => {
                let n = self.value(*x).len();
                let dx = vec![g[0] / n as f64; n];
                accumulate(grads, *x, &dx);
            }
            Op::SliceCols { x, cols, start, end } => {
                let width = end - start;
                let mut dx = vec![0.0; self.value(*x).len()];
                for (r, grow) in g.chunks(width).enumerate() {
                    dx[r * cols + start..r * cols + end].copy_from_slice(grow);
                }
                accumulate(grads, *x, &dx);
            }
            Op::SliceRows { x, cols, start } => {
                let mut dx = vec![0.0; self.value(*x).len()];
                let begin = start * cols;
                dx[begin..begin + g.len()].copy_from_slice(g);
                accumulate(grads, *x, &dx);
            }
            Op::Reshape { x } => accumulate(grads, *x, g),
            Op::LnClamped { x, floor } => {
                let xin = self.value(*x).data();
                let dx: Vec<f64> = g
                    .iter()
                    .zip(xin)
                    .map(|(gi, &v)| if v > *floor || v.is_nan() { gi / v } else { 0.0 })
                    .collect();
                accumulate(grads, *x, &dx);
            }
            Op::Gather { x, cols, index } => {
                let mut dx = vec![0.0; self.value(*x).len()];
                for (b, &i) in index.iter().enumerate() {
                    dx[b * cols + i] += g[b];
                }
                accumulate(grads, *x, &dx);
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, delta: &[f64]) {
    match &mut grads[v.0] {
        Some(acc) => {
            for (a, d) in acc.iter_mut().zip(delta) {
                *a += d;
            }
        }
        slot @ None => *slot = Some(delta.to_vec()),
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn axis_split(shape: &[usize], axis: usize) -> Option<(usize, usize, usize)> {
    if shape.is_empty() {
        return (axis == 0).then_some((1, 1, 1));
    }
    if axis >= shape.len() {
        return None;
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    Some((outer, shape[axis], inner))
}
