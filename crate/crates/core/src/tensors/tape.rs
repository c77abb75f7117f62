//! Wengert tape for reverse-mode differentiation.
//!
//! Every op appends one node; node indices are therefore a topological order
//! and `backward` is a single reverse sweep. Parameter leaves borrow their
//! values from a [`ParamStore`] and are deduplicated, so each parameter is
//! read at most once per tape.

use std::borrow::Cow;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensors::tensor::{ParamId, ParamStore, Tensor};

/// Node handle on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<S> {
    Leaf,
    Param,
    MatMul { a: Var, b: Var, batch: usize, transpose_b: bool },
    Add(Var, Var),
    Mul(Var, Var),
    AddBias { x: Var, bias: Var },
    Scale { x: Var, factor: S },
    ScaleBy { x: Var, weights: Var, index: usize },
    Relu(Var),
    Softmax(Var),
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Vec<S>, inv_std: Vec<S> },
    CrossEntropy { logits: Var, targets: Vec<usize>, pad_id: usize, probs: Vec<S>, count: usize },
    Gather { table: Var, ids: Vec<usize> },
    SliceCols { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    Sum(Var),
}

struct Node<'p, S: Clone> {
    shape: Vec<usize>,
    value: Cow<'p, [S]>,
    op: Op<S>,
    requires_grad: bool,
}

impl<S: Clone> Node<'_, S> {
    fn cols(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    fn rows(&self) -> usize {
        self.value.len() / self.cols().max(1)
    }
}

/// Records a forward computation for later differentiation.
pub struct Tape<'p, S: Scalar> {
    store: Option<&'p ParamStore<S>>,
    nodes: Vec<Node<'p, S>>,
    params: BTreeMap<ParamId, Var>,
}

impl<'p, S: Scalar> Tape<'p, S> {
    pub fn new(store: &'p ParamStore<S>) -> Self {
        Self { store: Some(store), nodes: Vec::new(), params: BTreeMap::new() }
    }

    /// A tape with no parameter store; only [`Tape::leaf`] inputs are available.
    pub fn detached() -> Self {
        Self { store: None, nodes: Vec::new(), params: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every node recorded at or after position `len`. Vars from the
    /// dropped region must not be used afterwards.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
        self.params.retain(|_, v| v.0 < len);
    }

    pub fn value(&self, v: Var) -> &[S] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn tensor(&self, v: Var) -> Tensor<S> {
        let n = &self.nodes[v.0];
        Tensor::new(n.shape.clone(), n.value.to_vec()).expect("node shape is consistent")
    }

    /// Parameters read so far, in id order.
    pub fn touched_params(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.params.keys().copied()
    }

    fn push(&mut self, op_name: &'static str, shape: Vec<usize>, value: Vec<S>, op: Op<S>) -> Result<Var> {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: op_name });
        }
        let requires_grad = match &op {
            Op::Leaf => false,
            Op::Param => true,
            Op::MatMul { a, b, .. } | Op::Add(a, b) | Op::Mul(a, b) => self.rg(*a) || self.rg(*b),
            Op::AddBias { x, bias } => self.rg(*x) || self.rg(*bias),
            Op::ScaleBy { x, weights, .. } => self.rg(*x) || self.rg(*weights),
            Op::LayerNorm { x, gain, bias, .. } => self.rg(*x) || self.rg(*gain) || self.rg(*bias),
            Op::Scale { x, .. } | Op::Relu(x) | Op::Softmax(x) | Op::SliceCols { x, .. } | Op::Sum(x) => {
                self.rg(*x)
            }
            Op::CrossEntropy { logits, .. } => self.rg(*logits),
            Op::Gather { table, .. } => self.rg(*table),
            Op::ConcatCols(parts) => parts.iter().any(|p| self.rg(*p)),
        };
        self.nodes.push(Node { shape, value: Cow::Owned(value), op, requires_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Constant input. With `requires_grad` its gradient is reported by
    /// [`Gradients::wrt`].
    pub fn leaf(&mut self, t: &Tensor<S>, requires_grad: bool) -> Result<Var> {
        let v = self.push("leaf", t.shape().to_vec(), t.data().to_vec(), Op::Leaf)?;
        self.nodes[v.0].requires_grad = requires_grad;
        Ok(v)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let store = self.store.expect("param() on a detached tape");
        let value = store.value(id);
        self.nodes.push(Node {
            shape: value.shape().to_vec(),
            value: Cow::Borrowed(value.data()),
            op: Op::Param,
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.params.insert(id, v);
        v
    }

    fn mm(&mut self, a: Var, b: Var, batch: usize, transpose_b: bool) -> Result<Var> {
        let (na, nb) = (&self.nodes[a.0], &self.nodes[b.0]);
        if na.shape.len() != 2 || nb.shape.len() != 2 {
            return Err(Error::shape("matmul", "operands must be rank 2"));
        }
        let (ra, kk) = (na.shape[0], na.shape[1]);
        let (rb, cb) = (nb.shape[0], nb.shape[1]);
        if batch == 0 || ra % batch != 0 || rb % batch != 0 {
            return Err(Error::shape("matmul", format!("batch {batch} does not divide rows {ra}/{rb}")));
        }
        let m = ra / batch;
        let (n, inner_b) = if transpose_b { (rb / batch, cb) } else { (cb, rb / batch) };
        if inner_b != kk {
            return Err(Error::shape(
                "matmul",
                format!("inner extents differ: {:?} x {:?}{}", na.shape, nb.shape, if transpose_b { "ᵀ" } else { "" }),
            ));
        }
        let (av, bv) = (&na.value, &nb.value);
        let mut out = vec![S::zero(); batch * m * n];
        for bi in 0..batch {
            for i in 0..m {
                let arow = &av[(bi * m + i) * kk..(bi * m + i + 1) * kk];
                let orow = &mut out[(bi * m + i) * n..(bi * m + i + 1) * n];
                if transpose_b {
                    for (j, o) in orow.iter_mut().enumerate() {
                        let brow = &bv[(bi * n + j) * kk..(bi * n + j + 1) * kk];
                        *o = dot(arow, brow);
                    }
                } else {
                    for (p, &x) in arow.iter().enumerate() {
                        let brow = &bv[(bi * kk + p) * n..(bi * kk + p + 1) * n];
                        axpy(orow, x, brow);
                    }
                }
            }
        }
        self.push("matmul", vec![batch * m, n], out, Op::MatMul { a, b, batch, transpose_b })
    }

    /// `a[m×k] · b[k×n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.mm(a, b, 1, false)
    }

    /// `a[m×k] · b[n×k]ᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        self.mm(a, b, 1, true)
    }

    /// Block-wise product: rows of `a` and `b` are split into `batch` equal
    /// blocks and block `i` of `a` multiplies block `i` of `b`.
    pub fn batched_matmul(&mut self, a: Var, b: Var, batch: usize) -> Result<Var> {
        self.mm(a, b, batch, false)
    }

    pub fn batched_matmul_nt(&mut self, a: Var, b: Var, batch: usize) -> Result<Var> {
        self.mm(a, b, batch, true)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.nodes[a.0].shape, self.nodes[b.0].shape),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = zip_map(&self.nodes[a.0].value, &self.nodes[b.0].value, |x, y| x + y);
        self.push("add", self.nodes[a.0].shape.clone(), out, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = zip_map(&self.nodes[a.0].value, &self.nodes[b.0].value, |x, y| x * y);
        self.push("mul", self.nodes[a.0].shape.clone(), out, Op::Mul(a, b))
    }

    /// Adds a `[d]` bias to every row of `x[..×d]`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (nx, nb) = (&self.nodes[x.0], &self.nodes[bias.0]);
        let d = nx.cols();
        if nb.value.len() != d {
            return Err(Error::shape("add_bias", format!("bias {:?} for rows of width {d}", nb.shape)));
        }
        let mut out = nx.value.to_vec();
        for row in out.chunks_mut(d) {
            row.iter_mut().zip(nb.value.iter()).for_each(|(o, &b)| *o += b);
        }
        self.push("add_bias", nx.shape.clone(), out, Op::AddBias { x, bias })
    }

    pub fn scale(&mut self, x: Var, factor: S) -> Result<Var> {
        let out = self.nodes[x.0].value.iter().map(|&v| v * factor).collect();
        self.push("scale", self.nodes[x.0].shape.clone(), out, Op::Scale { x, factor })
    }

    /// Multiplies `x` by the single element `weights[index]`.
    pub fn scale_by(&mut self, x: Var, weights: Var, index: usize) -> Result<Var> {
        let w = *self.nodes[weights.0]
            .value
            .get(index)
            .ok_or_else(|| Error::shape("scale_by", format!("index {index} out of range")))?;
        let out = self.nodes[x.0].value.iter().map(|&v| v * w).collect();
        self.push("scale_by", self.nodes[x.0].shape.clone(), out, Op::ScaleBy { x, weights, index })
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.nodes[x.0].value.iter().map(|&v| v.max(S::zero())).collect();
        self.push("relu", self.nodes[x.0].shape.clone(), out, Op::Relu(x))
    }

    /// Softmax over the last axis, stabilised by max subtraction.
    pub fn softmax_lastdim(&mut self, x: Var) -> Result<Var> {
        self.softmax_impl(x, None)
    }

    /// Softmax over the last axis where `allowed[i] == false` entries get zero
    /// probability. A row with no allowed entry is a contract error.
    pub fn masked_softmax(&mut self, x: Var, allowed: &[bool]) -> Result<Var> {
        if allowed.len() != self.nodes[x.0].value.len() {
            return Err(Error::shape("masked_softmax", "mask size differs from input"));
        }
        self.softmax_impl(x, Some(allowed))
    }

    fn softmax_impl(&mut self, x: Var, allowed: Option<&[bool]>) -> Result<Var> {
        let node = &self.nodes[x.0];
        let d = node.cols();
        let mut out = vec![S::zero(); node.value.len()];
        for (r, (row, orow)) in node.value.chunks(d).zip(out.chunks_mut(d)).enumerate() {
            let ok = |j: usize| allowed.map_or(true, |m| m[r * d + j]);
            let mut max = S::neg_infinity();
            for (j, &v) in row.iter().enumerate() {
                if ok(j) && v > max {
                    max = v;
                }
            }
            if max == S::neg_infinity() {
                return Err(Error::Contract(format!("softmax row {r} is fully masked")));
            }
            let mut total = S::zero();
            for (j, (o, &v)) in orow.iter_mut().zip(row).enumerate() {
                if ok(j) {
                    *o = (v - max).exp();
                    total += *o;
                }
            }
            orow.iter_mut().for_each(|o| *o /= total);
        }
        self.push("softmax", node.shape.clone(), out, Op::Softmax(x))
    }

    /// Standardise each last-axis row then apply `gain` and `bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: S) -> Result<Var> {
        let (nx, ng, nb) = (&self.nodes[x.0], &self.nodes[gain.0], &self.nodes[bias.0]);
        let d = nx.cols();
        if ng.value.len() != d || nb.value.len() != d {
            return Err(Error::shape("layer_norm", format!("affine params must have {d} entries")));
        }
        let dn = S::of_usize(d);
        let mut xhat = vec![S::zero(); nx.value.len()];
        let mut inv_std = Vec::with_capacity(nx.rows());
        let mut out = vec![S::zero(); nx.value.len()];
        for ((row, hrow), orow) in nx.value.chunks(d).zip(xhat.chunks_mut(d)).zip(out.chunks_mut(d)) {
            let mean = row.iter().copied().sum::<S>() / dn;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / dn;
            let is = S::one() / (var + eps).sqrt();
            inv_std.push(is);
            for j in 0..d {
                hrow[j] = (row[j] - mean) * is;
                orow[j] = hrow[j] * ng.value[j] + nb.value[j];
            }
        }
        self.push(
            "layer_norm",
            nx.shape.clone(),
            out,
            Op::LayerNorm { x, gain, bias, xhat, inv_std },
        )
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// `logits[T×V]`, skipping positions whose target is `pad_id`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], pad_id: usize) -> Result<Var> {
        let node = &self.nodes[logits.0];
        let v = node.cols();
        if node.rows() != targets.len() {
            return Err(Error::shape(
                "cross_entropy",
                format!("{} logit rows for {} targets", node.rows(), targets.len()),
            ));
        }
        let mut probs = vec![S::zero(); node.value.len()];
        let mut total = S::zero();
        let mut count = 0usize;
        for (t, (row, prow)) in node.value.chunks(v).zip(probs.chunks_mut(v)).enumerate() {
            let target = targets[t];
            if target == pad_id {
                continue;
            }
            if target >= v {
                return Err(Error::shape("cross_entropy", format!("target {target} outside vocabulary of {v}")));
            }
            let max = row.iter().copied().fold(S::neg_infinity(), S::max);
            let mut z = S::zero();
            for (p, &x) in prow.iter_mut().zip(row) {
                *p = (x - max).exp();
                z += *p;
            }
            prow.iter_mut().for_each(|p| *p /= z);
            total += z.ln() + max - row[target];
            count += 1;
        }
        if count == 0 {
            return Err(Error::Contract("cross_entropy over an all-padding target".into()));
        }
        let loss = total / S::of_usize(count);
        self.push(
            "cross_entropy",
            vec![],
            vec![loss],
            Op::CrossEntropy { logits, targets: targets.to_vec(), pad_id, probs, count },
        )
    }

    /// Row lookup `table[ids[i]]`.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let node = &self.nodes[table.0];
        let d = node.cols();
        let rows = node.rows();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= rows {
                return Err(Error::shape("gather_rows", format!("row {id} of {rows}")));
            }
            out.extend_from_slice(&node.value[id * d..(id + 1) * d]);
        }
        self.push("gather_rows", vec![ids.len(), d], out, Op::Gather { table, ids: ids.to_vec() })
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let node = &self.nodes[x.0];
        let d = node.cols();
        if start + len > d || len == 0 {
            return Err(Error::shape("slice_cols", format!("[{start}, {}) of width {d}", start + len)));
        }
        let out: Vec<S> = node.value.chunks(d).flat_map(|r| r[start..start + len].iter().copied()).collect();
        self.push("slice_cols", vec![node.rows(), len], out, Op::SliceCols { x, start })
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.nodes[parts[0].0].rows();
        if parts.iter().any(|p| self.nodes[p.0].rows() != rows) {
            return Err(Error::shape("concat_cols", "row counts differ"));
        }
        let width: usize = parts.iter().map(|p| self.nodes[p.0].cols()).sum();
        let mut out = Vec::with_capacity(rows * width);
        for r in 0..rows {
            for p in parts {
                let n = &self.nodes[p.0];
                let c = n.cols();
                out.extend_from_slice(&n.value[r * c..(r + 1) * c]);
            }
        }
        self.push("concat_cols", vec![rows, width], out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.nodes[x.0].value.iter().copied().sum();
        self.push("sum", vec![], vec![s], Op::Sum(x))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<S>> {
        let ln = &self.nodes[loss.0];
        if ln.value.len() != 1 {
            return Err(Error::Contract(format!("backward on non-scalar of shape {:?}", ln.shape)));
        }
        let mut grads: Vec<Option<Vec<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![S::one()]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        let params = self
            .params
            .iter()
            .filter_map(|(&id, &v)| grads[v.0].as_ref().map(|_| (id, v)))
            .collect();
        Ok(Gradients { grads, params })
    }

    fn propagate(&self, node: &Node<'p, S>, g: &[S], grads: &mut [Option<Vec<S>>]) {
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul { a, b, batch, transpose_b } => {
                let (na, nb) = (&self.nodes[a.0], &self.nodes[b.0]);
                let kk = na.cols();
                let m = na.rows() / batch;
                let n = node.cols();
                if na.requires_grad {
                    let ga = self.slot(grads, *a);
                    for bi in 0..*batch {
                        for i in 0..m {
                            let grow = &g[(bi * m + i) * n..(bi * m + i + 1) * n];
                            let garow = &mut ga[(bi * m + i) * kk..(bi * m + i + 1) * kk];
                            if *transpose_b {
                                for (j, &gj) in grow.iter().enumerate() {
                                    axpy(garow, gj, &nb.value[(bi * n + j) * kk..(bi * n + j + 1) * kk]);
                                }
                            } else {
                                for (p, gap) in garow.iter_mut().enumerate() {
                                    *gap += dot(grow, &nb.value[(bi * kk + p) * n..(bi * kk + p + 1) * n]);
                                }
                            }
                        }
                    }
                }
                if nb.requires_grad {
                    let gb = self.slot(grads, *b);
                    for bi in 0..*batch {
                        for i in 0..m {
                            let grow = &g[(bi * m + i) * n..(bi * m + i + 1) * n];
                            let arow = &na.value[(bi * m + i) * kk..(bi * m + i + 1) * kk];
                            if *transpose_b {
                                for (j, &gj) in grow.iter().enumerate() {
                                    axpy(&mut gb[(bi * n + j) * kk..(bi * n + j + 1) * kk], gj, arow);
                                }
                            } else {
                                for (p, &ap) in arow.iter().enumerate() {
                                    axpy(&mut gb[(bi * kk + p) * n..(bi * kk + p + 1) * n], ap, grow);
                                }
                            }
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if self.rg(*v) {
                        axpy(self.slot(grads, *v), S::one(), g);
                    }
                }
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    let bv = &self.nodes[b.0].value;
                    self.slot(grads, *a).iter_mut().zip(g.iter().zip(bv.iter())).for_each(|(o, (&gi, &bi))| *o += gi * bi);
                }
                if self.rg(*b) {
                    let av = &self.nodes[a.0].value;
                    self.slot(grads, *b).iter_mut().zip(g.iter().zip(av.iter())).for_each(|(o, (&gi, &ai))| *o += gi * ai);
                }
            }
            Op::AddBias { x, bias } => {
                if self.rg(*x) {
                    axpy(self.slot(grads, *x), S::one(), g);
                }
                if self.rg(*bias) {
                    let gb = self.slot(grads, *bias);
                    let d = gb.len();
                    for row in g.chunks(d) {
                        axpy(gb, S::one(), row);
                    }
                }
            }
            Op::Scale { x, factor } => {
                if self.rg(*x) {
                    axpy(self.slot(grads, *x), *factor, g);
                }
            }
            Op::ScaleBy { x, weights, index } => {
                let w = self.nodes[weights.0].value[*index];
                if self.rg(*x) {
                    axpy(self.slot(grads, *x), w, g);
                }
                if self.rg(*weights) {
                    let d = dot(g, &self.nodes[x.0].value);
                    self.slot(grads, *weights)[*index] += d;
                }
            }
            Op::Relu(x) => {
                if self.rg(*x) {
                    let xv = &self.nodes[x.0].value;
                    let gx = self.slot(grads, *x);
                    for ((o, &gi), &xi) in gx.iter_mut().zip(g).zip(xv.iter()) {
                        if xi > S::zero() {
                            *o += gi;
                        }
                    }
                }
            }
            Op::Softmax(x) => {
                if self.rg(*x) {
                    let d = node.cols();
                    let y = &node.value;
                    let gx = self.slot(grads, *x);
                    for ((yrow, grow), orow) in y.chunks(d).zip(g.chunks(d)).zip(gx.chunks_mut(d)) {
                        let s = dot(yrow, grow);
                        for j in 0..d {
                            orow[j] += yrow[j] * (grow[j] - s);
                        }
                    }
                }
            }
            Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
                let d = node.cols();
                let gv = &self.nodes[gain.0].value;
                if self.rg(*gain) {
                    let gg = self.slot(grads, *gain);
                    for (grow, hrow) in g.chunks(d).zip(xhat.chunks(d)) {
                        for j in 0..d {
                            gg[j] += grow[j] * hrow[j];
                        }
                    }
                }
                if self.rg(*bias) {
                    let gb = self.slot(grads, *bias);
                    for grow in g.chunks(d) {
                        axpy(gb, S::one(), grow);
                    }
                }
                if self.rg(*x) {
                    let dn = S::of_usize(d);
                    let gx = self.slot(grads, *x);
                    let mut dh = vec![S::zero(); d];
                    for (r, ((grow, hrow), orow)) in g.chunks(d).zip(xhat.chunks(d)).zip(gx.chunks_mut(d)).enumerate() {
                        for j in 0..d {
                            dh[j] = grow[j] * gv[j];
                        }
                        let sum_dh: S = dh.iter().copied().sum();
                        let sum_dh_h = dot(&dh, hrow);
                        let k = inv_std[r] / dn;
                        for j in 0..d {
                            orow[j] += k * (dn * dh[j] - sum_dh - hrow[j] * sum_dh_h);
                        }
                    }
                }
            }
            Op::CrossEntropy { logits, targets, pad_id, probs, count } => {
                if self.rg(*logits) {
                    let v = self.nodes[logits.0].cols();
                    let scale = g[0] / S::of_usize(*count);
                    let gl = self.slot(grads, *logits);
                    for (t, (prow, orow)) in probs.chunks(v).zip(gl.chunks_mut(v)).enumerate() {
                        if targets[t] == *pad_id {
                            continue;
                        }
                        axpy(orow, scale, prow);
                        orow[targets[t]] -= scale;
                    }
                }
            }
            Op::Gather { table, ids } => {
                if self.rg(*table) {
                    let d = node.cols();
                    let gt = self.slot(grads, *table);
                    for (row, &id) in g.chunks(d).zip(ids) {
                        axpy(&mut gt[id * d..(id + 1) * d], S::one(), row);
                    }
                }
            }
            Op::SliceCols { x, start } => {
                if self.rg(*x) {
                    let len = node.cols();
                    let d = self.nodes[x.0].cols();
                    let gx = self.slot(grads, *x);
                    for (grow, orow) in g.chunks(len).zip(gx.chunks_mut(d)) {
                        axpy(&mut orow[*start..*start + len], S::one(), grow);
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let width = node.cols();
                let mut offset = 0;
                for p in parts {
                    let c = self.nodes[p.0].cols();
                    if self.rg(*p) {
                        let gp = self.slot(grads, *p);
                        for (grow, orow) in g.chunks(width).zip(gp.chunks_mut(c)) {
                            axpy(orow, S::one(), &grow[offset..offset + c]);
                        }
                    }
                    offset += c;
                }
            }
            Op::Sum(x) => {
                if self.rg(*x) {
                    self.slot(grads, *x).iter_mut().for_each(|o| *o += g[0]);
                }
            }
        }
    }

    fn slot<'g>(&self, grads: &'g mut [Option<Vec<S>>], v: Var) -> &'g mut Vec<S> {
        let len = self.nodes[v.0].value.len();
        grads[v.0].get_or_insert_with(|| vec![S::zero(); len])
    }
}

/// Result of [`Tape::backward`].
pub struct Gradients<S> {
    grads: Vec<Option<Vec<S>>>,
    params: Vec<(ParamId, Var)>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient of the loss with respect to node `v`, if it was reached.
    pub fn wrt(&self, v: Var) -> Option<&[S]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Adds parameter gradients into the store's buffers (`+=`).
    pub fn accumulate_into(&self, store: &mut ParamStore<S>) {
        for &(id, v) in &self.params {
            if let Some(g) = &self.grads[v.0] {
                axpy(&mut store.get_mut(id).grad, S::one(), g);
            }
        }
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.params.iter().map(|&(id, _)| id)
    }
}

#[inline]
fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
fn axpy<S: Scalar>(y: &mut [S], alpha: S, x: &[S]) {
    y.iter_mut().zip(x).for_each(|(o, &v)| *o += alpha * v);
}

fn zip_map<S: Scalar>(a: &[S], b: &[S], f: impl Fn(S, S) -> S) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}
