use crate::error::TensorError;
use crate::store::ParamId;
use crate::tensor::{log_softmax_row_into, softmax_row_into, Tensor};
use std::collections::HashMap;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    /// Non-trainable input.
    Const,
    /// Trainable leaf; gradients are reported under this id.
    Param,
    /// C = A · B
    MatMul(NodeId, NodeId),
    /// C = A · Bᵀ
    MatMulNt(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    /// Elementwise product.
    Mul(NodeId, NodeId),
    /// Adds a 1 x cols bias row to every row of A.
    AddRowBias(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Tanh(NodeId),
    Exp(NodeId),
    Ln(NodeId),
    SoftmaxRows(NodeId),
    LogSoftmaxRows(NodeId),
    /// Elementwise min; ties route the gradient to the first operand.
    MinElem(NodeId, NodeId),
    /// Elementwise max; ties route the gradient to the first operand.
    MaxElem(NodeId, NodeId),
    /// Elementwise clamp to [lo, hi]; gradient passes only strictly inside
    /// the interval boundaries' closed span.
    Clamp(NodeId, f64, f64),
    Reshape(NodeId),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    /// out[r, 0] = a[r, idx[r]]
    SelectPerRow(NodeId, Vec<usize>),
    Sum(NodeId),
    Mean(NodeId),
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Gradients of a scalar with respect to every parameter registered on the
/// tape, indexed by [`ParamId`]. Parameters the scalar does not depend on get
/// explicit zero tensors, so downstream consumers never special-case them.
#[derive(Debug)]
pub struct GradMap {
    grads: Vec<Option<Tensor>>,
}

impl GradMap {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(id.index()).and_then(|g| g.as_ref())
    }

    pub fn get_mut(&mut self, id: ParamId) -> Option<&mut Tensor> {
        self.grads.get_mut(id.index()).and_then(|g| g.as_mut())
    }

    /// Iterates present gradients in parameter-id order.
    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|t| (ParamId(i), t)))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (ParamId, &mut Tensor)> {
        self.grads
            .iter_mut()
            .enumerate()
            .filter_map(|(i, g)| g.as_mut().map(|t| (ParamId(i), t)))
    }
}

/// Records a computation as an append-only list of nodes and differentiates
/// it with one reverse sweep.
///
/// Nodes refer only to earlier nodes, so creation order is already a
/// topological order; `backward` walks it once in reverse, which makes the
/// cost linear in graph size and the result deterministic.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, NodeId>,
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

    /// Value computed at `id` during the forward pass.
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, value });
        id
    }

    fn tensor(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Registers a non-trainable input.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Const, value)
    }

    /// Registers a trainable leaf. Registering the same [`ParamId`] again
    /// returns the existing node instead of recording a duplicate, so each
    /// parameter owns exactly one gradient slot per tape.
    pub fn param(&mut self, id: ParamId, value: Tensor) -> NodeId {
        if let Some(&node) = self.param_nodes.get(&id) {
            return node;
        }
        let node = self.push(Op::Param, value);
        self.param_nodes.insert(id, node);
        node
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let (ta, tb) = (self.tensor(a), self.tensor(b));
        if ta.cols() != tb.rows() {
            return Err(TensorError::shape("matmul", ta, tb));
        }
        let value = ta.mm_nn(tb);
        Ok(self.push(Op::MatMul(a, b), value))
    }

    /// A · Bᵀ without materializing the transpose.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let (ta, tb) = (self.tensor(a), self.tensor(b));
        if ta.cols() != tb.cols() {
            return Err(TensorError::shape("matmul_nt", ta, tb));
        }
        let value = ta.mm_nt(tb);
        Ok(self.push(Op::MatMulNt(a, b), value))
    }

    fn elementwise(
        &mut self,
        op_name: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
        make: impl Fn(NodeId, NodeId) -> Op,
    ) -> Result<NodeId, TensorError> {
        let (ta, tb) = (self.tensor(a), self.tensor(b));
        if ta.shape() != tb.shape() {
            return Err(TensorError::shape(op_name, ta, tb));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor::new(ta.rows(), ta.cols(), data)?;
        Ok(self.push(make(a, b), value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.elementwise("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.elementwise("sub", a, b, |x, y| x - y, Op::Sub)
    }

    pub fn mul_elem(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.elementwise("mul_elem", a, b, |x, y| x * y, Op::Mul)
    }

    pub fn min_elem(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.elementwise("min_elem", a, b, f64::min, Op::MinElem)
    }

    pub fn max_elem(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.elementwise("max_elem", a, b, f64::max, Op::MaxElem)
    }

    /// Adds a 1 x cols bias row to every row of `a`.
    pub fn add_row_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId, TensorError> {
        let (ta, tb) = (self.tensor(a), self.tensor(bias));
        if tb.rows() != 1 || tb.cols() != ta.cols() {
            return Err(TensorError::shape("add_row_bias", ta, tb));
        }
        let mut value = ta.clone();
        for r in 0..value.rows() {
            let row = value.row_slice_mut(r);
            for (v, b) in row.iter_mut().zip(tb.data()) {
                *v += b;
            }
        }
        // Recreate tb borrow ended above; push the node.
        Ok(self.push(Op::AddRowBias(a, bias), value))
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        let value = self.tensor(a).map(|x| x * k);
        self.push(Op::Scale(a, k), value)
    }

    pub fn add_scalar(&mut self, a: NodeId, k: f64) -> NodeId {
        let value = self.tensor(a).map(|x| x + k);
        self.push(Op::AddScalar(a), value)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let value = self.tensor(a).map(f64::tanh);
        self.push(Op::Tanh(a), value)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let value = self.tensor(a).map(f64::exp);
        self.push(Op::Exp(a), value)
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let value = self.tensor(a).map(f64::ln);
        self.push(Op::Ln(a), value)
    }

    /// Row-wise softmax with max-subtraction for numerical stability.
    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let ta = self.tensor(a);
        let mut value = Tensor::zeros(ta.rows(), ta.cols());
        for r in 0..ta.rows() {
            softmax_row_into(ta.row_slice(r), value.row_slice_mut(r));
        }
        self.push(Op::SoftmaxRows(a), value)
    }

    /// Row-wise log-softmax, computed directly in log space so small
    /// probabilities keep full precision.
    pub fn log_softmax_rows(&mut self, a: NodeId) -> NodeId {
        let ta = self.tensor(a);
        let mut value = Tensor::zeros(ta.rows(), ta.cols());
        for r in 0..ta.rows() {
            log_softmax_row_into(ta.row_slice(r), value.row_slice_mut(r));
        }
        self.push(Op::LogSoftmaxRows(a), value)
    }

    /// Elementwise clamp to `[lo, hi]`. The gradient passes exactly where the
    /// input lies inside the closed interval and is zero outside it.
    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> Result<NodeId, TensorError> {
        if !(lo <= hi) {
            return Err(TensorError::InvalidArgument {
                op: "clamp",
                msg: format!("lo ({lo}) must not exceed hi ({hi})"),
            });
        }
        let value = self.tensor(a).map(|x| x.clamp(lo, hi));
        Ok(self.push(Op::Clamp(a, lo, hi), value))
    }

    pub fn reshape(&mut self, a: NodeId, rows: usize, cols: usize) -> Result<NodeId, TensorError> {
        let value = self.tensor(a).reshaped(rows, cols)?;
        Ok(self.push(Op::Reshape(a), value))
    }

    /// Concatenates nodes side by side; all parts must share a row count.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "concat_cols",
                msg: "needs at least one part".into(),
            });
        }
        let rows = self.tensor(parts[0]).rows();
        let mut cols = 0;
        for &p in parts {
            let t = self.tensor(p);
            if t.rows() != rows {
                return Err(TensorError::shape("concat_cols", self.tensor(parts[0]), t));
            }
            cols += t.cols();
        }
        let mut value = Tensor::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let t = &self.nodes[p.0].value;
            let w = t.cols();
            for r in 0..rows {
                let src = t.row_slice(r);
                value.row_slice_mut(r)[offset..offset + w].copy_from_slice(src);
            }
            offset += w;
        }
        Ok(self.push(Op::ConcatCols(parts.to_vec()), value))
    }

    /// Stacks nodes vertically; all parts must share a column count.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "concat_rows",
                msg: "needs at least one part".into(),
            });
        }
        let cols = self.tensor(parts[0]).cols();
        let mut rows = 0;
        for &p in parts {
            let t = self.tensor(p);
            if t.cols() != cols {
                return Err(TensorError::shape("concat_rows", self.tensor(parts[0]), t));
            }
            rows += t.rows();
        }
        let mut data = Vec::with_capacity(rows * cols);
        for &p in parts {
            data.extend_from_slice(self.nodes[p.0].value.data());
        }
        let value = Tensor::new(rows, cols, data)?;
        Ok(self.push(Op::ConcatRows(parts.to_vec()), value))
    }

    /// Picks one entry per row: `out[r, 0] = a[r, idx[r]]`.
    pub fn select_per_row(&mut self, a: NodeId, idx: &[usize]) -> Result<NodeId, TensorError> {
        let ta = self.tensor(a);
        if idx.len() != ta.rows() {
            return Err(TensorError::InvalidArgument {
                op: "select_per_row",
                msg: format!("{} indices for {} rows", idx.len(), ta.rows()),
            });
        }
        if let Some(&bad) = idx.iter().find(|&&c| c >= ta.cols()) {
            return Err(TensorError::InvalidArgument {
                op: "select_per_row",
                msg: format!("column index {bad} out of range for {} columns", ta.cols()),
            });
        }
        let data = idx.iter().enumerate().map(|(r, &c)| ta.get(r, c)).collect();
        let value = Tensor::new(ta.rows(), 1, data)?;
        Ok(self.push(Op::SelectPerRow(a, idx.to_vec()), value))
    }

    /// Sum of all entries, as a 1x1 scalar node.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let value = Tensor::scalar(self.tensor(a).data().iter().sum());
        self.push(Op::Sum(a), value)
    }

    /// Mean of all entries, as a 1x1 scalar node.
    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let t = self.tensor(a);
        let value = Tensor::scalar(t.data().iter().sum::<f64>() / t.len() as f64);
        self.push(Op::Mean(a), value)
    }

    /// Reverse sweep from a scalar `loss` node.
    ///
    /// Every parameter registered on this tape appears in the result; those
    /// the loss does not depend on get explicit zero gradients. Each node is
    /// visited exactly once, in reverse creation order.
    pub fn backward(&self, loss: NodeId) -> Result<GradMap, TensorError> {
        let loss_t = self.tensor(loss);
        if loss_t.rows() != 1 || loss_t.cols() != 1 {
            return Err(TensorError::NonScalar {
                op: "backward",
                rows: loss_t.rows(),
                cols: loss_t.cols(),
            });
        }

        let mut node_grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        node_grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = node_grads[i].take() else {
                continue;
            };
            // Accumulate into an input node's gradient slot.
            macro_rules! accum {
                ($target:expr, $delta:expr) => {{
                    let t: NodeId = $target;
                    let delta: Tensor = $delta;
                    match &mut node_grads[t.0] {
                        Some(existing) => existing.add_elem(&delta),
                        slot @ None => *slot = Some(delta),
                    }
                }};
            }

            match &self.nodes[i].op {
                Op::Const => {}
                Op::Param => {
                    // Leaf: keep the gradient for collection below.
                    node_grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    // C = A·B: dA = g·Bᵀ, dB = Aᵀ·g
                    let da = g.mm_nt(self.tensor(*b));
                    let db = self.tensor(*a).mm_tn(&g);
                    accum!(*a, da);
                    accum!(*b, db);
                }
                Op::MatMulNt(a, b) => {
                    // C = A·Bᵀ: dA = g·B, dB = gᵀ·A
                    let da = g.mm_nn(self.tensor(*b));
                    let db = g.mm_tn(self.tensor(*a));
                    accum!(*a, da);
                    accum!(*b, db);
                }
                Op::Add(a, b) => {
                    accum!(*a, g.clone());
                    accum!(*b, g);
                }
                Op::Sub(a, b) => {
                    let mut neg = g.clone();
                    neg.scale_in_place(-1.0);
                    accum!(*a, g);
                    accum!(*b, neg);
                }
                Op::Mul(a, b) => {
                    let ta = self.tensor(*a);
                    let tb = self.tensor(*b);
                    let mut da = g.clone();
                    for (d, s) in da.data_mut().iter_mut().zip(tb.data()) {
                        *d *= s;
                    }
                    let mut db = g;
                    for (d, s) in db.data_mut().iter_mut().zip(ta.data()) {
                        *d *= s;
                    }
                    accum!(*a, da);
                    accum!(*b, db);
                }
                Op::AddRowBias(a, bias) => {
                    let mut db = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        let row = g.row_slice(r);
                        for (d, s) in db.data_mut().iter_mut().zip(row) {
                            *d += s;
                        }
                    }
                    accum!(*a, g);
                    accum!(*bias, db);
                }
                Op::Scale(a, k) => {
                    let mut da = g;
                    da.scale_in_place(*k);
                    accum!(*a, da);
                }
                Op::AddScalar(a) => {
                    accum!(*a, g);
                }
                Op::Tanh(a) => {
                    let y = &self.nodes[i].value;
                    let mut da = g;
                    for (d, &yv) in da.data_mut().iter_mut().zip(y.data()) {
                        *d *= 1.0 - yv * yv;
                    }
                    accum!(*a, da);
                }
                Op::Exp(a) => {
                    let y = &self.nodes[i].value;
                    let mut da = g;
                    for (d, &yv) in da.data_mut().iter_mut().zip(y.data()) {
                        *d *= yv;
                    }
                    accum!(*a, da);
                }
                Op::Ln(a) => {
                    let x = self.tensor(*a);
                    let mut da = g;
                    for (d, &xv) in da.data_mut().iter_mut().zip(x.data()) {
                        *d /= xv;
                    }
                    accum!(*a, da);
                }
                Op::SoftmaxRows(a) => {
                    // dX_r = y_r ∘ (g_r − <g_r, y_r>)
                    let y = &self.nodes[i].value;
                    let mut da = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let yr = y.row_slice(r);
                        let gr = g.row_slice(r);
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        let dr = da.row_slice_mut(r);
                        for ((d, &yv), &gv) in dr.iter_mut().zip(yr).zip(gr) {
                            *d = yv * (gv - dot);
                        }
                    }
                    accum!(*a, da);
                }
                Op::LogSoftmaxRows(a) => {
                    // y = x − logsumexp(x): dX_r = g_r − softmax(x)_r · Σ g_r
                    let y = &self.nodes[i].value;
                    let mut da = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let yr = y.row_slice(r);
                        let gr = g.row_slice(r);
                        let gsum: f64 = gr.iter().sum();
                        let dr = da.row_slice_mut(r);
                        for ((d, &yv), &gv) in dr.iter_mut().zip(yr).zip(gr) {
                            *d = gv - yv.exp() * gsum;
                        }
                    }
                    accum!(*a, da);
                }
                Op::MinElem(a, b) => {
                    let ta = self.tensor(*a);
                    let tb = self.tensor(*b);
                    let mut da = g.clone();
                    let mut db = g;
                    for (((d_a, d_b), &xa), &xb) in da
                        .data_mut()
                        .iter_mut()
                        .zip(db.data_mut())
                        .zip(ta.data())
                        .zip(tb.data())
                    {
                        if xa <= xb {
                            *d_b = 0.0;
                        } else {
                            *d_a = 0.0;
                        }
                    }
                    accum!(*a, da);
                    accum!(*b, db);
                }
                Op::MaxElem(a, b) => {
                    let ta = self.tensor(*a);
                    let tb = self.tensor(*b);
                    let mut da = g.clone();
                    let mut db = g;
                    for (((d_a, d_b), &xa), &xb) in da
                        .data_mut()
                        .iter_mut()
                        .zip(db.data_mut())
                        .zip(ta.data())
                        .zip(tb.data())
                    {
                        if xa >= xb {
                            *d_b = 0.0;
                        } else {
                            *d_a = 0.0;
                        }
                    }
                    accum!(*a, da);
                    accum!(*b, db);
                }
                Op::Clamp(a, lo, hi) => {
                    let x = self.tensor(*a);
                    let mut da = g;
                    for (d, &xv) in da.data_mut().iter_mut().zip(x.data()) {
                        if xv < *lo || xv > *hi {
                            *d = 0.0;
                        }
                    }
                    accum!(*a, da);
                }
                Op::Reshape(a) => {
                    let src = self.tensor(*a);
                    let da = Tensor::new(src.rows(), src.cols(), g.data().to_vec())?;
                    accum!(*a, da);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let t = self.tensor(p);
                        let w = t.cols();
                        let mut dp = Tensor::zeros(t.rows(), w);
                        for r in 0..t.rows() {
                            let src = &g.row_slice(r)[offset..offset + w];
                            dp.row_slice_mut(r).copy_from_slice(src);
                        }
                        accum!(p, dp);
                        offset += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let t = self.tensor(p);
                        let n = t.len();
                        let dp = Tensor::new(
                            t.rows(),
                            t.cols(),
                            g.data()[offset..offset + n].to_vec(),
                        )?;
                        accum!(p, dp);
                        offset += n;
                    }
                }
                Op::SelectPerRow(a, idx) => {
                    let ta = self.tensor(*a);
                    let mut da = Tensor::zeros(ta.rows(), ta.cols());
                    for (r, &c) in idx.iter().enumerate() {
                        da.set(r, c, g.get(r, 0));
                    }
                    accum!(*a, da);
                }
                Op::Sum(a) => {
                    let ta = self.tensor(*a);
                    accum!(*a, Tensor::filled(ta.rows(), ta.cols(), g.value()));
                }
                Op::Mean(a) => {
                    let ta = self.tensor(*a);
                    let k = g.value() / ta.len() as f64;
                    accum!(*a, Tensor::filled(ta.rows(), ta.cols(), k));
                }
            }
        }

        // Collect per-parameter gradients; parameters never reached by the
        // sweep get explicit zeros.
        let capacity = self
            .param_nodes
            .keys()
            .map(|p| p.index() + 1)
            .max()
            .unwrap_or(0);
        let mut grads: Vec<Option<Tensor>> = (0..capacity).map(|_| None).collect();
        for (&pid, &node) in &self.param_nodes {
            let g = match node_grads[node.0].take() {
                Some(g) => g,
                None => {
                    let t = self.tensor(node);
                    Tensor::zeros(t.rows(), t.cols())
                }
            };
            grads[pid.index()] = Some(g);
        }
        Ok(GradMap { grads })
    }
}
