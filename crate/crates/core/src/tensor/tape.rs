use super::{matmul, matmul_nt, matmul_tn, sigmoid, swish, swish_derivative, Tensor};
use crate::error::{CoreError, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    /// Leaf value: a parameter (tracked) or a constant input (untracked).
    Leaf,
    /// x (m x in) * w (in x out) + b (out), b broadcast over rows.
    Affine { x: NodeId, w: NodeId, b: NodeId },
    Swish { x: NodeId },
    Sigmoid { x: NodeId },
    Exp { x: NodeId },
    Square { x: NodeId },
    Scale { x: NodeId, c: f64 },
    /// Elementwise clamp to [-bound, bound]; gradient passes through
    /// unclamped entries and is zero elsewhere.
    Clamp { x: NodeId, bound: f64 },
    /// Input is a flat vector of `groups * group` values; within each group
    /// the first entry is the anchor. Output has `groups * (group - 1)`
    /// entries: anchor minus each remaining entry.
    AnchorDiff { x: NodeId, group: usize },
    /// Dot product with a constant weight vector; produces a scalar. The
    /// weights never receive gradient.
    DotConst { x: NodeId, weights: Vec<f64> },
    /// Sum of scalar nodes.
    SumMany { xs: Vec<NodeId> },
    /// Batched pairwise-coupling energies: for each row v of `values`
    /// (m x d), E = -v' J v - b' v with J symmetric, zero-diagonal, stored
    /// as its strict upper triangle `j_upper` (row-major, length d(d-1)/2).
    CouplingEnergies {
        j_upper: NodeId,
        bias: NodeId,
        values: NodeId,
    },
}

struct Node {
    op: Op,
    value: Tensor,
    tracked: bool,
}

/// Eager reverse-mode tape. Values are computed when ops are recorded;
/// `backward` replays the recording in reverse.
pub struct Tape {
    nodes: Vec<Node>,
    clamp_events: u64,
}

impl Tape {
    pub fn new() -> Tape {
        Tape {
            nodes: Vec::new(),
            clamp_events: 0,
        }
    }

    /// Total elementwise clamp saturations observed by `clamp` ops so far.
    pub fn clamp_events(&self) -> u64 {
        self.clamp_events
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor, tracked: bool, context: &str) -> Result<NodeId> {
        value.check_finite(context)?;
        self.nodes.push(Node { op, value, tracked });
        Ok(NodeId(self.nodes.len() - 1))
    }

    fn tracked(&self, id: NodeId) -> bool {
        self.nodes[id.0].tracked
    }

    /// Leaf that receives gradient (a parameter, or an input whose gradient
    /// is wanted).
    pub fn param(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(Op::Leaf, value, true, "param leaf")
    }

    /// Constant leaf; no gradient flows into it.
    pub fn constant(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(Op::Leaf, value, false, "constant leaf")
    }

    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, in_dim) = self.value(x).rows_cols();
        let (w_in, w_out) = {
            let ws = self.value(w).shape();
            if ws.len() != 2 {
                return Err(CoreError::ShapeMismatch(format!(
                    "affine weight must be 2-D, got {ws:?}"
                )));
            }
            (ws[0], ws[1])
        };
        if in_dim != w_in {
            return Err(CoreError::ShapeMismatch(format!(
                "affine: input has {in_dim} columns, weight expects {w_in}"
            )));
        }
        if self.value(b).len() != w_out {
            return Err(CoreError::ShapeMismatch(format!(
                "affine: bias length {} != output width {w_out}",
                self.value(b).len()
            )));
        }
        let mut out = vec![0.0; m * w_out];
        for row in out.chunks_mut(w_out) {
            row.copy_from_slice(self.value(b).data());
        }
        matmul(
            self.value(x).data(),
            self.value(w).data(),
            &mut out,
            m,
            in_dim,
            w_out,
        );
        let tracked = self.tracked(x) || self.tracked(w) || self.tracked(b);
        let value = Tensor::from_vec(&[m, w_out], out)?;
        self.push(Op::Affine { x, w, b }, value, tracked, "affine output")
    }

    pub fn swish(&mut self, x: NodeId) -> Result<NodeId> {
        let value = Tensor {
            shape: self.value(x).shape().to_vec(),
            data: self.value(x).data().iter().map(|&v| swish(v)).collect(),
        };
        let tracked = self.tracked(x);
        self.push(Op::Swish { x }, value, tracked, "swish output")
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        let value = Tensor {
            shape: self.value(x).shape().to_vec(),
            data: self.value(x).data().iter().map(|&v| sigmoid(v)).collect(),
        };
        let tracked = self.tracked(x);
        self.push(Op::Sigmoid { x }, value, tracked, "sigmoid output")
    }

    pub fn exp(&mut self, x: NodeId) -> Result<NodeId> {
        let value = Tensor {
            shape: self.value(x).shape().to_vec(),
            data: self.value(x).data().iter().map(|&v| v.exp()).collect(),
        };
        let tracked = self.tracked(x);
        self.push(Op::Exp { x }, value, tracked, "exp output")
    }

    pub fn square(&mut self, x: NodeId) -> Result<NodeId> {
        let value = Tensor {
            shape: self.value(x).shape().to_vec(),
            data: self.value(x).data().iter().map(|&v| v * v).collect(),
        };
        let tracked = self.tracked(x);
        self.push(Op::Square { x }, value, tracked, "square output")
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        let value = Tensor {
            shape: self.value(x).shape().to_vec(),
            data: self.value(x).data().iter().map(|&v| v * c).collect(),
        };
        let tracked = self.tracked(x);
        self.push(Op::Scale { x, c }, value, tracked, "scale output")
    }

    pub fn clamp(&mut self, x: NodeId, bound: f64) -> Result<NodeId> {
        if !(bound > 0.0) {
            return Err(CoreError::InvalidArgument(
                "clamp bound must be positive".into(),
            ));
        }
        let mut events = 0u64;
        let data: Vec<f64> = self
            .value(x)
            .data()
            .iter()
            .map(|&v| {
                if v > bound {
                    events += 1;
                    bound
                } else if v < -bound {
                    events += 1;
                    -bound
                } else {
                    v
                }
            })
            .collect();
        self.clamp_events += events;
        let value = Tensor {
            shape: self.value(x).shape().to_vec(),
            data,
        };
        let tracked = self.tracked(x);
        self.push(Op::Clamp { x, bound }, value, tracked, "clamp output")
    }

    pub fn anchor_diff(&mut self, x: NodeId, group: usize) -> Result<NodeId> {
        let len = self.value(x).len();
        if group < 2 || len % group != 0 {
            return Err(CoreError::ShapeMismatch(format!(
                "anchor_diff: length {len} not divisible by group {group}"
            )));
        }
        let groups = len / group;
        let xs = self.value(x).data();
        let mut out = Vec::with_capacity(groups * (group - 1));
        for g in 0..groups {
            let anchor = xs[g * group];
            for t in 1..group {
                out.push(anchor - xs[g * group + t]);
            }
        }
        let tracked = self.tracked(x);
        let value = Tensor::from_vec(&[groups * (group - 1)], out)?;
        self.push(Op::AnchorDiff { x, group }, value, tracked, "anchor_diff")
    }

    pub fn dot_const(&mut self, x: NodeId, weights: Vec<f64>) -> Result<NodeId> {
        if weights.len() != self.value(x).len() {
            return Err(CoreError::ShapeMismatch(format!(
                "dot_const: {} weights vs {} values",
                weights.len(),
                self.value(x).len()
            )));
        }
        let acc: f64 = self
            .value(x)
            .data()
            .iter()
            .zip(weights.iter())
            .map(|(a, b)| a * b)
            .sum();
        let tracked = self.tracked(x);
        self.push(
            Op::DotConst { x, weights },
            Tensor::scalar(acc),
            tracked,
            "dot_const output",
        )
    }

    pub fn sum_many(&mut self, xs: Vec<NodeId>) -> Result<NodeId> {
        let mut acc = 0.0;
        for &id in &xs {
            acc += self.value(id).item()?;
        }
        let tracked = xs.iter().any(|&id| self.tracked(id));
        self.push(Op::SumMany { xs }, Tensor::scalar(acc), tracked, "sum_many")
    }

    /// See [`Op::CouplingEnergies`]. `values` rows hold the (already encoded)
    /// spin or bit values as f64.
    pub fn coupling_energies(
        &mut self,
        j_upper: NodeId,
        bias: NodeId,
        values: NodeId,
    ) -> Result<NodeId> {
        let (m, d) = self.value(values).rows_cols();
        if self.value(bias).len() != d {
            return Err(CoreError::DimensionMismatch {
                expected: d,
                got: self.value(bias).len(),
            });
        }
        let expect_upper = d * (d - 1) / 2;
        if self.value(j_upper).len() != expect_upper {
            return Err(CoreError::DimensionMismatch {
                expected: expect_upper,
                got: self.value(j_upper).len(),
            });
        }
        let u = self.value(j_upper).data();
        let b = self.value(bias).data();
        let vs = self.value(values).data();
        let mut out = Vec::with_capacity(m);
        for r in 0..m {
            let v = &vs[r * d..(r + 1) * d];
            out.push(coupling_energy_row(u, b, v, d));
        }
        let tracked =
            self.tracked(j_upper) || self.tracked(bias) || self.tracked(values);
        let value = Tensor::from_vec(&[m], out)?;
        self.push(
            Op::CouplingEnergies {
                j_upper,
                bias,
                values,
            },
            value,
            tracked,
            "coupling energies",
        )
    }

    /// Reverse-mode gradients of a scalar `loss` node with respect to every
    /// tracked leaf. Deterministic: fixed reverse traversal, fixed
    /// accumulation order.
    pub fn backward(&self, loss: NodeId) -> Result<Grads> {
        if !self.value(loss).is_scalar() {
            return Err(CoreError::ShapeMismatch(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for id in (0..=loss.0).rev() {
            if !self.nodes[id].tracked {
                grads[id] = None;
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            g.check_finite("gradient")?;
            match &self.nodes[id].op {
                Op::Leaf => {
                    grads[id] = Some(g); // keep: leaves are read by the caller
                }
                Op::Affine { x, w, b } => {
                    let (m, in_dim) = self.value(*x).rows_cols();
                    let out_dim = self.value(*b).len();
                    if self.tracked(*x) {
                        let gx = ensure(&mut grads[x.0], self.value(*x).shape());
                        matmul_nt(g.data(), self.value(*w).data(), gx.data_mut(), m, out_dim, in_dim);
                    }
                    if self.tracked(*w) {
                        let gw = ensure(&mut grads[w.0], self.value(*w).shape());
                        matmul_tn(self.value(*x).data(), g.data(), gw.data_mut(), m, in_dim, out_dim);
                    }
                    if self.tracked(*b) {
                        let gb = ensure(&mut grads[b.0], self.value(*b).shape());
                        let gbd = gb.data_mut();
                        for row in g.data().chunks(out_dim) {
                            for (gv, rv) in gbd.iter_mut().zip(row.iter()) {
                                *gv += rv;
                            }
                        }
                    }
                }
                Op::Swish { x } => {
                    if self.tracked(*x) {
                        let xv = self.value(*x).data();
                        let gx = ensure(&mut grads[x.0], self.value(*x).shape());
                        for ((gv, &ug), &z) in gx.data_mut().iter_mut().zip(g.data()).zip(xv) {
                            *gv += ug * swish_derivative(z);
                        }
                    }
                }
                Op::Sigmoid { x } => {
                    if self.tracked(*x) {
                        let sv = self.value(NodeId(id)).data();
                        let gx = ensure(&mut grads[x.0], self.value(*x).shape());
                        for ((gv, &ug), &s) in gx.data_mut().iter_mut().zip(g.data()).zip(sv) {
                            *gv += ug * s * (1.0 - s);
                        }
                    }
                }
                Op::Exp { x } => {
                    if self.tracked(*x) {
                        let ev = self.value(NodeId(id)).data();
                        let gx = ensure(&mut grads[x.0], self.value(*x).shape());
                        for ((gv, &ug), &e) in gx.data_mut().iter_mut().zip(g.data()).zip(ev) {
                            *gv += ug * e;
                        }
                    }
                }
                Op::Square { x } => {
                    if self.tracked(*x) {
                        let xv = self.value(*x).data();
                        let gx = ensure(&mut grads[x.0], self.value(*x).shape());
                        for ((gv, &ug), &v) in gx.data_mut().iter_mut().zip(g.data()).zip(xv) {
                            *gv += ug * 2.0 * v;
                        }
                    }
                }
                Op::Scale { x, c } => {
                    if self.tracked(*x) {
                        let gx = ensure(&mut grads[x.0], self.value(*x).shape());
                        for (gv, &ug) in gx.data_mut().iter_mut().zip(g.data()) {
                            *gv += ug * c;
                        }
                    }
                }
                Op::Clamp { x, bound } => {
                    if self.tracked(*x) {
                        let xv = self.value(*x).data();
                        let gx = ensure(&mut grads[x.0], self.value(*x).shape());
                        for ((gv, &ug), &v) in gx.data_mut().iter_mut().zip(g.data()).zip(xv) {
                            if v.abs() <= *bound {
                                *gv += ug;
                            }
                        }
                    }
                }
                Op::AnchorDiff { x, group } => {
                    if self.tracked(*x) {
                        let per = group - 1;
                        let groups = self.value(*x).len() / group;
                        let gx = ensure(&mut grads[x.0], self.value(*x).shape());
                        let gxd = gx.data_mut();
                        for gidx in 0..groups {
                            let out_base = gidx * per;
                            let in_base = gidx * group;
                            let mut anchor_acc = 0.0;
                            for t in 0..per {
                                let ug = g.data()[out_base + t];
                                anchor_acc += ug;
                                gxd[in_base + 1 + t] -= ug;
                            }
                            gxd[in_base] += anchor_acc;
                        }
                    }
                }
                Op::DotConst { x, weights } => {
                    if self.tracked(*x) {
                        let ug = g.data()[0];
                        let gx = ensure(&mut grads[x.0], self.value(*x).shape());
                        for (gv, &w) in gx.data_mut().iter_mut().zip(weights.iter()) {
                            *gv += ug * w;
                        }
                    }
                }
                Op::SumMany { xs } => {
                    let ug = g.data()[0];
                    for &xid in xs {
                        if self.tracked(xid) {
                            let gx = ensure(&mut grads[xid.0], self.value(xid).shape());
                            gx.data_mut()[0] += ug;
                        }
                    }
                }
                Op::CouplingEnergies {
                    j_upper,
                    bias,
                    values,
                } => {
                    let (m, d) = self.value(*values).rows_cols();
                    let vs = self.value(*values).data();
                    if self.tracked(*j_upper) {
                        let gj = ensure(&mut grads[j_upper.0], self.value(*j_upper).shape());
                        let gjd = gj.data_mut();
                        for r in 0..m {
                            let ug = g.data()[r];
                            if ug == 0.0 {
                                continue;
                            }
                            let v = &vs[r * d..(r + 1) * d];
                            // dE/dJ_ij = -2 v_i v_j for i < j
                            let mut idx = 0;
                            for i in 0..d {
                                let vi = v[i];
                                if vi == 0.0 {
                                    idx += d - i - 1;
                                    continue;
                                }
                                let c = -2.0 * ug * vi;
                                for &vj in &v[i + 1..d] {
                                    gjd[idx] += c * vj;
                                    idx += 1;
                                }
                            }
                        }
                    }
                    if self.tracked(*bias) {
                        let gb = ensure(&mut grads[bias.0], self.value(*bias).shape());
                        let gbd = gb.data_mut();
                        for r in 0..m {
                            let ug = g.data()[r];
                            let v = &vs[r * d..(r + 1) * d];
                            for (gv, &vv) in gbd.iter_mut().zip(v.iter()) {
                                *gv -= ug * vv;
                            }
                        }
                    }
                    if self.tracked(*values) {
                        // dE/dv = -(J + J^T) v - b = -2 J v - b
                        let u = self.value(*j_upper).data();
                        let b = self.value(*bias).data();
                        let gv = ensure(&mut grads[values.0], self.value(*values).shape());
                        let gvd = gv.data_mut();
                        for r in 0..m {
                            let ug = g.data()[r];
                            if ug == 0.0 {
                                continue;
                            }
                            let v = &vs[r * d..(r + 1) * d];
                            let jv = coupling_matvec(u, v, d);
                            let grow = &mut gvd[r * d..(r + 1) * d];
                            for i in 0..d {
                                grow[i] += ug * (-2.0 * jv[i] - b[i]);
                            }
                        }
                    }
                }
            }
        }
        Ok(Grads { by_node: grads })
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn ensure<'a>(slot: &'a mut Option<Tensor>, shape: &[usize]) -> &'a mut Tensor {
    if slot.is_none() {
        *slot = Some(Tensor::zeros(shape));
    }
    slot.as_mut().unwrap()
}

/// J v where J is symmetric with strict upper triangle `u` and zero diagonal.
pub(crate) fn coupling_matvec(u: &[f64], v: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    let mut idx = 0;
    for i in 0..d {
        let vi = v[i];
        let mut acc = 0.0;
        for j in i + 1..d {
            let uij = u[idx];
            acc += uij * v[j];
            out[j] += uij * vi;
            idx += 1;
        }
        out[i] += acc;
    }
    out
}

/// E = -v' J v - b' v with symmetric zero-diagonal J given by `u`.
pub(crate) fn coupling_energy_row(u: &[f64], b: &[f64], v: &[f64], d: usize) -> f64 {
    // v' J v = 2 * sum_{i<j} u_ij v_i v_j
    let mut quad = 0.0;
    let mut idx = 0;
    for i in 0..d {
        let vi = v[i];
        if vi == 0.0 {
            idx += d - i - 1;
            continue;
        }
        let mut acc = 0.0;
        for &vj in &v[i + 1..d] {
            acc += u[idx] * vj;
            idx += 1;
        }
        quad += vi * acc;
    }
    let lin: f64 = b.iter().zip(v.iter()).map(|(a, c)| a * c).sum();
    -2.0 * quad - lin
}

/// Result of [`Tape::backward`]: per-node gradient slots.
pub struct Grads {
    by_node: Vec<Option<Tensor>>,
}

impl Grads {
    /// Take the gradient accumulated at a leaf, consuming it.
    pub fn take(&mut self, id: NodeId) -> Option<Tensor> {
        self.by_node[id.0].take()
    }
}
