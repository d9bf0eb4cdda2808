//! Define-by-run reverse-mode differentiation.
//!
//! A [`Tape`] is built fresh for every objective evaluation. Each forward
//! primitive appends a node holding its value and the ids of its inputs, so
//! node order is already a topological order and [`Tape::backward`] is a
//! single reverse sweep. Nodes that depend on no differentiable leaf are
//! marked constant and skipped by the sweep.

use std::collections::BTreeMap;

use crate::error::{DadaError, Result};
use crate::params::{ParamId, ParameterStore};
use crate::tensor::Tensor;

/// Lower clamp applied to the argument of [`Tape::log`].
pub const LOG_CLAMP: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpKind {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    AddScalar(Var, f64),
    MatMul(Var, Var),
    Transpose(Var),
    ConcatCols(Var, Var),
    RowSlice { input: Var, start: usize },
    Relu(Var),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    SoftmaxRows(Var),
    Sum(Var),
    Mean(Var),
    MeanRows(Var),
}

#[derive(Debug)]
struct Node {
    op: OpKind,
    value: Tensor,
    tracked: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<Option<Var>>,
    param_of_node: BTreeMap<usize, ParamId>,
}

/// Gradients produced by [`Tape::backward`].
///
/// Only nodes that the seed actually depends on carry a gradient; parameters
/// that were bound but never used are absent, so an optimizer step leaves
/// them untouched.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    nodes: Vec<Option<Tensor>>,
    params: BTreeMap<ParamId, Tensor>,
}

impl Gradients {
    pub fn wrt(&self, var: Var) -> Option<&Tensor> {
        self.nodes.get(var.0).and_then(Option::as_ref)
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params.get(&id)
    }

    pub fn params(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.params.iter().map(|(&id, g)| (id, g))
    }

    pub fn retain_params(&mut self, mut keep: impl FnMut(ParamId) -> bool) {
        self.params.retain(|&id, _| keep(id));
    }
}

fn check_finite(op: &'static str, t: &Tensor) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(DadaError::Domain {
            op,
            detail: "non-finite input".into(),
        })
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(DadaError::Dimension {
            op,
            left: a.shape(),
            right: b.shape(),
        })
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// A tape with one differentiable leaf per parameter of `store`.
    pub fn with_params(store: &ParameterStore) -> Self {
        let mut tape = Self::new();
        tape.bind(store);
        tape
    }

    pub fn bind(&mut self, store: &ParameterStore) {
        self.params = vec![None; store.len()];
        for (id, value) in store.iter() {
            let v = self.var(value.clone());
            self.params[id.index()] = Some(v);
            self.param_of_node.insert(v.0, id);
        }
    }

    /// Leaf for a bound parameter. Panics if the parameter was not bound,
    /// which only happens when a model is used with a foreign tape.
    pub fn param(&self, id: ParamId) -> Var {
        self.params
            .get(id.index())
            .copied()
            .flatten()
            .expect("parameter not bound on this tape")
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

    pub fn op(&self, v: Var) -> OpKind {
        self.nodes[v.0].op
    }

    pub fn is_tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    fn push(&mut self, op: OpKind, value: Tensor, tracked: bool) -> Var {
        self.nodes.push(Node { op, value, tracked });
        Var(self.nodes.len() - 1)
    }

    /// Differentiable leaf.
    pub fn var(&mut self, value: Tensor) -> Var {
        self.push(OpKind::Leaf, value, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(OpKind::Leaf, value, false)
    }

    /// Copy of `v`'s current value as a constant (stop-gradient).
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    fn unary(&mut self, name: &'static str, a: Var, op: OpKind, f: impl Fn(f64) -> f64) -> Result<Var> {
        let x = self.value(a);
        check_finite(name, x)?;
        let value = x.map(f);
        let tracked = self.nodes[a.0].tracked;
        Ok(self.push(op, value, tracked))
    }

    fn binary_elementwise(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        op: OpKind,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape(name, x, y)?;
        check_finite(name, x)?;
        check_finite(name, y)?;
        let value = x.zip_map(y, f);
        let tracked = self.nodes[a.0].tracked || self.nodes[b.0].tracked;
        Ok(self.push(op, value, tracked))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_elementwise("add", a, b, OpKind::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_elementwise("subtract", a, b, OpKind::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_elementwise("multiply", a, b, OpKind::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(b).data().iter().any(|&v| v == 0.0) {
            return Err(DadaError::Domain {
                op: "divide",
                detail: "division by zero".into(),
            });
        }
        self.binary_elementwise("divide", a, b, OpKind::Div(a, b), |x, y| x / y)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var> {
        if !k.is_finite() {
            return Err(DadaError::Domain {
                op: "scale",
                detail: format!("non-finite factor {k}"),
            });
        }
        self.unary("scale", a, OpKind::Scale(a, k), |x| k * x)
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Result<Var> {
        if !k.is_finite() {
            return Err(DadaError::Domain {
                op: "add_scalar",
                detail: format!("non-finite offset {k}"),
            });
        }
        self.unary("add_scalar", a, OpKind::AddScalar(a, k), |x| x + k)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        check_finite("matmul", x)?;
        check_finite("matmul", y)?;
        let value = x.matmul(y)?;
        let tracked = self.nodes[a.0].tracked || self.nodes[b.0].tracked;
        Ok(self.push(OpKind::MatMul(a, b), value, tracked))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        check_finite("transpose", self.value(a))?;
        let value = self.value(a).transpose();
        let tracked = self.nodes[a.0].tracked;
        Ok(self.push(OpKind::Transpose(a), value, tracked))
    }

    /// `[a | b]`, row counts must agree.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.rows() != y.rows() {
            return Err(DadaError::Dimension {
                op: "concat_cols",
                left: x.shape(),
                right: y.shape(),
            });
        }
        check_finite("concat_cols", x)?;
        check_finite("concat_cols", y)?;
        let cols = x.cols() + y.cols();
        let mut data = Vec::with_capacity(x.rows() * cols);
        for r in 0..x.rows() {
            data.extend_from_slice(x.row(r));
            data.extend_from_slice(y.row(r));
        }
        let value = Tensor::new(x.rows(), cols, data)?;
        let tracked = self.nodes[a.0].tracked || self.nodes[b.0].tracked;
        Ok(self.push(OpKind::ConcatCols(a, b), value, tracked))
    }

    /// Rows `start..start + len`.
    pub fn row_slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        if start + len > x.rows() || len == 0 {
            return Err(DadaError::Dimension {
                op: "row_slice",
                left: x.shape(),
                right: (start, len),
            });
        }
        check_finite("row_slice", x)?;
        let idx: Vec<usize> = (start..start + len).collect();
        let value = x.select_rows(&idx);
        let tracked = self.nodes[a.0].tracked;
        Ok(self.push(OpKind::RowSlice { input: a, start }, value, tracked))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary("relu", a, OpKind::Relu(a), |x| x.max(0.0))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary("tanh", a, OpKind::Tanh(a), f64::tanh)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary("exp", a, OpKind::Exp(a), f64::exp)
    }

    /// Natural log with the argument clamped below at [`LOG_CLAMP`].
    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary("log", a, OpKind::Log(a), |x| x.max(LOG_CLAMP).ln())
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary("square", a, OpKind::Square(a), |x| x * x)
    }

    /// Row-wise softmax, computed after subtracting each row's maximum.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        check_finite("softmax_rows", x)?;
        let mut value = x.clone();
        let cols = x.cols();
        for row in value.data_mut().chunks_mut(cols.max(1)) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        let tracked = self.nodes[a.0].tracked;
        Ok(self.push(OpKind::SoftmaxRows(a), value, tracked))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        check_finite("sum", x)?;
        let value = Tensor::scalar(x.data().iter().sum());
        let tracked = self.nodes[a.0].tracked;
        Ok(self.push(OpKind::Sum(a), value, tracked))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(DadaError::contract("mean of an empty tensor"));
        }
        check_finite("mean", x)?;
        let value = Tensor::scalar(x.data().iter().sum::<f64>() / x.len() as f64);
        let tracked = self.nodes[a.0].tracked;
        Ok(self.push(OpKind::Mean(a), value, tracked))
    }

    /// Column means as a `1 x cols` row.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.rows() == 0 {
            return Err(DadaError::contract("mean_rows of a tensor with no rows"));
        }
        check_finite("mean_rows", x)?;
        let value = x.mean_rows();
        let tracked = self.nodes[a.0].tracked;
        Ok(self.push(OpKind::MeanRows(a), value, tracked))
    }

    /// Sum of several same-shaped nodes; `parts` must be non-empty.
    pub fn add_all(&mut self, parts: &[Var]) -> Result<Var> {
        let (&first, rest) = parts
            .split_first()
            .ok_or_else(|| DadaError::contract("add_all of an empty list"))?;
        rest.iter().try_fold(first, |acc, &p| self.add(acc, p))
    }

    /// Reverse sweep from a scalar `seed`.
    pub fn backward(&self, seed: Var) -> Result<Gradients> {
        let seed_value = self.value(seed);
        if seed_value.shape() != (1, 1) {
            return Err(DadaError::contract(format!(
                "backward seed must be 1x1, got {:?}",
                seed_value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        if self.nodes[seed.0].tracked {
            grads[seed.0] = Some(Tensor::scalar(1.0));
        }

        for idx in (0..=seed.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let params = self
            .param_of_node
            .iter()
            .filter_map(|(&node, &id)| grads[node].clone().map(|g| (id, g)))
            .collect();
        Ok(Gradients {
            nodes: grads,
            params,
        })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let mut accumulate = |v: Var, contribution: Tensor| {
            if !self.nodes[v.0].tracked {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&contribution),
                slot @ None => *slot = Some(contribution),
            }
        };
        let y = &node.value;
        match node.op {
            OpKind::Leaf => {}
            OpKind::Add(a, b) => {
                accumulate(a, g.clone());
                accumulate(b, g.clone());
            }
            OpKind::Sub(a, b) => {
                accumulate(a, g.clone());
                accumulate(b, g.map(|v| -v));
            }
            OpKind::Mul(a, b) => {
                let (x, z) = (self.value(a), self.value(b));
                accumulate(a, g.zip_map(z, |g, z| g * z));
                accumulate(b, g.zip_map(x, |g, x| g * x));
            }
            OpKind::Div(a, b) => {
                let (x, z) = (self.value(a), self.value(b));
                accumulate(a, g.zip_map(z, |g, z| g / z));
                let gz = g.zip_map(x, |g, x| g * x).zip_map(z, |gx, z| -gx / (z * z));
                accumulate(b, gz);
            }
            OpKind::Scale(a, k) => accumulate(a, g.map(|v| k * v)),
            OpKind::AddScalar(a, _) => accumulate(a, g.clone()),
            OpKind::MatMul(a, b) => {
                let (x, z) = (self.value(a), self.value(b));
                if self.nodes[a.0].tracked {
                    accumulate(a, g.matmul(&z.transpose()).expect("shapes checked forward"));
                }
                if self.nodes[b.0].tracked {
                    accumulate(b, x.transpose().matmul(g).expect("shapes checked forward"));
                }
            }
            OpKind::Transpose(a) => accumulate(a, g.transpose()),
            OpKind::ConcatCols(a, b) => {
                let left = self.value(a).cols();
                let right = self.value(b).cols();
                let mut ga = Vec::with_capacity(g.rows() * left);
                let mut gb = Vec::with_capacity(g.rows() * right);
                for r in 0..g.rows() {
                    let row = g.row(r);
                    ga.extend_from_slice(&row[..left]);
                    gb.extend_from_slice(&row[left..]);
                }
                accumulate(a, Tensor::new(g.rows(), left, ga).expect("split"));
                accumulate(b, Tensor::new(g.rows(), right, gb).expect("split"));
            }
            OpKind::RowSlice { input, start } => {
                let x = self.value(input);
                let mut full = Tensor::zeros(x.rows(), x.cols());
                let cols = x.cols();
                full.data_mut()[start * cols..start * cols + g.len()].copy_from_slice(g.data());
                accumulate(input, full);
            }
            OpKind::Relu(a) => {
                let x = self.value(a);
                accumulate(a, g.zip_map(x, |g, x| if x > 0.0 { g } else { 0.0 }));
            }
            OpKind::Tanh(a) => accumulate(a, g.zip_map(y, |g, t| g * (1.0 - t * t))),
            OpKind::Exp(a) => accumulate(a, g.zip_map(y, |g, e| g * e)),
            OpKind::Log(a) => {
                let x = self.value(a);
                accumulate(a, g.zip_map(x, |g, x| if x > LOG_CLAMP { g / x } else { 0.0 }));
            }
            OpKind::Square(a) => {
                let x = self.value(a);
                accumulate(a, g.zip_map(x, |g, x| 2.0 * x * g));
            }
            OpKind::SoftmaxRows(a) => {
                let cols = y.cols();
                let mut out = Tensor::zeros(y.rows(), cols);
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                    for c in 0..cols {
                        out.set(r, c, yr[c] * (gr[c] - dot));
                    }
                }
                accumulate(a, out);
            }
            OpKind::Sum(a) => {
                let (r, c) = self.value(a).shape();
                accumulate(a, Tensor::filled(r, c, g.item()));
            }
            OpKind::Mean(a) => {
                let (r, c) = self.value(a).shape();
                accumulate(a, Tensor::filled(r, c, g.item() / (r * c) as f64));
            }
            OpKind::MeanRows(a) => {
                let (r, c) = self.value(a).shape();
                let mut out = Tensor::zeros(r, c);
                let inv = 1.0 / r as f64;
                for row in out.data_mut().chunks_mut(c.max(1)) {
                    for (o, gv) in row.iter_mut().zip(g.data()) {
                        *o = gv * inv;
                    }
                }
                accumulate(a, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let mut t = Tape::new();
        let a = t.var(Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]));
        let i = t.constant(Tensor::identity(2));
        let p = t.matmul(a, i).unwrap();
        assert_eq!(t.value(p), &Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]));
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let mut t = Tape::new();
        let a = t.var(Tensor::zeros(1, 2));
        let s = t.softmax_rows(a).unwrap();
        assert_eq!(t.value(s).data(), &[0.5, 0.5]);
    }

    #[test]
    fn relu_clips_negatives() {
        let mut t = Tape::new();
        let a = t.var(Tensor::from_rows(&[&[-1.0, 2.0]]));
        let r = t.relu(a).unwrap();
        assert_eq!(t.value(r).data(), &[0.0, 2.0]);
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut t = Tape::new();
        let p = t.var(Tensor::from_rows(&[&[1.0, -2.0], &[0.5, 3.0]]));
        let s = t.sum(p).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(p).unwrap(), &Tensor::ones(2, 2));
    }

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let p = t.var(Tensor::scalar(3.0));
        let s = t.square(p).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(p).unwrap().item(), 6.0);
    }

    #[test]
    fn non_scalar_seed_rejected() {
        let mut t = Tape::new();
        let p = t.var(Tensor::zeros(2, 1));
        assert!(matches!(t.backward(p), Err(DadaError::Contract(_))));
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let mut t = Tape::new();
        let a = t.var(Tensor::zeros(2, 3));
        let b = t.var(Tensor::zeros(2, 2));
        match t.add(a, b) {
            Err(DadaError::Dimension { left, right, .. }) => {
                assert_eq!(left, (2, 3));
                assert_eq!(right, (2, 2));
            }
            other => panic!("expected dimension error, got {other:?}"),
        }
        assert!(t.matmul(a, b).is_err());
    }

    #[test]
    fn non_finite_input_is_a_domain_error() {
        let mut t = Tape::new();
        let a = t.var(Tensor::scalar(f64::NAN));
        assert!(matches!(t.exp(a), Err(DadaError::Domain { .. })));
    }

    #[test]
    fn log_clamps_at_floor() {
        let mut t = Tape::new();
        let a = t.var(Tensor::from_rows(&[&[0.0, -1.0]]));
        let l = t.log(a).unwrap();
        let expected = LOG_CLAMP.ln();
        assert!(t.value(l).data().iter().all(|&v| v == expected));
        let s = t.sum(l).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(a).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn reused_node_accumulates() {
        // f(p) = sum(p * p) used via the same node twice
        let mut t = Tape::new();
        let p = t.var(Tensor::from_rows(&[&[1.5, -2.0]]));
        let sq = t.mul(p, p).unwrap();
        let s = t.sum(sq).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(p).unwrap().data(), &[3.0, -4.0]);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut t = Tape::new();
        let p = t.var(Tensor::scalar(2.0));
        let c = t.detach(p);
        let prod = t.mul(p, c).unwrap();
        let g = t.backward(prod).unwrap();
        assert_eq!(g.wrt(p).unwrap().item(), 2.0);
        assert!(g.wrt(c).is_none());
    }
}
