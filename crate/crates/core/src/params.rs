//! Named parameters and the momentum SGD update.

use std::collections::HashMap;

use crate::error::{DadaError, Result};
use crate::tape::Gradients;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParameterStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    velocity: Vec<Tensor>,
    by_name: HashMap<String, ParamId>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(DadaError::contract(format!("duplicate parameter name `{name}`")));
        }
        let id = ParamId(self.values.len());
        self.velocity.push(Tensor::zeros(value.rows(), value.cols()));
        self.values.push(value);
        self.by_name.insert(name.clone(), id);
        self.names.push(name);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn velocity(&self, id: ParamId) -> &Tensor {
        &self.velocity[id.0]
    }

    pub fn set(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let current = &self.values[id.0];
        if current.shape() != value.shape() {
            return Err(DadaError::Dimension {
                op: "set_parameter",
                left: current.shape(),
                right: value.shape(),
            });
        }
        self.values[id.0] = value;
        Ok(())
    }

    pub fn set_velocity(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let current = &self.velocity[id.0];
        if current.shape() != value.shape() {
            return Err(DadaError::Dimension {
                op: "set_velocity",
                left: current.shape(),
                right: value.shape(),
            });
        }
        self.velocity[id.0] = value;
        Ok(())
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.values.iter().enumerate().map(|(i, v)| (ParamId(i), v))
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }
}

/// One SGD step with heavy-ball momentum and L2 weight decay, applied to
/// every parameter present in `grads`:
///
/// ```text
/// v <- momentum * v + (g + weight_decay * p)
/// p <- p - lr * v
/// ```
pub fn sgd_step(
    store: &mut ParameterStore,
    grads: &Gradients,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    for (id, g) in grads.params() {
        let i = id.index();
        if i >= store.len() {
            return Err(DadaError::contract(format!("gradient for unknown parameter {i}")));
        }
        let p = &mut store.values[i];
        if p.shape() != g.shape() {
            return Err(DadaError::Dimension {
                op: "sgd_step",
                left: p.shape(),
                right: g.shape(),
            });
        }
        let v = &mut store.velocity[i];
        for ((pv, vv), &gv) in p.data_mut().iter_mut().zip(v.data_mut()).zip(g.data()) {
            *vv = momentum * *vv + (gv + weight_decay * *pv);
            *pv -= lr * *vv;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::Tape;

    fn step_scalar(p: f64, g_scale: f64, v: f64, lr: f64, momentum: f64) -> (f64, f64) {
        let mut store = ParameterStore::new();
        let id = store.add("p", Tensor::scalar(p)).unwrap();
        store.set_velocity(id, Tensor::scalar(v)).unwrap();
        let mut tape = Tape::with_params(&store);
        let pv = tape.param(id);
        let loss = tape.scale(pv, g_scale).unwrap();
        let grads = tape.backward(loss).unwrap();
        sgd_step(&mut store, &grads, lr, momentum, 0.0).unwrap();
        (store.get(id).item(), store.velocity(id).item())
    }

    #[test]
    fn plain_gradient_step() {
        let (p, _) = step_scalar(1.0, 1.0, 0.0, 0.1, 0.0);
        assert!((p - 0.9).abs() < 1e-15);
    }

    #[test]
    fn momentum_only_update() {
        let (p, v) = step_scalar(1.0, 0.0, 1.0, 0.1, 0.9);
        assert!((v - 0.9).abs() < 1e-15);
        assert!((p - 0.91).abs() < 1e-15);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut store = ParameterStore::new();
        store.add("w", Tensor::zeros(1, 1)).unwrap();
        assert!(store.add("w", Tensor::zeros(1, 1)).is_err());
    }

    #[test]
    fn untouched_parameters_do_not_move() {
        let mut store = ParameterStore::new();
        let a = store.add("a", Tensor::scalar(1.0)).unwrap();
        let b = store.add("b", Tensor::scalar(1.0)).unwrap();
        let mut tape = Tape::with_params(&store);
        let av = tape.param(a);
        let loss = tape.square(av).unwrap();
        let grads = tape.backward(loss).unwrap();
        sgd_step(&mut store, &grads, 0.1, 0.9, 5e-4).unwrap();
        assert_eq!(store.get(b).item(), 1.0);
        assert!(store.get(a).item() < 1.0);
    }

    #[test]
    fn quadratic_descent_is_monotone_after_warmup() {
        // f(p) = sum_i c_i (p_i - t_i)^2 over 10 parameters.
        let mut rng = crate::rng::SplitMix64::new(11);
        let curv: Vec<f64> = (0..10).map(|_| rng.uniform(0.5, 2.0)).collect();
        let target: Vec<f64> = (0..10).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let init: Vec<f64> = (0..10).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let mut store = ParameterStore::new();
        let id = store.add("p", Tensor::new(1, 10, init).unwrap()).unwrap();
        let c = Tensor::new(1, 10, curv).unwrap();
        let t = Tensor::new(1, 10, target).unwrap();

        let mut losses = Vec::new();
        for _ in 0..100 {
            let mut tape = Tape::with_params(&store);
            let p = tape.param(id);
            let tv = tape.constant(t.clone());
            let cv = tape.constant(c.clone());
            let diff = tape.sub(p, tv).unwrap();
            let sq = tape.square(diff).unwrap();
            let weighted = tape.mul(sq, cv).unwrap();
            let loss = tape.sum(weighted).unwrap();
            losses.push(tape.value(loss).item());
            let grads = tape.backward(loss).unwrap();
            sgd_step(&mut store, &grads, 0.05, 0.0, 0.0).unwrap();
        }
        for w in losses[5..].windows(2) {
            assert!(w[1] <= w[0], "loss increased: {} -> {}", w[0], w[1]);
        }
    }
}
