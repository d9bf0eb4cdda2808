#![allow(dead_code)]

use dada::networks::{DadaModel, ModelConfig};
use dada::rng::SplitMix64;
use dada::{Result, Tape, Tensor, Var};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;
/// Gradients smaller than this are compared absolutely.
pub const FD_FLOOR: f64 = 1e-5;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

pub fn random_tensor(rng: &mut SplitMix64, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.uniform(lo, hi)).collect();
    Tensor::new(rows, cols, data).unwrap()
}

/// Largest relative error between the tape gradient and central differences
/// of `build` with respect to every entry of every input.
pub fn fd_inputs(inputs: &[Tensor], build: impl Fn(&mut Tape, &[Var]) -> Result<Var>) -> f64 {
    fd_inputs_on(Tape::new, inputs, build)
}

/// [`fd_inputs`] on tapes produced by `new_tape`, e.g. with parameters bound.
pub fn fd_inputs_on(
    new_tape: impl Fn() -> Tape,
    inputs: &[Tensor],
    build: impl Fn(&mut Tape, &[Var]) -> Result<Var>,
) -> f64 {
    let mut tape = new_tape();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.var(t.clone())).collect();
    let out = build(&mut tape, &vars).unwrap();
    let grads = tape.backward(out).unwrap();

    let eval = |xs: &[Tensor]| -> f64 {
        let mut t = new_tape();
        let vs: Vec<Var> = xs.iter().map(|x| t.var(x.clone())).collect();
        let o = build(&mut t, &vs).unwrap();
        t.value(o).item()
    };

    let mut worst: f64 = 0.0;
    for (k, input) in inputs.iter().enumerate() {
        let zero = Tensor::zeros(input.rows(), input.cols());
        let g = grads.wrt(vars[k]).unwrap_or(&zero);
        for e in 0..input.len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[e] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[e] -= FD_STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(g.data()[e], numeric));
        }
    }
    worst
}

/// As [`fd_inputs`], with respect to every parameter of `model`.
pub fn fd_params(model: &DadaModel, build: impl Fn(&DadaModel, &mut Tape) -> Result<Var>) -> f64 {
    let mut tape = model.tape();
    let out = build(model, &mut tape).unwrap();
    let grads = tape.backward(out).unwrap();

    let eval = |m: &DadaModel| -> f64 {
        let mut t = m.tape();
        let o = build(m, &mut t).unwrap();
        t.value(o).item()
    };

    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let ids: Vec<_> = model.store.ids().collect();
    for id in ids {
        let base = model.store.get(id).clone();
        let zero = Tensor::zeros(base.rows(), base.cols());
        let g = grads.param(id).unwrap_or(&zero).clone();
        for e in 0..base.len() {
            let mut p = base.clone();
            p.data_mut()[e] += FD_STEP;
            probe.store.set(id, p).unwrap();
            let up = eval(&probe);
            let mut p = base.clone();
            p.data_mut()[e] -= FD_STEP;
            probe.store.set(id, p).unwrap();
            let down = eval(&probe);
            probe.store.set(id, base.clone()).unwrap();
            worst = worst.max(rel_err(g.data()[e], (up - down) / (2.0 * FD_STEP)));
        }
    }
    worst
}

pub fn small_config(input_dim: usize, latent: usize, classes: usize) -> ModelConfig {
    let mut cfg = ModelConfig::new(input_dim, latent, classes);
    cfg.extractor_hidden = vec![5];
    cfg.generator_hidden = vec![5];
    cfg.estimator_hidden = vec![4];
    cfg.classifier_hidden = vec![4];
    cfg
}

pub fn small_model(input_dim: usize, latent: usize, classes: usize, seed: u64) -> DadaModel {
    DadaModel::new(small_config(input_dim, latent, classes), &mut SplitMix64::new(seed)).unwrap()
}

/// Every parameter redrawn uniformly from `[-scale, scale]`.
pub fn randomize(model: &mut DadaModel, rng: &mut SplitMix64, scale: f64) {
    let ids: Vec<_> = model.store.ids().collect();
    for id in ids {
        let (r, c) = model.store.get(id).shape();
        model.store.set(id, random_tensor(rng, r, c, -scale, scale)).unwrap();
    }
}

/// `sum(a * r)` for a fixed random `r`, so that every output entry matters.
pub fn weighted_sum(tape: &mut Tape, a: Var, seed: u64) -> Result<Var> {
    let (rows, cols) = tape.value(a).shape();
    let r = random_tensor(&mut SplitMix64::new(seed), rows, cols, -1.0, 1.0);
    let r = tape.constant(r);
    let prod = tape.mul(a, r)?;
    tape.sum(prod)
}

/// Consistency loss evaluated term by term.
pub fn consistency_oracle(zs: &Tensor, zg: &Tensor, w: &Tensor, labels: &[usize], exp: bool) -> f64 {
    let b = zs.rows();
    let sim = |k: usize, i: usize| {
        let mut s = 0.0;
        for p in 0..w.rows() {
            for q in 0..w.cols() {
                s += zs.get(k, p) * w.get(p, q) * zg.get(i, q);
            }
        }
        if exp {
            s.exp()
        } else {
            s.max(1e-6)
        }
    };
    let mut total = 0.0;
    for i in 0..b {
        let pos = sim(i, i);
        let neg: f64 = (0..b).filter(|&k| labels[k] != labels[i]).map(|k| sim(k, i)).sum();
        total += pos / (pos + neg);
    }
    -total / b as f64
}

pub mod composite {
    use super::*;
    use dada::trainer::{build_objective, DomainBatch, StepConstants, TrainConfig};

    /// Worst finite-difference error of the full objective with respect to
    /// every parameter, at one random point (B=4, d=3, C=2, m=2, target
    /// terms active).
    pub fn worst_error(seed: u64) -> f64 {
        let mut rng = SplitMix64::new(seed);
        let mut model = small_model(2, 3, 2, seed);
        randomize(&mut model, &mut rng, 0.8);
        let batch = DomainBatch {
            source_x: random_tensor(&mut rng, 4, 2, -2.0, 2.0),
            source_y: vec![0, 1, 1, 0],
            target_x: random_tensor(&mut rng, 4, 2, -2.0, 2.0),
            target_rows: vec![0, 1, 2, 3],
        };
        let cfg = TrainConfig {
            m: 2,
            batch_size: 4,
            epochs: 2,
            warmup_epochs: 0,
            ..TrainConfig::default()
        };
        let mut consts = StepConstants::record();
        {
            let mut tape = model.tape();
            build_objective(&mut tape, &model, &batch, &cfg, 1, &mut rng, &mut consts).unwrap();
        }
        let replay = consts.into_replay();
        fd_params(&model, |m, tape| {
            let mut c = replay.clone();
            let mut unused = SplitMix64::new(0);
            Ok(build_objective(tape, m, &batch, &cfg, 1, &mut unused, &mut c)?.total)
        })
    }
}
