//! The per-minibatch adaptation step, the epoch loop and evaluation.

use std::time::Instant;

use crate::discrepancy::{mmd2_with_bandwidth, KernelConfig};
use crate::error::{DadaError, Result};
use crate::losses::{
    self, consistency_loss, cross_entropy, ddm_loss, dde_loss_from_target, domain_weights,
    source_sup_loss, target_sup_loss, transfer_loss, LossBreakdown, LossWeights, SimilarityMode,
    WeightSign,
};
use crate::networks::{DadaModel, ModelConfig};
use crate::params::sgd_step;
use crate::rng::SplitMix64;
use crate::synth::{EvalLabels, LabeledDataset};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Evenly spaced priors `low, low + step, ..., high`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorGrid {
    pub low: f64,
    pub high: f64,
    pub step: f64,
}

impl Default for PriorGrid {
    fn default() -> Self {
        Self {
            low: -0.5,
            high: 0.5,
            step: 0.01,
        }
    }
}

impl PriorGrid {
    pub fn len(&self) -> usize {
        if !(self.step > 0.0) || self.high < self.low {
            return 0;
        }
        ((self.high - self.low) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, k: usize) -> f64 {
        self.low + k as f64 * self.step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }
}

/// `m` distinct grid points drawn without replacement.
pub fn sample_priors(grid: &PriorGrid, m: usize, rng: &mut SplitMix64) -> Result<Vec<f64>> {
    let n = grid.len();
    if m > n {
        return Err(DadaError::contract(format!(
            "cannot draw {m} priors from a grid of {n} points"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = i + rng.below(n - i);
        idx.swap(i, j);
    }
    Ok(idx[..m].iter().map(|&k| grid.point(k)).collect())
}

/// Component switches for ablation runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ablation {
    /// Align source and target directly with one MMD term; no generator,
    /// estimator, consistency or separation terms.
    pub disable_pseudo_domains: bool,
    pub disable_ddm: bool,
    /// Pseudo labels from the plain target prediction instead of the
    /// projection into pseudo domains.
    pub disable_mapping: bool,
    pub disable_pseudo_labels: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub weights: LossWeights,
    pub beta: f64,
    pub m: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub grid: PriorGrid,
    pub margin: f64,
    pub seed: u64,
    pub ablation: Ablation,
    pub weight_sign: WeightSign,
    pub similarity_mode: SimilarityMode,
    pub kernel: KernelConfig,
    /// Minimum averaged probability for a pseudo label to be used; 0 keeps all.
    pub pseudo_label_threshold: f64,
    /// Write measured milliseconds per batch instead of 0.
    pub record_timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            beta: 0.1,
            m: 4,
            batch_size: 32,
            epochs: 80,
            warmup_epochs: 10,
            lr: 0.001,
            momentum: 0.9,
            weight_decay: 5e-4,
            grid: PriorGrid::default(),
            margin: 1.0,
            seed: 0,
            ablation: Ablation::default(),
            weight_sign: WeightSign::Negated,
            similarity_mode: SimilarityMode::Exp,
            kernel: KernelConfig::default(),
            pseudo_label_threshold: 0.0,
            record_timing: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(DadaError::contract("m must be at least 1"));
        }
        if self.warmup_epochs > self.epochs {
            return Err(DadaError::contract(format!(
                "warm-up epochs ({}) exceed epochs ({})",
                self.warmup_epochs, self.epochs
            )));
        }
        if !(self.grid.step > 0.0) {
            return Err(DadaError::contract("prior grid step must be positive"));
        }
        if self.m > self.grid.len() {
            return Err(DadaError::contract(format!(
                "m = {} exceeds the {} grid points",
                self.m,
                self.grid.len()
            )));
        }
        if self.batch_size == 0 {
            return Err(DadaError::contract("batch size must be positive"));
        }
        Ok(())
    }
}

/// Model with the default architecture for the given problem size, seeded
/// from sub-stream 0 of `seed`.
pub fn init_model(config: ModelConfig, seed: u64) -> Result<DadaModel> {
    DadaModel::new(config, &mut SplitMix64::stream(seed, 0))
}

/// Matched source and target minibatch.
#[derive(Debug, Clone)]
pub struct DomainBatch {
    pub source_x: Tensor,
    pub source_y: Vec<usize>,
    pub target_x: Tensor,
    /// Row indices of the target batch within the full target set.
    pub target_rows: Vec<usize>,
}

/// Values treated as constants by the objective. A fresh instance records
/// them while the objective is built; a recorded instance replays them,
/// which lets finite differences see the same function the gradient sees.
#[derive(Debug, Clone, Default)]
pub struct StepConstants {
    replay: bool,
    priors: Vec<f64>,
    bandwidths: Vec<f64>,
    bandwidth_cursor: usize,
    dde_targets: Vec<f64>,
    weights: Vec<f64>,
    pseudo_labels: Option<Vec<usize>>,
}

impl StepConstants {
    pub fn record() -> Self {
        Self::default()
    }

    /// Switches a recorded instance to replay mode.
    pub fn into_replay(mut self) -> Self {
        self.replay = true;
        self.bandwidth_cursor = 0;
        self
    }

    fn rewind(&mut self) {
        self.bandwidth_cursor = 0;
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn pseudo_labels(&self) -> Option<&[usize]> {
        self.pseudo_labels.as_deref()
    }

    fn bandwidth(&mut self, kernel: &KernelConfig, x: &Tensor, y: &Tensor) -> Result<f64> {
        if self.replay {
            let v = *self
                .bandwidths
                .get(self.bandwidth_cursor)
                .ok_or_else(|| DadaError::contract("replay ran out of recorded bandwidths"))?;
            self.bandwidth_cursor += 1;
            Ok(v)
        } else {
            let v = kernel.resolve(x, y)?;
            self.bandwidths.push(v);
            Ok(v)
        }
    }
}

/// The built objective of one minibatch.
#[derive(Debug, Clone)]
pub struct Objective {
    pub total: Var,
    pub breakdown: LossBreakdown,
    pub pseudo_labels: Option<Vec<usize>>,
    pub mean_pseudo_target_mmd: f64,
}

fn named<T>(term: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        DadaError::Domain { .. } => DadaError::NonFinite { term },
        other => other,
    })
}

fn finite(tape: &Tape, term: &'static str, v: Var) -> Result<f64> {
    let x = tape.value(v).item();
    if x.is_finite() {
        Ok(x)
    } else {
        Err(DadaError::NonFinite { term })
    }
}

fn mmd_term(
    tape: &mut Tape,
    consts: &mut StepConstants,
    kernel: &KernelConfig,
    x: Var,
    y: Var,
) -> Result<Var> {
    let sigma2 = {
        let (xv, yv) = (tape.value(x).clone(), tape.value(y).clone());
        consts.bandwidth(kernel, &xv, &yv)?
    };
    mmd2_with_bandwidth(tape, x, y, sigma2)
}

/// Builds every term of the objective on `tape` for one minibatch.
///
/// `rng` is only consulted for the priors when `consts` is recording.
pub fn build_objective(
    tape: &mut Tape,
    model: &DadaModel,
    batch: &DomainBatch,
    cfg: &TrainConfig,
    epoch: usize,
    rng: &mut SplitMix64,
    consts: &mut StepConstants,
) -> Result<Objective> {
    let b = batch.source_x.rows();
    if b == 0 || batch.target_x.rows() != b || batch.source_y.len() != b {
        return Err(DadaError::contract(format!(
            "source batch ({b} rows, {} labels) and target batch ({} rows) must match",
            batch.source_y.len(),
            batch.target_x.rows()
        )));
    }
    consts.rewind();
    let ab = cfg.ablation;
    let w = cfg.weights;

    let xs = tape.constant(batch.source_x.clone());
    let xt = tape.constant(batch.target_x.clone());
    let z_s = model.extract(tape, xs)?;
    let z_t = model.extract(tape, xt)?;
    let q_s = model.classify(tape, z_s)?;

    let mut parts = LossBreakdown::default();
    let mut weighted: Vec<Var> = Vec::new();
    let mut add_term = |tape: &mut Tape, term: Var, weight: f64| -> Result<()> {
        if weight != 0.0 {
            weighted.push(tape.scale(term, weight)?);
        }
        Ok(())
    };

    let sup_s;
    let mut pseudo_values: Vec<Tensor> = Vec::new();

    if ab.disable_pseudo_domains {
        let d = named("transfer", mmd_term(tape, consts, &cfg.kernel, z_s, z_t))?;
        parts.transfer = finite(tape, "transfer", d)?;
        parts.pseudo_target_mmd = vec![parts.transfer];
        add_term(tape, d, w.transfer)?;
        sup_s = named("sup_s", source_sup_loss(tape, q_s, &[], &batch.source_y))?;
    } else {
        if !consts.replay {
            consts.priors = sample_priors(&cfg.grid, cfg.m, rng)?;
        }
        let priors = consts.priors.clone();
        let m = priors.len();
        let mut reps = Vec::with_capacity(m);
        for &gamma in &priors {
            reps.push(model.generate_pseudo(tape, z_s, gamma)?);
        }

        // Consistency, averaged over pseudo domains.
        let mut cons = Vec::with_capacity(m);
        for &z_j in &reps {
            cons.push(named(
                "consistency",
                consistency_loss(tape, model, z_s, z_j, &batch.source_y, cfg.similarity_mode),
            )?);
        }
        let cons_sum = tape.add_all(&cons)?;
        let consistency = tape.scale(cons_sum, 1.0 / m as f64)?;
        parts.consistency = finite(tape, "consistency", consistency)?;
        add_term(tape, consistency, w.consistency)?;

        // Pseudo-to-target MMD, estimator regression and weights.
        let mut mmd_nodes = Vec::with_capacity(m);
        for &z_j in &reps {
            mmd_nodes.push(named("transfer", mmd_term(tape, consts, &cfg.kernel, z_j, z_t))?);
        }
        parts.pseudo_target_mmd = mmd_nodes.iter().map(|&v| tape.value(v).item()).collect();
        if !consts.replay {
            consts.dde_targets = parts.pseudo_target_mmd.clone();
        }
        let mut deltas = Vec::with_capacity(m);
        let mut dde_terms = Vec::with_capacity(m);
        for (j, &gamma) in priors.iter().enumerate() {
            let delta = named("dde", model.estimate_discrepancy(tape, gamma))?;
            deltas.push(tape.value(delta).item());
            dde_terms.push(named("dde", dde_loss_from_target(tape, delta, consts.dde_targets[j]))?);
        }
        let dde_sum = tape.add_all(&dde_terms)?;
        let dde = tape.scale(dde_sum, 1.0 / m as f64)?;
        parts.dde = finite(tape, "dde", dde)?;
        add_term(tape, dde, w.dde)?;

        if !consts.replay {
            consts.weights = named("transfer", domain_weights(&deltas, cfg.weight_sign))?;
        }
        let transfer = named("transfer", transfer_loss(tape, &consts.weights, &mmd_nodes))?;
        parts.transfer = finite(tape, "transfer", transfer)?;
        add_term(tape, transfer, w.transfer)?;

        // Separation between pseudo domains.
        if !ab.disable_ddm && m > 1 {
            let mut pair_nodes = Vec::with_capacity(m * (m - 1) / 2);
            for i in 0..m {
                for j in i + 1..m {
                    pair_nodes.push(named("ddm", mmd_term(tape, consts, &cfg.kernel, reps[i], reps[j]))?);
                }
            }
            parts.pseudo_pair_mmd = pair_nodes.iter().map(|&v| tape.value(v).item()).collect();
            let ddm = named("ddm", ddm_loss(tape, &pair_nodes, cfg.margin))?;
            parts.ddm = finite(tape, "ddm", ddm)?;
            add_term(tape, ddm, w.ddm)?;
        }

        let mut q_pseudo = Vec::with_capacity(m);
        for &z_j in &reps {
            q_pseudo.push(model.classify(tape, z_j)?);
        }
        sup_s = named("sup_s", source_sup_loss(tape, q_s, &q_pseudo, &batch.source_y))?;
        pseudo_values = reps.iter().map(|&r| tape.value(r).clone()).collect();
    }
    parts.sup_s = finite(tape, "sup_s", sup_s)?;

    // Target self-training after warm-up.
    let mut assigned = None;
    if epoch >= cfg.warmup_epochs && !ab.disable_pseudo_labels {
        if !consts.replay {
            let zt_value = tape.value(z_t).clone();
            let (labels, probs) = if ab.disable_mapping || ab.disable_pseudo_domains {
                let q = model.classify(tape, z_t)?;
                let p = tape.value(q).clone();
                (p.argmax_rows(), p)
            } else {
                losses::pseudo_labels(model, &zt_value, &pseudo_values)?
            };
            let keep: Vec<usize> = (0..b)
                .filter(|&i| probs.row(i)[labels[i]] >= cfg.pseudo_label_threshold)
                .collect();
            consts.pseudo_labels = Some(if keep.len() == b { labels } else { mask_labels(&labels, &keep) });
        }
        let labels = consts.pseudo_labels.clone().expect("recorded");
        let sup_t = named("sup_t", target_term(tape, model, z_t, xt, &labels, cfg.beta))?;
        if let Some(sup_t) = sup_t {
            parts.sup_t = finite(tape, "sup_t", sup_t)?;
            add_term(tape, sup_t, w.target_sup)?;
        }
        assigned = Some(labels);
    }

    let mut all = vec![sup_s];
    all.extend(weighted);
    let total = tape.add_all(&all)?;
    parts.total = finite(tape, "total", total)?;

    let mean_pseudo_target_mmd =
        parts.pseudo_target_mmd.iter().sum::<f64>() / parts.pseudo_target_mmd.len() as f64;
    Ok(Objective {
        total,
        breakdown: parts,
        pseudo_labels: assigned,
        mean_pseudo_target_mmd,
    })
}

/// Sentinel for rows dropped by the confidence threshold.
const DROPPED: usize = usize::MAX;

fn mask_labels(labels: &[usize], keep: &[usize]) -> Vec<usize> {
    let mut out = vec![DROPPED; labels.len()];
    for &i in keep {
        out[i] = labels[i];
    }
    out
}

fn target_term(
    tape: &mut Tape,
    model: &DadaModel,
    z_t: Var,
    x_t: Var,
    labels: &[usize],
    beta: f64,
) -> Result<Option<Var>> {
    if labels.iter().all(|&l| l != DROPPED) {
        let q_t = model.classify(tape, z_t)?;
        return target_sup_loss(tape, q_t, labels, beta).map(Some);
    }
    let kept: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != DROPPED).collect();
    if kept.is_empty() {
        return Ok(None);
    }
    // Only confident rows enter the cross-entropy; the regularizer sees all.
    let subset = tape.value(x_t).select_rows(&kept);
    let xs = tape.constant(subset);
    let z_kept = model.extract(tape, xs)?;
    let q_kept = model.classify(tape, z_kept)?;
    let kept_labels: Vec<usize> = kept.iter().map(|&i| labels[i]).collect();
    let ce = cross_entropy(tape, q_kept, &kept_labels)?;
    if beta == 0.0 {
        return Ok(Some(ce));
    }
    let q_t = model.classify(tape, z_t)?;
    let mi = losses::mi_regularizer(tape, q_t)?;
    let mi = tape.scale(mi, beta)?;
    tape.add(ce, mi).map(Some)
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub breakdown: LossBreakdown,
    pub pseudo_labels: Option<Vec<usize>>,
    pub mean_pseudo_target_mmd: f64,
}

/// One optimization step on a minibatch.
pub fn train_step(
    model: &mut DadaModel,
    batch: &DomainBatch,
    cfg: &TrainConfig,
    epoch: usize,
    rng: &mut SplitMix64,
) -> Result<StepOutcome> {
    let mut tape = model.tape();
    let mut consts = StepConstants::record();
    let obj = build_objective(&mut tape, model, batch, cfg, epoch, rng, &mut consts)?;
    let grads = tape.backward(obj.total)?;
    sgd_step(&mut model.store, &grads, cfg.lr, cfg.momentum, cfg.weight_decay)?;
    Ok(StepOutcome {
        breakdown: obj.breakdown,
        pseudo_labels: obj.pseudo_labels,
        mean_pseudo_target_mmd: obj.mean_pseudo_target_mmd,
    })
}

/// One row of per-epoch training metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub total: f64,
    pub sup_s: f64,
    pub sup_t: f64,
    pub consistency: f64,
    pub transfer: f64,
    pub ddm: f64,
    pub dde: f64,
    pub mean_pseudo_target_mmd: f64,
    pub target_accuracy: f64,
    pub pseudo_label_agreement: f64,
    pub ms_per_batch: f64,
}

impl MetricsRecord {
    pub const CSV_HEADER: &'static str = "epoch,total,sup_s,sup_t,consistency,transfer,ddm,dde,\
mean_pseudo_target_mmd,target_accuracy,pseudo_label_agreement,ms_per_batch";

    pub fn parts(&self) -> LossBreakdown {
        LossBreakdown {
            sup_s: self.sup_s,
            sup_t: self.sup_t,
            consistency: self.consistency,
            transfer: self.transfer,
            ddm: self.ddm,
            dde: self.dde,
            total: self.total,
            ..Default::default()
        }
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.3}",
            self.epoch,
            self.total,
            self.sup_s,
            self.sup_t,
            self.consistency,
            self.transfer,
            self.ddm,
            self.dde,
            self.mean_pseudo_target_mmd,
            self.target_accuracy,
            self.pseudo_label_agreement,
            self.ms_per_batch
        )
    }
}

/// Hooks that see held-out truth; the training loop itself never does.
pub trait EpochEvaluator {
    fn target_accuracy(&self, model: &DadaModel) -> Result<f64>;
    /// Fraction of `(target row, pseudo label)` pairs that are correct.
    fn pseudo_label_agreement(&self, assigned: &[(usize, usize)]) -> f64;
}

pub struct TargetEvaluator<'a> {
    pub features: &'a Tensor,
    pub truth: &'a EvalLabels,
}

impl EpochEvaluator for TargetEvaluator<'_> {
    fn target_accuracy(&self, model: &DadaModel) -> Result<f64> {
        evaluate(model, self.features, &self.truth.labels)
    }

    fn pseudo_label_agreement(&self, assigned: &[(usize, usize)]) -> f64 {
        let used: Vec<_> = assigned.iter().filter(|(_, l)| *l != DROPPED).collect();
        if used.is_empty() {
            return f64::NAN;
        }
        let hits = used.iter().filter(|(row, l)| self.truth.labels[*row] == *l).count();
        hits as f64 / used.len() as f64
    }
}

/// Fraction of rows whose predicted class equals `labels`.
pub fn evaluate(model: &DadaModel, features: &Tensor, labels: &[usize]) -> Result<f64> {
    if features.rows() != labels.len() {
        return Err(DadaError::contract(format!(
            "{} feature rows but {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Ok(f64::NAN);
    }
    let pred = model.predict(features)?.argmax_rows();
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Batch `k` of an epoch: positions `k*B .. k*B + B` of each permutation,
/// wrapping around the shorter domain.
fn cyclic_batch(perm: &[usize], k: usize, b: usize) -> Vec<usize> {
    (0..b).map(|i| perm[(k * b + i) % perm.len()]).collect()
}

/// Runs `cfg.epochs` epochs of training. Each epoch shuffles both domains
/// with the run generator and walks `ceil(max(Ns, Nt) / B)` matched batches.
pub fn fit(
    model: &mut DadaModel,
    source: &LabeledDataset,
    target: &LabeledDataset,
    cfg: &TrainConfig,
    evaluator: Option<&dyn EpochEvaluator>,
) -> Result<Vec<MetricsRecord>> {
    fit_with(model, source, target, cfg, evaluator, |_| Ok(()))
}

/// [`fit`], calling `on_epoch` with each record as soon as it is complete.
pub fn fit_with(
    model: &mut DadaModel,
    source: &LabeledDataset,
    target: &LabeledDataset,
    cfg: &TrainConfig,
    evaluator: Option<&dyn EpochEvaluator>,
    mut on_epoch: impl FnMut(&MetricsRecord) -> Result<()>,
) -> Result<Vec<MetricsRecord>> {
    cfg.validate()?;
    let source_labels = source
        .labels
        .as_ref()
        .ok_or_else(|| DadaError::contract("source dataset must be labeled"))?;
    if source.is_empty() || target.is_empty() {
        return Err(DadaError::contract("datasets must be non-empty"));
    }
    let mut rng = SplitMix64::stream(cfg.seed, 1);
    let b = cfg.batch_size;
    let batches = source.len().max(target.len()).div_ceil(b);
    let mut records = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let perm_s = rng.permutation(source.len());
        let perm_t = rng.permutation(target.len());
        let mut sums = LossBreakdown::default();
        let mut mmd_sum = 0.0;
        let mut assigned = Vec::new();
        let mut elapsed_ms = 0.0;

        for k in 0..batches {
            let s_idx = cyclic_batch(&perm_s, k, b);
            let t_idx = cyclic_batch(&perm_t, k, b);
            let batch = DomainBatch {
                source_x: source.features.select_rows(&s_idx),
                source_y: s_idx.iter().map(|&i| source_labels[i]).collect(),
                target_x: target.features.select_rows(&t_idx),
                target_rows: t_idx,
            };
            let start = Instant::now();
            let out = train_step(model, &batch, cfg, epoch, &mut rng)?;
            if cfg.record_timing {
                elapsed_ms += start.elapsed().as_secs_f64() * 1e3;
            }
            let p = &out.breakdown;
            sums.total += p.total;
            sums.sup_s += p.sup_s;
            sums.sup_t += p.sup_t;
            sums.consistency += p.consistency;
            sums.transfer += p.transfer;
            sums.ddm += p.ddm;
            sums.dde += p.dde;
            mmd_sum += out.mean_pseudo_target_mmd;
            if let Some(labels) = out.pseudo_labels {
                assigned.extend(batch.target_rows.iter().copied().zip(labels));
            }
        }

        let n = batches as f64;
        let (target_accuracy, pseudo_label_agreement) = match evaluator {
            Some(ev) => (
                ev.target_accuracy(model)?,
                if assigned.is_empty() {
                    f64::NAN
                } else {
                    ev.pseudo_label_agreement(&assigned)
                },
            ),
            None => (f64::NAN, f64::NAN),
        };
        records.push(MetricsRecord {
            epoch,
            total: sums.total / n,
            sup_s: sums.sup_s / n,
            sup_t: sums.sup_t / n,
            consistency: sums.consistency / n,
            transfer: sums.transfer / n,
            ddm: sums.ddm / n,
            dde: sums.dde / n,
            mean_pseudo_target_mmd: mmd_sum / n,
            target_accuracy,
            pseudo_label_agreement,
            ms_per_batch: elapsed_ms / n,
        });
        on_epoch(records.last().expect("just pushed"))?;
    }
    Ok(records)
}
