//! Loss terms of the objective and the mean-shift pseudo-labeling device.
//!
//! Every differentiable term returns a 1x1 node on the caller's tape.
//! Stop-gradient points:
//! - the MMD target of the estimator regression is detached,
//! - the pseudo-domain weights are plain numbers,
//! - target-to-pseudo projection and pseudo labels are computed on values.

use crate::error::{DadaError, Result};
use crate::networks::DadaModel;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityMode {
    /// `e(a, b) = exp(a W b^T)`.
    Exp,
    /// `e(a, b) = max(a W b^T, RAW_SIMILARITY_FLOOR)`.
    RawClamped,
}

pub const RAW_SIMILARITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightSign {
    /// `w ∝ exp(-delta)`: closer pseudo domains weigh more.
    Negated,
    /// `w ∝ exp(+delta)`.
    AsPrinted,
}

/// The pseudo domains of one minibatch.
#[derive(Debug, Clone)]
pub struct PseudoDomainSet {
    pub priors: Vec<f64>,
    pub reps: Vec<Var>,
    pub deltas: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PseudoDomainSet {
    pub fn new(
        tape: &Tape,
        priors: Vec<f64>,
        reps: Vec<Var>,
        deltas: Vec<f64>,
        sign: WeightSign,
    ) -> Result<Self> {
        if priors.is_empty() || priors.len() != reps.len() || reps.len() != deltas.len() {
            return Err(DadaError::contract(format!(
                "pseudo-domain set needs matching non-empty priors/reps/deltas, got {}/{}/{}",
                priors.len(),
                reps.len(),
                deltas.len()
            )));
        }
        let shape = tape.value(reps[0]).shape();
        if let Some(&bad) = reps.iter().find(|&&r| tape.value(r).shape() != shape) {
            return Err(DadaError::Dimension {
                op: "pseudo_domain_set",
                left: shape,
                right: tape.value(bad).shape(),
            });
        }
        let weights = domain_weights(&deltas, sign)?;
        Ok(Self {
            priors,
            reps,
            deltas,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }
}

/// Per-term values of one objective evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossBreakdown {
    pub sup_s: f64,
    pub sup_t: f64,
    pub consistency: f64,
    pub transfer: f64,
    pub ddm: f64,
    pub dde: f64,
    pub total: f64,
    /// Squared MMD between each pseudo domain and the target batch (or the
    /// single source/target value when pseudo domains are disabled).
    pub pseudo_target_mmd: Vec<f64>,
    /// Squared MMD for each unordered pair of pseudo domains.
    pub pseudo_pair_mmd: Vec<f64>,
}

/// Weights of the objective's non-source terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub target_sup: f64,
    pub consistency: f64,
    pub transfer: f64,
    pub ddm: f64,
    pub dde: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            target_sup: 0.5,
            consistency: 0.1,
            transfer: 0.01,
            ddm: 0.01,
            dde: 0.1,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        Self {
            target_sup: 0.0,
            consistency: 0.0,
            transfer: 0.0,
            ddm: 0.0,
            dde: 0.0,
        }
    }
}

/// `sup_s + l1 sup_t + l2 consistency + l3 transfer + l4 ddm + l5 dde`.
pub fn total_loss(parts: &LossBreakdown, w: &LossWeights) -> f64 {
    parts.sup_s
        + w.target_sup * parts.sup_t
        + w.consistency * parts.consistency
        + w.transfer * parts.transfer
        + w.ddm * parts.ddm
        + w.dde * parts.dde
}

fn check_rows(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.rows() != b.rows() {
        return Err(DadaError::Dimension {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

/// Contrastive consistency between source rows and their generated
/// counterparts.
///
/// For each row `i` the ratio `e(z_i, g_i) / (e(z_i, g_i) + sum_k e(z_k, g_i))`
/// runs over the batch rows `k` whose label differs from `y_i`; a row with
/// no such negatives contributes a ratio of 1. The loss is minus the mean
/// ratio, so it lies in `[-1, 0)`.
pub fn consistency_loss(
    tape: &mut Tape,
    model: &DadaModel,
    z_s: Var,
    z_gamma: Var,
    labels: &[usize],
    mode: SimilarityMode,
) -> Result<Var> {
    let (zs, zg) = (tape.value(z_s), tape.value(z_gamma));
    if zs.shape() != zg.shape() {
        return Err(DadaError::Dimension {
            op: "consistency_loss",
            left: zs.shape(),
            right: zg.shape(),
        });
    }
    let b = zs.rows();
    if labels.len() != b {
        return Err(DadaError::contract(format!(
            "consistency_loss: {} labels for {} rows",
            labels.len(),
            b
        )));
    }
    // sim[k, i] = z_k W g_i^T
    let sim = model.similarity_matrix(tape, z_s, z_gamma)?;

    // Entries that enter the ratio of column i: the positive (k == i) and
    // the negatives (y_k != y_i).
    let mut positive_mask = Tensor::zeros(b, b);
    let mut negative_mask = Tensor::zeros(b, b);
    for i in 0..b {
        positive_mask.set(i, i, 1.0);
        for k in 0..b {
            if labels[k] != labels[i] {
                negative_mask.set(k, i, 1.0);
            }
        }
    }

    let e = match mode {
        SimilarityMode::Exp => {
            // Shifting a column by a constant leaves its ratio unchanged;
            // subtract the largest participating entry to keep exp bounded.
            let sv = tape.value(sim);
            let mut shift = Tensor::zeros(b, b);
            for i in 0..b {
                let mut max = sv.get(i, i);
                for k in 0..b {
                    if negative_mask.get(k, i) > 0.0 {
                        max = max.max(sv.get(k, i));
                    }
                }
                for k in 0..b {
                    shift.set(k, i, max);
                }
            }
            let shift = tape.constant(shift);
            let shifted = tape.sub(sim, shift)?;
            tape.exp(shifted)?
        }
        SimilarityMode::RawClamped => {
            let lowered = tape.add_scalar(sim, -RAW_SIMILARITY_FLOOR)?;
            let clipped = tape.relu(lowered)?;
            tape.add_scalar(clipped, RAW_SIMILARITY_FLOOR)?
        }
    };

    let ones_row = tape.constant(Tensor::ones(1, b));
    let pos_mask = tape.constant(positive_mask);
    let neg_mask = tape.constant(negative_mask);
    let pos_entries = tape.mul(e, pos_mask)?;
    let neg_entries = tape.mul(e, neg_mask)?;
    let pos = tape.matmul(ones_row, pos_entries)?; // 1 x B
    let neg = tape.matmul(ones_row, neg_entries)?; // 1 x B
    let denom = tape.add(pos, neg)?;
    let ratio = tape.div(pos, denom)?;
    let mean_ratio = tape.mean(ratio)?;
    tape.scale(mean_ratio, -1.0)
}

/// `(target_mmd - delta(gamma))^2` with `target_mmd` a constant.
pub fn dde_loss_from_target(tape: &mut Tape, delta: Var, target_mmd: f64) -> Result<Var> {
    let target = tape.constant(Tensor::scalar(target_mmd));
    let diff = tape.sub(target, delta)?;
    tape.square(diff)
}

/// Estimator regression loss for one prior, computing the batch MMD target
/// at bandwidth `sigma2` and detaching it.
pub fn dde_loss(
    tape: &mut Tape,
    model: &DadaModel,
    gamma: f64,
    z_gamma: Var,
    z_t: Var,
    sigma2: f64,
) -> Result<Var> {
    let mmd = crate::discrepancy::mmd2_with_bandwidth(tape, z_gamma, z_t, sigma2)?;
    let target = tape.value(mmd).item();
    let delta = model.estimate_discrepancy(tape, gamma)?;
    dde_loss_from_target(tape, delta, target)
}

/// Hinged separation between pseudo domains:
/// `sum_{i<j} max(0, margin - pair_mmd[i<j])`, given the pair MMD nodes in
/// row-major upper-triangle order. Empty input gives 0.
pub fn ddm_loss(tape: &mut Tape, pair_mmd: &[Var], margin: f64) -> Result<Var> {
    if pair_mmd.is_empty() {
        return Ok(tape.constant(Tensor::scalar(0.0)));
    }
    let mut hinges = Vec::with_capacity(pair_mmd.len());
    for &m in pair_mmd {
        let neg = tape.scale(m, -1.0)?;
        let gap = tape.add_scalar(neg, margin)?;
        hinges.push(tape.relu(gap)?);
    }
    tape.add_all(&hinges)
}

/// Softmax weights over estimated discrepancies.
pub fn domain_weights(deltas: &[f64], sign: WeightSign) -> Result<Vec<f64>> {
    if deltas.is_empty() {
        return Err(DadaError::contract("domain_weights needs at least one value"));
    }
    if deltas.iter().any(|d| !d.is_finite()) {
        return Err(DadaError::Domain {
            op: "domain_weights",
            detail: "non-finite discrepancy estimate".into(),
        });
    }
    let s = match sign {
        WeightSign::Negated => -1.0,
        WeightSign::AsPrinted => 1.0,
    };
    let logits: Vec<f64> = deltas.iter().map(|d| s * d).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// `sum_j w_j mmd_j` with constant weights.
pub fn transfer_loss(tape: &mut Tape, weights: &[f64], pseudo_target_mmd: &[Var]) -> Result<Var> {
    if weights.len() != pseudo_target_mmd.len() || weights.is_empty() {
        return Err(DadaError::contract("transfer_loss: weights and MMD terms must match"));
    }
    let mut terms = Vec::with_capacity(weights.len());
    for (&w, &m) in weights.iter().zip(pseudo_target_mmd) {
        terms.push(tape.scale(m, w)?);
    }
    tape.add_all(&terms)
}

/// `Z_t + (mean(Z_gamma) - mean(Z_t))`, on values.
pub fn map_target_to_pseudo(z_t: &Tensor, z_gamma: &Tensor) -> Result<Tensor> {
    if z_t.cols() != z_gamma.cols() || z_t.rows() == 0 || z_gamma.rows() == 0 {
        return Err(DadaError::Dimension {
            op: "map_target_to_pseudo",
            left: z_t.shape(),
            right: z_gamma.shape(),
        });
    }
    let shift: Vec<f64> = z_gamma
        .mean_rows()
        .data()
        .iter()
        .zip(z_t.mean_rows().data())
        .map(|(p, t)| p - t)
        .collect();
    let mut out = z_t.clone();
    let cols = out.cols();
    for row in out.data_mut().chunks_mut(cols) {
        for (v, s) in row.iter_mut().zip(&shift) {
            *v += s;
        }
    }
    Ok(out)
}

/// Averages class probabilities of the target batch projected into each
/// pseudo domain. Returns the argmax labels (lowest index on ties) and the
/// averaged probabilities.
pub fn pseudo_labels(
    model: &DadaModel,
    z_t: &Tensor,
    pseudo_reps: &[Tensor],
) -> Result<(Vec<usize>, Tensor)> {
    if pseudo_reps.is_empty() {
        return Err(DadaError::contract("pseudo_labels needs at least one pseudo domain"));
    }
    let mut tape = model.tape();
    let mut avg = Tensor::zeros(z_t.rows(), model.classes());
    for rep in pseudo_reps {
        let mapped = map_target_to_pseudo(z_t, rep)?;
        let mv = tape.constant(mapped);
        let p = model.classify(&mut tape, mv)?;
        avg.add_assign(tape.value(p));
    }
    let inv = 1.0 / pseudo_reps.len() as f64;
    let avg = avg.map(|v| v * inv);
    Ok((avg.argmax_rows(), avg))
}

fn check_normalized(q: &Tensor) -> Result<()> {
    for r in 0..q.rows() {
        let s: f64 = q.row(r).iter().sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(DadaError::contract(format!(
                "probability row {r} sums to {s}, expected 1"
            )));
        }
    }
    Ok(())
}

/// `sum_c qbar_c log qbar_c - (1/B) sum_i sum_c q_ic log q_ic`, where
/// `qbar` is the batch-mean prediction. Minimizing it favours confident
/// rows and a balanced marginal.
pub fn mi_regularizer(tape: &mut Tape, q: Var) -> Result<Var> {
    check_normalized(tape.value(q))?;
    let rows = tape.value(q).rows();
    let qbar = tape.mean_rows(q)?;
    let log_qbar = tape.log(qbar)?;
    let marginal = tape.mul(qbar, log_qbar)?;
    let marginal = tape.sum(marginal)?;
    let log_q = tape.log(q)?;
    let per_row = tape.mul(q, log_q)?;
    let per_row = tape.sum(per_row)?;
    let per_row = tape.scale(per_row, -1.0 / rows as f64)?;
    tape.add(marginal, per_row)
}

/// Mean negative log-likelihood of `labels` under row probabilities `q`.
pub fn cross_entropy(tape: &mut Tape, q: Var, labels: &[usize]) -> Result<Var> {
    let (rows, classes) = tape.value(q).shape();
    if labels.len() != rows {
        return Err(DadaError::contract(format!(
            "cross_entropy: {} labels for {rows} rows",
            labels.len()
        )));
    }
    let onehot = tape.constant(Tensor::one_hot(labels, classes)?);
    let log_q = tape.log(q)?;
    let picked = tape.mul(log_q, onehot)?;
    let total = tape.sum(picked)?;
    tape.scale(total, -1.0 / rows as f64)
}

/// Target self-training loss: cross-entropy against pseudo labels plus
/// `beta` times the MI regularizer.
pub fn target_sup_loss(tape: &mut Tape, q_t: Var, pseudo: &[usize], beta: f64) -> Result<Var> {
    let ce = cross_entropy(tape, q_t, pseudo)?;
    if beta == 0.0 {
        return Ok(ce);
    }
    let mi = mi_regularizer(tape, q_t)?;
    let mi = tape.scale(mi, beta)?;
    tape.add(ce, mi)
}

/// Supervised loss on the source batch and each pseudo batch, all sharing
/// the source labels: `-(1/B) sum_i [log q_s[i, y_i] + sum_j log q_j[i, y_i]]`.
pub fn source_sup_loss(tape: &mut Tape, q_s: Var, q_pseudo: &[Var], labels: &[usize]) -> Result<Var> {
    let mut terms = Vec::with_capacity(q_pseudo.len() + 1);
    for &q in std::iter::once(&q_s).chain(q_pseudo) {
        check_rows("source_sup_loss", tape.value(q_s), tape.value(q))?;
        terms.push(cross_entropy(tape, q, labels)?);
    }
    tape.add_all(&terms)
}
