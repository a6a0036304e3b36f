//! Model optimization: pairwise BPR for the deconfounded pipeline and joint
//! CTR+CTCVR cross-entropy for the multi-behavior pipeline.
//!
//! Gradients are analytic throughout; the per-sample loss functions
//! ([`bpr_sample_loss`], [`mbd_sample_loss`]) define exactly the objective the
//! gradient functions differentiate, so they can be checked against finite
//! differences. Training is a single-writer loop and bit-reproducible for a
//! fixed seed.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataset::{Interaction, InteractionLog, PopularitySource, PopularityTable, StagedInteractions};
use crate::error::Error;
use crate::evaluation::rank_items;
use crate::model::{
    elu_prime, elu_prime_deriv, match_score, mbd_inference_score, pd_score, pda_score, sigmoid,
    FactorModel, ModelRole, ScoreParams, ScoreVariant,
};
use crate::rng::substream;
use crate::Result;

/// Training mode: which objective and which validation scorer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// BPR with popularity-weighted probabilities; validate and rank by the
    /// bare matching score.
    Pd,
    /// Same training as PD; validate with the popularity-adjusted score
    /// (`gamma_tilde = gamma`).
    Pda,
    /// Joint CTR + CTCVR cross-entropy; validate with the deconfounded
    /// inference score.
    Mbd,
}

/// Gradient update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

/// Training hyper-parameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub dim: usize,
    pub learning_rate: f64,
    /// L2 coefficient, applied to the embedding rows touched by each sample.
    pub l2: f64,
    pub epochs_max: usize,
    /// Stop after this many consecutive epochs without validation improvement.
    pub patience: usize,
    pub batch_size: usize,
    pub neg_per_pos: usize,
    pub seed: u64,
    pub params: ScoreParams,
    pub optimizer: OptimizerKind,
    /// Cutoff for the validation metric (Recall@K + HitRatio@K).
    pub val_k: usize,
    pub popularity_from: PopularitySource,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::Pd,
            dim: 32,
            learning_rate: 0.01,
            l2: 1e-4,
            epochs_max: 100,
            patience: 10,
            batch_size: 1,
            neg_per_pos: 1,
            seed: 42,
            params: ScoreParams::default(),
            optimizer: OptimizerKind::Sgd,
            val_k: 50,
            popularity_from: PopularitySource::Clicks,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "learning_rate must be finite and >= 0 (got {})",
                self.learning_rate
            )));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "l2 must be finite and >= 0 (got {})",
                self.l2
            )));
        }
        for (name, v) in [
            ("dim", self.dim),
            ("epochs_max", self.epochs_max),
            ("patience", self.patience),
            ("batch_size", self.batch_size),
            ("neg_per_pos", self.neg_per_pos),
            ("val_k", self.val_k),
        ] {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("{name} must be >= 1")));
            }
        }
        self.params.validate()
    }
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub train_loss: f64,
    pub val_metric: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    Patience,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StopReason::MaxEpochs => write!(f, "max_epochs"),
            StopReason::Patience => write!(f, "patience"),
        }
    }
}

/// Loss / validation history of a run, with the best-epoch index.
#[derive(Debug, Clone)]
pub struct TrainTrace {
    pub epochs: Vec<EpochStats>,
    /// 0-based index of the epoch whose checkpoint was returned.
    pub best_epoch: usize,
    pub stopped: StopReason,
}

impl TrainTrace {
    /// CSV with header `epoch,loss,val_metric`; epochs are 1-based.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch,loss,val_metric")?;
        for (idx, e) in self.epochs.iter().enumerate() {
            writeln!(w, "{},{},{}", idx + 1, e.train_loss, e.val_metric)?;
        }
        Ok(())
    }
}

/// Models produced by [`fit`].
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Matching(FactorModel),
    MultiBehavior { ctr: FactorModel, cvr: FactorModel },
}

impl TrainedModel {
    pub fn as_matching(&self) -> Option<&FactorModel> {
        match self {
            TrainedModel::Matching(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_multi_behavior(&self) -> Option<(&FactorModel, &FactorModel)> {
        match self {
            TrainedModel::MultiBehavior { ctr, cvr } => Some((ctr, cvr)),
            _ => None,
        }
    }
}

/// Result of [`fit`]: best-validation models plus the training trace.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: TrainedModel,
    pub trace: TrainTrace,
}

/// Plain logistic without clamping; safe in f64 for the BPR score gap.
#[inline]
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Pairwise BPR loss `-ln sigma(p_pos - p_neg)`, evaluated stably.
pub fn bpr_pair_loss(p_pos: f64, p_neg: f64) -> f64 {
    let t = -(p_pos - p_neg);
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Binary cross-entropy `-y ln p - (1-y) ln(1-p)` for `p` in (0, 1).
pub fn ce_loss(p: f64, y: bool) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "cross-entropy probability must lie in (0, 1), got {p}"
        )));
    }
    Ok(if y { -p.ln() } else { -(1.0 - p).ln() })
}

/// Per-user sets of items seen in training (used both for negative sampling
/// and for excluding training items from rankings).
pub fn interacted_sets(records: &[Interaction], num_users: usize) -> Vec<HashSet<u32>> {
    let mut sets = vec![HashSet::new(); num_users];
    for r in records {
        sets[r.user as usize].insert(r.item);
    }
    sets
}

/// Draw an item the user has not interacted with, uniformly.
pub fn sample_negative<R: Rng>(
    rng: &mut R,
    user: u32,
    interacted: &HashSet<u32>,
    num_items: usize,
) -> Result<u32> {
    let free = num_items - interacted.len();
    if free == 0 {
        return Err(Error::NoNegativeAvailable { user });
    }
    // Rejection sampling is fast while most items are free; fall back to
    // enumerating the complement when it gets small.
    if free * 8 >= num_items {
        loop {
            let item = rng.random_range(0..num_items) as u32;
            if !interacted.contains(&item) {
                return Ok(item);
            }
        }
    }
    let pick = rng.random_range(0..free);
    let mut seen = 0usize;
    for item in 0..num_items as u32 {
        if !interacted.contains(&item) {
            if seen == pick {
                return Ok(item);
            }
            seen += 1;
        }
    }
    unreachable!("complement enumeration exhausted");
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// One BPR observation: a positive interaction with its stage popularity and
/// a sampled negative weighted by the same stage.
#[derive(Debug, Clone, Copy)]
pub struct BprSample {
    pub user: u32,
    pub pos: u32,
    pub neg: u32,
    /// Popularity factor of the positive item in its stage (floored, > 0).
    pub m_pos: f64,
    /// Popularity factor of the negative item in the same stage.
    pub m_neg: f64,
}

/// The single-pair BPR objective:
/// `-ln sigma(p_pos - p_neg) + l2/2 * (|u|^2 + |i|^2 + |j|^2)` where
/// `p = ELU'(f) * m^gamma`.
pub fn bpr_sample_loss(model: &FactorModel, s: &BprSample, gamma: f64, l2: f64) -> Result<f64> {
    let f_pos = match_score(model, s.user, s.pos)?;
    let f_neg = match_score(model, s.user, s.neg)?;
    let p_pos = elu_prime(f_pos) * s.m_pos.powf(gamma);
    let p_neg = elu_prime(f_neg) * s.m_neg.powf(gamma);
    let reg = 0.5
        * l2
        * (sq_norm(model.user_row(s.user))
            + sq_norm(model.item_row(s.pos))
            + sq_norm(model.item_row(s.neg)));
    Ok(bpr_pair_loss(p_pos, p_neg) + reg)
}

/// Gradients of [`bpr_sample_loss`] with respect to the touched rows.
#[derive(Debug, Clone)]
pub struct BprGrads {
    pub user: Vec<f64>,
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
}

/// Loss and analytic gradients for one BPR pair.
pub fn bpr_sample_grads(
    model: &FactorModel,
    s: &BprSample,
    gamma: f64,
    l2: f64,
) -> Result<(f64, BprGrads)> {
    let f_pos = match_score(model, s.user, s.pos)?;
    let f_neg = match_score(model, s.user, s.neg)?;
    let a = s.m_pos.powf(gamma);
    let b = s.m_neg.powf(gamma);
    let p_pos = elu_prime(f_pos) * a;
    let p_neg = elu_prime(f_neg) * b;
    let x = p_pos - p_neg;
    let loss = bpr_pair_loss(p_pos, p_neg);
    // d/dx of softplus(-x).
    let e = -logistic(-x);
    let g_pos = elu_prime_deriv(f_pos) * a;
    let g_neg = elu_prime_deriv(f_neg) * b;

    let u = model.user_row(s.user);
    let i = model.item_row(s.pos);
    let j = model.item_row(s.neg);
    let dim = model.dim();
    let mut grads = BprGrads {
        user: vec![0.0; dim],
        pos: vec![0.0; dim],
        neg: vec![0.0; dim],
    };
    for k in 0..dim {
        grads.user[k] = e * (g_pos * i[k] - g_neg * j[k]) + l2 * u[k];
        grads.pos[k] = e * g_pos * u[k] + l2 * i[k];
        grads.neg[k] = -e * g_neg * u[k] + l2 * j[k];
    }
    let reg = 0.5 * l2 * (sq_norm(u) + sq_norm(i) + sq_norm(j));
    Ok((loss + reg, grads))
}

/// One multi-behavior observation: a clicked record with its post-click
/// label, the item's normalized quality and popularity factors, and the
/// sampled unclicked negatives for the CTR loss.
#[derive(Debug, Clone)]
pub struct MbdSample {
    pub user: u32,
    pub pos: u32,
    pub negs: Vec<u32>,
    pub y_post: bool,
    /// Normalized quality ratio of the positive item, in (0, 1].
    pub r: f64,
    /// Normalized popularity of the positive item, in (0, 1].
    pub z: f64,
}

/// Probabilities are clamped below this before the log loss.
const CE_UPPER: f64 = 1.0 - 1e-9;

/// The single-record multi-behavior objective: cross-entropy of the click
/// probability on the positive and each sampled negative, plus cross-entropy
/// of the click-and-convert probability against the post-click label, plus
/// `l2/2` on every touched row of both models.
pub fn mbd_sample_loss(
    model_c: &FactorModel,
    model_l: &FactorModel,
    s: &MbdSample,
    params: &ScoreParams,
    variant: ScoreVariant,
    l2: f64,
) -> Result<f64> {
    let p_click = sigmoid(match_score(model_c, s.user, s.pos)?);
    let mut loss = ce_loss(p_click, true)?;
    for &j in &s.negs {
        let p = sigmoid(match_score(model_c, s.user, j)?);
        loss += ce_loss(p, false)?;
    }
    let k = pop_quality_factor(s, params, variant);
    let p_ctcvr =
        (p_click * sigmoid(match_score(model_l, s.user, s.pos)?) * k).min(CE_UPPER);
    loss += ce_loss(p_ctcvr, s.y_post)?;
    let mut reg = sq_norm(model_c.user_row(s.user)) + sq_norm(model_c.item_row(s.pos));
    for &j in &s.negs {
        reg += sq_norm(model_c.item_row(j));
    }
    reg += sq_norm(model_l.user_row(s.user)) + sq_norm(model_l.item_row(s.pos));
    Ok(loss + 0.5 * l2 * reg)
}

fn pop_quality_factor(s: &MbdSample, params: &ScoreParams, variant: ScoreVariant) -> f64 {
    let base = s.r.powf(params.gamma_r) * s.z.powf(params.gamma_z);
    match variant {
        ScoreVariant::Standard => base,
        ScoreVariant::BothPopularity => base * s.z.powf(params.gamma_zc),
    }
}

/// Gradients of [`mbd_sample_loss`] with respect to the touched rows of both
/// models.
#[derive(Debug, Clone)]
pub struct MbdGrads {
    pub c_user: Vec<f64>,
    pub c_pos: Vec<f64>,
    pub c_negs: Vec<Vec<f64>>,
    pub l_user: Vec<f64>,
    pub l_pos: Vec<f64>,
}

/// Loss, component losses and analytic gradients for one record.
///
/// Returns `(total_loss, l_ctr, l_ctcvr, grads)` where the component losses
/// exclude the L2 term.
pub fn mbd_sample_grads(
    model_c: &FactorModel,
    model_l: &FactorModel,
    s: &MbdSample,
    params: &ScoreParams,
    variant: ScoreVariant,
    l2: f64,
) -> Result<(f64, f64, f64, MbdGrads)> {
    let dim = model_c.dim();
    let uc = model_c.user_row(s.user);
    let ul = model_l.user_row(s.user);
    let ic = model_c.item_row(s.pos);
    let il = model_l.item_row(s.pos);

    let fc = match_score(model_c, s.user, s.pos)?;
    let fl = match_score(model_l, s.user, s.pos)?;
    let pc = sigmoid(fc);
    let pl = sigmoid(fl);

    let mut grads = MbdGrads {
        c_user: vec![0.0; dim],
        c_pos: vec![0.0; dim],
        c_negs: vec![vec![0.0; dim]; s.negs.len()],
        l_user: vec![0.0; dim],
        l_pos: vec![0.0; dim],
    };

    // CTR on the positive: dL/dfc = pc - 1.
    let mut l_ctr = ce_loss(pc, true)?;
    let d_pos = pc - 1.0;
    for k in 0..dim {
        grads.c_user[k] += d_pos * ic[k];
        grads.c_pos[k] += d_pos * uc[k];
    }
    // CTR on sampled negatives: dL/dfc = p.
    let mut reg = sq_norm(uc) + sq_norm(ic) + sq_norm(ul) + sq_norm(il);
    for (n, &j) in s.negs.iter().enumerate() {
        let jc = model_c.item_row(j);
        let pj = sigmoid(match_score(model_c, s.user, j)?);
        l_ctr += ce_loss(pj, false)?;
        for k in 0..dim {
            grads.c_user[k] += pj * jc[k];
            grads.c_negs[n][k] += pj * uc[k];
        }
        reg += sq_norm(jc);
    }

    // CTCVR against the post-click label.
    let factor = pop_quality_factor(s, params, variant);
    let p_raw = pc * pl * factor;
    let p = p_raw.min(CE_UPPER);
    let l_ctcvr = ce_loss(p, s.y_post)?;
    let y = if s.y_post { 1.0 } else { 0.0 };
    // dL/dp; dp/dfc = pc(1-pc) pl k; dp/dfl = pl(1-pl) pc k.
    let dl_dp = (p - y) / (p * (1.0 - p));
    let dfc = dl_dp * pc * (1.0 - pc) * pl * factor;
    let dfl = dl_dp * pl * (1.0 - pl) * pc * factor;
    for k in 0..dim {
        grads.c_user[k] += dfc * ic[k];
        grads.c_pos[k] += dfc * uc[k];
        grads.l_user[k] += dfl * il[k];
        grads.l_pos[k] += dfl * ul[k];
    }

    // L2 on touched rows.
    for k in 0..dim {
        grads.c_user[k] += l2 * uc[k];
        grads.c_pos[k] += l2 * ic[k];
        grads.l_user[k] += l2 * ul[k];
        grads.l_pos[k] += l2 * il[k];
    }
    for (n, &j) in s.negs.iter().enumerate() {
        let jc = model_c.item_row(j);
        for k in 0..dim {
            grads.c_negs[n][k] += l2 * jc[k];
        }
    }

    let total = l_ctr + l_ctcvr + 0.5 * l2 * reg;
    Ok((total, l_ctr, l_ctcvr, grads))
}

struct AdamSlot {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Optimizer state shared across the embedding tables of a training run.
///
/// Table slots are addressed by index; BPR uses `[user, item]`, the
/// multi-behavior trainer `[c_user, c_item, l_user, l_item]`.
pub struct OptimizerState {
    kind: OptimizerKind,
    step: u64,
    slots: Vec<Option<AdamSlot>>,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl OptimizerState {
    /// `shapes` gives `(rows, dim)` per table slot.
    pub fn new(kind: OptimizerKind, shapes: &[(usize, usize)]) -> Self {
        let slots = shapes
            .iter()
            .map(|&(rows, dim)| match kind {
                OptimizerKind::Sgd => None,
                OptimizerKind::Adam => Some(AdamSlot {
                    m: vec![0.0; rows * dim],
                    v: vec![0.0; rows * dim],
                }),
            })
            .collect();
        OptimizerState { kind, step: 0, slots }
    }

    fn begin_step(&mut self) {
        self.step += 1;
    }

    fn apply(&mut self, slot: usize, row: u32, dim: usize, target: &mut [f64], grad: &[f64], lr: f64) {
        match self.kind {
            OptimizerKind::Sgd => {
                for k in 0..dim {
                    target[k] -= lr * grad[k];
                }
            }
            OptimizerKind::Adam => {
                let state = self.slots[slot].as_mut().expect("adam slot");
                let off = row as usize * dim;
                let bias1 = 1.0 - ADAM_BETA1.powi(self.step as i32);
                let bias2 = 1.0 - ADAM_BETA2.powi(self.step as i32);
                for k in 0..dim {
                    let g = grad[k];
                    let m = &mut state.m[off + k];
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    let v = &mut state.v[off + k];
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = *m / bias1;
                    let v_hat = *v / bias2;
                    target[k] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// Sparse gradient accumulator for mini-batches, keyed by `(slot, row)` in
/// sorted order so updates apply deterministically.
struct GradAccum {
    map: BTreeMap<(usize, u32), Vec<f64>>,
    samples: usize,
}

impl GradAccum {
    fn new() -> Self {
        GradAccum {
            map: BTreeMap::new(),
            samples: 0,
        }
    }

    fn add(&mut self, slot: usize, row: u32, grad: &[f64]) {
        let entry = self
            .map
            .entry((slot, row))
            .or_insert_with(|| vec![0.0; grad.len()]);
        for (acc, g) in entry.iter_mut().zip(grad) {
            *acc += g;
        }
    }
}

/// A positive training record for BPR: `(user, item, stage index)`.
#[derive(Debug, Clone, Copy)]
pub struct BprDatum {
    pub user: u32,
    pub item: u32,
    pub stage: usize,
}

/// Clicked records with their stage index.
pub fn bpr_training_samples(staged: &StagedInteractions) -> Vec<BprDatum> {
    let mut samples = Vec::new();
    for t in 0..staged.num_stages() {
        for rec in staged.stage(t) {
            if rec.clicked {
                samples.push(BprDatum {
                    user: rec.user,
                    item: rec.item,
                    stage: t,
                });
            }
        }
    }
    samples
}

/// A clicked record with its post-click label.
#[derive(Debug, Clone, Copy)]
pub struct MbdDatum {
    pub user: u32,
    pub item: u32,
    pub y_post: bool,
}

/// Clicked records of a labeled log.
pub fn mbd_training_samples(records: &[Interaction]) -> Vec<MbdDatum> {
    records
        .iter()
        .filter(|r| r.clicked)
        .map(|r| MbdDatum {
            user: r.user,
            item: r.item,
            y_post: r.post_clicked,
        })
        .collect()
}

const SLOT_USER: usize = 0;
const SLOT_ITEM: usize = 1;

/// One pass of shuffled pairwise BPR updates. Returns the mean per-pair
/// objective (including the L2 term).
#[allow(clippy::too_many_arguments)]
pub fn bpr_epoch<R1: Rng, R2: Rng>(
    model: &mut FactorModel,
    samples: &[BprDatum],
    pop: &PopularityTable,
    interacted: &[HashSet<u32>],
    cfg: &TrainConfig,
    opt: &mut OptimizerState,
    shuffle_rng: &mut R1,
    neg_rng: &mut R2,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyPartition { name: "train" });
    }
    let num_items = model.num_items();
    let dim = model.dim();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(shuffle_rng);

    let mut total_loss = 0.0;
    let mut total_pairs = 0usize;
    let mut accum = GradAccum::new();
    for &idx in &order {
        let datum = &samples[idx];
        let m_pos = pop.factor(datum.stage, datum.item)?;
        for _ in 0..cfg.neg_per_pos {
            let neg = sample_negative(
                neg_rng,
                datum.user,
                &interacted[datum.user as usize],
                num_items,
            )?;
            let sample = BprSample {
                user: datum.user,
                pos: datum.item,
                neg,
                m_pos,
                m_neg: pop.factor(datum.stage, neg)?,
            };
            let (loss, grads) = bpr_sample_grads(model, &sample, cfg.params.gamma, cfg.l2)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    context: format!(
                        "bpr pair (u={}, i={}, j={})",
                        sample.user, sample.pos, sample.neg
                    ),
                });
            }
            total_loss += loss;
            total_pairs += 1;
            accum.add(SLOT_USER, sample.user, &grads.user);
            accum.add(SLOT_ITEM, sample.pos, &grads.pos);
            accum.add(SLOT_ITEM, sample.neg, &grads.neg);
            accum.samples += 1;
            if accum.samples >= cfg.batch_size {
                flush_bpr(model, opt, &mut accum, cfg.learning_rate, dim);
            }
        }
    }
    flush_bpr(model, opt, &mut accum, cfg.learning_rate, dim);
    if !model.all_finite() {
        return Err(Error::NonFiniteLoss {
            context: "bpr epoch left non-finite parameters".into(),
        });
    }
    Ok(total_loss / total_pairs as f64)
}

fn flush_bpr(
    model: &mut FactorModel,
    opt: &mut OptimizerState,
    accum: &mut GradAccum,
    lr: f64,
    dim: usize,
) {
    if accum.samples == 0 {
        return;
    }
    opt.begin_step();
    let scale = 1.0 / accum.samples as f64;
    let map = std::mem::take(&mut accum.map);
    for ((slot, row), mut grad) in map {
        for g in grad.iter_mut() {
            *g *= scale;
        }
        let target = match slot {
            SLOT_USER => model.user_row_mut(row),
            _ => model.item_row_mut(row),
        };
        opt.apply(slot, row, dim, target, &grad, lr);
    }
    accum.samples = 0;
}

const SLOT_C_USER: usize = 0;
const SLOT_C_ITEM: usize = 1;
const SLOT_L_USER: usize = 2;
const SLOT_L_ITEM: usize = 3;

/// One pass of shuffled multi-behavior updates. Returns the mean CTR and
/// CTCVR data losses per record.
#[allow(clippy::too_many_arguments)]
pub fn mbd_epoch<R1: Rng, R2: Rng>(
    model_c: &mut FactorModel,
    model_l: &mut FactorModel,
    samples: &[MbdDatum],
    quality: &[f64],
    popularity: &[f64],
    interacted: &[HashSet<u32>],
    cfg: &TrainConfig,
    variant: ScoreVariant,
    opt: &mut OptimizerState,
    shuffle_rng: &mut R1,
    neg_rng: &mut R2,
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptyPartition { name: "train" });
    }
    let num_items = model_c.num_items();
    let dim = model_c.dim();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(shuffle_rng);

    let mut sum_ctr = 0.0;
    let mut sum_ctcvr = 0.0;
    let mut accum = GradAccum::new();
    for &idx in &order {
        let datum = &samples[idx];
        let mut negs = Vec::with_capacity(cfg.neg_per_pos);
        for _ in 0..cfg.neg_per_pos {
            negs.push(sample_negative(
                neg_rng,
                datum.user,
                &interacted[datum.user as usize],
                num_items,
            )?);
        }
        let sample = MbdSample {
            user: datum.user,
            pos: datum.item,
            negs,
            y_post: datum.y_post,
            r: quality[datum.item as usize],
            z: popularity[datum.item as usize],
        };
        let (total, l_ctr, l_ctcvr, grads) =
            mbd_sample_grads(model_c, model_l, &sample, &cfg.params, variant, cfg.l2)?;
        if !total.is_finite() {
            return Err(Error::NonFiniteLoss {
                context: format!("mbd record (u={}, i={})", sample.user, sample.pos),
            });
        }
        sum_ctr += l_ctr;
        sum_ctcvr += l_ctcvr;
        accum.add(SLOT_C_USER, sample.user, &grads.c_user);
        accum.add(SLOT_C_ITEM, sample.pos, &grads.c_pos);
        for (n, &j) in sample.negs.iter().enumerate() {
            accum.add(SLOT_C_ITEM, j, &grads.c_negs[n]);
        }
        accum.add(SLOT_L_USER, sample.user, &grads.l_user);
        accum.add(SLOT_L_ITEM, sample.pos, &grads.l_pos);
        accum.samples += 1;
        if accum.samples >= cfg.batch_size {
            flush_mbd(model_c, model_l, opt, &mut accum, cfg.learning_rate, dim);
        }
    }
    flush_mbd(model_c, model_l, opt, &mut accum, cfg.learning_rate, dim);
    if !model_c.all_finite() || !model_l.all_finite() {
        return Err(Error::NonFiniteLoss {
            context: "mbd epoch left non-finite parameters".into(),
        });
    }
    let n = samples.len() as f64;
    Ok((sum_ctr / n, sum_ctcvr / n))
}

fn flush_mbd(
    model_c: &mut FactorModel,
    model_l: &mut FactorModel,
    opt: &mut OptimizerState,
    accum: &mut GradAccum,
    lr: f64,
    dim: usize,
) {
    if accum.samples == 0 {
        return;
    }
    opt.begin_step();
    let scale = 1.0 / accum.samples as f64;
    let map = std::mem::take(&mut accum.map);
    for ((slot, row), mut grad) in map {
        for g in grad.iter_mut() {
            *g *= scale;
        }
        let target = match slot {
            SLOT_C_USER => model_c.user_row_mut(row),
            SLOT_C_ITEM => model_c.item_row_mut(row),
            SLOT_L_USER => model_l.user_row_mut(row),
            _ => model_l.item_row_mut(row),
        };
        opt.apply(slot, row, dim, target, &grad, lr);
    }
    accum.samples = 0;
}

/// Positive validation items per user: clicked records for PD/PDA,
/// post-clicked records for the multi-behavior mode.
fn validation_positives(valid: &InteractionLog, mode: TrainMode) -> Vec<Vec<u32>> {
    let mut sets: Vec<HashSet<u32>> = vec![HashSet::new(); valid.num_users];
    for r in &valid.records {
        let keep = match mode {
            TrainMode::Pd | TrainMode::Pda => r.clicked,
            TrainMode::Mbd => r.post_clicked,
        };
        if keep {
            sets[r.user as usize].insert(r.item);
        }
    }
    sets.into_iter()
        .map(|s| {
            let mut v: Vec<u32> = s.into_iter().collect();
            v.sort_unstable();
            v
        })
        .collect()
}

/// Validation-stage popularity values for the PDA validation scorer: the
/// empirical popularity of the validation partition, floored so every item
/// stays positive.
fn validation_popularity(valid: &InteractionLog) -> Vec<f64> {
    let mut counts = vec![0u64; valid.num_items];
    for r in &valid.records {
        if r.clicked {
            counts[r.item as usize] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    let eps = 1.0 / (total as f64 + valid.num_items as f64);
    counts
        .iter()
        .map(|&c| {
            if c == 0 {
                eps
            } else {
                c as f64 / total as f64
            }
        })
        .collect()
}

/// Recall@K + HitRatio@K of a scorer over the validation positives,
/// macro-averaged over users with at least one positive.
fn validation_metric<F>(
    score: F,
    positives: &[Vec<u32>],
    interacted: &[HashSet<u32>],
    num_items: usize,
    k: usize,
) -> Result<f64>
where
    F: Fn(u32, u32) -> f64,
{
    let mut recall_sum = 0.0;
    let mut hit_sum = 0.0;
    let mut users = 0usize;
    for (u, pos) in positives.iter().enumerate() {
        if pos.is_empty() {
            continue;
        }
        let user = u as u32;
        let excluded = &interacted[u];
        let candidates = num_items - excluded.len();
        if candidates == 0 {
            continue;
        }
        let k_eff = k.min(candidates);
        let list = rank_items(|i| score(user, i), num_items, excluded, k_eff)?;
        let hits = list.iter().filter(|i| pos.binary_search(i).is_ok()).count();
        recall_sum += hits as f64 / pos.len() as f64;
        hit_sum += if hits > 0 { 1.0 } else { 0.0 };
        users += 1;
    }
    if users == 0 {
        return Ok(0.0);
    }
    Ok(recall_sum / users as f64 + hit_sum / users as f64)
}

/// Train models for the configured mode with early stopping.
///
/// Runs until `epochs_max` or until the validation metric has not improved
/// for `patience` consecutive epochs, and returns the parameters of the best
/// validation epoch. The validation scorer follows the mode: the bare
/// matching score for PD, the adjusted score with `gamma_tilde = gamma` and
/// the validation stage's popularity for PDA, and the deconfounded inference
/// score for the multi-behavior mode.
pub fn fit(
    cfg: &TrainConfig,
    staged: &StagedInteractions,
    valid: &InteractionLog,
) -> Result<FitOutcome> {
    cfg.validate()?;
    if valid.is_empty() {
        return Err(Error::EmptyPartition { name: "valid" });
    }
    let num_users = staged.log().num_users;
    let num_items = staged.log().num_items;
    let interacted = interacted_sets(staged.all(), num_users);
    let positives = validation_positives(valid, cfg.mode);
    let pop = PopularityTable::from_staged(staged, cfg.popularity_from)?;

    let mut shuffle_rng = substream(cfg.seed, "data");
    let mut neg_rng = substream(cfg.seed, "negatives");

    let mut trace = TrainTrace {
        epochs: Vec::new(),
        best_epoch: 0,
        stopped: StopReason::MaxEpochs,
    };
    let mut best_metric = f64::NEG_INFINITY;
    let mut bad_epochs = 0usize;

    match cfg.mode {
        TrainMode::Pd | TrainMode::Pda => {
            let samples = bpr_training_samples(staged);
            if samples.is_empty() {
                return Err(Error::EmptyPartition { name: "train" });
            }
            let mut init_rng = substream(cfg.seed, "init");
            let mut model =
                FactorModel::init(num_users, num_items, cfg.dim, ModelRole::Matching, &mut init_rng);
            let mut opt = OptimizerState::new(
                cfg.optimizer,
                &[(num_users, cfg.dim), (num_items, cfg.dim)],
            );
            let val_m = validation_popularity(valid);
            let mut best = model.clone();
            for epoch in 0..cfg.epochs_max {
                let loss = bpr_epoch(
                    &mut model,
                    &samples,
                    &pop,
                    &interacted,
                    cfg,
                    &mut opt,
                    &mut shuffle_rng,
                    &mut neg_rng,
                )?;
                let metric = match cfg.mode {
                    TrainMode::Pd => validation_metric(
                        |u, i| pd_score(&model, u, i).unwrap_or(f64::NEG_INFINITY),
                        &positives,
                        &interacted,
                        num_items,
                        cfg.val_k,
                    )?,
                    _ => validation_metric(
                        |u, i| {
                            pda_score(&model, u, i, val_m[i as usize], cfg.params.gamma)
                                .unwrap_or(f64::NEG_INFINITY)
                        },
                        &positives,
                        &interacted,
                        num_items,
                        cfg.val_k,
                    )?,
                };
                trace.epochs.push(EpochStats {
                    train_loss: loss,
                    val_metric: metric,
                });
                if metric > best_metric {
                    best_metric = metric;
                    trace.best_epoch = epoch;
                    best = model.clone();
                    bad_epochs = 0;
                } else {
                    bad_epochs += 1;
                    if bad_epochs >= cfg.patience {
                        trace.stopped = StopReason::Patience;
                        break;
                    }
                }
            }
            Ok(FitOutcome {
                model: TrainedModel::Matching(best),
                trace,
            })
        }
        TrainMode::Mbd => {
            let samples = mbd_training_samples(staged.all());
            if samples.is_empty() {
                return Err(Error::EmptyPartition { name: "train" });
            }
            let quality = pop.normalized_quality();
            let popularity = pop.normalized_popularity().to_vec();
            let mut ctr_rng = substream(cfg.seed, "init.ctr");
            let mut cvr_rng = substream(cfg.seed, "init.cvr");
            let mut model_c =
                FactorModel::init(num_users, num_items, cfg.dim, ModelRole::Ctr, &mut ctr_rng);
            let mut model_l =
                FactorModel::init(num_users, num_items, cfg.dim, ModelRole::Cvr, &mut cvr_rng);
            let mut opt = OptimizerState::new(
                cfg.optimizer,
                &[
                    (num_users, cfg.dim),
                    (num_items, cfg.dim),
                    (num_users, cfg.dim),
                    (num_items, cfg.dim),
                ],
            );
            let mut best = (model_c.clone(), model_l.clone());
            for epoch in 0..cfg.epochs_max {
                let (l_ctr, l_ctcvr) = mbd_epoch(
                    &mut model_c,
                    &mut model_l,
                    &samples,
                    &quality,
                    &popularity,
                    &interacted,
                    cfg,
                    ScoreVariant::Standard,
                    &mut opt,
                    &mut shuffle_rng,
                    &mut neg_rng,
                )?;
                let metric = validation_metric(
                    |u, i| {
                        mbd_inference_score(
                            &model_c,
                            &model_l,
                            u,
                            i,
                            quality[i as usize],
                            cfg.params.gamma_r,
                        )
                        .unwrap_or(f64::NEG_INFINITY)
                    },
                    &positives,
                    &interacted,
                    num_items,
                    cfg.val_k,
                )?;
                trace.epochs.push(EpochStats {
                    train_loss: l_ctr + l_ctcvr,
                    val_metric: metric,
                });
                if metric > best_metric {
                    best_metric = metric;
                    trace.best_epoch = epoch;
                    best = (model_c.clone(), model_l.clone());
                    bad_epochs = 0;
                } else {
                    bad_epochs += 1;
                    if bad_epochs >= cfg.patience {
                        trace.stopped = StopReason::Patience;
                        break;
                    }
                }
            }
            Ok(FitOutcome {
                model: TrainedModel::MultiBehavior {
                    ctr: best.0,
                    cvr: best.1,
                },
                trace,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::split_stages;
    use crate::rng::substream;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn bpr_pair_loss_values() {
        assert!((bpr_pair_loss(0.7, 0.7) - LN2).abs() < 1e-15);
        // Oracle: -ln sigma(1) evaluated directly.
        assert!((bpr_pair_loss(1.5, 0.5) - 0.31326168751822286).abs() < 1e-15);
        assert!(bpr_pair_loss(100.0, 0.0) < 1e-12);
        // Decreasing in the gap.
        assert!(bpr_pair_loss(1.0, 0.0) > bpr_pair_loss(2.0, 0.0));
    }

    #[test]
    fn ce_loss_values() {
        assert!((ce_loss(0.5, true).unwrap() - LN2).abs() < 1e-15);
        assert!(ce_loss(1.0 - 1e-12, true).unwrap() < 1e-10);
        // Oracle: -ln 0.75.
        assert!((ce_loss(0.25, false).unwrap() - 0.2876820724517809).abs() < 1e-15);
        assert!(ce_loss(0.0, true).is_err());
        assert!(ce_loss(1.0, false).is_err());
    }

    #[test]
    fn sample_negative_forced() {
        let mut rng = substream(1, "negatives");
        let interacted: HashSet<u32> = (0..10u32).filter(|&i| i != 7).collect();
        for _ in 0..20 {
            assert_eq!(sample_negative(&mut rng, 0, &interacted, 10).unwrap(), 7);
        }
    }

    #[test]
    fn sample_negative_exhausted() {
        let mut rng = substream(1, "negatives");
        let interacted: HashSet<u32> = (0..4u32).collect();
        assert!(matches!(
            sample_negative(&mut rng, 3, &interacted, 4),
            Err(Error::NoNegativeAvailable { user: 3 })
        ));
    }

    #[test]
    fn sample_negative_reproducible() {
        let interacted: HashSet<u32> = [1, 3].into_iter().collect();
        let draw = |seed| {
            let mut rng = substream(seed, "negatives");
            (0..50)
                .map(|_| sample_negative(&mut rng, 0, &interacted, 100).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn sample_negative_uniform_chi_square() {
        // User with no interactions: draws should be uniform over all items.
        let mut rng = substream(11, "negatives");
        let interacted = HashSet::new();
        let num_items = 20usize;
        let draws = 10_000usize;
        let mut counts = vec![0usize; num_items];
        for _ in 0..draws {
            counts[sample_negative(&mut rng, 0, &interacted, num_items).unwrap() as usize] += 1;
        }
        let expected = draws as f64 / num_items as f64;
        let stat: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // chi-square(19) 0.99 quantile.
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let crit = ChiSquared::new((num_items - 1) as f64)
            .unwrap()
            .inverse_cdf(0.99);
        assert!(stat < crit, "chi-square {stat} >= {crit}");
    }

    #[test]
    fn sample_negative_uniform_over_complement() {
        // Dense user: enumeration path must still be uniform over the free items.
        let mut rng = substream(13, "negatives");
        let interacted: HashSet<u32> = (0..97u32).collect();
        let mut counts = [0usize; 3];
        for _ in 0..3000 {
            let item = sample_negative(&mut rng, 0, &interacted, 100).unwrap();
            counts[(item - 97) as usize] += 1;
        }
        for &c in &counts {
            assert!((800..1200).contains(&c), "counts {counts:?}");
        }
    }

    fn toy_staged() -> StagedInteractions {
        let records = vec![
            Interaction { user: 0, item: 0, timestamp: 0, clicked: true, post_clicked: false },
            Interaction { user: 0, item: 1, timestamp: 1, clicked: true, post_clicked: false },
            Interaction { user: 1, item: 1, timestamp: 2, clicked: true, post_clicked: false },
            Interaction { user: 1, item: 2, timestamp: 3, clicked: true, post_clicked: false },
        ];
        let log = InteractionLog::new(records, 2, 4, false).unwrap();
        split_stages(&log, 2).unwrap()
    }

    #[test]
    fn bpr_epoch_zero_learning_rate_is_identity() {
        let staged = toy_staged();
        let pop = PopularityTable::from_staged(&staged, PopularitySource::Clicks).unwrap();
        let samples = bpr_training_samples(&staged);
        let interacted = interacted_sets(staged.all(), 2);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            dim: 4,
            ..TrainConfig::default()
        };
        let mut rng_a = substream(5, "data");
        let mut rng_b = substream(5, "negatives");
        let mut init = substream(5, "init");
        let mut model = FactorModel::init(2, 4, 4, ModelRole::Matching, &mut init);
        let before = model.clone();
        let mut opt = OptimizerState::new(OptimizerKind::Sgd, &[(2, 4), (4, 4)]);
        bpr_epoch(&mut model, &samples, &pop, &interacted, &cfg, &mut opt, &mut rng_a, &mut rng_b)
            .unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn l2_only_gradient_shrinks_norms() {
        // A pair with pos == neg has zero data gradient on the user row and
        // cancelling item gradients, leaving the pure L2 pull.
        let mut init = substream(3, "init");
        let mut model = FactorModel::init(1, 2, 4, ModelRole::Matching, &mut init);
        let l2 = 0.5;
        let sample = BprSample { user: 0, pos: 0, neg: 0, m_pos: 0.5, m_neg: 0.5 };
        let mut prev_user = sq_norm(model.user_row(0));
        let mut prev_item = sq_norm(model.item_row(0));
        assert!(prev_user > 0.0);
        for _ in 0..10 {
            let (_, grads) = bpr_sample_grads(&model, &sample, 1.0, l2).unwrap();
            for (k, g) in grads.user.iter().enumerate() {
                model.user_row_mut(0)[k] -= 0.1 * g;
            }
            for k in 0..4 {
                model.item_row_mut(0)[k] -= 0.1 * (grads.pos[k] + grads.neg[k]);
            }
            let u = sq_norm(model.user_row(0));
            let i = sq_norm(model.item_row(0));
            assert!(u < prev_user, "user norm should shrink");
            assert!(i < prev_item, "item norm should shrink");
            prev_user = u;
            prev_item = i;
        }
    }

    #[test]
    fn mbd_epoch_loss_decreases_on_learnable_instance() {
        // Two users with disjoint strong preferences; post-clicks follow item
        // parity for user 0 only.
        let mut records = Vec::new();
        let mut ts = 0i64;
        for rep in 0..30 {
            for item in 0..4u32 {
                let user = if item < 2 { 0 } else { 1 };
                records.push(Interaction {
                    user,
                    item,
                    timestamp: ts,
                    clicked: true,
                    post_clicked: (item % 2 == 0) && rep % 2 == 0,
                });
                ts += 1;
            }
        }
        let log = InteractionLog::new(records, 2, 8, true).unwrap();
        let staged = split_stages(&log, 1).unwrap();
        let pop = PopularityTable::from_staged(&staged, PopularitySource::Clicks).unwrap();
        let samples = mbd_training_samples(staged.all());
        let interacted = interacted_sets(staged.all(), 2);
        let quality = pop.normalized_quality();
        let popularity = pop.normalized_popularity().to_vec();
        let cfg = TrainConfig {
            mode: TrainMode::Mbd,
            dim: 8,
            learning_rate: 0.1,
            l2: 0.0,
            ..TrainConfig::default()
        };
        let mut c_rng = substream(7, "init.ctr");
        let mut l_rng = substream(7, "init.cvr");
        let mut model_c = FactorModel::init(2, 8, 8, ModelRole::Ctr, &mut c_rng);
        let mut model_l = FactorModel::init(2, 8, 8, ModelRole::Cvr, &mut l_rng);
        let mut opt = OptimizerState::new(OptimizerKind::Sgd, &[(2, 8), (8, 8), (2, 8), (8, 8)]);
        let mut shuffle = substream(7, "data");
        let mut negs = substream(7, "negatives");
        let mut losses = Vec::new();
        for _ in 0..10 {
            let (a, b) = mbd_epoch(
                &mut model_c, &mut model_l, &samples, &quality, &popularity, &interacted,
                &cfg, ScoreVariant::Standard, &mut opt, &mut shuffle, &mut negs,
            )
            .unwrap();
            losses.push(a + b);
        }
        let first: f64 = losses[..5].iter().sum();
        let last: f64 = losses[5..].iter().sum();
        assert!(losses[0] > losses[4], "losses: {losses:?}");
        assert!(first > last, "windowed trend: {losses:?}");
    }

    fn pd_fit_setup(n: usize) -> (StagedInteractions, InteractionLog) {
        let mut records = Vec::new();
        for k in 0..n {
            records.push(Interaction {
                user: (k % 3) as u32,
                item: (k % 5) as u32,
                timestamp: k as i64,
                clicked: true,
                post_clicked: false,
            });
        }
        let log = InteractionLog::new(records, 3, 6, false).unwrap();
        let valid_records = vec![
            Interaction { user: 0, item: 5, timestamp: 1000, clicked: true, post_clicked: false },
            Interaction { user: 1, item: 5, timestamp: 1001, clicked: true, post_clicked: false },
        ];
        let valid = InteractionLog::new(valid_records, 3, 6, false).unwrap();
        (split_stages(&log, 2).unwrap(), valid)
    }

    #[test]
    fn fit_empty_validation_errors() {
        let (staged, valid) = pd_fit_setup(20);
        let empty = InteractionLog::new(vec![], valid.num_users, valid.num_items, false).unwrap();
        let cfg = TrainConfig { dim: 4, epochs_max: 2, ..TrainConfig::default() };
        assert!(matches!(
            fit(&cfg, &staged, &empty),
            Err(Error::EmptyPartition { name: "valid" })
        ));
    }

    #[test]
    fn fit_reproducible_and_mode_scorers() {
        let (staged, valid) = pd_fit_setup(20);
        let cfg = TrainConfig {
            dim: 4,
            epochs_max: 3,
            patience: 10,
            seed: 21,
            ..TrainConfig::default()
        };
        let a = fit(&cfg, &staged, &valid).unwrap();
        let b = fit(&cfg, &staged, &valid).unwrap();
        let (ma, mb) = (a.model.as_matching().unwrap(), b.model.as_matching().unwrap());
        assert_eq!(ma, mb, "fit must be bit-reproducible");
        assert_eq!(a.trace.epochs.len(), b.trace.epochs.len());
        for (ea, eb) in a.trace.epochs.iter().zip(&b.trace.epochs) {
            assert_eq!(ea.train_loss.to_bits(), eb.train_loss.to_bits());
            assert_eq!(ea.val_metric.to_bits(), eb.val_metric.to_bits());
        }

        // PDA differs from PD only in the validation scorer here.
        let cfg_pda = TrainConfig {
            mode: TrainMode::Pda,
            params: ScoreParams { gamma: 1.0, ..ScoreParams::default() },
            ..cfg.clone()
        };
        let out = fit(&cfg_pda, &staged, &valid).unwrap();
        assert!(out.model.as_matching().is_some());
    }

    #[test]
    fn fit_patience_one_keeps_first_epoch() {
        let (staged, valid) = pd_fit_setup(20);
        let cfg = TrainConfig {
            dim: 4,
            epochs_max: 50,
            patience: 1,
            seed: 33,
            ..TrainConfig::default()
        };
        let out = fit(&cfg, &staged, &valid).unwrap();
        // With patience 1, training stops at the first non-improving epoch.
        let n = out.trace.epochs.len();
        assert!(n < 50);
        assert_eq!(out.trace.stopped, StopReason::Patience);
        assert_eq!(out.trace.best_epoch, n - 2, "best epoch precedes the stop");
        // Best metric is the running maximum.
        let best = out.trace.epochs[out.trace.best_epoch].val_metric;
        assert!(out.trace.epochs.iter().all(|e| e.val_metric <= best));
    }

    #[test]
    fn trace_csv_shape() {
        let trace = TrainTrace {
            epochs: vec![
                EpochStats { train_loss: 0.5, val_metric: 0.1 },
                EpochStats { train_loss: 0.4, val_metric: 0.2 },
            ],
            best_epoch: 1,
            stopped: StopReason::MaxEpochs,
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "epoch,loss,val_metric\n1,0.5,0.1\n2,0.4,0.2\n");
    }
}
