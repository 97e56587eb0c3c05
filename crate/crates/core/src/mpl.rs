//! Momentum pseudo-labeling and the pseudo-labeling baselines.
//!
//! Two copies of the model are kept: the online model is trained by gradient
//! descent on labeled utterances and on pseudo-labeled unlabeled utterances,
//! while the offline model generates those pseudo-labels and only ever moves
//! through the momentum update `offline ← α·offline + (1−α)·online`.
//!
//! α is not tuned directly. Instead a retention weight `w` states how much of
//! the starting model should survive in the offline model after one epoch of
//! `K` updates, so that `α^K = w`.

use std::borrow::Cow;
use std::time::Instant;

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{apply_in_place, AugmentPolicy};
use crate::ctc::{best_path_decode, TokenSequence};
use crate::error::{Error, Result};
use crate::metrics::corpus_error_rate;
use crate::model::{accumulate_loss_and_gradient, forward, init_params, Architecture, ParamVector};
use crate::optim::{average_best, clip_grad_norm, noam_lr, AdamConfig, AdamState};

/// A labeled utterance as seen by training code.
pub type LabeledView<'a> = (ArrayView2<'a, f32>, &'a TokenSequence);

/// `α = exp(ln(w) / K)`, so that `α^K = w`.
pub fn derive_alpha(w: f64, k: usize) -> Result<f64> {
    if !(w > 0.0 && w <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "retention weight w = {w} must lie in (0, 1]; w = 0 is the shared-parameter mode"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    Ok((w.ln() / k as f64).exp())
}

/// In-place momentum update `offline ← α·offline + (1−α)·online`.
pub fn ema_update_in_place(offline: &mut ParamVector, online: &ParamVector, alpha: f64) -> Result<()> {
    offline.ensure_same_arch(online)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} outside [0, 1]")));
    }
    let beta = 1.0 - alpha;
    for (phi, &xi) in offline.values_mut().iter_mut().zip(online.values()) {
        *phi = alpha * *phi + beta * xi;
    }
    Ok(())
}

pub fn ema_update(offline: &ParamVector, online: &ParamVector, alpha: f64) -> Result<ParamVector> {
    let mut out = offline.clone();
    ema_update_in_place(&mut out, online, alpha)?;
    Ok(out)
}

/// Best-path pseudo-label from clean (never augmented) features.
pub fn generate_pseudo_label(offline: &ParamVector, features: ArrayView2<'_, f32>) -> Result<TokenSequence> {
    Ok(best_path_decode(&forward(offline, features)?))
}

/// Pooled token error rate (percent) of greedy decoding over `items`.
pub fn evaluate_ter(params: &ParamVector, items: &[LabeledView<'_>]) -> Result<f64> {
    let hyps = items
        .iter()
        .map(|(x, _)| generate_pseudo_label(params, *x))
        .collect::<Result<Vec<_>>>()?;
    corpus_error_rate(items.iter().map(|(_, r)| *r).zip(hyps.iter()))
}

/// How the offline model follows the online one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OfflineUpdate {
    /// `α = derive_alpha(w, K)`.
    Retention { w: f64 },
    /// α = 0: the offline model is a copy of the online one after every step.
    Shared,
}

impl OfflineUpdate {
    /// `w = 0` selects [`OfflineUpdate::Shared`].
    pub fn from_weight(w: f64) -> Result<Self> {
        if w == 0.0 {
            Ok(OfflineUpdate::Shared)
        } else if w > 0.0 && w <= 1.0 {
            Ok(OfflineUpdate::Retention { w })
        } else {
            Err(Error::InvalidArgument(format!("w = {w} outside [0, 1]")))
        }
    }

    pub fn weight(&self) -> f64 {
        match *self {
            OfflineUpdate::Retention { w } => w,
            OfflineUpdate::Shared => 0.0,
        }
    }

    pub fn alpha(&self, k: usize) -> Result<f64> {
        match *self {
            OfflineUpdate::Retention { w } => derive_alpha(w, k),
            OfflineUpdate::Shared => Ok(0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    Constant { lr: f64 },
    Noam { warmup: u64, factor: f64, dim: usize },
}

impl LrSchedule {
    /// Noam schedule whose peak (at `warmup`) equals `peak`.
    pub fn noam_with_peak(peak: f64, warmup: u64, dim: usize) -> Self {
        let factor = peak * (dim as f64).sqrt() * (warmup as f64).sqrt();
        LrSchedule::Noam { warmup, factor, dim }
    }

    pub fn lr(&self, step: u64) -> f64 {
        match *self {
            LrSchedule::Constant { lr } => lr,
            LrSchedule::Noam { warmup, factor, dim } => noam_lr(step, warmup, factor, dim),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: LrSchedule,
    /// `lr` is overridden by `schedule` on every step.
    pub adam: AdamConfig,
    pub augment: AugmentPolicy,
    pub augment_enabled: bool,
    pub max_grad_norm: Option<f64>,
    /// Number of best-validation checkpoints averaged into the final model.
    pub n_average: usize,
    /// Recorded for reproducibility; the reference loops are single-threaded
    /// and always reduce in a fixed order.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::semi_supervised()
    }
}

impl TrainConfig {
    /// Base-model recipe: Noam warmup peaking near 3e-3.
    pub fn base() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 8,
            schedule: LrSchedule::noam_with_peak(3e-3, 500, 64),
            adam: AdamConfig {
                lr: 3e-3,
                beta1: 0.9,
                beta2: 0.98,
                eps: 1e-9,
            },
            augment: AugmentPolicy::default(),
            augment_enabled: true,
            max_grad_norm: Some(100.0),
            n_average: 10,
            deterministic: true,
        }
    }

    /// Recipe for the MPL, PL and IPL stages: constant 1e-3 Adam.
    pub fn semi_supervised() -> Self {
        TrainConfig {
            epochs: 40,
            schedule: LrSchedule::Constant { lr: 1e-3 },
            adam: AdamConfig::default(),
            ..TrainConfig::base()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if self.n_average == 0 {
            return Err(Error::InvalidConfig("n_average must be positive".into()));
        }
        if let Some(norm) = self.max_grad_norm {
            if norm.is_nan() || norm <= 0.0 {
                return Err(Error::InvalidConfig(format!("max_grad_norm {norm} must be positive")));
            }
        }
        Ok(())
    }
}

/// Which parameter set an evaluation refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelRole {
    Base,
    Online,
    Offline,
    Student,
}

impl ModelRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelRole::Base => "base",
            ModelRole::Online => "online",
            ModelRole::Offline => "offline",
            ModelRole::Student => "student",
        }
    }
}

/// Per-epoch training log entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Validation TER (percent) per model; `None` without a validation set.
    pub valid_ter: Vec<(ModelRole, Option<f64>)>,
    pub loss_sup: f64,
    pub loss_unsup: f64,
    /// Fraction of pseudo-labels generated this epoch that were empty.
    pub empty_pl_fraction: f64,
    pub mean_pl_len: f64,
    pub alpha: Option<f64>,
    pub w: Option<f64>,
    pub lr: f64,
    pub skipped: usize,
    pub wall_clock_s: f64,
}

impl EpochRecord {
    pub fn ter(&self, role: ModelRole) -> Option<f64> {
        self.valid_ter.iter().find(|(r, _)| *r == role).and_then(|(_, t)| *t)
    }
}

/// Counters accumulated over a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    /// Samples whose label could not be aligned to their frames.
    pub skipped_infeasible: usize,
    /// Unlabeled samples dropped because their pseudo-label was empty.
    pub empty_pseudo_labels: usize,
    pub pseudo_labels: usize,
    pub optimizer_steps: u64,
}

/// Whether a training target came from a reference or a pseudo-label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Labeled,
    Unlabeled,
}

/// Instrumentation hooks. All methods default to no-ops.
pub trait TrainObserver {
    /// Features handed to the offline model for pseudo-labeling.
    fn on_pseudo_label_input(&mut self, _features: ArrayView2<'_, f32>) {}
    /// Features the online model's loss was computed on, next to the clean
    /// features they were derived from.
    fn on_online_input(&mut self, _source: Source, _clean: ArrayView2<'_, f32>, _fed: ArrayView2<'_, f32>) {}
    /// Called after each momentum update with the new offline parameters.
    fn on_offline_update(&mut self, _offline: &ParamVector, _online: &ParamVector, _alpha: f64) {}
    fn on_epoch_end(&mut self, _record: &EpochRecord) {}
}

/// Observer that ignores everything.
pub struct NoObserver;

impl TrainObserver for NoObserver {}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Checkpoint-averaged parameters.
    pub params: ParamVector,
    /// Parameters after the last step, before averaging.
    pub last: ParamVector,
    pub history: Vec<EpochRecord>,
    pub stats: RunStats,
}

#[derive(Clone, Debug)]
pub struct MplOutcome {
    pub online: ParamVector,
    pub offline: ParamVector,
    pub state: MplState,
    pub history: Vec<EpochRecord>,
}

#[derive(Clone, Debug)]
pub struct IplRound {
    pub round: usize,
    /// Checkpoint average over this round's epochs.
    pub params: ParamVector,
    pub empty_pl_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct IplOutcome {
    pub params: ParamVector,
    pub rounds: Vec<IplRound>,
    pub history: Vec<EpochRecord>,
    pub stats: RunStats,
}

/// Online/offline pair and momentum bookkeeping.
#[derive(Clone, Debug)]
pub struct MplState {
    pub online: ParamVector,
    pub offline: ParamVector,
    pub alpha: f64,
    pub w: f64,
    /// Online updates per epoch.
    pub k: usize,
    pub step: u64,
    pub stats: RunStats,
}

impl MplState {
    /// Both models start from `base`.
    pub fn new(base: &ParamVector, update: OfflineUpdate, k: usize) -> Result<Self> {
        Ok(MplState {
            online: base.clone(),
            offline: base.clone(),
            alpha: update.alpha(k)?,
            w: update.weight(),
            k,
            step: 0,
            stats: RunStats::default(),
        })
    }

    pub fn momentum_step(&mut self) -> Result<()> {
        ema_update_in_place(&mut self.offline, &self.online, self.alpha)?;
        self.step += 1;
        Ok(())
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derived_rng(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(mix(seed) ^ a) ^ b))
}

const SHUFFLE_STREAM: u64 = 1 << 62;

/// A sample ready for the online model.
struct Target<'a> {
    features: ArrayView2<'a, f32>,
    label: Cow<'a, TokenSequence>,
    source: Source,
}

#[derive(Default)]
struct BatchTotals {
    loss_sup: f64,
    loss_unsup: f64,
    skipped: usize,
    used: usize,
}

/// Optimizer, schedule and scratch space for one gradient-trained model.
struct Learner<'c> {
    config: &'c TrainConfig,
    adam: AdamState,
    grad: Vec<f64>,
    seed: u64,
}

impl<'c> Learner<'c> {
    fn new(config: &'c TrainConfig, params: &ParamVector, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Learner {
            config,
            adam: AdamState::new(config.adam, params.len())?,
            grad: vec![0.0; params.len()],
            seed,
        })
    }

    fn lr(&self) -> f64 {
        self.config.schedule.lr(self.adam.step() + 1)
    }

    /// Sums losses and gradients over `batch`, then takes one Adam step.
    /// Infeasible samples are skipped; a batch with nothing left makes no step.
    fn step(
        &mut self,
        params: &mut ParamVector,
        batch: &[Target<'_>],
        epoch: usize,
        totals: &mut BatchTotals,
        observer: &mut dyn TrainObserver,
    ) -> Result<bool> {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        let step_id = self.adam.step();
        let mut used = 0;
        for (pos, target) in batch.iter().enumerate() {
            let augmented = (self.config.augment_enabled && !self.config.augment.is_identity()).then(|| {
                let mut rng = derived_rng(self.seed, step_id, pos as u64);
                let mut x = target.features.to_owned();
                apply_in_place(&mut x, &self.config.augment, &mut rng);
                x
            });
            let fed_view = augmented.as_ref().map_or(target.features, |x| x.view());
            observer.on_online_input(target.source, target.features, fed_view);
            match accumulate_loss_and_gradient(params, fed_view, &target.label, &mut self.grad) {
                Ok(loss) => {
                    used += 1;
                    match target.source {
                        Source::Labeled => totals.loss_sup += loss,
                        Source::Unlabeled => totals.loss_unsup += loss,
                    }
                }
                Err(Error::InfeasibleLabel { .. }) => totals.skipped += 1,
                Err(Error::NonFinite(what)) => {
                    return Err(Error::Diverged {
                        epoch,
                        batch: step_id as usize,
                        detail: format!("non-finite {what}"),
                    })
                }
                Err(e) => return Err(e),
            }
        }
        totals.used += used;
        if used == 0 {
            return Ok(false);
        }
        if self.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                batch: step_id as usize,
                detail: "non-finite gradient".into(),
            });
        }
        if let Some(max) = self.config.max_grad_norm {
            clip_grad_norm(&mut self.grad, max);
        }
        let lr = self.lr();
        self.adam.set_lr(lr);
        self.adam.update(params, &self.grad)?;
        Ok(true)
    }
}

fn valid_ter(params: &ParamVector, valid: &[LabeledView<'_>]) -> Result<Option<f64>> {
    if valid.is_empty() {
        Ok(None)
    } else {
        evaluate_ter(params, valid).map(Some)
    }
}

/// Selection key for checkpoint averaging: validation TER, or recency when
/// there is no validation set.
fn selection_key(ter: Option<f64>, epoch: usize) -> f64 {
    ter.unwrap_or(-(epoch as f64))
}

fn finish_average(history: &[(f64, ParamVector)], n: usize, fallback: &ParamVector) -> Result<ParamVector> {
    if history.is_empty() {
        Ok(fallback.clone())
    } else {
        average_best(history, n)
    }
}

fn check_loss(loss: f64, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged {
            epoch,
            batch: 0,
            detail: format!("epoch loss {loss}"),
        })
    }
}

/// Trains a model from `init_params(arch, seed)` on labeled data alone.
pub fn supervised_train(
    arch: Architecture,
    labeled: &[LabeledView<'_>],
    valid: &[LabeledView<'_>],
    config: &TrainConfig,
    seed: u64,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    let init = init_params(arch, seed)?;
    supervised_train_from(init, labeled, valid, config, seed, observer)
}

/// Supervised training from given parameters.
pub fn supervised_train_from(
    init: ParamVector,
    labeled: &[LabeledView<'_>],
    valid: &[LabeledView<'_>],
    config: &TrainConfig,
    seed: u64,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    if labeled.is_empty() {
        return Err(Error::InvalidArgument("supervised training needs labeled data".into()));
    }
    let mut params = init;
    let mut learner = Learner::new(config, &params, seed)?;
    let mut order: Vec<usize> = (0..labeled.len()).collect();
    let mut history = Vec::new();
    let mut checkpoints = Vec::new();
    let mut stats = RunStats::default();
    let started = Instant::now();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut derived_rng(seed, SHUFFLE_STREAM, epoch as u64));
        let mut totals = BatchTotals::default();
        let mut lr = learner.lr();
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Target<'_>> = chunk
                .iter()
                .map(|&i| Target {
                    features: labeled[i].0,
                    label: Cow::Borrowed(labeled[i].1),
                    source: Source::Labeled,
                })
                .collect();
            lr = learner.lr();
            if learner.step(&mut params, &batch, epoch, &mut totals, observer)? {
                stats.optimizer_steps += 1;
            }
        }
        check_loss(totals.loss_sup, epoch)?;
        stats.skipped_infeasible += totals.skipped;
        let ter = valid_ter(&params, valid)?;
        checkpoints.push((selection_key(ter, epoch), params.clone()));
        let record = EpochRecord {
            epoch,
            valid_ter: vec![(ModelRole::Base, ter)],
            loss_sup: totals.loss_sup,
            loss_unsup: 0.0,
            empty_pl_fraction: 0.0,
            mean_pl_len: 0.0,
            alpha: None,
            w: None,
            lr,
            skipped: totals.skipped,
            wall_clock_s: started.elapsed().as_secs_f64(),
        };
        observer.on_epoch_end(&record);
        history.push(record);
    }
    Ok(TrainOutcome {
        params: finish_average(&checkpoints, config.n_average, &params)?,
        last: params,
        history,
        stats,
    })
}

#[derive(Clone, Copy)]
enum Item {
    Labeled(usize),
    Unlabeled(usize),
}

/// Online updates per epoch when iterating the union of both sets.
pub fn batches_per_epoch(n_labeled: usize, n_unlabeled: usize, batch_size: usize) -> usize {
    (n_labeled + n_unlabeled).div_ceil(batch_size.max(1))
}

/// Momentum pseudo-labeling starting from a trained base model.
///
/// Each epoch walks a shuffled union of labeled and unlabeled utterances in
/// mini-batches. Unlabeled members are labeled by the offline model on clean
/// features at the moment their batch is processed; empty pseudo-labels are
/// dropped and counted. After every online step the offline model takes one
/// momentum update. Returns both models, each checkpoint-averaged over its
/// own best validation epochs.
#[allow(clippy::too_many_arguments)]
pub fn mpl_train(
    base: &ParamVector,
    labeled: &[LabeledView<'_>],
    unlabeled: &[ArrayView2<'_, f32>],
    valid: &[LabeledView<'_>],
    update: OfflineUpdate,
    config: &TrainConfig,
    seed: u64,
    observer: &mut dyn TrainObserver,
) -> Result<MplOutcome> {
    if labeled.is_empty() && unlabeled.is_empty() {
        return Err(Error::InvalidArgument("MPL needs labeled or unlabeled data".into()));
    }
    config.validate()?;
    let k = batches_per_epoch(labeled.len(), unlabeled.len(), config.batch_size);
    let mut state = MplState::new(base, update, k)?;
    let mut learner = Learner::new(config, &state.online, seed)?;
    let mut order: Vec<Item> = (0..labeled.len())
        .map(Item::Labeled)
        .chain((0..unlabeled.len()).map(Item::Unlabeled))
        .collect();

    let mut history = Vec::new();
    let mut online_ckpts = Vec::new();
    let mut offline_ckpts = Vec::new();
    let started = Instant::now();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut derived_rng(seed, SHUFFLE_STREAM, epoch as u64));
        let mut totals = BatchTotals::default();
        let (mut generated, mut empty, mut pl_tokens) = (0usize, 0usize, 0usize);
        let mut lr = learner.lr();
        for chunk in order.chunks(config.batch_size) {
            let mut batch = Vec::with_capacity(chunk.len());
            for item in chunk {
                match *item {
                    Item::Labeled(i) => batch.push(Target {
                        features: labeled[i].0,
                        label: Cow::Borrowed(labeled[i].1),
                        source: Source::Labeled,
                    }),
                    Item::Unlabeled(i) => {
                        let x = unlabeled[i];
                        observer.on_pseudo_label_input(x);
                        let label = generate_pseudo_label(&state.offline, x)?;
                        generated += 1;
                        pl_tokens += label.len();
                        if label.is_empty() {
                            empty += 1;
                            continue;
                        }
                        batch.push(Target {
                            features: x,
                            label: Cow::Owned(label),
                            source: Source::Unlabeled,
                        });
                    }
                }
            }
            lr = learner.lr();
            if learner.step(&mut state.online, &batch, epoch, &mut totals, observer)? {
                state.stats.optimizer_steps += 1;
            }
            state.momentum_step()?;
            observer.on_offline_update(&state.offline, &state.online, state.alpha);
        }
        check_loss(totals.loss_sup + totals.loss_unsup, epoch)?;
        state.stats.skipped_infeasible += totals.skipped;
        state.stats.pseudo_labels += generated;
        state.stats.empty_pseudo_labels += empty;

        let online_ter = valid_ter(&state.online, valid)?;
        let offline_ter = valid_ter(&state.offline, valid)?;
        online_ckpts.push((selection_key(online_ter, epoch), state.online.clone()));
        offline_ckpts.push((selection_key(offline_ter, epoch), state.offline.clone()));
        let record = EpochRecord {
            epoch,
            valid_ter: vec![(ModelRole::Online, online_ter), (ModelRole::Offline, offline_ter)],
            loss_sup: totals.loss_sup,
            loss_unsup: totals.loss_unsup,
            empty_pl_fraction: ratio(empty, generated),
            mean_pl_len: ratio(pl_tokens, generated),
            alpha: Some(state.alpha),
            w: Some(state.w),
            lr,
            skipped: totals.skipped + empty,
            wall_clock_s: started.elapsed().as_secs_f64(),
        };
        observer.on_epoch_end(&record);
        history.push(record);
    }
    Ok(MplOutcome {
        online: finish_average(&online_ckpts, config.n_average, &state.online)?,
        offline: finish_average(&offline_ckpts, config.n_average, &state.offline)?,
        state,
        history,
    })
}

/// MPL on unlabeled data alone: only pseudo-labeled batches.
pub fn mpl_train_unsup_only(
    base: &ParamVector,
    unlabeled: &[ArrayView2<'_, f32>],
    valid: &[LabeledView<'_>],
    update: OfflineUpdate,
    config: &TrainConfig,
    seed: u64,
    observer: &mut dyn TrainObserver,
) -> Result<MplOutcome> {
    if unlabeled.is_empty() {
        return Err(Error::InvalidArgument("unsupervised MPL needs unlabeled data".into()));
    }
    mpl_train(base, &[], unlabeled, valid, update, config, seed, observer)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Pseudo-labels every unlabeled utterance with `params`.
pub fn label_all(params: &ParamVector, unlabeled: &[ArrayView2<'_, f32>]) -> Result<Vec<TokenSequence>> {
    unlabeled.iter().map(|x| generate_pseudo_label(params, *x)).collect()
}

/// Standard pseudo-labeling: label the unlabeled set once with `base`, then
/// train a student initialized from `base` on labeled plus pseudo-labeled data
/// for `config.epochs` epochs.
pub fn pl_train(
    base: &ParamVector,
    labeled: &[LabeledView<'_>],
    unlabeled: &[ArrayView2<'_, f32>],
    valid: &[LabeledView<'_>],
    config: &TrainConfig,
    seed: u64,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    let out = ipl_train(
        base,
        labeled,
        unlabeled,
        valid,
        1,
        config.epochs,
        config,
        seed,
        observer,
    )?;
    Ok(TrainOutcome {
        last: out.rounds.last().map_or_else(|| base.clone(), |r| r.params.clone()),
        params: out.params,
        history: out.history,
        stats: out.stats,
    })
}

/// Iterative pseudo-labeling: `rounds` rounds of `epochs_per_round` epochs.
/// At the start of each round the current (unaveraged) model relabels the
/// unlabeled set; optimizer state carries over between rounds.
#[allow(clippy::too_many_arguments)]
pub fn ipl_train(
    base: &ParamVector,
    labeled: &[LabeledView<'_>],
    unlabeled: &[ArrayView2<'_, f32>],
    valid: &[LabeledView<'_>],
    rounds: usize,
    epochs_per_round: usize,
    config: &TrainConfig,
    seed: u64,
    observer: &mut dyn TrainObserver,
) -> Result<IplOutcome> {
    if rounds == 0 {
        return Err(Error::InvalidArgument("IPL needs at least one round".into()));
    }
    if labeled.is_empty() && unlabeled.is_empty() {
        return Err(Error::InvalidArgument("IPL needs labeled or unlabeled data".into()));
    }
    let mut params = base.clone();
    let mut learner = Learner::new(config, &params, seed)?;
    let mut stats = RunStats::default();
    let mut history = Vec::new();
    let mut round_records = Vec::new();
    let started = Instant::now();
    let mut epoch = 0;
    for round in 1..=rounds {
        if epochs_per_round == 0 {
            break;
        }
        for x in unlabeled {
            observer.on_pseudo_label_input(*x);
        }
        let labels = label_all(&params, unlabeled)?;
        let empty = labels.iter().filter(|l| l.is_empty()).count();
        let pl_tokens: usize = labels.iter().map(TokenSequence::len).sum();
        stats.pseudo_labels += labels.len();
        stats.empty_pseudo_labels += empty;
        let mut order: Vec<Item> = (0..labeled.len())
            .map(Item::Labeled)
            .chain(
                (0..unlabeled.len())
                    .filter(|&i| !labels[i].is_empty())
                    .map(Item::Unlabeled),
            )
            .collect();
        let mut checkpoints = Vec::new();
        for _ in 0..epochs_per_round {
            epoch += 1;
            order.shuffle(&mut derived_rng(seed, SHUFFLE_STREAM, epoch as u64));
            let mut totals = BatchTotals::default();
            let mut lr = learner.lr();
            for chunk in order.chunks(config.batch_size) {
                let batch: Vec<Target<'_>> = chunk
                    .iter()
                    .map(|item| match *item {
                        Item::Labeled(i) => Target {
                            features: labeled[i].0,
                            label: Cow::Borrowed(labeled[i].1),
                            source: Source::Labeled,
                        },
                        Item::Unlabeled(i) => Target {
                            features: unlabeled[i],
                            label: Cow::Borrowed(&labels[i]),
                            source: Source::Unlabeled,
                        },
                    })
                    .collect();
                lr = learner.lr();
                if learner.step(&mut params, &batch, epoch, &mut totals, observer)? {
                    stats.optimizer_steps += 1;
                }
            }
            check_loss(totals.loss_sup + totals.loss_unsup, epoch)?;
            stats.skipped_infeasible += totals.skipped;
            let ter = valid_ter(&params, valid)?;
            checkpoints.push((selection_key(ter, epoch), params.clone()));
            let record = EpochRecord {
                epoch,
                valid_ter: vec![(ModelRole::Student, ter)],
                loss_sup: totals.loss_sup,
                loss_unsup: totals.loss_unsup,
                empty_pl_fraction: ratio(empty, labels.len()),
                mean_pl_len: ratio(pl_tokens, labels.len()),
                alpha: None,
                w: None,
                lr,
                skipped: totals.skipped + empty,
                wall_clock_s: started.elapsed().as_secs_f64(),
            };
            observer.on_epoch_end(&record);
            history.push(record);
        }
        round_records.push(IplRound {
            round,
            params: finish_average(&checkpoints, config.n_average, &params)?,
            empty_pl_fraction: ratio(empty, labels.len()),
        });
    }
    let final_params = round_records.last().map_or_else(|| base.clone(), |r| r.params.clone());
    Ok(IplOutcome {
        params: final_params,
        rounds: round_records,
        history,
        stats,
    })
}
