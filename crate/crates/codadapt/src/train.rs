//! The joint optimization loop: supervised source batches, adversarial
//! and class-confusion objectives on target batches, BYOL on augmented
//! target views, Adam updates with a separate discriminator learning
//! rate, and EMA target-network updates.
//!
//! An epoch is one pass over the source set; target batches come from an
//! independently shuffled cyclic stream. Target labels never enter any
//! loss: the step functions only accept target features, and the labels
//! are consumed exclusively by the per-epoch evaluation.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{epoch_batches, CyclicBatches, SignalDataset};
use crate::error::{Error, Result};
use crate::eval;
use crate::losses::{
    adversarial_loss_grad, byol_loss_grad, mcc_loss_grad, task_loss_grad, LossBundle,
};
use crate::model::{init_model, EncoderCache, GradientReversal, GrlConfig, ModelState, NetworkSpec};
use crate::nn::{MlpCache, ParamVisitor};
use crate::scalar::Real;
use crate::seed;
use crate::signal::augment;

/// Which loss components are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Supervised source training only.
    Plain,
    /// Task + adversarial domain alignment.
    Dann,
    /// Task + adversarial + class confusion.
    DannMcc,
    /// Task + BYOL self-supervision.
    ByolOnly,
    /// All four objectives.
    Full,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::Plain, Method::Dann, Method::DannMcc, Method::ByolOnly, Method::Full];

    pub fn adversarial(self) -> bool {
        matches!(self, Method::Dann | Method::DannMcc | Method::Full)
    }

    pub fn mcc(self) -> bool {
        matches!(self, Method::DannMcc | Method::Full)
    }

    pub fn byol(self) -> bool {
        matches!(self, Method::ByolOnly | Method::Full)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Plain => "plain",
            Method::Dann => "dann",
            Method::DannMcc => "dann_mcc",
            Method::ByolOnly => "byol_only",
            Method::Full => "full",
        }
    }

    /// Parameter-name prefixes the optimizer may touch for this method;
    /// everything else stays at its initial value.
    fn active_prefixes(self) -> &'static [&'static str] {
        match self {
            Method::Plain => &["encoder.", "classifier."],
            Method::Dann | Method::DannMcc => &["encoder.", "classifier.", "discriminator."],
            Method::ByolOnly => &["encoder.", "classifier.", "projector.", "predictor."],
            Method::Full => {
                &["encoder.", "classifier.", "discriminator.", "projector.", "predictor."]
            }
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Method::Plain),
            "dann" => Ok(Method::Dann),
            "dann_mcc" => Ok(Method::DannMcc),
            "byol_only" => Ok(Method::ByolOnly),
            "full" => Ok(Method::Full),
            other => Err(Error::Validation(format!(
                "unknown method {other:?}; expected one of plain, dann, dann_mcc, byol_only, full"
            ))),
        }
    }
}

/// Augmentation strengths for the BYOL views.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub noise_sigma: f64,
    pub max_shift_frac: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { noise_sigma: 0.1, max_shift_frac: 0.1 }
    }
}

/// Training hyperparameters. Defaults are the production settings:
/// 500 epochs, batch 128 per domain, 5e-5 main / 1e-5 discriminator
/// learning rates, 1e-4 weight decay, psi 1.0, temperature 2.5,
/// tau 0.99.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_main: f64,
    pub lr_discriminator: f64,
    pub weight_decay: f64,
    pub psi: f64,
    pub temperature: f64,
    pub tau: f64,
    pub method: Method,
    pub seed: u64,
    pub augment: AugmentConfig,
    /// Run the BYOL branch a second time with the views swapped and
    /// average the two losses (off by default).
    pub byol_symmetric: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 128,
            lr_main: 5e-5,
            lr_discriminator: 1e-5,
            weight_decay: 1e-4,
            psi: 1.0,
            temperature: 2.5,
            tau: 0.99,
            method: Method::Full,
            seed: 0,
            augment: AugmentConfig::default(),
            byol_symmetric: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Validation("epochs and batch_size must be positive".into()));
        }
        if !(self.psi > 0.0) {
            return Err(Error::Validation(format!("psi must be positive, got {}", self.psi)));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::Validation(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Validation(format!("tau must be in [0, 1], got {}", self.tau)));
        }
        if self.lr_main < 0.0 || self.lr_discriminator < 0.0 || self.weight_decay < 0.0 {
            return Err(Error::Validation("rates must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One epoch of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub losses: LossBundle,
    pub target_accuracy: f64,
    pub target_macro_f1: f64,
    pub seconds: f64,
}

/// Per-epoch loss and metric trajectories.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.target_accuracy)
    }

    /// Digest over everything except wall-clock fields; two runs of the
    /// same seed must agree on this bit for bit.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for e in &self.epochs {
            h.update(e.epoch.to_le_bytes());
            for v in [e.losses.task, e.losses.adversarial, e.losses.mcc, e.losses.byol, e.losses.total, e.target_accuracy, e.target_macro_f1]
            {
                h.update(v.to_le_bytes());
            }
        }
        let out = h.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["epoch", "task", "adv", "mcc", "byol", "total", "target_acc", "target_macro_f1", "seconds"])
            .map_err(|e| Error::Format(e.to_string()))?;
        for e in &self.epochs {
            csv.write_record([
                e.epoch.to_string(),
                e.losses.task.to_string(),
                e.losses.adversarial.to_string(),
                e.losses.mcc.to_string(),
                e.losses.byol.to_string(),
                e.losses.total.to_string(),
                e.target_accuracy.to_string(),
                e.target_macro_f1.to_string(),
                e.seconds.to_string(),
            ])
            .map_err(|e| Error::Format(e.to_string()))?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut csv = csv::Reader::from_reader(r);
        let mut epochs = Vec::new();
        for rec in csv.records() {
            let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Format(format!("bad log field {i}")))
            };
            epochs.push(EpochRecord {
                epoch: field(0)? as usize,
                losses: LossBundle {
                    task: field(1)?,
                    adversarial: field(2)?,
                    mcc: field(3)?,
                    byol: field(4)?,
                    total: field(5)?,
                },
                target_accuracy: field(6)?,
                target_macro_f1: field(7)?,
                seconds: field(8)?,
            });
        }
        Ok(Self { epochs })
    }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// One Adam update on a flat parameter slice. Classic coupled L2 decay:
/// the decay term joins the raw gradient before the moment updates.
/// `step` is the 1-based update count for bias correction.
#[allow(clippy::too_many_arguments)]
pub fn adam_step<T: Real>(
    value: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    step: u64,
    lr: f64,
    weight_decay: f64,
) {
    let b1 = T::c(ADAM_BETA1);
    let b2 = T::c(ADAM_BETA2);
    let one = T::one();
    let wd = T::c(weight_decay);
    let bias1 = T::c(1.0 - ADAM_BETA1.powi(step as i32));
    let bias2 = T::c(1.0 - ADAM_BETA2.powi(step as i32));
    let lr_t = T::c(lr);
    let eps = T::c(ADAM_EPS);
    for i in 0..value.len() {
        let g = grad[i] + wd * value[i];
        m[i] = b1 * m[i] + (one - b1) * g;
        v[i] = b2 * v[i] + (one - b2) * g * g;
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        value[i] = value[i] - lr_t * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Adam state over the trainable parameters of one method's active
/// groups, keyed by parameter name.
pub struct Optimizer<T> {
    step: u64,
    slots: HashMap<String, (Vec<T>, Vec<T>)>,
    method: Method,
}

impl<T: Real> Optimizer<T> {
    pub fn new(method: Method) -> Self {
        Self { step: 0, slots: HashMap::new(), method }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one update from the gradients accumulated in `state`.
    /// Discriminator parameters use `lr_discriminator`; everything else
    /// `lr_main`. Parameters outside the method's active groups are not
    /// touched at all (no decay either).
    pub fn apply(&mut self, state: &mut ModelState<T>, cfg: &TrainConfig) {
        self.step += 1;
        let step = self.step;
        let prefixes = self.method.active_prefixes();
        let slots = &mut self.slots;
        state.visit_trainable(&mut |p| {
            if !prefixes.iter().any(|pre| p.name.starts_with(pre)) {
                return;
            }
            let lr = if p.name.starts_with("discriminator.") {
                cfg.lr_discriminator
            } else {
                cfg.lr_main
            };
            let (m, v) = slots
                .entry(p.name.to_string())
                .or_insert_with(|| (vec![T::zero(); p.value.len()], vec![T::zero(); p.value.len()]));
            adam_step(p.value, p.grad, m, v, step, lr, cfg.weight_decay);
        });
        state.step += 1;
    }
}

// ---------------------------------------------------------------------------
// Step computation
// ---------------------------------------------------------------------------

/// The inputs of one optimization step. Views are present exactly when
/// the method runs the BYOL branch; they are augmented copies of the
/// target batch.
pub struct StepBatches<T> {
    pub src_x: Array2<T>,
    pub src_y: Vec<usize>,
    pub tgt_x: Array2<T>,
    pub view_online: Option<Array2<T>>,
    pub view_target: Option<Array2<T>>,
}

/// Loss values of one step without touching gradients (used by the
/// finite-difference checks). Batch-norm running statistics are updated
/// as a side effect, but no loss reads them on the trained branches, so
/// the returned value is a pure function of (parameters, batches).
pub fn step_losses<T: Real>(
    state: &mut ModelState<T>,
    batches: &StepBatches<T>,
    cfg: &TrainConfig,
) -> Result<LossBundle> {
    step_impl(state, batches, cfg, false)
}

/// Loss values of one step, with gradients accumulated into `state`.
pub fn step_gradients<T: Real>(
    state: &mut ModelState<T>,
    batches: &StepBatches<T>,
    cfg: &TrainConfig,
) -> Result<LossBundle> {
    step_impl(state, batches, cfg, true)
}

fn step_impl<T: Real>(
    state: &mut ModelState<T>,
    batches: &StepBatches<T>,
    cfg: &TrainConfig,
    backward: bool,
) -> Result<LossBundle> {
    let method = cfg.method;
    let grl = GradientReversal::<T>::new(&GrlConfig { psi: cfg.psi });

    // Source branch: task loss.
    let (f_src, cache_src) = state.encoder.forward_train(&batches.src_x)?;
    let (logits_src, cache_c_src) = state.classifier.forward_train(&f_src);
    let (task, g_logits_src) = task_loss_grad(&logits_src, &batches.src_y)?;

    // Target branch through the encoder (adversarial and/or confusion).
    let needs_target = method.adversarial() || method.mcc();
    let mut f_tgt_pack = None;
    if needs_target {
        f_tgt_pack = Some(state.encoder.forward_train(&batches.tgt_x)?);
    }

    let mut adv = T::zero();
    let mut adv_packs = None;
    if method.adversarial() {
        let (f_tgt, _) = f_tgt_pack.as_ref().unwrap();
        let (d_src, cache_d_src) = state.discriminator.forward_train(&f_src);
        let (d_tgt, cache_d_tgt) = state.discriminator.forward_train(f_tgt);
        let (loss, g_dsrc, g_dtgt) = adversarial_loss_grad(&d_src, &d_tgt);
        adv = loss;
        adv_packs = Some((cache_d_src, cache_d_tgt, g_dsrc, g_dtgt));
    }

    let mut mcc = T::zero();
    let mut mcc_pack = None;
    if method.mcc() {
        let (f_tgt, _) = f_tgt_pack.as_ref().unwrap();
        let (logits_tgt, cache_c_tgt) = state.classifier.forward_train(f_tgt);
        let (loss, _, g_logits_tgt) = mcc_loss_grad(&logits_tgt, cfg.temperature)?;
        mcc = loss;
        mcc_pack = Some((cache_c_tgt, g_logits_tgt));
    }

    let mut byol = T::zero();
    let mut byol_packs: Vec<(EncoderCache<T>, MlpCache<T>, MlpCache<T>, Array2<T>)> = Vec::new();
    if method.byol() {
        let view_online = batches
            .view_online
            .as_ref()
            .ok_or_else(|| Error::Validation("BYOL method without online view".into()))?;
        let view_target = batches
            .view_target
            .as_ref()
            .ok_or_else(|| Error::Validation("BYOL method without target view".into()))?;
        // Online branch in training mode; target branch with inference
        // statistics and no gradients.
        let (f_view, cache_view) = state.encoder.forward_train(view_online)?;
        let (z, cache_g) = state.projector.forward_train(&f_view);
        let (p, cache_q) = state.predictor.forward_train(&z);
        let h_t = state.target_encoder.forward_eval(view_target)?;
        let z_t = state.target_projector.forward_eval(&h_t);
        let (loss1, g_p1) = byol_loss_grad(&p, &z_t)?;
        if cfg.byol_symmetric {
            let (f2, cache_view2) = state.encoder.forward_train(view_target)?;
            let (z2, cache_g2) = state.projector.forward_train(&f2);
            let (p2, cache_q2) = state.predictor.forward_train(&z2);
            let h2 = state.target_encoder.forward_eval(view_online)?;
            let z_t2 = state.target_projector.forward_eval(&h2);
            let (loss2, g_p2) = byol_loss_grad(&p2, &z_t2)?;
            let half = T::c(0.5);
            byol = (loss1 + loss2) * half;
            byol_packs.push((cache_view, cache_g, cache_q, g_p1.mapv(|v| v * half)));
            byol_packs.push((cache_view2, cache_g2, cache_q2, g_p2.mapv(|v| v * half)));
        } else {
            byol = loss1;
            byol_packs.push((cache_view, cache_g, cache_q, g_p1));
        }
    }

    let bundle = LossBundle::new(
        task.as_f64(),
        adv.as_f64(),
        mcc.as_f64(),
        byol.as_f64(),
    );
    if !bundle.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss at step {}: {bundle:?}", state.step)));
    }
    if !backward {
        return Ok(bundle);
    }

    // Backward, mirroring the forward order. Feature gradients of the
    // source/target encoder passes accumulate from every head that
    // consumed them before entering the encoder once per pass.
    let mut g_feat_src = state.classifier.backward(&cache_c_src, &g_logits_src);
    let mut g_feat_tgt: Option<Array2<T>> = None;
    if let Some((cache_d_src, cache_d_tgt, g_dsrc, g_dtgt)) = adv_packs {
        let g_from_d_src = state.discriminator.backward(&cache_d_src, &g_dsrc);
        g_feat_src += &grl.backward(g_from_d_src);
        let g_from_d_tgt = state.discriminator.backward(&cache_d_tgt, &g_dtgt);
        g_feat_tgt = Some(grl.backward(g_from_d_tgt));
    }
    if let Some((cache_c_tgt, g_logits_tgt)) = mcc_pack {
        let g = state.classifier.backward(&cache_c_tgt, &g_logits_tgt);
        g_feat_tgt = Some(match g_feat_tgt {
            Some(mut acc) => {
                acc += &g;
                acc
            }
            None => g,
        });
    }
    state.encoder.backward(&cache_src, &g_feat_src);
    if let Some(g) = g_feat_tgt {
        let (_, cache_tgt) = f_tgt_pack.as_ref().unwrap();
        state.encoder.backward(cache_tgt, &g);
    }
    for (cache_view, cache_g, cache_q, g_p) in &byol_packs {
        let g_z = state.predictor.backward(cache_q, g_p);
        let g_fview = state.projector.backward(cache_g, &g_z);
        state.encoder.backward(cache_view, &g_fview);
    }

    Ok(bundle)
}

/// Adversarial-branch gradient with respect to the encoder parameters,
/// with an explicit gradient scale at the reversal seam: `-psi` for the
/// real layer, `+1` for the layer removed. Used to verify the reversal
/// end to end.
pub fn adversarial_encoder_gradient<T: Real>(
    state: &mut ModelState<T>,
    src_x: &Array2<T>,
    tgt_x: &Array2<T>,
    reversal: GradientReversal<T>,
) -> Result<Vec<T>> {
    state.zero_grads();
    let (f_src, cache_src) = state.encoder.forward_train(src_x)?;
    let (f_tgt, cache_tgt) = state.encoder.forward_train(tgt_x)?;
    let (d_src, cache_d_src) = state.discriminator.forward_train(&f_src);
    let (d_tgt, cache_d_tgt) = state.discriminator.forward_train(&f_tgt);
    let (_, g_dsrc, g_dtgt) = adversarial_loss_grad(&d_src, &d_tgt);
    let g_src = reversal.backward(state.discriminator.backward(&cache_d_src, &g_dsrc));
    let g_tgt = reversal.backward(state.discriminator.backward(&cache_d_tgt, &g_dtgt));
    state.encoder.backward(&cache_src, &g_src);
    state.encoder.backward(&cache_tgt, &g_tgt);
    let mut grads = Vec::new();
    state.encoder.visit_params(&mut |p| grads.extend_from_slice(p.grad));
    Ok(grads)
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct Trainer<T: Real> {
    state: ModelState<T>,
    optimizer: Optimizer<T>,
    shuffle_src: ChaCha8Rng,
    target_iter: CyclicBatches,
    augment_rng: ChaCha8Rng,
    log: TrainLog,
    epochs_done: usize,
}

impl<T: Real> Trainer<T> {
    fn new(spec: &NetworkSpec, target_len: usize, cfg: &TrainConfig) -> Result<Self> {
        let state = init_model(spec, seed::derive_seed(cfg.seed, &["train", "init"]))?;
        let target_iter = CyclicBatches::new(
            target_len,
            cfg.batch_size,
            seed::stream(cfg.seed, &["train", "shuffle", "target"]),
        )?;
        Ok(Self {
            state,
            optimizer: Optimizer::new(cfg.method),
            shuffle_src: seed::stream(cfg.seed, &["train", "shuffle", "source"]),
            target_iter,
            augment_rng: seed::stream(cfg.seed, &["train", "augment"]),
            log: TrainLog::default(),
            epochs_done: 0,
        })
    }

    fn run_epochs(
        &mut self,
        source: &SignalDataset,
        target: &SignalDataset,
        cfg: &TrainConfig,
        until_epoch: usize,
        mut after_epoch: Option<&mut dyn FnMut(&mut Self) -> Result<()>>,
    ) -> Result<()> {
        let byol_active = cfg.method.byol();
        while self.epochs_done < until_epoch {
            let epoch_start = Instant::now();
            let mut sums = [0.0f64; 4];
            let mut steps = 0usize;
            let mut src_epoch =
                epoch_batches(source, cfg.batch_size, true, &mut self.shuffle_src)?;
            while let Some(idx) = src_epoch.next_indices() {
                let (src_x, src_y) = source.batch_of::<T>(idx);
                let tgt_idx = self.target_iter.next_indices();
                let (tgt_x, _tgt_labels_unused) = target.batch_of::<T>(&tgt_idx);
                // Target labels deliberately go no further than this
                // scope; the step functions cannot see them.
                let (view_online, view_target) = if byol_active {
                    let v = augment_rows(&tgt_x, &mut self.augment_rng, &cfg.augment);
                    let v2 = augment_rows(&tgt_x, &mut self.augment_rng, &cfg.augment);
                    (Some(v), Some(v2))
                } else {
                    (None, None)
                };
                let batches = StepBatches { src_x, src_y, tgt_x, view_online, view_target };
                self.state.zero_grads();
                let bundle = step_gradients(&mut self.state, &batches, cfg)?;
                self.optimizer.apply(&mut self.state, cfg);
                if byol_active {
                    self.state.ema_update(cfg.tau)?;
                }
                sums[0] += bundle.task;
                sums[1] += bundle.adversarial;
                sums[2] += bundle.mcc;
                sums[3] += bundle.byol;
                steps += 1;
            }
            let n = steps.max(1) as f64;
            let losses = LossBundle::new(sums[0] / n, sums[1] / n, sums[2] / n, sums[3] / n);
            let metrics = eval::evaluate(&self.state, target)?;
            self.epochs_done += 1;
            self.log.epochs.push(EpochRecord {
                epoch: self.epochs_done,
                losses,
                target_accuracy: metrics.accuracy,
                target_macro_f1: metrics.macro_f1,
                seconds: epoch_start.elapsed().as_secs_f64(),
            });
            if let Some(cb) = after_epoch.as_mut() {
                cb(self)?;
            }
        }
        Ok(())
    }
}

fn augment_rows<T: Real>(
    x: &Array2<T>,
    rng: &mut ChaCha8Rng,
    cfg: &AugmentConfig,
) -> Array2<T> {
    let (n, l) = x.dim();
    let mut out = Array2::zeros((n, l));
    for i in 0..n {
        let row: Vec<T> = x.row(i).to_vec();
        let aug = augment(&row, rng, cfg.noise_sigma, cfg.max_shift_frac);
        for (dst, v) in out.row_mut(i).iter_mut().zip(aug) {
            *dst = v;
        }
    }
    out
}

/// Train a model on a labeled source set and an unlabeled target set
/// (target labels, when present, are consumed only by the per-epoch
/// evaluation in the log). Deterministic per `cfg.seed`.
pub fn train<T: Real>(
    source: &SignalDataset,
    target: &SignalDataset,
    cfg: &TrainConfig,
) -> Result<(ModelState<T>, TrainLog)> {
    train_with_spec(&NetworkSpec::default(), source, target, cfg)
}

pub fn train_with_spec<T: Real>(
    spec: &NetworkSpec,
    source: &SignalDataset,
    target: &SignalDataset,
    cfg: &TrainConfig,
) -> Result<(ModelState<T>, TrainLog)> {
    cfg.validate()?;
    validate_data(spec, source, target)?;
    let mut trainer = Trainer::new(spec, target.len(), cfg)?;
    trainer.run_epochs(source, target, cfg, cfg.epochs, None)?;
    Ok((trainer.state, trainer.log))
}

/// [`train_with_spec`] that writes a full-fidelity checkpoint archive
/// every `every` epochs (and at the end).
pub fn train_with_checkpoints<T: Real>(
    spec: &NetworkSpec,
    source: &SignalDataset,
    target: &SignalDataset,
    cfg: &TrainConfig,
    every: usize,
    path: &Path,
) -> Result<(ModelState<T>, TrainLog)> {
    cfg.validate()?;
    validate_data(spec, source, target)?;
    if every == 0 {
        return Err(Error::Validation("checkpoint interval must be positive".into()));
    }
    let mut trainer = Trainer::new(spec, target.len(), cfg)?;
    let cfg_owned = cfg.clone();
    let path_owned = path.to_path_buf();
    let mut cb = move |t: &mut Trainer<T>| -> Result<()> {
        if t.epochs_done % every == 0 || t.epochs_done == cfg_owned.epochs {
            write_checkpoint(t, &cfg_owned, &path_owned)?;
        }
        Ok(())
    };
    trainer.run_epochs(source, target, cfg, cfg.epochs, Some(&mut cb))?;
    Ok((trainer.state, trainer.log))
}

/// Resume from a checkpoint archive and train through the stored epoch
/// budget (or `extend_to` when given); the continuation reproduces the
/// uninterrupted run's trajectory exactly.
pub fn resume_training<T: Real>(
    path: &Path,
    source: &SignalDataset,
    target: &SignalDataset,
    extend_to: Option<usize>,
) -> Result<(ModelState<T>, TrainLog, TrainConfig)> {
    let (mut trainer, mut cfg) = read_checkpoint::<T>(path)?;
    if let Some(epochs) = extend_to {
        if epochs < trainer.epochs_done {
            return Err(Error::Validation(format!(
                "cannot extend to epoch {epochs}; checkpoint already at {}",
                trainer.epochs_done
            )));
        }
        cfg.epochs = epochs;
    }
    validate_data(&trainer.state.spec.clone(), source, target)?;
    trainer.run_epochs(source, target, &cfg, cfg.epochs, None)?;
    Ok((trainer.state, trainer.log, cfg))
}

/// Load just the model and log from a checkpoint (for evaluation).
pub fn resume<T: Real>(path: &Path) -> Result<(ModelState<T>, TrainLog)> {
    let (trainer, _) = read_checkpoint::<T>(path)?;
    Ok((trainer.state, trainer.log))
}

/// Persist a trained model and its log as a checkpoint archive.
pub fn checkpoint<T: Real>(
    state: &ModelState<T>,
    log: &TrainLog,
    cfg: &TrainConfig,
    path: &Path,
) -> Result<()> {
    let mut trainer = Trainer::<T> {
        state: state.clone(),
        optimizer: Optimizer::new(cfg.method),
        shuffle_src: seed::stream(cfg.seed, &["train", "shuffle", "source"]),
        target_iter: CyclicBatches::new(1, 1, seed::stream(cfg.seed, &["train", "shuffle", "target"]))?,
        augment_rng: seed::stream(cfg.seed, &["train", "augment"]),
        log: log.clone(),
        epochs_done: log.epochs.len(),
    };
    write_checkpoint(&mut trainer, cfg, path)
}

fn validate_data(spec: &NetworkSpec, source: &SignalDataset, target: &SignalDataset) -> Result<()> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::Validation("source and target datasets must be nonempty".into()));
    }
    if source.num_classes != spec.num_classes() || target.num_classes != spec.num_classes() {
        return Err(Error::Validation(format!(
            "datasets declare {}/{} classes but the network has {}",
            source.num_classes,
            target.num_classes,
            spec.num_classes()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Checkpoint archive
// ---------------------------------------------------------------------------

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct RngState {
    seed_hex: String,
    stream: u64,
    word_pos: u128,
}

fn save_rng(rng: &ChaCha8Rng) -> RngState {
    let seed = rng.get_seed();
    RngState {
        seed_hex: seed.iter().map(|b| format!("{b:02x}")).collect(),
        stream: rng.get_stream(),
        word_pos: rng.get_word_pos(),
    }
}

fn load_rng(s: &RngState) -> Result<ChaCha8Rng> {
    use rand::SeedableRng;
    if s.seed_hex.len() != 64 {
        return Err(Error::Format("rng seed must be 32 bytes of hex".into()));
    }
    let mut seed = [0u8; 32];
    for (i, chunk) in s.seed_hex.as_bytes().chunks_exact(2).enumerate() {
        let hex = std::str::from_utf8(chunk).map_err(|_| Error::Format("bad rng hex".into()))?;
        seed[i] = u8::from_str_radix(hex, 16).map_err(|_| Error::Format("bad rng hex".into()))?;
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(s.stream);
    rng.set_word_pos(s.word_pos);
    Ok(rng)
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    version: u32,
    spec: NetworkSpec,
    seed: u64,
    step: u64,
    epochs_done: usize,
    config: TrainConfig,
    optimizer_step: u64,
    rng_shuffle_src: RngState,
    rng_target: RngState,
    target_order: Vec<usize>,
    target_pos: usize,
    rng_augment: RngState,
    dtype: String,
}

fn blob_from<T: Real>(values: &[T]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    out
}

fn blob_into<T: Real>(bytes: &[u8], dst: &mut [T], name: &str) -> Result<()> {
    if bytes.len() != dst.len() * 4 {
        return Err(Error::Format(format!(
            "blob {name}: expected {} bytes, found {}",
            dst.len() * 4,
            bytes.len()
        )));
    }
    for (v, chunk) in dst.iter_mut().zip(bytes.chunks_exact(4)) {
        *v = T::c(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
    }
    Ok(())
}

fn append_blob<W: Write>(tar: &mut tar::Builder<W>, name: &str, bytes: &[u8]) -> Result<()> {
    let mut header = tar::Header::new_gnu();
    header.set_size(bytes.len() as u64);
    header.set_mode(0o644);
    header.set_cksum();
    tar.append_data(&mut header, name, bytes).map_err(Error::Io)
}

fn write_checkpoint<T: Real>(trainer: &mut Trainer<T>, cfg: &TrainConfig, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let (target_order, target_pos) = trainer.target_iter.snapshot();
    let meta = CheckpointMeta {
        version: CHECKPOINT_VERSION,
        spec: trainer.state.spec.clone(),
        seed: cfg.seed,
        step: trainer.state.step,
        epochs_done: trainer.epochs_done,
        config: cfg.clone(),
        optimizer_step: trainer.optimizer.step_count(),
        rng_shuffle_src: save_rng(&trainer.shuffle_src),
        rng_target: save_rng(trainer.target_iter.rng()),
        target_order,
        target_pos,
        rng_augment: save_rng(&trainer.augment_rng),
        dtype: "f32le".into(),
    };
    let meta_json = serde_json::to_vec_pretty(&meta)
        .map_err(|e| Error::Format(format!("checkpoint meta: {e}")))?;

    let file = std::fs::File::create(path)?;
    let mut tar = tar::Builder::new(std::io::BufWriter::new(file));
    append_blob(&mut tar, "meta.json", &meta_json)?;

    let mut tensors: Vec<(String, Vec<u8>)> = Vec::new();
    trainer.state.visit_all(&mut |s| {
        tensors.push((format!("params/{}", s.name), blob_from(s.value)));
    });
    for (name, bytes) in &tensors {
        append_blob(&mut tar, name, bytes)?;
    }
    let mut adam_blobs: Vec<(String, Vec<u8>)> = Vec::new();
    let mut names: Vec<&String> = trainer.optimizer.slots.keys().collect();
    names.sort();
    for name in names {
        let (m, v) = &trainer.optimizer.slots[name];
        adam_blobs.push((format!("adam/m/{name}"), blob_from(m)));
        adam_blobs.push((format!("adam/v/{name}"), blob_from(v)));
    }
    for (name, bytes) in &adam_blobs {
        append_blob(&mut tar, name, bytes)?;
    }

    let mut log_csv = Vec::new();
    trainer.log.write_csv(&mut log_csv)?;
    append_blob(&mut tar, "log.csv", &log_csv)?;

    tar.into_inner().map_err(Error::Io)?.flush()?;
    Ok(())
}

fn read_checkpoint<T: Real>(path: &Path) -> Result<(Trainer<T>, TrainConfig)> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut archive = tar::Archive::new(std::io::BufReader::new(file));
    let mut entries: HashMap<String, Vec<u8>> = HashMap::new();
    for entry in archive.entries().map_err(|e| Error::Format(format!("bad archive: {e}")))? {
        let mut entry = entry.map_err(|e| Error::Format(format!("bad archive entry: {e}")))?;
        let name = entry
            .path()
            .map_err(|e| Error::Format(format!("bad entry path: {e}")))?
            .to_string_lossy()
            .to_string();
        let mut bytes = Vec::new();
        entry.read_to_end(&mut bytes)?;
        entries.insert(name, bytes);
    }

    let meta_raw =
        entries.get("meta.json").ok_or_else(|| Error::Format("missing meta.json".into()))?;
    let meta: CheckpointMeta = serde_json::from_slice(meta_raw)
        .map_err(|e| Error::Format(format!("checkpoint meta: {e}")))?;
    if meta.version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "checkpoint version {} unsupported (expected {CHECKPOINT_VERSION})",
            meta.version
        )));
    }
    if meta.dtype != "f32le" {
        return Err(Error::Format(format!("unsupported checkpoint dtype {:?}", meta.dtype)));
    }

    let mut state = init_model::<T>(&meta.spec, seed::derive_seed(meta.seed, &["train", "init"]))?;
    state.step = meta.step;
    let mut missing = Vec::new();
    state.visit_all(&mut |s| {
        let key = format!("params/{}", s.name);
        match entries.get(&key) {
            Some(bytes) => {
                if let Err(e) = blob_into(bytes, s.value, s.name) {
                    missing.push(e.to_string());
                }
            }
            None => missing.push(format!("missing tensor {key}")),
        }
    });
    if let Some(msg) = missing.first() {
        return Err(Error::Format(msg.clone()));
    }

    let mut optimizer = Optimizer::<T>::new(meta.config.method);
    optimizer.step = meta.optimizer_step;
    for (name, bytes) in &entries {
        if let Some(param) = name.strip_prefix("adam/m/") {
            let mut m = vec![T::zero(); bytes.len() / 4];
            blob_into(bytes, &mut m, name)?;
            let v_bytes = entries
                .get(&format!("adam/v/{param}"))
                .ok_or_else(|| Error::Format(format!("missing adam/v/{param}")))?;
            let mut v = vec![T::zero(); v_bytes.len() / 4];
            blob_into(v_bytes, &mut v, name)?;
            optimizer.slots.insert(param.to_string(), (m, v));
        }
    }

    let log = TrainLog::read_csv(
        entries.get("log.csv").map(|b| b.as_slice()).unwrap_or(&[]),
    )?;

    let trainer = Trainer {
        state,
        optimizer,
        shuffle_src: load_rng(&meta.rng_shuffle_src)?,
        target_iter: CyclicBatches::restore(
            meta.target_order.clone(),
            meta.config.batch_size,
            meta.target_pos,
            load_rng(&meta.rng_target)?,
        ),
        augment_rng: load_rng(&meta.rng_augment)?,
        log,
        epochs_done: meta.epochs_done,
    };
    Ok((trainer, meta.config))
}
