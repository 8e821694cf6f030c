//! AdamW optimization, the single-loop regularized training procedure, the
//! nested-loop adversarial baseline, and the λ-sweep driver.
//!
//! The single loop minimizes `CE(classifier(encoder(x)), y) + λ·SM(Z₀, Z₁)`
//! where `Z₀`/`Z₁` are the batch embeddings split by the sensitive label
//! and `SM` is one of the parameter-free similarity measures. The nested
//! loop instead trains an explicit adversary head on a second data split
//! and ascends its loss, paying `unroll` extra inner updates per encoder
//! step.

use serde::{Deserialize, Serialize};

use crate::data::DatasetSplit;
use crate::divergences::{
    fisher_rao, gaussian_wasserstein, jeffrey, median_bandwidth, mmd, sinkhorn_divergence,
    DivGrad, SinkhornConfig,
};
use crate::error::{Error, Result};
use crate::model::{accuracy, cross_entropy, Mlp, MlpSpec, ModelParams};
use crate::numerics::{derive_seed, Matrix, Rng};
use crate::stats::{split_indices, LabeledBatch};

/// Which regularizer the training loop applies between the two conditional
/// embedding distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Mmd,
    Sinkhorn,
    Jeffrey,
    FisherRao,
    GaussianW,
    /// Nested-loop adversarial baseline; requires `unroll`.
    Adversarial,
    /// Plain cross-entropy training, no regularizer.
    None,
}

impl Measure {
    pub const ALL: [Measure; 7] = [
        Measure::Mmd,
        Measure::Sinkhorn,
        Measure::Jeffrey,
        Measure::FisherRao,
        Measure::GaussianW,
        Measure::Adversarial,
        Measure::None,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Mmd => "mmd",
            Measure::Sinkhorn => "sinkhorn",
            Measure::Jeffrey => "jeffrey",
            Measure::FisherRao => "fisher_rao",
            Measure::GaussianW => "gaussian_w",
            Measure::Adversarial => "adversarial",
            Measure::None => "none",
        }
    }
}

impl std::fmt::Display for Measure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "measure",
                reason: format!(
                    "unknown measure {s:?}; expected one of mmd, sinkhorn, jeffrey, \
                     fisher_rao, gaussian_w, adversarial, none"
                ),
            })
    }
}

fn default_lambda() -> f64 {
    0.0
}
fn default_measure() -> Measure {
    Measure::None
}
fn default_batch_size() -> usize {
    64
}
fn default_steps() -> usize {
    2000
}
fn default_lr() -> f64 {
    1e-3
}
fn default_weight_decay() -> f64 {
    0.0
}
fn default_seed() -> u64 {
    7
}
fn default_checkpoint_every() -> usize {
    500
}
fn default_encoder_widths() -> Vec<usize> {
    vec![8, 32, 8]
}
fn default_head_hidden() -> Vec<usize> {
    vec![16]
}
fn default_leaky_slope() -> f64 {
    MlpSpec::DEFAULT_LEAKY_SLOPE
}

/// Full configuration of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Trade-off weight on the regularizer; 0 disables it entirely.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_measure")]
    pub measure: Measure,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    /// Inner adversary updates per encoder update (nested loop only).
    #[serde(default)]
    pub unroll: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Record metrics and snapshot parameters every this many steps.
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    /// Encoder widths from input dimension through embedding dimension.
    #[serde(default = "default_encoder_widths")]
    pub encoder_widths: Vec<usize>,
    /// Hidden widths of the classifier head (output is 2).
    #[serde(default = "default_head_hidden")]
    pub head_hidden: Vec<usize>,
    /// Hidden widths of the adversary head; defaults to `head_hidden`.
    #[serde(default)]
    pub adversary_hidden: Option<Vec<usize>>,
    #[serde(default = "default_leaky_slope")]
    pub leaky_slope: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must be finite and nonnegative, got {}", self.lambda),
            });
        }
        if self.batch_size < 4 {
            return Err(Error::InvalidParameter {
                name: "batch_size",
                reason: format!("must be at least 4, got {}", self.batch_size),
            });
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter {
                name: "steps",
                reason: "must schedule at least one step".into(),
            });
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "lr",
                reason: format!("must be positive and finite, got {}", self.lr),
            });
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::InvalidParameter {
                name: "weight_decay",
                reason: format!("must be finite and nonnegative, got {}", self.weight_decay),
            });
        }
        if self.checkpoint_every == 0 {
            return Err(Error::InvalidParameter {
                name: "checkpoint_every",
                reason: "must be at least 1".into(),
            });
        }
        if self.measure == Measure::Adversarial && self.unroll.is_none_or(|u| u == 0) {
            return Err(Error::InvalidParameter {
                name: "unroll",
                reason: "the adversarial measure requires unroll >= 1".into(),
            });
        }
        MlpSpec::new(self.encoder_widths.clone(), self.leaky_slope)?;
        Ok(())
    }

    fn encoder_spec(&self) -> Result<MlpSpec> {
        MlpSpec::new(self.encoder_widths.clone(), self.leaky_slope)
    }

    fn head_spec(&self) -> Result<MlpSpec> {
        let embed = *self.encoder_widths.last().expect("validated");
        let mut widths = vec![embed];
        widths.extend_from_slice(&self.head_hidden);
        widths.push(2);
        MlpSpec::new(widths, self.leaky_slope)
    }

    fn adversary_spec(&self) -> Result<MlpSpec> {
        let embed = *self.encoder_widths.last().expect("validated");
        let hidden = self.adversary_hidden.as_ref().unwrap_or(&self.head_hidden);
        let mut widths = vec![embed];
        widths.extend_from_slice(hidden);
        widths.push(2);
        MlpSpec::new(widths, self.leaky_slope)
    }

    /// True when the run computes a similarity measure each step.
    fn regularizer_active(&self) -> bool {
        self.lambda > 0.0 && !matches!(self.measure, Measure::None | Measure::Adversarial)
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second-moment accumulators of AdamW for one flat parameter block.
#[derive(Debug, Clone)]
pub struct AdamWState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamWState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One AdamW update: bias-corrected moment step, then decoupled weight
/// decay `θ ← θ·(1 − lr·wd)` applied after the adaptive step.
pub fn adamw_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamWState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::ShapeMismatch {
            op: "adamw_step",
            detail: format!(
                "{} params, {} grads, {} state entries",
                params.len(),
                grads.len(),
                state.m.len()
            ),
        });
    }
    state.t += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
    let decay = 1.0 - lr * weight_decay;
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        params[i] *= decay;
    }
    Ok(())
}

/// Metrics captured at one checkpoint; values are means over the window of
/// processed steps since the previous record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub step: usize,
    pub main_loss: f64,
    pub reg_value: Option<f64>,
    pub main_acc: f64,
    pub probe_acc: Option<f64>,
    pub checkpoint_path: Option<String>,
}

/// A parameter snapshot taken at a record step.
#[derive(Debug, Clone)]
pub struct CheckpointEntry {
    pub step: usize,
    pub params: ModelParams,
    pub reg_value: Option<f64>,
}

/// Structural work counters: the single loop performs only outer updates;
/// the nested loop adds `unroll` inner updates per outer update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepCounters {
    pub outer_updates: usize,
    pub inner_updates: usize,
}

/// Everything a finished run hands back to callers.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub records: Vec<RunRecord>,
    pub checkpoints: Vec<CheckpointEntry>,
    pub counters: StepCounters,
    /// Batches that performed an update.
    pub processed: usize,
    /// Batches skipped because one sensitive group had fewer than 2 rows.
    pub skipped: usize,
}

/// Evaluate the configured similarity measure with gradients. The MMD
/// bandwidth and the Sinkhorn ε are set per batch from median heuristics,
/// keeping every measure parameter-free.
fn similarity_measure(measure: Measure, z0: &Matrix, z1: &Matrix) -> Result<DivGrad> {
    match measure {
        Measure::Mmd => {
            let bandwidth = median_bandwidth(z0, z1)?;
            mmd(z0, z1, bandwidth)
        }
        Measure::Sinkhorn => {
            let cfg = SinkhornConfig::relative_to(z0, z1, 0.1, 2)?;
            sinkhorn_divergence(z0, z1, &cfg)
        }
        Measure::Jeffrey => jeffrey(z0, z1),
        Measure::FisherRao => fisher_rao(z0, z1),
        Measure::GaussianW => gaussian_wasserstein(z0, z1),
        Measure::Adversarial | Measure::None => Err(Error::InvalidParameter {
            name: "measure",
            reason: format!("{measure} is not a similarity measure"),
        }),
    }
}

/// Metric accumulator for one record window.
#[derive(Default)]
struct Window {
    loss: f64,
    reg: f64,
    acc: f64,
    count: usize,
}

impl Window {
    fn push(&mut self, loss: f64, reg: Option<f64>, acc: f64) {
        self.loss += loss;
        self.reg += reg.unwrap_or(0.0);
        self.acc += acc;
        self.count += 1;
    }

    fn drain(&mut self, step: usize, with_reg: bool) -> RunRecord {
        let n = self.count.max(1) as f64;
        let record = RunRecord {
            step,
            main_loss: self.loss / n,
            reg_value: if with_reg { Some(self.reg / n) } else { None },
            main_acc: self.acc / n,
            probe_acc: None,
            checkpoint_path: None,
        };
        *self = Window::default();
        record
    }
}

/// Gradient of the combined objective at the current parameters on one
/// batch: returns flat gradients over (encoder, classifier), the CE loss,
/// the regularizer value (when active), and the batch accuracy.
fn combined_gradient(
    params: &ModelParams,
    batch: &LabeledBatch,
    measure: Measure,
    lambda: f64,
    active: bool,
) -> Result<(Vec<f64>, f64, Option<f64>, f64)> {
    let (z, tape_e) = params.encode(&batch.samples)?;
    let (logits, tape_c) = params.classifier.forward(&z)?;
    let (ce, dlogits) = cross_entropy(&logits, &batch.main)?;
    let acc = accuracy(&logits, &batch.main)?;
    let (cgrads, mut dz) = params.classifier.backward(&tape_c, &dlogits)?;

    let mut reg_value = None;
    if active {
        let (idx0, idx1) = split_indices(&batch.sensitive)?;
        let z0 = z.take_rows(&idx0);
        let z1 = z.take_rows(&idx1);
        let sm = similarity_measure(measure, &z0, &z1)?;
        reg_value = Some(sm.value);
        for (local, global) in idx0.iter().enumerate() {
            let src = sm.grad0.row(local);
            for (d, g) in dz.row_mut(*global).iter_mut().zip(src) {
                *d += lambda * g;
            }
        }
        for (local, global) in idx1.iter().enumerate() {
            let src = sm.grad1.row(local);
            for (d, g) in dz.row_mut(*global).iter_mut().zip(src) {
                *d += lambda * g;
            }
        }
    }

    let (egrads, _) = params.encoder.backward(&tape_e, &dz)?;
    let mut flat = Vec::with_capacity(
        params.encoder.spec().param_count() + params.classifier.spec().param_count(),
    );
    egrads.flatten_into(&mut flat);
    cgrads.flatten_into(&mut flat);
    Ok((flat, ce, reg_value, acc))
}

/// A sampled batch is usable for the regularizer only when both sensitive
/// groups contribute at least two rows (the estimators need ≥ 2 samples).
fn batch_is_splittable(sensitive: &[u8]) -> bool {
    let n1: usize = sensitive.iter().map(|s| usize::from(*s)).sum();
    let n0 = sensitive.len() - n1;
    n0 >= 2 && n1 >= 2
}

/// Single-loop training: one joint AdamW step on (encoder, classifier) per
/// batch, with the regularizer gradient routed through the encoder.
pub fn train_single_loop(data: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.measure == Measure::Adversarial {
        return Err(Error::InvalidParameter {
            name: "measure",
            reason: "adversarial training uses train_nested_loop".into(),
        });
    }
    let train = &data.train;
    check_train_data(train, cfg)?;

    let mut master = Rng::from_seed(cfg.seed);
    let mut init_rng = master.split();
    let mut batch_rng = master.split();
    let _inner_rng = master.split(); // reserved so seeds line up with the nested loop

    let encoder = Mlp::init(cfg.encoder_spec()?, &mut init_rng);
    let classifier = Mlp::init(cfg.head_spec()?, &mut init_rng);
    let mut params = ModelParams::new(encoder, classifier, None)?;
    let mut flat = params.flatten();
    let mut opt = AdamWState::new(flat.len());

    let active = cfg.regularizer_active();
    let mut outcome_records = Vec::new();
    let mut checkpoints = Vec::new();
    let mut window = Window::default();
    let mut counters = StepCounters::default();
    let mut processed = 0usize;
    let mut skipped = 0usize;

    for step in 1..=cfg.steps {
        let indices = batch_rng.sample_indices(train.len(), cfg.batch_size);
        let batch = train.take(&indices);
        if active && !batch_is_splittable(&batch.sensitive) {
            skipped += 1;
        } else {
            let (grads, ce, reg, acc) =
                combined_gradient(&params, &batch, cfg.measure, cfg.lambda, active)?;
            adamw_step(&mut flat, &grads, &mut opt, cfg.lr, cfg.weight_decay)?;
            params.unflatten(&flat)?;
            counters.outer_updates += 1;
            processed += 1;
            window.push(ce, reg, acc);
        }

        if step % cfg.checkpoint_every == 0 || step == cfg.steps {
            let record = window.drain(step, active);
            checkpoints.push(CheckpointEntry {
                step,
                params: params.clone(),
                reg_value: record.reg_value,
            });
            outcome_records.push(record);
        }
    }

    check_skip_budget(skipped, cfg.steps)?;
    debug_assert_eq!(processed + skipped, cfg.steps);
    Ok(TrainOutcome {
        params,
        records: outcome_records,
        checkpoints,
        counters,
        processed,
        skipped,
    })
}

/// Nested-loop adversarial baseline: per outer step, `unroll` inner updates
/// train the classifier and adversary heads on the auxiliary split with the
/// encoder frozen; the outer step then updates only the encoder on
/// `CE(main) − λ·CE(adversary)`.
pub fn train_nested_loop(data: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.measure != Measure::Adversarial {
        return Err(Error::InvalidParameter {
            name: "measure",
            reason: format!("nested loop requires the adversarial measure, got {}", cfg.measure),
        });
    }
    let unroll = cfg.unroll.expect("validated");
    let train = &data.train;
    check_train_data(train, cfg)?;
    if data.aux.is_empty() {
        return Err(Error::EmptyBatch {
            context: "nested-loop training needs a nonempty auxiliary split".into(),
        });
    }

    let mut master = Rng::from_seed(cfg.seed);
    let mut init_rng = master.split();
    let mut batch_rng = master.split();
    let mut inner_rng = master.split();

    let encoder = Mlp::init(cfg.encoder_spec()?, &mut init_rng);
    let classifier = Mlp::init(cfg.head_spec()?, &mut init_rng);
    let adversary = Mlp::init(cfg.adversary_spec()?, &mut init_rng);
    let mut params = ModelParams::new(encoder, classifier, Some(adversary))?;

    let mut enc_flat = Vec::new();
    params.encoder.flatten_into(&mut enc_flat);
    let mut cls_flat = Vec::new();
    params.classifier.flatten_into(&mut cls_flat);
    let mut adv_flat = Vec::new();
    params.adversary.as_ref().expect("present").flatten_into(&mut adv_flat);
    let mut enc_opt = AdamWState::new(enc_flat.len());
    let mut cls_opt = AdamWState::new(cls_flat.len());
    let mut adv_opt = AdamWState::new(adv_flat.len());

    let skip_check = cfg.lambda > 0.0;
    let mut records = Vec::new();
    let mut checkpoints = Vec::new();
    let mut window = Window::default();
    let mut counters = StepCounters::default();
    let mut processed = 0usize;
    let mut skipped = 0usize;

    for step in 1..=cfg.steps {
        let indices = batch_rng.sample_indices(train.len(), cfg.batch_size);
        let batch = train.take(&indices);
        if skip_check && !batch_is_splittable(&batch.sensitive) {
            skipped += 1;
        } else {
            // Inner phase: heads learn on the auxiliary split, encoder frozen.
            for _ in 0..unroll {
                let inner_idx = inner_rng.sample_indices(data.aux.len(), cfg.batch_size);
                let inner = data.aux.take(&inner_idx);
                let (z, _) = params.encode(&inner.samples)?;

                let (logits, tape) = params.classifier.forward(&z)?;
                let (_, dlogits) = cross_entropy(&logits, &inner.main)?;
                let (grads, _) = params.classifier.backward(&tape, &dlogits)?;
                let mut gflat = Vec::with_capacity(cls_flat.len());
                grads.flatten_into(&mut gflat);
                adamw_step(&mut cls_flat, &gflat, &mut cls_opt, cfg.lr, cfg.weight_decay)?;
                params.classifier.unflatten_from(&cls_flat)?;

                let adv = params.adversary.as_ref().expect("present");
                let (alogits, atape) = adv.forward(&z)?;
                let (_, dalogits) = cross_entropy(&alogits, &inner.sensitive)?;
                let (agrads, _) = adv.backward(&atape, &dalogits)?;
                let mut aflat = Vec::with_capacity(adv_flat.len());
                agrads.flatten_into(&mut aflat);
                adamw_step(&mut adv_flat, &aflat, &mut adv_opt, cfg.lr, cfg.weight_decay)?;
                params
                    .adversary
                    .as_mut()
                    .expect("present")
                    .unflatten_from(&adv_flat)?;
                counters.inner_updates += 1;
            }

            // Outer phase: encoder alone, ascending the adversary's loss.
            let (z, tape_e) = params.encode(&batch.samples)?;
            let (logits, tape_c) = params.classifier.forward(&z)?;
            let (ce, dlogits) = cross_entropy(&logits, &batch.main)?;
            let acc = accuracy(&logits, &batch.main)?;
            let (_, dz_main) = params.classifier.backward(&tape_c, &dlogits)?;

            let adv = params.adversary.as_ref().expect("present");
            let (alogits, tape_a) = adv.forward(&z)?;
            let (adv_ce, dalogits) = cross_entropy(&alogits, &batch.sensitive)?;
            let (_, dz_adv) = adv.backward(&tape_a, &dalogits)?;

            let mut dz = dz_main;
            dz.add_scaled(&dz_adv, -cfg.lambda)
                .expect("both gradients share the embedding shape");
            let (egrads, _) = params.encoder.backward(&tape_e, &dz)?;
            let mut gflat = Vec::with_capacity(enc_flat.len());
            egrads.flatten_into(&mut gflat);
            adamw_step(&mut enc_flat, &gflat, &mut enc_opt, cfg.lr, cfg.weight_decay)?;
            params.encoder.unflatten_from(&enc_flat)?;

            counters.outer_updates += 1;
            processed += 1;
            window.push(ce, Some(adv_ce), acc);
        }

        if step % cfg.checkpoint_every == 0 || step == cfg.steps {
            let record = window.drain(step, true);
            checkpoints.push(CheckpointEntry {
                step,
                params: params.clone(),
                reg_value: record.reg_value,
            });
            records.push(record);
        }
    }

    check_skip_budget(skipped, cfg.steps)?;
    debug_assert_eq!(processed + skipped, cfg.steps);
    Ok(TrainOutcome {
        params,
        records,
        checkpoints,
        counters,
        processed,
        skipped,
    })
}

/// Dispatch to the loop matching the configured measure.
pub fn run_training(data: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if cfg.measure == Measure::Adversarial {
        train_nested_loop(data, cfg)
    } else {
        train_single_loop(data, cfg)
    }
}

/// One sweep result: the λ it was trained with and the finished run.
#[derive(Debug)]
pub struct SweepEntry {
    pub lambda: f64,
    pub outcome: TrainOutcome,
}

/// Train one independent model per λ, deriving each run's seed from the
/// base seed and the λ's position in the input list. Results are returned
/// sorted by λ.
pub fn sweep(data: &DatasetSplit, base: &TrainConfig, lambdas: &[f64]) -> Result<Vec<SweepEntry>> {
    if lambdas.is_empty() {
        return Err(Error::InvalidParameter {
            name: "lambdas",
            reason: "sweep needs at least one λ value".into(),
        });
    }
    if let Some(bad) = lambdas.iter().find(|l| !l.is_finite() || **l < 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambdas",
            reason: format!("λ values must be finite and nonnegative, got {bad}"),
        });
    }
    let mut entries = Vec::with_capacity(lambdas.len());
    for (index, lambda) in lambdas.iter().enumerate() {
        let mut cfg = base.clone();
        cfg.lambda = *lambda;
        cfg.seed = derive_seed(base.seed, index as u64);
        let outcome = run_training(data, &cfg)?;
        entries.push(SweepEntry {
            lambda: *lambda,
            outcome,
        });
    }
    entries.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(entries)
}

fn check_train_data(train: &LabeledBatch, cfg: &TrainConfig) -> Result<()> {
    if train.is_empty() {
        return Err(Error::EmptyBatch {
            context: "training needs a nonempty train split".into(),
        });
    }
    if train.dim() != cfg.encoder_widths[0] {
        return Err(Error::ShapeMismatch {
            op: "train",
            detail: format!(
                "data has {} features, encoder expects {}",
                train.dim(),
                cfg.encoder_widths[0]
            ),
        });
    }
    Ok(())
}

fn check_skip_budget(skipped: usize, scheduled: usize) -> Result<()> {
    if skipped * 5 > scheduled {
        return Err(Error::DataBalance { skipped, scheduled });
    }
    Ok(())
}
