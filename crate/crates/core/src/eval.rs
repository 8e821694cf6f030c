//! Leakage evaluation: freshly trained probe classifiers on frozen
//! embeddings, main/sensitive accuracy reporting, and the checkpoint
//! correlation analysis relating a run's regularizer values to how much an
//! after-the-fact probe can still recover the sensitive label.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{accuracy, cross_entropy, Mlp, MlpSpec, ModelParams};
use crate::numerics::{derive_seed, Matrix, Rng};
use crate::stats::{pearson, LabeledBatch};
use crate::training::{adamw_step, AdamWState};

fn default_hidden() -> usize {
    64
}
fn default_probe_steps() -> usize {
    2000
}
fn default_probe_lr() -> f64 {
    1e-3
}
fn default_probe_batch() -> usize {
    64
}
fn default_train_fraction() -> f64 {
    0.7
}
fn default_probe_seed() -> u64 {
    7
}

/// Configuration of the probe adversary trained from scratch during
/// evaluation. The probe is a one-hidden-layer LeakyReLU MLP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_probe_steps")]
    pub steps: usize,
    #[serde(default = "default_probe_lr")]
    pub lr: f64,
    #[serde(default = "default_probe_batch")]
    pub batch_size: usize,
    /// Fraction of the evaluation embeddings the probe trains on; it is
    /// scored on the remainder.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_probe_seed")]
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::InvalidParameter {
                name: "hidden",
                reason: "probe hidden width must be positive".into(),
            });
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter {
                name: "steps",
                reason: "probe needs at least one training step".into(),
            });
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "lr",
                reason: format!("must be positive and finite, got {}", self.lr),
            });
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter {
                name: "batch_size",
                reason: "probe batch size must be positive".into(),
            });
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidParameter {
                name: "train_fraction",
                reason: format!("must lie strictly inside (0, 1), got {}", self.train_fraction),
            });
        }
        Ok(())
    }
}

/// Accuracies of one evaluated model: the classifier's main-task accuracy
/// and a fresh probe's sensitive-label accuracy on held-out embeddings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    pub main_acc: f64,
    pub sensitive_acc: f64,
    /// Probe training CE sampled along its optimization.
    pub probe_train_loss_curve: Vec<f64>,
    /// Number of held-out rows the sensitive accuracy was scored on.
    pub n_eval: usize,
}

/// One (regularizer value, probe accuracy) pair of the correlation
/// analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPair {
    pub reg_value: f64,
    pub sensitive_acc: f64,
}

/// Pearson correlation between a run's recorded regularizer values and the
/// per-checkpoint probe accuracies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub correlation: f64,
    pub abs_correlation: f64,
    pub pairs: Vec<CorrelationPair>,
    /// True when only two checkpoints were available, which forces the
    /// correlation to ±1 by construction.
    pub low_sample: bool,
}

fn count_classes(labels: &[u8]) -> (usize, usize) {
    let ones: usize = labels.iter().map(|l| usize::from(*l)).sum();
    (labels.len() - ones, ones)
}

/// Train a fresh probe on frozen embeddings, returning the probe and its
/// sampled training-loss curve.
fn fit_probe(z: &Matrix, labels: &[u8], cfg: &ProbeConfig) -> Result<(Mlp, Vec<f64>)> {
    cfg.validate()?;
    if z.rows() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "fit_probe",
            detail: format!("{} embedding rows vs {} labels", z.rows(), labels.len()),
        });
    }
    let (n0, n1) = count_classes(labels);
    if n0 < 2 || n1 < 2 {
        return Err(Error::SingleClassBatch);
    }

    let mut master = Rng::from_seed(cfg.seed);
    let mut init_rng = master.split();
    let mut batch_rng = master.split();
    let spec = MlpSpec::new(vec![z.cols(), cfg.hidden, 2], MlpSpec::DEFAULT_LEAKY_SLOPE)?;
    let mut probe = Mlp::init(spec, &mut init_rng);
    let mut flat = Vec::new();
    probe.flatten_into(&mut flat);
    let mut opt = AdamWState::new(flat.len());

    let curve_every = (cfg.steps / 20).max(1);
    let mut curve = Vec::new();
    for step in 1..=cfg.steps {
        let idx = batch_rng.sample_indices(z.rows(), cfg.batch_size);
        let xb = z.take_rows(&idx);
        let yb: Vec<u8> = idx.iter().map(|i| labels[*i]).collect();
        let (logits, tape) = probe.forward(&xb)?;
        let (loss, dlogits) = cross_entropy(&logits, &yb)?;
        let (grads, _) = probe.backward(&tape, &dlogits)?;
        let mut gflat = Vec::with_capacity(flat.len());
        grads.flatten_into(&mut gflat);
        adamw_step(&mut flat, &gflat, &mut opt, cfg.lr, 0.0)?;
        probe.unflatten_from(&flat)?;
        if step % curve_every == 0 || step == cfg.steps {
            curve.push(loss);
        }
    }
    Ok((probe, curve))
}

/// Train a probe adversary on frozen embeddings `z` with binary labels.
pub fn train_probe(z: &Matrix, labels: &[u8], cfg: &ProbeConfig) -> Result<Mlp> {
    fit_probe(z, labels, cfg).map(|(probe, _)| probe)
}

/// Evaluate a trained model: classifier accuracy on the main label, and a
/// freshly trained probe's accuracy on the sensitive label. The probe
/// trains on `train_fraction` of the test embeddings and is scored on the
/// rest; the model itself is never updated.
pub fn evaluate(params: &ModelParams, test: &LabeledBatch, cfg: &ProbeConfig) -> Result<ProbeReport> {
    cfg.validate()?;
    if test.is_empty() {
        return Err(Error::EmptyBatch {
            context: "evaluation needs a nonempty test batch".into(),
        });
    }
    let hash_before = params.param_hash();

    let (z, _) = params.encode(&test.samples)?;
    let (logits, _) = params.classifier.forward(&z)?;
    let main_acc = accuracy(&logits, &test.main)?;

    let n = test.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = Rng::from_seed(derive_seed(cfg.seed, 1));
    shuffle_rng.shuffle(&mut order);
    let n_train = ((n as f64 * cfg.train_fraction).round() as usize).clamp(1, n - 1);
    let (train_idx, score_idx) = order.split_at(n_train);

    let z_train = z.take_rows(train_idx);
    let s_train: Vec<u8> = train_idx.iter().map(|i| test.sensitive[*i]).collect();
    let mut probe_cfg = cfg.clone();
    probe_cfg.seed = derive_seed(cfg.seed, 2);
    let (probe, curve) = fit_probe(&z_train, &s_train, &probe_cfg)?;

    let z_score = z.take_rows(score_idx);
    let s_score: Vec<u8> = score_idx.iter().map(|i| test.sensitive[*i]).collect();
    let (probe_logits, _) = probe.forward(&z_score)?;
    let sensitive_acc = accuracy(&probe_logits, &s_score)?;

    assert_eq!(
        hash_before,
        params.param_hash(),
        "evaluation must never mutate the model parameters"
    );
    Ok(ProbeReport {
        main_acc,
        sensitive_acc,
        probe_train_loss_curve: curve,
        n_eval: s_score.len(),
    })
}

/// For each checkpoint `(params, reg_value)`, train a probe and pair the
/// recorded regularizer value with the probe's sensitive accuracy, then
/// report the Pearson correlation across checkpoints.
pub fn correlation_analysis(
    checkpoints: &[(ModelParams, f64)],
    test: &LabeledBatch,
    cfg: &ProbeConfig,
) -> Result<CorrelationReport> {
    if checkpoints.len() < 2 {
        return Err(Error::InsufficientSamples {
            what: "checkpoints",
            needed: 2,
            got: checkpoints.len(),
        });
    }
    let mut pairs = Vec::with_capacity(checkpoints.len());
    for (index, (params, reg_value)) in checkpoints.iter().enumerate() {
        let mut ck_cfg = cfg.clone();
        ck_cfg.seed = derive_seed(cfg.seed, 100 + index as u64);
        let report = evaluate(params, test, &ck_cfg)?;
        pairs.push(CorrelationPair {
            reg_value: *reg_value,
            sensitive_acc: report.sensitive_acc,
        });
    }
    let regs: Vec<f64> = pairs.iter().map(|p| p.reg_value).collect();
    let accs: Vec<f64> = pairs.iter().map(|p| p.sensitive_acc).collect();
    let correlation = pearson(&regs, &accs)?;
    Ok(CorrelationReport {
        correlation,
        abs_correlation: correlation.abs(),
        pairs,
        low_sample: checkpoints.len() == 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg(seed: u64) -> ProbeConfig {
        let mut cfg = ProbeConfig::default();
        cfg.steps = 600;
        cfg.seed = seed;
        cfg
    }

    /// Embeddings whose first coordinate carries the label with the given
    /// shift; remaining coordinates are pure noise.
    fn shifted_embeddings(n: usize, d: usize, shift: f64, rng: &mut Rng) -> (Matrix, Vec<u8>) {
        let mut z = Matrix::zeros(n, d);
        let mut labels = vec![0u8; n];
        for i in 0..n {
            let s = u8::from(rng.bernoulli(0.5));
            labels[i] = s;
            let row = z.row_mut(i);
            for v in row.iter_mut() {
                *v = rng.normal(0.0, 1.0);
            }
            row[0] += shift * f64::from(s);
        }
        (z, labels)
    }

    #[test]
    fn probe_config_validation() {
        ProbeConfig::default().validate().unwrap();
        let mut cfg = ProbeConfig::default();
        cfg.train_fraction = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ProbeConfig::default();
        cfg.hidden = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn probe_recovers_linearly_separable_labels() {
        let mut rng = Rng::from_seed(1);
        let (z, labels) = shifted_embeddings(400, 3, 6.0, &mut rng);
        let probe = train_probe(&z, &labels, &quick_cfg(11)).unwrap();
        let (logits, _) = probe.forward(&z).unwrap();
        let acc = accuracy(&logits, &labels).unwrap();
        assert!(acc > 0.95, "separable labels should be recovered, got {acc}");
    }

    #[test]
    fn probe_on_label_independent_embeddings_stays_near_chance() {
        let mut rng = Rng::from_seed(2);
        let n = 2000;
        let mut z = Matrix::zeros(n, 4);
        for v in z.data_mut() {
            *v = rng.normal(0.0, 1.0);
        }
        let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.bernoulli(0.5))).collect();

        // Score on a held-out half to avoid rewarding memorization.
        let train_idx: Vec<usize> = (0..n / 2).collect();
        let score_idx: Vec<usize> = (n / 2..n).collect();
        let z_train = z.take_rows(&train_idx);
        let l_train: Vec<u8> = train_idx.iter().map(|i| labels[*i]).collect();
        let probe = train_probe(&z_train, &l_train, &quick_cfg(12)).unwrap();
        let (logits, _) = probe.forward(&z.take_rows(&score_idx)).unwrap();
        let l_score: Vec<u8> = score_idx.iter().map(|i| labels[*i]).collect();
        let acc = accuracy(&logits, &l_score).unwrap();
        assert!(
            (0.4..=0.6).contains(&acc),
            "independent labels must stay near chance, got {acc}"
        );
    }

    #[test]
    fn probe_on_one_hot_labels_is_perfect() {
        let mut rng = Rng::from_seed(3);
        let n = 120;
        let mut z = Matrix::zeros(n, 2);
        let mut labels = vec![0u8; n];
        for i in 0..n {
            let s = u8::from(rng.bernoulli(0.5));
            labels[i] = s;
            z.row_mut(i)[usize::from(s)] = 1.0;
        }
        let probe = train_probe(&z, &labels, &quick_cfg(13)).unwrap();
        let (logits, _) = probe.forward(&z).unwrap();
        assert_eq!(
            accuracy(&logits, &labels).unwrap(),
            1.0,
            "the label is the feature, accuracy must be exactly 1"
        );
    }

    #[test]
    fn probe_rejects_single_class_data() {
        let z = Matrix::zeros(10, 2);
        let labels = vec![0u8; 10];
        assert!(matches!(
            train_probe(&z, &labels, &quick_cfg(14)),
            Err(Error::SingleClassBatch)
        ));
    }

    fn constant_model(d_in: usize) -> ModelParams {
        // Zero weights everywhere: the encoder maps everything to 0.
        let encoder = Mlp::zeros(MlpSpec::new(vec![d_in, 4, 2], 0.01).unwrap());
        let classifier = Mlp::zeros(MlpSpec::new(vec![2, 2], 0.01).unwrap());
        ModelParams::new(encoder, classifier, None).unwrap()
    }

    fn random_batch(n: usize, d: usize, seed: u64) -> LabeledBatch {
        let mut rng = Rng::from_seed(seed);
        let mut samples = Matrix::zeros(n, d);
        let mut main = vec![0u8; n];
        let mut sensitive = vec![0u8; n];
        for i in 0..n {
            main[i] = u8::from(rng.bernoulli(0.5));
            sensitive[i] = u8::from(rng.bernoulli(0.5));
            for v in samples.row_mut(i) {
                *v = rng.normal(0.0, 1.0);
            }
        }
        LabeledBatch::new(samples, main, sensitive).unwrap()
    }

    #[test]
    fn constant_encoder_scores_near_chance_on_both_tasks() {
        let params = constant_model(3);
        let test = random_batch(1000, 3, 4);
        let report = evaluate(&params, &test, &quick_cfg(15)).unwrap();
        assert!(
            (0.45..=0.55).contains(&report.main_acc),
            "constant embeddings carry no main signal, got {}",
            report.main_acc
        );
        assert!(
            (0.45..=0.55).contains(&report.sensitive_acc),
            "constant embeddings carry no sensitive signal, got {}",
            report.sensitive_acc
        );
        assert_eq!(report.n_eval, 300, "30% of 1000 rows are scored");
    }

    #[test]
    fn untrained_encoder_leaks_entangled_sensitive_signal() {
        use crate::data::{generate, SynthSpec};
        let mut spec = SynthSpec::default();
        spec.n = 2000;
        let split = generate(&spec).unwrap();

        let mut rng = Rng::from_seed(5);
        let encoder = Mlp::init(MlpSpec::new(vec![8, 16, 6], 0.01).unwrap(), &mut rng);
        let classifier = Mlp::init(MlpSpec::new(vec![6, 2], 0.01).unwrap(), &mut rng);
        let params = ModelParams::new(encoder, classifier, None).unwrap();

        let report = evaluate(&params, &split.test, &quick_cfg(16)).unwrap();
        assert!(
            report.sensitive_acc > 0.6,
            "a random projection of entangled data still leaks, got {}",
            report.sensitive_acc
        );
    }

    #[test]
    fn evaluate_is_deterministic_and_never_mutates_the_model() {
        let mut rng = Rng::from_seed(6);
        let encoder = Mlp::init(MlpSpec::new(vec![3, 8, 4], 0.01).unwrap(), &mut rng);
        let classifier = Mlp::init(MlpSpec::new(vec![4, 2], 0.01).unwrap(), &mut rng);
        let params = ModelParams::new(encoder, classifier, None).unwrap();
        let test = random_batch(300, 3, 7);

        let hash = params.param_hash();
        let a = evaluate(&params, &test, &quick_cfg(17)).unwrap();
        let b = evaluate(&params, &test, &quick_cfg(17)).unwrap();
        assert_eq!(params.param_hash(), hash);
        assert_eq!(a.main_acc, b.main_acc);
        assert_eq!(a.sensitive_acc, b.sensitive_acc);
        assert_eq!(a.probe_train_loss_curve, b.probe_train_loss_curve);

        let c = evaluate(&params, &test, &quick_cfg(18)).unwrap();
        // A different probe seed may land on a different accuracy; the
        // model hash must still be untouched.
        assert_eq!(params.param_hash(), hash);
        let _ = c;
    }

    #[test]
    fn correlation_analysis_needs_two_checkpoints_and_flags_two() {
        let test = random_batch(400, 2, 8);
        let leaky = {
            // Identity-ish encoder: embeddings retain the sensitive signal
            // injected below.
            let mut encoder = Mlp::zeros(MlpSpec::new(vec![2, 2], 0.01).unwrap());
            encoder.weights_mut()[0] = Matrix::identity(2);
            let classifier = Mlp::zeros(MlpSpec::new(vec![2, 2], 0.01).unwrap());
            ModelParams::new(encoder, classifier, None).unwrap()
        };
        let muted = constant_model(2);

        // Make the sensitive label visible in the raw features so the
        // identity encoder leaks and the constant encoder does not.
        let mut samples = test.samples.clone();
        for i in 0..test.len() {
            samples.row_mut(i)[0] += 4.0 * f64::from(test.sensitive[i]);
        }
        let test = LabeledBatch::new(samples, test.main.clone(), test.sensitive.clone()).unwrap();

        assert!(matches!(
            correlation_analysis(&[(leaky.clone(), 1.0)], &test, &quick_cfg(19)),
            Err(Error::InsufficientSamples { .. })
        ));

        let report = correlation_analysis(
            &[(leaky.clone(), 1.0), (muted.clone(), 0.2)],
            &test,
            &quick_cfg(19),
        )
        .unwrap();
        assert!(report.low_sample, "two checkpoints must be flagged");
        assert_eq!(report.pairs.len(), 2);
        // Leakage and reg value fall together: exactly +1 with two points.
        assert!(
            (report.correlation - 1.0).abs() < 1e-12,
            "lockstep decrease gives +1, got {}",
            report.correlation
        );
        assert_eq!(report.abs_correlation, report.correlation.abs());
    }

    #[test]
    fn correlation_analysis_rejects_constant_reg_values() {
        let test = random_batch(200, 2, 9);
        let a = constant_model(2);
        let b = constant_model(2);
        let result = correlation_analysis(&[(a, 0.5), (b, 0.5)], &test, &quick_cfg(20));
        assert!(matches!(result, Err(Error::UndefinedCorrelation { .. })));
    }
}
