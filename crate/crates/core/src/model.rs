//! Small feed-forward networks with hand-written forward and backward
//! passes: an encoder, a main classifier, and an optional adversary head.
//!
//! Layers are fully connected with LeakyReLU activations on hidden layers
//! and identity output. The backward pass is exact reverse-mode
//! differentiation through a [`ForwardTape`] of cached pre-activations and
//! activations. All parameters expose a flat `Vec<f64>` view so one
//! optimizer implementation serves every head.

use std::io::{Read as _, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Architecture of one multi-layer perceptron: the chain of layer widths
/// from input to output, plus the LeakyReLU slope used on hidden layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Widths from input through output, e.g. `[8, 16, 2]`.
    pub layer_widths: Vec<usize>,
    /// Negative-side slope of the hidden LeakyReLU activations.
    pub leaky_slope: f64,
}

impl MlpSpec {
    pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

    pub fn new(layer_widths: Vec<usize>, leaky_slope: f64) -> Result<Self> {
        if layer_widths.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "layer_widths",
                reason: format!(
                    "need input and output widths, got {} entries",
                    layer_widths.len()
                ),
            });
        }
        if layer_widths.iter().any(|w| *w == 0) {
            return Err(Error::InvalidParameter {
                name: "layer_widths",
                reason: "all widths must be positive".into(),
            });
        }
        if !leaky_slope.is_finite() || leaky_slope < 0.0 {
            return Err(Error::InvalidParameter {
                name: "leaky_slope",
                reason: format!("must be finite and nonnegative, got {leaky_slope}"),
            });
        }
        Ok(Self {
            layer_widths,
            leaky_slope,
        })
    }

    /// Convenience constructor with the default activation slope.
    pub fn with_default_slope(layer_widths: Vec<usize>) -> Result<Self> {
        Self::new(layer_widths, Self::DEFAULT_LEAKY_SLOPE)
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().expect("validated nonempty")
    }

    /// Number of weight matrices (= number of layers).
    pub fn layer_count(&self) -> usize {
        self.layer_widths.len() - 1
    }

    /// Total scalar parameter count (weights + biases).
    pub fn param_count(&self) -> usize {
        self.layer_widths
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

/// One multi-layer perceptron: per-layer weight matrices (input-width ×
/// output-width) and bias vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

/// Per-layer cache from a forward pass: activations `a[0] = x` through
/// `a[L]` = output, and the pre-activations feeding each nonlinearity.
#[derive(Debug, Clone)]
pub struct ForwardTape {
    activations: Vec<Matrix>,
    pre_activations: Vec<Matrix>,
}

impl ForwardTape {
    /// The network output recorded on the tape.
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("tape holds ≥ 1 activation")
    }
}

/// Gradients mirroring an [`Mlp`]'s weights and biases.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: mlp.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Accumulate `scale * other` into `self`.
    pub fn add_scaled(&mut self, other: &MlpGrads, scale: f64) {
        for (w, o) in self.weights.iter_mut().zip(&other.weights) {
            w.add_scaled(o, scale).expect("gradients share one architecture");
        }
        for (b, o) in self.biases.iter_mut().zip(&other.biases) {
            for (bi, oi) in b.iter_mut().zip(o) {
                *bi += scale * oi;
            }
        }
    }

    /// Append all gradient entries in flat parameter order.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
    }
}

impl Mlp {
    /// Zero-initialized network of the given architecture.
    pub fn zeros(spec: MlpSpec) -> Self {
        let weights = spec
            .layer_widths
            .windows(2)
            .map(|w| Matrix::zeros(w[0], w[1]))
            .collect();
        let biases = spec
            .layer_widths
            .iter()
            .skip(1)
            .map(|w| vec![0.0; *w])
            .collect();
        Self {
            spec,
            weights,
            biases,
        }
    }

    /// He-initialized network: weights drawn from N(0, 2/fan_in), biases 0.
    pub fn init(spec: MlpSpec, rng: &mut Rng) -> Self {
        let mut mlp = Self::zeros(spec);
        for w in &mut mlp.weights {
            let std = (2.0 / w.rows() as f64).sqrt();
            for v in w.data_mut() {
                *v = rng.normal(0.0, std);
            }
        }
        mlp
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    /// Forward pass caching everything the backward pass needs.
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardTape)> {
        if x.cols() != self.spec.input_width() {
            return Err(Error::ShapeMismatch {
                op: "mlp_forward",
                detail: format!(
                    "input has {} columns, spec expects {}",
                    x.cols(),
                    self.spec.input_width()
                ),
            });
        }
        let layers = self.spec.layer_count();
        let mut activations = Vec::with_capacity(layers + 1);
        let mut pre_activations = Vec::with_capacity(layers);
        activations.push(x.clone());
        for l in 0..layers {
            let mut pre = activations[l].matmul(&self.weights[l])?;
            for i in 0..pre.rows() {
                for (v, b) in pre.row_mut(i).iter_mut().zip(&self.biases[l]) {
                    *v += b;
                }
            }
            let act = if l + 1 == layers {
                pre.clone() // identity output layer
            } else {
                let mut a = pre.clone();
                let slope = self.spec.leaky_slope;
                for v in a.data_mut() {
                    if *v < 0.0 {
                        *v *= slope;
                    }
                }
                a
            };
            pre_activations.push(pre);
            activations.push(act);
        }
        let out = activations.last().expect("≥ 1 activation").clone();
        Ok((
            out,
            ForwardTape {
                activations,
                pre_activations,
            },
        ))
    }

    /// Reverse-mode pass: given `upstream = ∂L/∂output`, returns parameter
    /// gradients and `∂L/∂input`.
    pub fn backward(&self, tape: &ForwardTape, upstream: &Matrix) -> Result<(MlpGrads, Matrix)> {
        let layers = self.spec.layer_count();
        if tape.activations.len() != layers + 1 || tape.pre_activations.len() != layers {
            return Err(Error::ShapeMismatch {
                op: "mlp_backward",
                detail: "tape does not match network depth".into(),
            });
        }
        let out = tape.output();
        if upstream.rows() != out.rows() || upstream.cols() != out.cols() {
            return Err(Error::ShapeMismatch {
                op: "mlp_backward",
                detail: format!(
                    "upstream is {}×{}, output is {}×{}",
                    upstream.rows(),
                    upstream.cols(),
                    out.rows(),
                    out.cols()
                ),
            });
        }

        let mut grads = MlpGrads::zeros_like(self);
        let mut g = upstream.clone(); // ∂L/∂a[l+1], starting at the output
        for l in (0..layers).rev() {
            // Through the activation: identity at the output layer,
            // LeakyReLU elsewhere; derivative taken as 1 at exactly 0.
            let mut dz = g;
            if l + 1 != layers {
                let slope = self.spec.leaky_slope;
                let pre = &tape.pre_activations[l];
                for (v, p) in dz.data_mut().iter_mut().zip(pre.data()) {
                    if *p < 0.0 {
                        *v *= slope;
                    }
                }
            }
            grads.weights[l] = tape.activations[l].transpose().matmul(&dz)?;
            for i in 0..dz.rows() {
                for (bg, v) in grads.biases[l].iter_mut().zip(dz.row(i)) {
                    *bg += v;
                }
            }
            g = dz.matmul(&self.weights[l].transpose())?;
        }
        Ok((grads, g))
    }

    /// Append all parameters in flat order: per layer, weight entries
    /// row-major followed by the bias vector.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
    }

    /// Overwrite parameters from a flat slice; returns the number consumed.
    pub fn unflatten_from(&mut self, flat: &[f64]) -> Result<usize> {
        let needed = self.spec.param_count();
        if flat.len() < needed {
            return Err(Error::ShapeMismatch {
                op: "mlp_unflatten",
                detail: format!("need {needed} values, got {}", flat.len()),
            });
        }
        let mut offset = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let n = w.data().len();
            w.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
            let nb = b.len();
            b.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
        Ok(offset)
    }
}

/// All trainable parameters: encoder `θ`, main classifier `φ`, and the
/// optional adversary head `ψ` used by the nested-loop baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub encoder: Mlp,
    pub classifier: Mlp,
    pub adversary: Option<Mlp>,
}

impl ModelParams {
    /// Validates that the heads consume the encoder's output width.
    pub fn new(encoder: Mlp, classifier: Mlp, adversary: Option<Mlp>) -> Result<Self> {
        let d = encoder.spec().output_width();
        if classifier.spec().input_width() != d {
            return Err(Error::ShapeMismatch {
                op: "model_params",
                detail: format!(
                    "classifier expects {} inputs, encoder outputs {d}",
                    classifier.spec().input_width()
                ),
            });
        }
        if let Some(adv) = &adversary {
            if adv.spec().input_width() != d {
                return Err(Error::ShapeMismatch {
                    op: "model_params",
                    detail: format!(
                        "adversary expects {} inputs, encoder outputs {d}",
                        adv.spec().input_width()
                    ),
                });
            }
        }
        Ok(Self {
            encoder,
            classifier,
            adversary,
        })
    }

    /// Embed a batch through the encoder, keeping the tape for backward.
    pub fn encode(&self, x: &Matrix) -> Result<(Matrix, ForwardTape)> {
        self.encoder.forward(x)
    }

    pub fn param_count(&self) -> usize {
        self.encoder.spec().param_count()
            + self.classifier.spec().param_count()
            + self
                .adversary
                .as_ref()
                .map_or(0, |a| a.spec().param_count())
    }

    /// Flat view in the fixed order encoder → classifier → adversary.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.encoder.flatten_into(&mut out);
        self.classifier.flatten_into(&mut out);
        if let Some(adv) = &self.adversary {
            adv.flatten_into(&mut out);
        }
        out
    }

    /// Restore every parameter from a flat vector produced by [`flatten`].
    ///
    /// [`flatten`]: ModelParams::flatten
    pub fn unflatten(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::ShapeMismatch {
                op: "params_unflatten",
                detail: format!(
                    "expected {} values, got {}",
                    self.param_count(),
                    flat.len()
                ),
            });
        }
        let mut offset = self.encoder.unflatten_from(flat)?;
        offset += self.classifier.unflatten_from(&flat[offset..])?;
        if let Some(adv) = &mut self.adversary {
            adv.unflatten_from(&flat[offset..])?;
        }
        Ok(())
    }

    /// FNV-1a hash of the exact bit patterns of all parameters; used to
    /// assert that evaluation never mutates a model.
    pub fn param_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.flatten() {
            for byte in v.to_bits().to_le_bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

/// Mean cross-entropy of row-wise softmax against integer labels, plus the
/// gradient `(softmax − one-hot) / n` with respect to the logits.
pub fn cross_entropy(logits: &Matrix, labels: &[u8]) -> Result<(f64, Matrix)> {
    if logits.rows() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "cross_entropy",
            detail: format!("{} logit rows vs {} labels", logits.rows(), labels.len()),
        });
    }
    if logits.rows() == 0 {
        return Err(Error::EmptyBatch {
            context: "cross_entropy needs at least one row".into(),
        });
    }
    let classes = logits.cols();
    if let Some(bad) = labels.iter().find(|l| usize::from(**l) >= classes) {
        return Err(Error::InvalidParameter {
            name: "labels",
            reason: format!("label {bad} out of range for {classes} classes"),
        });
    }

    let n = logits.rows();
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut dlogits = Matrix::zeros(n, classes);
    for i in 0..n {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let label = usize::from(labels[i]);
        loss += lse - row[label];
        let drow = dlogits.row_mut(i);
        for c in 0..classes {
            let p = (row[c] - lse).exp();
            drow[c] = (p - if c == label { 1.0 } else { 0.0 }) * inv_n;
        }
    }
    Ok((loss * inv_n, dlogits))
}

/// Fraction of rows whose argmax matches the label. Ties pick the lowest
/// class index, so all-zero logits score as class 0.
pub fn accuracy(logits: &Matrix, labels: &[u8]) -> Result<f64> {
    if logits.rows() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "accuracy",
            detail: format!("{} logit rows vs {} labels", logits.rows(), labels.len()),
        });
    }
    if logits.rows() == 0 {
        return Err(Error::EmptyBatch {
            context: "accuracy needs at least one row".into(),
        });
    }
    let mut correct = 0usize;
    for i in 0..logits.rows() {
        let row = logits.row(i);
        let mut best = 0usize;
        for (c, v) in row.iter().enumerate().skip(1) {
            if *v > row[best] {
                best = c;
            }
        }
        if best == usize::from(labels[i]) {
            correct += 1;
        }
    }
    Ok(correct as f64 / logits.rows() as f64)
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"DSNTCKPT";
const CHECKPOINT_VERSION: u16 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    encoder: MlpSpec,
    classifier: MlpSpec,
    adversary: Option<MlpSpec>,
    param_count: usize,
}

/// Write a checkpoint: 8-byte magic, u16 format version, u32 JSON header
/// length, the JSON header (architecture specs + parameter count), then
/// every parameter as little-endian f64 in flat order.
pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    let header = CheckpointHeader {
        encoder: params.encoder.spec().clone(),
        classifier: params.classifier.spec().clone(),
        adversary: params.adversary.as_ref().map(|a| a.spec().clone()),
        param_count: params.param_count(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&u32::try_from(header_bytes.len()).expect("header fits u32").to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for v in params.flatten() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("file too short for magic bytes".into()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let mut version = [0u8; 2];
    r.read_exact(&mut version)
        .map_err(|_| Error::Checkpoint("truncated version field".into()))?;
    let version = u16::from_le_bytes(version);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)
        .map_err(|_| Error::Checkpoint("truncated header length".into()))?;
    let mut header_bytes = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut header_bytes)
        .map_err(|_| Error::Checkpoint("truncated header".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::Checkpoint(format!("malformed header: {e}")))?;

    let mut params = ModelParams::new(
        Mlp::zeros(header.encoder),
        Mlp::zeros(header.classifier),
        header.adversary.map(Mlp::zeros),
    )?;
    if params.param_count() != header.param_count {
        return Err(Error::Checkpoint(format!(
            "header claims {} parameters, specs require {}",
            header.param_count,
            params.param_count()
        )));
    }
    let mut flat = vec![0.0; header.param_count];
    let mut buf = [0u8; 8];
    for v in &mut flat {
        r.read_exact(&mut buf)
            .map_err(|_| Error::Checkpoint("truncated parameter payload".into()))?;
        *v = f64::from_le_bytes(buf);
    }
    if r.read(&mut buf).map_err(Error::Io)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after payload".into()));
    }
    params.unflatten(&flat)?;
    Ok(params)
}
