//! Batch statistics shared by the divergence implementations and the
//! training/evaluation stack: per-dimension Gaussian fits, splitting a batch
//! by its binary sensitive attribute, Pearson correlation, and a diagnostic
//! for how diagonal an empirical covariance is.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Lower bound applied to fitted standard deviations so later divisions and
/// logs stay finite even when an embedding dimension collapses.
pub const STD_FLOOR: f64 = 1e-4;

/// Diagonal Gaussian: one mean and standard deviation per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDiag {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl GaussianDiag {
    /// Build from explicit parameters. Lengths must match and every standard
    /// deviation must be finite and at least [`STD_FLOOR`].
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::ShapeMismatch {
                op: "GaussianDiag::new",
                detail: format!("mean has {} entries, std has {}", mean.len(), std.len()),
            });
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "mean",
                reason: "entries must be finite".into(),
            });
        }
        if let Some(s) = std.iter().find(|s| !s.is_finite() || **s < STD_FLOOR) {
            return Err(Error::InvalidParameter {
                name: "std",
                reason: format!("entries must be finite and >= {STD_FLOOR}, got {s}"),
            });
        }
        Ok(GaussianDiag { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }
}

/// A batch of samples with one binary main label and one binary sensitive
/// label per row.
#[derive(Debug, Clone)]
pub struct LabeledBatch {
    pub samples: Matrix,
    pub main: Vec<u8>,
    pub sensitive: Vec<u8>,
}

impl LabeledBatch {
    /// Validates that label vectors match the row count and contain only 0/1.
    pub fn new(samples: Matrix, main: Vec<u8>, sensitive: Vec<u8>) -> Result<Self> {
        let n = samples.rows();
        if main.len() != n || sensitive.len() != n {
            return Err(Error::ShapeMismatch {
                op: "LabeledBatch::new",
                detail: format!(
                    "{n} rows but {} main labels and {} sensitive labels",
                    main.len(),
                    sensitive.len()
                ),
            });
        }
        for (name, labels) in [("main", &main), ("sensitive", &sensitive)] {
            if let Some(bad) = labels.iter().find(|l| **l > 1) {
                return Err(Error::InvalidParameter {
                    name: "labels",
                    reason: format!("{name} label {bad} is not binary"),
                });
            }
        }
        Ok(LabeledBatch {
            samples,
            main,
            sensitive,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.samples.cols()
    }

    /// Sub-batch at the given row indices (indices may repeat).
    pub fn take(&self, indices: &[usize]) -> LabeledBatch {
        LabeledBatch {
            samples: self.samples.take_rows(indices),
            main: indices.iter().map(|&i| self.main[i]).collect(),
            sensitive: indices.iter().map(|&i| self.sensitive[i]).collect(),
        }
    }
}

/// Row indices of sensitive class 0 and class 1, each in original order.
/// Fails with [`Error::SingleClassBatch`] when either side is empty.
pub fn split_indices(sensitive: &[u8]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut idx0 = Vec::new();
    let mut idx1 = Vec::new();
    for (i, &s) in sensitive.iter().enumerate() {
        if s == 0 {
            idx0.push(i);
        } else {
            idx1.push(i);
        }
    }
    if idx0.is_empty() || idx1.is_empty() {
        return Err(Error::SingleClassBatch);
    }
    Ok((idx0, idx1))
}

/// Partition rows by sensitive label, preserving row order within each group.
pub fn split_by_sensitive(samples: &Matrix, sensitive: &[u8]) -> Result<(Matrix, Matrix)> {
    if samples.rows() != sensitive.len() {
        return Err(Error::ShapeMismatch {
            op: "split_by_sensitive",
            detail: format!("{} rows vs {} labels", samples.rows(), sensitive.len()),
        });
    }
    let (idx0, idx1) = split_indices(sensitive)?;
    Ok((samples.take_rows(&idx0), samples.take_rows(&idx1)))
}

/// Per-dimension sample mean and unbiased (n-1) standard deviation, with the
/// standard deviation floored at [`STD_FLOOR`]. Needs at least two rows.
pub fn fit_gaussian_diag(z: &Matrix) -> Result<GaussianDiag> {
    let n = z.rows();
    if n < 2 {
        return Err(Error::InsufficientSamples {
            what: "fit_gaussian_diag",
            needed: 2,
            got: n,
        });
    }
    let d = z.cols();
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(z.row(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut std = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            let c = z[(i, j)] - mean[j];
            std[j] += c * c;
        }
    }
    for s in &mut std {
        *s = (*s / (n - 1) as f64).sqrt().max(STD_FLOOR);
    }
    GaussianDiag::new(mean, std)
}

/// Pearson correlation coefficient, clamped to `[-1, 1]` against rounding.
/// Undefined (an error) when either vector is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            op: "pearson",
            detail: format!("{} vs {} entries", x.len(), y.len()),
        });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientSamples {
            what: "pearson",
            needed: 2,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation { side: "first" });
    }
    if syy == 0.0 {
        return Err(Error::UndefinedCorrelation { side: "second" });
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// How far the empirical covariance of `z` is from its own diagonal:
/// `||C - diag(C)||_F / ||C||_F`. 0 means exactly diagonal; values near 1
/// mean the off-diagonal structure dominates. Errors when the batch is
/// all-constant (zero covariance) or has fewer than two rows.
pub fn diag_distance(z: &Matrix) -> Result<f64> {
    let n = z.rows();
    if n < 2 {
        return Err(Error::InsufficientSamples {
            what: "diag_distance",
            needed: 2,
            got: n,
        });
    }
    let d = z.cols();
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(z.row(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    // Unbiased empirical covariance.
    let mut cov = Matrix::zeros(d, d);
    for i in 0..n {
        let row = z.row(i);
        for a in 0..d {
            let da = row[a] - mean[a];
            for b in 0..d {
                cov[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    }
    cov.scale(1.0 / (n - 1) as f64);
    let mut total = 0.0;
    let mut off = 0.0;
    for a in 0..d {
        for b in 0..d {
            let v = cov[(a, b)] * cov[(a, b)];
            total += v;
            if a != b {
                off += v;
            }
        }
    }
    if total == 0.0 {
        return Err(Error::InvalidParameter {
            name: "batch",
            reason: "covariance is identically zero (all-constant batch)".into(),
        });
    }
    Ok((off / total).sqrt())
}
