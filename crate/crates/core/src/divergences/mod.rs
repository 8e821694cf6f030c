//! Similarity measures between the two conditional embedding batches, each
//! returned as a value plus analytic gradients with respect to every sample
//! coordinate so the training loop can push them through the encoder.
//!
//! Five measures are provided:
//!
//! * [`mmd`] — unbiased MMD U-statistic with a Gaussian kernel;
//! * [`sinkhorn_divergence`] — debiased entropic optimal transport
//!   (with [`sinkhorn_plan`] / [`wasserstein_eps`] as building blocks);
//! * [`jeffrey`] — symmetrized KL between fitted diagonal Gaussians;
//! * [`fisher_rao`] — closed-form Fisher–Rao distance between fitted
//!   diagonal Gaussians;
//! * [`gaussian_wasserstein`] — closed-form quadratic Wasserstein distance
//!   between fitted diagonal Gaussians.
//!
//! All are parameter-free in the sense that nothing in them is trained; the
//! only knobs are numerical (kernel bandwidth, entropic weight, iteration
//! budgets).

mod gaussian;
mod mmd;
mod sinkhorn;

pub use gaussian::{fisher_rao, fisher_rao_uni, gaussian_wasserstein, jeffrey, kl_gaussian_diag};
pub use mmd::mmd;
pub use sinkhorn::{
    cost_matrix, median_cost, sinkhorn_divergence, sinkhorn_plan, wasserstein_eps, SinkhornConfig,
    TransportPlan,
};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::stats::{GaussianDiag, STD_FLOOR};

/// A similarity value together with its gradients: `grad0[r][j]` is
/// `d value / d z0[r][j]`, and likewise `grad1` for the second batch.
#[derive(Debug, Clone)]
pub struct DivGrad {
    pub value: f64,
    pub grad0: Matrix,
    pub grad1: Matrix,
}

/// Median of the pairwise Euclidean distances over the pooled batch, floored
/// at 1e-6. The usual heuristic for picking a Gaussian-kernel bandwidth when
/// none is configured.
pub fn median_bandwidth(z0: &Matrix, z1: &Matrix) -> Result<f64> {
    if z0.cols() != z1.cols() {
        return Err(Error::ShapeMismatch {
            op: "median_bandwidth",
            detail: format!("column counts differ: {} vs {}", z0.cols(), z1.cols()),
        });
    }
    let total = z0.rows() + z1.rows();
    if total < 2 {
        return Err(Error::InsufficientSamples {
            what: "median_bandwidth",
            needed: 2,
            got: total,
        });
    }
    let d = z0.cols();
    let row = |i: usize| -> &[f64] {
        if i < z0.rows() {
            z0.row(i)
        } else {
            z1.row(i - z0.rows())
        }
    };
    let mut dists = Vec::with_capacity(total * (total - 1) / 2);
    for i in 0..total {
        for j in (i + 1)..total {
            let (a, b) = (row(i), row(j));
            let mut acc = 0.0;
            for k in 0..d {
                let diff = a[k] - b[k];
                acc += diff * diff;
            }
            dists.push(acc.sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    Ok(median.max(1e-6))
}

/// Shared validation for the fitted-Gaussian measures: equal column counts
/// and at least two rows per group.
fn check_two_batches(op: &'static str, z0: &Matrix, z1: &Matrix) -> Result<()> {
    if z0.cols() != z1.cols() {
        return Err(Error::ShapeMismatch {
            op,
            detail: format!("column counts differ: {} vs {}", z0.cols(), z1.cols()),
        });
    }
    for z in [z0, z1] {
        if z.rows() < 2 {
            return Err(Error::InsufficientSamples {
                what: op,
                needed: 2,
                got: z.rows(),
            });
        }
    }
    Ok(())
}

/// Chain rule from per-dimension Gaussian parameters back to the samples:
/// for a value that depends on `z` only through the fitted mean and
/// (unbiased, floored) std, the sample gradient is
///
/// ```text
/// d value / d z[r][j] = dmean[j]/n + dstd[j] * (z[r][j] - mean[j]) / ((n-1) * std[j])
/// ```
///
/// The std term vanishes where the fit hit the floor: there the estimator is
/// locally constant.
fn chain_through_fit(z: &Matrix, fit: &GaussianDiag, dmean: &[f64], dstd: &[f64]) -> Matrix {
    let n = z.rows();
    let nf = n as f64;
    let d = z.cols();
    let mut grad = Matrix::zeros(n, d);
    for r in 0..n {
        for j in 0..d {
            let mut g = dmean[j] / nf;
            let std = fit.std()[j];
            if std > STD_FLOOR {
                g += dstd[j] * (z[(r, j)] - fit.mean()[j]) / ((nf - 1.0) * std);
            }
            grad[(r, j)] = g;
        }
    }
    grad
}
