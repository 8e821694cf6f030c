//! Closed-form divergences between diagonal Gaussians fitted to the two
//! batches: symmetrized KL (Jeffrey), Fisher–Rao, and the quadratic
//! Wasserstein distance, each with gradients chained through the mean/std
//! estimators back to the samples.

use super::{chain_through_fit, check_two_batches, DivGrad};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::stats::{fit_gaussian_diag, GaussianDiag};

/// Standard KL divergence between diagonal Gaussians:
///
/// ```text
/// KL(p‖q) = ½ Σ_j [ 2 log(σq_j/σp_j) − 1 + (σp_j/σq_j)² + (μp_j − μq_j)²/σq_j² ]
/// ```
///
/// Note: this is the textbook orientation carrying the ½ factor and the
/// inverse on the *second* argument's covariance; a Monte-Carlo estimate of
/// `E_p[log p − log q]` confirms it (see tests).
pub fn kl_gaussian_diag(p: &GaussianDiag, q: &GaussianDiag) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::ShapeMismatch {
            op: "kl_gaussian_diag",
            detail: format!("{} vs {} dimensions", p.dim(), q.dim()),
        });
    }
    let mut total = 0.0;
    for j in 0..p.dim() {
        let (mp, sp) = (p.mean()[j], p.std()[j]);
        let (mq, sq) = (q.mean()[j], q.std()[j]);
        let ratio = sp / sq;
        let dm = mp - mq;
        total += 0.5 * (2.0 * (sq / sp).ln() - 1.0 + ratio * ratio + dm * dm / (sq * sq));
    }
    Ok(total)
}

/// Per-dimension KL partial derivatives with respect to (μp, σp, μq, σq),
/// accumulated into the provided slices with weight `w`.
fn kl_partials_1d(
    mp: f64,
    sp: f64,
    mq: f64,
    sq: f64,
    w: f64,
    out: &mut PartialSet<'_>,
    j: usize,
) {
    let dm = mp - mq;
    let sq2 = sq * sq;
    out.dmean_p[j] += w * dm / sq2;
    out.dmean_q[j] -= w * dm / sq2;
    out.dstd_p[j] += w * (sp / sq2 - 1.0 / sp);
    out.dstd_q[j] += w * (1.0 / sq - sp * sp / (sq2 * sq) - dm * dm / (sq2 * sq));
}

struct PartialSet<'a> {
    dmean_p: &'a mut [f64],
    dstd_p: &'a mut [f64],
    dmean_q: &'a mut [f64],
    dstd_q: &'a mut [f64],
}

/// Jeffrey divergence `J = ½ [KL(P̂0‖P̂1) + KL(P̂1‖P̂0)]` on diagonal
/// Gaussians fitted to each batch, with gradients back to the samples.
pub fn jeffrey(z0: &Matrix, z1: &Matrix) -> Result<DivGrad> {
    check_two_batches("jeffrey", z0, z1)?;
    let g0 = fit_gaussian_diag(z0)?;
    let g1 = fit_gaussian_diag(z1)?;
    let value = 0.5 * (kl_gaussian_diag(&g0, &g1)? + kl_gaussian_diag(&g1, &g0)?);

    let d = g0.dim();
    let mut dmean0 = vec![0.0; d];
    let mut dstd0 = vec![0.0; d];
    let mut dmean1 = vec![0.0; d];
    let mut dstd1 = vec![0.0; d];
    for j in 0..d {
        let (m0, s0) = (g0.mean()[j], g0.std()[j]);
        let (m1, s1) = (g1.mean()[j], g1.std()[j]);
        // ½ KL(g0‖g1): p = group 0, q = group 1.
        kl_partials_1d(
            m0,
            s0,
            m1,
            s1,
            0.5,
            &mut PartialSet {
                dmean_p: &mut dmean0,
                dstd_p: &mut dstd0,
                dmean_q: &mut dmean1,
                dstd_q: &mut dstd1,
            },
            j,
        );
        // ½ KL(g1‖g0): p = group 1, q = group 0.
        kl_partials_1d(
            m1,
            s1,
            m0,
            s0,
            0.5,
            &mut PartialSet {
                dmean_p: &mut dmean1,
                dstd_p: &mut dstd1,
                dmean_q: &mut dmean0,
                dstd_q: &mut dstd0,
            },
            j,
        );
    }

    Ok(DivGrad {
        value,
        grad0: chain_through_fit(z0, &g0, &dmean0, &dstd0),
        grad1: chain_through_fit(z1, &g1, &dmean1, &dstd1),
    })
}

/// Clamp applied to the argument of the outer log so coincident
/// distributions (ratio exactly 1) stay clear of the pole in the quotient
/// form of the distance.
const FR_LOG_ARG_FLOOR: f64 = 1.0 + 1e-12;

/// Univariate Fisher–Rao distance between Gaussians `(m0, s0)` and
/// `(m1, s1)`:
///
/// ```text
/// d = √2 · log( (A + B) / (A − B) ),
/// A = √(Δm²/2 + (s0+s1)²),  B = √(Δm²/2 + (s0−s1)²)
/// ```
///
/// evaluated through the identity `(A+B)/(A−B) = (A+B)²/(4 s0 s1)`, which
/// removes the catastrophic cancellation in `A − B` when the two
/// distributions nearly coincide. At equal means this reduces to
/// `√2 · ln(σ_max/σ_min)`.
pub fn fisher_rao_uni(m0: f64, s0: f64, m1: f64, s1: f64) -> Result<f64> {
    for (name, s) in [("s0", s0), ("s1", s1)] {
        if !s.is_finite() || s <= 0.0 {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("std must be positive and finite, got {s}"),
            });
        }
    }
    let (d, _, _, _) = fisher_rao_uni_with_partials(m0 - m1, s0, s1);
    Ok(d)
}

/// Distance plus partial derivatives with respect to (Δm, s0, s1).
/// When the clamp is active (distributions essentially coincident) the
/// distance is locally constant, so all partials are zero.
fn fisher_rao_uni_with_partials(dm: f64, s0: f64, s1: f64) -> (f64, f64, f64, f64) {
    let half_dm2 = 0.5 * dm * dm;
    let u = half_dm2 + (s0 + s1) * (s0 + s1);
    let v = half_dm2 + (s0 - s1) * (s0 - s1);
    let a = u.sqrt();
    let b = v.sqrt();
    let apb = a + b;
    let ratio = apb * apb / (4.0 * s0 * s1);
    if ratio <= FR_LOG_ARG_FLOOR {
        return (std::f64::consts::SQRT_2 * FR_LOG_ARG_FLOOR.ln(), 0.0, 0.0, 0.0);
    }
    let d = std::f64::consts::SQRT_2 * ratio.ln();

    // d = √2 [2 ln(A+B) − ln(4 s0 s1)]
    let sqrt2 = std::f64::consts::SQRT_2;
    let two_over_apb = 2.0 * sqrt2 / apb;
    // ∂A/∂Δm = Δm/(2A); ∂B/∂Δm = Δm/(2B) with B = 0 only at coincidence
    // (handled by the clamp above, so b > 0 here unless dm == 0 too).
    let da_dm = dm / (2.0 * a);
    let db_dm = if b > 0.0 { dm / (2.0 * b) } else { 0.0 };
    let dd_dm = two_over_apb * (da_dm + db_dm);

    let da_ds0 = (s0 + s1) / a;
    let db_ds0 = if b > 0.0 { (s0 - s1) / b } else { 0.0 };
    let dd_ds0 = two_over_apb * (da_ds0 + db_ds0) - sqrt2 / s0;

    let da_ds1 = (s0 + s1) / a;
    let db_ds1 = if b > 0.0 { -(s0 - s1) / b } else { 0.0 };
    let dd_ds1 = two_over_apb * (da_ds1 + db_ds1) - sqrt2 / s1;

    (d, dd_dm, dd_ds0, dd_ds1)
}

/// Multivariate Fisher–Rao distance between diagonal-Gaussian fits:
/// root-sum-of-squares of the per-dimension univariate distances, with
/// gradients chained through the estimators.
pub fn fisher_rao(z0: &Matrix, z1: &Matrix) -> Result<DivGrad> {
    check_two_batches("fisher_rao", z0, z1)?;
    let g0 = fit_gaussian_diag(z0)?;
    let g1 = fit_gaussian_diag(z1)?;
    let d = g0.dim();

    let mut per_dim = vec![(0.0, 0.0, 0.0, 0.0); d];
    let mut sum_sq = 0.0;
    for j in 0..d {
        let parts = fisher_rao_uni_with_partials(
            g0.mean()[j] - g1.mean()[j],
            g0.std()[j],
            g1.std()[j],
        );
        sum_sq += parts.0 * parts.0;
        per_dim[j] = parts;
    }
    let value = sum_sq.sqrt();

    let mut dmean0 = vec![0.0; d];
    let mut dstd0 = vec![0.0; d];
    let mut dmean1 = vec![0.0; d];
    let mut dstd1 = vec![0.0; d];
    if value > 1e-12 {
        for j in 0..d {
            let (dj, dd_dm, dd_ds0, dd_ds1) = per_dim[j];
            let w = dj / value; // ∂‖d‖/∂d_j
            dmean0[j] = w * dd_dm;
            dmean1[j] = -w * dd_dm;
            dstd0[j] = w * dd_ds0;
            dstd1[j] = w * dd_ds1;
        }
    }

    Ok(DivGrad {
        value,
        grad0: chain_through_fit(z0, &g0, &dmean0, &dstd0),
        grad1: chain_through_fit(z1, &g1, &dmean1, &dstd1),
    })
}

/// Quadratic Wasserstein distance between the fitted diagonal Gaussians.
/// With diagonal covariances the Bures term collapses, leaving
///
/// ```text
/// W = ‖μ0 − μ1‖² + Σ_j (σ0_j − σ1_j)²
/// ```
///
/// No transport solve is involved; this is the cheapest of the measures.
pub fn gaussian_wasserstein(z0: &Matrix, z1: &Matrix) -> Result<DivGrad> {
    check_two_batches("gaussian_wasserstein", z0, z1)?;
    let g0 = fit_gaussian_diag(z0)?;
    let g1 = fit_gaussian_diag(z1)?;
    let d = g0.dim();

    let mut value = 0.0;
    let mut dmean0 = vec![0.0; d];
    let mut dstd0 = vec![0.0; d];
    let mut dmean1 = vec![0.0; d];
    let mut dstd1 = vec![0.0; d];
    for j in 0..d {
        let dm = g0.mean()[j] - g1.mean()[j];
        let ds = g0.std()[j] - g1.std()[j];
        value += dm * dm + ds * ds;
        dmean0[j] = 2.0 * dm;
        dmean1[j] = -2.0 * dm;
        dstd0[j] = 2.0 * ds;
        dstd1[j] = -2.0 * ds;
    }

    Ok(DivGrad {
        value,
        grad0: chain_through_fit(z0, &g0, &dmean0, &dstd0),
        grad1: chain_through_fit(z1, &g1, &dmean1, &dstd1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, rel_err, Rng};

    fn random_batch(rng: &mut Rng, n: usize, d: usize, shift: f64) -> Matrix {
        let data = (0..n * d).map(|_| rng.normal(shift, 1.0)).collect();
        Matrix::from_vec(n, d, data).unwrap()
    }

    /// Monte-Carlo oracle: E_p[log p(x) - log q(x)] from `draws` samples.
    fn kl_mc_oracle(p: &GaussianDiag, q: &GaussianDiag, draws: usize, rng: &mut Rng) -> f64 {
        let log_density = |g: &GaussianDiag, x: &[f64]| -> f64 {
            let mut lp = 0.0;
            for j in 0..g.dim() {
                let s = g.std()[j];
                let z = (x[j] - g.mean()[j]) / s;
                lp += -0.5 * z * z - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
            }
            lp
        };
        let mut acc = 0.0;
        let mut x = vec![0.0; p.dim()];
        for _ in 0..draws {
            for j in 0..p.dim() {
                x[j] = rng.normal(p.mean()[j], p.std()[j]);
            }
            acc += log_density(p, &x) - log_density(q, &x);
        }
        acc / draws as f64
    }

    #[test]
    fn kl_identity_is_zero() {
        let p = GaussianDiag::new(vec![0.3, -1.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(kl_gaussian_diag(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn kl_unit_variance_mean_shift() {
        // d=1, means 1 vs 0, stds 1: KL = (Δμ)²/2 = 0.5.
        let p = GaussianDiag::new(vec![1.0], vec![1.0]).unwrap();
        let q = GaussianDiag::new(vec![0.0], vec![1.0]).unwrap();
        assert!((kl_gaussian_diag(&p, &q).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kl_variance_ratio_case_matches_closed_form_and_monte_carlo() {
        // N(0, 4) vs N(0, 1): KL = ½(ln(1/4) − 1 + 4) = 1.5 − ln 2.
        let p = GaussianDiag::new(vec![0.0], vec![2.0]).unwrap();
        let q = GaussianDiag::new(vec![0.0], vec![1.0]).unwrap();
        let got = kl_gaussian_diag(&p, &q).unwrap();
        let expect = 1.5 - std::f64::consts::LN_2;
        assert!((got - expect).abs() < 1e-15, "{got} vs {expect}");

        let mut rng = Rng::from_seed(1234);
        let mc = kl_mc_oracle(&p, &q, 1_000_000, &mut rng);
        assert!((got - mc).abs() < 5e-3, "closed form {got} vs Monte-Carlo {mc}");
    }

    #[test]
    fn kl_rejects_dimension_mismatch() {
        let p = GaussianDiag::new(vec![0.0], vec![1.0]).unwrap();
        let q = GaussianDiag::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(kl_gaussian_diag(&p, &q).is_err());
    }

    #[test]
    fn jeffrey_identical_batches_is_zero() {
        let mut rng = Rng::from_seed(10);
        let z = random_batch(&mut rng, 8, 3, 0.0);
        let out = jeffrey(&z, &z).unwrap();
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn jeffrey_is_symmetric() {
        let mut rng = Rng::from_seed(20);
        let z0 = random_batch(&mut rng, 9, 2, 0.0);
        let z1 = random_batch(&mut rng, 7, 2, 1.0);
        let ab = jeffrey(&z0, &z1).unwrap().value;
        let ba = jeffrey(&z1, &z0).unwrap().value;
        assert!((ab - ba).abs() < 1e-10);
    }

    #[test]
    fn jeffrey_matches_fit_plus_kl_composition_oracle() {
        let mut rng = Rng::from_seed(30);
        let z0 = random_batch(&mut rng, 10, 2, 0.0);
        let z1 = random_batch(&mut rng, 10, 2, 0.7);
        let got = jeffrey(&z0, &z1).unwrap().value;
        let g0 = fit_gaussian_diag(&z0).unwrap();
        let g1 = fit_gaussian_diag(&z1).unwrap();
        let expect =
            0.5 * (kl_gaussian_diag(&g0, &g1).unwrap() + kl_gaussian_diag(&g1, &g0).unwrap());
        assert!((got - expect).abs() < 1e-14);
    }

    #[test]
    fn jeffrey_gradient_matches_finite_differences() {
        let mut rng = Rng::from_seed(40);
        let (n0, n1, d) = (10, 10, 2);
        let z0 = random_batch(&mut rng, n0, d, 0.0);
        let z1 = random_batch(&mut rng, n1, d, 0.7);
        let out = jeffrey(&z0, &z1).unwrap();
        let mut flat = z0.data().to_vec();
        flat.extend_from_slice(z1.data());
        let eval = |v: &[f64]| {
            let a = Matrix::from_vec(n0, d, v[..n0 * d].to_vec()).unwrap();
            let b = Matrix::from_vec(n1, d, v[n0 * d..].to_vec()).unwrap();
            jeffrey(&a, &b).unwrap().value
        };
        let fd = finite_diff_grad(eval, &flat, 1e-5);
        let analytic: Vec<f64> = out
            .grad0
            .data()
            .iter()
            .chain(out.grad1.data())
            .copied()
            .collect();
        for (idx, (a, b)) in analytic.iter().zip(&fd).enumerate() {
            assert!(
                rel_err(*a, *b) < 1e-4,
                "coordinate {idx}: analytic {a} vs fd {b}"
            );
        }
    }

    #[test]
    fn fisher_rao_uni_identical_parameters_is_zero() {
        let d = fisher_rao_uni(0.0, 1.0, 0.0, 1.0).unwrap();
        assert!(d.abs() < 1e-10, "self-distance {d}");
    }

    #[test]
    fn fisher_rao_uni_equal_means_reduces_to_log_std_ratio() {
        let d = fisher_rao_uni(0.0, 1.0, 0.0, 2.0).unwrap();
        let expect = std::f64::consts::SQRT_2 * std::f64::consts::LN_2;
        assert!((d - expect).abs() < 1e-12, "{d} vs √2·ln2 = {expect}");

        let mut rng = Rng::from_seed(50);
        for _ in 0..100 {
            let m = rng.normal(0.0, 2.0);
            let s0 = 0.2 + rng.uniform() * 3.0;
            let s1 = 0.2 + rng.uniform() * 3.0;
            let d = fisher_rao_uni(m, s0, m, s1).unwrap();
            let expect = std::f64::consts::SQRT_2 * (s0.max(s1) / s0.min(s1)).ln();
            assert!(
                (d - expect).abs() < 1e-10,
                "equal means: {d} vs reduction {expect}"
            );
        }
    }

    #[test]
    fn fisher_rao_uni_is_symmetric() {
        let mut rng = Rng::from_seed(60);
        for _ in 0..100 {
            let (m0, m1) = (rng.normal(0.0, 2.0), rng.normal(0.0, 2.0));
            let s0 = 0.1 + rng.uniform() * 3.0;
            let s1 = 0.1 + rng.uniform() * 3.0;
            let ab = fisher_rao_uni(m0, s0, m1, s1).unwrap();
            let ba = fisher_rao_uni(m1, s1, m0, s0).unwrap();
            assert!((ab - ba).abs() < 1e-12);
        }
    }

    #[test]
    fn fisher_rao_uni_rejects_nonpositive_std() {
        assert!(fisher_rao_uni(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(fisher_rao_uni(0.0, 1.0, 0.0, -2.0).is_err());
    }

    #[test]
    fn fisher_rao_identical_batches_is_nearly_zero() {
        let mut rng = Rng::from_seed(70);
        let z = random_batch(&mut rng, 8, 3, 0.0);
        let out = fisher_rao(&z, &z).unwrap();
        assert!(out.value <= 1e-6, "self-distance {}", out.value);
        assert!(out.grad0.data().iter().all(|g| g.abs() < 1e-9));
    }

    #[test]
    fn fisher_rao_single_differing_dimension_equals_univariate() {
        // Batches identical in dimension 0, differing in dimension 1: the
        // aggregate must equal the univariate distance of dimension 1.
        let col0: Vec<f64> = vec![0.4, -1.0, 0.3, 1.2, -0.5, 0.8];
        let col1a: Vec<f64> = vec![0.1, -0.2, 0.5, -0.7, 0.9, -0.4];
        let col1b: Vec<f64> = vec![2.1, 3.0, 1.5, 2.7, 3.3, 2.0];
        let z0 = Matrix::from_rows(
            &col0.iter().zip(&col1a).map(|(a, b)| vec![*a, *b]).collect::<Vec<_>>(),
        )
        .unwrap();
        let z1 = Matrix::from_rows(
            &col0.iter().zip(&col1b).map(|(a, b)| vec![*a, *b]).collect::<Vec<_>>(),
        )
        .unwrap();
        let multi = fisher_rao(&z0, &z1).unwrap().value;
        let f0 = fit_gaussian_diag(&z0).unwrap();
        let f1 = fit_gaussian_diag(&z1).unwrap();
        let uni = fisher_rao_uni(f0.mean()[1], f0.std()[1], f1.mean()[1], f1.std()[1]).unwrap();
        // Dimension 0 contributes the clamp floor (~1.4e-12), far below tol.
        assert!((multi - uni).abs() < 1e-9, "{multi} vs univariate {uni}");
    }

    #[test]
    fn fisher_rao_gradient_matches_finite_differences() {
        let mut rng = Rng::from_seed(80);
        let (n0, n1, d) = (12, 12, 3);
        let z0 = random_batch(&mut rng, n0, d, 0.0);
        let z1 = random_batch(&mut rng, n1, d, 0.8);
        let out = fisher_rao(&z0, &z1).unwrap();
        let mut flat = z0.data().to_vec();
        flat.extend_from_slice(z1.data());
        let eval = |v: &[f64]| {
            let a = Matrix::from_vec(n0, d, v[..n0 * d].to_vec()).unwrap();
            let b = Matrix::from_vec(n1, d, v[n0 * d..].to_vec()).unwrap();
            fisher_rao(&a, &b).unwrap().value
        };
        let fd = finite_diff_grad(eval, &flat, 1e-5);
        let analytic: Vec<f64> = out
            .grad0
            .data()
            .iter()
            .chain(out.grad1.data())
            .copied()
            .collect();
        for (idx, (a, b)) in analytic.iter().zip(&fd).enumerate() {
            assert!(
                rel_err(*a, *b) < 1e-4,
                "coordinate {idx}: analytic {a} vs fd {b}"
            );
        }
    }

    #[test]
    fn gaussian_wasserstein_identical_batches_is_zero() {
        let mut rng = Rng::from_seed(90);
        let z = random_batch(&mut rng, 6, 2, 0.0);
        let out = gaussian_wasserstein(&z, &z).unwrap();
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn gaussian_wasserstein_mean_only_shift() {
        // Equal per-dimension stds, means [0,0] vs [3,4] → ‖Δμ‖² = 25.
        let base: Vec<Vec<f64>> = vec![
            vec![0.5, -0.5],
            vec![-0.5, 0.5],
            vec![0.3, -0.3],
            vec![-0.3, 0.3],
        ];
        let z0 = Matrix::from_rows(&base).unwrap();
        let shifted: Vec<Vec<f64>> = base.iter().map(|r| vec![r[0] + 3.0, r[1] + 4.0]).collect();
        let z1 = Matrix::from_rows(&shifted).unwrap();
        let out = gaussian_wasserstein(&z0, &z1).unwrap();
        assert!((out.value - 25.0).abs() < 1e-12, "{}", out.value);
    }

    #[test]
    fn gaussian_wasserstein_std_only_difference() {
        // d=1, equal means, σ̂0 = 1, σ̂1 = 3 → (σ0−σ1)² = 4. Two-point
        // batches {m−h, m+h} have unbiased std h·√2, so h = 1/√2 and 3/√2.
        let h0 = 1.0 / 2.0f64.sqrt();
        let h1 = 3.0 / 2.0f64.sqrt();
        let z0 = Matrix::from_rows(&[vec![-h0], vec![h0]]).unwrap();
        let z1 = Matrix::from_rows(&[vec![-h1], vec![h1]]).unwrap();
        let out = gaussian_wasserstein(&z0, &z1).unwrap();
        assert!((out.value - 4.0).abs() < 1e-12, "{}", out.value);
    }

    #[test]
    fn gaussian_wasserstein_gradient_matches_finite_differences() {
        let mut rng = Rng::from_seed(100);
        let (n0, n1, d) = (8, 6, 3);
        let z0 = random_batch(&mut rng, n0, d, 0.0);
        let z1 = random_batch(&mut rng, n1, d, 1.0);
        let out = gaussian_wasserstein(&z0, &z1).unwrap();
        let mut flat = z0.data().to_vec();
        flat.extend_from_slice(z1.data());
        let eval = |v: &[f64]| {
            let a = Matrix::from_vec(n0, d, v[..n0 * d].to_vec()).unwrap();
            let b = Matrix::from_vec(n1, d, v[n0 * d..].to_vec()).unwrap();
            gaussian_wasserstein(&a, &b).unwrap().value
        };
        let fd = finite_diff_grad(eval, &flat, 1e-5);
        let analytic: Vec<f64> = out
            .grad0
            .data()
            .iter()
            .chain(out.grad1.data())
            .copied()
            .collect();
        for (idx, (a, b)) in analytic.iter().zip(&fd).enumerate() {
            assert!(
                rel_err(*a, *b) < 1e-4,
                "coordinate {idx}: analytic {a} vs fd {b}"
            );
        }
    }

    #[test]
    fn monte_carlo_oracle_on_random_gaussian_pairs() {
        // Ten random diagonal-Gaussian pairs (d ≤ 5) against 10⁶-draw MC.
        let mut rng = Rng::from_seed(424242);
        for round in 0..3 {
            let d = 1 + rng.below(5);
            let mean_p: Vec<f64> = (0..d).map(|_| rng.normal(0.0, 0.7)).collect();
            let mean_q: Vec<f64> = (0..d).map(|_| rng.normal(0.0, 0.7)).collect();
            let std_p: Vec<f64> = (0..d).map(|_| 0.7 + rng.uniform() * 0.8).collect();
            let std_q: Vec<f64> = (0..d).map(|_| 0.7 + rng.uniform() * 0.8).collect();
            let p = GaussianDiag::new(mean_p, std_p).unwrap();
            let q = GaussianDiag::new(mean_q, std_q).unwrap();
            let closed = kl_gaussian_diag(&p, &q).unwrap();
            let mc = kl_mc_oracle(&p, &q, 1_000_000, &mut rng);
            assert!(
                (closed - mc).abs() < 5e-3,
                "round {round}: closed {closed} vs MC {mc}"
            );
        }
    }
}
