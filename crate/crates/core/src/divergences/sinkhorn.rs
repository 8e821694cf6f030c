//! Entropic optimal transport in the log domain and the debiased Sinkhorn
//! divergence.
//!
//! The primal problem solved here, for batches of sizes `n0` and `n1` with
//! uniform marginals `a = 1/n0`, `b = 1/n1`, is
//!
//! ```text
//! W_ε = min_{Π ∈ U(a,b)}  ⟨Π, D⟩ + ε Σ_ij Π_ij log Π_ij
//! ```
//!
//! where `D_ij = ‖z0_i − z1_j‖^p`. Iterations run on the dual potentials
//! `(f, g)` with log-sum-exp updates, so small ε never underflows. The
//! debiased divergence is `SD = W_ε(z0,z1) − ½ W_ε(z0,z0) − ½ W_ε(z1,z1)`.

use super::DivGrad;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Solver settings for the entropic transport problems.
///
/// `epsilon` is the absolute entropic weight ε; callers that want a
/// scale-free default should set it to `0.1 * median_cost(&cost)` (see
/// [`SinkhornConfig::relative_to`]). `power` is the exponent `p` of the
/// ground cost and must be 1 or 2.
#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub power: u8,
    pub max_iter: usize,
    pub tol: f64,
}

impl SinkhornConfig {
    /// Config with the documented defaults: `power = 2`, `max_iter = 500`,
    /// `tol = 1e-6`.
    pub fn new(epsilon: f64) -> Self {
        SinkhornConfig {
            epsilon,
            power: 2,
            max_iter: 500,
            tol: 1e-6,
        }
    }

    /// Default scale-relative epsilon: `scale` times the median cost between
    /// the two batches (floored to stay positive on degenerate input).
    pub fn relative_to(z0: &Matrix, z1: &Matrix, scale: f64, power: u8) -> Result<Self> {
        let cost = cost_matrix(z0, z1, power)?;
        let mut cfg = SinkhornConfig::new((scale * median_cost(&cost)).max(1e-12));
        cfg.power = power;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must be positive and finite, got {}", self.epsilon),
            });
        }
        if self.power != 1 && self.power != 2 {
            return Err(Error::InvalidParameter {
                name: "power",
                reason: format!("must be 1 or 2, got {}", self.power),
            });
        }
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "tol",
                reason: format!("must be positive and finite, got {}", self.tol),
            });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iter",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Converged (or iteration-capped) transport plan with its dual potentials.
/// `converged == false` is a warning, not an error: the plan is still the
/// best iterate found.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub plan: Matrix,
    pub potential_f: Vec<f64>,
    pub potential_g: Vec<f64>,
    pub iterations: usize,
    /// L1 marginal residual at exit (row side; columns are exact after every
    /// g-update).
    pub residual: f64,
    pub converged: bool,
}

/// Ground cost `D_ij = ‖z0_i − z1_j‖^p` for `p ∈ {1, 2}`.
pub fn cost_matrix(z0: &Matrix, z1: &Matrix, power: u8) -> Result<Matrix> {
    if power != 1 && power != 2 {
        return Err(Error::InvalidParameter {
            name: "power",
            reason: format!("must be 1 or 2, got {power}"),
        });
    }
    let mut cost = crate::numerics::pairwise_sq_dists(z0, z1)?;
    if power == 1 {
        for v in cost.data_mut() {
            *v = v.sqrt();
        }
    }
    Ok(cost)
}

/// Median of all cost-matrix entries; used for scale-relative ε defaults.
pub fn median_cost(cost: &Matrix) -> f64 {
    let mut vals = cost.data().to_vec();
    if vals.is_empty() {
        return 0.0;
    }
    vals.sort_by(|a, b| a.partial_cmp(b).expect("costs are finite"));
    let mid = vals.len() / 2;
    if vals.len() % 2 == 1 {
        vals[mid]
    } else {
        0.5 * (vals[mid - 1] + vals[mid])
    }
}

fn logsumexp(values: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.collect();
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn iterations for the entropic plan between uniform
/// marginals `1/n0` and `1/n1` under the given cost matrix.
///
/// Runs until the L1 marginal residual drops below `cfg.tol` or `max_iter`
/// full (f, g) sweeps have been performed; non-convergence is reported via
/// [`TransportPlan::converged`] rather than an error.
pub fn sinkhorn_plan(cost: &Matrix, cfg: &SinkhornConfig) -> Result<TransportPlan> {
    cfg.validate()?;
    let (n0, n1) = cost.shape();
    if n0 == 0 || n1 == 0 {
        return Err(Error::EmptyBatch {
            context: "sinkhorn_plan needs a nonempty cost matrix".into(),
        });
    }
    if cost.data().iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::InvalidParameter {
            name: "cost",
            reason: "entries must be finite and nonnegative".into(),
        });
    }

    let eps = cfg.epsilon;
    let log_a = -(n0 as f64).ln();
    let log_b = -(n1 as f64).ln();
    let a = (n0 as f64).recip();
    let mut f = vec![0.0; n0];
    let mut g = vec![0.0; n1];
    let mut row_lse = vec![0.0; n0];
    let mut iterations = 0;
    let mut residual;
    let mut converged = false;

    loop {
        // Row pass: with the current g, row_lse[i] = LSE_j((g_j - D_ij)/ε).
        for i in 0..n0 {
            let row = cost.row(i);
            row_lse[i] = logsumexp(row.iter().zip(&g).map(|(d, gj)| (gj - d) / eps));
        }
        if iterations > 0 {
            // Columns are exact after the last g-update; the row-side L1
            // residual therefore measures total marginal violation.
            residual = f
                .iter()
                .zip(&row_lse)
                .map(|(fi, lse)| ((fi / eps + lse).exp() - a).abs())
                .sum();
            if residual < cfg.tol {
                converged = true;
                break;
            }
            if iterations >= cfg.max_iter {
                break;
            }
        }

        for (fi, lse) in f.iter_mut().zip(&row_lse) {
            *fi = eps * (log_a - lse);
        }
        for j in 0..n1 {
            let lse = logsumexp((0..n0).map(|i| (f[i] - cost[(i, j)]) / eps));
            g[j] = eps * (log_b - lse);
        }
        iterations += 1;
    }

    let mut plan = Matrix::zeros(n0, n1);
    for i in 0..n0 {
        for j in 0..n1 {
            plan[(i, j)] = ((f[i] + g[j] - cost[(i, j)]) / eps).exp();
        }
    }
    Ok(TransportPlan {
        plan,
        potential_f: f,
        potential_g: g,
        iterations,
        residual,
        converged,
    })
}

/// Primal entropic objective of a plan: `⟨Π, D⟩ + ε Σ Π log Π` with the
/// convention `0·log 0 = 0`.
fn entropic_objective(plan: &Matrix, cost: &Matrix, eps: f64) -> f64 {
    let mut transport = 0.0;
    let mut entropy = 0.0;
    for (p, c) in plan.data().iter().zip(cost.data()) {
        transport += p * c;
        if *p > 0.0 {
            entropy += p * p.ln();
        }
    }
    transport + eps * entropy
}

/// Entropic transport cost `W_ε(z0, z1)` with ground cost `‖·‖^p`.
pub fn wasserstein_eps(z0: &Matrix, z1: &Matrix, cfg: &SinkhornConfig) -> Result<f64> {
    let cost = cost_matrix(z0, z1, cfg.power)?;
    let tp = sinkhorn_plan(&cost, cfg)?;
    Ok(entropic_objective(&tp.plan, &cost, cfg.epsilon))
}

/// Adds `scale * d⟨Π, D(za, zb)⟩/dz` to freshly allocated gradients for both
/// batches, holding the plan fixed (envelope rule). Returns `(ga, gb)`.
fn plan_cost_gradients(
    plan: &Matrix,
    za: &Matrix,
    zb: &Matrix,
    power: u8,
    scale: f64,
) -> (Matrix, Matrix) {
    let d = za.cols();
    let mut ga = Matrix::zeros(za.rows(), d);
    let mut gb = Matrix::zeros(zb.rows(), d);
    for i in 0..za.rows() {
        let ai = za.row(i);
        for j in 0..zb.rows() {
            let p = plan[(i, j)];
            if p == 0.0 {
                continue;
            }
            let bj = zb.row(j);
            match power {
                2 => {
                    // D = ‖a−b‖²: ∂D/∂a = 2(a−b).
                    let w = 2.0 * scale * p;
                    for k in 0..d {
                        let diff = ai[k] - bj[k];
                        ga[(i, k)] += w * diff;
                        gb[(j, k)] -= w * diff;
                    }
                }
                _ => {
                    // D = ‖a−b‖: ∂D/∂a = (a−b)/‖a−b‖, subgradient 0 at 0.
                    let mut norm = 0.0;
                    for k in 0..d {
                        let diff = ai[k] - bj[k];
                        norm += diff * diff;
                    }
                    let norm = norm.sqrt();
                    if norm < 1e-12 {
                        continue;
                    }
                    let w = scale * p / norm;
                    for k in 0..d {
                        let diff = ai[k] - bj[k];
                        ga[(i, k)] += w * diff;
                        gb[(j, k)] -= w * diff;
                    }
                }
            }
        }
    }
    (ga, gb)
}

/// Debiased Sinkhorn divergence
/// `SD = W_ε(z0,z1) − ½ W_ε(z0,z0) − ½ W_ε(z1,z1)`, all three terms solved
/// with the same ε, with envelope gradients: the three plans are frozen at
/// their optima and only the ground costs are differentiated.
pub fn sinkhorn_divergence(z0: &Matrix, z1: &Matrix, cfg: &SinkhornConfig) -> Result<DivGrad> {
    if z0.cols() != z1.cols() {
        return Err(Error::ShapeMismatch {
            op: "sinkhorn_divergence",
            detail: format!("column counts differ: {} vs {}", z0.cols(), z1.cols()),
        });
    }
    let eps = cfg.epsilon;

    let cost01 = cost_matrix(z0, z1, cfg.power)?;
    let cost00 = cost_matrix(z0, z0, cfg.power)?;
    let cost11 = cost_matrix(z1, z1, cfg.power)?;
    let tp01 = sinkhorn_plan(&cost01, cfg)?;
    let tp00 = sinkhorn_plan(&cost00, cfg)?;
    let tp11 = sinkhorn_plan(&cost11, cfg)?;

    let value = entropic_objective(&tp01.plan, &cost01, eps)
        - 0.5 * entropic_objective(&tp00.plan, &cost00, eps)
        - 0.5 * entropic_objective(&tp11.plan, &cost11, eps);

    let (mut grad0, mut grad1) = plan_cost_gradients(&tp01.plan, z0, z1, cfg.power, 1.0);
    let (s0a, s0b) = plan_cost_gradients(&tp00.plan, z0, z0, cfg.power, -0.5);
    grad0.add_scaled(&s0a, 1.0)?;
    grad0.add_scaled(&s0b, 1.0)?;
    let (s1a, s1b) = plan_cost_gradients(&tp11.plan, z1, z1, cfg.power, -0.5);
    grad1.add_scaled(&s1a, 1.0)?;
    grad1.add_scaled(&s1b, 1.0)?;

    Ok(DivGrad { value, grad0, grad1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, rel_err, Rng};

    fn random_batch(rng: &mut Rng, n: usize, d: usize, shift: f64) -> Matrix {
        let data = (0..n * d).map(|_| rng.normal(shift, 1.0)).collect();
        Matrix::from_vec(n, d, data).unwrap()
    }

    /// Exact OT oracle for equal batch sizes and uniform marginals: by
    /// Birkhoff's theorem the optimum sits on a permutation, so enumerate
    /// all of them.
    fn exact_ot_oracle(cost: &Matrix) -> f64 {
        let n = cost.rows();
        assert_eq!(n, cost.cols());
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut perm, 0, &mut |p| {
            let total: f64 = p.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
            if total < best {
                best = total;
            }
        });
        best / n as f64
    }

    fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == items.len() {
            visit(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, visit);
            items.swap(k, i);
        }
    }

    #[test]
    fn single_coupling_is_forced() {
        let cost = Matrix::from_rows(&[vec![3.7]]).unwrap();
        let tp = sinkhorn_plan(&cost, &SinkhornConfig::new(0.5)).unwrap();
        assert_eq!(tp.plan[(0, 0)], 1.0);
        assert_eq!(tp.residual, 0.0);
        assert!(tp.converged);
    }

    #[test]
    fn two_by_two_matches_exhaustive_coupling_search() {
        // Couplings with uniform marginals form the one-parameter family
        // [[t, 0.5-t], [0.5-t, t]]; minimize the entropic objective on a
        // fine grid as the oracle.
        let m = 1.0;
        let eps = 1e-3;
        let cost = Matrix::from_rows(&[vec![0.0, m], vec![m, 0.0]]).unwrap();
        let mut cfg = SinkhornConfig::new(eps);
        cfg.max_iter = 10_000;
        cfg.tol = 1e-10;
        let tp = sinkhorn_plan(&cost, &cfg).unwrap();
        assert!(tp.converged);

        let objective = |t: f64| {
            let entries = [t, 0.5 - t, 0.5 - t, t];
            let costs = [0.0, m, m, 0.0];
            let mut v = 0.0;
            for (p, c) in entries.iter().zip(&costs) {
                v += p * c;
                if *p > 0.0 {
                    v += eps * p * p.ln();
                }
            }
            v
        };
        let mut best_t = 0.0;
        let mut best = f64::INFINITY;
        for step in 0..=500_000 {
            let t = 0.5 * step as f64 / 500_000.0;
            let v = objective(t);
            if v < best {
                best = v;
                best_t = t;
            }
        }
        let oracle = [best_t, 0.5 - best_t, 0.5 - best_t, best_t];
        for (idx, expect) in oracle.iter().enumerate() {
            let got = tp.plan.data()[idx];
            assert!(
                (got - expect).abs() < 1e-3,
                "plan entry {idx}: {got} vs oracle {expect}"
            );
        }
        // And the qualitative shape: nearly all mass on the zero-cost diagonal.
        assert!(tp.plan[(0, 0)] > 0.49);
        assert!(tp.plan[(0, 1)] < 0.01);
    }

    #[test]
    fn identical_point_sets_concentrate_on_the_diagonal() {
        // Five well-separated collinear points; ε = 0.01 · median cost.
        let z = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0], vec![4.0]])
            .unwrap();
        let cost = cost_matrix(&z, &z, 2).unwrap();
        let mut cfg = SinkhornConfig::new(0.01 * median_cost(&cost));
        cfg.max_iter = 5_000;
        let tp = sinkhorn_plan(&cost, &cfg).unwrap();
        assert!(tp.converged);
        for i in 0..5 {
            assert!(
                tp.plan[(i, i)] >= 0.99 / 5.0,
                "diagonal entry {i} carries {} of the row mass",
                tp.plan[(i, i)] * 5.0
            );
        }
    }

    #[test]
    fn converged_plans_satisfy_marginals_within_tol() {
        let mut rng = Rng::from_seed(808);
        let z0 = random_batch(&mut rng, 6, 2, 0.0);
        let z1 = random_batch(&mut rng, 4, 2, 1.0);
        let cost = cost_matrix(&z0, &z1, 2).unwrap();
        let cfg = SinkhornConfig::new(0.1 * median_cost(&cost));
        let tp = sinkhorn_plan(&cost, &cfg).unwrap();
        assert!(tp.converged, "well-conditioned problem should converge");
        assert!(tp.plan.data().iter().all(|p| *p >= 0.0));

        let mut row_res = 0.0;
        for i in 0..6 {
            let s: f64 = (0..4).map(|j| tp.plan[(i, j)]).sum();
            row_res += (s - 1.0 / 6.0).abs();
        }
        let mut col_res = 0.0;
        for j in 0..4 {
            let s: f64 = (0..6).map(|i| tp.plan[(i, j)]).sum();
            col_res += (s - 1.0 / 4.0).abs();
        }
        assert!(row_res < cfg.tol, "row residual {row_res}");
        assert!(col_res < cfg.tol, "column residual {col_res}");
    }

    #[test]
    fn rejects_negative_or_nan_cost_and_bad_config() {
        let bad = Matrix::from_rows(&[vec![0.0, -1.0]]).unwrap();
        assert!(sinkhorn_plan(&bad, &SinkhornConfig::new(0.1)).is_err());
        let nan = Matrix::from_rows(&[vec![f64::NAN]]).unwrap();
        assert!(sinkhorn_plan(&nan, &SinkhornConfig::new(0.1)).is_err());
        let ok = Matrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(sinkhorn_plan(&ok, &SinkhornConfig::new(0.0)).is_err());
        let mut cfg = SinkhornConfig::new(0.1);
        cfg.power = 3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn singleton_wasserstein_is_the_plain_cost() {
        let z0 = Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let z1 = Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let mut cfg = SinkhornConfig::new(0.05);
        cfg.power = 2;
        assert_eq!(wasserstein_eps(&z0, &z1, &cfg).unwrap(), 25.0);
        cfg.power = 1;
        assert_eq!(wasserstein_eps(&z0, &z1, &cfg).unwrap(), 5.0);
    }

    #[test]
    fn small_eps_matches_permutation_brute_force() {
        let mut rng = Rng::from_seed(909);
        for _ in 0..5 {
            let z0 = random_batch(&mut rng, 4, 2, 0.0);
            let z1 = random_batch(&mut rng, 4, 2, 2.0);
            let cost = cost_matrix(&z0, &z1, 2).unwrap();
            let exact = exact_ot_oracle(&cost);
            let mut cfg = SinkhornConfig::new(1e-3);
            cfg.max_iter = 500_000;
            cfg.tol = 1e-9;
            let got = wasserstein_eps(&z0, &z1, &cfg).unwrap();
            assert!(
                (got - exact).abs() / exact.abs() < 1e-2,
                "entropic {got} vs exact {exact}"
            );
        }
    }

    #[test]
    fn transport_cost_vanishes_on_identical_batches_at_small_eps() {
        let z = Matrix::from_rows(&[vec![0.0], vec![2.0], vec![4.0], vec![6.0]]).unwrap();
        let cost = cost_matrix(&z, &z, 2).unwrap();
        let mut cfg = SinkhornConfig::new(1e-3 * median_cost(&cost));
        cfg.max_iter = 10_000;
        let tp = sinkhorn_plan(&cost, &cfg).unwrap();
        let transport: f64 = tp
            .plan
            .data()
            .iter()
            .zip(cost.data())
            .map(|(p, c)| p * c)
            .sum();
        assert!(
            transport < 1e-6 * median_cost(&cost),
            "zero-cost diagonal coupling should absorb the mass, got ⟨Π,D⟩ = {transport}"
        );
    }

    #[test]
    fn divergence_of_batch_with_itself_is_zero() {
        let mut rng = Rng::from_seed(111);
        let z = random_batch(&mut rng, 6, 3, 0.0);
        let cfg = SinkhornConfig::relative_to(&z, &z, 0.1, 2).unwrap();
        let out = sinkhorn_divergence(&z, &z, &cfg).unwrap();
        assert!(
            out.value.abs() <= 1e-6,
            "debiasing must cancel the self terms, got {}",
            out.value
        );
    }

    #[test]
    fn divergence_decreases_as_clusters_approach() {
        let mut rng = Rng::from_seed(222);
        let z0 = random_batch(&mut rng, 8, 2, 0.0);
        let far = random_batch(&mut rng, 8, 2, 0.0);
        // Slide the second cluster from offset 5 toward offset 1 along x.
        let mut last = f64::INFINITY;
        for step in 0..5 {
            let offset = 5.0 - step as f64;
            let mut z1 = far.clone();
            for r in 0..8 {
                z1.row_mut(r)[0] += offset;
            }
            let cfg = SinkhornConfig::relative_to(&z0, &z1, 0.1, 2).unwrap();
            let v = sinkhorn_divergence(&z0, &z1, &cfg).unwrap().value;
            assert!(
                v < last,
                "divergence should shrink as clusters approach: {v} !< {last}"
            );
            assert!(v > 0.0, "separated clusters must score positive");
            last = v;
        }
    }

    #[test]
    fn envelope_gradient_matches_resolved_finite_differences() {
        let mut rng = Rng::from_seed(333);
        let (n0, n1, d) = (6, 6, 2);
        let z0 = random_batch(&mut rng, n0, d, 0.0);
        let z1 = random_batch(&mut rng, n1, d, 1.5);
        // Tight solver so the envelope assumption (plans at their optima)
        // holds to high accuracy.
        let mut cfg = SinkhornConfig::relative_to(&z0, &z1, 0.1, 2).unwrap();
        cfg.max_iter = 20_000;
        cfg.tol = 1e-12;
        let out = sinkhorn_divergence(&z0, &z1, &cfg).unwrap();

        let mut flat = z0.data().to_vec();
        flat.extend_from_slice(z1.data());
        let eval = |v: &[f64]| {
            let a = Matrix::from_vec(n0, d, v[..n0 * d].to_vec()).unwrap();
            let b = Matrix::from_vec(n1, d, v[n0 * d..].to_vec()).unwrap();
            sinkhorn_divergence(&a, &b, &cfg).unwrap().value
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
                rel_err(*a, *b) < 1e-2,
                "coordinate {idx}: analytic {a} vs finite diff {b}"
            );
        }
    }

    #[test]
    fn divergence_is_symmetric_within_tolerance() {
        let mut rng = Rng::from_seed(444);
        let z0 = random_batch(&mut rng, 5, 2, 0.0);
        let z1 = random_batch(&mut rng, 7, 2, 1.0);
        let mut cfg = SinkhornConfig::relative_to(&z0, &z1, 0.1, 2).unwrap();
        cfg.tol = 1e-9;
        cfg.max_iter = 10_000;
        let ab = sinkhorn_divergence(&z0, &z1, &cfg).unwrap().value;
        let ba = sinkhorn_divergence(&z1, &z0, &cfg).unwrap().value;
        assert!((ab - ba).abs() < 1e-6, "{ab} vs {ba}");
    }

    #[test]
    fn p1_cost_uses_euclidean_distances() {
        let z0 = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let z1 = Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let c = cost_matrix(&z0, &z1, 1).unwrap();
        assert_eq!(c[(0, 0)], 5.0);
        assert!((c[(1, 0)] - 13.0f64.sqrt()).abs() < 1e-15);
    }
}
