//! Debiased Sinkhorn divergence
//! `S_ε(α, β) = OT_ε(α, β) - ½ OT_ε(α, α) - ½ OT_ε(β, β)` with cost
//! `|x - y|^p`, where `OT_ε` is entropic OT regularized by
//! `ε KL(π | α ⊗ β)`.
//!
//! Iterations run in the log domain on dual potentials with ε-scaling:
//! ε starts at the largest cost entry and is halved down to the target.
//! During the coarse ε stages both potentials are updated simultaneously and
//! averaged with their previous values; the final stage alternates plain
//! Sinkhorn updates. The self terms `OT_ε(α, α)` use the one-potential
//! averaged update, which has a unique fixed point. Bitwise-identical inputs
//! short-circuit to zero.

use rayon::prelude::*;

use super::{check_same_dim, LossValueGrad, TransportError};
use crate::linalg::sq_dist;
use crate::measures::DiscreteMeasure;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    pub p: f64,
    pub epsilon: f64,
    /// Iteration budget per OT_ε solve (all ε stages together).
    pub max_iter: usize,
    /// Target L1 marginal violation.
    pub tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self { p: 2.0, epsilon: 1e-2, max_iter: 10_000, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornOutput {
    pub loss: LossValueGrad,
    /// All three inner solves reached `tol` within `max_iter`.
    pub converged: bool,
    /// Total iterations over the three solves.
    pub iterations: usize,
}

const STAGE_ITERS: usize = 20;
const STAGE_TOL: f64 = 1e-3;

struct Problem<'a> {
    n: usize,
    m: usize,
    /// row-major n x m
    cost: Vec<f64>,
    /// row-major m x n (unused when symmetric)
    cost_t: Vec<f64>,
    log_a: &'a [f64],
    log_b: &'a [f64],
}

fn cost_fn(d2: f64, p: f64) -> f64 {
    if p == 2.0 {
        d2
    } else {
        d2.sqrt().powf(p)
    }
}

fn cost_matrix(x: &[f64], y: &[f64], dim: usize, p: f64) -> Vec<f64> {
    x.par_chunks_exact(dim)
        .flat_map_iter(|xi| y.chunks_exact(dim).map(move |yj| cost_fn(sq_dist(xi, yj), p)))
        .collect()
}

fn transpose(c: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            t[j * n + i] = c[i * m + j];
        }
    }
    t
}

/// out_i = -ε log Σ_j exp(log_w_j + (h_j - C_ij)/ε) for a row-major C.
fn softmin(eps: f64, c: &[f64], rows: usize, cols: usize, log_w: &[f64], h: &[f64]) -> Vec<f64> {
    debug_assert_eq!(c.len(), rows * cols);
    let inv = 1.0 / eps;
    let shift: Vec<f64> = log_w.iter().zip(h).map(|(l, hj)| l + hj * inv).collect();
    c.par_chunks_exact(cols)
        .map(|row| {
            let mut mx = f64::NEG_INFINITY;
            for (s, cij) in shift.iter().zip(row) {
                mx = mx.max(s - cij * inv);
            }
            let mut acc = 0.0;
            for (s, cij) in shift.iter().zip(row) {
                acc += (s - cij * inv - mx).exp();
            }
            -eps * (mx + acc.ln())
        })
        .collect()
}

fn marginal_error(a: &[f64], f_old: &[f64], f_new: &[f64], eps: f64) -> f64 {
    a.iter().zip(f_old.iter().zip(f_new)).map(|(ai, (fo, fnew))| ai * (((fo - fnew) / eps).exp() - 1.0).abs()).sum()
}

fn eps_schedule(target: f64, max_cost: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut e = max_cost;
    while e > target {
        out.push(e);
        e *= 0.5;
    }
    out.push(target);
    out
}

struct Solve {
    f: Vec<f64>,
    g: Vec<f64>,
    converged: bool,
    iterations: usize,
}

fn solve_asymmetric(pb: &Problem, cfg: &SinkhornConfig) -> Solve {
    let max_cost = pb.cost.iter().copied().fold(0.0, f64::max);
    let a: Vec<f64> = pb.log_a.iter().map(|l| l.exp()).collect();
    let b: Vec<f64> = pb.log_b.iter().map(|l| l.exp()).collect();
    let mut f = vec![0.0; pb.n];
    let mut g = vec![0.0; pb.m];
    let mut iterations = 0;
    let schedule = eps_schedule(cfg.epsilon, max_cost);
    let last = schedule.len() - 1;
    let mut converged = false;
    for (s, &eps) in schedule.iter().enumerate() {
        let (budget, tol) = if s < last { (STAGE_ITERS, STAGE_TOL.max(cfg.tol)) } else { (usize::MAX, cfg.tol) };
        let mut k = 0;
        while k < budget && iterations < cfg.max_iter {
            // simultaneous averaged updates keep f = g when both sides agree
            let err;
            if s == last {
                let ft = softmin(eps, &pb.cost, pb.n, pb.m, pb.log_b, &g);
                err = marginal_error(&a, &f, &ft, eps);
                f = ft;
                g = softmin(eps, &pb.cost_t, pb.m, pb.n, pb.log_a, &f);
            } else {
                // averaged simultaneous updates while ε is still large
                let ft = softmin(eps, &pb.cost, pb.n, pb.m, pb.log_b, &g);
                let gt = softmin(eps, &pb.cost_t, pb.m, pb.n, pb.log_a, &f);
                err = marginal_error(&a, &f, &ft, eps) + marginal_error(&b, &g, &gt, eps);
                f.iter_mut().zip(&ft).for_each(|(x, t)| *x = 0.5 * (*x + t));
                g.iter_mut().zip(&gt).for_each(|(x, t)| *x = 0.5 * (*x + t));
            }
            iterations += 1;
            k += 1;
            if err < tol {
                if s == last {
                    converged = true;
                }
                break;
            }
        }
    }
    Solve { f, g, converged, iterations }
}

fn solve_symmetric(pb: &Problem, cfg: &SinkhornConfig) -> Solve {
    let max_cost = pb.cost.iter().copied().fold(0.0, f64::max);
    let a: Vec<f64> = pb.log_a.iter().map(|l| l.exp()).collect();
    let mut f = vec![0.0; pb.n];
    let mut iterations = 0;
    let schedule = eps_schedule(cfg.epsilon, max_cost);
    let last = schedule.len() - 1;
    let mut converged = false;
    for (s, &eps) in schedule.iter().enumerate() {
        let (budget, tol) = if s < last { (STAGE_ITERS, STAGE_TOL.max(cfg.tol)) } else { (usize::MAX, cfg.tol) };
        let mut k = 0;
        while k < budget && iterations < cfg.max_iter {
            let t = softmin(eps, &pb.cost, pb.n, pb.n, pb.log_a, &f);
            let err = marginal_error(&a, &f, &t, eps);
            f.iter_mut().zip(&t).for_each(|(fi, ti)| *fi = 0.5 * (*fi + ti));
            iterations += 1;
            k += 1;
            if err < tol {
                if s == last {
                    converged = true;
                }
                break;
            }
        }
    }
    let g = f.clone();
    Solve { f, g, converged, iterations }
}

fn cost_grad(xi: &[f64], yj: &[f64], p: f64, out: &mut [f64], weight: f64) {
    if p == 2.0 {
        for k in 0..xi.len() {
            out[k] += weight * 2.0 * (xi[k] - yj[k]);
        }
    } else {
        let r = sq_dist(xi, yj).sqrt();
        if r == 0.0 {
            return;
        }
        let s = weight * p * r.powf(p - 2.0);
        for k in 0..xi.len() {
            out[k] += s * (xi[k] - yj[k]);
        }
    }
}

/// Σ_j π_ij ∇_x c(x_i, y_j) with π recovered from the potentials.
#[allow(clippy::too_many_arguments)]
fn transport_gradient(
    x: &DiscreteMeasure,
    y: &DiscreteMeasure,
    pb: &Problem,
    f: &[f64],
    g: &[f64],
    eps: f64,
    p: f64,
) -> Vec<f64> {
    let d = x.dim();
    let m = pb.m;
    (0..pb.n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut gi = vec![0.0; d];
            let row = &pb.cost[i * m..(i + 1) * m];
            for j in 0..m {
                let pij = (pb.log_a[i] + pb.log_b[j] + (f[i] + g[j] - row[j]) / eps).exp();
                if pij > 0.0 {
                    cost_grad(x.support(i), y.support(j), p, &mut gi, pij);
                }
            }
            gi
        })
        .collect()
}

/// Debiased Sinkhorn divergence with gradient on `mu`'s supports and weights.
/// Non-convergence is reported through [`SinkhornOutput::converged`] and a
/// log warning; the value is still returned.
pub fn sinkhorn_divergence(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cfg: &SinkhornConfig,
) -> Result<SinkhornOutput, TransportError> {
    check_same_dim(mu.dim(), nu.dim())?;
    if !(cfg.epsilon > 0.0) {
        return Err(TransportError::InvalidParameter(format!("epsilon must be positive, got {}", cfg.epsilon)));
    }
    if !(cfg.p >= 1.0) {
        return Err(TransportError::InvalidParameter(format!("p must be >= 1, got {}", cfg.p)));
    }
    let d = mu.dim();
    let (n, m) = (mu.len(), nu.len());
    if mu == nu {
        // S(α, α) = 0 by construction, potentials cancel
        let zero = LossValueGrad { value: 0.0, grad: vec![0.0; n * d], weight_grad: Some(vec![0.0; n]) };
        return Ok(SinkhornOutput { loss: zero, converged: true, iterations: 0 });
    }
    let log_a: Vec<f64> = mu.weights().iter().map(|w| w.ln()).collect();
    let log_b: Vec<f64> = nu.weights().iter().map(|w| w.ln()).collect();

    let cost = cost_matrix(mu.supports(), nu.supports(), d, cfg.p);
    let cost_t = transpose(&cost, n, m);
    let ab = Problem { n, m, cost, cost_t, log_a: &log_a, log_b: &log_b };
    let s_ab = solve_asymmetric(&ab, cfg);
    let grad_ab = transport_gradient(mu, nu, &ab, &s_ab.f, &s_ab.g, cfg.epsilon, cfg.p);
    drop(ab);

    let aa = Problem {
        n,
        m: n,
        cost: cost_matrix(mu.supports(), mu.supports(), d, cfg.p),
        cost_t: Vec::new(),
        log_a: &log_a,
        log_b: &log_a,
    };
    let s_aa = solve_symmetric(&aa, cfg);
    let grad_aa = transport_gradient(mu, mu, &aa, &s_aa.f, &s_aa.g, cfg.epsilon, cfg.p);
    drop(aa);

    let bb = Problem {
        n: m,
        m,
        cost: cost_matrix(nu.supports(), nu.supports(), d, cfg.p),
        cost_t: Vec::new(),
        log_a: &log_b,
        log_b: &log_b,
    };
    let s_bb = solve_symmetric(&bb, cfg);

    let a = mu.weights();
    let b = nu.weights();
    let mut value = 0.0;
    for i in 0..n {
        value += a[i] * (s_ab.f[i] - s_aa.f[i]);
    }
    for j in 0..m {
        value += b[j] * (s_ab.g[j] - s_bb.f[j]);
    }
    let grad: Vec<f64> = grad_ab.iter().zip(&grad_aa).map(|(x, y)| x - y).collect();
    let weight_grad: Vec<f64> = s_ab.f.iter().zip(&s_aa.f).map(|(x, y)| x - y).collect();
    let converged = s_ab.converged && s_aa.converged && s_bb.converged;
    if !converged {
        log::warn!(
            "sinkhorn did not reach tol {} within {} iterations (eps {})",
            cfg.tol,
            cfg.max_iter,
            cfg.epsilon
        );
    }
    Ok(SinkhornOutput {
        loss: LossValueGrad { value, grad, weight_grad: Some(weight_grad) },
        converged,
        iterations: s_ab.iterations + s_aa.iterations + s_bb.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(eps: f64) -> SinkhornConfig {
        SinkhornConfig { epsilon: eps, ..Default::default() }
    }

    #[test]
    fn identical_measures_vanish() {
        let mu = DiscreteMeasure::from_unnormalized(2, vec![0.0, 0.0, 1.0, 0.5, -0.3, 0.8], vec![1.0, 2.0, 3.0]).unwrap();
        let out = sinkhorn_divergence(&mu, &mu, &cfg(0.05)).unwrap();
        assert!(out.loss.value.abs() < 1e-9, "{}", out.loss.value);
        assert!(out.converged);
        assert!(out.loss.grad.iter().all(|g| g.abs() < 1e-8));
    }

    #[test]
    fn single_atoms_give_the_cost_for_any_epsilon() {
        let x = DiscreteMeasure::from_points(&[[0.0, 0.0, 1.0]]).unwrap();
        let y = DiscreteMeasure::from_points(&[[1.0, 2.0, -1.0]]).unwrap();
        for eps in [1e-3, 0.1, 10.0] {
            let out = sinkhorn_divergence(&x, &y, &cfg(eps)).unwrap();
            assert!((out.loss.value - 9.0).abs() < 1e-9, "eps {eps}: {}", out.loss.value);
        }
    }

    #[test]
    fn invalid_epsilon() {
        let x = DiscreteMeasure::from_points(&[[0.0, 0.0]]).unwrap();
        assert!(sinkhorn_divergence(&x, &x, &cfg(0.0)).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pts = [[0.1, 0.3], [0.9, -0.2], [0.4, 0.8], [-0.5, 0.1]];
        let x = DiscreteMeasure::from_unnormalized(2, pts.iter().flatten().copied().collect(), vec![1.0, 2.0, 1.5, 0.5])
            .unwrap();
        let y = DiscreteMeasure::from_points(&[[0.5, 0.5], [1.0, 0.0], [-0.2, -0.4]]).unwrap();
        let c = SinkhornConfig { epsilon: 0.05, tol: 1e-13, max_iter: 100_000, ..Default::default() };
        let out = sinkhorn_divergence(&x, &y, &c).unwrap();
        let h = 1e-6;
        for k in 0..x.supports().len() {
            let mut sp = x.supports().to_vec();
            let mut sm = sp.clone();
            sp[k] += h;
            sm[k] -= h;
            let vp = sinkhorn_divergence(&x.with_supports(sp).unwrap(), &y, &c).unwrap().loss.value;
            let vm = sinkhorn_divergence(&x.with_supports(sm).unwrap(), &y, &c).unwrap().loss.value;
            let fd = (vp - vm) / (2.0 * h);
            assert!((fd - out.loss.grad[k]).abs() < 1e-6, "coord {k}: fd {fd} vs {}", out.loss.grad[k]);
        }
    }
}
