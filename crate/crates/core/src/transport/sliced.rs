use rayon::prelude::*;

use super::one_d::{argsort, cost_p_grad, coupling_sorted};
use super::{check_same_dim, LossValueGrad, ProjectionSet, TransportError};
use crate::measures::DiscreteMeasure;

/// Projections of the supports relative to `anchor`. Anchoring at a support
/// of the first measure makes the result exactly translation invariant
/// whenever the translated coordinates are exact.
fn project(m: &DiscreteMeasure, theta: &[f64], anchor: &[f64]) -> Vec<f64> {
    let d = m.dim();
    m.supports()
        .chunks_exact(d)
        .map(|x| {
            let mut s = 0.0;
            for k in 0..d {
                s += (x[k] - anchor[k]) * theta[k];
            }
            s
        })
        .collect()
}

struct SliceResult {
    value: f64,
    /// d cost / d (θ·x_i) for each support of mu.
    slope: Vec<f64>,
    /// dual potential of each support of mu
    phi: Vec<f64>,
}

fn one_slice(mu: &DiscreteMeasure, nu: &DiscreteMeasure, theta: &[f64], p: f64, with_grad: bool) -> SliceResult {
    let anchor = mu.support(0);
    let pu = project(mu, theta, anchor);
    let pv = project(nu, theta, anchor);
    let ou = argsort(&pu);
    let ov = argsort(&pv);
    let c = coupling_sorted(&pu, mu.weights(), &ou, &pv, nu.weights(), &ov, p, with_grad);
    let mut slope = Vec::new();
    if with_grad {
        slope = vec![0.0; mu.len()];
        for s in &c.segments {
            slope[s.i] += s.mass * cost_p_grad(pu[s.i] - pv[s.j], p);
        }
    }
    SliceResult { value: c.cost, slope, phi: c.phi }
}

fn check(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64, proj: &ProjectionSet) -> Result<(), TransportError> {
    check_same_dim(mu.dim(), nu.dim())?;
    check_same_dim(mu.dim(), proj.dim())?;
    if !(p >= 1.0) {
        return Err(TransportError::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    Ok(())
}

/// `(1/L) Σ_l W_p^p(θ_l♯mu, θ_l♯nu)` with its gradient on mu's supports and
/// weights.
///
/// The support gradient of support `i` is `(1/L) Σ_l Σ_{segments of i}
/// mass · ∂_a|a - b|^p · θ_l`. The weight gradient is the projection-averaged
/// 1D dual potential, defined up to an additive constant.
pub fn sliced_wasserstein(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    proj: &ProjectionSet,
) -> Result<LossValueGrad, TransportError> {
    check(mu, nu, p, proj)?;
    let num = proj.len();
    let slices: Vec<SliceResult> =
        (0..num).into_par_iter().map(|l| one_slice(mu, nu, proj.direction(l), p, true)).collect();

    let d = mu.dim();
    let n = mu.len();
    let inv = 1.0 / num as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; n * d];
    let mut weight_grad = vec![0.0; n];
    for (l, s) in slices.iter().enumerate() {
        value += s.value;
        let theta = proj.direction(l);
        for i in 0..n {
            let g = s.slope[i];
            for k in 0..d {
                grad[i * d + k] += g * theta[k];
            }
            weight_grad[i] += s.phi[i];
        }
    }
    grad.iter_mut().for_each(|g| *g *= inv);
    weight_grad.iter_mut().for_each(|g| *g *= inv);
    Ok(LossValueGrad { value: value * inv, grad, weight_grad: Some(weight_grad) })
}

/// Value-only variant of [`sliced_wasserstein`].
pub fn sliced_wasserstein_value(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    proj: &ProjectionSet,
) -> Result<f64, TransportError> {
    let per = sliced_wasserstein_per_projection(mu, nu, p, proj)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// The individual `W_p^p(θ_l♯mu, θ_l♯nu)` terms.
pub fn sliced_wasserstein_per_projection(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    proj: &ProjectionSet,
) -> Result<Vec<f64>, TransportError> {
    check(mu, nu, p, proj)?;
    Ok((0..proj.len()).into_par_iter().map(|l| one_slice(mu, nu, proj.direction(l), p, false).value).collect())
}
