use super::TransportError;

/// A piece of the monotone coupling: `mass` moved from `u[i]` to `v[j]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSegment {
    pub i: usize,
    pub j: usize,
    pub mass: f64,
}

/// Monotone (quantile) coupling between two weighted point sets on the line,
/// with matching dual potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling1d {
    pub segments: Vec<CouplingSegment>,
    /// `W_p^p`.
    pub cost: f64,
    /// Potentials with `phi[i] + psi[j] = |u_i - v_j|^p` on every segment.
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

#[inline]
pub(crate) fn cost_p(d: f64, p: f64) -> f64 {
    if p == 2.0 {
        d * d
    } else if p == 1.0 {
        d.abs()
    } else {
        d.abs().powf(p)
    }
}

/// Derivative of `|d|^p` with respect to `d`.
#[inline]
pub(crate) fn cost_p_grad(d: f64, p: f64) -> f64 {
    if p == 2.0 {
        2.0 * d
    } else if d == 0.0 {
        0.0
    } else {
        p * d.abs().powf(p - 1.0) * d.signum()
    }
}

pub(crate) fn argsort(vals: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    // ties resolved by index, i.e. the order a stable sort would give
    idx.sort_unstable_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
    idx
}

fn cumulative(order: &[usize], w: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut c: Vec<f64> = order
        .iter()
        .map(|&i| {
            acc += w[i];
            acc
        })
        .collect();
    if let Some(last) = c.last_mut() {
        *last = 1.0;
    }
    c
}

fn check_weights(vals: &[f64], w: &[f64]) -> Result<(), TransportError> {
    if vals.len() != w.len() {
        return Err(TransportError::LengthMismatch { values: vals.len(), weights: w.len() });
    }
    if vals.is_empty() {
        return Err(TransportError::Empty);
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-9 || w.iter().any(|x| !(*x >= 0.0)) {
        return Err(TransportError::WeightSum(s));
    }
    Ok(())
}

/// Walks the merged CDF breakpoints of both sorted supports. Each
/// elementary interval `[z_k, z_{k+1}]` of the quantile axis becomes one
/// segment.
pub(crate) fn coupling_sorted(
    u_vals: &[f64],
    u_w: &[f64],
    u_order: &[usize],
    v_vals: &[f64],
    v_w: &[f64],
    v_order: &[usize],
    p: f64,
    with_potentials: bool,
) -> Coupling1d {
    let cu = cumulative(u_order, u_w);
    let cv = cumulative(v_order, v_w);
    let (n, m) = (u_order.len(), v_order.len());
    let mut segments = Vec::with_capacity(n + m);
    let mut phi = if with_potentials { vec![0.0; n] } else { Vec::new() };
    let mut psi = if with_potentials { vec![0.0; m] } else { Vec::new() };
    let (mut a, mut b) = (0usize, 0usize);
    let mut prev = 0.0;
    let mut cost = 0.0;
    let mut last: Option<(usize, usize)> = None;
    while a < n && b < m {
        let next = cu[a].min(cv[b]);
        let mass = next - prev;
        let (i, j) = (u_order[a], v_order[b]);
        if mass > 0.0 {
            let c = cost_p(u_vals[i] - v_vals[j], p);
            cost += mass * c;
            segments.push(CouplingSegment { i, j, mass });
            if with_potentials {
                match last {
                    None => {
                        phi[i] = 0.0;
                        psi[j] = c;
                    }
                    Some((li, _)) if li == i => psi[j] = c - phi[i],
                    Some((_, lj)) if lj == j => phi[i] = c - psi[j],
                    Some((_, lj)) => {
                        // both indices advanced at a shared breakpoint: close
                        // the staircase through a zero-mass step (i, lj)
                        phi[i] = cost_p(u_vals[i] - v_vals[lj], p) - psi[lj];
                        psi[j] = c - phi[i];
                    }
                }
            }
            last = Some((i, j));
        }
        prev = next;
        if cu[a] <= next {
            a += 1;
        }
        if cv[b] <= next {
            b += 1;
        }
    }
    Coupling1d { segments, cost, phi, psi }
}

/// Optimal monotone coupling between `(u_vals, u_weights)` and
/// `(v_vals, v_weights)` for cost `|x - y|^p`.
pub fn coupling_1d(
    u_vals: &[f64],
    u_weights: &[f64],
    v_vals: &[f64],
    v_weights: &[f64],
    p: f64,
) -> Result<Coupling1d, TransportError> {
    check_weights(u_vals, u_weights)?;
    check_weights(v_vals, v_weights)?;
    if !(p >= 1.0) {
        return Err(TransportError::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    let uo = argsort(u_vals);
    let vo = argsort(v_vals);
    Ok(coupling_sorted(u_vals, u_weights, &uo, v_vals, v_weights, &vo, p, true))
}

/// `W_p^p` between two weighted point sets on the line, by integrating the
/// quantile difference over the merged CDF breakpoints.
pub fn wasserstein_1d(
    u_vals: &[f64],
    u_weights: &[f64],
    v_vals: &[f64],
    v_weights: &[f64],
    p: f64,
) -> Result<f64, TransportError> {
    Ok(coupling_1d(u_vals, u_weights, v_vals, v_weights, p)?.cost)
}
