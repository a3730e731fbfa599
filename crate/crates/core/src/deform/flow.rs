//! Stationary Gaussian-RBF velocity fields and their time-one flow maps.
//!
//! `v(x) = Σ_k c_k exp(-|x - m_k|^2 / (2σ^2))` is smooth and globally
//! Lipschitz, so the ODE `dΦ/dt = v(Φ)`, `Φ(p, 0) = p` has a unique solution
//! and the time-one map is a diffeomorphism. Integration uses a fixed step on
//! `[0, 1]`; gradients are exact reverse-mode derivatives of the discrete
//! scheme, replayed from the stored per-step states.

use rayon::prelude::*;

use super::DeformError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    Euler,
    #[default]
    Rk4,
}

impl std::str::FromStr for Integrator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euler" => Ok(Self::Euler),
            "rk4" => Ok(Self::Rk4),
            other => Err(format!("unknown integrator '{other}' (euler|rk4)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowConfig {
    pub integrator: Integrator,
    pub steps: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { integrator: Integrator::Rk4, steps: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbfVelocityField {
    dim: usize,
    /// K x dim, row-major
    centers: Vec<f64>,
    /// K x dim, row-major
    coefficients: Vec<f64>,
    sigma: f64,
}

impl RbfVelocityField {
    pub fn new(dim: usize, centers: Vec<f64>, coefficients: Vec<f64>, sigma: f64) -> Result<Self, DeformError> {
        if dim == 0 || centers.is_empty() || centers.len() % dim != 0 || centers.len() != coefficients.len() {
            return Err(DeformError::Config("centers and coefficients must both be K x dim".into()));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(DeformError::Config(format!("bandwidth must be positive, got {sigma}")));
        }
        Ok(Self { dim, centers, coefficients, sigma })
    }

    /// Zero field with the given centers.
    pub fn zeros(dim: usize, centers: Vec<f64>, sigma: f64) -> Result<Self, DeformError> {
        let c = vec![0.0; centers.len()];
        Self::new(dim, centers, c, sigma)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_centers(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coefficients
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn set_sigma(&mut self, sigma: f64) {
        assert!(sigma > 0.0);
        self.sigma = sigma;
    }

    /// Upper bound on the global Lipschitz constant:
    /// `Σ_k |c_k| / (σ e^{1/2})`.
    pub fn lipschitz_bound(&self) -> f64 {
        let s: f64 = self.coefficients.chunks_exact(self.dim).map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).sum();
        s / (self.sigma * 0.5f64.exp())
    }

    /// Whether every discrete step `x ↦ x + h Ψ(x)` is provably injective,
    /// i.e. `h · Lip(Ψ) < 1`. For RK4, `Lip(Ψ) ≤ L (1 + hL/2 + (hL)^2/6 +
    /// (hL)^3/24)`. The composed map is then injective on all of `R^d`.
    pub fn injectivity_certified(&self, cfg: &FlowConfig) -> bool {
        let h = 1.0 / cfg.steps as f64;
        let hl = h * self.lipschitz_bound();
        let step = match cfg.integrator {
            Integrator::Euler => hl,
            Integrator::Rk4 => hl * (1.0 + hl / 2.0 + hl * hl / 6.0 + hl * hl * hl / 24.0),
        };
        step < 1.0
    }

    pub fn velocity(&self, x: &[f64], out: &mut [f64]) {
        let mut phi = vec![0.0; self.num_centers()];
        self.kernels(x, &mut phi);
        self.combine(&phi, out);
    }

    /// Gaussian kernel values `exp(-|x - m_k|^2 / 2σ^2)` at `x`.
    fn kernels(&self, x: &[f64], phi: &mut [f64]) {
        let inv = 1.0 / (2.0 * self.sigma * self.sigma);
        for (p, m) in phi.iter_mut().zip(self.centers.chunks_exact(self.dim)) {
            *p = (-crate::linalg::sq_dist(x, m) * inv).exp();
        }
    }

    /// `Σ_k c_k φ_k`.
    fn combine(&self, phi: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (&p, c) in phi.iter().zip(self.coefficients.chunks_exact(d)) {
            for k in 0..d {
                out[k] += c[k] * p;
            }
        }
    }

    /// Adds the vector-Jacobian products of `v` at `x` (kernel values `phi`)
    /// with cotangent `u`: into `x_bar` (w.r.t. x), `coef_bar` (w.r.t.
    /// coefficients) and returns the contribution w.r.t. σ.
    fn vjp(&self, x: &[f64], phi: &[f64], u: &[f64], x_bar: &mut [f64], coef_bar: &mut [f64]) -> f64 {
        let d = self.dim;
        let s2 = self.sigma * self.sigma;
        let mut sigma_bar = 0.0;
        for (k, (m, c)) in self.centers.chunks_exact(d).zip(self.coefficients.chunks_exact(d)).enumerate() {
            let p = phi[k];
            if p == 0.0 {
                continue;
            }
            let cu: f64 = c.iter().zip(u).map(|(a, b)| a * b).sum();
            let w = cu * p / s2;
            let mut r2 = 0.0;
            for j in 0..d {
                let dx = x[j] - m[j];
                coef_bar[k * d + j] += p * u[j];
                x_bar[j] -= w * dx;
                r2 += dx * dx;
            }
            sigma_bar += w * r2 / self.sigma;
        }
        sigma_bar
    }
}

/// Per-step states of a forward integration, needed by [`flow_gradient`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowTape {
    pub dim: usize,
    pub config: Option<FlowConfig>,
    /// `steps + 1` snapshots of all points, the first being the input.
    pub states: Vec<Vec<f64>>,
    /// Kernel values at every stage of every step, laid out
    /// `[step][point][stage][center]`. Empty means recompute.
    pub kernels: Vec<f64>,
}

impl FlowTape {
    pub fn endpoints(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }
}

fn stages(integrator: Integrator) -> usize {
    match integrator {
        Integrator::Euler => 1,
        Integrator::Rk4 => 4,
    }
}

/// One step from `y` into `out`, recording the stage kernels into `phi`
/// (`stages x K`).
fn step_point(field: &RbfVelocityField, integrator: Integrator, h: f64, y: &[f64], out: &mut [f64], phi: &mut [f64]) {
    let d = y.len();
    let kc = field.num_centers();
    match integrator {
        Integrator::Euler => {
            field.kernels(y, phi);
            field.combine(phi, out);
            for k in 0..d {
                out[k] = y[k] + h * out[k];
            }
        }
        Integrator::Rk4 => {
            let mut ks = [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]];
            let mut z = y.to_vec();
            for s in 0..4 {
                let ph = &mut phi[s * kc..(s + 1) * kc];
                field.kernels(&z, ph);
                field.combine(ph, &mut ks[s]);
                let a = if s < 2 { 0.5 * h } else { h };
                for k in 0..d {
                    z[k] = y[k] + a * ks[s][k];
                }
            }
            for k in 0..d {
                out[k] = y[k] + h / 6.0 * (ks[0][k] + 2.0 * ks[1][k] + 2.0 * ks[2][k] + ks[3][k]);
            }
        }
    }
}

/// Integrates every point (row-major `n x dim`) from t = 0 to t = 1.
pub fn integrate_flow(field: &RbfVelocityField, points: &[f64], cfg: &FlowConfig) -> Result<FlowTape, DeformError> {
    let d = field.dim();
    if points.len() % d != 0 {
        return Err(DeformError::Config(format!("{} coordinates is not a multiple of {d}", points.len())));
    }
    if cfg.steps == 0 {
        return Err(DeformError::Config("flow needs at least one step".into()));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(DeformError::NonFinite { step: 0 });
    }
    let h = 1.0 / cfg.steps as f64;
    let n = points.len() / d;
    let per_point = stages(cfg.integrator) * field.num_centers();
    let mut kernels = vec![0.0; cfg.steps * n * per_point];
    let mut states = Vec::with_capacity(cfg.steps + 1);
    states.push(points.to_vec());
    for (step, phi) in kernels.chunks_exact_mut((n * per_point).max(1)).enumerate().take(cfg.steps) {
        let cur = states.last().expect("initial state");
        let mut next = vec![0.0; cur.len()];
        next.par_chunks_exact_mut(d)
            .zip(cur.par_chunks_exact(d))
            .zip(phi.par_chunks_exact_mut(per_point.max(1)))
            .for_each(|((o, y), ph)| step_point(field, cfg.integrator, h, y, o, ph));
        if next.iter().any(|x| !x.is_finite()) {
            return Err(DeformError::NonFinite { step: step + 1 });
        }
        states.push(next);
    }
    if states.len() != cfg.steps + 1 {
        // no points: nothing to integrate
        states.resize(cfg.steps + 1, Vec::new());
    }
    Ok(FlowTape { dim: d, config: Some(*cfg), states, kernels })
}

/// Gradients of `Σ_i <upstream_i, Φ(p_i, 1)>`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowGradient {
    /// K x dim
    pub coefficients: Vec<f64>,
    pub sigma: f64,
    /// n x dim, w.r.t. the input points
    pub points: Vec<f64>,
}

const GRAD_CHUNK: usize = 32;

struct PointGrad {
    coef: Vec<f64>,
    sigma: f64,
    point: Vec<f64>,
}

fn backward_point(field: &RbfVelocityField, cfg: &FlowConfig, tape: &FlowTape, idx: usize, upstream: &[f64], acc: &mut PointGrad) {
    let d = field.dim();
    let kc = field.num_centers();
    let n = tape.states[0].len() / d;
    let ns = stages(cfg.integrator);
    let h = 1.0 / cfg.steps as f64;
    let mut y_bar = upstream.to_vec();
    let mut scratch = vec![0.0; ns * kc];
    for step in (0..cfg.steps).rev() {
        let y = &tape.states[step][idx * d..(idx + 1) * d];
        let cached = !tape.kernels.is_empty();
        let at = (step * n + idx) * ns * kc;
        match cfg.integrator {
            Integrator::Euler => {
                let phi = if cached {
                    &tape.kernels[at..at + kc]
                } else {
                    field.kernels(y, &mut scratch);
                    &scratch[..]
                };
                let k_bar: Vec<f64> = y_bar.iter().map(|g| h * g).collect();
                let mut x_bar = vec![0.0; d];
                acc.sigma += field.vjp(y, phi, &k_bar, &mut x_bar, &mut acc.coef);
                for k in 0..d {
                    y_bar[k] += x_bar[k];
                }
            }
            Integrator::Rk4 => {
                // stage inputs z_s, from cached or recomputed kernels
                let mut zs = [y.to_vec(), vec![0.0; d], vec![0.0; d], vec![0.0; d]];
                let mut kv = vec![0.0; d];
                for s in 0..4 {
                    let ph = &mut scratch[s * kc..(s + 1) * kc];
                    if cached {
                        ph.copy_from_slice(&tape.kernels[at + s * kc..at + (s + 1) * kc]);
                    } else {
                        field.kernels(&zs[s], ph);
                    }
                    if s < 3 {
                        field.combine(ph, &mut kv);
                        let a = if s < 2 { 0.5 * h } else { h };
                        zs[s + 1] = (0..d).map(|k| y[k] + a * kv[k]).collect();
                    }
                }

                // cotangents of the stage velocities
                let w = [h / 6.0, h / 3.0, h / 3.0, h / 6.0];
                let mut k_bar: [Vec<f64>; 4] = std::array::from_fn(|s| y_bar.iter().map(|g| w[s] * g).collect());
                let mut y_in = y_bar.clone();
                let mut z_bar = vec![0.0; d];
                for s in (0..4).rev() {
                    z_bar.iter_mut().for_each(|x| *x = 0.0);
                    let ph = &scratch[s * kc..(s + 1) * kc];
                    acc.sigma += field.vjp(&zs[s], ph, &k_bar[s], &mut z_bar, &mut acc.coef);
                    for k in 0..d {
                        y_in[k] += z_bar[k];
                    }
                    if s > 0 {
                        // z_s = y + a_s k_{s-1}
                        let a = if s < 3 { 0.5 * h } else { h };
                        for k in 0..d {
                            k_bar[s - 1][k] += a * z_bar[k];
                        }
                    }
                }
                y_bar = y_in;
            }
        }
    }
    acc.point[idx * d..(idx + 1) * d].copy_from_slice(&y_bar);
}

/// Reverse accumulation through the stored integration steps.
pub fn flow_gradient(field: &RbfVelocityField, tape: &FlowTape, upstream: &[f64]) -> Result<FlowGradient, DeformError> {
    let cfg = tape.config.ok_or(DeformError::MissingTape)?;
    if tape.states.len() != cfg.steps + 1 {
        return Err(DeformError::MissingTape);
    }
    let d = field.dim();
    if tape.dim != d {
        return Err(DeformError::Config(format!("tape dimension {} does not match field dimension {d}", tape.dim)));
    }
    let n_coords = tape.states[0].len();
    if upstream.len() != n_coords {
        return Err(DeformError::Config(format!("upstream has {} entries, expected {n_coords}", upstream.len())));
    }
    let n = n_coords / d;
    let kd = field.coefficients().len();
    let chunks: Vec<PointGrad> = (0..n.div_ceil(GRAD_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = PointGrad { coef: vec![0.0; kd], sigma: 0.0, point: vec![0.0; n_coords] };
            for idx in (c * GRAD_CHUNK)..((c + 1) * GRAD_CHUNK).min(n) {
                backward_point(field, &cfg, tape, idx, &upstream[idx * d..(idx + 1) * d], &mut acc);
            }
            acc
        })
        .collect();
    let mut out = FlowGradient { coefficients: vec![0.0; kd], sigma: 0.0, points: vec![0.0; n_coords] };
    for (c, acc) in chunks.iter().enumerate() {
        for (o, g) in out.coefficients.iter_mut().zip(&acc.coef) {
            *o += g;
        }
        out.sigma += acc.sigma;
        let range = (c * GRAD_CHUNK * d)..(((c + 1) * GRAD_CHUNK).min(n) * d);
        out.points[range.clone()].copy_from_slice(&acc.point[range]);
    }
    Ok(out)
}

/// Greedy farthest-point subsample of `k` rows, starting from row 0.
pub fn farthest_point_subsample(points: &[f64], dim: usize, k: usize) -> Vec<usize> {
    let n = points.len() / dim;
    if n == 0 || k == 0 {
        return Vec::new();
    }
    let k = k.min(n);
    let mut chosen = vec![0usize];
    let mut dist: Vec<f64> = (0..n).map(|i| crate::linalg::sq_dist(&points[i * dim..(i + 1) * dim], &points[..dim])).collect();
    while chosen.len() < k {
        let (best, _) = dist
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bd), (i, &d)| if d > bd { (i, d) } else { (bi, bd) });
        chosen.push(best);
        let c = &points[best * dim..(best + 1) * dim];
        for i in 0..n {
            let d = crate::linalg::sq_dist(&points[i * dim..(i + 1) * dim], c);
            if d < dist[i] {
                dist[i] = d;
            }
        }
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_is_identity() {
        let f = RbfVelocityField::zeros(2, vec![0.0, 0.0, 1.0, 1.0], 0.5).unwrap();
        let p = vec![0.3, -0.2, 5.0, 1.0];
        for integrator in [Integrator::Euler, Integrator::Rk4] {
            let t = integrate_flow(&f, &p, &FlowConfig { integrator, steps: 7 }).unwrap();
            assert_eq!(t.endpoints().unwrap(), &p[..]);
        }
    }

    #[test]
    fn wide_kernel_is_a_constant_translation() {
        let c = [0.3, -0.7, 0.2];
        let f = RbfVelocityField::new(3, vec![0.0; 3], c.to_vec(), 1e6).unwrap();
        let p = vec![0.5, 0.5, 0.5, -1.0, 2.0, 0.0];
        let t = integrate_flow(&f, &p, &FlowConfig { integrator: Integrator::Rk4, steps: 4 }).unwrap();
        let end = t.endpoints().unwrap();
        for i in 0..2 {
            for k in 0..3 {
                assert!((end[i * 3 + k] - (p[i * 3 + k] + c[k])).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn single_euler_step_closed_form() {
        let center = [0.2, -0.1];
        let p = [0.7, 0.4];
        let sigma = 0.8;
        let f = RbfVelocityField::new(2, center.to_vec(), vec![0.5, 0.25], sigma).unwrap();
        let tape = integrate_flow(&f, &p, &FlowConfig { integrator: Integrator::Euler, steps: 1 }).unwrap();
        let up = [1.5, -2.0];
        let g = flow_gradient(&f, &tape, &up).unwrap();
        let r2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
        let phi = (-r2 / (2.0 * sigma * sigma)).exp();
        assert!((g.coefficients[0] - phi * up[0]).abs() < 1e-15);
        assert!((g.coefficients[1] - phi * up[1]).abs() < 1e-15);
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let f = RbfVelocityField::new(2, vec![0.0, 0.0], vec![1.0, 0.5], 0.5).unwrap();
        let p = [0.3, 0.2, -0.1, 0.4];
        let tape = integrate_flow(&f, &p, &FlowConfig::default()).unwrap();
        let g = flow_gradient(&f, &tape, &[0.0; 4]).unwrap();
        assert!(g.coefficients.iter().all(|&x| x == 0.0));
        assert_eq!(g.sigma, 0.0);
    }

    #[test]
    fn missing_tape_is_an_error() {
        let f = RbfVelocityField::zeros(2, vec![0.0, 0.0], 1.0).unwrap();
        assert!(matches!(flow_gradient(&f, &FlowTape::default(), &[]), Err(DeformError::MissingTape)));
    }

    #[test]
    fn cached_kernels_match_recomputation() {
        let f = RbfVelocityField::new(2, vec![0.0, 0.0, 1.0, 0.5], vec![0.4, -0.3, 0.1, 0.8], 0.6).unwrap();
        let pts = [0.1, 0.2, -0.4, 0.9, 1.1, -0.3];
        let up = [1.0, -0.5, 0.3, 0.2, -0.7, 0.4];
        for integrator in [Integrator::Euler, Integrator::Rk4] {
            let tape = integrate_flow(&f, &pts, &FlowConfig { integrator, steps: 4 }).unwrap();
            let bare = FlowTape { kernels: Vec::new(), ..tape.clone() };
            assert_eq!(flow_gradient(&f, &tape, &up).unwrap(), flow_gradient(&f, &bare, &up).unwrap());
        }
    }

    #[test]
    fn non_finite_state_aborts() {
        let f = RbfVelocityField::new(1, vec![0.0, 0.0], vec![f64::MAX, f64::MAX], 1.0).unwrap();
        let err = integrate_flow(&f, &[0.0], &FlowConfig { integrator: Integrator::Euler, steps: 3 }).unwrap_err();
        assert!(matches!(err, DeformError::NonFinite { .. }));
    }

    #[test]
    fn lipschitz_bound_dominates_a_finite_difference_slope() {
        let f = RbfVelocityField::new(2, vec![0.0, 0.0, 1.0, 0.5], vec![0.4, -0.3, 0.1, 0.8], 0.6).unwrap();
        let bound = f.lipschitz_bound();
        let mut va = [0.0; 2];
        let mut vb = [0.0; 2];
        for i in 0..200 {
            let t = i as f64 * 0.013;
            let a = [t.sin(), t.cos() * 0.7];
            let b = [a[0] + 1e-4, a[1] - 2e-4];
            f.velocity(&a, &mut va);
            f.velocity(&b, &mut vb);
            let num = ((va[0] - vb[0]).powi(2) + (va[1] - vb[1]).powi(2)).sqrt();
            let den = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            assert!(num / den <= bound);
        }
    }

    #[test]
    fn certificate_tracks_step_size() {
        let f = RbfVelocityField::new(2, vec![0.0, 0.0], vec![3.0, 4.0], 1.0).unwrap();
        // L = 5 / e^{1/2} ≈ 3.03
        assert!(!f.injectivity_certified(&FlowConfig { integrator: Integrator::Euler, steps: 3 }));
        assert!(f.injectivity_certified(&FlowConfig { integrator: Integrator::Euler, steps: 4 }));
        assert!(f.injectivity_certified(&FlowConfig { integrator: Integrator::Rk4, steps: 10 }));
    }

    #[test]
    fn farthest_points_are_spread() {
        let pts: Vec<f64> = (0..10).flat_map(|i| [i as f64, 0.0]).collect();
        assert_eq!(farthest_point_subsample(&pts, 2, 3), vec![0, 9, 4]);
    }
}
