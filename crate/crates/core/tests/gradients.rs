//! Analytic gradients against central finite differences.
//!
//! Errors are normwise: `max_i |g_i - fd_i| / max_i |fd_i|`. Random
//! configurations are redrawn until they are tie-free (projected orders,
//! nearest neighbours) by a margin much larger than the probe step.

use meshot::deform::{flow_gradient, integrate_flow, FlowConfig, Integrator, RbfVelocityField};
use meshot::measures::mesh_to_varifold;
use meshot::shapes::icosphere;
use meshot::transport::{chamfer, sample_directions, sliced_wasserstein, sliced_wasserstein_value, ChamferAccel};
use meshot::{DiscreteMeasure, ProjectionSet, TriangleMesh};
use meshot_oracles::central_gradient;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CONFIGS: usize = 50;

fn normwise(a: &[f64], fd: &[f64]) -> f64 {
    let scale = fd.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    a.iter().zip(fd).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

fn cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<f64> {
    (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Smallest gap between consecutive projected values of the union.
fn min_projected_gap(x: &[f64], y: &[f64], dim: usize, proj: &ProjectionSet) -> f64 {
    let mut worst = f64::INFINITY;
    for l in 0..proj.len() {
        let th = proj.direction(l);
        let mut v: Vec<f64> =
            x.chunks_exact(dim).chain(y.chunks_exact(dim)).map(|p| p.iter().zip(th).map(|(a, b)| a * b).sum()).collect();
        v.sort_by(f64::total_cmp);
        worst = v.windows(2).map(|w| w[1] - w[0]).fold(worst, f64::min);
    }
    worst
}

#[test]
fn sliced_wasserstein_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut done = 0;
    let mut worst: f64 = 0.0;
    while done < CONFIGS {
        let dim = [2, 3, 6][done % 3];
        let p = [2.0, 1.5, 3.0][done % 3];
        let (n, m) = (rng.random_range(3..9), rng.random_range(3..9));
        let (x, y) = (cloud(&mut rng, n, dim), cloud(&mut rng, m, dim));
        let proj = sample_directions(8, dim, rng.random()).unwrap();
        if min_projected_gap(&x, &y, dim, &proj) < 1e-4 {
            continue;
        }
        let nu = DiscreteMeasure::uniform(dim, y).unwrap();
        let mu = DiscreteMeasure::uniform(dim, x.clone()).unwrap();
        let g = sliced_wasserstein(&mu, &nu, p, &proj).unwrap().grad;
        let fd = central_gradient(
            |z| sliced_wasserstein_value(&mu.with_supports(z.to_vec()).unwrap(), &nu, p, &proj).unwrap(),
            &x,
            1e-6,
        );
        worst = worst.max(normwise(&g, &fd));
        done += 1;
    }
    assert!(worst < 1e-5, "worst relative error {worst:e}");
}

/// Gap between nearest and second-nearest neighbour, minimized over queries.
fn nn_margin(q: &[f64], pts: &[f64], dim: usize) -> f64 {
    q.chunks_exact(dim)
        .map(|a| {
            let mut d: Vec<f64> =
                pts.chunks_exact(dim).map(|b| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>()).collect();
            d.sort_by(f64::total_cmp);
            if d.len() > 1 {
                d[1] - d[0]
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn chamfer_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut done = 0;
    let mut worst: f64 = 0.0;
    while done < CONFIGS {
        let dim = [2, 3, 6][done % 3];
        let (n, m) = (rng.random_range(2..12), rng.random_range(2..12));
        let (x, y) = (cloud(&mut rng, n, dim), cloud(&mut rng, m, dim));
        if nn_margin(&x, &y, dim) < 1e-3 || nn_margin(&y, &x, dim) < 1e-3 {
            continue;
        }
        let accel = if done % 2 == 0 { ChamferAccel::Brute } else { ChamferAccel::KdTree };
        let mu = DiscreteMeasure::uniform(dim, x.clone()).unwrap();
        let nu = DiscreteMeasure::uniform(dim, y).unwrap();
        let g = chamfer(&mu, &nu, accel).unwrap().grad;
        let fd =
            central_gradient(|z| chamfer(&mu.with_supports(z.to_vec()).unwrap(), &nu, accel).unwrap().value, &x, 1e-6);
        worst = worst.max(normwise(&g, &fd));
        done += 1;
    }
    assert!(worst < 1e-5, "worst relative error {worst:e}");
}

fn jittered_sphere(rng: &mut ChaCha8Rng, amp: f64) -> TriangleMesh {
    let base = icosphere(1);
    let v = base.vertices().iter().map(|p| [0, 1, 2].map(|k| p[k] + rng.random_range(-amp..amp))).collect();
    base.with_vertices(v)
}

/// Smooth test functional of a weighted measure:
/// `Σ_k w_k (c·s_k + ½|s_k|^2)`, with its support and weight gradients.
fn functional(m: &DiscreteMeasure, c: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let d = m.dim();
    let mut value = 0.0;
    let mut gs = vec![0.0; m.len() * d];
    let mut gw = vec![0.0; m.len()];
    for k in 0..m.len() {
        let s = m.support(k);
        let phi: f64 = s.iter().zip(c).map(|(x, c)| c * x + 0.5 * x * x).sum();
        value += m.weights()[k] * phi;
        gw[k] = phi;
        for i in 0..d {
            gs[k * d + i] = m.weights()[k] * (c[i] + s[i]);
        }
    }
    (value, gs, gw)
}

#[test]
fn varifold_vertex_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst: f64 = 0.0;
    for cfg in 0..CONFIGS {
        let mesh = jittered_sphere(&mut rng, 0.1);
        let lambda = [1.0, 0.5, 2.0][cfg % 3];
        let c: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v = mesh_to_varifold(&mesh, lambda).unwrap();
        let (_, gs, gw) = functional(&v.measure, &c);
        let g: Vec<f64> = v.vertex_gradient(&mesh, &gs, Some(&gw)).into_iter().flatten().collect();
        let x0: Vec<f64> = mesh.vertices().iter().flatten().copied().collect();
        let fd = central_gradient(
            |z| {
                let moved = mesh.with_vertices(z.chunks_exact(3).map(|p| [p[0], p[1], p[2]]).collect());
                functional(&mesh_to_varifold(&moved, lambda).unwrap().measure, &c).0
            },
            &x0,
            1e-6,
        );
        worst = worst.max(normwise(&g, &fd));
    }
    assert!(worst < 1e-5, "worst relative error {worst:e}");
}

#[test]
fn flow_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let mut worst: f64 = 0.0;
    let mut worst_sigma: f64 = 0.0;
    for cfg in 0..CONFIGS {
        let dim = [2, 3][cfg % 2];
        let k = 8;
        let centers = cloud(&mut rng, k, dim);
        let coeffs: Vec<f64> = (0..k * dim).map(|_| rng.random_range(-0.5..0.5)).collect();
        let sigma = rng.random_range(0.4..1.2);
        let points = cloud(&mut rng, 20, dim);
        let upstream: Vec<f64> = (0..20 * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let flow = if cfg % 5 == 4 {
            FlowConfig { integrator: Integrator::Euler, steps: 10 }
        } else {
            FlowConfig { integrator: Integrator::Rk4, steps: 10 }
        };
        let field = RbfVelocityField::new(dim, centers.clone(), coeffs.clone(), sigma).unwrap();
        let tape = integrate_flow(&field, &points, &flow).unwrap();
        let g = flow_gradient(&field, &tape, &upstream).unwrap();

        let objective = |c: &[f64], s: f64| {
            let f = RbfVelocityField::new(dim, centers.clone(), c.to_vec(), s).unwrap();
            let t = integrate_flow(&f, &points, &flow).unwrap();
            t.endpoints().unwrap().iter().zip(&upstream).map(|(a, b)| a * b).sum::<f64>()
        };
        let fd = central_gradient(|c| objective(c, sigma), &coeffs, 1e-5);
        worst = worst.max(normwise(&g.coefficients, &fd));

        let h = 1e-5;
        let fd_sigma = (objective(&coeffs, sigma + h) - objective(&coeffs, sigma - h)) / (2.0 * h);
        worst_sigma = worst_sigma.max((g.sigma - fd_sigma).abs() / fd_sigma.abs().max(1e-8));

        let fd_points = central_gradient(
            |p| {
                let t = integrate_flow(&field, p, &flow).unwrap();
                t.endpoints().unwrap().iter().zip(&upstream).map(|(a, b)| a * b).sum::<f64>()
            },
            &points,
            1e-5,
        );
        worst = worst.max(normwise(&g.points, &fd_points));
    }
    assert!(worst < 1e-4, "worst relative error {worst:e}");
    assert!(worst_sigma < 1e-4, "worst sigma relative error {worst_sigma:e}");
}
