//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the report is
//! always printed.

mod common;

use std::time::Instant;

use common::{f, ok, strip_volatile};
use meshot::deform::{flow_gradient, integrate_flow, FlowConfig, Integrator, RbfVelocityField};
use meshot::measures::mesh_to_varifold;
use meshot::mesh::{self_intersecting_faces, self_intersecting_faces_brute, triangles_intersect};
use meshot::shapes::icosphere;
use meshot::transport::{
    chamfer, sample_directions, sinkhorn_divergence, sliced_wasserstein, sliced_wasserstein_value, wasserstein_1d,
    ChamferAccel, SinkhornConfig,
};
use meshot::{DiscreteMeasure, SamplerState, TriangleMesh};
use meshot_oracles::{central_gradient, chamfer_brute, cost_matrix, lp_transport_cost, triangles_intersect_parametric};
use rand::Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn weights(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|w| w / s).collect()
}

fn cloud(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<f64> {
    (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn normwise(a: &[f64], fd: &[f64]) -> f64 {
    let scale = fd.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    a.iter().zip(fd).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

fn toy_default_config() -> Outcome {
    let t = Instant::now();
    let doc = ok(&["--threads", "1", "toy"]);
    let secs = t.elapsed().as_secs_f64();
    let (gs, gc) = (f(&doc, "/results/swd/coverage_gap"), f(&doc, "/results/cd/coverage_gap"));
    let red = f(&doc, "/results/comparison/emd_reduction");
    check(
        gs < gc && red >= 0.2 && secs < 180.0,
        format!("coverage gap swd {gs:.5} vs cd {gc:.5}, EMD reduction {:.1}%, {secs:.0} s", 100.0 * red),
    )
}

fn rates() -> Outcome {
    let t = Instant::now();
    let doc = ok(&["rates"]);
    let secs = t.elapsed().as_secs_f64();
    let (sl, sm) = (f(&doc, "/results/L_sweep/slope"), f(&doc, "/results/m_sweep/slope"));
    check(
        (sl + 0.5).abs() <= 0.15 && sm <= -0.35 && secs < 300.0,
        format!("slope vs L {sl:.3}, vs m {sm:.3}, {secs:.0} s"),
    )
}

fn complexity() -> Outcome {
    let doc = ok(&["bench", "--losses", "swd,cd_brute"]);
    let r = &doc["results"];
    let cd = f(r, "/exponents/cd_brute/d3");
    let swd = f(r, "/exponents/swd/d3").max(f(r, "/exponents/swd/d6"));
    let mut faster = true;
    let mut worst_dim_ratio: f64 = 0.0;
    for c in r["comparisons"].as_array().unwrap() {
        if f(c, "/m") >= 4096.0 {
            faster &= f(c, "/swd_over_cd_brute_d3") < 1.0;
        }
        worst_dim_ratio = worst_dim_ratio.max(f(c, "/swd_d6_over_d3"));
    }
    check(
        (cd - 2.0).abs() <= 0.2 && swd <= 1.3 && faster && worst_dim_ratio < 2.2,
        format!(
            "cd_brute exponent {cd:.2}, swd exponent {swd:.2}, swd faster at m >= 4096: {faster}, d6/d3 <= {worst_dim_ratio:.2}"
        ),
    )
}

fn oracles() -> Outcome {
    let mut rng = SamplerState::new(101).rng();
    let mut w1d: f64 = 0.0;
    for inst in 0..200 {
        let (n, m) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (a, b) = (weights(&mut rng, n), weights(&mut rng, m));
        let p = [1.0, 1.5, 2.0, 3.0][inst % 4];
        let exact = lp_transport_cost(&a, &b, &cost_matrix(&u, &v, 1, p));
        w1d = w1d.max((wasserstein_1d(&u, &a, &v, &b, p).unwrap() - exact).abs());
    }

    let cfg = SinkhornConfig { p: 2.0, epsilon: 1e-3, max_iter: 20_000, tol: 1e-10 };
    let mut sink: f64 = 0.0;
    for _ in 0..20 {
        let (x, y) = (cloud(&mut rng, 4, 2), cloud(&mut rng, 4, 2));
        let (a, b) = (weights(&mut rng, 4), weights(&mut rng, 4));
        let exact = lp_transport_cost(&a, &b, &cost_matrix(&x, &y, 2, 2.0));
        let s = sinkhorn_divergence(&DiscreteMeasure::new(2, x, a).unwrap(), &DiscreteMeasure::new(2, y, b).unwrap(), &cfg)
            .unwrap();
        sink = sink.max((s.loss.value - exact).abs() / exact);
    }

    let mut kd_equal = true;
    for inst in 0..100 {
        let dim = [2, 3, 6][inst % 3];
        let (n, m) = (rng.random_range(1..80), rng.random_range(1..80));
        let (x, y) = (cloud(&mut rng, n, dim), cloud(&mut rng, m, dim));
        let mu = DiscreteMeasure::uniform(dim, x.clone()).unwrap();
        let nu = DiscreteMeasure::uniform(dim, y.clone()).unwrap();
        let brute = chamfer(&mu, &nu, ChamferAccel::Brute).unwrap();
        kd_equal &= brute == chamfer(&mu, &nu, ChamferAccel::KdTree).unwrap();
        kd_equal &= (brute.value - chamfer_brute(&x, &y, dim)).abs() <= 1e-12 * brute.value.max(1.0);
    }

    let mut tri_ok = true;
    for _ in 0..500 {
        let t1: [[f64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
        let t2: [[f64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
        if let Some(expected) = triangles_intersect_parametric(t1, t2) {
            tri_ok &= triangles_intersect(t1, t2) == expected;
        }
    }
    let sphere = icosphere(2);
    let jittered =
        sphere.with_vertices(sphere.vertices().iter().map(|p| p.map(|c| c + rng.random_range(-0.15..0.15))).collect());
    tri_ok &= self_intersecting_faces(&jittered) == self_intersecting_faces_brute(&jittered);

    check(
        w1d <= 1e-9 && sink < 0.01 && kd_equal && tri_ok,
        format!(
            "max |W1D - LP| {w1d:.1e}, Sinkhorn rel. err. {sink:.2e}, kd-tree == brute: {kd_equal}, intersection oracles agree: {tri_ok}"
        ),
    )
}

fn min_projected_gap(x: &[f64], y: &[f64], dim: usize, proj: &meshot::ProjectionSet) -> f64 {
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

fn nn_margin(q: &[f64], pts: &[f64], dim: usize) -> f64 {
    q.chunks_exact(dim)
        .map(|a| {
            let mut d: Vec<f64> =
                pts.chunks_exact(dim).map(|b| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>()).collect();
            d.sort_by(f64::total_cmp);
            d.get(1).map_or(f64::INFINITY, |s| s - d[0])
        })
        .fold(f64::INFINITY, f64::min)
}

/// `Σ_k w_k (c·s_k + ½|s_k|^2)` with its support and weight gradients.
fn functional(m: &DiscreteMeasure, c: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let d = m.dim();
    let (mut value, mut gs, mut gw) = (0.0, vec![0.0; m.len() * d], vec![0.0; m.len()]);
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

fn gradients() -> Outcome {
    let mut rng = SamplerState::new(102).rng();
    let (mut swd, mut cd, mut var, mut flow): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);

    let mut done = 0;
    while done < 50 {
        let dim = [2, 3, 6][done % 3];
        let (n, m) = (rng.random_range(3..9), rng.random_range(3..9));
        let (x, y) = (cloud(&mut rng, n, dim), cloud(&mut rng, m, dim));
        let proj = sample_directions(8, dim, rng.random()).unwrap();
        if min_projected_gap(&x, &y, dim, &proj) < 1e-4 {
            continue;
        }
        let (mu, nu) = (DiscreteMeasure::uniform(dim, x.clone()).unwrap(), DiscreteMeasure::uniform(dim, y).unwrap());
        let g = sliced_wasserstein(&mu, &nu, 2.0, &proj).unwrap().grad;
        let fd = central_gradient(
            |z| sliced_wasserstein_value(&mu.with_supports(z.to_vec()).unwrap(), &nu, 2.0, &proj).unwrap(),
            &x,
            1e-6,
        );
        swd = swd.max(normwise(&g, &fd));
        done += 1;
    }

    done = 0;
    while done < 50 {
        let dim = [2, 3, 6][done % 3];
        let (n, m) = (rng.random_range(2..12), rng.random_range(2..12));
        let (x, y) = (cloud(&mut rng, n, dim), cloud(&mut rng, m, dim));
        if nn_margin(&x, &y, dim) < 1e-3 || nn_margin(&y, &x, dim) < 1e-3 {
            continue;
        }
        let (mu, nu) = (DiscreteMeasure::uniform(dim, x.clone()).unwrap(), DiscreteMeasure::uniform(dim, y).unwrap());
        let g = chamfer(&mu, &nu, ChamferAccel::KdTree).unwrap().grad;
        let fd = central_gradient(
            |z| chamfer(&mu.with_supports(z.to_vec()).unwrap(), &nu, ChamferAccel::KdTree).unwrap().value,
            &x,
            1e-6,
        );
        cd = cd.max(normwise(&g, &fd));
        done += 1;
    }

    let base = icosphere(1);
    for _ in 0..50 {
        let mesh: TriangleMesh =
            base.with_vertices(base.vertices().iter().map(|p| p.map(|c| c + rng.random_range(-0.1..0.1))).collect());
        let c: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v = mesh_to_varifold(&mesh, 1.0).unwrap();
        let (_, gs, gw) = functional(&v.measure, &c);
        let g: Vec<f64> = v.vertex_gradient(&mesh, &gs, Some(&gw)).into_iter().flatten().collect();
        let x0: Vec<f64> = mesh.vertices().iter().flatten().copied().collect();
        let fd = central_gradient(
            |z| {
                let moved = mesh.with_vertices(z.chunks_exact(3).map(|p| [p[0], p[1], p[2]]).collect());
                functional(&mesh_to_varifold(&moved, 1.0).unwrap().measure, &c).0
            },
            &x0,
            1e-6,
        );
        var = var.max(normwise(&g, &fd));
    }

    for cfg in 0..50 {
        let dim = [2, 3][cfg % 2];
        let centers = cloud(&mut rng, 8, dim);
        let coeffs: Vec<f64> = (0..8 * dim).map(|_| rng.random_range(-0.5..0.5)).collect();
        let sigma = rng.random_range(0.4..1.2);
        let points = cloud(&mut rng, 20, dim);
        let upstream: Vec<f64> = (0..20 * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fc = FlowConfig { integrator: Integrator::Rk4, steps: 10 };
        let field = RbfVelocityField::new(dim, centers.clone(), coeffs.clone(), sigma).unwrap();
        let g = flow_gradient(&field, &integrate_flow(&field, &points, &fc).unwrap(), &upstream).unwrap();
        let fd = central_gradient(
            |c| {
                let f = RbfVelocityField::new(dim, centers.clone(), c.to_vec(), sigma).unwrap();
                let t = integrate_flow(&f, &points, &fc).unwrap();
                t.endpoints().unwrap().iter().zip(&upstream).map(|(a, b)| a * b).sum::<f64>()
            },
            &coeffs,
            1e-5,
        );
        flow = flow.max(normwise(&g.coefficients, &fd));
    }

    check(
        swd < 1e-5 && cd < 1e-5 && var < 1e-5 && flow < 1e-4,
        format!("worst relative error: swd {swd:.1e}, cd {cd:.1e}, varifold {var:.1e}, flow {flow:.1e}"),
    )
}

fn random_measure(rng: &mut impl Rng, dim: usize) -> DiscreteMeasure {
    let n = rng.random_range(1..12);
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    DiscreteMeasure::from_unnormalized(dim, cloud(rng, n, dim).iter().map(|x| 3.0 * x).collect(), w).unwrap()
}

/// Supports on the grid `k / 1024`, so dyadic shifts translate exactly.
fn dyadic_measure(rng: &mut impl Rng, dim: usize) -> DiscreteMeasure {
    let n = rng.random_range(1..12);
    let k: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-2048i32..2048) as f64 / 1024.0).collect();
    DiscreteMeasure::uniform(dim, k).unwrap()
}

fn axioms() -> Outcome {
    let mut rng = SamplerState::new(103).rng();
    let (mut sym, mut ident, mut tri, mut trans) = (0.0f64, true, true, true);
    for case in 0..100 {
        let dim = [2, 3, 6][case % 3];
        let p = [1.0, 2.0, 3.0][case % 3];
        let (a, b, c) = (random_measure(&mut rng, dim), random_measure(&mut rng, dim), random_measure(&mut rng, dim));
        let proj = sample_directions(32, dim, rng.random()).unwrap();
        let sw = |x: &DiscreteMeasure, y: &DiscreteMeasure| sliced_wasserstein_value(x, y, p, &proj).unwrap();
        let (ab, ba) = (sw(&a, &b), sw(&b, &a));
        sym = sym.max((ab - ba).abs() / ab.max(1.0));
        ident &= sw(&a, &a) == 0.0;
        let root = |v: f64| v.max(0.0).powf(1.0 / p);
        tri &= root(sw(&a, &c)) <= root(ab) + root(sw(&b, &c)) + 1e-9;
    }
    for case in 0..100 {
        let dim = [2, 3][case % 2];
        let (a, b) = (dyadic_measure(&mut rng, dim), dyadic_measure(&mut rng, dim));
        let t: Vec<f64> = (0..dim).map(|_| rng.random_range(-64i32..64) as f64 / 8.0).collect();
        let proj = sample_directions(16, dim, rng.random()).unwrap();
        let before = sliced_wasserstein(&a, &b, 2.0, &proj).unwrap();
        let after = sliced_wasserstein(&a.translated(&t), &b.translated(&t), 2.0, &proj).unwrap();
        trans &= before.value.to_bits() == after.value.to_bits() && before.grad == after.grad;
    }
    check(
        sym <= 1e-12 && ident && tri && trans,
        format!("max asymmetry {sym:.1e}, identity: {ident}, triangle: {tri}, bitwise translation invariance: {trans}"),
    )
}

fn diffeomorphic() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let toy = ok(&["toy", "--config", "configs/toy_rbf.cfg"]);
    for v in ["swd", "cd"] {
        let crossings = f(&toy, &format!("/results/{v}/edge_crossings"));
        pass &= crossings == 0.0;
        notes.push(format!("toy_rbf/{v} crossings {crossings}"));
    }
    for cfg in ["sphere_to_ellipsoid_rbf", "sphere_to_cube_rbf"] {
        let si = f(&ok(&["deform", &format!("configs/{cfg}.cfg")]), "/results/si_percent");
        pass &= si == 0.0;
        notes.push(format!("{cfg} SI {si}%"));
    }
    let mut counterexample = false;
    for cfg in ["sphere_to_ellipsoid_displacement", "sphere_to_cube_displacement"] {
        let si = f(&ok(&["deform", &format!("configs/{cfg}.cfg")]), "/results/si_percent");
        counterexample |= si > 0.0;
        notes.push(format!("{cfg} SI {si:.2}%"));
    }
    check(pass && counterexample, notes.join(", "))
}

fn determinism() -> Outcome {
    let runs: [&[&str]; 4] = [
        &["toy", "--iterations", "100"],
        &["toy", "--config", "configs/toy_rbf.cfg", "--iterations", "20"],
        &["rates", "--trials", "5"],
        &["compare", "data/sphere.obj", "data/cube.obj", "--m", "20000", "--emd-points", "512"],
    ];
    let mut differing = Vec::new();
    for args in runs {
        let one: Value = ok(&[&["--threads", "1"], args].concat());
        let many: Value = ok(&[&["--threads", "4"], args].concat());
        if strip_volatile(&one) != strip_volatile(&many) {
            differing.push(args.join(" "));
        }
    }
    check(differing.is_empty(), format!("1 vs 4 threads, differing runs: {differing:?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("toy reproduction", toy_default_config),
        ("Monte Carlo rates", rates),
        ("complexity scaling", complexity),
        ("oracle equivalence", oracles),
        ("gradient correctness", gradients),
        ("metric axioms", axioms),
        ("flow injectivity", diffeomorphic),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{}] {name}: {detail} ({:.1} s)", i + 1, t.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
