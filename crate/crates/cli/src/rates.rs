//! `meshot rates`: empirical convergence of the sliced Wasserstein estimator
//! between a sphere and an ellipsoid.
//!
//! * L-sweep: one fixed pair of `m_fixed`-point sample sets; the error of an
//!   `L`-direction Monte Carlo estimate is measured against a
//!   `l_ref`-direction Fibonacci-lattice quadrature on the same samples.
//! * m-sweep: `m` samples per surface with a shared set of `l_shared`
//!   directions; the reference is the same directions at `m_ref` samples, so
//!   only the sampling error remains.
//!
//! Errors are averaged over `trials` independent draws; slopes are least-squares
//! fits of `ln error` against `ln L` or `ln m`.

use std::f64::consts::PI;
use std::path::PathBuf;

use meshot::measures::sample_mesh;
use meshot::shapes::{ellipsoid, icosphere};
use meshot::transport::{sample_directions, sliced_wasserstein_value};
use meshot::{DiscreteMeasure, ProjectionSet, SamplerState, TriangleMesh};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::report::{self, Environment};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long = "L-grid", default_value = "10,40,160,640", value_delimiter = ',')]
    pub l_grid: Vec<usize>,
    #[arg(long = "m-grid", default_value = "100,400,1600,6400", value_delimiter = ',')]
    pub m_grid: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Samples per surface in the L-sweep.
    #[arg(long, default_value_t = 2000)]
    pub m_fixed: usize,
    /// Lattice directions of the L-sweep reference.
    #[arg(long = "L-ref", default_value_t = 16_384)]
    pub l_ref: usize,
    /// Directions shared by every estimate of the m-sweep.
    #[arg(long = "L-shared", default_value_t = 256)]
    pub l_shared: usize,
    /// Samples per surface of the m-sweep reference.
    #[arg(long, default_value_t = 262_144)]
    pub m_ref: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `n` nearly uniform unit vectors on `S^2` (golden-angle spiral).
pub fn fibonacci_sphere(n: usize) -> Vec<f64> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .flat_map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            [r * a.cos(), r * a.sin(), z]
        })
        .collect()
}

fn shapes() -> (TriangleMesh, TriangleMesh) {
    (icosphere(3), ellipsoid(3, [1.6, 0.5, 0.5]))
}

struct Sweep {
    grid: Vec<usize>,
    errors: Vec<f64>,
    std_errors: Vec<f64>,
    slope: f64,
}

fn stats(errs: &[f64]) -> (f64, f64) {
    let n = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / n;
    let var = if errs.len() > 1 { errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, (var / n).sqrt())
}

fn l_sweep(args: &Args, a: &DiscreteMeasure, b: &DiscreteMeasure, reference: f64) -> Result<Sweep, CliError> {
    let root = SamplerState::with_stream(args.seed, 10);
    let mut errors = Vec::new();
    let mut std_errors = Vec::new();
    for (gi, &l) in args.l_grid.iter().enumerate() {
        let errs: Result<Vec<f64>, CliError> = (0..args.trials)
            .into_par_iter()
            .map(|t| {
                let proj = sample_directions(l, 3, root.derive(((gi as u64) << 32) | t as u64))?;
                Ok((sliced_wasserstein_value(a, b, args.p, &proj)? - reference).abs())
            })
            .collect();
        let (mean, se) = stats(&errs?);
        errors.push(mean);
        std_errors.push(se);
    }
    let grid_f: Vec<f64> = args.l_grid.iter().map(|&l| l as f64).collect();
    Ok(Sweep { slope: report::log_log_slope(&grid_f, &errors), grid: args.l_grid.clone(), errors, std_errors })
}

fn m_sweep(args: &Args, sa: &TriangleMesh, sb: &TriangleMesh, proj: &ProjectionSet, reference: f64) -> Result<Sweep, CliError> {
    let root = SamplerState::with_stream(args.seed, 20);
    let mut errors = Vec::new();
    let mut std_errors = Vec::new();
    for (gi, &m) in args.m_grid.iter().enumerate() {
        let errs: Result<Vec<f64>, CliError> = (0..args.trials)
            .into_par_iter()
            .map(|t| {
                let s = root.derive(((gi as u64) << 32) | t as u64);
                let a = sample_mesh(sa, m, &SamplerState::with_stream(s, 0))?;
                let b = sample_mesh(sb, m, &SamplerState::with_stream(s, 1))?;
                Ok((sliced_wasserstein_value(&a, &b, args.p, proj)? - reference).abs())
            })
            .collect();
        let (mean, se) = stats(&errs?);
        errors.push(mean);
        std_errors.push(se);
    }
    let grid_f: Vec<f64> = args.m_grid.iter().map(|&m| m as f64).collect();
    Ok(Sweep { slope: report::log_log_slope(&grid_f, &errors), grid: args.m_grid.clone(), errors, std_errors })
}

fn sweep_csv(name: &str, s: &Sweep, trials: usize) -> String {
    let mut out = format!("{name},trials,mean_abs_error,std_error\n");
    for i in 0..s.grid.len() {
        out.push_str(&format!("{},{trials},{:e},{:e}\n", s.grid[i], s.errors[i], s.std_errors[i]));
    }
    out
}

fn sweep_json(s: &Sweep) -> Value {
    json!({ "grid": s.grid, "mean_abs_error": s.errors, "std_error": s.std_errors, "slope": s.slope })
}

fn check(args: &Args) -> Result<(), CliError> {
    if args.l_grid.len() < 4 || args.m_grid.len() < 4 {
        return Err(CliError::Config("each grid needs at least 4 points".into()));
    }
    if args.l_grid.iter().chain(&args.m_grid).any(|&v| v == 0) {
        return Err(CliError::Config("grid values must be positive".into()));
    }
    if args.trials == 0 || args.m_fixed == 0 || args.l_ref == 0 || args.l_shared == 0 || args.m_ref == 0 {
        return Err(CliError::Config("trials, m-fixed, L-ref, L-shared and m-ref must be positive".into()));
    }
    if !(args.p >= 1.0 && args.p.is_finite()) {
        return Err(CliError::Config("--p must be a finite number >= 1".into()));
    }
    Ok(())
}

pub fn run(args: &Args, env: &Environment) -> Result<Value, CliError> {
    check(args)?;
    let (sa, sb) = shapes();

    let fixed_a = sample_mesh(&sa, args.m_fixed, &SamplerState::with_stream(args.seed, 1))?;
    let fixed_b = sample_mesh(&sb, args.m_fixed, &SamplerState::with_stream(args.seed, 2))?;
    let lattice = ProjectionSet::from_directions(3, fibonacci_sphere(args.l_ref))?;
    let l_reference = sliced_wasserstein_value(&fixed_a, &fixed_b, args.p, &lattice)?;
    let ls = l_sweep(args, &fixed_a, &fixed_b, l_reference)?;

    let shared = sample_directions(args.l_shared, 3, SamplerState::with_stream(args.seed, 3).derive(0))?;
    let ref_a = sample_mesh(&sa, args.m_ref, &SamplerState::with_stream(args.seed, 4))?;
    let ref_b = sample_mesh(&sb, args.m_ref, &SamplerState::with_stream(args.seed, 5))?;
    let m_reference = sliced_wasserstein_value(&ref_a, &ref_b, args.p, &shared)?;
    let ms = m_sweep(args, &sa, &sb, &shared, m_reference)?;

    if ls.errors.iter().chain(&ms.errors).any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(CliError::Numeric("an error estimate is zero or not finite; slopes are undefined".into()));
    }

    let config = json!({
        "shapes": ["icosphere(3)", "ellipsoid(3, [1.6, 0.5, 0.5])"],
        "L_grid": args.l_grid,
        "m_grid": args.m_grid,
        "trials": args.trials,
        "p": args.p,
        "seed": args.seed,
        "m_fixed": args.m_fixed,
        "L_ref": args.l_ref,
        "L_shared": args.l_shared,
        "m_ref": args.m_ref,
    });
    let results = json!({
        "L_sweep": sweep_json(&ls),
        "m_sweep": sweep_json(&ms),
        "L_reference_value": l_reference,
        "m_reference_value": m_reference,
    });
    let doc = report::experiment("rates", config, env, results);
    if let Some(dir) = &args.out {
        report::ensure_dir(dir)?;
        report::write_text(&dir.join("rates_L.csv"), &sweep_csv("L", &ls, args.trials))?;
        report::write_text(&dir.join("rates_m.csv"), &sweep_csv("m", &ms, args.trials))?;
        report::write_json(&dir.join("slopes.json"), &doc)?;
    }
    Ok(doc)
}
