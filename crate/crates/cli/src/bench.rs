//! `meshot bench`: wall time of the losses (value and gradient) against the
//! number of supports, for point measures in `R^3` and point-normal atoms in
//! `R^6`.
//!
//! Losses: `swd` (sliced Wasserstein), `cd_brute` (exhaustive Chamfer),
//! `cd_reg` (exhaustive Chamfer plus the edge, normal and Laplacian
//! regularizers of a level-4 icosphere), `sinkhorn` (debiased Sinkhorn with a
//! fixed iteration count, only up to `sinkhorn_max_m`). Each timing is the
//! median of `repeats` runs after one warm-up.

use std::path::PathBuf;
use std::time::Instant;

use meshot::measures::sample_mesh_detailed;
use meshot::shapes::{ellipsoid, icosphere};
use meshot::transport::{
    chamfer, regularizer_suite, sample_directions, sinkhorn_divergence, sliced_wasserstein, ChamferAccel,
    SinkhornConfig,
};
use meshot::{DiscreteMeasure, SamplerState, TriangleMesh};
use serde_json::{json, Map, Value};

use crate::error::CliError;
use crate::report::{self, Environment};

const LOSSES: [&str; 4] = ["swd", "cd_brute", "cd_reg", "sinkhorn"];

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long = "m-grid", default_value = "1024,2048,4096,8192,16384", value_delimiter = ',')]
    pub m_grid: Vec<usize>,
    #[arg(long, default_value = "3,6", value_delimiter = ',')]
    pub dims: Vec<usize>,
    #[arg(long, default_value = "swd,cd_brute,cd_reg,sinkhorn", value_delimiter = ',')]
    pub losses: Vec<String>,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long = "L", default_value_t = 100)]
    pub projections: usize,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest m timed for the quadratic-memory Sinkhorn solver.
    #[arg(long, default_value_t = 2048)]
    pub sinkhorn_max_m: usize,
    /// Fixed Sinkhorn iteration budget per solve.
    #[arg(long, default_value_t = 50)]
    pub sinkhorn_iters: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Samples of a mesh as `R^3` points or `R^6` (point, normal) atoms.
fn measure(mesh: &TriangleMesh, m: usize, dim: usize, sampler: &SamplerState) -> Result<DiscreteMeasure, CliError> {
    let s = sample_mesh_detailed(mesh, m, sampler)?;
    if dim == 3 {
        return Ok(s.to_measure());
    }
    let pts = s.to_measure();
    let normals = s.normals(mesh);
    let supports = (0..m).flat_map(|i| pts.support(i).iter().copied().chain(normals[i])).collect();
    Ok(DiscreteMeasure::uniform(6, supports)?)
}

fn median(mut v: Vec<u128>) -> u128 {
    v.sort_unstable();
    v[v.len() / 2]
}

struct Row {
    loss: &'static str,
    dim: usize,
    m: usize,
    median_ns: u128,
}

fn check(args: &Args) -> Result<Vec<&'static str>, CliError> {
    if args.m_grid.len() < 2 || args.m_grid.iter().any(|&m| m == 0) {
        return Err(CliError::Config("--m-grid needs at least two positive sizes".into()));
    }
    if args.dims.is_empty() || args.dims.iter().any(|d| *d != 3 && *d != 6) {
        return Err(CliError::Config("--dims accepts 3 and 6".into()));
    }
    if args.repeats == 0 || args.projections == 0 || args.sinkhorn_iters == 0 {
        return Err(CliError::Config("repeats, L and sinkhorn-iters must be positive".into()));
    }
    args.losses
        .iter()
        .map(|l| {
            LOSSES.iter().copied().find(|n| n == l).ok_or_else(|| CliError::Config(format!("unknown loss '{l}'")))
        })
        .collect()
}

pub fn run(args: &Args, env: &Environment) -> Result<Value, CliError> {
    let losses = check(args)?;
    let (src, tgt) = (icosphere(3), ellipsoid(3, [1.6, 0.5, 0.5]));
    let reg_mesh = icosphere(4);
    let mut rows = Vec::new();

    for &dim in &args.dims {
        for &m in &args.m_grid {
            let a = measure(&src, m, dim, &SamplerState::with_stream(args.seed, 1))?;
            let b = measure(&tgt, m, dim, &SamplerState::with_stream(args.seed, 2))?;
            let proj = sample_directions(args.projections, dim, SamplerState::with_stream(args.seed, 3).derive(0))?;
            for &loss in &losses {
                if loss == "sinkhorn" && m > args.sinkhorn_max_m {
                    continue;
                }
                let once = || -> Result<u128, CliError> {
                    let t = Instant::now();
                    let v = match loss {
                        "swd" => sliced_wasserstein(&a, &b, args.p, &proj)?.value,
                        "cd_brute" => chamfer(&a, &b, ChamferAccel::Brute)?.value,
                        "cd_reg" => {
                            let r = regularizer_suite(&reg_mesh);
                            chamfer(&a, &b, ChamferAccel::Brute)?.value
                                + r.edge_length.value
                                + r.normal_consistency.value
                                + r.laplacian.value
                        }
                        _ => {
                            let cfg = SinkhornConfig {
                                p: args.p,
                                epsilon: 1e-2,
                                max_iter: args.sinkhorn_iters,
                                tol: 0.0,
                            };
                            sinkhorn_divergence(&a, &b, &cfg)?.loss.value
                        }
                    };
                    let ns = t.elapsed().as_nanos();
                    if !v.is_finite() {
                        return Err(CliError::Numeric(format!("{loss} is not finite at m = {m}, d = {dim}")));
                    }
                    Ok(ns)
                };
                once()?;
                let times = (0..args.repeats).map(|_| once()).collect::<Result<Vec<_>, _>>()?;
                let median_ns = median(times);
                log::info!("{loss} d={dim} m={m}: {:.3} ms", median_ns as f64 * 1e-6);
                rows.push(Row { loss, dim, m, median_ns });
            }
        }
    }

    let mut exponents = Map::new();
    for &loss in &losses {
        let mut per_dim = Map::new();
        for &dim in &args.dims {
            let pts: Vec<&Row> = rows.iter().filter(|r| r.loss == loss && r.dim == dim).collect();
            if pts.len() >= 2 {
                let x: Vec<f64> = pts.iter().map(|r| r.m as f64).collect();
                let y: Vec<f64> = pts.iter().map(|r| r.median_ns as f64).collect();
                per_dim.insert(format!("d{dim}"), json!(report::log_log_slope(&x, &y)));
            }
        }
        exponents.insert(loss.into(), Value::Object(per_dim));
    }

    let lookup = |loss: &str, dim: usize, m: usize| {
        rows.iter().find(|r| r.loss == loss && r.dim == dim && r.m == m).map(|r| r.median_ns as f64)
    };
    let mut comparisons = Vec::new();
    for &m in &args.m_grid {
        let swd3 = lookup("swd", 3, m);
        comparisons.push(json!({
            "m": m,
            "swd_over_cd_brute_d3": swd3.zip(lookup("cd_brute", 3, m)).map(|(s, c)| s / c),
            "swd_d6_over_d3": lookup("swd", 6, m).zip(swd3).map(|(s6, s3)| s6 / s3),
        }));
    }

    let config = json!({
        "m_grid": args.m_grid,
        "dims": args.dims,
        "losses": losses,
        "repeats": args.repeats,
        "L": args.projections,
        "p": args.p,
        "seed": args.seed,
        "sinkhorn_max_m": args.sinkhorn_max_m,
        "sinkhorn_iters": args.sinkhorn_iters,
    });
    let timings: Vec<Value> = rows
        .iter()
        .map(|r| json!({ "loss": r.loss, "d": r.dim, "m": r.m, "median_wall_ns": r.median_ns as u64 }))
        .collect();
    let results = json!({ "timings": timings, "exponents": exponents, "comparisons": comparisons });
    let doc = report::experiment("bench", config, env, results);
    if let Some(dir) = &args.out {
        report::ensure_dir(dir)?;
        let mut csv = String::from("loss,d,m,median_wall_ns,repeats\n");
        for r in &rows {
            csv.push_str(&format!("{},{},{},{},{}\n", r.loss, r.dim, r.m, r.median_ns, args.repeats));
        }
        report::write_text(&dir.join("bench.csv"), &csv)?;
        report::write_json(&dir.join("bench.json"), &doc)?;
    }
    Ok(doc)
}
