//! `meshot compare A B`: transport losses between two encoded meshes plus the
//! sampled-surface evaluation metrics.

use std::path::PathBuf;

use meshot::measures::{mesh_to_varifold, sample_mesh_detailed, SurfaceSamples};
use meshot::mesh::{load_mesh, self_intersection_ratio, TriangleMesh};
use meshot::metrics::{assd, chamfer_normals, emd_estimate, scaled_sinkhorn, EPSILON_SCALE};
use meshot::transport::{chamfer, sample_directions, sliced_wasserstein_value, ChamferAccel};
use meshot::{DiscreteMeasure, SamplerState};
use serde_json::{json, Map, Value};

use crate::error::CliError;
use crate::report::{self, Environment};

/// Stream label for the projection directions.
const PROJECTION_LABEL: u64 = 0x7377;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EncodingArg {
    Sample,
    Varifold,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    pub mesh_a: PathBuf,
    pub mesh_b: PathBuf,
    /// Comma list of swd, cd, sinkhorn, emd, assd, cn, si, or `all`.
    #[arg(long, default_value = "all")]
    pub loss: String,
    /// Surface samples per mesh.
    #[arg(long, default_value_t = 100_000)]
    pub m: usize,
    /// Number of projections for the sliced quantities.
    #[arg(long = "L", default_value_t = 100)]
    pub projections: usize,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Measure used by the swd, cd and sinkhorn losses.
    #[arg(long, value_enum, default_value_t = EncodingArg::Sample)]
    pub encoding: EncodingArg,
    /// Scale of the normal block in varifold supports.
    #[arg(long, default_value_t = 1.0)]
    pub normal_weight: f64,
    /// Supports fed to the quadratic Sinkhorn solver (emd and sinkhorn).
    #[arg(long, default_value_t = 2048)]
    pub emd_points: usize,
    /// Signed instead of absolute cosine for Chamfer normals.
    #[arg(long)]
    pub signed_normals: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const LOSSES: [&str; 3] = ["swd", "cd", "sinkhorn"];
const METRICS: [&str; 5] = ["emd", "swd", "assd", "cn", "si"];

/// Requested names. `swd` appears in both groups and is computed in both.
struct Selection {
    losses: Vec<&'static str>,
    metrics: Vec<&'static str>,
}

fn parse_selection(spec: &str) -> Result<Selection, CliError> {
    let mut losses = Vec::new();
    let mut metrics = Vec::new();
    for item in spec.split(',').map(str::trim) {
        if item == "all" {
            losses.extend(LOSSES);
            metrics.extend(METRICS);
            continue;
        }
        let l = LOSSES.iter().find(|n| **n == item);
        let m = METRICS.iter().find(|n| **n == item);
        if l.is_none() && m.is_none() {
            return Err(CliError::Config(format!("unknown loss or metric '{item}'")));
        }
        losses.extend(l);
        metrics.extend(m);
    }
    losses.sort_unstable();
    losses.dedup();
    metrics.sort_unstable();
    metrics.dedup();
    Ok(Selection { losses, metrics })
}

fn check(args: &Args) -> Result<(), CliError> {
    if args.m == 0 || args.projections == 0 || args.emd_points == 0 {
        return Err(CliError::Config("--m, --L and --emd-points must be positive".into()));
    }
    if !(args.p >= 1.0 && args.p.is_finite()) {
        return Err(CliError::Config("--p must be a finite number >= 1".into()));
    }
    if !(args.normal_weight >= 0.0 && args.normal_weight.is_finite()) {
        return Err(CliError::Config("--normal-weight must be nonnegative".into()));
    }
    Ok(())
}

fn encode(mesh: &TriangleMesh, samples: &SurfaceSamples, args: &Args) -> Result<DiscreteMeasure, CliError> {
    Ok(match args.encoding {
        EncodingArg::Sample => samples.to_measure(),
        EncodingArg::Varifold => mesh_to_varifold(mesh, args.normal_weight)?.measure,
    })
}

pub fn run(args: &Args, env: &Environment) -> Result<Value, CliError> {
    check(args)?;
    let sel = parse_selection(&args.loss)?;
    let a = load_mesh(&args.mesh_a, None)?;
    let b = load_mesh(&args.mesh_b, None)?;

    // One sampler for both meshes: a mesh compared with itself sees identical samples.
    let sampler = SamplerState::new(args.seed);
    let sa = sample_mesh_detailed(&a, args.m, &sampler)?;
    let sb = sample_mesh_detailed(&b, args.m, &sampler)?;
    let proj_seed = sampler.derive(PROJECTION_LABEL);

    let mut losses = Map::new();
    if !sel.losses.is_empty() {
        let (ea, eb) = (encode(&a, &sa, args)?, encode(&b, &sb, args)?);
        for &name in &sel.losses {
            let v = match name {
                "swd" => {
                    let proj = sample_directions(args.projections, ea.dim(), proj_seed)?;
                    sliced_wasserstein_value(&ea, &eb, args.p, &proj)?
                }
                "cd" => chamfer(&ea, &eb, ChamferAccel::KdTree)?.value,
                _ => {
                    let (out, eps) = scaled_sinkhorn(&ea, &eb, args.p, args.emd_points)?;
                    losses.insert("sinkhorn_epsilon".into(), json!(eps));
                    losses.insert("sinkhorn_converged".into(), json!(out.converged));
                    out.loss.value
                }
            };
            losses.insert(name.into(), json!(v));
        }
    }

    let mut metrics = Map::new();
    let (ma, mb) = (sa.to_measure(), sb.to_measure());
    for &name in &sel.metrics {
        let v = match name {
            "emd" => {
                let (emd, eps) = emd_estimate(&ma, &mb, args.p, args.emd_points)?;
                metrics.insert("emd_epsilon".into(), json!(eps));
                emd
            }
            "swd" => {
                let proj = sample_directions(args.projections, 3, proj_seed)?;
                sliced_wasserstein_value(&ma, &mb, args.p, &proj)?.max(0.0).powf(1.0 / args.p)
            }
            "assd" => assd(&ma, &mb),
            "cn" => chamfer_normals(&sa, &a, &sb, &b, args.signed_normals),
            _ => 100.0 * self_intersection_ratio(&a),
        };
        if !v.is_finite() {
            return Err(CliError::Numeric(format!("{name} is not finite")));
        }
        metrics.insert(name.into(), json!(v));
    }

    let config = json!({
        "mesh_a": args.mesh_a.display().to_string(),
        "mesh_b": args.mesh_b.display().to_string(),
        "loss": args.loss,
        "m": args.m,
        "L": args.projections,
        "p": args.p,
        "seed": args.seed,
        "encoding": match args.encoding { EncodingArg::Sample => "sample", EncodingArg::Varifold => "varifold" },
        "normal_weight": args.normal_weight,
        "emd_points": args.emd_points.min(args.m),
        "epsilon_scale": EPSILON_SCALE,
        "signed_normals": args.signed_normals,
    });
    let results = json!({ "losses": losses, "metrics": metrics });
    let doc = report::experiment("compare", config, env, results);
    if let Some(dir) = &args.out {
        report::ensure_dir(dir)?;
        report::write_json(&dir.join("compare.json"), &doc)?;
    }
    Ok(doc)
}
