//! `meshot deform CONFIG`: one optimization run described by a key=value file.
//!
//! | key | values (default) |
//! |-----|------------------|
//! | `source`, `target` | mesh paths, relative to the config file |
//! | `model` | `displacement`, `rbf_flow` (`displacement`) |
//! | `centers`, `sigma`, `integrator`, `steps` | flow settings (64, 0.25 × bbox diagonal, `rk4`, 10) |
//! | `loss` | `swd`, `cd`, `sinkhorn` (`swd`) |
//! | `L`, `p`, `epsilon`, `sinkhorn_iters` | loss settings (100, 2, 0.01, 10000) |
//! | `encoding`, `target_encoding` | `vertices`, `samples`, `varifold` (`samples`; target defaults to the source's) |
//! | `samples`, `resample`, `normal_weight` | encoding settings (5000, true, 1) |
//! | `optimizer` | `sgd`, `adam` (`sgd`) |
//! | `lr`, `momentum`, `beta1`, `beta2`, `adam_eps` | optimizer settings (1.0, 0.9, 0.9, 0.999, 1e-8) |
//! | `iterations`, `seed`, `reseed` | (1000, 0, `per_iteration` or `fixed`) |
//! | `output` | deformed mesh file name, `.obj` or `.off` (`deformed.obj`) |

use std::path::PathBuf;

use meshot::deform::{
    optimize, Encoding, FlowConfig, Integrator, LossSpec, ModelSpec, OptimizerConfig, OptimizerMethod,
    ProjectionReseed, RunConfig, Shape,
};
use meshot::mesh::{load_mesh, save_mesh, self_intersection_ratio};
use meshot::transport::{ChamferAccel, SinkhornConfig};
use serde_json::{json, Value};

use crate::config::KeyValues;
use crate::error::CliError;
use crate::report::{self, Environment};

#[derive(Debug, clap::Args)]
pub struct Args {
    pub config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config's iteration count.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn encoding(kv: &KeyValues, key: &str, default: &str) -> Result<Encoding, CliError> {
    let name: String = kv.get_or(key, default.to_string())?;
    Ok(match name.as_str() {
        "vertices" => Encoding::Vertices,
        "samples" => Encoding::Samples { count: kv.get_or("samples", 5000)?, resample: kv.get_or("resample", true)? },
        "varifold" => Encoding::Varifold { normal_weight: kv.get_or("normal_weight", 1.0)? },
        other => return Err(CliError::Config(format!("{key} = {other}: expected vertices, samples or varifold"))),
    })
}

/// Run configuration and the source/target paths it names.
pub fn parse_run(kv: &KeyValues) -> Result<(RunConfig, PathBuf, PathBuf), CliError> {
    let source = kv.require_path("source")?;
    let target = kv.require_path("target")?;

    let model = match kv.get_or("model", "displacement".to_string())?.as_str() {
        "displacement" => ModelSpec::Displacement,
        "rbf_flow" => {
            let integrator: Integrator =
                kv.get_or("integrator", "rk4".to_string())?.parse().map_err(CliError::Config)?;
            ModelSpec::RbfFlow {
                num_centers: kv.get_or("centers", 64)?,
                sigma: kv.get("sigma")?,
                flow: FlowConfig { integrator, steps: kv.get_or("steps", 10)? },
            }
        }
        other => return Err(CliError::Config(format!("model = {other}: expected displacement or rbf_flow"))),
    };

    let p = kv.get_or("p", 2.0)?;
    let loss = match kv.get_or("loss", "swd".to_string())?.as_str() {
        "swd" => LossSpec::Swd { projections: kv.get_or("L", 100)?, p },
        "cd" => LossSpec::Chamfer { accel: ChamferAccel::KdTree },
        "sinkhorn" => LossSpec::Sinkhorn(SinkhornConfig {
            p,
            epsilon: kv.get_or("epsilon", 1e-2)?,
            max_iter: kv.get_or("sinkhorn_iters", 10_000)?,
            ..SinkhornConfig::default()
        }),
        other => return Err(CliError::Config(format!("loss = {other}: expected swd, cd or sinkhorn"))),
    };

    let method = match kv.get_or("optimizer", "sgd".to_string())?.as_str() {
        "sgd" => OptimizerMethod::sgd(kv.get_or("momentum", 0.9)?),
        "adam" => OptimizerMethod::Adam {
            beta1: kv.get_or("beta1", 0.9)?,
            beta2: kv.get_or("beta2", 0.999)?,
            eps: kv.get_or("adam_eps", 1e-8)?,
        },
        other => return Err(CliError::Config(format!("optimizer = {other}: expected sgd or adam"))),
    };
    let reseed = match kv.get_or("reseed", "per_iteration".to_string())?.as_str() {
        "per_iteration" => ProjectionReseed::PerIteration,
        "fixed" => ProjectionReseed::Fixed,
        other => return Err(CliError::Config(format!("reseed = {other}: expected per_iteration or fixed"))),
    };

    let enc = encoding(kv, "encoding", "samples")?;
    let target_encoding = match kv.get::<String>("target_encoding")? {
        Some(name) => Some(encoding(kv, "target_encoding", &name)?),
        None => None,
    };
    let cfg = RunConfig {
        model,
        encoding: enc,
        target_encoding,
        optimizer: OptimizerConfig {
            method,
            learning_rate: kv.get_or("lr", 1.0)?,
            iterations: kv.get_or("iterations", 1000)?,
            loss,
            reseed,
        },
        seed: kv.get_or("seed", 0)?,
    };
    Ok((cfg, source, target))
}

pub fn run(args: &Args, env: &Environment) -> Result<Value, CliError> {
    let kv = KeyValues::load(&args.config)?;
    let (mut cfg, source_path, target_path) = parse_run(&kv)?;
    let output: String = kv.get_or("output", "deformed.obj".to_string())?;
    kv.reject_unknown()?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.iterations {
        cfg.optimizer.iterations = n;
    }

    let source = load_mesh(&source_path, None)?;
    let target = load_mesh(&target_path, None)?;
    let source_si = 100.0 * self_intersection_ratio(&source);
    let result = optimize(&Shape::Mesh(source), &Shape::Mesh(target), &cfg)?;
    let Shape::Mesh(deformed) = &result.shape else { unreachable!("mesh in, mesh out") };

    let mut config = kv.to_json();
    config["seed"] = json!(cfg.seed);
    config["iterations"] = json!(cfg.optimizer.iterations);
    let results = json!({
        "first_loss": result.losses[0],
        "final_loss": result.losses[result.losses.len() - 1],
        "iterations": result.losses.len(),
        "source_si_percent": source_si,
        "si_percent": 100.0 * self_intersection_ratio(deformed),
        "lipschitz_bound": result.lipschitz_bound(),
        "injectivity_certified": result.injectivity_certified(),
        "wall_ns_total": result.wall_ns.iter().sum::<u64>(),
    });
    let doc = report::experiment("deform", config, env, results);
    if let Some(dir) = &args.out {
        report::ensure_dir(dir)?;
        save_mesh(deformed, dir.join(&output), None)?;
        report::write_text(&dir.join("loss.csv"), &report::loss_csv(&result.losses, &result.wall_ns))?;
        report::write_json(&dir.join("run.json"), &doc)?;
    }
    Ok(doc)
}
