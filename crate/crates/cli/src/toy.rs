//! `meshot toy`: deform points sampled on the unit circle onto a non-convex
//! polygon, once under the sliced Wasserstein loss and once under Chamfer,
//! and compare how evenly each result covers the polygon.
//!
//! The source is `points` i.i.d. uniform angles on the unit circle, sorted so
//! consecutive points form a closed polyline. The target is `points`
//! arc-length-uniform samples of the polygon. Both draws come from streams 1
//! and 2 of the command seed; optimization randomness is derived from it.

use std::path::PathBuf;
use std::time::Instant;

use meshot::deform::{
    optimize, Encoding, FlowConfig, Integrator, LossSpec, ModelSpec, OptimizerConfig, OptimizerMethod,
    ProjectionReseed, RunConfig, RunResult, Shape,
};
use meshot::measures::sample_polyline;
use meshot::metrics::{coverage_gap, emd_estimate};
use meshot::shapes::toy_polygon;
use meshot::transport::ChamferAccel;
use meshot::{DiscreteMeasure, Polyline2D, SamplerState};
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::KeyValues;
use crate::error::CliError;
use crate::report::{self, Environment};
use crate::svg::{self, Layer};

/// Arc-length probes used for the coverage gap.
const COVERAGE_PROBES: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelArg {
    Displacement,
    RbfFlow,
}

impl std::str::FromStr for ModelArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "displacement" => Ok(ModelArg::Displacement),
            "rbf_flow" | "rbf-flow" => Ok(ModelArg::RbfFlow),
            _ => Err(format!("unknown model '{s}' (displacement, rbf_flow)")),
        }
    }
}

#[derive(Debug, Default, clap::Args)]
pub struct Args {
    /// key=value file; command-line flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long = "L")]
    pub projections: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Learning rate (default 1.0, or 0.1 for rbf_flow).
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// RBF centers (rbf_flow only).
    #[arg(long)]
    pub centers: Option<usize>,
    /// Redraw the polygon samples every iteration in the Chamfer run.
    #[arg(long)]
    pub cd_resample: bool,
    /// Also write toy.svg (needs --out).
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ToyConfig {
    pub points: usize,
    #[serde(rename = "L")]
    pub projections: usize,
    pub p: f64,
    pub lr: f64,
    pub momentum: f64,
    pub iterations: usize,
    pub seed: u64,
    pub model: ModelArg,
    pub centers: usize,
    pub cd_resample: bool,
}

/// Flag over config over default. The config key is always read so that
/// overridden keys still count as known.
fn pick<T: std::str::FromStr>(flag: Option<T>, kv: &KeyValues, key: &str, default: T) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    let from_config = kv.get_or(key, default)?;
    Ok(flag.unwrap_or(from_config))
}

fn resolve(args: &Args) -> Result<ToyConfig, CliError> {
    let kv = match &args.config {
        Some(path) => KeyValues::load(path)?,
        None => KeyValues::default(),
    };
    let model = pick(args.model, &kv, "model", ModelArg::Displacement)?;
    let default_lr = if model == ModelArg::RbfFlow { 0.1 } else { 1.0 };
    let cfg = ToyConfig {
        points: pick(args.points, &kv, "points", 678)?,
        projections: pick(args.projections, &kv, "L", 100)?,
        p: pick(args.p, &kv, "p", 2.0)?,
        lr: pick(args.lr, &kv, "lr", default_lr)?,
        momentum: pick(args.momentum, &kv, "momentum", 0.9)?,
        iterations: pick(args.iterations, &kv, "iterations", 1000)?,
        seed: pick(args.seed, &kv, "seed", 0)?,
        model,
        centers: pick(args.centers, &kv, "centers", 64)?,
        cd_resample: kv.get_or("cd_resample", false)? || args.cd_resample,
    };
    kv.reject_unknown()?;
    if cfg.points < 3 {
        return Err(CliError::Config("points must be at least 3".into()));
    }
    if cfg.projections == 0 || !(cfg.p >= 1.0) || !(0.0..1.0).contains(&cfg.momentum) {
        return Err(CliError::Config("need L >= 1, p >= 1 and momentum in [0, 1)".into()));
    }
    Ok(cfg)
}

/// Circle source and polygon target samples for a configuration.
pub fn toy_inputs(points: usize, seed: u64) -> Result<(Polyline2D, DiscreteMeasure), CliError> {
    let mut rng = SamplerState::with_stream(seed, 1).rng();
    let mut angles: Vec<f64> = (0..points).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
    angles.sort_by(f64::total_cmp);
    let circle = Polyline2D::new(angles.iter().map(|a| [a.cos(), a.sin()]).collect(), true)?;
    let target = sample_polyline(&toy_polygon(), points, &SamplerState::with_stream(seed, 2))?;
    Ok((circle, target))
}

struct Variant {
    name: &'static str,
    result: RunResult,
    wall_ns: u128,
}

fn run_variant(
    name: &'static str,
    loss: LossSpec,
    cfg: &ToyConfig,
    source: &Shape,
    target: &DiscreteMeasure,
) -> Result<Variant, CliError> {
    let model = match cfg.model {
        ModelArg::Displacement => ModelSpec::Displacement,
        ModelArg::RbfFlow => ModelSpec::RbfFlow {
            num_centers: cfg.centers,
            sigma: None,
            flow: FlowConfig { integrator: Integrator::Rk4, steps: 10 },
        },
    };
    let resample = name == "cd" && cfg.cd_resample;
    let (target_shape, target_encoding) = if resample {
        (Shape::Polyline(toy_polygon()), Some(Encoding::Samples { count: cfg.points, resample: true }))
    } else {
        (Shape::Points { dim: 2, coords: target.supports().to_vec() }, None)
    };
    let run = RunConfig {
        model,
        encoding: Encoding::Vertices,
        target_encoding,
        optimizer: OptimizerConfig {
            method: OptimizerMethod::sgd(cfg.momentum),
            learning_rate: cfg.lr,
            iterations: cfg.iterations,
            loss,
            reseed: ProjectionReseed::PerIteration,
        },
        seed: cfg.seed,
    };
    let t = Instant::now();
    let result = optimize(source, &target_shape, &run)?;
    Ok(Variant { name, result, wall_ns: t.elapsed().as_nanos() })
}

fn summarize(v: &Variant, target: &DiscreteMeasure, cfg: &ToyConfig) -> Result<Value, CliError> {
    let coords = v.result.shape.coords();
    let Shape::Polyline(poly) = &v.result.shape else { unreachable!("toy source is a polyline") };
    let final_points = DiscreteMeasure::uniform(2, coords.clone())?;
    let (emd, eps) = emd_estimate(&final_points, target, cfg.p, target.len())?;
    Ok(json!({
        "loss": v.name,
        "coverage_gap": coverage_gap(&toy_polygon(), &coords, COVERAGE_PROBES),
        "emd": emd,
        "emd_epsilon": eps,
        "edge_crossings": poly.edge_crossings(),
        "first_loss": v.result.losses[0],
        "final_loss": v.result.losses[v.result.losses.len() - 1],
        "iterations": v.result.losses.len(),
        "lipschitz_bound": v.result.lipschitz_bound(),
        "injectivity_certified": v.result.injectivity_certified(),
        "wall_ns_total": v.wall_ns as u64,
    }))
}

fn points_csv(coords: &[f64]) -> String {
    let mut s = String::from("x,y\n");
    for c in coords.chunks_exact(2) {
        s.push_str(&format!("{},{}\n", c[0], c[1]));
    }
    s
}

pub fn run(args: &Args, env: &Environment) -> Result<Value, CliError> {
    let cfg = resolve(args)?;
    let (circle, target) = toy_inputs(cfg.points, cfg.seed)?;
    let source = Shape::Polyline(circle.clone());
    let swd = run_variant("swd", LossSpec::Swd { projections: cfg.projections, p: cfg.p }, &cfg, &source, &target)?;
    let cd = run_variant("cd", LossSpec::Chamfer { accel: ChamferAccel::KdTree }, &cfg, &source, &target)?;
    let s_swd = summarize(&swd, &target, &cfg)?;
    let s_cd = summarize(&cd, &target, &cfg)?;

    let f = |v: &Value, k: &str| v[k].as_f64().unwrap_or(f64::NAN);
    let comparison = json!({
        "swd_better_coverage": f(&s_swd, "coverage_gap") < f(&s_cd, "coverage_gap"),
        "coverage_gap_ratio": f(&s_swd, "coverage_gap") / f(&s_cd, "coverage_gap"),
        "emd_reduction": 1.0 - f(&s_swd, "emd") / f(&s_cd, "emd"),
    });
    let results = json!({ "swd": s_swd, "cd": s_cd, "comparison": comparison });
    let doc = report::experiment("toy", serde_json::to_value(&cfg).expect("serializable"), env, results);

    if let Some(dir) = &args.out {
        report::ensure_dir(dir)?;
        report::write_text(&dir.join("source_points.csv"), &points_csv(&source.coords()))?;
        report::write_text(&dir.join("target_points.csv"), &points_csv(target.supports()))?;
        for v in [&swd, &cd] {
            report::write_text(&dir.join(format!("{}_points.csv", v.name)), &points_csv(&v.result.shape.coords()))?;
            report::write_text(
                &dir.join(format!("{}_loss.csv", v.name)),
                &report::loss_csv(&v.result.losses, &v.result.wall_ns),
            )?;
        }
        report::write_json(&dir.join("summary.json"), &doc)?;
        if args.svg {
            let polygon = toy_polygon();
            let (sc, cc) = (swd.result.shape.coords(), cd.result.shape.coords());
            let plot = svg::render(
                &[
                    Layer::Contour { points: circle.vertices(), color: "#bbbbbb" },
                    Layer::Contour { points: polygon.vertices(), color: "black" },
                    Layer::Points { coords: &cc, color: "#1f77b4" },
                    Layer::Points { coords: &sc, color: "#d62728" },
                ],
                600.0,
            );
            report::write_text(&dir.join("toy.svg"), &plot)?;
        }
    } else if args.svg {
        return Err(CliError::Config("--svg needs --out".into()));
    }
    Ok(doc)
}
