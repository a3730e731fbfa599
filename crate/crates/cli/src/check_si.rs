//! `meshot check-si MESH`: share of faces that intersect a non-adjacent face.

use std::path::PathBuf;

use meshot::mesh::{load_mesh, self_intersecting_faces};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::report::{self, Environment};

#[derive(Debug, clap::Args)]
pub struct Args {
    pub mesh: PathBuf,
}

pub fn run(args: &Args, env: &Environment) -> Result<Value, CliError> {
    let mesh = load_mesh(&args.mesh, None)?;
    let flags = self_intersecting_faces(&mesh);
    let hit = flags.iter().filter(|f| **f).count();
    let percent = if flags.is_empty() { 0.0 } else { 100.0 * hit as f64 / flags.len() as f64 };
    Ok(report::experiment(
        "check-si",
        json!({ "mesh": args.mesh.display().to_string() }),
        env,
        json!({ "si_percent": percent, "intersecting_faces": hit, "faces": flags.len() }),
    ))
}
