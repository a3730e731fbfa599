//! Report plumbing shared by the subcommands.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{io_error, CliError};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Environment {
    pub threads: usize,
}

/// `{experiment, config, environment, results}`, the common top level of
/// every command's JSON output.
pub fn experiment(name: &str, config: Value, env: &Environment, results: Value) -> Value {
    json!({
        "experiment": name,
        "config": config,
        "environment": env,
        "results": results,
    })
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    write_text(path, &(serde_json::to_string_pretty(value).expect("serializable") + "\n"))
}

/// `iter,loss,wall_ns` rows.
pub fn loss_csv(losses: &[f64], wall_ns: &[u64]) -> String {
    let mut s = String::from("iter,loss,wall_ns\n");
    for (i, (l, w)) in losses.iter().zip(wall_ns).enumerate() {
        s.push_str(&format!("{i},{l:e},{w}\n"));
    }
    s
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
