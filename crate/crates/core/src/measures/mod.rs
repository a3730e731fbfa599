//! Shapes as discrete probability measures.
//!
//! A [`DiscreteMeasure`] is a list of weighted support points in `R^d`. Point
//! samples drawn area-uniformly from a mesh (or arc-length-uniformly from a
//! polyline) give uniform weights; the oriented varifold of a mesh gives one
//! atom per face at `(barycenter, λ·normal)` in `R^6`, weighted by area.

mod sampling;
mod varifold;

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use sampling::{
    sample_mesh, sample_mesh_detailed, sample_polyline, sample_polyline_stratified, uniform_simplex, SurfaceSamples,
};
pub use varifold::{mesh_to_varifold, Varifold};

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("every face of the mesh is degenerate (zero area)")]
    AllFacesDegenerate,
    #[error("polyline has zero total length")]
    ZeroLength,
    #[error("sample count must be positive")]
    ZeroSamples,
    #[error("measure has no supports")]
    Empty,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid supports: {0}")]
    InvalidSupports(String),
    #[error("CSV line {line}: {message}")]
    Csv { line: usize, message: String },
}

/// Tolerance on `|Σw - 1|` accepted by [`DiscreteMeasure::new`] before
/// renormalization.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Weighted point cloud in `R^d` with positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    supports: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure from flattened supports (`len = n * dim`) and weights
    /// that already sum to one within [`WEIGHT_SUM_TOLERANCE`]. Zero-weight
    /// supports are dropped and the rest renormalized exactly.
    pub fn new(dim: usize, supports: Vec<f64>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(MeasureError::InvalidWeights(format!("weights sum to {sum}, expected 1")));
        }
        Self::from_unnormalized(dim, supports, weights)
    }

    /// Like [`DiscreteMeasure::new`] but normalizes arbitrary nonnegative
    /// weights with a positive sum.
    pub fn from_unnormalized(dim: usize, supports: Vec<f64>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        if dim == 0 {
            return Err(MeasureError::InvalidSupports("dimension must be positive".into()));
        }
        if supports.len() != weights.len() * dim {
            return Err(MeasureError::InvalidSupports(format!(
                "{} coordinates for {} weights in dimension {dim}",
                supports.len(),
                weights.len()
            )));
        }
        if let Some(i) = supports.iter().position(|x| !x.is_finite()) {
            return Err(MeasureError::InvalidSupports(format!("support {} is not finite", i / dim)));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(MeasureError::InvalidWeights(format!("weight {w} is negative or not finite")));
        }
        let keep: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
        if keep.is_empty() {
            return Err(MeasureError::Empty);
        }
        let (supports, weights) = if keep.len() == weights.len() {
            (supports, weights)
        } else {
            let s = keep.iter().flat_map(|&i| supports[i * dim..(i + 1) * dim].iter().copied()).collect();
            let w = keep.iter().map(|&i| weights[i]).collect();
            (s, w)
        };
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { dim, supports, weights })
    }

    /// Uniform weights `1/n` on the given flattened supports.
    pub fn uniform(dim: usize, supports: Vec<f64>) -> Result<Self, MeasureError> {
        if dim == 0 || supports.len() % dim != 0 {
            return Err(MeasureError::InvalidSupports(format!(
                "{} coordinates is not a multiple of dimension {dim}",
                supports.len()
            )));
        }
        let n = supports.len() / dim;
        if n == 0 {
            return Err(MeasureError::Empty);
        }
        if let Some(i) = supports.iter().position(|x| !x.is_finite()) {
            return Err(MeasureError::InvalidSupports(format!("support {} is not finite", i / dim)));
        }
        Ok(Self { dim, supports, weights: vec![1.0 / n as f64; n] })
    }

    pub fn from_points<const D: usize>(points: &[[f64; D]]) -> Result<Self, MeasureError> {
        Self::uniform(D, points.iter().flat_map(|p| p.iter().copied()).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn support(&self, i: usize) -> &[f64] {
        &self.supports[i * self.dim..(i + 1) * self.dim]
    }

    /// Flattened supports, row-major `n x dim`.
    pub fn supports(&self) -> &[f64] {
        &self.supports
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same weights, new flattened supports.
    pub fn with_supports(&self, supports: Vec<f64>) -> Result<Self, MeasureError> {
        if supports.len() != self.supports.len() {
            return Err(MeasureError::InvalidSupports("support count must not change".into()));
        }
        if let Some(i) = supports.iter().position(|x| !x.is_finite()) {
            return Err(MeasureError::InvalidSupports(format!("support {} is not finite", i / self.dim)));
        }
        Ok(Self { dim: self.dim, supports, weights: self.weights.clone() })
    }

    pub fn translated(&self, t: &[f64]) -> Self {
        assert_eq!(t.len(), self.dim);
        let supports = self.supports.iter().enumerate().map(|(k, x)| x + t[k % self.dim]).collect();
        Self { dim: self.dim, supports, weights: self.weights.clone() }
    }

    /// Largest Euclidean distance from the weighted mean, a cheap scale proxy.
    pub fn radius(&self) -> f64 {
        let mut mean = vec![0.0; self.dim];
        for i in 0..self.len() {
            for (m, x) in mean.iter_mut().zip(self.support(i)) {
                *m += self.weights[i] * x;
            }
        }
        (0..self.len()).map(|i| crate::linalg::sq_dist(self.support(i), &mean).sqrt()).fold(0.0, f64::max)
    }

    /// CSV with header `w,x0,...,x{d-1}` and shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("w");
        for k in 0..self.dim {
            let _ = write!(out, ",x{k}");
        }
        out.push('\n');
        for i in 0..self.len() {
            let _ = write!(out, "{}", self.weights[i]);
            for x in self.support(i) {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, MeasureError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(MeasureError::Empty)?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"w") || cols.len() < 2 {
            return Err(MeasureError::Csv { line: 1, message: "header must be w,x0,...".into() });
        }
        let dim = cols.len() - 1;
        let mut supports = Vec::new();
        let mut weights = Vec::new();
        for (i, line) in lines {
            let vals: Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| MeasureError::Csv { line: i + 1, message: e.to_string() })?;
            if vals.len() != dim + 1 {
                return Err(MeasureError::Csv { line: i + 1, message: format!("expected {} columns", dim + 1) });
            }
            weights.push(vals[0]);
            supports.extend_from_slice(&vals[1..]);
        }
        Self::new(dim, supports, weights)
    }
}

/// Seed plus stream counter. Identical `(seed, stream)` pairs reproduce the
/// identical random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct SamplerState {
    pub seed: u64,
    pub stream: u64,
}

impl SamplerState {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Returns the current state and advances the stream counter.
    pub fn next_stream(&mut self) -> SamplerState {
        let s = *self;
        self.stream = self.stream.wrapping_add(1);
        s
    }

    /// Independent child seed for a labelled sub-task (splitmix64 mixing).
    pub fn derive(&self, label: u64) -> u64 {
        let mut z = self
            .seed
            .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(self.stream.wrapping_add(1)))
            .wrapping_add(label.wrapping_mul(0xD1B5_4A32_D192_ED03));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}
