//! Discrepancies between discrete measures, each returning a value and the
//! gradient with respect to the supports of the first ("movable") measure.
//!
//! * [`wasserstein_1d`]: exact `W_p^p` on the line for arbitrary weights.
//! * [`sliced_wasserstein`]: Monte Carlo average of 1D costs over a
//!   [`ProjectionSet`], `O(L m log m)`.
//! * [`chamfer`]: symmetric mean squared nearest-neighbour distance, brute
//!   force `O(m^2)` or kd-tree backed.
//! * [`sinkhorn_divergence`]: debiased entropic OT in the log domain.
//! * [`regularizer_suite`]: edge-length, normal-consistency and Laplacian
//!   losses on a mesh.
//!
//! Per-projection and per-point work runs on rayon; reductions are always
//! performed sequentially in index order so results are bit-identical for
//! any thread count.

mod chamfer;
mod kdtree;
mod one_d;
mod regularizers;
mod sinkhorn;
mod sliced;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

pub use chamfer::{chamfer, nearest_neighbors, ChamferAccel};
pub use kdtree::KdTree;
pub use one_d::{coupling_1d, wasserstein_1d, Coupling1d, CouplingSegment};
pub use regularizer_types::{MeshLoss, RegularizerLosses};
pub use regularizers::regularizer_suite;
pub use sinkhorn::{sinkhorn_divergence, SinkhornConfig, SinkhornOutput};
pub use sliced::{sliced_wasserstein, sliced_wasserstein_per_projection, sliced_wasserstein_value};

mod regularizer_types {
    use crate::linalg::Vec3;

    /// A scalar mesh loss and its per-vertex gradient.
    #[derive(Debug, Clone, PartialEq)]
    pub struct MeshLoss {
        pub value: f64,
        pub grad: Vec<Vec3>,
    }

    #[derive(Debug, Clone, PartialEq)]
    pub struct RegularizerLosses {
        pub edge_length: MeshLoss,
        pub normal_consistency: MeshLoss,
        pub laplacian: MeshLoss,
    }
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("weights must sum to 1 (got {0})")]
    WeightSum(f64),
    #[error("length mismatch between values ({values}) and weights ({weights})")]
    LengthMismatch { values: usize, weights: usize },
    #[error("empty input")]
    Empty,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Loss value with the gradient on the movable measure's supports
/// (flattened `n x d`) and, where defined, on its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValueGrad {
    pub value: f64,
    pub grad: Vec<f64>,
    pub weight_grad: Option<Vec<f64>>,
}

/// `L` unit directions in `R^d`, regenerable from `(seed, L, d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    dim: usize,
    directions: Vec<f64>,
    seed: u64,
}

impl ProjectionSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.directions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn direction(&self, l: usize) -> &[f64] {
        &self.directions[l * self.dim..(l + 1) * self.dim]
    }

    /// Builds a set from explicit directions (normalized here).
    pub fn from_directions(dim: usize, directions: Vec<f64>) -> Result<Self, TransportError> {
        if dim == 0 || directions.is_empty() || directions.len() % dim != 0 {
            return Err(TransportError::InvalidParameter("directions must be a non-empty multiple of dim".into()));
        }
        let mut directions = directions;
        for chunk in directions.chunks_mut(dim) {
            let n = chunk.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(n > 0.0) || !n.is_finite() {
                return Err(TransportError::InvalidParameter("zero or non-finite direction".into()));
            }
            chunk.iter_mut().for_each(|x| *x /= n);
        }
        Ok(Self { dim, directions, seed: 0 })
    }
}

/// `L` i.i.d. directions uniform on the sphere `S^{d-1}` (normalized Gaussian
/// vectors), deterministic per seed.
pub fn sample_directions(num: usize, dim: usize, seed: u64) -> Result<ProjectionSet, TransportError> {
    if num == 0 {
        return Err(TransportError::InvalidParameter("need at least one projection".into()));
    }
    if dim < 2 {
        return Err(TransportError::InvalidParameter("projections need dimension >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut directions = Vec::with_capacity(num * dim);
    let mut buf = vec![0.0; dim];
    for _ in 0..num {
        loop {
            for x in buf.iter_mut() {
                *x = StandardNormal.sample(&mut rng);
            }
            let n = buf.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-12 {
                directions.extend(buf.iter().map(|x| x / n));
                break;
            }
        }
    }
    Ok(ProjectionSet { dim, directions, seed })
}

/// One benchmark-harness record for a loss evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct LossRecord {
    pub loss_name: String,
    pub value: f64,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub num_projections: Option<usize>,
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub seed: u64,
    pub wall_time_ns: u128,
}

pub(crate) fn check_same_dim(a: usize, b: usize) -> Result<(), TransportError> {
    if a != b {
        return Err(TransportError::DimensionMismatch(a, b));
    }
    Ok(())
}
