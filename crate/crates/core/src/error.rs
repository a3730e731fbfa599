use thiserror::Error;

use crate::deform::DeformError;
use crate::measures::MeasureError;
use crate::mesh::MeshError;
use crate::transport::TransportError;

/// Crate-level error, wrapping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Deform(#[from] DeformError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
