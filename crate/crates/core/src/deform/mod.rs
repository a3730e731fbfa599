//! Deformation models and the optimization loop.
//!
//! Two parameterizations move a source shape's vertices:
//!
//! * a free per-vertex displacement (`x_i + u_i`), which can fold the
//!   surface onto itself;
//! * the time-one flow of a stationary Gaussian-RBF velocity field
//!   ([`RbfVelocityField`]), whose Lipschitz velocity makes the map
//!   injective, so trajectories cannot cross.
//!
//! [`optimize`] runs the loop: apply the model, rebuild the measure (vertex
//! cloud, fresh or fixed surface samples, or the varifold), evaluate the loss
//! and its gradient, pull the gradient back to the parameters and take an
//! optimizer step.

mod flow;
mod optim;
mod run;

use thiserror::Error;

use crate::measures::MeasureError;
use crate::mesh::MeshError;
use crate::transport::TransportError;

pub use flow::{
    farthest_point_subsample, flow_gradient, integrate_flow, FlowConfig, FlowGradient, FlowTape, Integrator,
    RbfVelocityField,
};
pub use optim::{Optimizer, OptimizerMethod};
pub use run::{
    encode, evaluate_loss, optimize, projection_seed, sampler_for, Encoded, Encoding, LossSpec, ModelSpec,
    OptimizerConfig, ProjectionReseed, RunConfig, RunResult, SampleRole, Shape,
};

#[derive(Debug, Error)]
pub enum DeformError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("flow produced a non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("no forward integration tape is available for the backward pass")]
    MissingTape,
    #[error("optimization diverged at iteration {iteration} (loss {value})")]
    Diverged { iteration: usize, value: f64 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}
