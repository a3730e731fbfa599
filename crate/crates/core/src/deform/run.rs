use std::time::Instant;

use super::flow::{farthest_point_subsample, flow_gradient, integrate_flow, FlowConfig, FlowTape, RbfVelocityField};
use super::optim::{Optimizer, OptimizerMethod};
use super::DeformError;
use crate::linalg::Vec3;
use crate::measures::{mesh_to_varifold, sample_mesh_detailed, sample_polyline, DiscreteMeasure, SamplerState, SurfaceSamples, Varifold};
use crate::mesh::{Polyline2D, TriangleMesh};
use crate::transport::{chamfer, sample_directions, sinkhorn_divergence, sliced_wasserstein, ChamferAccel, LossValueGrad, SinkhornConfig};

/// A deformable (or target) shape.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Mesh(TriangleMesh),
    Polyline(Polyline2D),
    /// Bare point cloud, row-major `n x dim`.
    Points { dim: usize, coords: Vec<f64> },
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Mesh(_) => 3,
            Shape::Polyline(_) => 2,
            Shape::Points { dim, .. } => *dim,
        }
    }

    pub fn num_vertices(&self) -> usize {
        match self {
            Shape::Mesh(m) => m.num_vertices(),
            Shape::Polyline(p) => p.vertices().len(),
            Shape::Points { dim, coords } => coords.len() / dim,
        }
    }

    /// Flattened vertex coordinates.
    pub fn coords(&self) -> Vec<f64> {
        match self {
            Shape::Mesh(m) => m.vertices().iter().flatten().copied().collect(),
            Shape::Polyline(p) => p.vertices().iter().flatten().copied().collect(),
            Shape::Points { coords, .. } => coords.clone(),
        }
    }

    /// Same connectivity, new vertex positions.
    pub fn with_coords(&self, coords: &[f64]) -> Shape {
        match self {
            Shape::Mesh(m) => Shape::Mesh(m.with_vertices(coords.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())),
            Shape::Polyline(p) => Shape::Polyline(p.with_vertices(coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect())),
            Shape::Points { dim, .. } => Shape::Points { dim: *dim, coords: coords.to_vec() },
        }
    }

    fn bounding_box_diagonal(&self) -> f64 {
        let d = self.dim();
        let c = self.coords();
        (0..d)
            .map(|k| {
                let (lo, hi) = c.iter().skip(k).step_by(d).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
                (hi - lo).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// How a shape becomes a measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Encoding {
    /// Uniform weights on the vertices themselves.
    Vertices,
    /// Area-uniform surface samples. With `resample` false the draws are
    /// made once and carried along. Polylines (arc-length samples) are
    /// accepted as targets only.
    Samples { count: usize, resample: bool },
    /// Oriented varifold (meshes only).
    Varifold { normal_weight: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossSpec {
    Swd { projections: usize, p: f64 },
    Chamfer { accel: ChamferAccel },
    Sinkhorn(SinkhornConfig),
}

impl LossSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Swd { .. } => "swd",
            LossSpec::Chamfer { .. } => "cd",
            LossSpec::Sinkhorn(_) => "sinkhorn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionReseed {
    #[default]
    PerIteration,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub method: OptimizerMethod,
    pub learning_rate: f64,
    pub iterations: usize,
    pub loss: LossSpec,
    pub reseed: ProjectionReseed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    Displacement,
    /// Centers are a farthest-point subsample of the source vertices;
    /// `sigma` defaults to a quarter of the source bounding-box diagonal.
    RbfFlow { num_centers: usize, sigma: Option<f64>, flow: FlowConfig },
}

impl ModelSpec {
    pub fn rbf_default() -> Self {
        ModelSpec::RbfFlow { num_centers: 64, sigma: None, flow: FlowConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub encoding: Encoding,
    /// Encoding of the target when it differs from the source's.
    pub target_encoding: Option<Encoding>,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub shape: Shape,
    /// Loss before each optimizer step.
    pub losses: Vec<f64>,
    pub wall_ns: Vec<u64>,
    /// Final velocity field and integrator for flow runs.
    pub field: Option<RbfVelocityField>,
    pub flow: Option<FlowConfig>,
}

impl RunResult {
    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.field.as_ref().map(RbfVelocityField::lipschitz_bound)
    }

    pub fn injectivity_certified(&self) -> Option<bool> {
        match (&self.field, &self.flow) {
            (Some(f), Some(cfg)) => Some(f.injectivity_certified(cfg)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleRole {
    Source,
    Target,
    Projection,
}

/// Sampler for a given role and iteration. Iteration 0 of a run and a
/// standalone evaluation with the same seed draw identical samples.
pub fn sampler_for(seed: u64, role: SampleRole, iteration: usize) -> SamplerState {
    let label = match role {
        SampleRole::Source => 0x736f_7572,
        SampleRole::Target => 0x7461_7267,
        SampleRole::Projection => 0x7072_6f6a,
    };
    SamplerState::with_stream(SamplerState::new(seed).derive(label), iteration as u64)
}

pub fn projection_seed(seed: u64, iteration: usize, reseed: ProjectionReseed) -> u64 {
    let it = match reseed {
        ProjectionReseed::PerIteration => iteration,
        ProjectionReseed::Fixed => 0,
    };
    sampler_for(seed, SampleRole::Projection, it).derive(0)
}

/// A measure plus what is needed to pull gradients back to vertices.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub measure: DiscreteMeasure,
    back: Backward,
}

#[derive(Debug, Clone)]
enum Backward {
    Vertices,
    Samples(SurfaceSamples),
    Varifold(Varifold),
    /// No path back to vertices (target-only encodings).
    Detached,
}

fn mesh_of<'a>(shape: &'a Shape, what: &str) -> Result<&'a TriangleMesh, DeformError> {
    match shape {
        Shape::Mesh(m) => Ok(m),
        _ => Err(DeformError::Config(format!("{what} encoding needs a triangle mesh"))),
    }
}

/// Encodes `shape` with fresh randomness from `sampler`.
pub fn encode(shape: &Shape, encoding: &Encoding, sampler: &SamplerState) -> Result<Encoded, DeformError> {
    match (encoding, shape) {
        (Encoding::Vertices, _) | (Encoding::Samples { .. }, Shape::Points { .. }) => Ok(Encoded {
            measure: DiscreteMeasure::uniform(shape.dim(), shape.coords())?,
            back: Backward::Vertices,
        }),
        (Encoding::Samples { count, .. }, Shape::Polyline(p)) => {
            Ok(Encoded { measure: sample_polyline(p, *count, sampler)?, back: Backward::Detached })
        }
        (Encoding::Samples { count, .. }, _) => {
            let mesh = mesh_of(shape, "sample")?;
            let s = sample_mesh_detailed(mesh, *count, sampler)?;
            Ok(Encoded { measure: s.to_measure(), back: Backward::Samples(s) })
        }
        (Encoding::Varifold { normal_weight }, _) => {
            let v = mesh_to_varifold(mesh_of(shape, "varifold")?, *normal_weight)?;
            Ok(Encoded { measure: v.measure.clone(), back: Backward::Varifold(v) })
        }
    }
}

impl Encoded {
    /// The same encoding evaluated on moved vertices, reusing the sample
    /// draws where there are any.
    fn refresh(&self, shape: &Shape, encoding: &Encoding) -> Result<Encoded, DeformError> {
        match &self.back {
            Backward::Samples(s) => {
                let mesh = mesh_of(shape, "sample")?;
                let pts = s.reposition(mesh);
                let measure = self.measure.with_supports(pts.iter().flatten().copied().collect())?;
                Ok(Encoded { measure, back: self.back.clone() })
            }
            _ => encode(shape, encoding, &SamplerState::new(0)),
        }
    }

    /// Flattened gradient w.r.t. the shape's vertex coordinates.
    pub fn vertex_gradient(&self, shape: &Shape, loss: &LossValueGrad) -> Vec<f64> {
        let flat = |g: Vec<Vec3>| g.into_iter().flatten().collect::<Vec<f64>>();
        match (&self.back, shape) {
            (Backward::Vertices, _) => loss.grad.clone(),
            (Backward::Samples(s), Shape::Mesh(m)) => flat(s.vertex_gradient(m, &loss.grad)),
            (Backward::Varifold(v), Shape::Mesh(m)) => flat(v.vertex_gradient(m, &loss.grad, loss.weight_grad.as_deref())),
            _ => unreachable!("only vertex, sample and varifold encodings of a mesh are differentiated"),
        }
    }
}

/// One loss evaluation. Projections for the sliced loss come from `proj_seed`.
pub fn evaluate_loss(mu: &DiscreteMeasure, nu: &DiscreteMeasure, loss: &LossSpec, proj_seed: u64) -> Result<LossValueGrad, DeformError> {
    Ok(match loss {
        LossSpec::Swd { projections, p } => {
            let proj = sample_directions(*projections, mu.dim(), proj_seed)?;
            sliced_wasserstein(mu, nu, *p, &proj)?
        }
        LossSpec::Chamfer { accel } => chamfer(mu, nu, *accel)?,
        LossSpec::Sinkhorn(cfg) => sinkhorn_divergence(mu, nu, cfg)?.loss,
    })
}

enum Model {
    Displacement { base: Vec<f64>, offsets: Vec<f64> },
    Flow { base: Vec<f64>, field: RbfVelocityField, flow: FlowConfig },
}

impl Model {
    fn new(spec: &ModelSpec, source: &Shape) -> Result<Self, DeformError> {
        let base = source.coords();
        match spec {
            ModelSpec::Displacement => Ok(Model::Displacement { offsets: vec![0.0; base.len()], base }),
            ModelSpec::RbfFlow { num_centers, sigma, flow } => {
                let d = source.dim();
                if *num_centers == 0 {
                    return Err(DeformError::Config("rbf flow needs at least one center".into()));
                }
                let idx = farthest_point_subsample(&base, d, *num_centers);
                let centers: Vec<f64> = idx.iter().flat_map(|&i| base[i * d..(i + 1) * d].iter().copied()).collect();
                let sigma = sigma.unwrap_or(0.25 * source.bounding_box_diagonal());
                let field = RbfVelocityField::zeros(d, centers, sigma)?;
                Ok(Model::Flow { base, field, flow: *flow })
            }
        }
    }

    fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Model::Displacement { offsets, .. } => offsets,
            Model::Flow { field, .. } => field.coefficients_mut(),
        }
    }

    fn apply(&self) -> Result<(Vec<f64>, Option<FlowTape>), DeformError> {
        match self {
            Model::Displacement { base, offsets } => Ok((base.iter().zip(offsets).map(|(a, b)| a + b).collect(), None)),
            Model::Flow { base, field, flow } => {
                let tape = integrate_flow(field, base, flow)?;
                let end = tape.endpoints().expect("non-empty tape").to_vec();
                Ok((end, Some(tape)))
            }
        }
    }

    fn param_gradient(&self, vertex_grad: Vec<f64>, tape: Option<&FlowTape>) -> Result<Vec<f64>, DeformError> {
        match self {
            Model::Displacement { .. } => Ok(vertex_grad),
            Model::Flow { field, .. } => {
                let tape = tape.ok_or(DeformError::MissingTape)?;
                Ok(flow_gradient(field, tape, &vertex_grad)?.coefficients)
            }
        }
    }
}

/// Gradient-based deformation of `source` onto `target`.
pub fn optimize(source: &Shape, target: &Shape, cfg: &RunConfig) -> Result<RunResult, DeformError> {
    let opt = &cfg.optimizer;
    if opt.iterations == 0 {
        return Err(DeformError::Config("iterations must be at least 1".into()));
    }
    if source.dim() != target.dim() {
        return Err(DeformError::Config(format!("source is {}D but target is {}D", source.dim(), target.dim())));
    }
    let target_encoding = cfg.target_encoding.unwrap_or(cfg.encoding);
    let resamples = |e: &Encoding| match e {
        Encoding::Samples { count: 0, .. } => Err(DeformError::Config("sample count must be positive".into())),
        Encoding::Samples { resample, .. } => Ok(*resample),
        _ => Ok(false),
    };
    let resample = resamples(&cfg.encoding)?;
    let resample_target = resamples(&target_encoding)?;
    if matches!((source, cfg.encoding), (Shape::Polyline(_), Encoding::Samples { .. })) {
        return Err(DeformError::Config("polyline sources are optimized through their vertices".into()));
    }

    let mut model = Model::new(&cfg.model, source)?;
    let num_params = model.params_mut().len();
    let mut optimizer = Optimizer::new(opt.method, opt.learning_rate, num_params)?;

    let mut target_enc = encode(target, &target_encoding, &sampler_for(cfg.seed, SampleRole::Target, 0))?;
    let mut source_enc: Option<Encoded> = None;
    let mut losses = Vec::with_capacity(opt.iterations);
    let mut wall_ns = Vec::with_capacity(opt.iterations);

    for it in 0..opt.iterations {
        let t0 = Instant::now();
        let (coords, tape) = model.apply()?;
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(DeformError::Diverged { iteration: it, value: f64::NAN });
        }
        let shape = source.with_coords(&coords);
        let enc = match &source_enc {
            Some(prev) if !resample => prev.refresh(&shape, &cfg.encoding)?,
            _ => encode(&shape, &cfg.encoding, &sampler_for(cfg.seed, SampleRole::Source, it))?,
        };
        if resample_target && it > 0 {
            target_enc = encode(target, &target_encoding, &sampler_for(cfg.seed, SampleRole::Target, it))?;
        }
        let loss = evaluate_loss(&enc.measure, &target_enc.measure, &opt.loss, projection_seed(cfg.seed, it, opt.reseed))?;
        if !loss.value.is_finite() {
            return Err(DeformError::Diverged { iteration: it, value: loss.value });
        }
        let vgrad = enc.vertex_gradient(&shape, &loss);
        let pgrad = model.param_gradient(vgrad, tape.as_ref())?;
        if pgrad.iter().any(|g| !g.is_finite()) {
            return Err(DeformError::Diverged { iteration: it, value: loss.value });
        }
        optimizer.step(model.params_mut(), &pgrad);
        losses.push(loss.value);
        wall_ns.push(t0.elapsed().as_nanos() as u64);
        source_enc = Some(enc);
    }

    let (coords, _) = model.apply()?;
    let (field, flow) = match model {
        Model::Flow { field, flow, .. } => (Some(field), Some(flow)),
        Model::Displacement { .. } => (None, None),
    };
    Ok(RunResult { shape: source.with_coords(&coords), losses, wall_ns, field, flow })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    fn points(coords: Vec<f64>) -> Shape {
        Shape::Points { dim: 2, coords }
    }

    fn sgd(loss: LossSpec, iterations: usize) -> OptimizerConfig {
        OptimizerConfig {
            method: OptimizerMethod::sgd(0.9),
            learning_rate: 0.5,
            iterations,
            loss,
            reseed: ProjectionReseed::PerIteration,
        }
    }

    #[test]
    fn identical_source_and_target_stay_put() {
        let s = Shape::Polyline(shapes::circle(32, 1.0));
        for model in [ModelSpec::Displacement, ModelSpec::rbf_default()] {
            let cfg = RunConfig {
                model,
                encoding: Encoding::Vertices,
                target_encoding: None,
                optimizer: sgd(LossSpec::Swd { projections: 20, p: 2.0 }, 5),
                seed: 1,
            };
            let r = optimize(&s, &s, &cfg).unwrap();
            assert!(r.losses[0].abs() < 1e-15);
            let drift = r.shape.coords().iter().zip(s.coords()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(drift < 1e-12, "{model:?}: {drift}");
        }
    }

    #[test]
    fn first_loss_matches_standalone_evaluation() {
        let src = Shape::Mesh(shapes::icosphere(1));
        let tgt = Shape::Mesh(shapes::ellipsoid(1, [1.3, 0.8, 1.0]));
        let enc = Encoding::Samples { count: 200, resample: true };
        let loss = LossSpec::Swd { projections: 30, p: 2.0 };
        let cfg = RunConfig { model: ModelSpec::Displacement, encoding: enc, target_encoding: None, optimizer: sgd(loss, 2), seed: 9 };
        let r = optimize(&src, &tgt, &cfg).unwrap();
        let mu = encode(&src, &enc, &sampler_for(9, SampleRole::Source, 0)).unwrap();
        let nu = encode(&tgt, &enc, &sampler_for(9, SampleRole::Target, 0)).unwrap();
        let v = evaluate_loss(&mu.measure, &nu.measure, &loss, projection_seed(9, 0, ProjectionReseed::PerIteration)).unwrap();
        assert_eq!(r.losses[0], v.value);
    }

    #[test]
    fn chamfer_pulls_points_together() {
        let src = points(vec![0.0, 0.0, 1.0, 0.0]);
        let tgt = points(vec![0.2, 0.1, 1.1, -0.1]);
        let cfg = RunConfig {
            model: ModelSpec::Displacement,
            encoding: Encoding::Vertices,
            target_encoding: None,
            optimizer: OptimizerConfig { learning_rate: 0.1, ..sgd(LossSpec::Chamfer { accel: ChamferAccel::Brute }, 200) },
            seed: 0,
        };
        let r = optimize(&src, &tgt, &cfg).unwrap();
        assert!(*r.losses.last().unwrap() < 1e-8 * r.losses[0]);
    }

    #[test]
    fn divergence_reports_iteration() {
        let src = points(vec![0.0, 0.0, 1.0, 0.0]);
        let tgt = points(vec![5.0, 0.0, 6.0, 0.0]);
        let cfg = RunConfig {
            model: ModelSpec::Displacement,
            encoding: Encoding::Vertices,
            target_encoding: None,
            optimizer: OptimizerConfig { learning_rate: 1e200, ..sgd(LossSpec::Chamfer { accel: ChamferAccel::Brute }, 50) },
            seed: 0,
        };
        match optimize(&src, &tgt, &cfg) {
            Err(DeformError::Diverged { iteration, .. }) => assert!(iteration > 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn resampled_polyline_target() {
        let src = Shape::Polyline(shapes::circle(40, 1.0));
        let tgt = Shape::Polyline(shapes::circle(7, 1.5));
        let cfg = RunConfig {
            model: ModelSpec::Displacement,
            encoding: Encoding::Vertices,
            target_encoding: Some(Encoding::Samples { count: 40, resample: true }),
            optimizer: OptimizerConfig { learning_rate: 0.1, ..sgd(LossSpec::Chamfer { accel: ChamferAccel::KdTree }, 100) },
            seed: 2,
        };
        let r = optimize(&src, &tgt, &cfg).unwrap();
        assert!(r.losses[99] < 0.2 * r.losses[0]);
    }

    #[test]
    fn varifold_needs_a_mesh() {
        let s = points(vec![0.0, 0.0]);
        let cfg = RunConfig {
            model: ModelSpec::Displacement,
            encoding: Encoding::Varifold { normal_weight: 1.0 },
            target_encoding: None,
            optimizer: sgd(LossSpec::Swd { projections: 4, p: 2.0 }, 1),
            seed: 0,
        };
        assert!(matches!(optimize(&s, &s, &cfg), Err(DeformError::Config(_))));
    }
}
