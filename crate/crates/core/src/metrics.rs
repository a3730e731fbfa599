//! Surface-to-surface evaluation metrics on sampled point sets.
//!
//! Both meshes are sampled with the same sampler state, so evaluating a mesh
//! against itself compares identical samples. Definitions:
//!
//! * EMD: debiased Sinkhorn divergence to the power `1/p` with
//!   `ε = 0.005 · diag^p` (`diag` of the joint bounding box), computed on at
//!   most `emd_points` of the samples.
//! * SWD: sliced Wasserstein to the power `1/p`.
//! * ASSD: mean of the two directed mean nearest-neighbour distances.
//! * CN: mean cosine between a sample's normal and its nearest neighbour's
//!   normal, averaged over both directions; absolute value by default.
//! * SI: percentage of self-intersecting faces of the prediction.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, Vec3};
use crate::measures::{sample_mesh_detailed, DiscreteMeasure, MeasureError, SamplerState, SurfaceSamples};
use crate::mesh::{self_intersection_ratio, Polyline2D, TriangleMesh};
use crate::transport::{
    nearest_neighbors, sample_directions, sinkhorn_divergence, sliced_wasserstein_value, ChamferAccel, KdTree,
    SinkhornConfig, SinkhornOutput, TransportError,
};

pub const EPSILON_SCALE: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub samples: usize,
    pub seed: u64,
    pub projections: usize,
    pub p: f64,
    /// Cap on the points fed to the quadratic-memory Sinkhorn solver.
    pub emd_points: usize,
    pub signed_normals: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self { samples: 100_000, seed: 0, projections: 100, p: 2.0, emd_points: 2048, signed_normals: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub emd: f64,
    pub swd: f64,
    pub assd: f64,
    pub chamfer_normals: f64,
    pub si_percent: f64,
    pub sample_count: usize,
    pub emd_sample_count: usize,
    pub epsilon: f64,
    pub projections: usize,
    pub p: f64,
    pub seed: u64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str =
        "emd,swd,assd,chamfer_normals,si_percent,sample_count,emd_sample_count,epsilon,projections,p,seed";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.emd,
            self.swd,
            self.assd,
            self.chamfer_normals,
            self.si_percent,
            self.sample_count,
            self.emd_sample_count,
            self.epsilon,
            self.projections,
            self.p,
            self.seed
        )
    }
}

fn joint_diagonal(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    let d = a.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for x in a.supports().chunks_exact(d).chain(b.supports().chunks_exact(d)) {
        for k in 0..d {
            lo[k] = lo[k].min(x[k]);
            hi[k] = hi[k].max(x[k]);
        }
    }
    lo.iter().zip(&hi).map(|(l, h)| (h - l).powi(2)).sum::<f64>().sqrt()
}

fn head(mu: &DiscreteMeasure, k: usize) -> Result<DiscreteMeasure, MeasureError> {
    if k >= mu.len() {
        return Ok(mu.clone());
    }
    DiscreteMeasure::from_unnormalized(mu.dim(), mu.supports()[..k * mu.dim()].to_vec(), mu.weights()[..k].to_vec())
}

/// Entropic EMD estimate between two measures, returned with the `ε` used.
/// Only the first `max_points` supports of each are used.
pub fn emd_estimate(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64, max_points: usize) -> Result<(f64, f64), TransportError> {
    let (out, epsilon) = scaled_sinkhorn(mu, nu, p, max_points)?;
    Ok((out.loss.value.max(0.0).powf(1.0 / p), epsilon))
}

/// Sinkhorn divergence with the metric's scale-relative `ε` on the first
/// `max_points` supports of each measure, returned with the `ε` used.
pub fn scaled_sinkhorn(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    max_points: usize,
) -> Result<(SinkhornOutput, f64), TransportError> {
    let a = head(mu, max_points).map_err(|e| TransportError::InvalidParameter(e.to_string()))?;
    let b = head(nu, max_points).map_err(|e| TransportError::InvalidParameter(e.to_string()))?;
    let diag = joint_diagonal(&a, &b).max(f64::MIN_POSITIVE);
    let epsilon = EPSILON_SCALE * diag.powf(p);
    let cfg = SinkhornConfig { p, epsilon, ..SinkhornConfig::default() };
    Ok((sinkhorn_divergence(&a, &b, &cfg)?, epsilon))
}

fn directed_nn(from: &DiscreteMeasure, to: &DiscreteMeasure) -> Vec<(usize, f64)> {
    nearest_neighbors(from.supports(), to.supports(), from.dim(), ChamferAccel::KdTree)
}

/// Symmetric mean nearest-neighbour Euclidean distance between point sets.
pub fn assd(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    let mean = |nn: &[(usize, f64)]| nn.iter().map(|&(_, d)| d.sqrt()).sum::<f64>() / nn.len() as f64;
    0.5 * (mean(&directed_nn(a, b)) + mean(&directed_nn(b, a)))
}

fn normal_agreement(nn: &[(usize, f64)], from: &[Vec3], to: &[Vec3], signed: bool) -> f64 {
    let s: f64 = nn
        .iter()
        .enumerate()
        .map(|(i, &(j, _))| {
            let c = dot(from[i], to[j]);
            if signed {
                c
            } else {
                c.abs()
            }
        })
        .sum();
    s / nn.len() as f64
}

fn normals_from_nn(fwd: &[(usize, f64)], bwd: &[(usize, f64)], na: &[Vec3], nb: &[Vec3], signed: bool) -> f64 {
    0.5 * (normal_agreement(fwd, na, nb, signed) + normal_agreement(bwd, nb, na, signed))
}

/// Chamfer-normals agreement between two sets of surface samples.
pub fn chamfer_normals(
    a: &SurfaceSamples,
    mesh_a: &TriangleMesh,
    b: &SurfaceSamples,
    mesh_b: &TriangleMesh,
    signed: bool,
) -> f64 {
    let (ma, mb) = (a.to_measure(), b.to_measure());
    normals_from_nn(&directed_nn(&ma, &mb), &directed_nn(&mb, &ma), &a.normals(mesh_a), &b.normals(mesh_b), signed)
}

pub fn evaluate(pred: &TriangleMesh, reference: &TriangleMesh, cfg: &MetricConfig) -> crate::Result<MetricReport> {
    if pred.num_faces() == 0 || reference.num_faces() == 0 {
        return Err(MeasureError::Empty.into());
    }
    let sampler = SamplerState::new(cfg.seed);
    let sp = sample_mesh_detailed(pred, cfg.samples, &sampler)?;
    let sr = sample_mesh_detailed(reference, cfg.samples, &sampler)?;
    let (mp, mr) = (sp.to_measure(), sr.to_measure());

    let (emd, epsilon) = emd_estimate(&mp, &mr, cfg.p, cfg.emd_points)?;
    let proj = sample_directions(cfg.projections, 3, sampler.derive(0x7377))?;
    let swd = sliced_wasserstein_value(&mp, &mr, cfg.p, &proj)?.max(0.0).powf(1.0 / cfg.p);

    let fwd = directed_nn(&mp, &mr);
    let bwd = directed_nn(&mr, &mp);
    let mean = |nn: &[(usize, f64)]| nn.iter().map(|&(_, d)| d.sqrt()).sum::<f64>() / nn.len() as f64;
    let assd = 0.5 * (mean(&fwd) + mean(&bwd));
    let cn = normals_from_nn(&fwd, &bwd, &sp.normals(pred), &sr.normals(reference), cfg.signed_normals);

    Ok(MetricReport {
        emd,
        swd,
        assd,
        chamfer_normals: cn,
        si_percent: 100.0 * self_intersection_ratio(pred),
        sample_count: cfg.samples,
        emd_sample_count: cfg.emd_points.min(cfg.samples),
        epsilon,
        projections: cfg.projections,
        p: cfg.p,
        seed: cfg.seed,
    })
}

/// One-sided Hausdorff gap from a contour to a 2D point set, normalized by
/// the contour's perimeter. The contour is probed at `probes` equally spaced
/// arc-length positions.
pub fn coverage_gap(contour: &Polyline2D, points: &[f64], probes: usize) -> f64 {
    assert!(!points.is_empty() && probes > 0);
    let perimeter = contour.perimeter();
    let tree = KdTree::build(points, 2);
    let mut worst: f64 = 0.0;
    let mut seg = 0;
    let mut seg_start = 0.0;
    for k in 0..probes {
        let s = k as f64 * perimeter / probes as f64;
        while seg + 1 < contour.num_segments() && s > seg_start + contour.segment_length(seg) {
            seg_start += contour.segment_length(seg);
            seg += 1;
        }
        let (a, b) = contour.segment(seg);
        let len = contour.segment_length(seg);
        let t = if len > 0.0 { ((s - seg_start) / len).clamp(0.0, 1.0) } else { 0.0 };
        let q = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        let (_, d2) = tree.nearest(&q).expect("non-empty point set");
        worst = worst.max(d2);
    }
    worst.sqrt() / perimeter
}

/// Mean over both directions of the squared nearest-neighbour distance, i.e.
/// half the Chamfer distance.
pub fn half_chamfer(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    let mean = |nn: &[(usize, f64)]| nn.iter().map(|&(_, d)| d).sum::<f64>() / nn.len() as f64;
    0.5 * (mean(&directed_nn(a, b)) + mean(&directed_nn(b, a)))
}
