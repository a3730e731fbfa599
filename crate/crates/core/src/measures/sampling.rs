use rand::Rng;

use super::{DiscreteMeasure, MeasureError, SamplerState};
use crate::linalg::{add_assign, scale, Vec3};
use crate::mesh::{Polyline2D, TriangleMesh};

/// Uniform point on the 2-simplex via the reflection method.
pub fn uniform_simplex<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let mut u: f64 = rng.random();
    let mut v: f64 = rng.random();
    if u + v > 1.0 {
        u = 1.0 - u;
        v = 1.0 - v;
    }
    [u, v, 1.0 - u - v]
}

/// Points drawn on a mesh together with where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSamples {
    pub points: Vec<Vec3>,
    pub faces: Vec<usize>,
    pub barycentric: Vec<[f64; 3]>,
}

impl SurfaceSamples {
    pub fn to_measure(&self) -> DiscreteMeasure {
        DiscreteMeasure::from_points(&self.points).expect("at least one sample")
    }

    /// Unit normal of each sample's generating face.
    pub fn normals(&self, mesh: &TriangleMesh) -> Vec<Vec3> {
        self.faces.iter().map(|&f| mesh.face_geometry(f).unit_normal).collect()
    }

    /// Re-evaluates the same `(face, barycentric)` draws on a mesh with the
    /// same connectivity but moved vertices.
    pub fn reposition(&self, mesh: &TriangleMesh) -> Vec<Vec3> {
        self.faces
            .iter()
            .zip(&self.barycentric)
            .map(|(&f, w)| {
                let [a, b, c] = mesh.face_vertices(f);
                let mut p = scale(a, w[0]);
                add_assign(&mut p, scale(b, w[1]));
                add_assign(&mut p, scale(c, w[2]));
                p
            })
            .collect()
    }

    /// Pulls per-sample gradients (`3 * n` flattened) back to mesh vertices.
    /// Face choice is treated as constant.
    pub fn vertex_gradient(&self, mesh: &TriangleMesh, point_grad: &[f64]) -> Vec<Vec3> {
        let mut out = vec![[0.0; 3]; mesh.num_vertices()];
        for (i, (&f, w)) in self.faces.iter().zip(&self.barycentric).enumerate() {
            let g = [point_grad[3 * i], point_grad[3 * i + 1], point_grad[3 * i + 2]];
            let face = mesh.faces()[f];
            for k in 0..3 {
                add_assign(&mut out[face[k]], scale(g, w[k]));
            }
        }
        out
    }
}

/// `m` i.i.d. points uniform on the mesh surface.
pub fn sample_mesh(mesh: &TriangleMesh, m: usize, rng: &SamplerState) -> Result<DiscreteMeasure, MeasureError> {
    Ok(sample_mesh_detailed(mesh, m, rng)?.to_measure())
}

/// Area-proportional face choice (inverse CDF over the prefix sum of face
/// areas) followed by a uniform barycentric draw.
pub fn sample_mesh_detailed(mesh: &TriangleMesh, m: usize, rng: &SamplerState) -> Result<SurfaceSamples, MeasureError> {
    if m == 0 {
        return Err(MeasureError::ZeroSamples);
    }
    let mut cdf = Vec::with_capacity(mesh.num_faces());
    let mut total = 0.0;
    for f in 0..mesh.num_faces() {
        total += mesh.face_geometry(f).area;
        cdf.push(total);
    }
    if !(total > 0.0) {
        return Err(MeasureError::AllFacesDegenerate);
    }
    let last = cdf.len() - 1;
    let mut r = rng.rng();
    let mut out = SurfaceSamples {
        points: Vec::with_capacity(m),
        faces: Vec::with_capacity(m),
        barycentric: Vec::with_capacity(m),
    };
    for _ in 0..m {
        let target = r.random::<f64>() * total;
        let mut f = cdf.partition_point(|&c| c <= target).min(last);
        // never land on a zero-area face through rounding
        while f > 0 && cdf[f] == cdf[f - 1] {
            f -= 1;
        }
        let w = uniform_simplex(&mut r);
        let [a, b, c] = mesh.face_vertices(f);
        let mut p = scale(a, w[0]);
        add_assign(&mut p, scale(b, w[1]));
        add_assign(&mut p, scale(c, w[2]));
        out.points.push(p);
        out.faces.push(f);
        out.barycentric.push(w);
    }
    Ok(out)
}

fn polyline_cdf(polyline: &Polyline2D) -> Result<(Vec<f64>, f64), MeasureError> {
    let mut cdf = Vec::with_capacity(polyline.num_segments());
    let mut total = 0.0;
    for s in 0..polyline.num_segments() {
        total += polyline.segment_length(s);
        cdf.push(total);
    }
    if !(total > 0.0) {
        return Err(MeasureError::ZeroLength);
    }
    Ok((cdf, total))
}

fn point_at_arclength(polyline: &Polyline2D, cdf: &[f64], s: f64) -> [f64; 2] {
    let seg = cdf.partition_point(|&c| c <= s).min(cdf.len() - 1);
    let start = if seg == 0 { 0.0 } else { cdf[seg - 1] };
    let len = cdf[seg] - start;
    let t = if len > 0.0 { ((s - start) / len).clamp(0.0, 1.0) } else { 0.0 };
    let (a, b) = polyline.segment(seg);
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// `m` i.i.d. points uniform by arc length.
pub fn sample_polyline(polyline: &Polyline2D, m: usize, rng: &SamplerState) -> Result<DiscreteMeasure, MeasureError> {
    if m == 0 {
        return Err(MeasureError::ZeroSamples);
    }
    let (cdf, total) = polyline_cdf(polyline)?;
    let mut r = rng.rng();
    let pts: Vec<[f64; 2]> = (0..m).map(|_| point_at_arclength(polyline, &cdf, r.random::<f64>() * total)).collect();
    DiscreteMeasure::from_points(&pts)
}

/// `m` points at equally spaced arc-length positions `(k + offset) * P / m`,
/// `offset` in `[0, 1)`.
pub fn sample_polyline_stratified(
    polyline: &Polyline2D,
    m: usize,
    offset: f64,
) -> Result<DiscreteMeasure, MeasureError> {
    if m == 0 {
        return Err(MeasureError::ZeroSamples);
    }
    let (cdf, total) = polyline_cdf(polyline)?;
    let pts: Vec<[f64; 2]> =
        (0..m).map(|k| point_at_arclength(polyline, &cdf, (k as f64 + offset) * total / m as f64)).collect();
    DiscreteMeasure::from_points(&pts)
}
