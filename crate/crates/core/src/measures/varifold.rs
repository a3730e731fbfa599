use super::{DiscreteMeasure, MeasureError};
use crate::linalg::{add_assign, Vec3};
use crate::mesh::{face_area_vjp, face_normal_vjp, TriangleMesh};

/// Oriented varifold of a mesh: one atom per non-degenerate face at
/// `(barycenter, λ·unit_normal)` with weight `area / total_area`.
#[derive(Debug, Clone)]
pub struct Varifold {
    pub measure: DiscreteMeasure,
    /// Source face of each support.
    pub face_ids: Vec<usize>,
    pub normal_weight: f64,
    pub total_area: f64,
}

pub fn mesh_to_varifold(mesh: &TriangleMesh, normal_weight: f64) -> Result<Varifold, MeasureError> {
    let mut supports = Vec::with_capacity(mesh.num_faces() * 6);
    let mut areas = Vec::with_capacity(mesh.num_faces());
    let mut face_ids = Vec::with_capacity(mesh.num_faces());
    for f in 0..mesh.num_faces() {
        let g = mesh.face_geometry(f);
        if g.degenerate {
            continue;
        }
        supports.extend_from_slice(&g.barycenter);
        supports.extend(g.unit_normal.iter().map(|n| normal_weight * n));
        areas.push(g.area);
        face_ids.push(f);
    }
    if face_ids.is_empty() {
        return Err(MeasureError::AllFacesDegenerate);
    }
    let total_area: f64 = areas.iter().sum();
    let measure = DiscreteMeasure::from_unnormalized(6, supports, areas)?;
    Ok(Varifold { measure, face_ids, normal_weight, total_area })
}

impl Varifold {
    /// Chain rule from the measure back to mesh vertices.
    ///
    /// `support_grad` is `6 * n` flattened; `weight_grad`, if present, is the
    /// gradient with respect to the normalized weights. Barycenter, unit
    /// normal and area-weight derivatives are all included.
    pub fn vertex_gradient(&self, mesh: &TriangleMesh, support_grad: &[f64], weight_grad: Option<&[f64]>) -> Vec<Vec3> {
        assert_eq!(support_grad.len(), 6 * self.face_ids.len());
        let mut out = vec![[0.0; 3]; mesh.num_vertices()];
        // gradient w.r.t. raw areas through w_k = A_k / ΣA
        let area_grad: Option<Vec<f64>> = weight_grad.map(|gw| {
            let w = self.measure.weights();
            let mean: f64 = gw.iter().zip(w).map(|(g, w)| g * w).sum();
            gw.iter().map(|g| (g - mean) / self.total_area).collect()
        });
        for (k, &f) in self.face_ids.iter().enumerate() {
            let face = mesh.faces()[f];
            let [a, b, c] = mesh.face_vertices(f);
            let g = &support_grad[6 * k..6 * k + 6];
            let gp = [g[0] / 3.0, g[1] / 3.0, g[2] / 3.0];
            let gn = [g[3] * self.normal_weight, g[4] * self.normal_weight, g[5] * self.normal_weight];
            let normal_part = face_normal_vjp(a, b, c, gn);
            for i in 0..3 {
                add_assign(&mut out[face[i]], gp);
                add_assign(&mut out[face[i]], normal_part[i]);
            }
            if let Some(ag) = &area_grad {
                let area_part = face_area_vjp(a, b, c, ag[k]);
                for i in 0..3 {
                    add_assign(&mut out[face[i]], area_part[i]);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn single_triangle_varifold() {
        let mesh = TriangleMesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        let v = mesh_to_varifold(&mesh, 2.0).unwrap();
        assert_eq!(v.measure.weights(), &[1.0]);
        let s = v.measure.support(0);
        assert!((s[0] - 1.0 / 3.0).abs() < 1e-15 && (s[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(&s[2..], &[0.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn weights_follow_areas() {
        let v = vec![[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [10.0, 0.0, 0.0], [13.0, 0.0, 0.0], [10.0, 2.0, 0.0]];
        let mesh = TriangleMesh::new(v, vec![[0, 1, 2], [3, 4, 5]]).unwrap();
        let var = mesh_to_varifold(&mesh, 1.0).unwrap();
        assert_eq!(var.measure.weights(), &[0.25, 0.75]);
    }

    #[test]
    fn degenerate_faces_are_pruned() {
        let cube = shapes::unit_cube();
        let mut verts = cube.vertices().to_vec();
        verts.push([0.0, 0.0, 0.0]);
        verts.push([0.5, 0.0, 0.0]);
        let mut faces: Vec<[usize; 3]> = cube.faces()[..4].to_vec();
        faces.push([0, 8, 9]); // collinear
        let mesh = TriangleMesh::new(verts, faces).unwrap();
        let var = mesh_to_varifold(&mesh, 1.0).unwrap();
        assert_eq!(var.measure.len(), 4);
        assert_eq!(var.face_ids, vec![0, 1, 2, 3]);
        assert!(var.measure.weights().iter().all(|&w| (w - 0.25).abs() < 1e-15));
    }

    #[test]
    fn all_degenerate_errors() {
        let flat = TriangleMesh::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(mesh_to_varifold(&flat, 1.0), Err(MeasureError::AllFacesDegenerate)));
    }
}
