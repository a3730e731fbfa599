//! Mesh regularizers commonly paired with Chamfer training: mean squared edge
//! length, normal consistency across shared edges, and uniform-Laplacian
//! smoothness. Each comes with its per-vertex gradient.

use std::collections::BTreeMap;

use super::{MeshLoss, RegularizerLosses};
use crate::linalg::{add_assign, dot, scale, sub, Vec3};
use crate::mesh::{face_normal_vjp, TriangleMesh};

fn edge_length_loss(mesh: &TriangleMesh, edges: &[(usize, usize)]) -> MeshLoss {
    let v = mesh.vertices();
    let mut grad = vec![[0.0; 3]; v.len()];
    if edges.is_empty() {
        return MeshLoss { value: 0.0, grad };
    }
    let inv = 1.0 / edges.len() as f64;
    let mut value = 0.0;
    for &(a, b) in edges {
        let e = sub(v[a], v[b]);
        value += dot(e, e);
        add_assign(&mut grad[a], scale(e, 2.0 * inv));
        add_assign(&mut grad[b], scale(e, -2.0 * inv));
    }
    MeshLoss { value: value * inv, grad }
}

fn normal_consistency_loss(mesh: &TriangleMesh) -> MeshLoss {
    let mut edge_faces: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (f, &[a, b, c]) in mesh.faces().iter().enumerate() {
        for (u, w) in [(a, b), (b, c), (c, a)] {
            edge_faces.entry((u.min(w), u.max(w))).or_default().push(f);
        }
    }
    let pairs: Vec<(usize, usize)> =
        edge_faces.values().filter(|fs| fs.len() == 2).map(|fs| (fs[0], fs[1])).collect();
    let mut grad = vec![[0.0; 3]; mesh.num_vertices()];
    if pairs.is_empty() {
        return MeshLoss { value: 0.0, grad };
    }
    let normals: Vec<Vec3> = (0..mesh.num_faces()).map(|f| mesh.face_geometry(f).unit_normal).collect();
    let inv = 1.0 / pairs.len() as f64;
    let mut value = 0.0;
    for &(f1, f2) in &pairs {
        let (n1, n2) = (normals[f1], normals[f2]);
        value += 1.0 - dot(n1, n2);
        for (f, other) in [(f1, n2), (f2, n1)] {
            let [a, b, c] = mesh.face_vertices(f);
            let g = face_normal_vjp(a, b, c, scale(other, -inv));
            let face = mesh.faces()[f];
            for k in 0..3 {
                add_assign(&mut grad[face[k]], g[k]);
            }
        }
    }
    MeshLoss { value: value * inv, grad }
}

fn laplacian_loss(mesh: &TriangleMesh, edges: &[(usize, usize)]) -> MeshLoss {
    let v = mesh.vertices();
    let nv = v.len();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for &(a, b) in edges {
        neighbors[a].push(b);
        neighbors[b].push(a);
    }
    let mut grad = vec![[0.0; 3]; nv];
    if nv == 0 {
        return MeshLoss { value: 0.0, grad };
    }
    let inv = 1.0 / nv as f64;
    let mut value = 0.0;
    for i in 0..nv {
        let nb = &neighbors[i];
        if nb.is_empty() {
            continue;
        }
        let w = 1.0 / nb.len() as f64;
        let mut mean = [0.0; 3];
        for &j in nb {
            add_assign(&mut mean, scale(v[j], w));
        }
        let delta = sub(v[i], mean);
        value += dot(delta, delta);
        let g = scale(delta, 2.0 * inv);
        add_assign(&mut grad[i], g);
        for &j in nb {
            add_assign(&mut grad[j], scale(g, -w));
        }
    }
    MeshLoss { value: value * inv, grad }
}

pub fn regularizer_suite(mesh: &TriangleMesh) -> RegularizerLosses {
    let edges = mesh.edges();
    RegularizerLosses {
        edge_length: edge_length_loss(mesh, &edges),
        normal_consistency: normal_consistency_loss(mesh),
        laplacian: laplacian_loss(mesh, &edges),
    }
}
