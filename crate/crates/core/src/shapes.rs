//! Procedural shapes used by tests, examples and the CLI experiments.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::linalg::{norm, scale, Vec3};
use crate::mesh::{Polyline2D, TriangleMesh};

/// Regular tetrahedron inscribed in the cube `[-1, 1]^3`, outward winding.
pub fn tetrahedron() -> TriangleMesh {
    let v = vec![[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
    TriangleMesh::new(v, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]).expect("valid tetrahedron")
}

/// Unit cube `[0, 1]^3`, 12 triangles, outward winding.
pub fn unit_cube() -> TriangleMesh {
    let v: Vec<Vec3> = (0..8)
        .map(|i| [(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64])
        .collect();
    let quads = [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]];
    let faces = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
    TriangleMesh::new(v, faces).expect("valid cube")
}

/// Unit sphere from a subdivided icosahedron: `20 * 4^level` faces.
pub fn icosphere(level: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|&p| scale(p, 1.0 / norm(p)))
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let m = [
                    0.5 * (verts[a][0] + verts[b][0]),
                    0.5 * (verts[a][1] + verts[b][1]),
                    0.5 * (verts[a][2] + verts[b][2]),
                ];
                verts.push(scale(m, 1.0 / norm(m)));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(verts, faces).expect("valid icosphere")
}

/// Axis-aligned ellipsoid with semi-axes `radii`, built on [`icosphere`].
pub fn ellipsoid(level: u32, radii: Vec3) -> TriangleMesh {
    let sphere = icosphere(level);
    let v = sphere.vertices().iter().map(|p| [p[0] * radii[0], p[1] * radii[1], p[2] * radii[2]]).collect();
    sphere.with_vertices(v)
}

/// Two triangles that pierce each other and share no vertex.
pub fn piercing_pair() -> TriangleMesh {
    let v = vec![
        [-1.0, -1.0, 0.0],
        [1.0, -1.0, 0.0],
        [0.0, 1.0, 0.0],
        [-0.2, 0.0, -1.0],
        [0.2, 0.0, -1.0],
        [0.0, 0.0, 1.0],
    ];
    TriangleMesh::new(v, vec![[0, 1, 2], [3, 4, 5]]).expect("valid pair")
}

/// Closed regular `n`-gon of radius `r` centered at the origin, first vertex on
/// the positive x axis, counter-clockwise.
pub fn circle(n: usize, r: f64) -> Polyline2D {
    let v = (0..n)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / n as f64;
            [r * a.cos(), r * a.sin()]
        })
        .collect();
    Polyline2D::new(v, true).expect("valid circle")
}

/// Closed axis-aligned unit square `[0, 1]^2`.
pub fn unit_square() -> Polyline2D {
    Polyline2D::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], true).expect("valid square")
}

/// Target contour of the 2D toy experiment: a non-convex polygon with one
/// long acute spike, roughly the size of the unit circle.
pub fn toy_polygon() -> Polyline2D {
    let v = vec![
        [-0.9, -0.7],
        [0.6, -0.8],
        [1.0, -0.2],
        [0.3, 0.05],
        [1.6, 1.05],
        [-0.2, 0.5],
        [-0.7, 0.9],
        [-1.0, 0.1],
    ];
    Polyline2D::new(v, true).expect("valid toy polygon")
}
