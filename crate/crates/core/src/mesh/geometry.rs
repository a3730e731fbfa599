use crate::linalg::{add, cross, dot, norm, scale, sub, Vec3};

/// Area, barycenter and unit normal of a triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceGeometry {
    pub barycenter: Vec3,
    /// Zero vector when the face is degenerate.
    pub unit_normal: Vec3,
    pub area: f64,
    pub degenerate: bool,
}

impl FaceGeometry {
    pub fn from_triangle(a: Vec3, b: Vec3, c: Vec3) -> Self {
        let n = cross(sub(b, a), sub(c, a));
        let len = norm(n);
        let barycenter = scale(add(add(a, b), c), 1.0 / 3.0);
        if len > 0.0 {
            Self { barycenter, unit_normal: scale(n, 1.0 / len), area: 0.5 * len, degenerate: false }
        } else {
            Self { barycenter, unit_normal: [0.0; 3], area: 0.0, degenerate: true }
        }
    }
}

/// Pulls a cotangent on the unit normal of triangle `(a, b, c)` back to its
/// three vertices. Returns zeros for a degenerate triangle.
pub fn face_normal_vjp(a: Vec3, b: Vec3, c: Vec3, g_normal: Vec3) -> [Vec3; 3] {
    let e1 = sub(b, a);
    let e2 = sub(c, a);
    let raw = cross(e1, e2);
    let len = norm(raw);
    if len == 0.0 {
        return [[0.0; 3]; 3];
    }
    let n = scale(raw, 1.0 / len);
    // (I - n n^T) g / |raw|
    let g_raw = scale(sub(g_normal, scale(n, dot(n, g_normal))), 1.0 / len);
    cross_vjp(e1, e2, g_raw)
}

/// Pulls a cotangent on the triangle area back to its vertices.
pub fn face_area_vjp(a: Vec3, b: Vec3, c: Vec3, g_area: f64) -> [Vec3; 3] {
    let e1 = sub(b, a);
    let e2 = sub(c, a);
    let raw = cross(e1, e2);
    let len = norm(raw);
    if len == 0.0 {
        return [[0.0; 3]; 3];
    }
    let g_raw = scale(raw, 0.5 * g_area / len);
    cross_vjp(e1, e2, g_raw)
}

// r = e1 x e2 with e1 = b - a, e2 = c - a.
fn cross_vjp(e1: Vec3, e2: Vec3, g_raw: Vec3) -> [Vec3; 3] {
    let g_e1 = cross(e2, g_raw);
    let g_e2 = cross(g_raw, e1);
    let g_a = scale(add(g_e1, g_e2), -1.0);
    [g_a, g_e1, g_e2]
}
