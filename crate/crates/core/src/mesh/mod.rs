//! Triangle meshes, closed 2D polylines and per-face geometry.
//!
//! Faces are index triples into the vertex list; counter-clockwise order
//! (right-hand rule) defines the outward normal. Meshes are immutable once
//! built and are `Send + Sync`.

mod geometry;
mod intersect;
mod io;
mod validate;

use std::path::PathBuf;

use thiserror::Error;

use crate::linalg::Vec3;

pub use geometry::{face_area_vjp, face_normal_vjp, FaceGeometry};
pub use intersect::{
    segments_cross_2d, self_intersecting_faces, self_intersecting_faces_brute,
    self_intersection_ratio, triangles_intersect, Bvh,
};
pub use io::{load_mesh, parse_mesh, save_mesh, write_mesh, MeshFormat};
pub use validate::{validate, ValidationReport};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("face {face} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: usize, count: usize },
    #[error("face {face} repeats vertex {index}")]
    RepeatedVertex { face: usize, index: usize },
    #[error("vertex {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown mesh format for {0:?}")]
    UnknownFormat(PathBuf),
    #[error("I/O error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid polyline: {0}")]
    Polyline(String),
}

/// Indexed triangle surface.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, rejecting out-of-range indices, faces that repeat a
    /// vertex, and non-finite coordinates.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(MeshError::NonFinite(i));
            }
        }
        let count = vertices.len();
        for (f, tri) in faces.iter().enumerate() {
            for &index in tri {
                if index >= count {
                    return Err(MeshError::IndexOutOfRange { face: f, index, count });
                }
            }
            if tri[0] == tri[1] || tri[0] == tri[2] {
                return Err(MeshError::RepeatedVertex { face: f, index: tri[0] });
            }
            if tri[1] == tri[2] {
                return Err(MeshError::RepeatedVertex { face: f, index: tri[1] });
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Same connectivity, new vertex positions.
    ///
    /// Panics if the vertex count changes.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Self {
        assert_eq!(vertices.len(), self.vertices.len(), "vertex count must not change");
        Self { vertices, faces: self.faces.clone() }
    }

    pub fn face_vertices(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Area, barycenter and unit normal of one face.
    pub fn face_geometry(&self, face: usize) -> FaceGeometry {
        let [a, b, c] = self.face_vertices(face);
        FaceGeometry::from_triangle(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_geometry(f).area).sum()
    }

    /// Reverses the winding of every face (flips all normals).
    pub fn flipped(&self) -> Self {
        let faces = self.faces.iter().map(|&[a, b, c]| [a, c, b]).collect();
        Self { vertices: self.vertices.clone(), faces }
    }

    pub fn translated(&self, t: Vec3) -> Self {
        let vertices = self.vertices.iter().map(|&v| crate::linalg::add(v, t)).collect();
        Self { vertices, faces: self.faces.clone() }
    }

    /// Axis-aligned bounding box `(min, max)`; `None` for an empty vertex list.
    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        let mut lo = first;
        let mut hi = first;
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        Some((lo, hi))
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        self.bounding_box()
            .map(|(lo, hi)| crate::linalg::norm(crate::linalg::sub(hi, lo)))
            .unwrap_or(0.0)
    }

    /// Centers the mesh on its bounding-box center and scales the longest box
    /// side to 1.
    pub fn normalized_to_unit_box(&self) -> Self {
        let Some((lo, hi)) = self.bounding_box() else {
            return self.clone();
        };
        let center = crate::linalg::scale(crate::linalg::add(lo, hi), 0.5);
        let extent = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
        let s = if extent > 0.0 { 1.0 / extent } else { 1.0 };
        let vertices = self
            .vertices
            .iter()
            .map(|&v| crate::linalg::scale(crate::linalg::sub(v, center), s))
            .collect();
        Self { vertices, faces: self.faces.clone() }
    }

    /// Undirected edges `(min, max)`, sorted and deduplicated.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }
}

/// Ordered 2D polyline, optionally closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline2D {
    vertices: Vec<[f64; 2]>,
    closed: bool,
}

impl Polyline2D {
    pub fn new(vertices: Vec<[f64; 2]>, closed: bool) -> Result<Self, MeshError> {
        if closed && vertices.len() < 3 {
            return Err(MeshError::Polyline(format!(
                "closed polyline needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if !closed && vertices.len() < 2 {
            return Err(MeshError::Polyline("open polyline needs at least 2 vertices".into()));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(MeshError::NonFinite(i));
            }
        }
        let n = vertices.len();
        let pairs = if closed { n } else { n - 1 };
        for i in 0..pairs {
            let j = (i + 1) % n;
            if vertices[i] == vertices[j] {
                return Err(MeshError::Polyline(format!("consecutive vertices {i} and {j} coincide")));
            }
        }
        Ok(Self { vertices, closed })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn num_segments(&self) -> usize {
        if self.closed {
            self.vertices.len()
        } else {
            self.vertices.len() - 1
        }
    }

    pub fn segment(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn segment_length(&self, i: usize) -> f64 {
        let (a, b) = self.segment(i);
        (b[0] - a[0]).hypot(b[1] - a[1])
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.num_segments()).map(|i| self.segment_length(i)).sum()
    }

    /// Same topology with new positions. Coincident consecutive vertices are
    /// allowed here because a deformation can legitimately collapse them.
    pub fn with_vertices(&self, vertices: Vec<[f64; 2]>) -> Self {
        assert_eq!(vertices.len(), self.vertices.len(), "vertex count must not change");
        Self { vertices, closed: self.closed }
    }

    /// Number of pairs of non-adjacent segments that cross or touch.
    pub fn edge_crossings(&self) -> usize {
        let s = self.num_segments();
        let n = self.vertices.len();
        let mut count = 0;
        for i in 0..s {
            for j in (i + 1)..s {
                let adjacent = j == i + 1 || (self.closed && i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (a, b) = self.segment(i);
                let (c, d) = self.segment(j);
                if segments_cross_2d(a, b, c, d) {
                    count += 1;
                }
            }
        }
        count
    }
}
