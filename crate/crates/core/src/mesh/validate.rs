use std::collections::BTreeMap;

use serde::Serialize;

use super::TriangleMesh;

/// Topology and geometry diagnostics. Report-only; nothing is repaired.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub num_vertices: usize,
    pub num_faces: usize,
    pub num_edges: usize,
    /// Edges used by exactly one face.
    pub boundary_edges: Vec<(usize, usize)>,
    /// Edges used by more than two faces.
    pub non_manifold_edges: Vec<(usize, usize)>,
    /// Manifold edges whose two faces traverse them in the same direction.
    pub inconsistent_edges: Vec<(usize, usize)>,
    /// Faces with zero area.
    pub degenerate_faces: Vec<usize>,
}

impl ValidationReport {
    pub fn is_manifold(&self) -> bool {
        self.non_manifold_edges.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.boundary_edges.is_empty()
    }

    pub fn is_consistently_oriented(&self) -> bool {
        self.inconsistent_edges.is_empty()
    }

    pub fn is_clean(&self) -> bool {
        self.is_manifold() && self.is_consistently_oriented() && self.degenerate_faces.is_empty()
    }
}

pub fn validate(mesh: &TriangleMesh) -> ValidationReport {
    // undirected edge -> directions of use (+1 when traversed low->high)
    let mut uses: BTreeMap<(usize, usize), Vec<i8>> = BTreeMap::new();
    for &[a, b, c] in mesh.faces() {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            let key = (u.min(v), u.max(v));
            uses.entry(key).or_default().push(if u < v { 1 } else { -1 });
        }
    }
    let mut report = ValidationReport {
        num_vertices: mesh.num_vertices(),
        num_faces: mesh.num_faces(),
        num_edges: uses.len(),
        ..Default::default()
    };
    for (edge, dirs) in &uses {
        match dirs.len() {
            1 => report.boundary_edges.push(*edge),
            2 => {
                if dirs[0] == dirs[1] {
                    report.inconsistent_edges.push(*edge);
                }
            }
            _ => report.non_manifold_edges.push(*edge),
        }
    }
    report.degenerate_faces = (0..mesh.num_faces()).filter(|&f| mesh.face_geometry(f).degenerate).collect();
    report
}
