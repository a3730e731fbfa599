//! Triangle-triangle intersection and self-intersection detection.
//!
//! Two closed triangles intersect iff an edge of one meets the other. Faces
//! that share a vertex index are never tested. Coplanar overlaps and
//! single-point contacts count as intersections.

use rayon::prelude::*;

use super::TriangleMesh;
use crate::linalg::{cross, dot, sub, Vec3};

fn orient3d(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> f64 {
    dot(cross(sub(b, a), sub(c, a)), sub(d, a))
}

fn orient2d(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment_2d(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test in the plane (touching counts).
pub fn segments_cross_2d(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let d1 = orient2d(c, d, a);
    let d2 = orient2d(c, d, b);
    let d3 = orient2d(a, b, c);
    let d4 = orient2d(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment_2d(c, d, a))
        || (d2 == 0.0 && on_segment_2d(c, d, b))
        || (d3 == 0.0 && on_segment_2d(a, b, c))
        || (d4 == 0.0 && on_segment_2d(a, b, d))
}

fn point_in_triangle_2d(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    let s1 = orient2d(a, b, p);
    let s2 = orient2d(b, c, p);
    let s3 = orient2d(c, a, p);
    let has_neg = s1 < 0.0 || s2 < 0.0 || s3 < 0.0;
    let has_pos = s1 > 0.0 || s2 > 0.0 || s3 > 0.0;
    !(has_neg && has_pos)
}

fn segment_hits_triangle_2d(p: [f64; 2], q: [f64; 2], tri: [[f64; 2]; 3]) -> bool {
    let [a, b, c] = tri;
    point_in_triangle_2d(p, a, b, c)
        || point_in_triangle_2d(q, a, b, c)
        || segments_cross_2d(p, q, a, b)
        || segments_cross_2d(p, q, b, c)
        || segments_cross_2d(p, q, c, a)
}

fn drop_axis(v: Vec3, axis: usize) -> [f64; 2] {
    match axis {
        0 => [v[1], v[2]],
        1 => [v[0], v[2]],
        _ => [v[0], v[1]],
    }
}

fn dominant_axis(n: Vec3) -> usize {
    let a = [n[0].abs(), n[1].abs(), n[2].abs()];
    if a[0] >= a[1] && a[0] >= a[2] {
        0
    } else if a[1] >= a[2] {
        1
    } else {
        2
    }
}

fn segment_hits_triangle(p: Vec3, q: Vec3, tri: [Vec3; 3]) -> bool {
    let [a, b, c] = tri;
    let n = cross(sub(b, a), sub(c, a));
    let dp = dot(n, sub(p, a));
    let dq = dot(n, sub(q, a));
    if (dp > 0.0 && dq > 0.0) || (dp < 0.0 && dq < 0.0) {
        return false;
    }
    if dp == 0.0 && dq == 0.0 {
        let axis = dominant_axis(n);
        let t2 = [drop_axis(a, axis), drop_axis(b, axis), drop_axis(c, axis)];
        return segment_hits_triangle_2d(drop_axis(p, axis), drop_axis(q, axis), t2);
    }
    // the line pq passes through the closed triangle iff the three signed
    // volumes do not disagree in sign
    let s1 = orient3d(p, q, a, b);
    let s2 = orient3d(p, q, b, c);
    let s3 = orient3d(p, q, c, a);
    let has_neg = s1 < 0.0 || s2 < 0.0 || s3 < 0.0;
    let has_pos = s1 > 0.0 || s2 > 0.0 || s3 > 0.0;
    !(has_neg && has_pos)
}

/// Closed triangle-triangle intersection predicate.
pub fn triangles_intersect(t1: [Vec3; 3], t2: [Vec3; 3]) -> bool {
    for k in 0..3 {
        if segment_hits_triangle(t1[k], t1[(k + 1) % 3], t2) {
            return true;
        }
    }
    for k in 0..3 {
        if segment_hits_triangle(t2[k], t2[(k + 1) % 3], t1) {
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self { lo: [f64::INFINITY; 3], hi: [f64::NEG_INFINITY; 3] }
    }

    fn of_triangle(t: &[Vec3; 3]) -> Self {
        let mut b = Self::empty();
        for p in t {
            b.grow(*p);
        }
        b
    }

    fn grow(&mut self, p: Vec3) {
        for k in 0..3 {
            self.lo[k] = self.lo[k].min(p[k]);
            self.hi[k] = self.hi[k].max(p[k]);
        }
    }

    fn merge(&mut self, o: &Aabb) {
        self.grow(o.lo);
        self.grow(o.hi);
    }

    fn overlaps(&self, o: &Aabb) -> bool {
        (0..3).all(|k| self.lo[k] <= o.hi[k] && o.lo[k] <= self.hi[k])
    }
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, end: usize },
    Inner { left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

/// Bounding-volume hierarchy over face boxes, median split on the longest
/// centroid axis, at most [`Bvh::LEAF_SIZE`] faces per leaf.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
    boxes: Vec<Aabb>,
}

impl Bvh {
    pub const LEAF_SIZE: usize = 4;

    pub fn build(mesh: &TriangleMesh) -> Self {
        let boxes: Vec<Aabb> = (0..mesh.num_faces()).map(|f| Aabb::of_triangle(&mesh.face_vertices(f))).collect();
        let centroids: Vec<Vec3> = boxes
            .iter()
            .map(|b| [0.5 * (b.lo[0] + b.hi[0]), 0.5 * (b.lo[1] + b.hi[1]), 0.5 * (b.lo[2] + b.hi[2])])
            .collect();
        let mut bvh = Self { nodes: Vec::new(), order: (0..boxes.len()).collect(), boxes };
        if !bvh.order.is_empty() {
            bvh.build_node(0, bvh.order.len(), &centroids);
        }
        bvh
    }

    fn build_node(&mut self, start: usize, end: usize, centroids: &[Vec3]) -> usize {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &f in &self.order[start..end] {
            bounds.merge(&self.boxes[f]);
            cbounds.grow(centroids[f]);
        }
        let id = self.nodes.len();
        self.nodes.push(Node { bounds, kind: NodeKind::Leaf { start, end } });
        if end - start <= Self::LEAF_SIZE {
            return id;
        }
        let extent = [cbounds.hi[0] - cbounds.lo[0], cbounds.hi[1] - cbounds.lo[1], cbounds.hi[2] - cbounds.lo[2]];
        let axis = dominant_axis(extent);
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
        });
        let left = self.build_node(start, mid, centroids);
        let right = self.build_node(mid, end, centroids);
        self.nodes[id].kind = NodeKind::Inner { left, right };
        id
    }

    /// Face pairs `(i, j)`, `i < j`, whose boxes overlap. Sorted.
    pub fn overlapping_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let mut stack = vec![(0usize, 0usize)];
        while let Some((a, b)) = stack.pop() {
            let (na, nb) = (&self.nodes[a], &self.nodes[b]);
            if a == b {
                match na.kind {
                    NodeKind::Leaf { start, end } => {
                        for i in start..end {
                            for j in (i + 1)..end {
                                self.push_if_overlap(self.order[i], self.order[j], &mut out);
                            }
                        }
                    }
                    NodeKind::Inner { left, right } => {
                        stack.push((left, left));
                        stack.push((right, right));
                        stack.push((left, right));
                    }
                }
                continue;
            }
            if !na.bounds.overlaps(&nb.bounds) {
                continue;
            }
            match (&na.kind, &nb.kind) {
                (NodeKind::Leaf { start: s1, end: e1 }, NodeKind::Leaf { start: s2, end: e2 }) => {
                    for i in *s1..*e1 {
                        for j in *s2..*e2 {
                            self.push_if_overlap(self.order[i], self.order[j], &mut out);
                        }
                    }
                }
                (NodeKind::Inner { left, right }, NodeKind::Leaf { .. }) => {
                    stack.push((*left, b));
                    stack.push((*right, b));
                }
                (NodeKind::Leaf { .. }, NodeKind::Inner { left, right }) => {
                    stack.push((a, *left));
                    stack.push((a, *right));
                }
                (NodeKind::Inner { left: l1, right: r1 }, NodeKind::Inner { left: l2, right: r2 }) => {
                    stack.push((*l1, *l2));
                    stack.push((*l1, *r2));
                    stack.push((*r1, *l2));
                    stack.push((*r1, *r2));
                }
            }
        }
        out.sort_unstable();
        out
    }

    fn push_if_overlap(&self, f: usize, g: usize, out: &mut Vec<(usize, usize)>) {
        if self.boxes[f].overlaps(&self.boxes[g]) {
            out.push((f.min(g), f.max(g)));
        }
    }
}

fn share_vertex(a: &[usize; 3], b: &[usize; 3]) -> bool {
    a.iter().any(|i| b.contains(i))
}

fn flags_from_pairs(mesh: &TriangleMesh, pairs: &[(usize, usize)]) -> Vec<bool> {
    let faces = mesh.faces();
    let hits: Vec<(usize, usize)> = pairs
        .par_iter()
        .copied()
        .filter(|&(i, j)| !share_vertex(&faces[i], &faces[j]))
        .filter(|&(i, j)| triangles_intersect(mesh.face_vertices(i), mesh.face_vertices(j)))
        .collect();
    let mut flags = vec![false; mesh.num_faces()];
    for (i, j) in hits {
        flags[i] = true;
        flags[j] = true;
    }
    flags
}

/// Per-face flag: does the face intersect some face it shares no vertex with.
pub fn self_intersecting_faces(mesh: &TriangleMesh) -> Vec<bool> {
    let pairs = Bvh::build(mesh).overlapping_pairs();
    flags_from_pairs(mesh, &pairs)
}

/// All-pairs variant of [`self_intersecting_faces`], O(F^2).
pub fn self_intersecting_faces_brute(mesh: &TriangleMesh) -> Vec<bool> {
    let f = mesh.num_faces();
    let pairs: Vec<(usize, usize)> = (0..f).flat_map(|i| ((i + 1)..f).map(move |j| (i, j))).collect();
    flags_from_pairs(mesh, &pairs)
}

/// Fraction of faces in `[0, 1]` that intersect a non-adjacent face.
pub fn self_intersection_ratio(mesh: &TriangleMesh) -> f64 {
    if mesh.num_faces() == 0 {
        return 0.0;
    }
    let flags = self_intersecting_faces(mesh);
    flags.iter().filter(|&&b| b).count() as f64 / mesh.num_faces() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn tetrahedron_has_no_self_intersections() {
        assert_eq!(self_intersection_ratio(&shapes::tetrahedron()), 0.0);
        assert_eq!(self_intersection_ratio(&shapes::icosphere(2)), 0.0);
    }

    #[test]
    fn disjoint_parallel_triangles() {
        let v = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 1.0],
            [0.0, 1.0, 1.0],
        ];
        let m = TriangleMesh::new(v, vec![[0, 1, 2], [3, 4, 5]]).unwrap();
        assert_eq!(self_intersection_ratio(&m), 0.0);
    }

    #[test]
    fn coplanar_overlap_and_point_contact_count() {
        let a = [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 2.0, 0.0]];
        let inside = [[0.2, 0.2, 0.0], [0.6, 0.2, 0.0], [0.2, 0.6, 0.0]];
        assert!(triangles_intersect(a, inside));
        let touching = [[2.0, 0.0, 0.0], [3.0, 0.0, 0.0], [3.0, 1.0, 0.0]];
        assert!(triangles_intersect(a, touching));
        let apart = [[2.1, 0.0, 0.0], [3.0, 0.0, 0.0], [3.0, 1.0, 0.0]];
        assert!(!triangles_intersect(a, apart));
    }

    #[test]
    fn shared_vertex_pairs_are_skipped() {
        // two faces sharing vertex 0 that also overlap geometrically
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.5, -0.5, 0.0]];
        let m = TriangleMesh::new(v, vec![[0, 1, 2], [0, 3, 4]]).unwrap();
        assert_eq!(self_intersection_ratio(&m), 0.0);
    }

    #[test]
    fn segment_crossings_2d() {
        assert!(segments_cross_2d([0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]));
        assert!(!segments_cross_2d([0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]));
        assert!(segments_cross_2d([0.0, 0.0], [2.0, 0.0], [1.0, 0.0], [3.0, 0.0]));
        assert!(segments_cross_2d([0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 1.0]));
    }
}
