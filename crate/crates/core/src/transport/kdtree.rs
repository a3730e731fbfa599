//! Static kd-tree for exact nearest-neighbour queries in any dimension.
//!
//! Distances are computed with the same [`sq_dist`] as the brute-force path
//! and ties resolve to the lowest point index, so results match a linear scan
//! bit for bit.

use crate::linalg::sq_dist;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    points: &'a [f64],
    dim: usize,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    /// `points` is row-major `n x dim`.
    pub fn build(points: &'a [f64], dim: usize) -> Self {
        assert!(dim > 0 && points.len() % dim == 0);
        let n = points.len() / dim;
        let mut tree = Self { points, dim, order: (0..n).collect(), nodes: Vec::new() };
        if n > 0 {
            tree.build_node(0, n);
        }
        tree
    }

    fn coord(&self, i: usize, k: usize) -> f64 {
        self.points[i * self.dim + k]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let mut axis = 0;
        let mut best = f64::NEG_INFINITY;
        for k in 0..self.dim {
            let (lo, hi) = self.order[start..end]
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    let c = self.coord(i, k);
                    (lo.min(c), hi.max(c))
                });
            if hi - lo > best {
                best = hi - lo;
                axis = k;
            }
        }
        let mid = start + (end - start) / 2;
        let (points, dim) = (self.points, self.dim);
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a * dim + axis].total_cmp(&points[b * dim + axis]).then(a.cmp(&b))
        });
        let value = self.coord(self.order[mid], axis);
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Nearest point index and squared distance. `None` on an empty tree.
    pub fn nearest(&self, query: &[f64]) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, query, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: &[f64], best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = sq_dist(q, &self.points[i * self.dim..(i + 1) * self.dim]);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // keep equal-distance candidates so the lowest index wins
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}
