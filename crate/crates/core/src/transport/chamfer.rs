use rayon::prelude::*;

use super::kdtree::KdTree;
use super::{check_same_dim, LossValueGrad, TransportError};
use crate::linalg::sq_dist;
use crate::measures::DiscreteMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChamferAccel {
    /// O(|X||Y|) scan.
    #[default]
    Brute,
    KdTree,
}

impl std::str::FromStr for ChamferAccel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "brute" => Ok(Self::Brute),
            "kd-tree" | "kdtree" => Ok(Self::KdTree),
            other => Err(format!("unknown chamfer backend '{other}' (brute|kd-tree)")),
        }
    }
}

/// For each row of `queries`, the lowest-index nearest row of `points` and
/// its squared distance.
pub fn nearest_neighbors(queries: &[f64], points: &[f64], dim: usize, accel: ChamferAccel) -> Vec<(usize, f64)> {
    match accel {
        ChamferAccel::Brute => queries
            .par_chunks_exact(dim)
            .map(|q| {
                let mut best = (usize::MAX, f64::INFINITY);
                for (j, y) in points.chunks_exact(dim).enumerate() {
                    let d = sq_dist(q, y);
                    if d < best.1 || best.0 == usize::MAX {
                        best = (j, d);
                    }
                }
                best
            })
            .collect(),
        ChamferAccel::KdTree => {
            let tree = KdTree::build(points, dim);
            queries.par_chunks_exact(dim).map(|q| tree.nearest(q).expect("non-empty tree")).collect()
        }
    }
}

/// `(1/|X|) Σ_x min_y |x - y|^2 + (1/|Y|) Σ_y min_x |x - y|^2`, weights
/// ignored, with the gradient on the supports of `x`.
pub fn chamfer(x: &DiscreteMeasure, y: &DiscreteMeasure, accel: ChamferAccel) -> Result<LossValueGrad, TransportError> {
    check_same_dim(x.dim(), y.dim())?;
    if x.is_empty() || y.is_empty() {
        return Err(TransportError::Empty);
    }
    let d = x.dim();
    let (nx, ny) = (x.len(), y.len());
    let fwd = nearest_neighbors(x.supports(), y.supports(), d, accel);
    let bwd = nearest_neighbors(y.supports(), x.supports(), d, accel);

    let mut grad = vec![0.0; nx * d];
    let mut sx = 0.0;
    let cx = 2.0 / nx as f64;
    for (i, &(j, dist)) in fwd.iter().enumerate() {
        sx += dist;
        let (xi, yj) = (x.support(i), y.support(j));
        for k in 0..d {
            grad[i * d + k] += cx * (xi[k] - yj[k]);
        }
    }
    let mut sy = 0.0;
    let cy = 2.0 / ny as f64;
    for (j, &(i, dist)) in bwd.iter().enumerate() {
        sy += dist;
        let (xi, yj) = (x.support(i), y.support(j));
        for k in 0..d {
            grad[i * d + k] += cy * (xi[k] - yj[k]);
        }
    }
    Ok(LossValueGrad { value: sx / nx as f64 + sy / ny as f64, grad, weight_grad: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_sets_are_zero() {
        let x = DiscreteMeasure::from_points(&[[0.0, 1.0], [2.0, 3.0], [-1.0, 0.5]]).unwrap();
        for accel in [ChamferAccel::Brute, ChamferAccel::KdTree] {
            let r = chamfer(&x, &x, accel).unwrap();
            assert_eq!(r.value, 0.0);
            assert!(r.grad.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn single_pair() {
        let x = DiscreteMeasure::from_points(&[[0.0, 0.0]]).unwrap();
        let y = DiscreteMeasure::from_points(&[[3.0, 4.0]]).unwrap();
        let r = chamfer(&x, &y, ChamferAccel::Brute).unwrap();
        assert_eq!(r.value, 50.0);
        assert_eq!(r.grad, vec![-12.0, -16.0]);
    }

    #[test]
    fn kd_tree_handles_duplicates_like_brute() {
        let pts: Vec<[f64; 2]> = (0..40).map(|i| [(i % 5) as f64, (i % 3) as f64]).collect();
        let flat: Vec<f64> = pts.iter().flatten().copied().collect();
        let q: Vec<f64> = vec![0.5, 0.5, 2.0, 1.0, 4.2, -3.0, 1.5, 1.5];
        let a = nearest_neighbors(&q, &flat, 2, ChamferAccel::Brute);
        let b = nearest_neighbors(&q, &flat, 2, ChamferAccel::KdTree);
        assert_eq!(a, b);
    }
}
