//! Independent reference implementations used only by tests.
//!
//! Nothing here shares code with `meshot`: transport is solved as a dense
//! linear program, nearest neighbours by exhaustive scan, intersections by
//! explicit parametric solves.

/// Exact discrete optimal transport cost `min Σ π_ij C_ij` subject to the
/// marginal constraints, solved with a dense two-phase simplex (Bland's rule).
/// `cost` is row-major `a.len() x b.len()`.
pub fn lp_transport_cost(a: &[f64], b: &[f64], cost: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    assert_eq!(cost.len(), n * m);
    // Equality rows: n row sums, m column sums (one redundant, kept and
    // handled by phase I artificials).
    let rows = n + m;
    let vars = n * m;
    let mut rhs = Vec::with_capacity(rows);
    let mut mat = vec![vec![0.0; vars]; rows];
    for i in 0..n {
        for j in 0..m {
            mat[i][i * m + j] = 1.0;
            mat[n + j][i * m + j] = 1.0;
        }
        rhs.push(a[i]);
    }
    rhs.extend_from_slice(b);
    simplex_min(&mat, &rhs, cost)
}

/// `min c·x` s.t. `A x = rhs`, `x >= 0`, `rhs >= 0`. Panics if infeasible.
pub fn simplex_min(mat: &[Vec<f64>], rhs: &[f64], c: &[f64]) -> f64 {
    let rows = mat.len();
    let vars = c.len();
    let width = vars + rows + 1; // structural, artificial, rhs
    let mut t: Vec<Vec<f64>> = (0..rows)
        .map(|r| {
            let mut row = vec![0.0; width];
            row[..vars].copy_from_slice(&mat[r]);
            row[vars + r] = 1.0;
            row[width - 1] = rhs[r];
            row
        })
        .collect();
    let mut basis: Vec<usize> = (vars..vars + rows).collect();

    // phase I: minimize the sum of artificials
    let mut obj1 = vec![0.0; width];
    for k in vars..vars + rows {
        obj1[k] = 1.0;
    }
    run_simplex(&mut t, &mut basis, &obj1, vars + rows);
    let infeas: f64 = basis.iter().zip(&t).filter(|(&b, _)| b >= vars).map(|(_, r)| r[width - 1]).sum();
    assert!(infeas < 1e-9, "LP infeasible ({infeas})");
    // drive remaining (zero-valued) artificials out of the basis
    for r in 0..rows {
        if basis[r] >= vars {
            if let Some(k) = (0..vars).find(|&k| t[r][k].abs() > 1e-12) {
                pivot(&mut t, &mut basis, r, k);
            }
        }
    }

    // phase II over structural columns only
    let mut obj2 = vec![0.0; width];
    obj2[..vars].copy_from_slice(c);
    run_simplex(&mut t, &mut basis, &obj2, vars);
    basis.iter().zip(&t).filter(|(&b, _)| b < vars).map(|(&b, r)| c[b] * r[width - 1]).sum()
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, k: usize) {
    let p = t[r][k];
    for x in t[r].iter_mut() {
        *x /= p;
    }
    let pr = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i != r {
            let f = row[k];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(&pr) {
                    *x -= f * y;
                }
            }
        }
    }
    basis[r] = k;
}

fn run_simplex(t: &mut [Vec<f64>], basis: &mut [usize], obj: &[f64], allowed: usize) {
    let width = obj.len();
    loop {
        // reduced costs c_k - c_B B^-1 A_k
        let entering = (0..allowed).find(|&k| {
            if basis.contains(&k) {
                return false;
            }
            let z: f64 = basis.iter().zip(t.iter()).map(|(&b, row)| obj[b] * row[k]).sum();
            obj[k] - z < -1e-12
        });
        let Some(k) = entering else { return };
        let mut best: Option<(usize, f64)> = None;
        for (r, row) in t.iter().enumerate() {
            if row[k] > 1e-12 {
                let ratio = row[width - 1] / row[k];
                match best {
                    Some((br, bv)) if ratio > bv + 1e-15 || (ratio >= bv - 1e-15 && basis[r] > basis[br]) => {}
                    _ => best = Some((r, ratio)),
                }
            }
        }
        let (r, _) = best.expect("LP unbounded");
        pivot(t, basis, r, k);
    }
}

/// Dense `|x - y|^p` cost matrix.
pub fn cost_matrix(x: &[f64], y: &[f64], dim: usize, p: f64) -> Vec<f64> {
    let mut c = Vec::new();
    for xi in x.chunks_exact(dim) {
        for yj in y.chunks_exact(dim) {
            let d2: f64 = xi.iter().zip(yj).map(|(a, b)| (a - b) * (a - b)).sum();
            c.push(d2.sqrt().powf(p));
        }
    }
    c
}

/// Chamfer distance by exhaustive scan.
pub fn chamfer_brute(x: &[f64], y: &[f64], dim: usize) -> f64 {
    let one_way = |a: &[f64], b: &[f64]| {
        let n = a.len() / dim;
        a.chunks_exact(dim)
            .map(|p| {
                b.chunks_exact(dim)
                    .map(|q| p.iter().zip(q).map(|(u, v)| (u - v) * (u - v)).sum::<f64>())
                    .fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
            / n as f64
    };
    one_way(x, y) + one_way(y, x)
}

/// Central finite differences of `f` at `x`.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Max relative error `|a - b| / max(|a|, |b|, floor)`.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor)).fold(0.0, f64::max)
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Whether segment `p0 p1` meets triangle `a b c`, by solving
/// `p0 + t (p1 - p0) = a + u (b - a) + v (c - a)` with Cramer's rule.
/// Non-degenerate (non-parallel) configurations only; returns `None` when
/// the system is singular.
pub fn segment_triangle_parametric(p0: [f64; 3], p1: [f64; 3], a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> Option<bool> {
    let d = [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]];
    let e1 = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let e2 = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let r = [p0[0] - a[0], p0[1] - a[1], p0[2] - a[2]];
    // columns: -d, e1, e2
    let col = |v: [f64; 3], w: [f64; 3], z: [f64; 3]| [[v[0], w[0], z[0]], [v[1], w[1], z[1]], [v[2], w[2], z[2]]];
    let nd = [-d[0], -d[1], -d[2]];
    let det = det3(col(nd, e1, e2));
    let scale = d.iter().chain(&e1).chain(&e2).map(|x| x.abs()).fold(0.0, f64::max).powi(3);
    if det.abs() <= 1e-12 * scale.max(1e-300) {
        return None;
    }
    let t = det3(col(r, e1, e2)) / det;
    let u = det3(col(nd, r, e2)) / det;
    let v = det3(col(nd, e1, r)) / det;
    Some((0.0..=1.0).contains(&t) && u >= 0.0 && v >= 0.0 && u + v <= 1.0)
}

/// Whether two triangles intersect, from segment/triangle tests in both
/// directions. `None` if any test hits a degenerate configuration.
pub fn triangles_intersect_parametric(t1: [[f64; 3]; 3], t2: [[f64; 3]; 3]) -> Option<bool> {
    let mut hit = false;
    for (s, o) in [(t1, t2), (t2, t1)] {
        for k in 0..3 {
            hit |= segment_triangle_parametric(s[k], s[(k + 1) % 3], o[0], o[1], o[2])?;
        }
    }
    Some(hit)
}

/// Proper-or-touching crossing of two 2D segments via the parametric solve;
/// `None` for parallel segments.
pub fn segments_cross_parametric(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> Option<bool> {
    let r = [b[0] - a[0], b[1] - a[1]];
    let s = [d[0] - c[0], d[1] - c[1]];
    let den = r[0] * s[1] - r[1] * s[0];
    if den == 0.0 {
        return None;
    }
    let q = [c[0] - a[0], c[1] - a[1]];
    let t = (q[0] * s[1] - q[1] * s[0]) / den;
    let u = (q[0] * r[1] - q[1] * r[0]) / den;
    Some((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u))
}

/// Number of crossing pairs of non-adjacent segments of a closed polyline.
pub fn closed_polyline_crossings(v: &[[f64; 2]]) -> usize {
    let n = v.len();
    let mut count = 0;
    for i in 0..n {
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let hit = segments_cross_parametric(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]).unwrap_or(false);
            count += hit as usize;
        }
    }
    count
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_solves_a_permutation_problem() {
        let a = [0.5, 0.5];
        let b = [0.5, 0.5];
        // cheaper to cross over
        let c = [4.0, 1.0, 1.0, 4.0];
        assert!((lp_transport_cost(&a, &b, &c) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lp_handles_unequal_sizes() {
        // all mass of the single source goes everywhere
        let c = [1.0, 2.0, 3.0];
        let v = lp_transport_cost(&[1.0], &[0.2, 0.3, 0.5], &c);
        assert!((v - (0.2 + 0.6 + 1.5)).abs() < 1e-12);
    }

    #[test]
    fn parametric_segment_triangle() {
        let tri = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert_eq!(segment_triangle_parametric([0.2, 0.2, -1.0], [0.2, 0.2, 1.0], tri[0], tri[1], tri[2]), Some(true));
        assert_eq!(segment_triangle_parametric([0.8, 0.8, -1.0], [0.8, 0.8, 1.0], tri[0], tri[1], tri[2]), Some(false));
        assert_eq!(segment_triangle_parametric([0.2, 0.2, 0.5], [0.2, 0.2, 1.0], tri[0], tri[1], tri[2]), Some(false));
    }

    #[test]
    fn crossings_of_a_bowtie() {
        assert_eq!(closed_polyline_crossings(&[[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]), 1);
        assert_eq!(closed_polyline_crossings(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]), 0);
    }

    #[test]
    fn slope_of_a_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((log_log_slope(&x, &y) + 0.5).abs() < 1e-12);
    }
}
