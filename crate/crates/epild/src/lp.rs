//! Linear feasibility oracle: is a vector a nonnegative combination of a
//! given set of directions?
//!
//! This decides membership of a velocity in the cone spanned by the active
//! jump directions, which is exactly the finiteness domain of the local rate
//! function. Implemented as a phase-1 simplex (minimize the sum of artificial
//! variables) with Bland's rule, so it terminates on degenerate cones.

const PIVOT_TOL: f64 = 1e-11;

/// True iff `y = sum_j mu_j dirs[j]` has a solution with all `mu_j >= 0`.
///
/// `dirs` are the columns (each of dimension d). An empty direction set spans
/// only the origin.
pub fn cone_contains(dirs: &[&[f64]], y: &[f64], tol: f64) -> bool {
    let d = y.len();
    let k = dirs.len();
    let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if ynorm <= tol {
        return true;
    }
    if k == 0 {
        return false;
    }

    // Tableau: columns [mu_1..mu_k | a_1..a_d | rhs], rows scaled so rhs >= 0.
    // Artificial a_i starts basic in row i; phase-1 cost is sum of a_i.
    let cols = k + d;
    let mut t = vec![vec![0.0; cols + 1]; d];
    for i in 0..d {
        let flip = if y[i] < 0.0 { -1.0 } else { 1.0 };
        for (j, dir) in dirs.iter().enumerate() {
            t[i][j] = flip * dir[i];
        }
        t[i][k + i] = 1.0;
        t[i][cols] = flip * y[i];
    }
    let mut basis: Vec<usize> = (k..k + d).collect();

    // Reduced cost row for the phase-1 objective.
    let mut obj = vec![0.0; cols + 1];
    for i in 0..d {
        for j in 0..=cols {
            obj[j] += t[i][j];
        }
    }
    for i in 0..d {
        obj[k + i] -= 1.0;
    }

    let max_iters = 50 * (d + k + 4);
    for _ in 0..max_iters {
        // Bland: entering column = lowest index with positive reduced cost.
        let Some(enter) = (0..cols).find(|&j| obj[j] > PIVOT_TOL) else {
            break;
        };
        // Ratio test, ties broken by lowest basis index (Bland).
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..d {
            if t[i][enter] > PIVOT_TOL {
                let ratio = t[i][cols] / t[i][enter];
                if ratio < best - PIVOT_TOL
                    || (ratio < best + PIVOT_TOL
                        && leave.is_some_and(|l| basis[i] < basis[l]))
                {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else {
            // The phase-1 objective is bounded below by 0, so no column is
            // ever unbounded; treat a failed ratio test as termination.
            break;
        };
        let piv = t[r][enter];
        for j in 0..=cols {
            t[r][j] /= piv;
        }
        for i in 0..d {
            if i != r {
                let f = t[i][enter];
                if f != 0.0 {
                    for j in 0..=cols {
                        t[i][j] -= f * t[r][j];
                    }
                }
            }
        }
        let f = obj[enter];
        if f != 0.0 {
            for j in 0..=cols {
                obj[j] -= f * t[r][j];
            }
        }
        basis[r] = enter;
    }

    // Feasible iff all artificials were driven (numerically) to zero.
    let residual: f64 = basis
        .iter()
        .enumerate()
        .filter(|(_, &b)| b >= k)
        .map(|(i, _)| t[i][cols])
        .sum();
    residual <= tol.max(1e-9 * (1.0 + ynorm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(|d| d.as_slice()).collect()
    }

    #[test]
    fn positive_span_of_axes() {
        let h = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(cone_contains(&dirs(&h), &[2.0, 3.0], 1e-12));
        assert!(!cone_contains(&dirs(&h), &[-1.0, 1.0], 1e-12));
    }

    #[test]
    fn full_plane_when_directions_span_positively() {
        // The three jump directions of the two-compartment epidemic model
        // positively span the whole plane.
        let h = vec![vec![1.0, 0.0], vec![-1.0, 1.0], vec![0.0, -1.0]];
        for y in [
            [1.0, 0.0],
            [-1.0, 0.0],
            [0.0, 1.0],
            [0.0, -1.0],
            [-3.0, 2.5],
            [0.7, -0.2],
        ] {
            assert!(cone_contains(&dirs(&h), &y, 1e-12), "y={y:?}");
        }
    }

    #[test]
    fn single_ray() {
        let h = vec![vec![0.0, -1.0]];
        assert!(cone_contains(&dirs(&h), &[0.0, -4.0], 1e-12));
        assert!(!cone_contains(&dirs(&h), &[0.0, 1.0], 1e-12));
        assert!(!cone_contains(&dirs(&h), &[0.5, -0.5], 1e-12));
    }

    #[test]
    fn origin_is_always_a_member() {
        assert!(cone_contains(&[], &[0.0, 0.0], 1e-12));
        let h = vec![vec![1.0, 1.0]];
        assert!(cone_contains(&dirs(&h), &[0.0, 0.0], 1e-12));
    }

    #[test]
    fn empty_set_spans_only_origin() {
        assert!(!cone_contains(&[], &[1.0, 0.0], 1e-12));
    }

    #[test]
    fn degenerate_dependent_directions() {
        let h = vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![-1.0, 0.0]];
        assert!(cone_contains(&dirs(&h), &[-3.0, 0.0], 1e-12));
        assert!(!cone_contains(&dirs(&h), &[0.0, 1e-3], 1e-12));
    }
}
