//! Shared convex machinery for the precoding solvers.
//!
//! The workhorse is Euclidean projection onto a polyhedron `{x : G x >= h}`,
//! solved through its dual: a nonnegative quadratic program in one multiplier
//! per constraint, handled by a Lawson-Hanson style active-set iteration.
//! Constraint counts here are tiny (a few per user), so dense solves are
//! exact and fast.

use nalgebra::{DMatrix, DVector};

use crate::error::{IsacError, Result};

/// Project `x0` onto `{x : g x >= h}` in the Euclidean norm.
pub fn project_polyhedron(
    x0: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &DVector<f64>,
) -> Result<DVector<f64>> {
    if g.nrows() != h.len() {
        return Err(IsacError::dimension(format!(
            "{} constraint rows vs {} bounds",
            g.nrows(),
            h.len()
        )));
    }
    if g.ncols() != x0.len() {
        return Err(IsacError::dimension(format!(
            "constraints over {} variables, point has {}",
            g.ncols(),
            x0.len()
        )));
    }
    if g.nrows() == 0 {
        return Ok(x0.clone());
    }
    // Dual: x = x0 + G^T lambda with lambda >= 0 minimizing
    // 1/2 lambda^T (G G^T) lambda - lambda^T (h - G x0).
    let m = g * g.transpose();
    let q = h - g * x0;
    let lambda = nnqp(&m, &q)?;
    let x = x0 + g.transpose() * lambda;
    // An empty polyhedron makes the dual unbounded; the ridge in the
    // active-set solve then stalls at a fake stationary point. Catch it here.
    let slack = (g * &x - h).min();
    let scale = 1.0 + h.amax().max(x.amax());
    if slack < -1e-7 * scale {
        return Err(IsacError::infeasible(format!(
            "polyhedron is empty or ill-conditioned (residual violation {slack:.3e})"
        )));
    }
    Ok(x)
}

/// Minimum-norm point of `{x : g x >= h}`.
pub fn min_norm_point(g: &DMatrix<f64>, h: &DVector<f64>) -> Result<DVector<f64>> {
    project_polyhedron(&DVector::zeros(g.ncols()), g, h)
}

/// Project `x0` onto the intersection of `{x : g x >= h}` and the origin
/// ball of the given radius, by Dykstra's alternating corrections.
pub fn project_polyhedron_ball(
    x0: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &DVector<f64>,
    radius: f64,
) -> Result<DVector<f64>> {
    if !(radius > 0.0) {
        return Err(IsacError::domain("ball radius must be positive"));
    }
    let ball = |x: &DVector<f64>| -> DVector<f64> {
        let n = x.norm();
        if n > radius { x * (radius / n) } else { x.clone() }
    };
    let mut x = x0.clone();
    let mut p = DVector::zeros(x0.len());
    let mut q = DVector::zeros(x0.len());
    let mut prev = x.clone();
    for it in 0..300 {
        let y = project_polyhedron(&(&x + &p), g, h)?;
        p = &x + &p - &y;
        x = ball(&(&y + &q));
        q = &y + &q - &x;
        if it > 0 && (&x - &prev).norm() < 1e-13 * (1.0 + x.norm()) {
            break;
        }
        prev = x.clone();
    }
    let slack = (g * &x - h).min();
    let scale = 1.0 + h.amax().max(x.amax());
    if slack < -1e-6 * scale || x.norm() > radius * (1.0 + 1e-9) {
        return Err(IsacError::infeasible(
            "polyhedron-ball intersection is empty or too thin",
        ));
    }
    Ok(x)
}

/// Nonnegative QP: minimize `1/2 l^T m l - q^T l` over `l >= 0`.
///
/// `m` must be symmetric positive semidefinite. Active-set iteration with
/// minimum-norm working-set solves and deterministic tie-breaking. When the
/// QP arises as the dual of a projection onto an empty polyhedron it is
/// unbounded below; diverging multipliers are reported as infeasibility.
pub fn nnqp(m: &DMatrix<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
    let n = q.len();
    let scale = m.diagonal().amax().max(q.amax()).max(1e-300);
    let tol = 1e-12 * scale;
    let lambda_cap = 1e12 * (1.0 + q.amax()) / m.diagonal().amax().max(1e-300);

    let mut lambda = DVector::zeros(n);
    let mut passive = vec![false; n];
    // Degenerate entries (no strict objective decrease) are banned until the
    // next productive step; this breaks the classic anti-cycling failure of
    // active-set methods on rank-deficient duals. A stall with every
    // violating candidate banned ends the iteration; the caller's primal
    // feasibility check then decides between "done" and "empty set".
    let mut banned = vec![false; n];
    let objective = |l: &DVector<f64>| 0.5 * l.dot(&(m * l)) - q.dot(l);

    let solve_passive = |passive: &[bool]| -> Option<DVector<f64>> {
        let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
        let k = idx.len();
        if k == 0 {
            return Some(DVector::zeros(0));
        }
        let mut mp = DMatrix::zeros(k, k);
        let mut qp = DVector::zeros(k);
        for (a, &i) in idx.iter().enumerate() {
            qp[a] = q[i];
            for (b, &j) in idx.iter().enumerate() {
                mp[(a, b)] = m[(i, j)];
            }
        }
        // Redundant constraint rows make the working set rank-deficient; the
        // pseudo-inverse keeps the face solution bounded anyway.
        let svd = mp.svd(true, true);
        let top = svd.singular_values.max().max(1e-300);
        svd.solve(&qp, 1e-12 * top).ok()
    };

    for _outer in 0..(8 * n.max(4) * n.max(4)) {
        // KKT check on the held-out multipliers.
        let w = m * &lambda - q;
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if !passive[i] && !banned[i] && w[i] < -tol {
                if best.map_or(true, |(_, v)| w[i] < v) {
                    best = Some((i, w[i]));
                }
            }
        }
        let Some((enter, _)) = best else {
            return Ok(lambda);
        };
        let lambda_before = lambda.clone();
        let passive_before = passive.clone();
        let obj_before = objective(&lambda);
        passive[enter] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let z = solve_passive(&passive)
                .ok_or_else(|| IsacError::numerical("singular working set in nnqp"))?;
            if z.iter().all(|&v| v >= -tol) {
                lambda.fill(0.0);
                for (a, &i) in idx.iter().enumerate() {
                    lambda[i] = z[a].max(0.0);
                }
                break;
            }
            // Step from lambda toward z until the first passive variable hits 0.
            let mut alpha = f64::INFINITY;
            let mut leave = None;
            for (a, &i) in idx.iter().enumerate() {
                if z[a] < -tol {
                    let denom = lambda[i] - z[a];
                    if denom > 0.0 {
                        let step = lambda[i] / denom;
                        if step < alpha {
                            alpha = step;
                            leave = Some(i);
                        }
                    }
                }
            }
            let Some(leave) = leave else {
                return Err(IsacError::numerical("nnqp failed to find a blocking variable"));
            };
            for (a, &i) in idx.iter().enumerate() {
                lambda[i] += alpha * (z[a] - lambda[i]);
            }
            lambda[leave] = 0.0;
            passive[leave] = false;
        }
        if lambda.amax() > lambda_cap {
            return Err(IsacError::infeasible(
                "dual multipliers diverged; the constraint set is empty",
            ));
        }
        if objective(&lambda) < obj_before - 1e-14 * (1.0 + obj_before.abs()) {
            banned.fill(false);
        } else {
            lambda = lambda_before;
            passive = passive_before;
            banned[enter] = true;
        }
    }
    Err(IsacError::numerical("nnqp active-set iteration did not converge"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_projection_of_interior_point_is_identity() {
        // x >= -1 in both coordinates; origin is interior.
        let g = DMatrix::identity(2, 2);
        let h = DVector::from_vec(vec![-1.0, -1.0]);
        let x0 = DVector::zeros(2);
        let x = project_polyhedron(&x0, &g, &h).unwrap();
        assert!((x - x0).norm() < 1e-12);
    }

    #[test]
    fn test_projection_onto_halfplane() {
        // Constraint x + y >= 2; project the origin -> (1, 1).
        let g = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let h = DVector::from_vec(vec![2.0]);
        let x = min_norm_point(&g, &h).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-10 && (x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn test_projection_onto_corner() {
        // x >= 1 and y >= 2 from the origin lands on the corner (1, 2).
        let g = DMatrix::identity(2, 2);
        let h = DVector::from_vec(vec![1.0, 2.0]);
        let x = min_norm_point(&g, &h).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-10 && (x[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn test_projection_with_redundant_constraints() {
        // Same halfplane twice; the dual is singular but the primal is fine.
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let h = DVector::from_vec(vec![3.0, 3.0]);
        let x0 = DVector::from_vec(vec![0.0, 5.0]);
        let x = project_polyhedron(&x0, &g, &h).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-8 && (x[1] - 5.0).abs() < 1e-8);
    }

    #[test]
    fn test_dykstra_intersection_projection() {
        // Halfplane x + y >= 2 intersected with the radius-2 ball: the
        // projection of the origin is (1, 1), interior to the ball.
        let g = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let h = DVector::from_vec(vec![2.0]);
        let x = project_polyhedron_ball(&DVector::zeros(2), &g, &h, 2.0).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9);

        // Shrink the ball so it clips the halfplane: the answer moves to the
        // closest point of the circular arc inside the halfplane.
        let r = 2.0f64.sqrt() * 1.01;
        let x = project_polyhedron_ball(&DVector::from_vec(vec![3.0, 3.0]), &g, &h, r).unwrap();
        assert!((x.norm() - r).abs() < 1e-9);
        assert!((x[0] - x[1]).abs() < 1e-9);

        // Disjoint sets are reported.
        let far = DVector::from_vec(vec![10.0]);
        let g1 = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(project_polyhedron_ball(&DVector::zeros(1), &g1, &far, 1.0).is_err());
    }

    #[test]
    fn test_empty_polyhedron_is_reported() {
        // x >= 1 together with -x >= 1 has no solution.
        let g = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let h = DVector::from_vec(vec![1.0, 1.0]);
        assert!(min_norm_point(&g, &h).is_err());
    }

    #[test]
    fn test_projection_matches_brute_force_on_random_problems() {
        use rand::RngExt;
        let mut rng = crate::rng::stream(17, "qp");
        for _case in 0..50 {
            let n = 3;
            let m = 4;
            let g = DMatrix::from_fn(m, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            // Anchor the bounds to a random interior point so the polyhedron
            // is guaranteed nonempty; projection is undefined otherwise.
            let interior = DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let h = &g * &interior
                - DVector::from_fn(m, |_, _| 0.05 + rng.random::<f64>());
            let x0 = DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let x = project_polyhedron(&x0, &g, &h).unwrap();
            let viol = (&g * &x - &h).min();
            assert!(viol > -1e-8, "projection violates constraints by {viol}");
            // Brute force over active subsets: the projection is the closest
            // KKT point, so no subset solution may be feasible and closer.
            let d_star = (&x - &x0).norm();
            for mask in 0..(1 << m) {
                let rows: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
                if rows.is_empty() {
                    if (&g * &x0 - &h).min() > -1e-10 {
                        assert!(d_star < 1e-8);
                    }
                    continue;
                }
                let a = DMatrix::from_fn(rows.len(), n, |r, c| g[(rows[r], c)]);
                let b = DVector::from_fn(rows.len(), |r, _| h[rows[r]]);
                // Equality-projection onto the affine set A x = b.
                let gram = &a * a.transpose();
                let Some(mult) = gram.clone().lu().solve(&(&b - &a * &x0)) else {
                    continue;
                };
                let cand = &x0 + a.transpose() * mult;
                if (&g * &cand - &h).min() > -1e-10 {
                    let d = (&cand - &x0).norm();
                    assert!(
                        d >= d_star - 1e-7,
                        "subset projection closer: {d} < {d_star}"
                    );
                }
            }
        }
    }
}
