//! Small dense strictly convex QP solver.
//!
//! Minimizes `1/2 u^T P u + q^T u` subject to rows `g_i^T u >= d_i`, with P
//! diagonal positive definite. The problems solved here have two or three
//! variables and a handful of rows, so the dual active-set method of
//! Goldfarb and Idnani is used with plain per-iteration linear algebra
//! instead of incremental factorizations. It starts from the unconstrained
//! minimizer, needs no feasible initial point, and detects infeasibility.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct DenseQp {
    /// Diagonal of P, all entries > 0.
    pub hessian_diag: DVector<f64>,
    pub linear: DVector<f64>,
    /// Rows `g^T u >= d`.
    pub rows: Vec<(DVector<f64>, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    /// Iteration cap hit; not observed on well-posed instances.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub status: QpStatus,
    pub u: DVector<f64>,
    /// One multiplier per row; zero for inactive rows.
    pub multipliers: Vec<f64>,
    pub active: Vec<usize>,
}

const FEAS_TOL: f64 = 1e-10;

pub fn solve_qp(qp: &DenseQp) -> QpSolution {
    let n = qp.hessian_diag.len();
    let pinv: DVector<f64> = qp.hessian_diag.map(|p| 1.0 / p);
    let mut u: DVector<f64> = -pinv.component_mul(&qp.linear);
    let mut active: Vec<usize> = Vec::new();
    let mut lambda: Vec<f64> = Vec::new();

    let violation = |u: &DVector<f64>, i: usize| -> f64 {
        let (g, d) = &qp.rows[i];
        g.dot(u) - d
    };

    let mut iterations = 0usize;
    'outer: loop {
        iterations += 1;
        if iterations > 500 {
            return finish(qp, u, active, lambda, QpStatus::Stalled);
        }
        // most violated inactive row
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..qp.rows.len() {
            if active.contains(&i) {
                continue;
            }
            let s = violation(&u, i);
            if s < -FEAS_TOL && worst.map_or(true, |(_, w)| s < w) {
                worst = Some((i, s));
            }
        }
        let Some((p_idx, _)) = worst else {
            return finish(qp, u, active, lambda, QpStatus::Optimal);
        };
        let g_p = qp.rows[p_idx].0.clone();
        let mut lambda_p = 0.0f64;

        loop {
            iterations += 1;
            if iterations > 500 {
                return finish(qp, u, active, lambda, QpStatus::Stalled);
            }
            let k = active.len();
            // primal direction z and dual direction r for the current
            // active set
            let (z, r) = if k == 0 {
                (pinv.component_mul(&g_p), DVector::zeros(0))
            } else {
                let mut nmat = DMatrix::zeros(n, k);
                for (col, &i) in active.iter().enumerate() {
                    nmat.set_column(col, &qp.rows[i].0);
                }
                let pinv_n = {
                    let mut m = nmat.clone();
                    for rr in 0..n {
                        for cc in 0..k {
                            m[(rr, cc)] *= pinv[rr];
                        }
                    }
                    m
                };
                let b = nmat.transpose() * &pinv_n; // k x k
                let rhs = nmat.transpose() * pinv.component_mul(&g_p);
                let r = match b.lu().solve(&rhs) {
                    Some(r) => r,
                    None => return finish(qp, u, active, lambda, QpStatus::Stalled),
                };
                let z = pinv.component_mul(&g_p) - pinv_n * &r;
                (z, r)
            };

            let denom = g_p.dot(&z);
            // dual blocking step
            let mut t1 = f64::INFINITY;
            let mut blocker: Option<usize> = None;
            for j in 0..k {
                if r[j] > 1e-12 {
                    let t = lambda[j] / r[j];
                    if t < t1 {
                        t1 = t;
                        blocker = Some(j);
                    }
                }
            }

            if denom <= 1e-12 {
                // no primal progress possible in this direction
                let Some(l) = blocker else {
                    return finish(qp, u, active, lambda, QpStatus::Infeasible);
                };
                for j in 0..k {
                    lambda[j] -= t1 * r[j];
                }
                lambda_p += t1;
                active.remove(l);
                lambda.remove(l);
                continue;
            }

            let s_p = violation(&u, p_idx);
            let t2 = -s_p / denom;
            let t = t1.min(t2);
            u += &z * t;
            for j in 0..k {
                lambda[j] -= t * r[j];
            }
            lambda_p += t;
            if t2 <= t1 {
                active.push(p_idx);
                lambda.push(lambda_p);
                continue 'outer;
            } else {
                let l = blocker.expect("t1 finite implies a blocking row");
                active.remove(l);
                lambda.remove(l);
            }
        }
    }
}

fn finish(
    qp: &DenseQp,
    u: DVector<f64>,
    active: Vec<usize>,
    lambda: Vec<f64>,
    status: QpStatus,
) -> QpSolution {
    let mut multipliers = vec![0.0; qp.rows.len()];
    for (&i, &l) in active.iter().zip(&lambda) {
        multipliers[i] = l.max(0.0);
    }
    QpSolution {
        status,
        u,
        multipliers,
        active,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn row(coeffs: &[f64], d: f64) -> (DVector<f64>, f64) {
        (DVector::from_column_slice(coeffs), d)
    }

    fn projection_qp(target: &[f64], rows: Vec<(DVector<f64>, f64)>) -> DenseQp {
        let n = target.len();
        DenseQp {
            hessian_diag: DVector::from_element(n, 2.0),
            linear: DVector::from_column_slice(target) * -2.0,
            rows,
        }
    }

    #[test]
    fn unconstrained_projection() {
        let qp = projection_qp(&[1.0, 0.0], vec![]);
        let sol = solve_qp(&qp);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_abs_diff_eq!(sol.u[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.u[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn single_halfspace_projection() {
        // u_x <= 3 written as -u_x >= -3
        let qp = projection_qp(&[5.0, 0.0], vec![row(&[-1.0, 0.0], -3.0)]);
        let sol = solve_qp(&qp);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_abs_diff_eq!(sol.u[0], 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.u[1], 0.0, epsilon = 1e-10);
        assert!(sol.multipliers[0] > 0.0);
    }

    #[test]
    fn corner_projection() {
        let qp = projection_qp(
            &[2.0, 2.0],
            vec![row(&[-1.0, 0.0], -1.0), row(&[0.0, -1.0], -0.5)],
        );
        let sol = solve_qp(&qp);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_abs_diff_eq!(sol.u[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.u[1], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn infeasible_rows() {
        let qp = projection_qp(&[0.0, 0.0], vec![row(&[1.0, 0.0], 1.0), row(&[-1.0, 0.0], 0.0)]);
        let sol = solve_qp(&qp);
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn random_matches_enumeration_oracle() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let n = if rng.gen_bool(0.5) { 2 } else { 3 };
            let qp = crate::oracles::random_qp(&mut rng, n, 6);
            let sol = solve_qp(&qp);
            match crate::oracles::qp_enumeration(&qp) {
                Some((u_oracle, _)) => {
                    assert_eq!(sol.status, QpStatus::Optimal);
                    assert_abs_diff_eq!((sol.u - u_oracle).norm(), 0.0, epsilon = 1e-7);
                }
                None => assert_eq!(sol.status, QpStatus::Infeasible),
            }
        }
    }
}
