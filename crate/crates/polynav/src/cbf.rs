//! Minkowski-difference barrier evaluation.
//!
//! Safety of the polytopic robot against one convex obstacle reduces to the
//! distance from the origin to the configuration obstacle. That distance is
//! the optimum of a tiny QP over the CO; here it is computed exactly by
//! enumerating the polygon's boundary features, which also yields the active
//! set and the dual variables in closed form. The barrier gradient is the
//! unit vector from the critical point toward the origin, and the Hessian
//! has two branches depending on whether the critical point is a vertex or
//! an edge of the CO.

use nalgebra::{DMatrix, DVector, Matrix2};
use thiserror::Error;

use crate::geometry::{closest_point_on_polygon, ClosestFeature, ConfigObstacle, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CbfError {
    #[error("robot position is inside the configuration obstacle")]
    InsideObstacle,
}

/// Which boundary feature of the CO holds the critical point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveFeature {
    Vertex,
    Edge,
    Interior,
}

/// Solution of the min-dist QP `min ||z||^2 s.t. A^c z <= b^c(p)`.
#[derive(Debug, Clone)]
pub struct MinDistSolution {
    /// Critical point: projection of the origin onto the CO at position p.
    pub z_star: Vec2,
    /// Duals on the active rows, recovered from stationarity
    /// `2 z* + A_I^T lambda = 0`.
    pub lambda_star: Vec<f64>,
    pub active_rows: Vec<usize>,
    pub feature: ActiveFeature,
    pub dist: f64,
}

/// Barrier value and its position derivatives for one obstacle.
#[derive(Debug, Clone)]
pub struct BarrierEval {
    pub h: f64,
    /// Unit normal `n = -z*/||z*||`, the transposed barrier gradient.
    pub n: Vec2,
    /// Position Hessian of the barrier: `(I - n n^T)/||z*||` at a vertex,
    /// zero on an edge.
    pub hess: Matrix2<f64>,
    pub feature: ActiveFeature,
    pub obstacle_index: usize,
}

/// One linear-in-input safety row `coeff_u^T u >= rhs`.
#[derive(Debug, Clone)]
pub struct CbfConstraint {
    pub coeff_u: DVector<f64>,
    pub rhs: f64,
}

/// Projects the origin onto the CO seen from robot position `p`.
///
/// The CO at position p is the p = 0 polygon translated by -p, so the
/// projection is computed against the stored polygon directly.
pub fn solve_min_dist(co: &ConfigObstacle, p: Vec2) -> MinDistSolution {
    let (q, feature) = closest_point_on_polygon(co.shape0(), p);
    let z_star = q - p;
    let ell = co.normals().len();
    match feature {
        ClosestFeature::Inside => MinDistSolution {
            z_star: Vec2::zeros(),
            lambda_star: Vec::new(),
            active_rows: Vec::new(),
            feature: ActiveFeature::Interior,
            dist: 0.0,
        },
        ClosestFeature::Edge(i) => {
            let a = co.normals()[i];
            let lambda = -2.0 * a.dot(&z_star);
            MinDistSolution {
                z_star,
                lambda_star: vec![lambda],
                active_rows: vec![i],
                feature: ActiveFeature::Edge,
                dist: z_star.norm(),
            }
        }
        ClosestFeature::Vertex(i) => {
            // Vertex i joins edge rows i-1 and i.
            let r0 = (i + ell - 1) % ell;
            let r1 = i;
            let a0 = co.normals()[r0];
            let a1 = co.normals()[r1];
            let m = Matrix2::from_columns(&[a0, a1]);
            let rhs = -2.0 * z_star;
            let lambda = m
                .lu()
                .solve(&rhs)
                .unwrap_or_else(|| Vec2::zeros());
            MinDistSolution {
                z_star,
                lambda_star: vec![lambda.x, lambda.y],
                active_rows: vec![r0, r1],
                feature: ActiveFeature::Vertex,
                dist: z_star.norm(),
            }
        }
    }
}

/// Barrier `h = dist - d_safe` with its closed-form gradient normal and
/// feature-classified Hessian. Requires the robot to be outside the CO.
pub fn barrier(co: &ConfigObstacle, p: Vec2, d_safe: f64) -> Result<BarrierEval, CbfError> {
    let sol = solve_min_dist(co, p);
    if sol.feature == ActiveFeature::Interior || sol.dist <= 1e-12 {
        return Err(CbfError::InsideObstacle);
    }
    let n = -sol.z_star / sol.dist;
    let hess = match sol.feature {
        ActiveFeature::Vertex => (Matrix2::identity() - n * n.transpose()) / sol.dist,
        _ => Matrix2::zeros(),
    };
    Ok(BarrierEval {
        h: sol.dist - d_safe,
        n,
        hess,
        feature: sol.feature,
        obstacle_index: co.source(),
    })
}

/// First-order CBF row `n^T f + n^T g u + k h >= 0` rearranged to
/// `(g^T n)^T u >= -n^T f - k h`.
pub fn first_order_constraint(
    be: &BarrierEval,
    f_at_x: &DVector<f64>,
    g_at_x: &DMatrix<f64>,
    k: f64,
) -> CbfConstraint {
    let n = DVector::from_column_slice(&[be.n.x, be.n.y]);
    let coeff_u = g_at_x.transpose() * &n;
    let rhs = -n.dot(f_at_x) - k * be.h;
    CbfConstraint { coeff_u, rhs }
}

/// Second-order (HOCBF) row for double-integrator dynamics:
/// `v^T H v + n^T u + (k1+k2) n^T v + k1 k2 h >= 0`.
pub fn hocbf_constraint(be: &BarrierEval, v: Vec2, k1: f64, k2: f64) -> CbfConstraint {
    let curvature = (v.transpose() * be.hess * v)[(0, 0)];
    let rhs = -curvature - (k1 + k2) * be.n.dot(&v) - k1 * k2 * be.h;
    CbfConstraint {
        coeff_u: DVector::from_column_slice(&[be.n.x, be.n.y]),
        rhs,
    }
}

/// First member of the HOCBF sequence, `psi_1 = n^T v + k1 h`; membership in
/// its zero-superlevel set is required at the initial state.
pub fn psi1(be: &BarrierEval, v: Vec2, k1: f64) -> f64 {
    be.n.dot(&v) + k1 * be.h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{configuration_obstacle, polygon_distance_oracle, VPolytope};
    use approx::assert_abs_diff_eq;

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    fn square(x0: f64, x1: f64, y0: f64, y1: f64) -> VPolytope {
        VPolytope::new(vec![v(x0, y0), v(x1, y0), v(x1, y1), v(x0, y1)]).unwrap()
    }

    fn co_from_shape(shape: VPolytope) -> ConfigObstacle {
        crate::geometry::configuration_obstacle_from_shape(shape, 0)
    }

    #[test]
    fn min_dist_corner_projection() {
        let co = co_from_shape(square(1.0, 2.0, 1.0, 2.0));
        let sol = solve_min_dist(&co, v(0.0, 0.0));
        assert_eq!(sol.feature, ActiveFeature::Vertex);
        assert_abs_diff_eq!((sol.z_star - v(1.0, 1.0)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.dist, 2.0f64.sqrt(), epsilon = 1e-12);
        assert_eq!(sol.active_rows.len(), 2);
        // stationarity and dual feasibility
        let mut st = 2.0 * sol.z_star;
        for (r, l) in sol.active_rows.iter().zip(&sol.lambda_star) {
            st += co.normals()[*r] * *l;
            assert!(*l >= -1e-9);
        }
        assert_abs_diff_eq!(st.norm(), 0.0, epsilon = 1e-7);
    }

    #[test]
    fn min_dist_edge_projection() {
        let co = co_from_shape(square(1.0, 2.0, -1.0, 1.0));
        let sol = solve_min_dist(&co, v(0.0, 0.0));
        assert_eq!(sol.feature, ActiveFeature::Edge);
        assert_abs_diff_eq!((sol.z_star - v(1.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.dist, 1.0, epsilon = 1e-12);
        assert!(sol.lambda_star[0] >= 0.0);
    }

    #[test]
    fn min_dist_interior() {
        let co = co_from_shape(square(-1.0, 1.0, -1.0, 1.0));
        let sol = solve_min_dist(&co, v(0.0, 0.0));
        assert_eq!(sol.feature, ActiveFeature::Interior);
        assert_eq!(sol.dist, 0.0);
    }

    #[test]
    fn min_dist_matches_polygon_oracle() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let robot = crate::oracles::random_convex_polygon(&mut rng, v(0.0, 0.0), 0.2, 0.5, 5);
            let cx = rng.gen_range(-4.0..4.0);
            let cy = rng.gen_range(-4.0..4.0);
            let obs = crate::oracles::random_convex_polygon(&mut rng, v(cx, cy), 0.3, 1.2, 6);
            let px = rng.gen_range(-5.0..5.0);
            let py = rng.gen_range(-5.0..5.0);
            let p = v(px, py);
            let co = configuration_obstacle(&robot, &obs, 0);
            let sol = solve_min_dist(&co, p);
            let truth = polygon_distance_oracle(&robot.translate(p), &obs);
            assert_abs_diff_eq!(sol.dist, truth, epsilon = 1e-8);
        }
    }

    #[test]
    fn barrier_corner_case() {
        let co = co_from_shape(square(1.0, 2.0, 1.0, 2.0));
        let be = barrier(&co, v(0.0, 0.0), 0.0).unwrap();
        assert_abs_diff_eq!(be.h, 2.0f64.sqrt(), epsilon = 1e-12);
        let s = 1.0 / 2.0f64.sqrt();
        assert_abs_diff_eq!((be.n - v(-s, -s)).norm(), 0.0, epsilon = 1e-12);
        let want = Matrix2::new(0.5, -0.5, -0.5, 0.5) / 2.0f64.sqrt();
        assert_abs_diff_eq!((be.hess - want).norm(), 0.0, epsilon = 1e-12);
        // H n = 0, symmetric PSD, trace = 1/dist
        assert_abs_diff_eq!((be.hess * be.n).norm(), 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(be.hess.trace(), 1.0 / 2.0f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn barrier_edge_case() {
        let co = co_from_shape(square(1.0, 2.0, -1.0, 1.0));
        let be = barrier(&co, v(0.0, 0.0), 0.0).unwrap();
        assert_abs_diff_eq!(be.h, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!((be.n - v(-1.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(be.hess.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn barrier_inside_errors() {
        let co = co_from_shape(square(-1.0, 1.0, -1.0, 1.0));
        assert_eq!(
            barrier(&co, v(0.0, 0.0), 0.0).unwrap_err(),
            CbfError::InsideObstacle
        );
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 100 {
            let Some(cfg) = crate::oracles::random_barrier_config(&mut rng, 0.05) else {
                continue;
            };
            let (co, p) = cfg;
            let be = barrier(&co, p, 0.0).unwrap();
            let grad = crate::oracles::fd_gradient(&co, p, 1e-5);
            assert_abs_diff_eq!(grad.x, be.n.x, epsilon = 1e-5);
            assert_abs_diff_eq!(grad.y, be.n.y, epsilon = 1e-5);
            checked += 1;
        }
    }

    #[test]
    fn first_order_constraint_examples() {
        let co = co_from_shape(square(1.0, 2.0, -1.0, 1.0));
        let be = barrier(&co, v(0.0, 0.0), 0.0).unwrap();
        let f = DVector::zeros(2);
        let g = DMatrix::identity(2, 2);
        let c = first_order_constraint(&be, &f, &g, 3.0);
        // n = (-1, 0), h = 1: -u_x >= -3
        assert_abs_diff_eq!(c.coeff_u[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.coeff_u[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.rhs, -3.0, epsilon = 1e-12);
        let c2 = first_order_constraint(&be, &f, &g, 6.0);
        assert_abs_diff_eq!(c2.rhs, 2.0 * c.rhs, epsilon = 1e-12);
        // boundary h = 0 forbids inward motion
        let mut be0 = be.clone();
        be0.h = 0.0;
        let c0 = first_order_constraint(&be0, &f, &g, 3.0);
        assert_abs_diff_eq!(c0.rhs, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hocbf_constraint_examples() {
        let co = co_from_shape(square(1.0, 2.0, -1.0, 1.0));
        let be = barrier(&co, v(0.0, 0.0), 0.0).unwrap();
        // v = 0: n^T u >= -k1 k2 h
        let c = hocbf_constraint(&be, v(0.0, 0.0), 2.0, 10.0);
        assert_abs_diff_eq!(c.rhs, -20.0, epsilon = 1e-12);
        // edge feature, v = (1, 0): -u_x >= -(12 - 20) = -8
        let c = hocbf_constraint(&be, v(1.0, 0.0), 2.0, 10.0);
        assert_abs_diff_eq!(c.coeff_u[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.rhs, 12.0 - 20.0, epsilon = 1e-12);
    }

    #[test]
    fn psi1_examples() {
        let co = co_from_shape(square(1.0, 2.0, -1.0, 1.0));
        let be = barrier(&co, v(0.0, 0.0), 0.0).unwrap();
        assert_abs_diff_eq!(psi1(&be, v(0.0, 0.0), 2.0), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(psi1(&be, v(0.0, 3.0), 2.0), 2.0, epsilon = 1e-12);
        let vb = -be.n * 2.0 * be.h;
        assert_abs_diff_eq!(psi1(&be, vb, 2.0), 0.0, epsilon = 1e-12);
    }
}
