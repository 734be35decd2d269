//! Randomized verification suites: each draws cases from a seeded generator,
//! checks an analytic quantity or a solver against a slow oracle from
//! [`crate::oracles`], and reports the worst error seen. The `verify`
//! subcommand and the integration tests both run these.

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cbf::{barrier, solve_min_dist, ActiveFeature};
use crate::geometry::{closest_point_on_polygon, polygon_distance_oracle, VPolytope, Vec2};
use crate::milp::{solve_milp, SolveStatus};
use crate::oracles;
use crate::qp::{solve_qp, QpStatus};
use rand::Rng;

/// Outcome of one suite: worst error over `cases` checks against `tolerance`.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.max_error.is_finite() && self.max_error < self.tolerance
    }
}

impl std::fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} cases, max error {:.3e} (tolerance {:.1e}) -> {}",
            self.name,
            self.cases,
            self.max_error,
            self.tolerance,
            if self.passed() { "ok" } else { "FAIL" }
        )
    }
}

/// Analytic clearance gradient against central finite differences, on
/// configurations with clearance above 0.05.
pub fn gradients(seed: u64, n_cases: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_error = 0.0f64;
    let mut done = 0;
    while done < n_cases {
        let Some((co, p)) = oracles::random_barrier_config(&mut rng, 0.05) else {
            continue;
        };
        let be = barrier(&co, p, 0.0).expect("clearance bounded away from zero");
        let fd = oracles::fd_gradient(&co, p, 1e-6);
        max_error = max_error.max((be.n - fd).norm());
        done += 1;
    }
    SuiteReport {
        name: "gradients",
        cases: n_cases,
        max_error,
        tolerance: 1e-5,
    }
}

/// Analytic clearance Hessian against the finite-difference Jacobian of the
/// unit normal, restricted to feature-stable stencils; also checks the
/// structural identities `H n = 0` and `H = 0` on edge contact.
pub fn hessians(seed: u64, n_cases: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_error = 0.0f64;
    let mut done = 0;
    while done < n_cases {
        let Some((co, p)) = oracles::random_barrier_config(&mut rng, 0.05) else {
            continue;
        };
        let Some(fd) = oracles::fd_normal_jacobian(&co, p, 1e-5) else {
            continue;
        };
        let be = barrier(&co, p, 0.0).expect("clearance bounded away from zero");
        max_error = max_error.max((be.hess - fd).norm());
        // null direction and edge flatness are exact properties
        max_error = max_error.max((be.hess * be.n).norm());
        if be.feature == ActiveFeature::Edge {
            max_error = max_error.max(be.hess.norm());
        }
        done += 1;
    }
    SuiteReport {
        name: "hessians",
        cases: n_cases,
        max_error,
        tolerance: 1e-4,
    }
}

/// Min-distance KKT solve against two independent geometric oracles: the
/// closest-point projection onto the configuration obstacle, and the
/// polygon-polygon distance between the translated robot and the obstacle.
pub fn geometry(seed: u64, n_cases: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_error = 0.0f64;
    let mut done = 0;
    while done < n_cases {
        let robot = oracles::random_convex_polygon(&mut rng, Vec2::new(0.0, 0.0), 0.2, 0.5, 5);
        let center = Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let obs = oracles::random_convex_polygon(&mut rng, center, 0.3, 1.5, 6);
        let p = Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let co = crate::geometry::configuration_obstacle(&robot, &obs, 0);
        let sol = solve_min_dist(&co, p);
        if sol.feature == ActiveFeature::Interior || sol.dist < 1e-6 {
            continue;
        }
        let (cp, _) = closest_point_on_polygon(co.shape0(), p);
        max_error = max_error.max((sol.dist - (cp - p).norm()).abs());

        let placed = VPolytope::new(robot.vertices().iter().map(|v| v + p).collect())
            .expect("translation preserves the hull");
        max_error = max_error.max((sol.dist - polygon_distance_oracle(&placed, &obs)).abs());
        done += 1;
    }
    SuiteReport {
        name: "geometry",
        cases: n_cases,
        max_error,
        tolerance: 1e-8,
    }
}

/// Branch-and-bound against exhaustive binary enumeration on random feasible
/// mixed-binary programs.
pub fn milp(seed: u64, n_cases: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_error = 0.0f64;
    for case in 0..n_cases {
        let n_cont = 2 + case % 3;
        let n_bin = 3 + case % 6;
        let m = 3 + case % 5;
        let p = oracles::random_milp(&mut rng, n_cont, n_bin, m);
        let sol = solve_milp(&p, 1e-9, 1_000_000);
        let oracle = oracles::milp_enumeration(&p);
        match (sol.status, oracle) {
            (SolveStatus::Optimal, Some(obj)) => {
                max_error = max_error.max((sol.objective - obj).abs());
            }
            // generator guarantees feasibility, so any disagreement is a bug
            _ => max_error = f64::INFINITY,
        }
    }
    SuiteReport {
        name: "milp",
        cases: n_cases,
        max_error,
        tolerance: 1e-6,
    }
}

/// Dual active-set QP against KKT enumeration, including deliberately
/// infeasible instances where both must agree on infeasibility.
pub fn qp(seed: u64, n_cases: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_error = 0.0f64;
    for case in 0..n_cases {
        let n = 2 + case % 2;
        let m = 2 + case % 6;
        let problem = oracles::random_qp(&mut rng, n, m);
        let sol = solve_qp(&problem);
        match (sol.status, oracles::qp_enumeration(&problem)) {
            (QpStatus::Optimal, Some((u, _))) => {
                max_error = max_error.max((&sol.u - &u).norm());
            }
            (QpStatus::Infeasible, None) => {}
            _ => max_error = f64::INFINITY,
        }
    }
    SuiteReport {
        name: "qp",
        cases: n_cases,
        max_error,
        tolerance: 1e-7,
    }
}

/// Second-order barrier expansion identity along the double-integrator flow.
pub fn hocbf(seed: u64, n_cases: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_error = 0.0f64;
    let mut done = 0;
    while done < n_cases {
        let Some((co, p)) = oracles::random_barrier_config(&mut rng, 0.05) else {
            continue;
        };
        let v = Vector2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let u = Vector2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let Some(res) = oracles::hocbf_expansion_residual(&co, p, v, u, 2.0, 10.0, 1e-6) else {
            continue;
        };
        max_error = max_error.max(res);
        done += 1;
    }
    SuiteReport {
        name: "hocbf",
        cases: n_cases,
        max_error,
        tolerance: 1e-4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass_on_a_smoke_sample() {
        for report in [
            gradients(7, 50),
            hessians(7, 50),
            geometry(7, 50),
            milp(7, 5),
            qp(7, 50),
            hocbf(7, 20),
        ] {
            assert!(report.passed(), "{report}");
        }
    }

    #[test]
    fn suites_are_seed_deterministic() {
        let a = gradients(11, 20);
        let b = gradients(11, 20);
        assert_eq!(a.max_error, b.max_error);
    }
}
