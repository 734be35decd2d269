//! Slow reference implementations used to cross-check the solvers.
//!
//! Everything here trades speed for obviousness: vertex enumeration for LPs,
//! exhaustive binary enumeration for mixed-binary programs, KKT enumeration
//! over active sets for QPs, and finite differences for barrier derivatives.
//! Test-only in spirit, but kept in the library so integration tests and the
//! `verify` command can reach them.

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::Rng;

use crate::cbf::{solve_min_dist, ActiveFeature};
use crate::geometry::{configuration_obstacle, ConfigObstacle, VPolytope, Vec2};
use crate::milp::{LinearProgram, MilpProblem};
use crate::qp::DenseQp;

/// Convex polygon with `n` vertices at sorted random angles around `center`,
/// radii in `[rmin, rmax]`. Resamples until the hull keeps all n vertices.
pub fn random_convex_polygon<R: Rng>(
    rng: &mut R,
    center: Vec2,
    rmin: f64,
    rmax: f64,
    n: usize,
) -> VPolytope {
    loop {
        let mut angles: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect();
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // nearly coincident angles make needle-thin edges; reject
        let mut ok = true;
        for i in 0..n {
            let next = angles[(i + 1) % n] + if i + 1 == n { std::f64::consts::TAU } else { 0.0 };
            if next - angles[i] < 0.05 {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        let verts: Vec<Vec2> = angles
            .iter()
            .map(|&a| {
                let r = rng.gen_range(rmin..rmax);
                center + Vec2::new(r * a.cos(), r * a.sin())
            })
            .collect();
        if let Ok(poly) = VPolytope::new(verts) {
            if poly.vertices().len() == n {
                return poly;
            }
        }
    }
}

/// Random robot/obstacle pair plus a robot position with clearance at least
/// `hmin`; `None` when the sampled position is too close or inside.
pub fn random_barrier_config<R: Rng>(
    rng: &mut R,
    hmin: f64,
) -> Option<(ConfigObstacle, Vec2)> {
    let robot = random_convex_polygon(rng, Vec2::new(0.0, 0.0), 0.2, 0.5, 5);
    let center = Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
    let obs = random_convex_polygon(rng, center, 0.3, 1.5, 6);
    let p = Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
    let co = configuration_obstacle(&robot, &obs, 0);
    let sol = solve_min_dist(&co, p);
    if sol.feature == ActiveFeature::Interior || sol.dist < hmin {
        return None;
    }
    Some((co, p))
}

/// Central finite-difference gradient of the clearance `p -> dist(p)`.
pub fn fd_gradient(co: &ConfigObstacle, p: Vec2, step: f64) -> Vec2 {
    let d = |q: Vec2| solve_min_dist(co, q).dist;
    Vec2::new(
        (d(p + Vec2::new(step, 0.0)) - d(p - Vec2::new(step, 0.0))) / (2.0 * step),
        (d(p + Vec2::new(0.0, step)) - d(p - Vec2::new(0.0, step))) / (2.0 * step),
    )
}

/// Central finite-difference Jacobian of the unit normal `p -> n(p)`, which
/// equals the clearance Hessian. `None` when the closest feature changes
/// across the stencil, where the derivative does not exist classically.
pub fn fd_normal_jacobian(co: &ConfigObstacle, p: Vec2, step: f64) -> Option<Matrix2<f64>> {
    let base = solve_min_dist(co, p);
    if base.feature == ActiveFeature::Interior || base.dist < 2.0 * step {
        return None;
    }
    let normal_at = |q: Vec2| {
        let s = solve_min_dist(co, q);
        (s.feature == base.feature && s.dist > 1e-9).then(|| -s.z_star / s.dist)
    };
    let nxp = normal_at(p + Vec2::new(step, 0.0))?;
    let nxm = normal_at(p - Vec2::new(step, 0.0))?;
    let nyp = normal_at(p + Vec2::new(0.0, step))?;
    let nym = normal_at(p - Vec2::new(0.0, step))?;
    let dx = (nxp - nxm) / (2.0 * step);
    let dy = (nyp - nym) / (2.0 * step);
    Some(Matrix2::new(dx.x, dy.x, dx.y, dy.y))
}

/// Finite-difference check of the second-order barrier expansion: compares
/// the analytic `v' H v + n' u + (k1 + k2) n' v + k1 k2 h` against
/// `d(psi1)/dt + k2 psi1` with the time derivative taken numerically along
/// the double-integrator flow. `None` when the stencil crosses a feature
/// boundary.
pub fn hocbf_expansion_residual(
    co: &ConfigObstacle,
    p: Vec2,
    v: Vec2,
    u: Vec2,
    k1: f64,
    k2: f64,
    step: f64,
) -> Option<f64> {
    let base = solve_min_dist(co, p);
    if base.feature == ActiveFeature::Interior || base.dist < 1e-3 {
        return None;
    }
    let psi1_at = |q: Vec2, w: Vec2| {
        let s = solve_min_dist(co, q);
        (s.feature == base.feature && s.dist > 1e-9).then(|| {
            let n = -s.z_star / s.dist;
            n.dot(&w) + k1 * s.dist
        })
    };
    let fwd = psi1_at(p + v * step, v + u * step)?;
    let bwd = psi1_at(p - v * step, v - u * step)?;
    let psi1_dot_fd = (fwd - bwd) / (2.0 * step);
    let psi1_0 = psi1_at(p, v)?;

    let n = -base.z_star / base.dist;
    let hess = match base.feature {
        ActiveFeature::Vertex => {
            (Matrix2::identity() - n * n.transpose()) / base.dist
        }
        _ => Matrix2::zeros(),
    };
    let analytic =
        (hess * v).dot(&v) + n.dot(&u) + (k1 + k2) * n.dot(&v) + k1 * k2 * base.dist;
    Some((psi1_dot_fd + k2 * psi1_0 - analytic).abs())
}

/// Feasible box-bounded LP with `n` variables and `m` inequality rows, all
/// rows satisfied with slack at a random interior point.
pub fn random_feasible_lp<R: Rng>(rng: &mut R, n: usize, m: usize) -> LinearProgram {
    let mut lp = LinearProgram::new(n);
    for j in 0..n {
        lp.c[j] = rng.gen_range(-2.0..2.0);
        lp.lower[j] = rng.gen_range(-3.0..-1.0);
        lp.upper[j] = rng.gen_range(1.0..3.0);
    }
    let x0 = DVector::from_fn(n, |j, _| rng.gen_range(lp.lower[j]..lp.upper[j]));
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    for i in 0..m {
        for j in 0..n {
            a[(i, j)] = rng.gen_range(-1.0..1.0);
        }
        let row: DVector<f64> = a.row(i).transpose();
        b[i] = row.dot(&x0) + rng.gen_range(0.1..2.0);
    }
    lp.a_ub = a;
    lp.b_ub = b;
    lp
}

fn combinations(pool: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, pool: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..pool {
            cur.push(i);
            rec(i + 1, pool, k, cur, out);
            cur.pop();
        }
    }
    rec(0, pool, k, &mut cur, &mut out);
    out
}

/// Brute-force LP optimum by enumerating basic points: every intersection of
/// `n` constraints drawn from the inequality rows, equality rows (always
/// active) and finite variable bounds. Returns the best feasible objective,
/// or `None` when no feasible basic point exists.
pub fn lp_vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.n_vars();
    let m_eq = lp.b_eq.len();
    if m_eq > n {
        return None;
    }

    // candidate active rows beyond the equalities
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for i in 0..lp.b_ub.len() {
        rows.push((lp.a_ub.row(i).transpose(), lp.b_ub[i]));
    }
    for j in 0..n {
        if lp.lower[j].is_finite() {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            rows.push((e, lp.lower[j]));
        }
        if lp.upper[j].is_finite() {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            rows.push((e, lp.upper[j]));
        }
    }

    let feasible = |x: &DVector<f64>| -> bool {
        for i in 0..lp.b_ub.len() {
            if lp.a_ub.row(i).transpose().dot(x) > lp.b_ub[i] + 1e-7 {
                return false;
            }
        }
        for i in 0..m_eq {
            if (lp.a_eq.row(i).transpose().dot(x) - lp.b_eq[i]).abs() > 1e-7 {
                return false;
            }
        }
        for j in 0..n {
            if x[j] < lp.lower[j] - 1e-7 || x[j] > lp.upper[j] + 1e-7 {
                return false;
            }
        }
        true
    };

    let mut best: Option<f64> = None;
    for combo in combinations(rows.len(), n - m_eq) {
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for i in 0..m_eq {
            a.set_row(i, &lp.a_eq.row(i));
            b[i] = lp.b_eq[i];
        }
        for (k, &ri) in combo.iter().enumerate() {
            a.set_row(m_eq + k, &rows[ri].0.transpose());
            b[m_eq + k] = rows[ri].1;
        }
        if let Some(x) = a.lu().solve(&b) {
            if x.iter().all(|v| v.is_finite()) && feasible(&x) {
                let obj = lp.c.dot(&x);
                if best.map_or(true, |cur| obj < cur) {
                    best = Some(obj);
                }
            }
        }
    }
    best
}

/// Feasible mixed-binary program: `n_cont` box-bounded continuous variables,
/// `n_bin` binaries, `m` rows satisfied with slack at a random mixed point.
pub fn random_milp<R: Rng>(rng: &mut R, n_cont: usize, n_bin: usize, m: usize) -> MilpProblem {
    let n = n_cont + n_bin;
    let mut lp = LinearProgram::new(n);
    for j in 0..n_cont {
        lp.c[j] = rng.gen_range(-2.0..2.0);
        lp.lower[j] = rng.gen_range(-3.0..-1.0);
        lp.upper[j] = rng.gen_range(1.0..3.0);
    }
    let mut binary_indices = Vec::with_capacity(n_bin);
    for j in n_cont..n {
        lp.c[j] = rng.gen_range(-2.0..2.0);
        lp.lower[j] = 0.0;
        lp.upper[j] = 1.0;
        binary_indices.push(j);
    }
    let x0 = DVector::from_fn(n, |j, _| {
        if j < n_cont {
            rng.gen_range(lp.lower[j]..lp.upper[j])
        } else if rng.gen_bool(0.5) {
            1.0
        } else {
            0.0
        }
    });
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    for i in 0..m {
        for j in 0..n {
            a[(i, j)] = rng.gen_range(-1.0..1.0);
        }
        let row: DVector<f64> = a.row(i).transpose();
        b[i] = row.dot(&x0) + rng.gen_range(0.05..1.5);
    }
    lp.a_ub = a;
    lp.b_ub = b;
    MilpProblem {
        lp,
        binary_indices,
    }
}

/// Brute-force mixed-binary optimum: for each of the `2^k` binary patterns,
/// substitutes the fixed binaries out and runs vertex enumeration on the
/// reduced continuous LP.
pub fn milp_enumeration(p: &MilpProblem) -> Option<f64> {
    let k = p.binary_indices.len();
    assert!(k <= 20, "enumeration oracle limited to small instances");
    let n = p.lp.n_vars();
    let cont: Vec<usize> = (0..n).filter(|j| !p.binary_indices.contains(j)).collect();
    let nc = cont.len();

    let mut best: Option<f64> = None;
    for mask in 0u32..(1u32 << k) {
        let bin_val = |bit: usize| -> f64 {
            if mask & (1 << bit) != 0 {
                1.0
            } else {
                0.0
            }
        };
        let mut lp = LinearProgram::new(nc);
        let mut constant = 0.0;
        for (bit, &j) in p.binary_indices.iter().enumerate() {
            constant += p.lp.c[j] * bin_val(bit);
        }
        for (cj, &j) in cont.iter().enumerate() {
            lp.c[cj] = p.lp.c[j];
            lp.lower[cj] = p.lp.lower[j];
            lp.upper[cj] = p.lp.upper[j];
        }
        let m = p.lp.b_ub.len();
        lp.a_ub = DMatrix::zeros(m, nc);
        lp.b_ub = DVector::zeros(m);
        for i in 0..m {
            let mut rhs = p.lp.b_ub[i];
            for (bit, &j) in p.binary_indices.iter().enumerate() {
                rhs -= p.lp.a_ub[(i, j)] * bin_val(bit);
            }
            for (cj, &j) in cont.iter().enumerate() {
                lp.a_ub[(i, cj)] = p.lp.a_ub[(i, j)];
            }
            lp.b_ub[i] = rhs;
        }
        if let Some(obj) = lp_vertex_enumeration(&lp) {
            let total = obj + constant;
            if best.map_or(true, |cur| total < cur) {
                best = Some(total);
            }
        }
    }
    best
}

/// Random strictly convex QP with diagonal Hessian. Feasible with slack at a
/// random point, or (one time in four) made plainly infeasible by a pair of
/// contradictory half-planes.
pub fn random_qp<R: Rng>(rng: &mut R, n: usize, m_rows: usize) -> DenseQp {
    let hessian_diag = DVector::from_fn(n, |_, _| rng.gen_range(0.5..3.0));
    let linear = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
    let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for _ in 0..m_rows {
        let g = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        if g.norm() < 0.1 {
            continue;
        }
        let d = g.dot(&x0) - rng.gen_range(0.05..2.0);
        rows.push((g, d));
    }
    if rng.gen_bool(0.25) {
        let g = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        if g.norm() > 0.1 {
            let d = g.dot(&x0);
            rows.push((g.clone(), d + 0.5)); // g'u >= d + 0.5
            rows.push((-g, -d + 0.5)); // g'u <= d - 0.5
        }
    }
    DenseQp {
        hessian_diag,
        linear,
        rows,
    }
}

/// Brute-force QP optimum by KKT enumeration over active subsets of size at
/// most `n`. Returns the minimizer and objective, or `None` when no subset
/// yields a primal-dual feasible point (infeasible problem).
pub fn qp_enumeration(qp: &DenseQp) -> Option<(DVector<f64>, f64)> {
    let n = qp.hessian_diag.len();
    let m = qp.rows.len();
    let objective = |u: &DVector<f64>| -> f64 {
        0.5 * u
            .iter()
            .enumerate()
            .map(|(i, &v)| qp.hessian_diag[i] * v * v)
            .sum::<f64>()
            + qp.linear.dot(u)
    };
    let feasible = |u: &DVector<f64>| qp.rows.iter().all(|(g, d)| g.dot(u) >= d - 1e-9);

    let mut best: Option<(DVector<f64>, f64)> = None;
    for k in 0..=n.min(m) {
        for combo in combinations(m, k) {
            // KKT system: P u - G' mu = -q, G u = d on the active set
            let dim = n + k;
            let mut a = DMatrix::zeros(dim, dim);
            let mut b = DVector::zeros(dim);
            for i in 0..n {
                a[(i, i)] = qp.hessian_diag[i];
                b[i] = -qp.linear[i];
            }
            for (col, &ri) in combo.iter().enumerate() {
                let (g, d) = &qp.rows[ri];
                for i in 0..n {
                    a[(i, n + col)] = -g[i];
                    a[(n + col, i)] = g[i];
                }
                b[n + col] = *d;
            }
            let Some(sol) = a.lu().solve(&b) else {
                continue;
            };
            let u = DVector::from_fn(n, |i, _| sol[i]);
            if !u.iter().all(|v| v.is_finite()) {
                continue;
            }
            if (0..k).any(|j| sol[n + j] < -1e-9) {
                continue;
            }
            if !feasible(&u) {
                continue;
            }
            let obj = objective(&u);
            if best.as_ref().map_or(true, |(_, cur)| obj < *cur) {
                best = Some((u, obj));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve_lp, SolveStatus};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    #[test]
    fn vertex_enumeration_on_known_lp() {
        // min -x - y over the unit square cut by x + y <= 1.5
        let mut lp = LinearProgram::new(2);
        lp.c = DVector::from_column_slice(&[-1.0, -1.0]);
        lp.a_ub = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        lp.b_ub = DVector::from_column_slice(&[1.5]);
        lp.lower = DVector::zeros(2);
        lp.upper = DVector::from_element(2, 1.0);
        assert_abs_diff_eq!(lp_vertex_enumeration(&lp).unwrap(), -1.5, epsilon = 1e-9);
    }

    #[test]
    fn random_lps_are_feasible() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let lp = random_feasible_lp(&mut rng, 3, 5);
            assert_eq!(solve_lp(&lp).status, SolveStatus::Optimal);
        }
    }

    #[test]
    fn qp_enumeration_on_known_projection() {
        // project (2, 2) onto x <= 1, y <= 0.5
        let qp = DenseQp {
            hessian_diag: DVector::from_element(2, 2.0),
            linear: DVector::from_column_slice(&[-4.0, -4.0]),
            rows: vec![
                (DVector::from_column_slice(&[-1.0, 0.0]), -1.0),
                (DVector::from_column_slice(&[0.0, -1.0]), -0.5),
            ],
        };
        let (u, _) = qp_enumeration(&qp).unwrap();
        assert_abs_diff_eq!(u[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(u[1], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn fd_gradient_has_unit_norm_outside() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(43);
        let mut checked = 0;
        while checked < 20 {
            let Some((co, p)) = random_barrier_config(&mut rng, 0.1) else {
                continue;
            };
            let g = fd_gradient(&co, p, 1e-5);
            assert_abs_diff_eq!(g.norm(), 1.0, epsilon = 1e-4);
            checked += 1;
        }
    }
}
