//! Min-norm safety filter and the reactive CLF-CBF-QP baseline.

use nalgebra::DVector;

use crate::cbf::CbfConstraint;
use crate::planner::DynamicsKind;
use crate::qp::{solve_qp, DenseQp, QpStatus};

#[derive(Debug, Clone)]
pub struct FilterConfig {
    /// First-order CBF gain.
    pub k: f64,
    /// HOCBF gains.
    pub k1: f64,
    pub k2: f64,
    pub u_min: DVector<f64>,
    pub u_max: DVector<f64>,
    pub clf_gain: f64,
    pub clf_relax_weight: f64,
}

impl FilterConfig {
    pub fn with_bounds(u_min: DVector<f64>, u_max: DVector<f64>) -> Self {
        Self {
            k: 3.0,
            k1: 2.0,
            k2: 10.0,
            u_min,
            u_max,
            clf_gain: 1.0,
            clf_relax_weight: 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterStatus {
    Ok,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct FilterResult {
    pub u_star: DVector<f64>,
    /// Indices into the supplied CBF rows that are active at the optimum.
    pub active_constraints: Vec<usize>,
    pub intervened: bool,
    pub status: FilterStatus,
}

fn bound_rows(m: usize, offset: usize, cfg: &FilterConfig) -> Vec<(DVector<f64>, f64)> {
    let dim = m + offset;
    let mut rows = Vec::with_capacity(2 * m);
    for i in 0..m {
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        rows.push((e, cfg.u_min[i]));
        let mut e = DVector::zeros(dim);
        e[i] = -1.0;
        rows.push((e, -cfg.u_max[i]));
    }
    rows
}

/// Projects the nominal command onto the set allowed by the CBF rows and the
/// input bounds: `arg min ||u - u_ref||^2`.
pub fn filter(u_ref: &DVector<f64>, rows: &[CbfConstraint], cfg: &FilterConfig) -> FilterResult {
    let m = u_ref.len();
    let mut qp_rows: Vec<(DVector<f64>, f64)> = rows
        .iter()
        .map(|r| (r.coeff_u.clone(), r.rhs))
        .collect();
    qp_rows.extend(bound_rows(m, 0, cfg));
    let qp = DenseQp {
        hessian_diag: DVector::from_element(m, 2.0),
        linear: u_ref * -2.0,
        rows: qp_rows,
    };
    let sol = solve_qp(&qp);
    if sol.status != QpStatus::Optimal {
        return FilterResult {
            u_star: DVector::zeros(m),
            active_constraints: Vec::new(),
            intervened: true,
            status: FilterStatus::Infeasible,
        };
    }
    let mut u = sol.u;
    for i in 0..m {
        u[i] = u[i].clamp(cfg.u_min[i], cfg.u_max[i]);
    }
    let intervened = (0..m).any(|i| (u[i] - u_ref[i]).abs() > 1e-9);
    FilterResult {
        u_star: u,
        active_constraints: sol
            .active
            .iter()
            .copied()
            .filter(|&i| i < rows.len())
            .collect(),
        intervened,
        status: FilterStatus::Ok,
    }
}

/// Reactive baseline: minimizes input effort while decreasing the Lyapunov
/// function `V(x) = ||x - x_g||^2` (slack-relaxed) under the same CBF rows
/// and input bounds. The decision vector is `(u, delta)`.
pub fn clf_cbf_baseline(
    x: &DVector<f64>,
    x_g: &DVector<f64>,
    rows: &[CbfConstraint],
    cfg: &FilterConfig,
    dyn_kind: DynamicsKind,
) -> FilterResult {
    let m = cfg.u_min.len();
    let dim = m + 1;
    let v_val = (x - x_g).norm_squared();

    // Vdot <= -gain V + delta rewritten as a ">=" row over (u, delta).
    let mut clf_row = DVector::zeros(dim);
    let clf_rhs;
    match dyn_kind {
        DynamicsKind::SingleIntegrator => {
            // Vdot = 2 (x - x_g)^T u
            for i in 0..m {
                clf_row[i] = -2.0 * (x[i] - x_g[i]);
            }
            clf_row[m] = 1.0;
            clf_rhs = cfg.clf_gain * v_val;
        }
        DynamicsKind::DoubleIntegrator => {
            // x = (p, v); Vdot = 2 (p - p_g)^T v + 2 (v - v_g)^T u
            let drift = 2.0 * ((x[0] - x_g[0]) * x[2] + (x[1] - x_g[1]) * x[3]);
            clf_row[0] = -2.0 * (x[2] - x_g[2]);
            clf_row[1] = -2.0 * (x[3] - x_g[3]);
            clf_row[m] = 1.0;
            clf_rhs = cfg.clf_gain * v_val + drift;
        }
    }

    let mut qp_rows: Vec<(DVector<f64>, f64)> = Vec::with_capacity(rows.len() + 2 * m + 2);
    qp_rows.push((clf_row, clf_rhs));
    for r in rows {
        let mut g = DVector::zeros(dim);
        for i in 0..m {
            g[i] = r.coeff_u[i];
        }
        qp_rows.push((g, r.rhs));
    }
    qp_rows.extend(bound_rows(m, 1, cfg));
    // delta >= 0
    let mut e = DVector::zeros(dim);
    e[m] = 1.0;
    qp_rows.push((e, 0.0));

    let mut hess = DVector::from_element(dim, 2.0);
    hess[m] = 2.0 * cfg.clf_relax_weight;
    let qp = DenseQp {
        hessian_diag: hess,
        linear: DVector::zeros(dim),
        rows: qp_rows,
    };
    let sol = solve_qp(&qp);
    if sol.status != QpStatus::Optimal {
        return FilterResult {
            u_star: DVector::zeros(m),
            active_constraints: Vec::new(),
            intervened: false,
            status: FilterStatus::Infeasible,
        };
    }
    let mut u = DVector::zeros(m);
    for i in 0..m {
        u[i] = sol.u[i].clamp(cfg.u_min[i], cfg.u_max[i]);
    }
    FilterResult {
        u_star: u,
        active_constraints: sol
            .active
            .iter()
            .filter_map(|&i| {
                // row 0 is the CLF; rows 1..=rows.len() are CBF rows
                (i >= 1 && i <= rows.len()).then(|| i - 1)
            })
            .collect(),
        intervened: false,
        status: FilterStatus::Ok,
    }
}
