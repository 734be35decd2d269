//! Finite-horizon MILP-MPC planner over a point-mass abstraction.
//!
//! At each planning step the planner assembles a mixed-binary LP whose
//! continuous part stacks the predicted states, inputs and L1-epigraph
//! slacks, and whose binaries pick which half-space keeps each predicted
//! position outside each obstacle (big-M disjunction). Only the first
//! optimal input is handed to the safety filter.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::geometry::{HPolytope, Vec2};
use crate::milp::{LinearProgram, MilpProblem, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsKind {
    SingleIntegrator,
    DoubleIntegrator,
}

/// Exact zero-order-hold discretization of the point-mass dynamics.
#[derive(Debug, Clone)]
pub struct DiscreteDynamics {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub n_states: usize,
    pub n_inputs: usize,
    pub position_rows: Vec<usize>,
}

pub fn discretize(kind: DynamicsKind, dt: f64) -> DiscreteDynamics {
    assert!(dt > 0.0);
    match kind {
        DynamicsKind::SingleIntegrator => DiscreteDynamics {
            a: DMatrix::identity(2, 2),
            b: DMatrix::identity(2, 2) * dt,
            n_states: 2,
            n_inputs: 2,
            position_rows: vec![0, 1],
        },
        DynamicsKind::DoubleIntegrator => {
            let mut a = DMatrix::identity(4, 4);
            a[(0, 2)] = dt;
            a[(1, 3)] = dt;
            let mut b = DMatrix::zeros(4, 2);
            b[(0, 0)] = dt * dt / 2.0;
            b[(1, 1)] = dt * dt / 2.0;
            b[(2, 0)] = dt;
            b[(3, 1)] = dt;
            DiscreteDynamics {
                a,
                b,
                n_states: 4,
                n_inputs: 2,
                position_rows: vec![0, 1],
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlannerConfig {
    pub np: usize,
    pub dt_p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub big_m: f64,
    pub eps_obs: f64,
    pub x_min: DVector<f64>,
    pub x_max: DVector<f64>,
    pub u_min: DVector<f64>,
    pub u_max: DVector<f64>,
    pub gap_tol: f64,
    /// Stop branch and bound after this many consecutive nodes without an
    /// incumbent improvement; the incumbent in hand is returned.
    pub patience: usize,
    /// Depth-first improvement search instead of gap-certified best-first;
    /// used when escaping a blocked homotopy class matters more than an
    /// optimality certificate.
    pub explore: bool,
    pub node_limit: usize,
    /// Drop obstacle binaries at prediction steps the robot cannot reach.
    /// Preserves the optimum; disable only for instrumentation.
    pub prune_reachability: bool,
}

#[derive(Debug, Clone)]
pub struct NominalPlan {
    /// m x Np input sequence; column 0 is the nominal guidance command.
    pub u_star: DMatrix<f64>,
    /// n x (Np+1) predicted states.
    pub x_star: DMatrix<f64>,
    /// Binary assignment per kept (step, obstacle, row).
    pub binaries: Vec<((usize, usize, usize), f64)>,
    pub objective: f64,
    pub nodes_explored: usize,
    pub node_limit_hit: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no feasible plan over the horizon")]
    Infeasible,
    #[error("dimension mismatch between state, dynamics and bounds")]
    DimensionMismatch,
}

/// One kept big-M block: binaries for obstacle `obs` at prediction step
/// `step`, starting at column `t_offset` in the decision vector.
#[derive(Debug, Clone)]
pub struct ObstacleBlock {
    pub step: usize,
    pub obs: usize,
    pub rows: usize,
    pub t_offset: usize,
}

#[derive(Debug, Clone)]
pub struct FhocpLayout {
    pub n: usize,
    pub m: usize,
    pub np: usize,
    pub off_u: usize,
    pub off_su: usize,
    pub off_sx: usize,
    pub off_t: usize,
    pub n_vars: usize,
    pub blocks: Vec<ObstacleBlock>,
}

impl FhocpLayout {
    pub fn idx_x(&self, i: usize, s: usize) -> usize {
        i * self.n + s
    }
    pub fn idx_u(&self, i: usize, s: usize) -> usize {
        self.off_u + i * self.m + s
    }
    pub fn idx_su(&self, i: usize, s: usize) -> usize {
        self.off_su + i * self.m + s
    }
    pub fn idx_sx(&self, i: usize, s: usize) -> usize {
        self.off_sx + i * self.n + s
    }
}

/// Per-axis reachable-position half-width after `i` planner steps, used to
/// discard obstacle disjunctions that cannot bind.
fn reach_half_width(i: usize, dyn_: &DiscreteDynamics, cfg: &PlannerConfig, x_k: &DVector<f64>) -> Vec2 {
    let dt = cfg.dt_p;
    let steps = i as f64;
    let umax = |axis: usize| cfg.u_max[axis].abs().max(cfg.u_min[axis].abs());
    if dyn_.n_states == 2 {
        Vec2::new(steps * dt * umax(0), steps * dt * umax(1))
    } else {
        // per-axis |v_k| <= |v_0| + k dt u_max, summed over the step; also
        // capped by the velocity state bound
        let width = |axis: usize| {
            let vbound = cfg.x_max[2 + axis].abs().max(cfg.x_min[2 + axis].abs());
            let accel = steps * dt * x_k[2 + axis].abs()
                + umax(axis) * dt * dt * steps * (steps + 1.0) / 2.0;
            accel.min(steps * dt * vbound)
        };
        Vec2::new(width(0), width(1))
    }
}

/// True if some half-space of the obstacle is satisfied with margin over the
/// whole reachable box, i.e. the disjunction cannot bind at this step.
fn block_prunable(obstacle: &HPolytope, center: Vec2, half: Vec2, eps: f64) -> bool {
    obstacle
        .normals()
        .iter()
        .zip(obstacle.offsets())
        .any(|(a, b)| {
            let min_over_box = a.dot(&center) - a.x.abs() * half.x - a.y.abs() * half.y;
            min_over_box >= b + eps + 1e-9
        })
}

/// True if the current position satisfies no half-space with the planner
/// margin; the i = 0 rows are dropped then to avoid spurious infeasibility.
fn inside_margin(obstacle: &HPolytope, p: Vec2, eps: f64) -> bool {
    !obstacle
        .normals()
        .iter()
        .zip(obstacle.offsets())
        .any(|(a, b)| a.dot(&p) >= b + eps)
}

pub fn build_fhocp(
    x_k: &DVector<f64>,
    x_g: &DVector<f64>,
    obstacles: &[HPolytope],
    dyn_: &DiscreteDynamics,
    cfg: &PlannerConfig,
) -> Result<(MilpProblem, FhocpLayout), PlanError> {
    let n = dyn_.n_states;
    let m = dyn_.n_inputs;
    let np = cfg.np;
    if x_k.len() != n
        || x_g.len() != n
        || cfg.x_min.len() != n
        || cfg.x_max.len() != n
        || cfg.u_min.len() != m
        || cfg.u_max.len() != m
    {
        return Err(PlanError::DimensionMismatch);
    }

    let p_k = Vec2::new(x_k[dyn_.position_rows[0]], x_k[dyn_.position_rows[1]]);

    // select kept big-M blocks
    let mut blocks: Vec<ObstacleBlock> = Vec::new();
    let mut t_cursor = 0usize;
    for i in 0..=np {
        for (j, obs) in obstacles.iter().enumerate() {
            if i == 0 && inside_margin(obs, p_k, cfg.eps_obs) {
                continue;
            }
            if cfg.prune_reachability {
                let half = reach_half_width(i, dyn_, cfg, x_k);
                if block_prunable(obs, p_k, half, cfg.eps_obs) {
                    continue;
                }
            }
            blocks.push(ObstacleBlock {
                step: i,
                obs: j,
                rows: obs.len(),
                t_offset: t_cursor,
            });
            t_cursor += obs.len();
        }
    }

    let off_u = (np + 1) * n;
    let off_su = off_u + np * m;
    let off_sx = off_su + np * m;
    let off_t = off_sx + (np + 1) * n;
    let n_vars = off_t + t_cursor;
    let layout = FhocpLayout {
        n,
        m,
        np,
        off_u,
        off_su,
        off_sx,
        off_t,
        n_vars,
        blocks,
    };

    let mut lp = LinearProgram::new(n_vars);

    // objective: sum_i (1' s_u,i + beta 1' s_x,i) + alpha 1' s_x,Np
    for i in 0..np {
        for s in 0..m {
            lp.c[layout.idx_su(i, s)] = 1.0;
        }
        for s in 0..n {
            lp.c[layout.idx_sx(i, s)] = cfg.beta;
        }
    }
    for s in 0..n {
        lp.c[layout.idx_sx(np, s)] = cfg.alpha;
    }

    // bounds
    for i in 0..=np {
        for s in 0..n {
            let j = layout.idx_x(i, s);
            if i == 0 {
                // pinned by the initial-state equality; leaving the box
                // bounds off avoids spurious infeasibility when the filter
                // has pushed the true state marginally outside them
                lp.lower[j] = f64::NEG_INFINITY;
                lp.upper[j] = f64::INFINITY;
            } else {
                lp.lower[j] = cfg.x_min[s];
                lp.upper[j] = cfg.x_max[s];
            }
        }
    }
    for i in 0..np {
        for s in 0..m {
            let j = layout.idx_u(i, s);
            lp.lower[j] = cfg.u_min[s];
            lp.upper[j] = cfg.u_max[s];
            let j = layout.idx_su(i, s);
            lp.lower[j] = 0.0;
        }
    }
    for i in 0..=np {
        for s in 0..n {
            let j = layout.idx_sx(i, s);
            lp.lower[j] = 0.0;
        }
    }
    let mut binary_indices = Vec::with_capacity(t_cursor);
    for t in 0..t_cursor {
        let j = off_t + t;
        lp.lower[j] = 0.0;
        lp.upper[j] = 1.0;
        binary_indices.push(j);
    }

    // equalities: initial state and dynamics
    let m_eq = n + np * n;
    let mut a_eq = DMatrix::zeros(m_eq, n_vars);
    let mut b_eq = DVector::zeros(m_eq);
    for s in 0..n {
        a_eq[(s, layout.idx_x(0, s))] = 1.0;
        b_eq[s] = x_k[s];
    }
    for i in 0..np {
        for r in 0..n {
            let row = n + i * n + r;
            a_eq[(row, layout.idx_x(i + 1, r))] = 1.0;
            for s in 0..n {
                a_eq[(row, layout.idx_x(i, s))] -= dyn_.a[(r, s)];
            }
            for s in 0..m {
                a_eq[(row, layout.idx_u(i, s))] -= dyn_.b[(r, s)];
            }
        }
    }

    // inequalities: epigraph slacks, big-M disjunctions, cardinality rows
    let m_slack = 2 * np * m + 2 * (np + 1) * n;
    let m_bigm: usize = layout.blocks.iter().map(|b| b.rows).sum();
    let m_card = layout.blocks.len();
    let m_ub = m_slack + m_bigm + m_card;
    let mut a_ub = DMatrix::zeros(m_ub, n_vars);
    let mut b_ub = DVector::zeros(m_ub);
    let mut row = 0usize;
    for i in 0..np {
        for s in 0..m {
            a_ub[(row, layout.idx_u(i, s))] = 1.0;
            a_ub[(row, layout.idx_su(i, s))] = -1.0;
            row += 1;
            a_ub[(row, layout.idx_u(i, s))] = -1.0;
            a_ub[(row, layout.idx_su(i, s))] = -1.0;
            row += 1;
        }
    }
    for i in 0..=np {
        for s in 0..n {
            a_ub[(row, layout.idx_x(i, s))] = 1.0;
            a_ub[(row, layout.idx_sx(i, s))] = -1.0;
            b_ub[row] = x_g[s];
            row += 1;
            a_ub[(row, layout.idx_x(i, s))] = -1.0;
            a_ub[(row, layout.idx_sx(i, s))] = -1.0;
            b_ub[row] = -x_g[s];
            row += 1;
        }
    }
    for block in &layout.blocks {
        let obs = &obstacles[block.obs];
        let (px, py) = (
            layout.idx_x(block.step, dyn_.position_rows[0]),
            layout.idx_x(block.step, dyn_.position_rows[1]),
        );
        for r in 0..block.rows {
            let a = obs.normals()[r];
            a_ub[(row, px)] = -a.x;
            a_ub[(row, py)] = -a.y;
            // tighten the big-M per row: M_r only needs to make the row
            // vacuous over the (slightly inflated) position box, which keeps
            // the integer-feasible set identical but sharpens the LP
            // relaxation considerably
            let (ix, iy) = (dyn_.position_rows[0], dyn_.position_rows[1]);
            let min_proj = a.x
                * if a.x > 0.0 {
                    cfg.x_min[ix] - 1.0
                } else {
                    cfg.x_max[ix] + 1.0
                }
                + a.y
                    * if a.y > 0.0 {
                        cfg.x_min[iy] - 1.0
                    } else {
                        cfg.x_max[iy] + 1.0
                    };
            let m_r = (obs.offsets()[r] + cfg.eps_obs - min_proj)
                .max(0.0)
                .min(cfg.big_m);
            a_ub[(row, off_t + block.t_offset + r)] = -m_r;
            b_ub[row] = -obs.offsets()[r] - cfg.eps_obs;
            row += 1;
        }
    }
    for block in &layout.blocks {
        for r in 0..block.rows {
            a_ub[(row, off_t + block.t_offset + r)] = 1.0;
        }
        b_ub[row] = block.rows as f64 - 1.0;
        row += 1;
    }
    debug_assert_eq!(row, m_ub);

    lp.a_eq = a_eq;
    lp.b_eq = b_eq;
    lp.a_ub = a_ub;
    lp.b_ub = b_ub;

    Ok((
        MilpProblem {
            lp,
            binary_indices,
        },
        layout,
    ))
}

/// Heuristic incumbent: for each kept block, enforce the half-space the
/// reference position clears best and relax the rest.
fn warm_pattern(
    layout: &FhocpLayout,
    obstacles: &[HPolytope],
    x_k: &DVector<f64>,
    dyn_: &DiscreteDynamics,
    cfg: &PlannerConfig,
    reference: impl Fn(usize) -> Vec2,
) -> Vec<(usize, f64)> {
    let p_k = Vec2::new(x_k[dyn_.position_rows[0]], x_k[dyn_.position_rows[1]]);
    let mut fixes = Vec::new();
    for block in &layout.blocks {
        let obs = &obstacles[block.obs];
        let p = reference(block.step);
        // Only consider half-spaces the robot can actually satisfy at this
        // step: when tracking slips (the filter held the robot back), the
        // shifted reference can demand sides of an obstacle that are out of
        // reach, which would make the whole fixed pattern infeasible.
        let half = reach_half_width(block.step, dyn_, cfg, x_k);
        let (ix, iy) = (dyn_.position_rows[0], dyn_.position_rows[1]);
        let lo = Vec2::new(
            (p_k.x - half.x).max(cfg.x_min[ix]),
            (p_k.y - half.y).max(cfg.x_min[iy]),
        );
        let hi = Vec2::new(
            (p_k.x + half.x).min(cfg.x_max[ix]),
            (p_k.y + half.y).min(cfg.x_max[iy]),
        );
        let reachable = |r: usize| {
            let a = &obs.normals()[r];
            let best = a.x * if a.x > 0.0 { hi.x } else { lo.x }
                + a.y * if a.y > 0.0 { hi.y } else { lo.y };
            best >= obs.offsets()[r] + cfg.eps_obs
        };
        let any_reachable = (0..block.rows).any(&reachable);
        let mut best_row = 0usize;
        let mut best_slack = f64::NEG_INFINITY;
        for r in 0..block.rows {
            if any_reachable && !reachable(r) {
                continue;
            }
            let slack = obs.normals()[r].dot(&p) - obs.offsets()[r];
            if slack > best_slack {
                best_slack = slack;
                best_row = r;
            }
        }
        for r in 0..block.rows {
            fixes.push((
                layout.off_t + block.t_offset + r,
                if r == best_row { 0.0 } else { 1.0 },
            ));
        }
    }
    fixes
}

/// One FHOCP solve at a fixed horizon. `reference` supplies per-step
/// position guesses for the warm incumbent; without one, the rounded root
/// relaxation is used instead.
fn solve_horizon(
    x_k: &DVector<f64>,
    x_g: &DVector<f64>,
    obstacles: &[HPolytope],
    dyn_: &DiscreteDynamics,
    cfg: &PlannerConfig,
    reference: Option<&dyn Fn(usize) -> Vec2>,
) -> Result<NominalPlan, PlanError> {
    let (problem, layout) = build_fhocp(x_k, x_g, obstacles, dyn_, cfg)?;
    let warm = match reference {
        _ if layout.blocks.is_empty() => None,
        Some(reference) => Some(warm_pattern(&layout, obstacles, x_k, dyn_, cfg, reference)),
        None => {
            // round the root relaxation; its (big-M-softened) positions tend
            // to pick the right side of each obstacle
            let relaxed = crate::milp::solve_lp(&problem.lp);
            if relaxed.status == SolveStatus::Optimal {
                let x = relaxed.x;
                Some(warm_pattern(&layout, obstacles, x_k, dyn_, cfg, |step| {
                    Vec2::new(
                        x[layout.idx_x(step, dyn_.position_rows[0])],
                        x[layout.idx_x(step, dyn_.position_rows[1])],
                    )
                }))
            } else {
                None
            }
        }
    };
    if std::env::var_os("POLYNAV_TRACE").is_some() {
        if let Some(w) = &warm {
            let probe = crate::milp::debug_warm_status(&problem, w);
            eprintln!("  warm probe: status={:?} obj={:.2}", probe.0, probe.1);
            if !probe.1.is_finite() {
                if let Some(r) = reference {
                    let pts: Vec<String> = (0..=cfg.np).map(|i| { let p = r(i); format!("({:.2},{:.2})", p.x, p.y) }).collect();
                    eprintln!("  infeasible warm, x_k=({:.2},{:.2}) ref={}", x_k[0], x_k[1], pts.join(" "));
                }
            }
        }
    }
    let sol = if cfg.explore {
        crate::milp::solve_milp_explore(&problem, cfg.node_limit, cfg.patience, warm.as_deref())
    } else {
        crate::milp::solve_milp_patient(
            &problem,
            cfg.gap_tol,
            cfg.node_limit,
            cfg.patience,
            warm.as_deref(),
        )
    };
    let node_limit_hit = sol.status == SolveStatus::NodeLimit;
    if !(sol.status == SolveStatus::Optimal || (node_limit_hit && sol.objective.is_finite())) {
        return Err(PlanError::Infeasible);
    }

    let n = layout.n;
    let m = layout.m;
    let np = layout.np;
    let mut u_star = DMatrix::zeros(m, np);
    for i in 0..np {
        for s in 0..m {
            u_star[(s, i)] = sol.x[layout.idx_u(i, s)];
        }
    }
    let mut x_star = DMatrix::zeros(n, np + 1);
    for i in 0..=np {
        for s in 0..n {
            x_star[(s, i)] = sol.x[layout.idx_x(i, s)];
        }
    }
    let mut binaries = Vec::new();
    for block in &layout.blocks {
        for r in 0..block.rows {
            binaries.push((
                (block.step, block.obs, r),
                sol.x[layout.off_t + block.t_offset + r],
            ));
        }
    }
    Ok(NominalPlan {
        u_star,
        x_star,
        binaries,
        objective: sol.objective,
        nodes_explored: sol.nodes_explored,
        node_limit_hit,
    })
}

/// Solves the FHOCP. The previous plan, when supplied, seeds the incumbent
/// with its one-step-shifted obstacle-side pattern; a cold start instead
/// grows the horizon one step at a time, so each extension inherits a
/// consistent pattern and never has to repair a reference that cuts through
/// an obstacle.
pub fn plan(
    x_k: &DVector<f64>,
    x_g: &DVector<f64>,
    obstacles: &[HPolytope],
    dyn_: &DiscreteDynamics,
    cfg: &PlannerConfig,
    prev: Option<&NominalPlan>,
) -> Result<NominalPlan, PlanError> {
    let (ix, iy) = (dyn_.position_rows[0], dyn_.position_rows[1]);
    if let Some(p) = prev {
        if p.u_star.ncols() == cfg.np {
            let last = p.u_star.ncols();
            // Anchor the reference at the previous predicted state nearest
            // the current position. With perfect tracking that is the usual
            // one-step shift; when the safety filter held the robot back, the
            // anchor stays put, so the pattern remains reachable instead of
            // demanding next-step positions the robot never got close to.
            let here = Vec2::new(x_k[ix], x_k[iy]);
            let dist = |i: usize| (Vec2::new(p.x_star[(ix, i)], p.x_star[(iy, i)]) - here).norm();
            let d_min = (0..=last).map(dist).fold(f64::INFINITY, f64::min);
            // Ties broken toward the latest step: a plan whose early steps
            // dwell at the current position has spent that dwell by the time
            // it is reused, and re-anchoring at the first occurrence would
            // reproduce the dwell verbatim on every replan.
            let anchor = (0..=last)
                .filter(|&i| dist(i) <= d_min + 1e-9)
                .next_back()
                .unwrap_or(1);
            let shifted = |step: usize| {
                let i = (anchor + step).min(last);
                Vec2::new(p.x_star[(ix, i)], p.x_star[(iy, i)])
            };
            return solve_horizon(x_k, x_g, obstacles, dyn_, cfg, Some(&shifted));
        }
    }

    let mut partial: Option<NominalPlan> = None;
    let mut nodes_total = 0usize;
    for np in 1..cfg.np {
        let sub = PlannerConfig {
            np,
            ..cfg.clone()
        };
        let result = match &partial {
            Some(p) => {
                let cols = p.x_star.ncols() - 1;
                let extend = |step: usize| {
                    let i = step.min(cols);
                    Vec2::new(p.x_star[(ix, i)], p.x_star[(iy, i)])
                };
                solve_horizon(x_k, x_g, obstacles, dyn_, &sub, Some(&extend))
            }
            None => solve_horizon(x_k, x_g, obstacles, dyn_, &sub, None),
        };
        if let Ok(p) = result {
            nodes_total += p.nodes_explored;
            partial = Some(p);
        }
    }
    let result = match &partial {
        Some(p) => {
            let cols = p.x_star.ncols() - 1;
            let extend = |step: usize| {
                let i = step.min(cols);
                Vec2::new(p.x_star[(ix, i)], p.x_star[(iy, i)])
            };
            solve_horizon(x_k, x_g, obstacles, dyn_, cfg, Some(&extend))
        }
        None => solve_horizon(x_k, x_g, obstacles, dyn_, cfg, None),
    };
    result.map(|mut p| {
        p.nodes_explored += nodes_total;
        p
    })
}

/// Saturated straight-line command toward the goal; Algorithm-1 fallback
/// when the planner is infeasible.
pub fn greedy_fallback(x_k: &DVector<f64>, x_g: &DVector<f64>, u_max: &DVector<f64>) -> DVector<f64> {
    let dir = Vec2::new(x_g[0] - x_k[0], x_g[1] - x_k[1]);
    let dist = dir.norm();
    let m = u_max.len();
    if dist < 1e-12 {
        return DVector::zeros(m);
    }
    let scale = (0..m).map(|i| u_max[i]).fold(f64::INFINITY, f64::min);
    let unit = dir / dist;
    let mut u = DVector::zeros(m);
    u[0] = (scale * unit.x).clamp(-u_max[0], u_max[0]);
    u[1] = (scale * unit.y).clamp(-u_max[1], u_max[1]);
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{v_to_h, VPolytope};
    use approx::assert_abs_diff_eq;

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    fn square_obs(x0: f64, x1: f64, y0: f64, y1: f64) -> HPolytope {
        v_to_h(
            &VPolytope::new(vec![v(x0, y0), v(x1, y0), v(x1, y1), v(x0, y1)]).unwrap(),
        )
    }

    fn default_cfg(n: usize) -> PlannerConfig {
        PlannerConfig {
            np: 10,
            dt_p: 0.2,
            alpha: 20.0,
            beta: 0.08,
            big_m: 20.0,
            eps_obs: 0.01,
            x_min: DVector::from_element(n, -10.0),
            x_max: DVector::from_element(n, 10.0),
            u_min: DVector::from_element(2, -5.0),
            u_max: DVector::from_element(2, 5.0),
            gap_tol: 1e-6,
            patience: usize::MAX,
            explore: false,
            node_limit: 100_000,
            prune_reachability: true,
        }
    }

    #[test]
    fn discretize_matrices() {
        let d = discretize(DynamicsKind::SingleIntegrator, 0.2);
        assert_abs_diff_eq!((d.a - DMatrix::identity(2, 2)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            (d.b - DMatrix::identity(2, 2) * 0.2).norm(),
            0.0,
            epsilon = 1e-15
        );
        let d = discretize(DynamicsKind::DoubleIntegrator, 0.2);
        assert_abs_diff_eq!(d.b[(0, 0)], 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(d.b[(2, 0)], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn zoh_rollout_matches_continuous() {
        // constant input: double integrator closed form p(t) = p0 + v0 t + u t^2 / 2
        let d = discretize(DynamicsKind::DoubleIntegrator, 0.1);
        let u = DVector::from_column_slice(&[0.3, -0.7]);
        let mut x = DVector::from_column_slice(&[1.0, 2.0, -0.5, 0.25]);
        for _ in 0..10 {
            x = &d.a * &x + &d.b * &u;
        }
        let t = 1.0f64;
        assert_abs_diff_eq!(x[0], 1.0 - 0.5 * t + 0.3 * t * t / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 2.0 + 0.25 * t - 0.7 * t * t / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[2], -0.5 + 0.3 * t, epsilon = 1e-12);
        assert_abs_diff_eq!(x[3], 0.25 - 0.7 * t, epsilon = 1e-12);
    }

    #[test]
    fn fhocp_counts() {
        let dyn_ = discretize(DynamicsKind::SingleIntegrator, 0.2);
        let mut cfg = default_cfg(2);
        cfg.prune_reachability = false;
        let x_k = DVector::from_column_slice(&[-3.0, 0.0]);
        let x_g = DVector::from_column_slice(&[3.0, 0.0]);
        let obs = vec![square_obs(-0.5, 0.5, -0.5, 0.5)];
        let (p, layout) = build_fhocp(&x_k, &x_g, &obs, &dyn_, &cfg).unwrap();
        assert_eq!(p.binary_indices.len(), 44); // (Np+1) * 4
        assert_eq!(layout.blocks.len(), 11);
        // slack rows + big-M rows + cardinality rows
        let expected_ub = 2 * 2 * 10 + 2 * 2 * 11 + 44 + 11;
        assert_eq!(p.lp.b_ub.len(), expected_ub);
        assert_eq!(p.lp.b_eq.len(), 2 + 2 * 10);
    }

    #[test]
    fn fhocp_no_obstacles_is_pure_lp() {
        let dyn_ = discretize(DynamicsKind::SingleIntegrator, 0.2);
        let cfg = default_cfg(2);
        let x_k = DVector::zeros(2);
        let x_g = DVector::from_column_slice(&[1.0, 0.0]);
        let (p, _) = build_fhocp(&x_k, &x_g, &[], &dyn_, &cfg).unwrap();
        assert!(p.binary_indices.is_empty());
    }

    #[test]
    fn fhocp_residual_at_feasible_point() {
        let dyn_ = discretize(DynamicsKind::SingleIntegrator, 0.2);
        let mut cfg = default_cfg(2);
        cfg.prune_reachability = false;
        let x_k = DVector::from_column_slice(&[-3.0, 0.0]);
        let x_g = DVector::from_column_slice(&[-3.0, 0.0]);
        let obs = vec![square_obs(-0.5, 0.5, -0.5, 0.5)];
        let (p, layout) = build_fhocp(&x_k, &x_g, &obs, &dyn_, &cfg).unwrap();
        // hand-rolled stationary trajectory at x_k with matching slacks and
        // the "stay left" binary pattern
        let mut z = DVector::zeros(layout.n_vars);
        for i in 0..=layout.np {
            z[layout.idx_x(i, 0)] = -3.0;
            z[layout.idx_x(i, 1)] = 0.0;
        }
        for block in &layout.blocks {
            let hobs = &obs[block.obs];
            let mut best = (0usize, f64::NEG_INFINITY);
            for r in 0..block.rows {
                let s = hobs.normals()[r].dot(&v(-3.0, 0.0)) - hobs.offsets()[r];
                if s > best.1 {
                    best = (r, s);
                }
            }
            for r in 0..block.rows {
                if r != best.0 {
                    z[layout.off_t + block.t_offset + r] = 1.0;
                }
            }
        }
        let eq_res = (&p.lp.a_eq * &z - &p.lp.b_eq).amax();
        let ub_res = (&p.lp.a_ub * &z - &p.lp.b_ub).max();
        assert!(eq_res <= 1e-9, "eq residual {eq_res}");
        assert!(ub_res <= 1e-9, "ub residual {ub_res}");
    }

    #[test]
    fn plan_straight_line_bang() {
        let dyn_ = discretize(DynamicsKind::SingleIntegrator, 0.2);
        let cfg = default_cfg(2);
        let x_k = DVector::zeros(2);
        let x_g = DVector::from_column_slice(&[1.0, 0.0]);
        let plan = plan(&x_k, &x_g, &[], &dyn_, &cfg, None).unwrap();
        assert_abs_diff_eq!(plan.u_star[(0, 0)], 5.0, epsilon = 1e-6);
        assert_abs_diff_eq!(plan.u_star[(1, 0)], 0.0, epsilon = 1e-6);
        for i in 1..=10 {
            assert_abs_diff_eq!(plan.x_star[(0, i)], 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn plan_at_goal_is_zero() {
        let dyn_ = discretize(DynamicsKind::SingleIntegrator, 0.2);
        let cfg = default_cfg(2);
        let x = DVector::from_column_slice(&[0.7, -0.2]);
        let p = plan(&x, &x, &[], &dyn_, &cfg, None).unwrap();
        assert_abs_diff_eq!(p.u_star.norm(), 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(p.objective, 0.0, epsilon = 1e-7);
    }

    #[test]
    fn plan_infeasible_when_boxed_in() {
        // state box entirely inside the obstacle's margin: no step i >= 1
        // can satisfy any disjunct
        let dyn_ = discretize(DynamicsKind::SingleIntegrator, 0.2);
        let mut cfg = default_cfg(2);
        cfg.x_min = DVector::from_column_slice(&[0.4, 0.4]);
        cfg.x_max = DVector::from_column_slice(&[0.6, 0.6]);
        let x_k = DVector::from_column_slice(&[0.5, 0.5]);
        let x_g = DVector::from_column_slice(&[0.6, 0.6]);
        let obs = vec![square_obs(0.0, 1.0, 0.0, 1.0)];
        let r = plan(&x_k, &x_g, &obs, &dyn_, &cfg, None);
        assert_eq!(r.unwrap_err(), PlanError::Infeasible);
    }

    #[test]
    fn plan_positions_respect_margin() {
        let dyn_ = discretize(DynamicsKind::SingleIntegrator, 0.2);
        let cfg = default_cfg(2);
        let x_k = DVector::from_column_slice(&[-2.0, 0.05]);
        let x_g = DVector::from_column_slice(&[2.0, 0.0]);
        let obs = vec![square_obs(-0.6, 0.6, -0.6, 0.6)];
        let p = plan(&x_k, &x_g, &obs, &dyn_, &cfg, None).unwrap();
        for i in 0..=cfg.np {
            let pos = v(p.x_star[(0, i)], p.x_star[(1, i)]);
            let cleared = obs[0]
                .normals()
                .iter()
                .zip(obs[0].offsets())
                .any(|(a, b)| a.dot(&pos) >= b + cfg.eps_obs - 1e-7);
            assert!(cleared, "step {i} position {pos:?} violates the margin");
        }
    }

    #[test]
    fn longer_horizon_does_not_cost_more() {
        let dyn_ = discretize(DynamicsKind::SingleIntegrator, 0.2);
        let x_k = DVector::zeros(2);
        let x_g = DVector::from_column_slice(&[1.5, -0.5]);
        let mut prev_obj = f64::INFINITY;
        for np in [4usize, 6, 8, 10] {
            let mut cfg = default_cfg(2);
            cfg.np = np;
            let p = plan(&x_k, &x_g, &[], &dyn_, &cfg, None).unwrap();
            assert!(p.objective <= prev_obj + 1e-6);
            prev_obj = p.objective;
        }
    }

    #[test]
    fn receding_consistency_obstacle_free() {
        let dyn_ = discretize(DynamicsKind::SingleIntegrator, 0.2);
        let cfg = default_cfg(2);
        let x_k = DVector::from_column_slice(&[-2.0, 1.0]);
        let x_g = DVector::from_column_slice(&[1.0, 0.0]);
        let p0 = plan(&x_k, &x_g, &[], &dyn_, &cfg, None).unwrap();
        let x_next = p0.x_star.column(1).into_owned();
        let first_step_cost: f64 = (0..2)
            .map(|s| p0.u_star[(s, 0)].abs() + cfg.beta * (p0.x_star[(s, 0)] - x_g[s]).abs())
            .sum();
        let p1 = plan(&x_next, &x_g, &[], &dyn_, &cfg, Some(&p0)).unwrap();
        assert!(p1.objective <= p0.objective - first_step_cost + 1e-6);
    }

    #[test]
    fn greedy_fallback_examples() {
        let umax = DVector::from_element(2, 5.0);
        let u = greedy_fallback(
            &DVector::from_column_slice(&[0.0, 0.0]),
            &DVector::from_column_slice(&[1.0, 0.0]),
            &umax,
        );
        assert_abs_diff_eq!(u[0], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1], 0.0, epsilon = 1e-12);
        let u = greedy_fallback(
            &DVector::from_column_slice(&[0.5, 0.5]),
            &DVector::from_column_slice(&[0.5, 0.5]),
            &umax,
        );
        assert_abs_diff_eq!(u.norm(), 0.0, epsilon = 1e-12);
        let u = greedy_fallback(
            &DVector::from_column_slice(&[0.0, 0.0]),
            &DVector::from_column_slice(&[3.0, 4.0]),
            &umax,
        );
        assert_abs_diff_eq!(u[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1], 4.0, epsilon = 1e-12);
    }
}
