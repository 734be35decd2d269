//! Dense LP and mixed-binary solvers.
//!
//! The instances produced by the planner are small (a few hundred variables
//! and rows), so a dense two-phase simplex with bounded variables is enough.
//! Pricing is Dantzig by default and falls back to Bland's rule after a run
//! of degenerate pivots, which rules out cycling. The mixed-binary solver is
//! a best-first branch and bound over LP relaxations, branching on the most
//! fractional binary with ties broken by lowest index.

use nalgebra::{DMatrix, DVector};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub c: DVector<f64>,
    pub a_ub: DMatrix<f64>,
    pub b_ub: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl LinearProgram {
    /// Unconstrained program over `n` free variables with zero cost.
    pub fn new(n: usize) -> Self {
        Self {
            c: DVector::zeros(n),
            a_ub: DMatrix::zeros(0, n),
            b_ub: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            lower: DVector::from_element(n, f64::NEG_INFINITY),
            upper: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }
}

#[derive(Debug, Clone)]
pub struct MilpProblem {
    pub lp: LinearProgram,
    pub binary_indices: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Branch and bound hit the node limit; the best incumbent is returned.
    NodeLimit,
    /// The simplex stalled; never observed on well-scaled instances.
    NumericalError,
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: SolveStatus,
    pub x: DVector<f64>,
    pub objective: f64,
    pub nodes_explored: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    FreeZero,
}

struct Simplex {
    m: usize,
    ncols: usize,
    n_real: usize,
    /// Row-major tableau, `ncols` entries per row; row operations stay on
    /// contiguous slices, which is what the pivot loops spend their time on.
    tab: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    val: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    bland: bool,
    degenerate_run: usize,
    scratch: Vec<f64>,
    /// Reduced costs, maintained across pivots and refreshed periodically.
    d: Vec<f64>,
    pivots_since_refresh: usize,
}

enum StepOutcome {
    Optimal,
    Unbounded,
    Continue,
    Stalled,
}

impl Simplex {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.n_vars();
        let m_ub = lp.b_ub.len();
        let m_eq = lp.b_eq.len();
        let m = m_ub + m_eq;
        let n_real = n + m_ub;

        let mut lo = Vec::with_capacity(n_real + m);
        let mut up = Vec::with_capacity(n_real + m);
        for j in 0..n {
            lo.push(lp.lower[j]);
            up.push(lp.upper[j]);
        }
        for _ in 0..m_ub {
            lo.push(0.0);
            up.push(f64::INFINITY);
        }

        let mut state = Vec::with_capacity(n_real + m);
        let mut val = Vec::with_capacity(n_real + m);
        for j in 0..n {
            if lp.lower[j].is_finite() {
                state.push(VarState::AtLower);
                val.push(lp.lower[j]);
            } else if lp.upper[j].is_finite() {
                state.push(VarState::AtUpper);
                val.push(lp.upper[j]);
            } else {
                state.push(VarState::FreeZero);
                val.push(0.0);
            }
        }
        for _ in 0..m_ub {
            state.push(VarState::AtLower);
            val.push(0.0);
        }

        // Residuals of each row at the nonbasic starting point.
        let mut resid = vec![0.0f64; m];
        for i in 0..m_ub {
            let mut s = 0.0;
            for j in 0..n {
                s += lp.a_ub[(i, j)] * val[j];
            }
            resid[i] = lp.b_ub[i] - s;
        }
        for i in 0..m_eq {
            let mut s = 0.0;
            for j in 0..n {
                s += lp.a_eq[(i, j)] * val[j];
            }
            resid[m_ub + i] = lp.b_eq[i] - s;
        }

        // Rows whose residual a slack can absorb get the slack as the basic
        // variable; the rest get a signed artificial column.
        let mut needs_artificial: Vec<usize> = Vec::new();
        for i in 0..m {
            let slack_ok = i < m_ub && resid[i] >= -TOL;
            if !slack_ok {
                needs_artificial.push(i);
            }
        }
        let n_art = needs_artificial.len();
        let ncols = n_real + n_art;

        let mut tab = vec![0.0f64; m * ncols];
        for i in 0..m_ub {
            for j in 0..n {
                tab[i * ncols + j] = lp.a_ub[(i, j)];
            }
            tab[i * ncols + n + i] = 1.0;
        }
        for i in 0..m_eq {
            for j in 0..n {
                tab[(m_ub + i) * ncols + j] = lp.a_eq[(i, j)];
            }
        }

        let mut basis = vec![usize::MAX; m];
        for i in 0..m_ub {
            if resid[i] >= -TOL {
                basis[i] = n + i;
            }
        }
        for (a_idx, &row) in needs_artificial.iter().enumerate() {
            let col = n_real + a_idx;
            let sign = if resid[row] >= 0.0 { 1.0 } else { -1.0 };
            // scale the row so the artificial column is +1
            if sign < 0.0 {
                for j in 0..n_real {
                    tab[row * ncols + j] = -tab[row * ncols + j];
                }
            }
            tab[row * ncols + col] = 1.0;
            basis[row] = col;
            lo.push(0.0);
            up.push(f64::INFINITY);
            state.push(VarState::Basic);
            val.push(resid[row].abs().max(0.0));
        }
        for i in 0..m_ub {
            if basis[i] == n + i {
                state[n + i] = VarState::Basic;
                val[n + i] = resid[i].max(0.0);
            }
        }

        Simplex {
            m,
            ncols,
            n_real,
            tab,
            basis,
            state,
            val,
            lo,
            up,
            bland: false,
            degenerate_run: 0,
            scratch: Vec::new(),
            d: Vec::new(),
            pivots_since_refresh: 0,
        }
    }

    fn refresh_reduced_costs(&mut self, cost: &[f64]) {
        let nc = self.ncols;
        let mut d: Vec<f64> = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.tab[i * nc..(i + 1) * nc];
                for (dj, tj) in d.iter_mut().zip(row) {
                    *dj -= cb * tj;
                }
            }
        }
        self.d = d;
        self.pivots_since_refresh = 0;
    }

    fn step(&mut self, cost: &[f64]) -> StepOutcome {
        if self.d.is_empty() || self.pivots_since_refresh >= 64 {
            self.refresh_reduced_costs(cost);
        }
        let d = &self.d;

        // entering variable and its direction of change
        let mut enter: Option<(usize, f64)> = None;
        let mut best_score = TOL;
        for j in 0..self.ncols {
            let dir = match self.state[j] {
                VarState::Basic => continue,
                VarState::AtLower => {
                    if d[j] < -TOL {
                        1.0
                    } else {
                        continue;
                    }
                }
                VarState::AtUpper => {
                    if d[j] > TOL {
                        -1.0
                    } else {
                        continue;
                    }
                }
                VarState::FreeZero => {
                    if d[j] < -TOL {
                        1.0
                    } else if d[j] > TOL {
                        -1.0
                    } else {
                        continue;
                    }
                }
            };
            if self.bland {
                enter = Some((j, dir));
                break;
            }
            if d[j].abs() > best_score {
                best_score = d[j].abs();
                enter = Some((j, dir));
            }
        }
        let Some((j_enter, dir)) = enter else {
            return StepOutcome::Optimal;
        };

        // ratio test
        let span = self.up[j_enter] - self.lo[j_enter];
        let mut theta = if span.is_finite() { span } else { f64::INFINITY };
        let mut leave: Option<(usize, VarState)> = None; // row, bound hit
        for i in 0..self.m {
            let delta = -dir * self.tab[i * self.ncols + j_enter];
            let b = self.basis[i];
            let (limit, hits) = if delta < -TOL {
                if self.lo[b].is_finite() {
                    ((self.val[b] - self.lo[b]) / (-delta), VarState::AtLower)
                } else {
                    continue;
                }
            } else if delta > TOL {
                if self.up[b].is_finite() {
                    ((self.up[b] - self.val[b]) / delta, VarState::AtUpper)
                } else {
                    continue;
                }
            } else {
                continue;
            };
            let limit = limit.max(0.0);
            if limit < theta - 1e-12 {
                theta = limit;
                leave = Some((i, hits));
            } else if limit < theta + 1e-12 {
                // tie-break: largest pivot for stability, smallest basis
                // index under Bland's rule
                match leave {
                    None => {
                        theta = limit.min(theta);
                        leave = Some((i, hits));
                    }
                    Some((r, _)) => {
                        let better = if self.bland {
                            self.basis[i] < self.basis[r]
                        } else {
                            self.tab[i * self.ncols + j_enter].abs()
                                > self.tab[r * self.ncols + j_enter].abs()
                        };
                        if better {
                            theta = limit.min(theta);
                            leave = Some((i, hits));
                        }
                    }
                }
            }
        }

        if !theta.is_finite() {
            return StepOutcome::Unbounded;
        }

        if theta <= 1e-12 {
            self.degenerate_run += 1;
            if self.degenerate_run > 100 {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
        }

        // apply the step
        self.val[j_enter] += dir * theta;
        for i in 0..self.m {
            let b = self.basis[i];
            self.val[b] -= dir * theta * self.tab[i * self.ncols + j_enter];
        }

        match leave {
            None => {
                // bound flip, basis unchanged
                self.state[j_enter] = match self.state[j_enter] {
                    VarState::AtLower => VarState::AtUpper,
                    VarState::AtUpper => VarState::AtLower,
                    s => s,
                };
                StepOutcome::Continue
            }
            Some((r, hits)) => {
                let j_leave = self.basis[r];
                let nc = self.ncols;
                let pivot = self.tab[r * nc + j_enter];
                if pivot.abs() < 1e-12 {
                    return StepOutcome::Stalled;
                }
                let inv = 1.0 / pivot;
                for v in &mut self.tab[r * nc..(r + 1) * nc] {
                    *v *= inv;
                }
                self.scratch.clear();
                self.scratch.extend_from_slice(&self.tab[r * nc..(r + 1) * nc]);
                for i in 0..self.m {
                    if i == r {
                        continue;
                    }
                    let factor = self.tab[i * nc + j_enter];
                    if factor != 0.0 {
                        let row = &mut self.tab[i * nc..(i + 1) * nc];
                        for (v, p) in row.iter_mut().zip(&self.scratch) {
                            *v -= factor * p;
                        }
                    }
                }
                self.basis[r] = j_enter;
                self.state[j_enter] = VarState::Basic;
                self.state[j_leave] = hits;
                self.val[j_leave] = match hits {
                    VarState::AtLower => self.lo[j_leave],
                    VarState::AtUpper => self.up[j_leave],
                    _ => self.val[j_leave],
                };
                let d_enter = self.d[j_enter];
                if d_enter != 0.0 {
                    for (dj, p) in self.d.iter_mut().zip(&self.scratch) {
                        *dj -= d_enter * p;
                    }
                }
                self.d[j_enter] = 0.0;
                self.pivots_since_refresh += 1;
                StepOutcome::Continue
            }
        }
    }

    fn run(&mut self, cost: &[f64], max_iters: usize) -> StepOutcome {
        self.d.clear();
        for _ in 0..max_iters {
            match self.step(cost) {
                StepOutcome::Continue => {}
                other => return other,
            }
        }
        StepOutcome::Stalled
    }
}

/// Two-phase simplex for a bounded-variable LP.
pub fn solve_lp(lp: &LinearProgram) -> MilpSolution {
    let n = lp.n_vars();
    for j in 0..n {
        if lp.lower[j] > lp.upper[j] + TOL {
            return MilpSolution {
                status: SolveStatus::Infeasible,
                x: DVector::zeros(n),
                objective: f64::INFINITY,
                nodes_explored: 0,
            };
        }
    }
    let mut s = Simplex::build(lp);
    let max_iters = 500 + 40 * (s.m + s.ncols);

    if s.ncols > s.n_real {
        let mut phase1 = vec![0.0; s.ncols];
        for j in s.n_real..s.ncols {
            phase1[j] = 1.0;
        }
        match s.run(&phase1, max_iters) {
            StepOutcome::Optimal => {}
            StepOutcome::Stalled => {
                return fail(n, SolveStatus::NumericalError);
            }
            // phase 1 is bounded below by zero
            _ => return fail(n, SolveStatus::NumericalError),
        }
        let infeas: f64 = (s.n_real..s.ncols).map(|j| s.val[j]).sum();
        if infeas > 1e-7 {
            return fail(n, SolveStatus::Infeasible);
        }
        // pin artificials at zero and pivot basic ones out where possible
        for j in s.n_real..s.ncols {
            s.up[j] = 0.0;
        }
        for r in 0..s.m {
            let b = s.basis[r];
            if b >= s.n_real {
                let nc = s.ncols;
                let mut pivot_col = None;
                for j in 0..s.n_real {
                    if s.state[j] != VarState::Basic && s.tab[r * nc + j].abs() > 1e-7 {
                        pivot_col = Some(j);
                        break;
                    }
                }
                if let Some(j) = pivot_col {
                    let pivot = s.tab[r * nc + j];
                    let inv = 1.0 / pivot;
                    for v in &mut s.tab[r * nc..(r + 1) * nc] {
                        *v *= inv;
                    }
                    s.scratch.clear();
                    let (head, rest) = s.tab.split_at_mut(r * nc);
                    let (prow, tail) = rest.split_at_mut(nc);
                    for (i, chunk) in head
                        .chunks_exact_mut(nc)
                        .enumerate()
                        .chain(tail.chunks_exact_mut(nc).enumerate().map(|(i, c)| (i + r + 1, c)))
                    {
                        let _ = i;
                        let f = chunk[j];
                        if f != 0.0 {
                            for (v, p) in chunk.iter_mut().zip(prow.iter()) {
                                *v -= f * *p;
                            }
                        }
                    }
                    s.state[b] = VarState::AtLower;
                    s.val[b] = 0.0;
                    s.basis[r] = j;
                    s.state[j] = VarState::Basic;
                }
            }
        }
    }

    let mut phase2 = vec![0.0; s.ncols];
    for j in 0..n {
        phase2[j] = lp.c[j];
    }
    s.bland = false;
    s.degenerate_run = 0;
    let outcome = s.run(&phase2, max_iters);
    match outcome {
        StepOutcome::Optimal => {
            let mut x = DVector::zeros(n);
            for j in 0..n {
                let mut v = s.val[j];
                if lp.lower[j].is_finite() {
                    v = v.max(lp.lower[j]);
                }
                if lp.upper[j].is_finite() {
                    v = v.min(lp.upper[j]);
                }
                x[j] = v;
            }
            let objective = lp.c.dot(&x);
            MilpSolution {
                status: SolveStatus::Optimal,
                x,
                objective,
                nodes_explored: 0,
            }
        }
        StepOutcome::Unbounded => fail(n, SolveStatus::Unbounded),
        _ => fail(n, SolveStatus::NumericalError),
    }
}

fn fail(n: usize, status: SolveStatus) -> MilpSolution {
    MilpSolution {
        status,
        x: DVector::zeros(n),
        objective: f64::INFINITY,
        nodes_explored: 0,
    }
}

struct Node {
    bound: f64,
    fixes: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap; reverse for best-first (lowest bound first)
        other.bound.total_cmp(&self.bound)
    }
}

fn lp_with_fixes(base: &LinearProgram, fixes: &[(usize, f64)]) -> LinearProgram {
    let mut lp = base.clone();
    for &(j, v) in fixes {
        lp.lower[j] = v;
        lp.upper[j] = v;
    }
    lp
}

const INTEGRALITY_TOL: f64 = 1e-6;

/// Best-first branch and bound. `warm_binaries` is an optional heuristic
/// 0/1 assignment evaluated up front to seed the incumbent.
pub fn solve_milp_warm(
    p: &MilpProblem,
    gap_tol: f64,
    node_limit: usize,
    warm_binaries: Option<&[(usize, f64)]>,
) -> MilpSolution {
    solve_milp_patient(p, gap_tol, node_limit, usize::MAX, warm_binaries)
}

/// [`solve_milp_warm`] with an early-out: once an incumbent exists, the
/// search also stops after `patience` consecutive nodes without an
/// incumbent improvement (status [`SolveStatus::NodeLimit`]). Deterministic,
/// unlike a wall-clock budget.
pub fn solve_milp_patient(
    p: &MilpProblem,
    gap_tol: f64,
    node_limit: usize,
    patience: usize,
    warm_binaries: Option<&[(usize, f64)]>,
) -> MilpSolution {
    milp_search(p, gap_tol, node_limit, patience, warm_binaries, false)
}

/// Improvement-seeking variant: depth-first throughout, pruning only nodes
/// that cannot beat the incumbent at all. The weak big-M relaxation bounds
/// make best-first search expand whole frontiers before reaching a deep
/// improving leaf; diving finds those leaves quickly, at the price of no
/// optimality certificate. Stops after `patience` consecutive nodes without
/// an improvement.
pub fn solve_milp_explore(
    p: &MilpProblem,
    node_limit: usize,
    patience: usize,
    warm_binaries: Option<&[(usize, f64)]>,
) -> MilpSolution {
    milp_search(p, 0.0, node_limit, patience, warm_binaries, true)
}

#[doc(hidden)]
pub fn debug_warm_status(p: &MilpProblem, warm: &[(usize, f64)]) -> (SolveStatus, f64) {
    let sol = solve_lp(&lp_with_fixes(&p.lp, warm));
    (sol.status, sol.objective)
}

fn milp_search(
    p: &MilpProblem,
    gap_tol: f64,
    node_limit: usize,
    patience: usize,
    warm_binaries: Option<&[(usize, f64)]>,
    dfs: bool,
) -> MilpSolution {
    let n = p.lp.n_vars();
    let mut nodes_explored = 0usize;
    let mut stagnant = 0usize;
    let mut incumbent: Option<(f64, DVector<f64>)> = None;

    if let Some(warm) = warm_binaries {
        let lp = lp_with_fixes(&p.lp, warm);
        let sol = solve_lp(&lp);
        nodes_explored += 1;
        if sol.status == SolveStatus::Optimal {
            incumbent = Some((sol.objective, sol.x));
        }
    }

    // Until an incumbent exists the search dives depth-first (bounds cannot
    // prune anything yet, and diving reaches integrality after about one
    // branching decision per fractional binary); afterwards it switches to
    // best-first on the bound.
    let mut dive: Vec<Node> = vec![Node {
        bound: f64::NEG_INFINITY,
        fixes: Vec::new(),
    }];
    let mut heap: BinaryHeap<Node> = BinaryHeap::new();

    let mut root_unbounded = false;
    loop {
        if !dfs && incumbent.is_some() && !dive.is_empty() {
            heap.extend(dive.drain(..));
        }
        let node = match dive.pop().or_else(|| heap.pop()) {
            Some(node) => node,
            None => break,
        };
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - gap_tol {
                if dfs {
                    // stack order says nothing about the rest of the stack
                    continue;
                }
                break; // proven within gap
            }
        }
        if nodes_explored >= node_limit || (incumbent.is_some() && stagnant >= patience) {
            let (objective, x) = match incumbent {
                Some((obj, x)) => (obj, x),
                None => (f64::INFINITY, DVector::zeros(n)),
            };
            return MilpSolution {
                status: SolveStatus::NodeLimit,
                x,
                objective,
                nodes_explored,
            };
        }
        let lp = lp_with_fixes(&p.lp, &node.fixes);
        let sol = solve_lp(&lp);
        nodes_explored += 1;
        stagnant += 1;
        match sol.status {
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded => {
                if node.fixes.is_empty() {
                    root_unbounded = true;
                    break;
                }
                continue;
            }
            SolveStatus::Optimal => {}
            other => {
                return MilpSolution {
                    status: other,
                    x: DVector::zeros(n),
                    objective: f64::INFINITY,
                    nodes_explored,
                };
            }
        }
        if let Some((best, _)) = &incumbent {
            if sol.objective >= best - gap_tol {
                continue;
            }
        }
        // most fractional binary, ties by lowest index
        let mut branch: Option<(usize, f64)> = None;
        for &j in &p.binary_indices {
            let v = sol.x[j];
            if (v - v.round()).abs() > INTEGRALITY_TOL {
                let dist_to_half = (v - v.floor() - 0.5).abs();
                if branch.map_or(true, |(_, d)| dist_to_half < d) {
                    branch = Some((j, dist_to_half));
                }
            }
        }
        match branch {
            None => {
                // integral candidate; the prune above guarantees improvement
                incumbent = Some((sol.objective, sol.x));
                stagnant = 0;
            }
            Some((j, _)) => {
                let preferred = sol.x[j].round().clamp(0.0, 1.0);
                for v in [1.0 - preferred, preferred] {
                    let mut fixes = node.fixes.clone();
                    fixes.push((j, v));
                    let child = Node {
                        bound: sol.objective,
                        fixes,
                    };
                    if incumbent.is_none() || dfs {
                        // preferred child pushed last, popped first
                        dive.push(child);
                    } else {
                        heap.push(child);
                    }
                }
            }
        }
    }

    if root_unbounded {
        return MilpSolution {
            status: SolveStatus::Unbounded,
            x: DVector::zeros(n),
            objective: f64::NEG_INFINITY,
            nodes_explored,
        };
    }
    match incumbent {
        Some((objective, mut x)) => {
            for &j in &p.binary_indices {
                x[j] = x[j].round();
            }
            MilpSolution {
                status: SolveStatus::Optimal,
                x,
                objective,
                nodes_explored,
            }
        }
        None => MilpSolution {
            status: SolveStatus::Infeasible,
            x: DVector::zeros(n),
            objective: f64::INFINITY,
            nodes_explored,
        },
    }
}

pub fn solve_milp(p: &MilpProblem, gap_tol: f64, node_limit: usize) -> MilpSolution {
    solve_milp_warm(p, gap_tol, node_limit, None)
}
