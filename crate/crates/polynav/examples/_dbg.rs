use nalgebra::DVector;
use polynav::geometry::{HPolytope, Vec2};
use polynav::milp::solve_milp_warm;
use polynav::planner::*;
use std::time::Instant;

fn pattern(layout: &FhocpLayout, obs: &[HPolytope], rf: impl Fn(usize) -> Vec2) -> Vec<(usize, f64)> {
    let mut fixes = Vec::new();
    for block in &layout.blocks {
        let o = &obs[block.obs];
        let p = rf(block.step);
        let mut best = (0usize, f64::NEG_INFINITY);
        for r in 0..block.rows {
            let slack = o.normals()[r].dot(&p) - o.offsets()[r];
            if slack > best.1 { best = (r, slack); }
        }
        for r in 0..block.rows {
            fixes.push((layout.off_t + block.t_offset + r, if r == best.0 { 0.0 } else { 1.0 }));
        }
    }
    fixes
}

fn main() {
    let path = std::env::args().nth(1).unwrap();
    let s = polynav::scenario::load(&path).unwrap();
    let p = &s.params;
    let dyn_ = discretize(s.dynamics, p.dt_p);
    let (lo, hi) = s.workspace;
    let n = s.n_states();
    let mut x_min = DVector::zeros(n);
    let mut x_max = DVector::zeros(n);
    x_min[0] = lo.x; x_min[1] = lo.y; x_max[0] = hi.x; x_max[1] = hi.y;
    if n == 4 { x_min[2] = -p.v_max; x_min[3] = -p.v_max; x_max[2] = p.v_max; x_max[3] = p.v_max; }
    let cfg = PlannerConfig {
        np: p.np, dt_p: p.dt_p, alpha: p.alpha, beta: p.beta, big_m: p.big_m,
        eps_obs: p.eps_obs,
        x_min, x_max,
        u_min: DVector::from_element(2, -p.u_max),
        u_max: DVector::from_element(2, p.u_max),
        gap_tol: 2.0, node_limit: 100000, prune_reachability: true, patience: usize::MAX, explore: false,
    };
    let obs: Vec<_> = s.obstacles.iter().map(polynav::geometry::v_to_h).collect();
    let g = s.goal_state();

    let mut xs = s.start.clone();
    let mut prev: Option<NominalPlan> = None;
    let dstep = discretize(s.dynamics, 0.01);
    for k in 0..8 {
        let (problem_k, layout_k) = build_fhocp(&xs, &g, &obs, &dyn_, &cfg).unwrap();
        let warm_probe = prev.as_ref().map(|pl| {
            let last = pl.u_star.ncols();
            let fixes = pattern(&layout_k, &obs, |step| {
                let i = (step + 1).min(last);
                Vec2::new(pl.x_star[(dyn_.position_rows[0], i)], pl.x_star[(dyn_.position_rows[1], i)])
            });
            let sol = solve_milp_warm(&problem_k, cfg.gap_tol, 1, Some(&fixes));
            (sol.status, sol.objective)
        });
        let t = Instant::now();
        let pl = plan(&xs, &g, &obs, &dyn_, &cfg, prev.as_ref()).unwrap();
        eprintln!("k={k} warm_probe={warm_probe:?} nodes={} ms={:.0} p=({:.4},{:.4}) obj={:.2}", pl.nodes_explored, t.elapsed().as_secs_f64()*1e3, xs[0], xs[1], pl.objective);
        let u = pl.u_star.column(0).into_owned();
        prev = Some(pl);
        for _ in 0..20 { xs = &dstep.a * &xs + &dstep.b * &u; }
    }
}
