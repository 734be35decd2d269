use nalgebra::DVector;
use polynav::planner::*;
use std::time::Instant;

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
        gap_tol: 40.0, node_limit: 50_000, prune_reachability: true, patience: 25, explore: false,
    };
    let obs: Vec<_> = s.obstacles.iter().map(polynav::geometry::v_to_h).collect();
    let mut x = s.start.clone();
    let g = s.goal_state();
    let mut prev: Option<NominalPlan> = None;
    let dstep = discretize(s.dynamics, 0.01);
    let t0 = Instant::now();
    for k in 0..60 {
        let t = Instant::now();
        match plan(&x, &g, &obs, &dyn_, &cfg, prev.as_ref()) {
            Ok(pl) => {
                let nb = pl.binaries.len();
                eprintln!("k={k:3} nodes={:6} bins={nb:3} ms={:.1} p=({:.2},{:.2})", pl.nodes_explored, t.elapsed().as_secs_f64()*1e3, x[0], x[1]);
                let u = pl.u_star.column(0).into_owned();
                prev = Some(pl);
                for _ in 0..20 { x = &dstep.a * &x + &dstep.b * &u; }
            }
            Err(e) => { eprintln!("k={k:3} ERR {e:?}"); prev = None; }
        }
        if (x[0] - g[0]).abs() + (x[1] - g[1]).abs() < 0.1 { eprintln!("reached at k={k}"); break; }
    }
    eprintln!("total: {:.1}s", t0.elapsed().as_secs_f64());
}
