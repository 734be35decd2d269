//! Safe navigation for a translating convex polytopic robot among convex
//! polytopic obstacles.
//!
//! The stack is hierarchical: a mixed-binary MPC plans a nominal input over
//! a coarse horizon, and a min-norm safety filter built on polytopic control
//! barrier functions corrects that input at a fast rate. The crate ships the
//! geometry kernel (configuration obstacles, distances, barrier
//! derivatives), the in-crate LP/MILP and QP solvers, the planner, the
//! filter and a multi-rate closed-loop simulator, plus scenario loading and
//! CSV/JSON/SVG reporting.
//!
//! Start with the runnable programs under `examples/`.

pub mod cbf;
pub mod filter;
pub mod geometry;
pub mod milp;
pub mod oracles;
pub mod planner;
pub mod qp;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod verify;

pub use cbf::{barrier, first_order_constraint, hocbf_constraint, psi1, solve_min_dist};
pub use filter::{clf_cbf_baseline, filter, FilterConfig, FilterResult, FilterStatus};
pub use geometry::{configuration_obstacle, HPolytope, VPolytope, Vec2};
pub use milp::{solve_lp, solve_milp, MilpProblem, MilpSolution, SolveStatus};
pub use planner::{discretize, greedy_fallback, plan, DynamicsKind, NominalPlan, PlannerConfig};
pub use qp::{solve_qp, DenseQp, QpSolution, QpStatus};
pub use report::{comparison_table, csv_string, summary_json, svg_figure, Summary};
pub use scenario::{Params, Scenario, ScenarioFile};
pub use sim::{run, Controller, Metrics, SimConfig, SimResult};
