//! Scenario files: JSON description of robot, obstacles, start/goal and the
//! numeric parameters, validated into a ready-to-simulate [`Scenario`].

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{configuration_obstacle, ConfigObstacle, GeometryError, VPolytope, Vec2};
use crate::planner::DynamicsKind;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("field `{field}`: bad polygon: {source}")]
    Geometry {
        field: String,
        source: GeometryError,
    },
}

fn invalid(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Numeric parameters, all optional in the file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Planning horizon length (steps).
    pub np: usize,
    /// Planner sampling time (s).
    pub dt_p: f64,
    /// Terminal goal-deviation weight.
    pub alpha: f64,
    /// Running goal-deviation weight.
    pub beta: f64,
    /// Big-M constant of the obstacle disjunctions.
    pub big_m: f64,
    /// Planner clearance margin (m).
    pub eps_obs: f64,
    /// First-order CBF gain.
    pub k: f64,
    /// HOCBF gains.
    pub k1: f64,
    pub k2: f64,
    /// Extra safety distance added to every obstacle (m).
    pub d_safe: f64,
    /// Symmetric per-axis input bound.
    pub u_max: f64,
    /// Symmetric per-axis velocity bound (double integrator only).
    pub v_max: f64,
    /// Control sampling time (s).
    pub dt: f64,
    /// Simulation horizon (s).
    pub t_final: f64,
    /// Optional per-state [min, max] rows overriding the derived planner
    /// state box (workspace positions, velocity +/- v_max).
    pub state_bounds: Option<Vec<[f64; 2]>>,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            np: 10,
            dt_p: 0.2,
            alpha: 20.0,
            beta: 0.08,
            big_m: 20.0,
            eps_obs: 0.01,
            k: 3.0,
            k1: 2.0,
            k2: 10.0,
            d_safe: 0.0,
            u_max: 5.0,
            v_max: 5.0,
            dt: 0.01,
            t_final: 60.0,
            state_bounds: None,
        }
    }
}

/// On-disk scenario schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    /// Robot body vertices (CCW), relative to its reference point.
    pub robot: Vec<[f64; 2]>,
    /// One CCW vertex list per obstacle.
    pub obstacles: Vec<Vec<[f64; 2]>>,
    /// Start state: `[x, y]` or `[x, y, vx, vy]`.
    pub start: Vec<f64>,
    /// Goal position `[x, y]` (goal velocity is zero).
    pub goal: Vec<f64>,
    /// `"single"` or `"double"`.
    pub dynamics: String,
    /// `[[xmin, ymin], [xmax, ymax]]`; derived from the geometry if absent.
    #[serde(default)]
    pub workspace: Option<[[f64; 2]; 2]>,
    #[serde(default)]
    pub params: Params,
}

/// Validated scenario ready for the simulator.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub robot: VPolytope,
    pub obstacles: Vec<VPolytope>,
    /// One configuration obstacle per entry of `obstacles`, same order.
    pub config_obstacles: Vec<ConfigObstacle>,
    /// Full start state for the selected dynamics.
    pub start: DVector<f64>,
    /// Goal position.
    pub goal: Vec2,
    pub dynamics: DynamicsKind,
    pub workspace: (Vec2, Vec2),
    pub params: Params,
}

impl Scenario {
    pub fn n_states(&self) -> usize {
        match self.dynamics {
            DynamicsKind::SingleIntegrator => 2,
            DynamicsKind::DoubleIntegrator => 4,
        }
    }

    /// Full goal state (zero velocity for the double integrator).
    pub fn goal_state(&self) -> DVector<f64> {
        let mut g = DVector::zeros(self.n_states());
        g[0] = self.goal.x;
        g[1] = self.goal.y;
        g
    }
}

fn to_polytope(field: &str, verts: &[[f64; 2]]) -> Result<VPolytope, ScenarioError> {
    VPolytope::new(verts.iter().map(|v| Vec2::new(v[0], v[1])).collect()).map_err(|source| {
        ScenarioError::Geometry {
            field: field.to_string(),
            source,
        }
    })
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<Scenario, ScenarioError> {
        let p = &self.params;
        for (field, v) in [
            ("params.dt_p", p.dt_p),
            ("params.alpha", p.alpha),
            ("params.beta", p.beta),
            ("params.big_m", p.big_m),
            ("params.eps_obs", p.eps_obs),
            ("params.k", p.k),
            ("params.k1", p.k1),
            ("params.k2", p.k2),
            ("params.u_max", p.u_max),
            ("params.v_max", p.v_max),
            ("params.dt", p.dt),
            ("params.t_final", p.t_final),
        ] {
            if !(v > 0.0) && field != "params.eps_obs" {
                return Err(invalid(field, format!("must be positive, got {v}")));
            }
        }
        if p.eps_obs < 0.0 {
            return Err(invalid("params.eps_obs", "must be nonnegative"));
        }
        if p.d_safe < 0.0 {
            return Err(invalid("params.d_safe", "must be nonnegative"));
        }
        if p.np == 0 {
            return Err(invalid("params.np", "horizon must be at least 1"));
        }
        if let Some(bounds) = &p.state_bounds {
            for (i, [lo, hi]) in bounds.iter().enumerate() {
                if !(hi > lo) {
                    return Err(invalid(
                        "params.state_bounds",
                        format!("row {i}: max must exceed min, got [{lo}, {hi}]"),
                    ));
                }
            }
        }

        let dynamics = match self.dynamics.as_str() {
            "single" => DynamicsKind::SingleIntegrator,
            "double" => DynamicsKind::DoubleIntegrator,
            other => {
                return Err(invalid(
                    "dynamics",
                    format!("expected \"single\" or \"double\", got \"{other}\""),
                ))
            }
        };
        let n = match dynamics {
            DynamicsKind::SingleIntegrator => 2,
            DynamicsKind::DoubleIntegrator => 4,
        };

        let robot = to_polytope("robot", &self.robot)?;
        let mut obstacles = Vec::with_capacity(self.obstacles.len());
        for (j, verts) in self.obstacles.iter().enumerate() {
            obstacles.push(to_polytope(&format!("obstacles[{j}]"), verts)?);
        }

        let start = match self.start.len() {
            2 if n == 2 => DVector::from_column_slice(&self.start),
            2 if n == 4 => {
                DVector::from_column_slice(&[self.start[0], self.start[1], 0.0, 0.0])
            }
            4 if n == 4 => DVector::from_column_slice(&self.start),
            got => {
                return Err(invalid(
                    "start",
                    format!("expected 2 or {n} entries, got {got}"),
                ))
            }
        };
        if self.goal.len() != 2 {
            return Err(invalid(
                "goal",
                format!("expected 2 entries, got {}", self.goal.len()),
            ));
        }
        let goal = Vec2::new(self.goal[0], self.goal[1]);

        let workspace = match self.workspace {
            Some([[x0, y0], [x1, y1]]) => {
                if !(x1 > x0 && y1 > y0) {
                    return Err(invalid("workspace", "max corner must exceed min corner"));
                }
                (Vec2::new(x0, y0), Vec2::new(x1, y1))
            }
            None => {
                // bounding box of everything, padded by the robot radius plus one
                let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
                let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
                let mut grow = |v: Vec2| {
                    lo.x = lo.x.min(v.x);
                    lo.y = lo.y.min(v.y);
                    hi.x = hi.x.max(v.x);
                    hi.y = hi.y.max(v.y);
                };
                grow(Vec2::new(start[0], start[1]));
                grow(goal);
                for o in &obstacles {
                    let (a, b) = o.bounding_box();
                    grow(a);
                    grow(b);
                }
                let pad = robot.radius() + 1.0;
                (lo - Vec2::new(pad, pad), hi + Vec2::new(pad, pad))
            }
        };

        let p_start = Vec2::new(start[0], start[1]);
        for (label, pt) in [("start", p_start), ("goal", goal)] {
            if pt.x < workspace.0.x
                || pt.y < workspace.0.y
                || pt.x > workspace.1.x
                || pt.y > workspace.1.y
            {
                return Err(invalid(label, "outside the workspace"));
            }
        }

        let config_obstacles: Vec<ConfigObstacle> = obstacles
            .iter()
            .enumerate()
            .map(|(j, o)| configuration_obstacle(&robot, o, j))
            .collect();

        for co in &config_obstacles {
            if co.collides_at(p_start, -1e-9) {
                return Err(invalid(
                    "start",
                    format!("robot at the start overlaps obstacle {}", co.source()),
                ));
            }
        }

        // every big-M row the planner will build must be able to deactivate
        // anywhere in the workspace:
        // M >= b_r + eps_obs - min over the workspace of a_r . p
        for (j, o) in obstacles.iter().enumerate() {
            let h = crate::geometry::v_to_h(o);
            for (a, b0) in h.normals().iter().zip(h.offsets()) {
                let min_proj = a.x * if a.x > 0.0 { workspace.0.x } else { workspace.1.x }
                    + a.y * if a.y > 0.0 { workspace.0.y } else { workspace.1.y };
                let needed = b0 + p.eps_obs - min_proj;
                if p.big_m < needed {
                    return Err(invalid(
                        "params.big_m",
                        format!("too small for obstacle {j}: needs at least {needed:.3}"),
                    ));
                }
            }
        }

        Ok(Scenario {
            name: if self.name.is_empty() {
                "scenario".to_string()
            } else {
                self.name.clone()
            },
            robot,
            obstacles,
            config_obstacles,
            start,
            goal,
            dynamics,
            workspace,
            params: self.params.clone(),
        })
    }
}

pub fn load(path: impl AsRef<std::path::Path>) -> Result<Scenario, ScenarioError> {
    ScenarioFile::from_path(path)?.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> String {
        r#"{
            "name": "t",
            "robot": [[-0.1, -0.1], [0.1, -0.1], [0.1, 0.1], [-0.1, 0.1]],
            "obstacles": [[[2.0, 2.0], [3.0, 2.0], [3.0, 3.0], [2.0, 3.0]]],
            "start": [0.0, 0.0],
            "goal": [5.0, 5.0],
            "dynamics": "single"
        }"#
        .to_string()
    }

    #[test]
    fn round_trip_preserves_semantics() {
        let f = ScenarioFile::from_json(&minimal_json()).unwrap();
        let text = serde_json::to_string(&f).unwrap();
        let g = ScenarioFile::from_json(&text).unwrap();
        let a = f.validate().unwrap();
        let b = g.validate().unwrap();
        assert_eq!(a.start, b.start);
        assert_eq!(a.goal, b.goal);
        assert_eq!(a.params, b.params);
        assert_eq!(a.obstacles.len(), b.obstacles.len());
        assert_eq!(a.workspace, b.workspace);
    }

    #[test]
    fn defaults_applied() {
        let s = ScenarioFile::from_json(&minimal_json())
            .unwrap()
            .validate()
            .unwrap();
        assert_eq!(s.params, Params::default());
        assert_eq!(s.dynamics, DynamicsKind::SingleIntegrator);
        assert_eq!(s.n_states(), 2);
    }

    #[test]
    fn double_pads_velocity() {
        let json = minimal_json().replace("\"single\"", "\"double\"");
        let s = ScenarioFile::from_json(&json).unwrap().validate().unwrap();
        assert_eq!(s.start.len(), 4);
        assert_eq!(s.start[2], 0.0);
        assert_eq!(s.goal_state().len(), 4);
    }

    #[test]
    fn bad_dynamics_reports_field() {
        let json = minimal_json().replace("\"single\"", "\"triple\"");
        let err = ScenarioFile::from_json(&json).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("dynamics"), "{err}");
    }

    #[test]
    fn start_in_collision_rejected() {
        let json = minimal_json().replace("\"start\": [0.0, 0.0]", "\"start\": [2.5, 2.5]");
        let err = ScenarioFile::from_json(&json).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("start"), "{err}");
    }

    #[test]
    fn small_big_m_rejected() {
        let json = minimal_json().replace(
            "\"dynamics\": \"single\"",
            "\"dynamics\": \"single\", \"params\": {\"big_m\": 0.5}",
        );
        let err = ScenarioFile::from_json(&json).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("big_m"), "{err}");
    }

    #[test]
    fn unknown_field_rejected() {
        let json = minimal_json().replace("\"name\": \"t\"", "\"name\": \"t\", \"spin\": 1");
        assert!(ScenarioFile::from_json(&json).is_err());
    }
}
