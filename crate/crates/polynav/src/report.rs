//! Run artifacts: CSV trajectory logs, JSON metric summaries and SVG
//! figures. Everything is emitted deterministically (fixed column order,
//! shortest round-trip float formatting), so repeated runs of the same
//! scenario diff clean.

use std::fmt::Write as _;

use serde::Serialize;

use crate::geometry::Vec2;
use crate::scenario::Scenario;
use crate::sim::SimResult;

/// CSV log of one run: header `t,x_1..x_n,u_ref_1,u_ref_2,u_star_1,
/// u_star_2,h_1..h_K`, then one row per logged sample (the last row is the
/// terminal state with zero input).
pub fn csv_string(result: &SimResult) -> String {
    let n = result.records.first().map_or(0, |r| r.x.len());
    let k = result.records.first().map_or(0, |r| r.h.len());
    let mut out = String::new();
    out.push('t');
    for i in 1..=n {
        let _ = write!(out, ",x_{i}");
    }
    for i in 1..=2 {
        let _ = write!(out, ",u_ref_{i}");
    }
    for i in 1..=2 {
        let _ = write!(out, ",u_star_{i}");
    }
    for i in 1..=k {
        let _ = write!(out, ",h_{i}");
    }
    out.push('\n');
    for r in &result.records {
        let _ = write!(out, "{}", r.t);
        for v in r.x.iter() {
            let _ = write!(out, ",{v}");
        }
        for v in r.u_ref.iter() {
            let _ = write!(out, ",{v}");
        }
        for v in r.u.iter() {
            let _ = write!(out, ",{v}");
        }
        for v in &r.h {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// JSON-serializable run summary.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub controller: String,
    pub reached: bool,
    pub t_reach: Option<f64>,
    /// Worst signed clearance; absent when the scenario has no obstacles.
    pub min_h: Option<f64>,
    pub intervention_time: f64,
    pub fault_count: usize,
    pub stalled: bool,
    pub steps: usize,
}

impl Summary {
    pub fn of(result: &SimResult) -> Self {
        let m = &result.metrics;
        Self {
            scenario: result.scenario_name.clone(),
            controller: result.controller.label().to_string(),
            reached: m.reached,
            t_reach: m.t_reach,
            min_h: m.min_h.is_finite().then_some(m.min_h),
            intervention_time: m.intervention_time,
            fault_count: m.fault_count,
            stalled: m.stalled,
            steps: result.records.len().saturating_sub(1),
        }
    }
}

pub fn summary_json(result: &SimResult) -> String {
    let mut s = serde_json::to_string_pretty(&Summary::of(result)).expect("summary serializes");
    s.push('\n');
    s
}

/// Plain-text comparison table across controllers of the same scenario.
pub fn comparison_table(results: &[SimResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>8} {:>9} {:>12} {:>8} {:>14}",
        "controller", "reached", "t_reach", "min_h", "stalled", "intervention_s"
    );
    for r in results {
        let m = &r.metrics;
        let t_reach = m.t_reach.map_or("-".to_string(), |t| format!("{t:.2}"));
        let min_h = if m.min_h.is_finite() {
            format!("{:.4}", m.min_h)
        } else {
            "-".to_string()
        };
        let _ = writeln!(
            out,
            "{:<14} {:>8} {:>9} {:>12} {:>8} {:>14.2}",
            r.controller.label(),
            m.reached,
            t_reach,
            min_h,
            m.stalled,
            m.intervention_time
        );
    }
    out
}

struct Frame {
    lo: Vec2,
    scale: f64,
    height: f64,
    width: f64,
}

impl Frame {
    fn new(scenario: &Scenario) -> Self {
        let (lo, hi) = scenario.workspace;
        let span = hi - lo;
        let scale = 760.0 / span.x.max(span.y);
        Self {
            lo,
            scale,
            width: span.x * scale + 40.0,
            height: span.y * scale + 40.0,
        }
    }

    /// World to SVG coordinates (y flips: SVG grows downward).
    fn map(&self, p: Vec2) -> (f64, f64) {
        (
            20.0 + (p.x - self.lo.x) * self.scale,
            self.height - 20.0 - (p.y - self.lo.y) * self.scale,
        )
    }

    fn points_attr(&self, pts: impl Iterator<Item = Vec2>) -> String {
        let mut s = String::new();
        for p in pts {
            let (x, y) = self.map(p);
            let _ = write!(s, "{x:.2},{y:.2} ");
        }
        s.trim_end().to_string()
    }
}

const TRAJECTORY_COLORS: [&str; 3] = ["#1f6feb", "#d1242f", "#8250df"];

/// SVG figure: workspace frame, obstacles (gray), configuration-obstacle
/// outlines (dashed), one trajectory polyline per result with intervention
/// segments highlighted in green, start/goal markers and a legend.
pub fn svg_figure(scenario: &Scenario, results: &[&SimResult]) -> String {
    let f = Frame::new(scenario);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.2} {:.2}">"#,
        f.width, f.height, f.width, f.height
    );
    let _ = writeln!(
        out,
        r#"  <rect width="{:.2}" height="{:.2}" fill="white"/>"#,
        f.width, f.height
    );
    let (wx, wy) = f.map(Vec2::new(scenario.workspace.0.x, scenario.workspace.1.y));
    let span = scenario.workspace.1 - scenario.workspace.0;
    let _ = writeln!(
        out,
        r##"  <rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444" stroke-width="1"/>"##,
        wx,
        wy,
        span.x * f.scale,
        span.y * f.scale
    );
    for o in &scenario.obstacles {
        let _ = writeln!(
            out,
            r##"  <polygon points="{}" fill="#9e9e9e" stroke="#616161" stroke-width="1"/>"##,
            f.points_attr(o.vertices().iter().copied())
        );
    }
    for co in &scenario.config_obstacles {
        let _ = writeln!(
            out,
            r##"  <polygon points="{}" fill="none" stroke="#616161" stroke-width="1" stroke-dasharray="5,4"/>"##,
            f.points_attr(co.shape0().vertices().iter().copied())
        );
    }
    for (idx, result) in results.iter().enumerate() {
        let color = TRAJECTORY_COLORS[idx % TRAJECTORY_COLORS.len()];
        let pts: Vec<Vec2> = result
            .records
            .iter()
            .map(|r| Vec2::new(r.x[0], r.x[1]))
            .collect();
        let _ = writeln!(
            out,
            r#"  <polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            f.points_attr(pts.iter().copied()),
            color
        );
        // green overdraw where the filter altered the nominal input
        for w in result.records.windows(2) {
            if w[0].intervened {
                let (x0, y0) = f.map(Vec2::new(w[0].x[0], w[0].x[1]));
                let (x1, y1) = f.map(Vec2::new(w[1].x[0], w[1].x[1]));
                let _ = writeln!(
                    out,
                    r##"  <line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke="#2da44e" stroke-width="3"/>"##
                );
            }
        }
        let _ = writeln!(
            out,
            r#"  <text x="{:.2}" y="{:.2}" font-family="monospace" font-size="12" fill="{}">{}</text>"#,
            26.0,
            18.0 + 14.0 * idx as f64,
            color,
            result.controller.label()
        );
    }
    if let Some(first) = results.first() {
        let x0 = &first.records[0].x;
        let (sx, sy) = f.map(Vec2::new(x0[0], x0[1]));
        let _ = writeln!(
            out,
            r##"  <circle cx="{sx:.2}" cy="{sy:.2}" r="4" fill="#1a7f37"/>"##
        );
    }
    let (gx, gy) = f.map(scenario.goal);
    let _ = writeln!(
        out,
        r##"  <circle cx="{gx:.2}" cy="{gy:.2}" r="4" fill="none" stroke="#cf222e" stroke-width="2"/>"##
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioFile;
    use crate::sim::{run, Controller, SimConfig};

    fn tiny_result() -> (Scenario, SimResult) {
        let json = r#"{
            "name": "tiny",
            "robot": [[-0.1, -0.1], [0.1, -0.1], [0.1, 0.1], [-0.1, 0.1]],
            "obstacles": [[[2.0, 1.5], [3.0, 1.5], [3.0, 2.5], [2.0, 2.5]]],
            "start": [0.0, 0.0],
            "goal": [1.0, 0.0],
            "dynamics": "single",
            "workspace": [[-1.0, -1.0], [4.0, 3.0]]
        }"#;
        let s = ScenarioFile::from_json(json).unwrap().validate().unwrap();
        let cfg = SimConfig {
            t_final: 2.0,
            ..SimConfig::default()
        };
        let r = run(&s, Controller::MilpMpcCbf, &cfg).unwrap();
        (s, r)
    }

    #[test]
    fn csv_shape_matches_log() {
        let (_, r) = tiny_result();
        let csv = csv_string(&r);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), r.records.len() + 1);
        let cols = lines[0].split(',').count();
        assert_eq!(cols, 1 + 2 + 2 + 2 + 1); // t, x, u_ref, u_star, h_1
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), cols);
        }
    }

    #[test]
    fn csv_is_reproducible() {
        let (_, r1) = tiny_result();
        let (_, r2) = tiny_result();
        assert_eq!(csv_string(&r1), csv_string(&r2));
    }

    #[test]
    fn summary_serializes_metrics() {
        let (_, r) = tiny_result();
        let json = summary_json(&r);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["scenario"], "tiny");
        assert_eq!(v["controller"], "milp-mpc-cbf");
        assert_eq!(v["reached"], r.metrics.reached);
        assert!(v["min_h"].is_number());
    }

    #[test]
    fn svg_contains_expected_elements() {
        let (s, r) = tiny_result();
        let svg = svg_figure(&s, &[&r]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<polygon")); // obstacle + CO outline
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("<polyline"));
        assert_eq!(svg.matches("<polygon").count(), 2);
    }

    #[test]
    fn comparison_table_lists_all_controllers() {
        let (_, r) = tiny_result();
        let table = comparison_table(std::slice::from_ref(&r));
        assert!(table.contains("milp-mpc-cbf"));
        assert!(table.lines().count() >= 2);
    }
}
