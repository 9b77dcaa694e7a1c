//! Trajectory exports: per-step CSV, a JSON run summary and an SVG overlay
//! of task-space paths.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::controller::Target;
use crate::kinematics::Point2;
use crate::simulation::{Outcome, Scenario, TrajectoryLog};
use crate::Result;

/// Header of the trajectory CSV for an `n`-joint arm and `obstacles` obstacles.
pub fn csv_header(n: usize, obstacles: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("q{i}")));
    cols.extend((1..=n).map(|i| format!("u{i}")));
    cols.push("V".into());
    cols.push("delta".into());
    cols.extend((1..=obstacles).map(|i| format!("d_{i}")));
    cols.extend((1..=obstacles).map(|i| format!("h_{i}")));
    cols.push("status".into());
    cols.join(",")
}

/// One line per step record. Floats use Rust's shortest round-trip format.
pub fn trajectory_csv(log: &TrajectoryLog) -> String {
    let n = log.records.first().map_or(0, |r| r.q.len());
    let m = log.records.first().map_or(0, |r| r.d.len());
    let mut out = csv_header(n, m);
    out.push('\n');
    for r in &log.records {
        let mut fields: Vec<String> = vec![r.t.to_string()];
        fields.extend(r.q.iter().map(f64::to_string));
        fields.extend(r.u.iter().map(f64::to_string));
        fields.push(r.v.to_string());
        fields.push(r.delta.to_string());
        fields.extend(r.d.iter().map(f64::to_string));
        fields.extend(r.h.iter().map(f64::to_string));
        fields.push(r.status.name().to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: String,
    pub outcome: Outcome,
    pub time_to_reach: Option<f64>,
    pub path_length: f64,
    /// `None` when the scenario has no obstacles.
    pub min_raw_distance: Option<f64>,
    pub final_time: f64,
    pub steps: usize,
    pub infeasible_steps: usize,
}

impl RunSummary {
    pub fn from_log(log: &TrajectoryLog) -> Self {
        let d = log.min_raw_distance();
        Self {
            variant: log.variant.name().to_string(),
            outcome: log.outcome,
            time_to_reach: log.time_to_reach,
            path_length: log.path_length,
            min_raw_distance: d.is_finite().then_some(d),
            final_time: log.final_time(),
            steps: log.records.len(),
            infeasible_steps: log.infeasible_steps,
        }
    }
}

pub fn summary_json(log: &TrajectoryLog) -> Result<String> {
    Ok(serde_json::to_string_pretty(&RunSummary::from_log(log))?)
}

const SVG_SIZE: f64 = 600.0;
const SVG_PAD: f64 = 0.5;

const JOINT_COLORS: [&str; 6] = ["#1f77b4", "#2ca02c", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"];

struct Frame {
    lo: Point2,
    scale: f64,
}

impl Frame {
    fn map(&self, p: &Point2) -> (f64, f64) {
        let x = (p.x - self.lo.x) * self.scale;
        let y = SVG_SIZE - (p.y - self.lo.y) * self.scale;
        (x, y)
    }
}

fn polyline(frame: &Frame, pts: &[Point2], class: &str, color: &str, out: &mut String) {
    let coords: Vec<String> = pts
        .iter()
        .map(|p| {
            let (x, y) = frame.map(p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline class="{class}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
        coords.join(" ")
    );
}

fn circle(frame: &Frame, c: &Point2, r: f64, class: &str, style: &str, out: &mut String) {
    let (x, y) = frame.map(c);
    let _ = writeln!(out, r#"<circle class="{class}" cx="{x:.2}" cy="{y:.2}" r="{:.2}" {style}/>"#, r * frame.scale);
}

/// Task-space overlay: one polyline per joint frame and for the end
/// effector, one per obstacle centre path, the moving target path if any,
/// and the arm drawn at its initial and final configurations.
///
/// The view is the square around the arm's reach, so paths that leave the
/// workspace are clipped by the viewBox.
pub fn trajectory_svg(scenario: &Scenario, log: &TrajectoryLog) -> Result<String> {
    let arm = &scenario.arm;
    let half = arm.reach() + SVG_PAD;
    let frame = Frame { lo: Point2::new(-half, -half), scale: SVG_SIZE / (2.0 * half) };

    let poses = log.records.iter().map(|r| arm.forward_kinematics(&r.q)).collect::<Result<Vec<_>>>()?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" viewBox="0 0 {s} {s}">"#,
        s = SVG_SIZE
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    circle(&frame, &Point2::zeros(), arm.reach(), "workspace", r##"fill="none" stroke="#dddddd""##, &mut out);

    for (k, o) in scenario.env.obstacles.iter().enumerate() {
        let path: Vec<Point2> = log.records.iter().map(|r| o.center + o.velocity * r.t).collect();
        polyline(&frame, &path, &format!("obstacle obstacle-{}", k + 1), "#d62728", &mut out);
        if let Some(last) = path.last() {
            circle(&frame, last, o.radius, "obstacle-final", r##"fill="#d62728" fill-opacity="0.25""##, &mut out);
        }
    }
    if let Target::TaskPoint { point, velocity, radius } = &scenario.env.target {
        let path: Vec<Point2> = log.records.iter().map(|r| point + velocity * r.t).collect();
        polyline(&frame, &path, "target", "#ff7f0e", &mut out);
        if let Some(last) = path.last() {
            circle(&frame, last, radius.max(0.02), "target-final", r##"fill="#ff7f0e" fill-opacity="0.25""##, &mut out);
        }
    }

    let n = arm.dof();
    for j in 1..=n {
        let path: Vec<Point2> = poses.iter().map(|p| p.joint_positions[j]).collect();
        let class = if j == n { "end-effector".to_string() } else { format!("joint joint-{j}") };
        polyline(&frame, &path, &class, JOINT_COLORS[(j - 1) % JOINT_COLORS.len()], &mut out);
    }
    for (pose, class) in [(poses.first(), "arm-initial"), (poses.last(), "arm-final")] {
        if let Some(pose) = pose {
            let (color, width) = if class == "arm-initial" { ("#aaaaaa", 3.0) } else { ("#000000", 3.0) };
            let coords: Vec<String> = pose
                .joint_positions
                .iter()
                .map(|p| {
                    let (x, y) = frame.map(p);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline class="{class}" fill="none" stroke="{color}" stroke-width="{width}" points="{}"/>"#,
                coords.join(" ")
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}
