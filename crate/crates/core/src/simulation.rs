//! Euler rollouts of the single-integrator arm and outcome classification.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::controller::{
    ClfMode, Controller, ControllerVariant, EnvironmentState, Obstacle, Target, VariantTag,
};
use crate::distance::sdf_eval;
use crate::kinematics::{JointConfig, PlanarArm, Point2};
use crate::qp::QpStatus;
use crate::{Error, Result, DEFAULT_DT, DEFAULT_T_MAX};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub arm: PlanarArm,
    pub initial_q: JointConfig,
    pub env: EnvironmentState,
    pub dt: f64,
    pub t_max: f64,
    pub variant: ControllerVariant,
    /// Reach tolerance (rad) for the success test.
    pub success_tolerance: f64,
}

impl Scenario {
    pub fn new(arm: PlanarArm, initial_q: JointConfig, env: EnvironmentState, variant: ControllerVariant) -> Self {
        let success_tolerance = variant.eps_clf;
        Self { arm, initial_q, env, dt: DEFAULT_DT, t_max: DEFAULT_T_MAX, variant, success_tolerance }
    }

    /// Same scenario with another controller variant (margins kept).
    pub fn with_tag(&self, tag: VariantTag) -> Self {
        let mut s = self.clone();
        s.variant.tag = tag;
        s.variant.clf_mode = match s.env.target {
            Target::JointGoal(_) => ClfMode::JointGoal,
            Target::TaskPoint { .. } => ClfMode::CdfTarget,
        };
        s
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.arm.dof();
        self.arm.check_dim(&self.initial_q)?;
        self.env.validate(n)?;
        self.variant.validate(n)?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidScenario(format!("dt {} must be positive", self.dt)));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidScenario(format!("t_max {} must be nonnegative", self.t_max)));
        }
        if !(self.success_tolerance >= 0.0) {
            return Err(Error::InvalidScenario("success tolerance must be nonnegative".into()));
        }
        if !self.arm.within_limits(&self.initial_q) {
            return Err(Error::InvalidScenario("initial configuration violates joint limits".into()));
        }
        let mode_ok = matches!(
            (&self.env.target, self.variant.clf_mode),
            (Target::JointGoal(_), ClfMode::JointGoal) | (Target::TaskPoint { .. }, ClfMode::CdfTarget)
        );
        if !mode_ok {
            return Err(Error::InvalidScenario("target type does not match the variant's goal mode".into()));
        }
        Ok(())
    }

    /// First obstacle overlapping the arm at `t = 0`, with its distance.
    pub fn initial_collision(&self) -> Result<Option<(usize, f64)>> {
        for (i, o) in self.env.obstacles.iter().enumerate() {
            let d = sdf_eval(&self.arm, &self.initial_q, &o.center, o.radius)?.d;
            if d < 0.0 {
                return Ok(Some((i, d)));
            }
        }
        Ok(None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Collision,
    Timeout,
    InfeasibleStall,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Collision => "collision",
            Outcome::Timeout => "timeout",
            Outcome::InfeasibleStall => "infeasible_stall",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Optimal,
    Infeasible,
    /// Last record of a rollout; carries no command.
    Terminal,
}

impl StepStatus {
    pub fn name(self) -> &'static str {
        match self {
            StepStatus::Optimal => "optimal",
            StepStatus::Infeasible => "infeasible",
            StepStatus::Terminal => "terminal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub q: Vec<f64>,
    pub u: Vec<f64>,
    pub v: f64,
    /// Joint error norm or target configuration distance (rad).
    pub goal_distance: f64,
    pub delta: f64,
    /// Raw signed distance per obstacle (m).
    pub d: Vec<f64>,
    /// Margined barrier value per obstacle on the controller's field.
    pub h: Vec<f64>,
    pub status: StepStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub variant: VariantTag,
    pub records: Vec<StepRecord>,
    pub outcome: Outcome,
    /// Time of the success record; `None` for failures.
    pub time_to_reach: Option<f64>,
    pub path_length: f64,
    pub infeasible_steps: usize,
    pub unreachable_events: usize,
}

impl TrajectoryLog {
    pub fn success(&self) -> bool {
        self.outcome == Outcome::Success
    }

    pub fn final_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }

    /// Smallest raw obstacle distance over the rollout (`+∞` without obstacles).
    pub fn min_raw_distance(&self) -> f64 {
        self.records.iter().flat_map(|r| r.d.iter().copied()).fold(f64::INFINITY, f64::min)
    }

    pub fn min_barrier(&self) -> f64 {
        self.records.iter().flat_map(|r| r.h.iter().copied()).fold(f64::INFINITY, f64::min)
    }

    pub fn v_trace(&self) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t, r.v)).collect()
    }

    /// Final distance to the goal as measured by the success test.
    pub fn final_goal_distance(&self) -> Option<f64> {
        self.records.last().map(|r| r.goal_distance)
    }
}

/// Summed norm of stacked joint-position displacements between records.
pub fn path_length(arm: &PlanarArm, qs: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    let mut prev: Option<Vec<Point2>> = None;
    for q in qs {
        let pose = arm.forward_kinematics(q)?;
        let pts = pose.joint_positions[1..].to_vec();
        if let Some(p) = &prev {
            let sq: f64 = p.iter().zip(&pts).map(|(a, b)| (b - a).norm_squared()).sum();
            total += sq.sqrt();
        }
        prev = Some(pts);
    }
    Ok(total)
}

/// Explicit-Euler rollout.
///
/// Each step evaluates the controller, then terminates on the first of
/// collision (raw distance < 0), success, or `t > t_max`. Otherwise the
/// command is applied with clamping to the joint limits and the
/// environment advances at constant velocity.
pub fn simulate(scenario: &Scenario) -> Result<TrajectoryLog> {
    scenario.validate()?;
    if let Some((obstacle, distance)) = scenario.initial_collision()? {
        return Err(Error::InitialCollision { obstacle, distance });
    }
    let arm = &scenario.arm;
    let n = arm.dof();
    let mut controller = Controller::new(scenario.variant.clone());
    let mut q = scenario.initial_q.0.clone();
    let mut env = scenario.env.clone();
    let mut records = Vec::new();
    let mut infeasible_steps = 0;
    let mut unreachable_events = 0;
    let mut k: usize = 0;
    let outcome = loop {
        let t = k as f64 * scenario.dt;
        let out = controller.step(arm, &q, &env)?;
        let diag = &out.diagnostics;
        let terminal = if diag.sdf.iter().any(|d| *d < 0.0) {
            Some(Outcome::Collision)
        } else if diag.goal_distance <= scenario.success_tolerance {
            Some(Outcome::Success)
        } else if t > scenario.t_max + 1e-9 {
            Some(if 2 * infeasible_steps >= k.max(1) { Outcome::InfeasibleStall } else { Outcome::Timeout })
        } else {
            None
        };
        let mut record = StepRecord {
            t,
            q: q.clone(),
            u: out.u.clone(),
            v: diag.v,
            goal_distance: diag.goal_distance,
            delta: diag.delta,
            d: diag.sdf.clone(),
            h: diag.h.clone(),
            status: match diag.status {
                QpStatus::Optimal => StepStatus::Optimal,
                QpStatus::Infeasible => StepStatus::Infeasible,
            },
        };
        if let Some(o) = terminal {
            record.u = vec![0.0; n];
            record.delta = 0.0;
            record.status = StepStatus::Terminal;
            records.push(record);
            break o;
        }
        if diag.status == QpStatus::Infeasible {
            infeasible_steps += 1;
        }
        if diag.target_unreachable || !diag.unreachable_obstacles.is_empty() {
            unreachable_events += 1;
        }
        records.push(record);
        let next: Vec<f64> = q.iter().zip(&out.u).map(|(qi, ui)| qi + scenario.dt * ui).collect();
        q = arm.clamp(&next).0;
        env.advance(scenario.dt);
        k += 1;
    };
    let qs: Vec<Vec<f64>> = records.iter().map(|r| r.q.clone()).collect();
    let time_to_reach = (outcome == Outcome::Success).then(|| records.last().map_or(0.0, |r| r.t));
    Ok(TrajectoryLog {
        variant: scenario.variant.tag,
        path_length: path_length(arm, &qs)?,
        records,
        outcome,
        time_to_reach,
        infeasible_steps,
        unreachable_events,
    })
}

/// Start and goal of the planar reaching experiments.
pub const PLANAR_START: [f64; 2] = [2.5, 0.5];
pub const PLANAR_GOAL: [f64; 2] = [-2.7, 0.5];
/// Obstacle radius used by the planar experiments (m).
pub const PLANAR_OBSTACLE_RADIUS: f64 = 0.3;

/// Single obstacle rising from `(2.4, −2.4)` at `speed` m/s toward the arm.
pub fn crossing_scenario(tag: VariantTag, speed: f64) -> Scenario {
    let env = EnvironmentState {
        obstacles: vec![Obstacle::new(Point2::new(2.4, -2.4), PLANAR_OBSTACLE_RADIUS, Point2::new(0.0, speed))],
        target: Target::JointGoal(PLANAR_GOAL.into()),
    };
    Scenario::new(PlanarArm::two_link(), PLANAR_START.into(), env, ControllerVariant::new(tag))
}

/// Configuration of the whole-body reaching demo.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    pub initial_q: JointConfig,
    pub target: Point2,
    pub target_velocity: Point2,
    pub target_radius: f64,
    /// Third obstacle start position (its velocity is fixed).
    pub third_obstacle: Point2,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            initial_q: vec![1.5, 1.0].into(),
            target: Point2::new(2.2, 2.3),
            target_velocity: Point2::new(0.0, -0.8),
            target_radius: PLANAR_OBSTACLE_RADIUS,
            third_obstacle: Point2::new(-4.0, 0.75),
        }
    }
}

pub fn demo_scenario(cfg: &DemoConfig) -> Scenario {
    let r = PLANAR_OBSTACLE_RADIUS;
    let env = EnvironmentState {
        obstacles: vec![
            Obstacle::new(Point2::new(1.9, -2.45), r, Point2::new(0.0, 1.8)),
            Obstacle::new(Point2::new(2.4, 2.4), r, Point2::new(-1.5, 0.0)),
            Obstacle::new(cfg.third_obstacle, r, Point2::new(1.5, 0.0)),
        ],
        target: Target::TaskPoint { point: cfg.target, velocity: cfg.target_velocity, radius: cfg.target_radius },
    };
    Scenario::new(
        PlanarArm::two_link(),
        cfg.initial_q.clone(),
        env,
        ControllerVariant::new(VariantTag::CdfTvcbfTvclf),
    )
}

/// Runs the moving-target reaching demo with three moving obstacles.
pub fn reaching_demo() -> Result<TrajectoryLog> {
    simulate(&demo_scenario(&DemoConfig::default()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_scenario(tag: VariantTag) -> Scenario {
        let env = EnvironmentState { obstacles: vec![], target: Target::JointGoal(PLANAR_GOAL.into()) };
        Scenario::new(PlanarArm::two_link(), PLANAR_START.into(), env, ControllerVariant::new(tag))
    }

    #[test]
    fn unobstructed_reach_is_velocity_limited() {
        let log = simulate(&free_scenario(VariantTag::CdfTvcbf)).unwrap();
        assert_eq!(log.outcome, Outcome::Success);
        let t = log.time_to_reach.unwrap();
        // 5.2 rad at the 2 rad/s limit, then a short exponential tail once
        // the goal row no longer saturates the command.
        let saturated = (2.5 - -2.7) / 2.0;
        assert!(t >= saturated - 1e-9 && t <= saturated + 0.4, "t = {t}");
        let last = log.records.last().unwrap();
        assert_eq!(last.status, StepStatus::Terminal);
        assert!(last.u.iter().all(|u| *u == 0.0));
        for w in log.records.windows(2) {
            assert!((w[1].t - w[0].t - 0.1).abs() < 1e-9);
        }
    }

    #[test]
    fn initial_overlap_is_rejected() {
        let mut s = free_scenario(VariantTag::SdfTvcbf);
        // Link 1 spans (0,0)→2·(cos 2.5, sin 2.5).
        let mid = Point2::new(2.5f64.cos(), 2.5f64.sin());
        s.env.obstacles.push(Obstacle::new(mid, 0.3, Point2::zeros()));
        assert!(matches!(simulate(&s), Err(Error::InitialCollision { obstacle: 0, .. })));
    }

    #[test]
    fn rollouts_are_deterministic() {
        let s = crossing_scenario(VariantTag::CdfTvcbf, 2.5);
        assert_eq!(simulate(&s).unwrap(), simulate(&s).unwrap());
    }

    #[test]
    fn zero_horizon_times_out_immediately() {
        let mut s = free_scenario(VariantTag::SdfTvcbf);
        s.t_max = 0.0;
        let log = simulate(&s).unwrap();
        assert_eq!(log.records.len(), 2);
        assert_eq!(log.outcome, Outcome::Timeout);
        assert!(log.time_to_reach.is_none());
    }

    #[test]
    fn path_length_of_pure_rotation() {
        let arm = PlanarArm::two_link();
        // Rotating q1 by a small angle moves joint 2 by ≈ 2θ and the tip by ≈ 4θ.
        let th = 1e-4;
        let l = path_length(&arm, &[vec![0.0, 0.0], vec![th, 0.0]]).unwrap();
        assert!((l - th * 20f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn mismatched_goal_mode_is_rejected() {
        let mut s = free_scenario(VariantTag::CdfTvcbf);
        s.variant.clf_mode = ClfMode::CdfTarget;
        assert!(matches!(simulate(&s), Err(Error::InvalidScenario(_))));
    }
}
