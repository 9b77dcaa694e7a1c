//! Per-step QP assembly for each controller variant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constraints::{baseline_row, joint_limit_rows, tvcbf_row, tvclf_row, BaselineKind, ClassK, ConstraintRow};
use crate::distance::{cdf_eval_disc, cdf_eval_disc_no_grad_p, sdf_eval, CdfSettings};
use crate::kinematics::{JointConfig, PlanarArm, Point2};
use crate::qp::{solve_warm, ConstraintId, QpProblem, QpStatus};
use crate::{Error, Result, DEFAULT_ALPHA_LIMIT, DEFAULT_EPS_CBF, DEFAULT_EPS_CLF};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantTag {
    CdfTvcbfTvclf,
    CdfTvcbf,
    SdfTvcbf,
    SdfCbfBaseline,
    SdfShBaseline,
    CdfShBaseline,
}

/// Which distance field the barrier rows are built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Sdf,
    Cdf,
}

impl VariantTag {
    pub const ALL: [VariantTag; 6] = [
        VariantTag::CdfTvcbfTvclf,
        VariantTag::CdfTvcbf,
        VariantTag::SdfTvcbf,
        VariantTag::SdfCbfBaseline,
        VariantTag::SdfShBaseline,
        VariantTag::CdfShBaseline,
    ];

    /// The five variants compared on the randomized benchmark.
    pub const BENCHMARK: [VariantTag; 5] = [
        VariantTag::CdfTvcbf,
        VariantTag::SdfTvcbf,
        VariantTag::SdfCbfBaseline,
        VariantTag::SdfShBaseline,
        VariantTag::CdfShBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VariantTag::CdfTvcbfTvclf => "cdf_tvcbf_tvclf",
            VariantTag::CdfTvcbf => "cdf_tvcbf",
            VariantTag::SdfTvcbf => "sdf_tvcbf",
            VariantTag::SdfCbfBaseline => "sdf_cbf_baseline",
            VariantTag::SdfShBaseline => "sdf_sh_baseline",
            VariantTag::CdfShBaseline => "cdf_sh_baseline",
        }
    }

    /// Display label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            VariantTag::CdfTvcbfTvclf => "CDF-TVCBF-TVCLF-QP",
            VariantTag::CdfTvcbf => "CDF-TVCBF-QP",
            VariantTag::SdfTvcbf => "SDF-TVCBF-QP",
            VariantTag::SdfCbfBaseline => "SDF-CBF-QP",
            VariantTag::SdfShBaseline => "SDF-SH-QP",
            VariantTag::CdfShBaseline => "CDF-SH-QP",
        }
    }

    pub fn field(self) -> Field {
        match self {
            VariantTag::SdfTvcbf | VariantTag::SdfCbfBaseline | VariantTag::SdfShBaseline => Field::Sdf,
            _ => Field::Cdf,
        }
    }

    pub fn time_varying(self) -> bool {
        matches!(self, VariantTag::CdfTvcbfTvclf | VariantTag::CdfTvcbf | VariantTag::SdfTvcbf)
    }

    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            VariantTag::SdfCbfBaseline => Some(BaselineKind::SdfCbf),
            VariantTag::SdfShBaseline => Some(BaselineKind::SdfSh),
            VariantTag::CdfShBaseline => Some(BaselineKind::CdfSh),
            _ => None,
        }
    }

    pub fn default_clf_mode(self) -> ClfMode {
        match self {
            VariantTag::CdfTvcbfTvclf => ClfMode::CdfTarget,
            _ => ClfMode::JointGoal,
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|t| t.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for VariantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariantTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|t| t.name() == key || t.label().to_ascii_lowercase().replace('-', "_") == key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant {s:?}; valid: {}", Self::valid_names())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClfMode {
    /// `V = ‖q − q_goal‖` toward a fixed joint configuration.
    JointGoal,
    /// `V = d_c(p_g, q) − ε_CLF` toward a (moving) task-space target.
    CdfTarget,
}

/// Controller configuration: variant, QP weights, class-K slopes and margins.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerVariant {
    pub tag: VariantTag,
    pub clf_mode: ClfMode,
    /// Diagonal of `R`; empty means identity.
    pub r_diag: Vec<f64>,
    pub p: f64,
    /// Decay slope for the task-target Lyapunov row.
    pub gamma: ClassK,
    /// Decay slope for the joint-goal Lyapunov row.
    pub gamma_goal: ClassK,
    pub alpha: ClassK,
    pub alpha_min: ClassK,
    pub alpha_max: ClassK,
    pub eps_cbf: f64,
    pub eps_clf: f64,
    pub cdf: CdfSettings,
}

impl ControllerVariant {
    pub fn new(tag: VariantTag) -> Self {
        Self {
            tag,
            clf_mode: tag.default_clf_mode(),
            r_diag: Vec::new(),
            p: 10.0,
            gamma: ClassK::default(),
            gamma_goal: ClassK::new(10.0).expect("positive slope"),
            alpha: ClassK::default(),
            alpha_min: ClassK::new(DEFAULT_ALPHA_LIMIT).expect("positive slope"),
            alpha_max: ClassK::new(DEFAULT_ALPHA_LIMIT).expect("positive slope"),
            eps_cbf: DEFAULT_EPS_CBF,
            eps_clf: DEFAULT_EPS_CLF,
            cdf: CdfSettings::default(),
        }
    }

    pub fn validate(&self, dof: usize) -> Result<()> {
        if !(self.eps_cbf >= 0.0 && self.eps_clf >= 0.0) {
            return Err(Error::InvalidArgument("margins must be nonnegative".into()));
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::InvalidArgument("relaxation weight p must be positive".into()));
        }
        if !self.r_diag.is_empty() && self.r_diag.len() != dof {
            return Err(Error::DimensionMismatch { expected: dof, got: self.r_diag.len() });
        }
        if self.r_diag.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidArgument("R must have positive diagonal entries".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Point2,
    pub radius: f64,
    pub velocity: Point2,
}

impl Obstacle {
    pub fn new(center: Point2, radius: f64, velocity: Point2) -> Self {
        Self { center, radius, velocity }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Target {
    JointGoal(JointConfig),
    /// Task-space object to reach with any part of the arm. A positive
    /// radius makes it a disc.
    TaskPoint { point: Point2, velocity: Point2, radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentState {
    pub obstacles: Vec<Obstacle>,
    pub target: Target,
}

impl EnvironmentState {
    pub fn validate(&self, dof: usize) -> Result<()> {
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.radius > 0.0 && o.radius.is_finite()) {
                return Err(Error::InvalidArgument(format!("obstacle {i} radius must be positive")));
            }
            if !(o.center.iter().chain(o.velocity.iter()).all(|v| v.is_finite())) {
                return Err(Error::InvalidArgument(format!("obstacle {i} is not finite")));
            }
        }
        match &self.target {
            Target::JointGoal(g) if g.len() != dof => Err(Error::DimensionMismatch { expected: dof, got: g.len() }),
            Target::TaskPoint { radius, .. } if !(*radius >= 0.0) => {
                Err(Error::InvalidArgument("target radius must be nonnegative".into()))
            }
            _ => Ok(()),
        }
    }

    /// Constant-velocity motion of obstacles and task-space target.
    pub fn advance(&mut self, dt: f64) {
        for o in &mut self.obstacles {
            o.center += o.velocity * dt;
        }
        if let Target::TaskPoint { point, velocity, .. } = &mut self.target {
            *point += *velocity * dt;
        }
    }

    /// State after `t` seconds of constant-velocity motion.
    pub fn at_time(&self, t: f64) -> Self {
        let mut s = self.clone();
        s.advance(t);
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    /// Lyapunov value (0 when the goal row is dropped at the target).
    pub v: f64,
    pub delta: f64,
    /// Raw signed distances from each obstacle to the arm (m).
    pub sdf: Vec<f64>,
    /// Margined barrier values on the variant's field; `+∞` for an obstacle
    /// whose row was dropped as unreachable.
    pub h: Vec<f64>,
    /// Distance to the goal used by the success test: joint error (rad) or
    /// target configuration distance (rad).
    pub goal_distance: f64,
    pub status: QpStatus,
    pub active_set: Vec<ConstraintId>,
    pub clf_dropped: bool,
    pub target_unreachable: bool,
    pub unreachable_obstacles: Vec<usize>,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub u: Vec<f64>,
    pub diagnostics: StepDiagnostics,
}

/// Controller with a per-instance QP warm-start cache.
#[derive(Debug, Clone)]
pub struct Controller {
    variant: ControllerVariant,
    warm: Vec<ConstraintId>,
}

impl Controller {
    pub fn new(variant: ControllerVariant) -> Self {
        Self { variant, warm: Vec::new() }
    }

    pub fn variant(&self) -> &ControllerVariant {
        &self.variant
    }

    pub fn step(&mut self, arm: &PlanarArm, q: &[f64], env: &EnvironmentState) -> Result<ControlOutput> {
        let out = control_step_warm(arm, q, env, &self.variant, &self.warm)?;
        self.warm = out.diagnostics.active_set.clone();
        Ok(out)
    }
}

/// One control step without warm start.
pub fn control_step(arm: &PlanarArm, q: &[f64], env: &EnvironmentState, variant: &ControllerVariant) -> Result<ControlOutput> {
    control_step_warm(arm, q, env, variant, &[])
}

/// Assembled QP for one step plus the diagnostics that do not depend on
/// the solution.
pub struct StepProblem {
    pub qp: QpProblem,
    pub v: f64,
    pub sdf: Vec<f64>,
    pub h: Vec<f64>,
    pub goal_distance: f64,
    pub clf_dropped: bool,
    pub target_unreachable: bool,
    pub unreachable_obstacles: Vec<usize>,
}

pub fn build_problem(arm: &PlanarArm, q: &[f64], env: &EnvironmentState, variant: &ControllerVariant) -> Result<StepProblem> {
    let n = arm.dof();
    arm.check_dim(q)?;
    env.validate(n)?;
    variant.validate(n)?;
    let mut rows: Vec<ConstraintRow> = Vec::new();

    let mut clf_dropped = false;
    let mut target_unreachable = false;
    let (v, goal_distance) = match (&env.target, variant.clf_mode) {
        (Target::JointGoal(goal), _) => {
            let err: Vec<f64> = q.iter().zip(goal.iter()).map(|(a, b)| a - b).collect();
            let norm = err.iter().map(|e| e * e).sum::<f64>().sqrt();
            if norm > 1e-12 {
                let grad: Vec<f64> = err.iter().map(|e| e / norm).collect();
                rows.push(tvclf_row(norm, &grad, 0.0, variant.gamma_goal));
            } else {
                clf_dropped = true;
            }
            (norm, norm)
        }
        (Target::TaskPoint { point, velocity, radius }, _) => {
            match cdf_eval_disc(arm, q, point, *radius, &variant.cdf) {
                Ok(dq) => {
                    let v = (dq.d - variant.eps_clf).max(0.0);
                    if dq.d <= variant.eps_clf || dq.degenerate {
                        clf_dropped = true;
                    } else {
                        rows.push(tvclf_row(v, &dq.grad_q, dq.grad_p.dot(velocity), variant.gamma));
                    }
                    (v, dq.d)
                }
                Err(Error::Unreachable(_)) => {
                    clf_dropped = true;
                    target_unreachable = true;
                    (f64::NAN, f64::INFINITY)
                }
                Err(e) => return Err(e),
            }
        }
    };

    let tag = variant.tag;
    let mut sdf = Vec::with_capacity(env.obstacles.len());
    let mut h = Vec::with_capacity(env.obstacles.len());
    let mut unreachable_obstacles = Vec::new();
    for (i, o) in env.obstacles.iter().enumerate() {
        let s = sdf_eval(arm, q, &o.center, o.radius)?;
        sdf.push(s.d);
        let field = match tag.field() {
            Field::Sdf => s,
            Field::Cdf => {
                let r = o.radius + arm.link_radius();
                let res = if tag.time_varying() {
                    cdf_eval_disc(arm, q, &o.center, r, &variant.cdf)
                } else {
                    cdf_eval_disc_no_grad_p(arm, q, &o.center, r, &variant.cdf)
                };
                match res {
                    Ok(c) => c,
                    Err(Error::Unreachable(_)) => {
                        unreachable_obstacles.push(i);
                        h.push(f64::INFINITY);
                        continue;
                    }
                    Err(e) => return Err(e),
                }
            }
        };
        let hi = field.d - variant.eps_cbf;
        h.push(hi);
        let row = match tag.baseline() {
            Some(kind) => baseline_row(kind, hi, &field.grad_q, variant.alpha),
            None => tvcbf_row(hi, &field.grad_q, field.grad_p.dot(&o.velocity), variant.alpha),
        };
        rows.push(row);
    }

    rows.extend(joint_limit_rows(q, arm, variant.alpha_min, variant.alpha_max)?);

    let mut hessian: Vec<f64> = if variant.r_diag.is_empty() { vec![1.0; n] } else { variant.r_diag.clone() };
    hessian.push(2.0 * variant.p);
    let mut lower = arm.u_min().to_vec();
    lower.push(0.0);
    let mut upper = arm.u_max().to_vec();
    upper.push(f64::INFINITY);
    let qp = QpProblem::new(hessian, rows, lower, upper)?;
    Ok(StepProblem { qp, v, sdf, h, goal_distance, clf_dropped, target_unreachable, unreachable_obstacles })
}

/// One control step, seeding the QP with `warm` (a previous active set).
pub fn control_step_warm(
    arm: &PlanarArm,
    q: &[f64],
    env: &EnvironmentState,
    variant: &ControllerVariant,
    warm: &[ConstraintId],
) -> Result<ControlOutput> {
    let n = arm.dof();
    let sp = build_problem(arm, q, env, variant)?;
    let sol = solve_warm(&sp.qp, warm);
    let (u, delta) = match sol.status {
        QpStatus::Optimal => (sol.z[..n].to_vec(), sol.z[n]),
        QpStatus::Infeasible => (vec![0.0; n], 0.0),
    };
    Ok(ControlOutput {
        u,
        diagnostics: StepDiagnostics {
            v: sp.v,
            delta,
            sdf: sp.sdf,
            h: sp.h,
            goal_distance: sp.goal_distance,
            status: sol.status,
            active_set: sol.active_set,
            clf_dropped: sp.clf_dropped,
            target_unreachable: sp.target_unreachable,
            unreachable_obstacles: sp.unreachable_obstacles,
            kkt_residual: sol.kkt_residual,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn goal_env(goal: [f64; 2], obstacles: Vec<Obstacle>) -> EnvironmentState {
        EnvironmentState { obstacles, target: Target::JointGoal(goal.into()) }
    }

    #[test]
    fn variant_names_round_trip() {
        for t in VariantTag::ALL {
            assert_eq!(t.name().parse::<VariantTag>().unwrap(), t);
            assert_eq!(t.label().parse::<VariantTag>().unwrap(), t);
        }
        let err = "cdf".parse::<VariantTag>().unwrap_err().to_string();
        assert!(err.contains("sdf_sh_baseline"));
    }

    #[test]
    fn free_space_command_is_saturated_descent() {
        let arm = PlanarArm::two_link();
        let v = ControllerVariant::new(VariantTag::CdfTvcbf);
        let out = control_step(&arm, &[2.5, 0.5], &goal_env([-2.7, 0.5], vec![]), &v).unwrap();
        assert_eq!(out.diagnostics.status, QpStatus::Optimal);
        assert_relative_eq!(out.u[0], -2.0, epsilon = 1e-9);
        assert_relative_eq!(out.u[1], 0.0, epsilon = 1e-9);
        assert_relative_eq!(out.diagnostics.v, 5.2, epsilon = 1e-12);
    }

    #[test]
    fn unsaturated_clf_needs_no_relaxation() {
        let arm = PlanarArm::two_link();
        let mut v = ControllerVariant::new(VariantTag::SdfTvcbf);
        v.gamma_goal = ClassK::new(1.0).unwrap();
        let out = control_step(&arm, &[0.6, 0.0], &goal_env([0.0, 0.0], vec![]), &v).unwrap();
        // u = −λ ê, δ = λ/(2p), λ(1 + 1/(2p)) = γV.
        let lambda = 0.6 / (1.0 + 1.0 / 20.0);
        assert_relative_eq!(out.u[0], -lambda, epsilon = 1e-9);
        assert_relative_eq!(out.diagnostics.delta, lambda / 20.0, epsilon = 1e-9);
    }

    #[test]
    fn receding_obstacle_leaves_command_unchanged() {
        let arm = PlanarArm::two_link();
        for tag in [VariantTag::SdfTvcbf, VariantTag::CdfTvcbf] {
            let v = ControllerVariant::new(tag);
            let free = control_step(&arm, &[2.5, 0.5], &goal_env([-2.7, 0.5], vec![]), &v).unwrap();
            // Move the obstacle along the field's point gradient so ∂h/∂t ≫ 0.
            let center = Point2::new(-2.0, -1.0);
            let gp = match tag.field() {
                Field::Sdf => sdf_eval(&arm, &[2.5, 0.5], &center, 0.3).unwrap().grad_p,
                Field::Cdf => cdf_eval_disc(&arm, &[2.5, 0.5], &center, 0.3, &v.cdf).unwrap().grad_p,
            };
            let obs = Obstacle::new(center, 0.3, gp.normalize() * 20.0);
            let with = control_step(&arm, &[2.5, 0.5], &goal_env([-2.7, 0.5], vec![obs]), &v).unwrap();
            for (a, b) in free.u.iter().zip(&with.u) {
                assert_relative_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn at_goal_command_is_zero() {
        let arm = PlanarArm::two_link();
        let v = ControllerVariant::new(VariantTag::CdfTvcbf);
        let out = control_step(&arm, &[-2.7, 0.5], &goal_env([-2.7, 0.5], vec![]), &v).unwrap();
        assert!(out.diagnostics.clf_dropped);
        assert!(out.u.iter().all(|u| u.abs() < 1e-12));
        assert!(out.diagnostics.v <= v.eps_clf);
    }

    #[test]
    fn static_obstacles_reduce_to_baselines() {
        let arm = PlanarArm::two_link();
        let q = [1.0, 0.8];
        let obs = vec![
            Obstacle::new(Point2::new(1.2, 2.6), 0.3, Point2::zeros()),
            Obstacle::new(Point2::new(2.5, -0.5), 0.3, Point2::zeros()),
        ];
        let env = goal_env([-2.7, 0.5], obs);
        for (tv, base) in [(VariantTag::SdfTvcbf, VariantTag::SdfCbfBaseline), (VariantTag::CdfTvcbf, VariantTag::CdfShBaseline)] {
            let a = control_step(&arm, &q, &env, &ControllerVariant::new(tv)).unwrap();
            let b = control_step(&arm, &q, &env, &ControllerVariant::new(base)).unwrap();
            for (x, y) in a.u.iter().zip(&b.u) {
                assert!((x - y).abs() <= 1e-8, "{tv} vs {base}: {x} {y}");
            }
        }
    }

    #[test]
    fn unreachable_target_drops_clf() {
        let arm = PlanarArm::two_link();
        let v = ControllerVariant::new(VariantTag::CdfTvcbfTvclf);
        let env = EnvironmentState {
            obstacles: vec![],
            target: Target::TaskPoint { point: Point2::new(9.0, 0.0), velocity: Point2::zeros(), radius: 0.0 },
        };
        let out = control_step(&arm, &[0.3, 0.2], &env, &v).unwrap();
        assert!(out.diagnostics.target_unreachable && out.diagnostics.clf_dropped);
        assert!(out.u.iter().all(|u| u.abs() < 1e-12));
    }

    #[test]
    fn overlapping_obstacle_gives_infeasible_zero_command() {
        let arm = PlanarArm::two_link();
        let v = ControllerVariant::new(VariantTag::SdfTvcbf);
        // Obstacle sitting on the elbow and closing in faster than u can escape.
        let obs = Obstacle::new(Point2::new(2.0, 0.0), 0.3, Point2::new(-40.0, 0.0));
        let out = control_step(&arm, &[0.0, 0.0], &goal_env([1.0, 1.0], vec![obs]), &v).unwrap();
        assert_eq!(out.diagnostics.status, QpStatus::Infeasible);
        assert_eq!(out.u, vec![0.0, 0.0]);
    }

    #[test]
    fn dimension_errors_propagate() {
        let arm = PlanarArm::two_link();
        let v = ControllerVariant::new(VariantTag::SdfTvcbf);
        assert!(control_step(&arm, &[0.0], &goal_env([1.0, 1.0], vec![]), &v).is_err());
        let bad = EnvironmentState { obstacles: vec![], target: Target::JointGoal(vec![0.0; 3].into()) };
        assert!(control_step(&arm, &[0.0, 0.0], &bad, &v).is_err());
    }
}
