//! JSON scenario files.
//!
//! ```json
//! {
//!   "arm": { "lengths": [2.0, 2.0], "radius": 0.0,
//!            "limits": { "q_min": [-3.14, -3.14], "q_max": [3.14, 3.14],
//!                        "u_min": [-2.0, -2.0], "u_max": [2.0, 2.0] } },
//!   "initial_q": [2.5, 0.5],
//!   "obstacles": [ { "center": [2.4, -2.4], "radius": 0.3, "velocity": [0.0, 1.5] } ],
//!   "target": { "type": "joint_goal", "value": [-2.7, 0.5] },
//!   "dt": 0.1, "t_max": 20.0, "variant": "cdf_tvcbf", "seeds": [42]
//! }
//! ```
//!
//! `arm`, `obstacles`, `dt`, `t_max`, `variant` and `seeds` are optional.
//! A `task_point` target also takes `velocity` and `radius`.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::{ControllerVariant, EnvironmentState, Obstacle, Target, VariantTag};
use crate::kinematics::{PlanarArm, Point2};
use crate::simulation::Scenario;
use crate::{DEFAULT_DT, DEFAULT_T_MAX};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSpec {
    pub q_min: Vec<f64>,
    pub q_max: Vec<f64>,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    pub lengths: Vec<f64>,
    #[serde(default)]
    pub radius: f64,
    /// Defaults to ±π rad and ±2 rad/s on every joint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<LimitsSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default)]
    pub velocity: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    JointGoal,
    TaskPoint,
}

/// A flat record rather than a tagged enum so that type errors inside it
/// keep their source position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    #[serde(rename = "type")]
    pub kind: TargetKind,
    /// Joint configuration for `joint_goal`, point `[x, y]` for `task_point`.
    pub value: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<ArmSpec>,
    pub initial_q: Vec<f64>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    pub target: TargetSpec,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<VariantTag>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_t_max() -> f64 {
    DEFAULT_T_MAX
}

/// Parse or validation failure with the offending field path and, for
/// syntax and type errors, the position in the source text.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFileError {
    pub field: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl ScenarioFileError {
    fn semantic(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), line: None, column: None, message: message.into() }
    }
}

impl fmt::Display for ScenarioFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: ")?,
            (Some(l), None) => write!(f, "line {l}: ")?,
            _ => {}
        }
        if self.field.is_empty() || self.field == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "field `{}`: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ScenarioFileError {}

fn point(v: [f64; 2]) -> Point2 {
    Point2::new(v[0], v[1])
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ScenarioFileError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let parsed: Result<Self, _> = serde_path_to_error::deserialize(de);
        parsed.map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            let line = (inner.line() > 0).then_some(inner.line());
            let column = (inner.column() > 0).then_some(inner.column());
            let mut message = inner.to_string();
            // serde_json appends its own position; it is reported separately.
            if let Some(i) = message.rfind(" at line ") {
                message.truncate(i);
            }
            ScenarioFileError { field, line, column, message }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioFileError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioFileError::semantic("", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario file serializes")
    }

    /// Builds a validated scenario. `variant` overrides the file's variant;
    /// with neither, `cdf_tvcbf` is used (or its reaching counterpart for a
    /// task-space target).
    pub fn to_scenario(&self, variant: Option<VariantTag>) -> Result<Scenario, ScenarioFileError> {
        let arm = match &self.arm {
            None => PlanarArm::two_link(),
            Some(a) => {
                let n = a.lengths.len();
                let lim = a.limits.clone().unwrap_or(LimitsSpec {
                    q_min: vec![-std::f64::consts::PI; n],
                    q_max: vec![std::f64::consts::PI; n],
                    u_min: vec![-2.0; n],
                    u_max: vec![2.0; n],
                });
                PlanarArm::new(a.lengths.clone(), a.radius, lim.q_min, lim.q_max, lim.u_min, lim.u_max)
                    .map_err(|e| ScenarioFileError::semantic("arm", e.to_string()))?
            }
        };
        let n = arm.dof();
        if self.initial_q.len() != n {
            return Err(ScenarioFileError::semantic(
                "initial_q",
                format!("expected {n} joint values, got {}", self.initial_q.len()),
            ));
        }
        let mut obstacles = Vec::with_capacity(self.obstacles.len());
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.radius >= 0.0 && o.radius.is_finite()) {
                return Err(ScenarioFileError::semantic(format!("obstacles[{i}].radius"), "must be nonnegative"));
            }
            obstacles.push(Obstacle::new(point(o.center), o.radius, point(o.velocity)));
        }
        let t = &self.target;
        let target = match t.kind {
            TargetKind::JointGoal => {
                if t.value.len() != n {
                    return Err(ScenarioFileError::semantic(
                        "target.value",
                        format!("expected {n} joint values, got {}", t.value.len()),
                    ));
                }
                if t.velocity.is_some() || t.radius.is_some() {
                    return Err(ScenarioFileError::semantic(
                        "target",
                        "velocity and radius only apply to a task_point target",
                    ));
                }
                Target::JointGoal(t.value.clone().into())
            }
            TargetKind::TaskPoint => {
                let [x, y] = t.value[..] else {
                    return Err(ScenarioFileError::semantic(
                        "target.value",
                        format!("expected a point [x, y], got {} values", t.value.len()),
                    ));
                };
                let radius = t.radius.unwrap_or(0.0);
                if !(radius >= 0.0 && radius.is_finite()) {
                    return Err(ScenarioFileError::semantic("target.radius", "must be nonnegative"));
                }
                Target::TaskPoint { point: Point2::new(x, y), velocity: point(t.velocity.unwrap_or([0.0; 2])), radius }
            }
        };
        let tag = variant.or(self.variant).unwrap_or(match target {
            Target::JointGoal(_) => VariantTag::CdfTvcbf,
            Target::TaskPoint { .. } => VariantTag::CdfTvcbfTvclf,
        });
        let env = EnvironmentState { obstacles, target };
        let mut scenario =
            Scenario::new(arm, self.initial_q.clone().into(), env, ControllerVariant::new(tag)).with_tag(tag);
        scenario.dt = self.dt;
        scenario.t_max = self.t_max;
        scenario.validate().map_err(|e| {
            let field = if !(self.dt > 0.0 && self.dt.is_finite()) {
                "dt"
            } else if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
                "t_max"
            } else {
                ""
            };
            ScenarioFileError::semantic(field, e.to_string())
        })?;
        Ok(scenario)
    }

    /// File form of an existing scenario (controller tuning is not stored).
    pub fn from_scenario(s: &Scenario) -> Self {
        let arm = &s.arm;
        let target = match &s.env.target {
            Target::JointGoal(q) => {
                TargetSpec { kind: TargetKind::JointGoal, value: q.0.clone(), velocity: None, radius: None }
            }
            Target::TaskPoint { point, velocity, radius } => TargetSpec {
                kind: TargetKind::TaskPoint,
                value: vec![point.x, point.y],
                velocity: Some([velocity.x, velocity.y]),
                radius: Some(*radius),
            },
        };
        Self {
            arm: Some(ArmSpec {
                lengths: arm.link_lengths().to_vec(),
                radius: arm.link_radius(),
                limits: Some(LimitsSpec {
                    q_min: arm.q_min().to_vec(),
                    q_max: arm.q_max().to_vec(),
                    u_min: arm.u_min().to_vec(),
                    u_max: arm.u_max().to_vec(),
                }),
            }),
            initial_q: s.initial_q.0.clone(),
            obstacles: s
                .env
                .obstacles
                .iter()
                .map(|o| ObstacleSpec {
                    center: [o.center.x, o.center.y],
                    radius: o.radius,
                    velocity: [o.velocity.x, o.velocity.y],
                })
                .collect(),
            target,
            dt: s.dt,
            t_max: s.t_max,
            variant: Some(s.variant.tag),
            seeds: Vec::new(),
        }
    }
}
