//! Time-varying control barrier / control Lyapunov function controllers for
//! planar n-link manipulators moving among dynamic disc obstacles.
//!
//! The arm is modelled as a single integrator in joint space (`q̇ = u`). Each
//! control step assembles a small dense quadratic program over `[u; δ]`:
//!
//! ```text
//!     minimize     1/2 uᵀ R u + p δ²
//!     subject to   ∇V·u + ∂V/∂t − δ ≤ −γ V          (relaxable goal row)
//!                  ∇hᵢ·u + ∂hᵢ/∂t   ≥ −α hᵢ          (one row per obstacle)
//!                  joint-limit barrier rows, u_min ≤ u ≤ u_max, δ ≥ 0
//! ```
//!
//! Barrier values come either from a task-space signed distance field
//! ([`distance::sdf_eval`]) or from a configuration-space distance field
//! ([`distance::cdf_eval`]) whose joint gradient has unit norm.
//!
//! Module map:
//! - [`kinematics`]: forward kinematics, point Jacobians, closest points.
//! - [`distance`]: SDF and CDF queries with gradients in `q` and `p`.
//! - [`constraints`]: affine row builders for the QP.
//! - [`qp`]: dense active-set QP solver with KKT verification.
//! - [`controller`]: per-step QP assembly for each controller variant.
//! - [`simulation`]: Euler rollouts and outcome classification.
//! - [`benchmark`]: seeded S1/S2/S3 scenario families and reports.
//! - [`scenario_file`], [`export`]: JSON scenarios, CSV/JSON/SVG outputs.
//! - [`check`]: the fast invariant suite behind `cbfmotion check`.

pub mod benchmark;
pub mod check;
pub mod constraints;
pub mod controller;
pub mod distance;
mod error;
pub mod export;
pub mod kinematics;
pub mod qp;
pub mod scenario_file;
pub mod simulation;

pub use error::{Error, Result};
pub use kinematics::{ArmPose, JointConfig, PlanarArm, Point2};

/// Default simulation time step (s).
pub const DEFAULT_DT: f64 = 0.1;
/// Default rollout horizon (s).
pub const DEFAULT_T_MAX: f64 = 20.0;
/// Safety margin subtracted from barrier distances.
pub const DEFAULT_EPS_CBF: f64 = 0.05;
/// Whole-body reaching tolerance (rad).
pub const DEFAULT_EPS_CLF: f64 = 0.02;
/// Slope of the joint-limit barriers. Steep enough that the limits only
/// bite when a joint is close to them.
pub const DEFAULT_ALPHA_LIMIT: f64 = 10.0;
