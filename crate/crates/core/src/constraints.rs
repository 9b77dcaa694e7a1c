//! Affine inequality rows over the decision vector `z = [u; δ]`.

use serde::{Deserialize, Serialize};

use crate::kinematics::PlanarArm;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    /// `coeffs · z <= bound`
    Le,
    /// `coeffs · z >= bound`
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Clf,
    Cbf,
    JointLimit,
    Hyperplane,
}

/// One affine inequality `coeffs · [u; δ] (<= | >=) bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub coeffs: Vec<f64>,
    pub bound: f64,
    pub sense: Sense,
    pub kind: RowKind,
    /// Only goal rows may be relaxed through δ.
    pub relaxable: bool,
}

impl ConstraintRow {
    pub fn lhs(&self, z: &[f64]) -> f64 {
        self.coeffs.iter().zip(z).map(|(a, b)| a * b).sum()
    }

    /// Signed slack: nonnegative when the row holds.
    pub fn slack(&self, z: &[f64]) -> f64 {
        match self.sense {
            Sense::Le => self.bound - self.lhs(z),
            Sense::Ge => self.lhs(z) - self.bound,
        }
    }

    pub fn is_satisfied(&self, z: &[f64], tol: f64) -> bool {
        self.slack(z) >= -tol
    }

    /// The same row written as `a · z <= b`.
    pub fn as_le(&self) -> (Vec<f64>, f64) {
        match self.sense {
            Sense::Le => (self.coeffs.clone(), self.bound),
            Sense::Ge => (self.coeffs.iter().map(|c| -c).collect(), -self.bound),
        }
    }

    /// Coefficient on δ (the last decision variable).
    pub fn delta_coeff(&self) -> f64 {
        *self.coeffs.last().expect("row has a δ column")
    }
}

/// Linear class-K function `μ(s) = slope · s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassK {
    slope: f64,
}

impl ClassK {
    pub fn new(slope: f64) -> Result<Self> {
        if !(slope > 0.0 && slope.is_finite()) {
            return Err(Error::InvalidArgument(format!("class-K slope {slope} must be positive")));
        }
        Ok(Self { slope })
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn apply(&self, s: f64) -> f64 {
        self.slope * s
    }
}

impl Default for ClassK {
    fn default() -> Self {
        Self { slope: 1.0 }
    }
}

fn with_delta(grad_q: &[f64], delta: f64) -> Vec<f64> {
    let mut coeffs = Vec::with_capacity(grad_q.len() + 1);
    coeffs.extend_from_slice(grad_q);
    coeffs.push(delta);
    coeffs
}

/// Time-varying Lyapunov row: `∇V·u − δ <= −γ(V) − ∂V/∂t`.
pub fn tvclf_row(v: f64, grad_q: &[f64], dv_dt: f64, gamma: ClassK) -> ConstraintRow {
    ConstraintRow {
        coeffs: with_delta(grad_q, -1.0),
        bound: -gamma.apply(v) - dv_dt,
        sense: Sense::Le,
        kind: RowKind::Clf,
        relaxable: true,
    }
}

/// Time-varying barrier row: `∇h·u >= −α(h) − ∂h/∂t`. Never relaxed.
pub fn tvcbf_row(h: f64, grad_q: &[f64], dh_dt: f64, alpha: ClassK) -> ConstraintRow {
    ConstraintRow {
        coeffs: with_delta(grad_q, 0.0),
        bound: -alpha.apply(h) - dh_dt,
        sense: Sense::Ge,
        kind: RowKind::Cbf,
        relaxable: false,
    }
}

/// Barrier rows keeping every joint inside `[q_min, q_max]`:
/// `u_i >= −α_min(q_i − q_min,i)` and `−u_i >= −α_max(q_max,i − q_i)`.
pub fn joint_limit_rows(q: &[f64], arm: &PlanarArm, alpha_min: ClassK, alpha_max: ClassK) -> Result<Vec<ConstraintRow>> {
    arm.check_dim(q)?;
    let n = arm.dof();
    let mut rows = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mut lower = vec![0.0; n + 1];
        lower[i] = 1.0;
        rows.push(ConstraintRow {
            coeffs: lower,
            bound: -alpha_min.apply(q[i] - arm.q_min()[i]),
            sense: Sense::Ge,
            kind: RowKind::JointLimit,
            relaxable: false,
        });
        let mut upper = vec![0.0; n + 1];
        upper[i] = -1.0;
        rows.push(ConstraintRow {
            coeffs: upper,
            bound: -alpha_max.apply(arm.q_max()[i] - q[i]),
            sense: Sense::Ge,
            kind: RowKind::JointLimit,
            relaxable: false,
        });
    }
    Ok(rows)
}

/// Time-invariant comparison constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Classical barrier on the signed distance, obstacle motion ignored.
    SdfCbf,
    /// Unit-normal hyperplane from the signed-distance gradient.
    SdfSh,
    /// Unit-normal hyperplane from the configuration-distance gradient.
    CdfSh,
}

/// Baseline row for a margined distance `h` with joint gradient `grad_q`.
///
/// The barrier baseline is [`tvcbf_row`] with `∂h/∂t = 0`. The hyperplane
/// baselines also drop `∂h/∂t` and replace the gradient by its unit
/// direction while keeping the bound `−α(h)`, i.e. `ĝ·u >= −α(h)`.
pub fn baseline_row(kind: BaselineKind, h: f64, grad_q: &[f64], alpha: ClassK) -> ConstraintRow {
    match kind {
        BaselineKind::SdfCbf => tvcbf_row(h, grad_q, 0.0, alpha),
        BaselineKind::SdfSh | BaselineKind::CdfSh => {
            let norm = grad_q.iter().map(|g| g * g).sum::<f64>().sqrt();
            let normal: Vec<f64> = if norm > 1e-12 {
                grad_q.iter().map(|g| g / norm).collect()
            } else {
                vec![0.0; grad_q.len()]
            };
            ConstraintRow { kind: RowKind::Hyperplane, ..tvcbf_row(h, &normal, 0.0, alpha) }
        }
    }
}
