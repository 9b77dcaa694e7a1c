//! Planar n-link revolute arm: forward kinematics, point Jacobians and
//! closest-point queries against the link centerlines.
//!
//! The base is fixed at the origin. Joint `i` rotates every link `k >= i`, so
//! the absolute heading of link `k` is `q_0 + ... + q_k`.

use std::f64::consts::PI;
use std::ops::Deref;

use nalgebra::{Matrix2xX, Vector2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Point2 = Vector2<f64>;

/// Geometry and physical limits of a planar revolute chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarArm {
    link_lengths: Vec<f64>,
    link_radius: f64,
    q_min: Vec<f64>,
    q_max: Vec<f64>,
    u_min: Vec<f64>,
    u_max: Vec<f64>,
}

impl PlanarArm {
    pub fn new(
        link_lengths: Vec<f64>,
        link_radius: f64,
        q_min: Vec<f64>,
        q_max: Vec<f64>,
        u_min: Vec<f64>,
        u_max: Vec<f64>,
    ) -> Result<Self> {
        let n = link_lengths.len();
        if n == 0 {
            return Err(Error::InvalidArm("at least one link is required".into()));
        }
        for (name, v) in [("q_min", &q_min), ("q_max", &q_max), ("u_min", &u_min), ("u_max", &u_max)] {
            if v.len() != n {
                return Err(Error::InvalidArm(format!("{name} has {} entries, expected {n}", v.len())));
            }
            if v.iter().any(|x| x.is_nan()) {
                return Err(Error::InvalidArm(format!("{name} contains NaN")));
            }
        }
        if let Some(l) = link_lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidArm(format!("link length {l} must be positive and finite")));
        }
        if !(link_radius.is_finite() && link_radius >= 0.0) {
            return Err(Error::InvalidArm(format!("link radius {link_radius} must be nonnegative")));
        }
        for i in 0..n {
            if !(q_min[i] < q_max[i]) {
                return Err(Error::InvalidArm(format!("joint {i}: q_min must be below q_max")));
            }
            if !(u_min[i] < u_max[i]) {
                return Err(Error::InvalidArm(format!("joint {i}: u_min must be below u_max")));
            }
        }
        Ok(Self { link_lengths, link_radius, q_min, q_max, u_min, u_max })
    }

    /// Arm with symmetric limits `±q_limit` and `±u_limit` on every joint.
    pub fn uniform(link_lengths: Vec<f64>, link_radius: f64, q_limit: f64, u_limit: f64) -> Result<Self> {
        let n = link_lengths.len();
        Self::new(
            link_lengths,
            link_radius,
            vec![-q_limit; n],
            vec![q_limit; n],
            vec![-u_limit; n],
            vec![u_limit; n],
        )
    }

    /// The 2-link arm used throughout the planar experiments: 2 m links,
    /// joint limits ±π rad, velocity limits ±2 rad/s, zero thickness.
    pub fn two_link() -> Self {
        Self::uniform(vec![2.0, 2.0], 0.0, PI, 2.0).expect("default arm is valid")
    }

    pub fn dof(&self) -> usize {
        self.link_lengths.len()
    }

    pub fn link_lengths(&self) -> &[f64] {
        &self.link_lengths
    }

    pub fn link_radius(&self) -> f64 {
        self.link_radius
    }

    pub fn q_min(&self) -> &[f64] {
        &self.q_min
    }

    pub fn q_max(&self) -> &[f64] {
        &self.q_max
    }

    pub fn u_min(&self) -> &[f64] {
        &self.u_min
    }

    pub fn u_max(&self) -> &[f64] {
        &self.u_max
    }

    /// Total reach of the fully stretched arm (centerline).
    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    pub fn with_link_radius(mut self, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidArm(format!("link radius {radius} must be nonnegative")));
        }
        self.link_radius = radius;
        Ok(self)
    }

    pub fn check_dim(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::DimensionMismatch { expected: self.dof(), got: q.len() });
        }
        Ok(())
    }

    /// Clamp a configuration into the joint limits.
    pub fn clamp(&self, q: &[f64]) -> JointConfig {
        q.iter()
            .enumerate()
            .map(|(i, &v)| v.clamp(self.q_min[i], self.q_max[i]))
            .collect()
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.iter().enumerate().all(|(i, &v)| v >= self.q_min[i] && v <= self.q_max[i])
    }

    /// Stable 64-bit fingerprint of the geometry and limits (FNV-1a over the
    /// IEEE bit patterns). Used to key contact-set caches.
    pub fn fingerprint(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: f64| {
            for b in x.to_bits().to_le_bytes() {
                hash ^= b as u64;
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(self.dof() as f64);
        feed(self.link_radius);
        for v in [&self.link_lengths, &self.q_min, &self.q_max, &self.u_min, &self.u_max] {
            v.iter().copied().for_each(&mut feed);
        }
        hash
    }

    pub fn forward_kinematics(&self, q: &[f64]) -> Result<ArmPose> {
        self.check_dim(q)?;
        let mut joint_positions = Vec::with_capacity(self.dof() + 1);
        let mut p = Point2::zeros();
        let mut heading = 0.0;
        joint_positions.push(p);
        for (len, qi) in self.link_lengths.iter().zip(q) {
            heading += qi;
            p += Point2::new(heading.cos(), heading.sin()) * *len;
            joint_positions.push(p);
        }
        Ok(ArmPose { joint_positions })
    }

    /// Planar position Jacobian (2×n) of the point at `arc_fraction` along
    /// link `link_index`.
    pub fn point_jacobian(&self, q: &[f64], link_index: usize, arc_fraction: f64) -> Result<Matrix2xX<f64>> {
        let pose = self.forward_kinematics(q)?;
        if link_index >= self.dof() {
            return Err(Error::LinkIndexOutOfRange { index: link_index, dof: self.dof() });
        }
        if !(0.0..=1.0).contains(&arc_fraction) {
            return Err(Error::ArcFractionOutOfRange(arc_fraction));
        }
        let point = pose.point_on_link(link_index, arc_fraction);
        Ok(jacobian_at(&pose, link_index, point))
    }

    /// Closest point on the link centerlines to `p`. Ties go to the lowest
    /// link index. Link radii are not subtracted.
    pub fn closest_point_on_arm(&self, q: &[f64], p: &Point2) -> Result<ClosestPoint> {
        let pose = self.forward_kinematics(q)?;
        Ok(pose.closest_point(p))
    }
}

/// Joint angles (rad).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfig(pub Vec<f64>);

impl JointConfig {
    pub fn new(q: Vec<f64>) -> Self {
        Self(q)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

impl Deref for JointConfig {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for JointConfig {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl<const N: usize> From<[f64; N]> for JointConfig {
    fn from(v: [f64; N]) -> Self {
        Self(v.to_vec())
    }
}

impl FromIterator<f64> for JointConfig {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Task-space placement of the arm at one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmPose {
    /// `n + 1` points: the base, every intermediate joint, the end-effector.
    pub joint_positions: Vec<Point2>,
}

impl ArmPose {
    pub fn link_count(&self) -> usize {
        self.joint_positions.len() - 1
    }

    pub fn link_segments(&self) -> Vec<(Point2, Point2)> {
        self.joint_positions.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn end_effector(&self) -> Point2 {
        *self.joint_positions.last().expect("pose has a base point")
    }

    pub fn point_on_link(&self, link_index: usize, arc_fraction: f64) -> Point2 {
        let a = self.joint_positions[link_index];
        let b = self.joint_positions[link_index + 1];
        a + (b - a) * arc_fraction
    }

    pub fn closest_point(&self, p: &Point2) -> ClosestPoint {
        let mut best: Option<ClosestPoint> = None;
        for (k, w) in self.joint_positions.windows(2).enumerate() {
            let (t, c) = project_onto_segment(p, &w[0], &w[1]);
            let distance = (p - c).norm();
            if best.as_ref().is_none_or(|b| distance < b.distance) {
                best = Some(ClosestPoint { link_index: k, arc_fraction: t, point: c, distance });
            }
        }
        best.expect("arm has at least one link")
    }
}

/// Result of [`PlanarArm::closest_point_on_arm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    pub link_index: usize,
    pub arc_fraction: f64,
    pub point: Point2,
    /// Distance from the query to the link centerline (m).
    pub distance: f64,
}

/// `(-y, x)`: the velocity of `v` under a unit counter-clockwise rotation.
pub(crate) fn perp(v: &Point2) -> Point2 {
    Point2::new(-v.y, v.x)
}

pub(crate) fn jacobian_at(pose: &ArmPose, link_index: usize, point: Point2) -> Matrix2xX<f64> {
    let n = pose.link_count();
    let mut jac = Matrix2xX::zeros(n);
    for i in 0..=link_index {
        jac.set_column(i, &perp(&(point - pose.joint_positions[i])));
    }
    jac
}

/// Orthogonal projection of `p` onto segment `[a, b]`, returning the clamped
/// arc fraction and the projected point.
pub(crate) fn project_onto_segment(p: &Point2, a: &Point2, b: &Point2) -> (f64, Point2) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (0.0, *a);
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (t, a + ab * t)
}
