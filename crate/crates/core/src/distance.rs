//! Distance fields between the arm and planar points or discs.
//!
//! * SDF: task-space clearance from a disc to the link centerlines (m).
//! * CDF: the smallest joint-space motion (rad, Euclidean, no wrapping) that
//!   brings some link into contact with a point. Its `q`-gradient has unit
//!   norm wherever the distance is positive.
//!
//! A disc is handled in configuration space as the union of points sampled on
//! its boundary circle, so `d = 0` means the arm touches the disc surface.

mod cache;

pub use cache::ContactCache;

use std::f64::consts::{PI, TAU};

use crate::kinematics::{jacobian_at, PlanarArm};
use crate::{Error, JointConfig, Point2, Result};

/// Distance value plus its gradients with respect to the joint
/// configuration and the query point (or disc center).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceQuery {
    pub d: f64,
    pub grad_q: Vec<f64>,
    pub grad_p: Point2,
    /// Set when the gradient is undefined at the query and was replaced by
    /// zero (coincident points, or a contact configuration).
    pub degenerate: bool,
}

impl DistanceQuery {
    fn degenerate(d: f64, n: usize) -> Self {
        Self { d, grad_q: vec![0.0; n], grad_p: Point2::zeros(), degenerate: true }
    }
}

/// Signed clearance between a disc obstacle and the arm surface:
/// centerline distance minus the obstacle and link radii.
pub fn sdf_eval(arm: &PlanarArm, q: &[f64], obstacle_center: &Point2, obstacle_radius: f64) -> Result<DistanceQuery> {
    if !(obstacle_radius >= 0.0) {
        return Err(Error::InvalidArgument(format!("obstacle radius {obstacle_radius} must be nonnegative")));
    }
    let pose = arm.forward_kinematics(q)?;
    let closest = pose.closest_point(obstacle_center);
    let d = closest.distance - obstacle_radius - arm.link_radius();
    if closest.distance <= 1e-12 {
        return Ok(DistanceQuery::degenerate(d, arm.dof()));
    }
    let normal = (obstacle_center - closest.point) / closest.distance;
    let jac = jacobian_at(&pose, closest.link_index, closest.point);
    let grad_q = (0..arm.dof()).map(|i| -normal.dot(&jac.column(i))).collect();
    Ok(DistanceQuery { d, grad_q, grad_p: normal, degenerate: false })
}

/// Resolution and finite-difference parameters of the configuration-space
/// distance field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfSettings {
    /// Joint-space sampling step of the contact manifold (rad).
    pub resolution: f64,
    /// Central-difference step for the point gradient (m).
    pub fd_step: f64,
    /// Number of boundary points standing in for a disc.
    pub disc_samples: usize,
    /// Polish the best sampled contact by a 1-D search along the analytic
    /// contact curve (2-link arms only).
    pub refine: bool,
}

impl Default for CdfSettings {
    fn default() -> Self {
        Self { resolution: 0.01, fd_step: 1e-3, disc_samples: 24, refine: true }
    }
}

impl CdfSettings {
    pub fn with_resolution(resolution: f64) -> Self {
        Self { resolution, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::InvalidArgument(format!("resolution {} must be positive", self.resolution)));
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::InvalidArgument(format!("fd step {} must be positive", self.fd_step)));
        }
        if self.disc_samples < 3 {
            return Err(Error::InvalidArgument("a disc needs at least 3 boundary samples".into()));
        }
        Ok(())
    }
}

/// Sampled contact manifold `{q : the arm at q touches point}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactSet {
    pub point: Point2,
    pub resolution: f64,
    pub configs: Vec<JointConfig>,
}

impl ContactSet {
    /// Joint-space tolerance used when contacts come from a grid search.
    pub fn contact_tolerance(arm: &PlanarArm, resolution: f64) -> f64 {
        resolution * arm.reach()
    }

    /// Closest stored contact configuration to `q`.
    pub fn nearest(&self, q: &[f64]) -> Option<(f64, &JointConfig)> {
        self.configs
            .iter()
            .map(|c| (c.distance(q), c))
            .fold(None, |best, cand| match best {
                Some(b) if b.0 <= cand.0 => Some(b),
                _ => Some(cand),
            })
    }
}

/// Enumerate the contact manifold for `point`.
///
/// One- and two-link arms are enumerated analytically: link-1 contacts fix
/// `q1` at the point's bearing and sweep `q2`; link-2 contacts sample `q1`
/// and aim link 2 through the point. Longer chains fall back to a dense grid
/// search keeping configurations within [`ContactSet::contact_tolerance`].
pub fn cdf_contact_set(arm: &PlanarArm, point: &Point2, resolution: f64) -> Result<ContactSet> {
    CdfSettings::with_resolution(resolution).validate()?;
    if !(point.x.is_finite() && point.y.is_finite()) {
        return Err(Error::InvalidArgument("contact point must be finite".into()));
    }
    let configs = match arm.dof() {
        1 | 2 => analytic_contacts(arm, point, resolution),
        _ => grid_contacts(arm, point, resolution)?,
    };
    if configs.is_empty() {
        return Err(Error::Unreachable(*point));
    }
    Ok(ContactSet { point: *point, resolution, configs })
}

/// Configuration-space distance from `q` to contact with `point`.
///
/// `grad_q` is the unit vector from the nearest contact configuration to `q`;
/// `grad_p` is a central finite difference over the point.
pub fn cdf_eval(arm: &PlanarArm, q: &[f64], point: &Point2, settings: &CdfSettings) -> Result<DistanceQuery> {
    cdf_eval_disc(arm, q, point, 0.0, settings)
}

/// Configuration-space distance from `q` to contact with the boundary of a
/// disc. A zero radius is the plain point query.
pub fn cdf_eval_disc(
    arm: &PlanarArm,
    q: &[f64],
    center: &Point2,
    radius: f64,
    settings: &CdfSettings,
) -> Result<DistanceQuery> {
    let mut query = cdf_eval_disc_no_grad_p(arm, q, center, radius, settings)?;
    query.grad_p = cdf_grad_p(arm, q, center, radius, settings, query.d);
    Ok(query)
}

/// As [`cdf_eval_disc`] but leaves `grad_p` at zero, skipping the four extra
/// field evaluations.
pub fn cdf_eval_disc_no_grad_p(
    arm: &PlanarArm,
    q: &[f64],
    center: &Point2,
    radius: f64,
    settings: &CdfSettings,
) -> Result<DistanceQuery> {
    settings.validate()?;
    arm.check_dim(q)?;
    if !(radius >= 0.0) {
        return Err(Error::InvalidArgument(format!("disc radius {radius} must be nonnegative")));
    }
    let (d, nearest) = disc_nearest(arm, q, center, radius, settings)?.ok_or(Error::Unreachable(*center))?;
    if d <= 1e-12 {
        return Ok(DistanceQuery::degenerate(d, arm.dof()));
    }
    let grad_q = q.iter().zip(&nearest).map(|(a, b)| (a - b) / d).collect();
    Ok(DistanceQuery { d, grad_q, grad_p: Point2::zeros(), degenerate: false })
}

fn cdf_grad_p(arm: &PlanarArm, q: &[f64], center: &Point2, radius: f64, settings: &CdfSettings, d0: f64) -> Point2 {
    let h = settings.fd_step;
    let eval = |c: Point2| -> Option<f64> {
        disc_nearest(arm, q, &c, radius, settings).ok().flatten().map(|(d, _)| d)
    };
    let mut grad = Point2::zeros();
    for axis in 0..2 {
        let mut step = Point2::zeros();
        step[axis] = h;
        grad[axis] = match (eval(center + step), eval(center - step)) {
            (Some(fwd), Some(bwd)) => (fwd - bwd) / (2.0 * h),
            (Some(fwd), None) => (fwd - d0) / h,
            (None, Some(bwd)) => (d0 - bwd) / h,
            (None, None) => 0.0,
        };
    }
    grad
}

/// Nearest contact over all boundary samples of a disc. `Ok(None)` when no
/// sample is reachable.
fn disc_nearest(
    arm: &PlanarArm,
    q: &[f64],
    center: &Point2,
    radius: f64,
    settings: &CdfSettings,
) -> Result<Option<(f64, Vec<f64>)>> {
    if !(center.x.is_finite() && center.y.is_finite()) {
        return Err(Error::InvalidArgument("query point must be finite".into()));
    }
    let samples = if radius == 0.0 { 1 } else { settings.disc_samples };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for j in 0..samples {
        let b = if radius == 0.0 {
            *center
        } else {
            let phi = TAU * j as f64 / samples as f64;
            center + Point2::new(phi.cos(), phi.sin()) * radius
        };
        let found = match arm.dof() {
            1 | 2 => nearest_analytic(arm, q, &b, settings),
            _ => match cdf_contact_set(arm, &b, settings.resolution) {
                Ok(set) => set.nearest(q).map(|(d, c)| (d * d, c.0.clone())),
                Err(Error::Unreachable(_)) => None,
                Err(e) => return Err(e),
            },
        };
        if let Some((d2, cfg)) = found {
            if best.as_ref().is_none_or(|(bd, _)| d2 < *bd) {
                best = Some((d2, cfg));
            }
        }
    }
    Ok(best.map(|(d2, cfg)| (d2.sqrt(), cfg)))
}

/// Shifts `angle` by multiples of 2π into `[lo, hi]`, returning every
/// representative (two when the interval is a closed full turn).
fn representatives(angle: f64, lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    let k0 = ((lo - angle) / TAU).ceil() as i64;
    (k0..)
        .map(move |k| angle + TAU * k as f64)
        .take_while(move |a| *a <= hi + 1e-12)
        .filter(move |a| *a >= lo - 1e-12)
        .map(move |a| a.clamp(lo, hi))
}

/// Pieces of `[center - half, center + half]` (mod 2π) inside `[lo, hi]`.
fn arc_pieces(center: f64, half: f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    if half >= PI {
        return vec![(lo, hi)];
    }
    let k_lo = ((lo - (center + half)) / TAU).ceil() as i64;
    let k_hi = ((hi - (center - half)) / TAU).floor() as i64;
    (k_lo..=k_hi)
        .filter_map(|k| {
            let c = center + TAU * k as f64;
            let (a, b) = ((c - half).max(lo), (c + half).min(hi));
            (a <= b).then_some((a, b))
        })
        .collect()
}

/// Half-width of the `q1` arc over which link 2 can reach `b`, or `None`.
fn link2_half_width(l1: f64, l2: f64, b: &Point2) -> Option<f64> {
    let r = b.norm();
    if r <= 1e-12 {
        return (l1 <= l2).then_some(PI);
    }
    let c0 = (r * r + l1 * l1 - l2 * l2) / (2.0 * l1 * r);
    if c0 > 1.0 + 1e-12 {
        None
    } else {
        Some(c0.clamp(-1.0, 1.0).acos())
    }
}

/// `q2` making link 2 (attached at the elbow for `q1`) point at `b`; `None`
/// when `b` sits on the elbow.
fn aim_link2(l1: f64, q1: f64, b: &Point2) -> Option<f64> {
    let (s, c) = q1.sin_cos();
    let vx = b.x - l1 * c;
    let vy = b.y - l1 * s;
    if vx * vx + vy * vy <= 1e-24 {
        return None;
    }
    Some(vy.atan2(vx) - q1)
}

fn sample_count(lo: f64, hi: f64, resolution: f64) -> usize {
    (((hi - lo) / resolution).ceil() as usize).max(1)
}

fn analytic_contacts(arm: &PlanarArm, b: &Point2, resolution: f64) -> Vec<JointConfig> {
    let lens = arm.link_lengths();
    let (qmin, qmax) = (arm.q_min(), arm.q_max());
    let mut out = Vec::new();
    let bearing = b.y.atan2(b.x);
    if b.norm() <= lens[0] {
        for q1 in representatives(bearing, qmin[0], qmax[0]) {
            if arm.dof() == 1 {
                out.push(JointConfig(vec![q1]));
                continue;
            }
            let m = sample_count(qmin[1], qmax[1], resolution);
            for j in 0..=m {
                let q2 = qmin[1] + (qmax[1] - qmin[1]) * j as f64 / m as f64;
                out.push(JointConfig(vec![q1, q2]));
            }
        }
    }
    if arm.dof() == 2 {
        let (l1, l2) = (lens[0], lens[1]);
        let Some(half) = link2_half_width(l1, l2, b) else { return out };
        let pieces = arc_pieces(bearing, half, qmin[0], qmax[0]);
        let m = sample_count(qmin[0], qmax[0], resolution);
        let grid = (0..=m).map(|j| qmin[0] + (qmax[0] - qmin[0]) * j as f64 / m as f64);
        // Global grid samples plus the exact arc ends, where the tip touches.
        let mut q1s: Vec<f64> = grid
            .filter(|q1| pieces.iter().any(|(a, c)| q1 >= a && q1 <= c))
            .collect();
        q1s.extend(pieces.iter().flat_map(|(a, c)| [*a, *c]));
        for q1 in q1s {
            if let Some(q2) = aim_link2(l1, q1, b) {
                for q2 in representatives(q2, qmin[1], qmax[1]) {
                    out.push(JointConfig(vec![q1, q2]));
                }
            }
        }
    }
    out
}

/// Nearest analytic contact configuration for a 1- or 2-link arm, returned as
/// `(squared distance, config)`.
fn nearest_analytic(arm: &PlanarArm, q: &[f64], b: &Point2, settings: &CdfSettings) -> Option<(f64, Vec<f64>)> {
    let lens = arm.link_lengths();
    let (qmin, qmax) = (arm.q_min(), arm.q_max());
    let bearing = b.y.atan2(b.x);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let offer = |d2: f64, cfg: Vec<f64>, best: &mut Option<(f64, Vec<f64>)>| {
        if best.as_ref().is_none_or(|(bd, _)| d2 < *bd) {
            *best = Some((d2, cfg));
        }
    };

    if b.norm() <= lens[0] {
        for q1 in representatives(bearing, qmin[0], qmax[0]) {
            if arm.dof() == 1 {
                offer((q[0] - q1).powi(2), vec![q1], &mut best);
            } else {
                let q2 = q[1].clamp(qmin[1], qmax[1]);
                offer((q[0] - q1).powi(2) + (q[1] - q2).powi(2), vec![q1, q2], &mut best);
            }
        }
    }
    if arm.dof() != 2 {
        return best;
    }

    let (l1, l2) = (lens[0], lens[1]);
    let Some(half) = link2_half_width(l1, l2, b) else { return best };
    // Squared distance to the link-2 contact at `q1`, choosing the q2
    // representative nearest to the current q2.
    let cost = |q1: f64| -> Option<(f64, f64)> {
        let raw = aim_link2(l1, q1, b)?;
        representatives(raw, qmin[1], qmax[1])
            .map(|q2| ((q[0] - q1).powi(2) + (q[1] - q2).powi(2), q2))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    };
    for (lo, hi) in arc_pieces(bearing, half, qmin[0], qmax[0]) {
        let m = sample_count(lo, hi, settings.resolution);
        let step = (hi - lo) / m as f64;
        let mut piece_best: Option<(f64, f64, f64)> = None;
        for j in 0..=m {
            let q1 = if j == m { hi } else { lo + step * j as f64 };
            if let Some((d2, q2)) = cost(q1) {
                if piece_best.is_none_or(|(bd, _, _)| d2 < bd) {
                    piece_best = Some((d2, q1, q2));
                }
            }
        }
        let Some((mut d2, mut q1, mut q2)) = piece_best else { continue };
        if settings.refine && step > 0.0 {
            let a = (q1 - step).max(lo);
            let c = (q1 + step).min(hi);
            if let Some((rd2, rq1, rq2)) = golden_section(a, c, &cost) {
                if rd2 < d2 {
                    (d2, q1, q2) = (rd2, rq1, rq2);
                }
            }
        }
        offer(d2, vec![q1, q2], &mut best);
    }
    best
}

fn golden_section(
    mut a: f64,
    mut b: f64,
    f: &impl Fn(f64) -> Option<(f64, f64)>,
) -> Option<(f64, f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..24 {
        if f1.0 < f2.0 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
    }
    let (x, fx) = if f1.0 < f2.0 { (x1, f1) } else { (x2, f2) };
    Some((fx.0, x, fx.1))
}

/// Upper bound on grid cells for the n ≥ 3 fallback.
const MAX_GRID_CELLS: f64 = 5.0e7;

fn grid_contacts(arm: &PlanarArm, b: &Point2, resolution: f64) -> Result<Vec<JointConfig>> {
    let n = arm.dof();
    let counts: Vec<usize> = (0..n)
        .map(|i| sample_count(arm.q_min()[i], arm.q_max()[i], resolution) + 1)
        .collect();
    let cells: f64 = counts.iter().map(|c| *c as f64).product();
    if cells > MAX_GRID_CELLS {
        return Err(Error::InvalidArgument(format!(
            "resolution {resolution} needs {cells:.3e} grid cells for a {n}-link arm"
        )));
    }
    let tol = ContactSet::contact_tolerance(arm, resolution);
    let axis = |i: usize, j: usize| {
        let (lo, hi) = (arm.q_min()[i], arm.q_max()[i]);
        lo + (hi - lo) * j as f64 / (counts[i] - 1) as f64
    };
    let mut idx = vec![0usize; n];
    let mut q = vec![0.0; n];
    let mut out = Vec::new();
    loop {
        for i in 0..n {
            q[i] = axis(i, idx[i]);
        }
        let pose = arm.forward_kinematics(&q)?;
        if pose.closest_point(b).distance <= tol {
            out.push(JointConfig(q.clone()));
        }
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < counts[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn arm() -> PlanarArm {
        PlanarArm::two_link()
    }

    #[test]
    fn sdf_vertical_offset() {
        let q = sdf_eval(&arm(), &[0.0, 0.0], &Point2::new(1.0, 1.0), 0.3).unwrap();
        assert_relative_eq!(q.d, 0.7, epsilon = 1e-12);
        assert_relative_eq!(q.grad_p.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(q.grad_p.y, 1.0, epsilon = 1e-12);
        assert_relative_eq!(q.grad_q[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(q.grad_q[1], 0.0, epsilon = 1e-12);
        assert!(!q.degenerate);
    }

    #[test]
    fn sdf_tip_aligned() {
        let q = sdf_eval(&arm(), &[0.0, 0.0], &Point2::new(5.0, 0.0), 0.3).unwrap();
        assert_relative_eq!(q.d, 0.7, epsilon = 1e-12);
        assert_relative_eq!(q.grad_p.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(q.grad_p.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sdf_coincident_point_is_degenerate() {
        let q = sdf_eval(&arm(), &[0.0, 0.0], &Point2::new(3.0, 0.0), 0.3).unwrap();
        assert!(q.degenerate);
        assert_relative_eq!(q.d, -0.3);
        assert!(q.grad_q.iter().all(|g| *g == 0.0));
        assert_eq!(q.grad_p, Point2::zeros());
    }

    #[test]
    fn sdf_subtracts_link_radius_and_rejects_negative_radius() {
        let thick = arm().with_link_radius(0.1).unwrap();
        let q = sdf_eval(&thick, &[0.0, 0.0], &Point2::new(1.0, 1.0), 0.3).unwrap();
        assert_relative_eq!(q.d, 0.6, epsilon = 1e-12);
        assert!(sdf_eval(&arm(), &[0.0, 0.0], &Point2::new(1.0, 1.0), -0.1).is_err());
    }

    #[test]
    fn contact_set_elbow_on_point() {
        let set = cdf_contact_set(&arm(), &Point2::new(2.0, 0.0), 0.05).unwrap();
        let on_elbow: Vec<_> = set.configs.iter().filter(|c| c[0].abs() < 1e-12).collect();
        // q2 sweeps the full [-π, π] range.
        assert!(on_elbow.len() > 100);
        assert!(on_elbow.iter().any(|c| (c[1] + PI).abs() < 1e-12));
        assert!(on_elbow.iter().any(|c| (c[1] - PI).abs() < 1e-12));
    }

    #[test]
    fn contact_set_point_above_base_has_both_branches() {
        let res = 0.01;
        let p = Point2::new(0.0, 2.0);
        let set = cdf_contact_set(&arm(), &p, res).unwrap();
        assert!(set.configs.iter().any(|c| (c[0] - FRAC_PI_2).abs() < 1e-12 && c[1].abs() <= res));
        // Link-2 branch near (π/6, 2π/3): the tip-contact arc end is exactly π/6.
        let near = set
            .configs
            .iter()
            .find(|c| (c[0] - PI / 6.0).abs() < 1e-9)
            .expect("arc end sampled");
        assert_relative_eq!(near[1], 2.0 * PI / 3.0, epsilon = 1e-9);
        let pose = arm().forward_kinematics(near).unwrap();
        assert!(pose.closest_point(&p).distance < 1e-9);
        for c in &set.configs {
            let pose = arm().forward_kinematics(c).unwrap();
            assert!(pose.closest_point(&p).distance < 1e-9, "{c:?}");
            assert!(arm().within_limits(c));
        }
    }

    #[test]
    fn contact_set_unreachable() {
        assert!(matches!(
            cdf_contact_set(&arm(), &Point2::new(4.1, 0.0), 0.01),
            Err(Error::Unreachable(_))
        ));
        assert!(cdf_contact_set(&arm(), &Point2::new(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn cdf_examples() {
        let s = CdfSettings::default();
        let q = cdf_eval(&arm(), &[0.0, 0.0], &Point2::new(0.0, 2.0), &s).unwrap();
        assert_relative_eq!(q.d, FRAC_PI_2, epsilon = 1e-9);
        assert_relative_eq!(q.grad_q[0], -1.0, epsilon = 1e-9);
        assert_relative_eq!(q.grad_q[1], 0.0, epsilon = 1e-9);

        let q = cdf_eval(&arm(), &[FRAC_PI_2, 0.0], &Point2::new(0.0, 2.0), &s).unwrap();
        assert_relative_eq!(q.d, 0.0, epsilon = 1e-12);
        assert!(q.degenerate);

        let q = cdf_eval(&arm(), &[0.0, 1.0], &Point2::new(2.0, 0.0), &s).unwrap();
        assert_relative_eq!(q.d, 0.0, epsilon = 1e-12);

        assert!(matches!(
            cdf_eval(&arm(), &[0.0, 0.0], &Point2::new(4.1, 0.0), &s),
            Err(Error::Unreachable(_))
        ));
    }

    #[test]
    fn cdf_eval_agrees_with_enumerated_contact_set() {
        let s = CdfSettings::default();
        let a = arm();
        for (q, p) in [
            ([0.3, -0.4], Point2::new(1.0, 2.5)),
            ([2.5, 0.5], Point2::new(2.4, -2.4)),
            ([-1.0, 2.0], Point2::new(-3.0, 0.5)),
        ] {
            let field = cdf_eval(&a, &q, &p, &s).unwrap();
            let set = cdf_contact_set(&a, &p, s.resolution).unwrap();
            let (enumerated, _) = set.nearest(&q).unwrap();
            // Refinement can only improve on the sampled minimum, by at most
            // about one grid step.
            assert!(field.d <= enumerated + 1e-9);
            assert!(field.d >= enumerated - s.resolution * 2.0);
        }
    }

    #[test]
    fn disc_contact_is_closer_than_center() {
        let s = CdfSettings::default();
        let q = [0.0, 0.0];
        let center = Point2::new(0.0, 2.5);
        let point = cdf_eval(&arm(), &q, &center, &s).unwrap();
        let disc = cdf_eval_disc(&arm(), &q, &center, 0.3, &s).unwrap();
        assert!(disc.d < point.d);
        assert_relative_eq!(disc.grad_q.iter().map(|g| g * g).sum::<f64>().sqrt(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn representatives_cover_closed_turn() {
        let r: Vec<f64> = representatives(PI, -PI, PI).collect();
        assert_eq!(r.len(), 2);
        let r: Vec<f64> = representatives(0.5 + TAU, -PI, PI).collect();
        assert_eq!(r.len(), 1);
        assert_relative_eq!(r[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn grid_fallback_for_three_links() {
        let a = PlanarArm::uniform(vec![1.0, 1.0, 1.0], 0.0, PI, 2.0).unwrap();
        let p = Point2::new(1.5, 0.5);
        let set = cdf_contact_set(&a, &p, 0.1).unwrap();
        let tol = ContactSet::contact_tolerance(&a, 0.1);
        assert!(!set.configs.is_empty());
        for c in &set.configs {
            assert!(a.forward_kinematics(c).unwrap().closest_point(&p).distance <= tol);
        }
        assert!(matches!(cdf_contact_set(&a, &Point2::new(3.5, 0.0), 0.1), Err(Error::Unreachable(_))));
    }
}
