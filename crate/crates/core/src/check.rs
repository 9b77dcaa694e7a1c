//! Fast self-check: gradient finite-difference checks, the CDF unit-norm
//! property and a brute-force QP oracle. Backs `cbfmotion check`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraints::{ConstraintRow, RowKind, Sense};
use crate::distance::{cdf_eval, sdf_eval, CdfSettings};
use crate::kinematics::{PlanarArm, Point2};
use crate::qp::{verify_kkt, QpProblem};

/// Deliberate defects used to confirm that the suite catches them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Flip the sign of the SDF joint gradient.
    SdfGradSign,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckConfig {
    pub seed: u64,
    pub gradient_samples: usize,
    pub cdf_samples: usize,
    pub qp_instances: usize,
    pub fault: Fault,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { seed: 7, gradient_samples: 200, cdf_samples: 200, qp_instances: 50, fault: Fault::None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst residual observed.
    pub residual: f64,
    pub tolerance: f64,
    pub samples: usize,
}

impl PropertyResult {
    fn new(name: &'static str, residual: f64, tolerance: f64, samples: usize) -> Self {
        Self { name, passed: residual <= tolerance && samples > 0, residual, tolerance, samples }
    }
}

const FD_STEP: f64 = 1e-6;
const GRAD_TOL: f64 = 1e-4;

fn random_q(rng: &mut ChaCha8Rng, arm: &PlanarArm) -> Vec<f64> {
    (0..arm.dof()).map(|i| rng.gen_range(arm.q_min()[i]..arm.q_max()[i])).collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn sdf_gradients(cfg: &CheckConfig, rng: &mut ChaCha8Rng) -> [PropertyResult; 2] {
    let arm = PlanarArm::two_link();
    let sign = if cfg.fault == Fault::SdfGradSign { -1.0 } else { 1.0 };
    let (mut worst_q, mut worst_p, mut n) = (0.0f64, 0.0f64, 0);
    while n < cfg.gradient_samples {
        let q = random_q(rng, &arm);
        let p = Point2::new(rng.gen_range(-4.5..4.5), rng.gen_range(-4.5..4.5));
        let r = 0.3;
        let Ok(base) = sdf_eval(&arm, &q, &p, r) else { continue };
        if base.degenerate || base.d + r < 1e-3 {
            continue;
        }
        // Skip configurations next to a change of closest link.
        let pose = arm.forward_kinematics(&q).expect("valid q");
        let link = pose.closest_point(&p).link_index;
        let mut stable = true;
        let mut fd_q = vec![0.0; q.len()];
        for i in 0..q.len() {
            let (mut qf, mut qb) = (q.clone(), q.clone());
            qf[i] += FD_STEP;
            qb[i] -= FD_STEP;
            for qq in [&qf, &qb] {
                stable &= arm.forward_kinematics(qq).expect("valid q").closest_point(&p).link_index == link;
            }
            let f = sdf_eval(&arm, &qf, &p, r).expect("valid").d;
            let b = sdf_eval(&arm, &qb, &p, r).expect("valid").d;
            fd_q[i] = (f - b) / (2.0 * FD_STEP);
        }
        if !stable {
            continue;
        }
        for i in 0..q.len() {
            worst_q = worst_q.max(rel_err(sign * base.grad_q[i], fd_q[i]));
        }
        for axis in 0..2 {
            let mut step = Point2::zeros();
            step[axis] = FD_STEP;
            let f = sdf_eval(&arm, &q, &(p + step), r).expect("valid").d;
            let b = sdf_eval(&arm, &q, &(p - step), r).expect("valid").d;
            worst_p = worst_p.max(rel_err(base.grad_p[axis], (f - b) / (2.0 * FD_STEP)));
        }
        n += 1;
    }
    [
        PropertyResult::new("sdf_grad_q_matches_fd", worst_q, GRAD_TOL, n),
        PropertyResult::new("sdf_grad_p_matches_fd", worst_p, GRAD_TOL, n),
    ]
}

fn cdf_unit_norm(cfg: &CheckConfig, rng: &mut ChaCha8Rng) -> PropertyResult {
    let arm = PlanarArm::two_link();
    let settings = CdfSettings::default();
    let (mut worst, mut n, mut tries) = (0.0f64, 0, 0);
    while n < cfg.cdf_samples && tries < 20 * cfg.cdf_samples.max(1) {
        tries += 1;
        let q = random_q(rng, &arm);
        let rho = rng.gen_range(0.2..arm.reach() - 0.05);
        let phi = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let p = Point2::new(rho * phi.cos(), rho * phi.sin());
        let Ok(query) = cdf_eval(&arm, &q, &p, &settings) else { continue };
        if query.d <= settings.resolution {
            continue;
        }
        let norm = query.grad_q.iter().map(|g| g * g).sum::<f64>().sqrt();
        worst = worst.max((norm - 1.0).abs());
        n += 1;
    }
    PropertyResult::new("cdf_grad_unit_norm", worst, 1e-6, n)
}

/// Random strictly convex QP with a known feasible point and a few rows.
pub fn random_qp(rng: &mut ChaCha8Rng, max_dim: usize, max_rows: usize) -> QpProblem {
    let dim = rng.gen_range(1..=max_dim);
    let rows_n = rng.gen_range(0..=max_rows);
    let z0: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let h: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.1..5.0)).collect();
    let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let rows = (0..rows_n)
        .map(|_| {
            let coeffs: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let lhs: f64 = coeffs.iter().zip(&z0).map(|(a, b)| a * b).sum();
            let slack = rng.gen_range(0.0..1.0);
            let (sense, bound) = if rng.gen_bool(0.5) { (Sense::Le, lhs + slack) } else { (Sense::Ge, lhs - slack) };
            ConstraintRow { coeffs, bound, sense, kind: RowKind::Cbf, relaxable: false }
        })
        .collect();
    let mut lower = vec![f64::NEG_INFINITY; dim];
    let mut upper = vec![f64::INFINITY; dim];
    for i in 0..dim {
        if rng.gen_bool(0.4) {
            lower[i] = z0[i] - rng.gen_range(0.0..1.0);
        }
        if rng.gen_bool(0.4) {
            upper[i] = z0[i] + rng.gen_range(0.0..1.0);
        }
    }
    QpProblem::new(h, rows, lower, upper).expect("valid").with_linear(c).expect("valid")
}

/// Exhaustive active-set enumeration: the best primal-feasible stationary
/// point over every subset of at most `dim` constraints held with equality.
/// Exponential; meant for small instances.
pub fn enumerate_qp(p: &QpProblem) -> Option<(Vec<f64>, f64)> {
    let dim = p.dim();
    let mut cons: Vec<(Vec<f64>, f64)> = p.rows.iter().map(|r| r.as_le()).collect();
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        if p.lower[i].is_finite() {
            e[i] = -1.0;
            cons.push((e.clone(), -p.lower[i]));
        }
        if p.upper[i].is_finite() {
            e[i] = 1.0;
            cons.push((e, p.upper[i]));
        }
    }
    let m = cons.len();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut subset = Vec::new();
    enumerate_subsets(m, dim, 0, &mut subset, &mut |s| {
        let k = s.len();
        let size = dim + k;
        let mut kkt = nalgebra::DMatrix::<f64>::zeros(size, size);
        let mut rhs = nalgebra::DVector::<f64>::zeros(size);
        for i in 0..dim {
            kkt[(i, i)] = p.hessian_diag[i];
            rhs[i] = -p.linear[i];
        }
        for (j, &ci) in s.iter().enumerate() {
            for i in 0..dim {
                kkt[(i, dim + j)] = cons[ci].0[i];
                kkt[(dim + j, i)] = cons[ci].0[i];
            }
            rhs[dim + j] = cons[ci].1;
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { return };
        let z: Vec<f64> = sol.iter().take(dim).copied().collect();
        if z.iter().any(|v| !v.is_finite()) || p.max_violation(&z) > 1e-9 {
            return;
        }
        let f = p.objective(&z);
        if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best = Some((z, f));
        }
    });
    best
}

fn enumerate_subsets(m: usize, max: usize, start: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    f(cur);
    if cur.len() == max {
        return;
    }
    for i in start..m {
        cur.push(i);
        enumerate_subsets(m, max, i + 1, cur, f);
        cur.pop();
    }
}

fn qp_oracle(cfg: &CheckConfig, rng: &mut ChaCha8Rng) -> [PropertyResult; 2] {
    let (mut obj_err, mut kkt) = (0.0f64, 0.0f64);
    for _ in 0..cfg.qp_instances {
        let p = random_qp(rng, 4, 5);
        let sol = p.solve();
        match enumerate_qp(&p) {
            Some((_, f)) if sol.is_optimal() => {
                obj_err = obj_err.max((p.objective(&sol.z) - f).abs() / f.abs().max(1.0));
                kkt = kkt.max(verify_kkt(&p, &sol).max());
            }
            // A feasible point exists by construction, so either side
            // failing counts as an unbounded error.
            _ => obj_err = f64::INFINITY,
        }
    }
    [
        PropertyResult::new("qp_matches_enumeration", obj_err, 1e-6, cfg.qp_instances),
        PropertyResult::new("qp_kkt_residual", kkt, 1e-8, cfg.qp_instances),
    ]
}

/// Runs every property. Deterministic for a given config.
pub fn run_checks(cfg: &CheckConfig) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    out.extend(sdf_gradients(cfg, &mut rng));
    out.push(cdf_unit_norm(cfg, &mut rng));
    out.extend(qp_oracle(cfg, &mut rng));
    out
}
