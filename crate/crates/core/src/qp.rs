//! Dense active-set solver for small strictly convex QPs
//!
//! ```text
//!     minimize     1/2 zᵀ H z + cᵀ z        (H diagonal, positive)
//!     subject to   rows (<= or >=), lower <= z <= upper
//! ```
//!
//! The method starts from the unconstrained minimizer and repeatedly adds the
//! most violated constraint (ties to the lowest index), taking dual steps and
//! dropping constraints whose multipliers reach zero, in the manner of
//! Goldfarb and Idnani. Each step solves the KKT system of the current
//! working set directly; problems here have at most a handful of variables.
//! A previous working set can seed the solve; it is accepted only if it
//! verifies as optimal, otherwise the solve restarts cold.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintRow, RowKind, Sense};
use crate::{Error, Result};

/// Constraint violation allowed in an accepted solution.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Threshold below which a pivot or direction is treated as zero.
pub const PIVOT_TOL: f64 = 1e-10;
/// Rows whose unit normals and bounds agree to this are merged.
pub const DEDUP_TOL: f64 = 1e-12;
/// Violation that triggers adding a constraint to the working set.
const ADD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub hessian_diag: Vec<f64>,
    pub linear: Vec<f64>,
    pub rows: Vec<ConstraintRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Identifies one constraint of a [`QpProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstraintId {
    Row(usize),
    Lower(usize),
    Upper(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: Vec<f64>,
    pub status: QpStatus,
    /// Working set at termination, sorted.
    pub active_set: Vec<ConstraintId>,
    /// Nonnegative multipliers for the `<=`-normalized rows, then lower
    /// bounds, then upper bounds.
    pub multipliers: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub warm_started: bool,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

impl QpProblem {
    pub fn new(hessian_diag: Vec<f64>, rows: Vec<ConstraintRow>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let dim = hessian_diag.len();
        let p = Self { linear: vec![0.0; dim], hessian_diag, rows, lower, upper };
        p.validate()?;
        Ok(p)
    }

    pub fn with_linear(mut self, linear: Vec<f64>) -> Result<Self> {
        self.linear = linear;
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.hessian_diag.len()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::InvalidArgument("QP needs at least one variable".into()));
        }
        if self.hessian_diag.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidArgument("Hessian diagonal must be positive and finite".into()));
        }
        if self.linear.len() != dim || self.lower.len() != dim || self.upper.len() != dim {
            return Err(Error::InvalidArgument("linear term and bounds must match the dimension".into()));
        }
        if self.linear.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("linear term must be finite".into()));
        }
        for i in 0..dim {
            if self.lower[i].is_nan() || self.upper[i].is_nan() || self.lower[i] > self.upper[i] {
                return Err(Error::InvalidArgument(format!("inconsistent bounds on variable {i}")));
            }
        }
        for (k, r) in self.rows.iter().enumerate() {
            if r.coeffs.len() != dim {
                return Err(Error::InvalidArgument(format!("row {k} has {} coefficients, expected {dim}", r.coeffs.len())));
            }
            if r.coeffs.iter().any(|c| !c.is_finite()) || !r.bound.is_finite() {
                return Err(Error::InvalidArgument(format!("row {k} is not finite")));
            }
        }
        Ok(())
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        z.iter()
            .zip(&self.hessian_diag)
            .zip(&self.linear)
            .map(|((zi, h), c)| 0.5 * h * zi * zi + c * zi)
            .sum()
    }

    /// Largest constraint violation at `z` (0 when feasible).
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| -r.slack(z));
        let bounds = (0..self.dim()).flat_map(|i| [self.lower[i] - z[i], z[i] - self.upper[i]]);
        rows.chain(bounds).fold(0.0, f64::max)
    }

    pub fn solve(&self) -> QpSolution {
        solve(self)
    }

    /// Plain-text matrix dump: a header with the objective and bounds, then
    /// one line per row with its coefficients, sense and bound.
    pub fn dump_text(&self) -> String {
        let fmt = |v: &[f64]| v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(" ");
        let mut s = String::new();
        let _ = writeln!(s, "# qp dim={} rows={}", self.dim(), self.rows.len());
        let _ = writeln!(s, "hessian {}", fmt(&self.hessian_diag));
        let _ = writeln!(s, "linear {}", fmt(&self.linear));
        let _ = writeln!(s, "lower {}", fmt(&self.lower));
        let _ = writeln!(s, "upper {}", fmt(&self.upper));
        for r in &self.rows {
            let sense = match r.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
            };
            let _ = writeln!(s, "{} {} {} {}", fmt(&r.coeffs), sense, fmt_num(r.bound), kind_name(r.kind));
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::InvalidArgument(format!("qp dump line {}: {msg}", line + 1));
        let nums = |line: usize, toks: &[&str]| -> Result<Vec<f64>> {
            toks.iter().map(|t| parse_num(t).ok_or_else(|| bad(line, &format!("bad number {t:?}")))).collect()
        };
        let mut header: HashMap<&str, Vec<f64>> = HashMap::new();
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks[0] {
                key @ ("hessian" | "linear" | "lower" | "upper") => {
                    header.insert(key, nums(i, &toks[1..])?);
                }
                _ => {
                    let pos = toks
                        .iter()
                        .position(|t| *t == "<=" || *t == ">=")
                        .ok_or_else(|| bad(i, "missing sense"))?;
                    let sense = if toks[pos] == "<=" { Sense::Le } else { Sense::Ge };
                    let coeffs = nums(i, &toks[..pos])?;
                    let bound = toks.get(pos + 1).and_then(|t| parse_num(t)).ok_or_else(|| bad(i, "missing bound"))?;
                    let kind = match toks.get(pos + 2).copied() {
                        Some("clf") => RowKind::Clf,
                        Some("joint_limit") => RowKind::JointLimit,
                        Some("hyperplane") => RowKind::Hyperplane,
                        _ => RowKind::Cbf,
                    };
                    rows.push(ConstraintRow { coeffs, bound, sense, kind, relaxable: kind == RowKind::Clf });
                }
            }
        }
        let mut take = |k: &str| header.remove(k).ok_or_else(|| Error::InvalidArgument(format!("qp dump missing `{k}`")));
        let hessian = take("hessian")?;
        let (linear, lower, upper) = (take("linear")?, take("lower")?, take("upper")?);
        Self::new(hessian, rows, lower, upper)?.with_linear(linear)
    }
}

fn kind_name(k: RowKind) -> &'static str {
    match k {
        RowKind::Clf => "clf",
        RowKind::Cbf => "cbf",
        RowKind::JointLimit => "joint_limit",
        RowKind::Hyperplane => "hyperplane",
    }
}

fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:e}")
    }
}

fn parse_num(t: &str) -> Option<f64> {
    match t {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => t.parse().ok(),
    }
}

/// A constraint in `a·z <= b` form with `‖a‖ = 1`.
#[derive(Debug, Clone)]
struct Canon {
    a: Vec<f64>,
    b: f64,
    id: ConstraintId,
    /// Norm of the original coefficients (multiplier rescaling).
    scale: f64,
}

/// Normalizes, drops infinite bounds and merges duplicate rows. Returns
/// `None` if a zero row is violated outright.
fn canonicalize(p: &QpProblem) -> Option<Vec<Canon>> {
    let dim = p.dim();
    let mut out: Vec<Canon> = Vec::new();
    let mut seen: HashMap<Vec<i64>, usize> = HashMap::new();
    for (k, row) in p.rows.iter().enumerate() {
        let (a, b) = row.as_le();
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= PIVOT_TOL {
            if b < -FEASIBILITY_TOL {
                return None;
            }
            continue;
        }
        let a: Vec<f64> = a.iter().map(|x| x / norm).collect();
        let b = b / norm;
        let key: Vec<i64> = a.iter().map(|x| (x / DEDUP_TOL).round() as i64).collect();
        match seen.get(&key) {
            Some(&j) => {
                if b < out[j].b {
                    out[j] = Canon { a, b, id: ConstraintId::Row(k), scale: norm };
                }
            }
            None => {
                seen.insert(key, out.len());
                out.push(Canon { a, b, id: ConstraintId::Row(k), scale: norm });
            }
        }
    }
    for i in 0..dim {
        if p.lower[i].is_finite() {
            let mut a = vec![0.0; dim];
            a[i] = -1.0;
            out.push(Canon { a, b: -p.lower[i], id: ConstraintId::Lower(i), scale: 1.0 });
        }
    }
    for i in 0..dim {
        if p.upper[i].is_finite() {
            let mut a = vec![0.0; dim];
            a[i] = 1.0;
            out.push(Canon { a, b: p.upper[i], id: ConstraintId::Upper(i), scale: 1.0 });
        }
    }
    Some(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `[H Nᵀ; N 0] [x; y] = [r; s]` for the working-set rows `N`.
fn kkt_solve(h: &[f64], cons: &[Canon], active: &[usize], r: &[f64], s: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = h.len();
    let m = active.len();
    let mut k = DMatrix::zeros(n + m, n + m);
    for i in 0..n {
        k[(i, i)] = h[i];
    }
    for (j, &c) in active.iter().enumerate() {
        for i in 0..n {
            k[(i, n + j)] = cons[c].a[i];
            k[(n + j, i)] = cons[c].a[i];
        }
    }
    let rhs = DVector::from_iterator(n + m, r.iter().chain(s).copied());
    let sol = k.lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((sol.rows(0, n).iter().copied().collect(), sol.rows(n, m).iter().copied().collect()))
}

fn multiplier_slot(p: &QpProblem, id: ConstraintId) -> usize {
    match id {
        ConstraintId::Row(k) => k,
        ConstraintId::Lower(i) => p.rows.len() + i,
        ConstraintId::Upper(i) => p.rows.len() + p.dim() + i,
    }
}

pub fn solve(problem: &QpProblem) -> QpSolution {
    solve_warm(problem, &[])
}

/// Solve, first trying `warm` (a previous active set) as the working set.
pub fn solve_warm(problem: &QpProblem, warm: &[ConstraintId]) -> QpSolution {
    let dim = problem.dim();
    let n_mult = problem.rows.len() + 2 * dim;
    let infeasible = |z: Vec<f64>, iterations| QpSolution {
        z,
        status: QpStatus::Infeasible,
        active_set: Vec::new(),
        multipliers: vec![0.0; n_mult],
        kkt_residual: f64::INFINITY,
        iterations,
        warm_started: false,
    };
    let Some(cons) = canonicalize(problem) else {
        return infeasible(vec![0.0; dim], 0);
    };

    let finish = |z: Vec<f64>, active: &[usize], lambda: &[f64], iterations, warm_started| {
        let mut multipliers = vec![0.0; n_mult];
        let mut active_set = Vec::with_capacity(active.len());
        for (&c, &l) in active.iter().zip(lambda) {
            multipliers[multiplier_slot(problem, cons[c].id)] = l / cons[c].scale;
            active_set.push(cons[c].id);
        }
        active_set.sort();
        let mut sol = QpSolution {
            z,
            status: QpStatus::Optimal,
            active_set,
            multipliers,
            kkt_residual: 0.0,
            iterations,
            warm_started,
        };
        sol.kkt_residual = verify_kkt(problem, &sol).max();
        sol
    };

    if !warm.is_empty() {
        let active: Vec<usize> = warm
            .iter()
            .filter_map(|id| cons.iter().position(|c| c.id == *id))
            .collect();
        if let Some((z, lambda)) = try_working_set(problem, &cons, &active) {
            return finish(z, &active, &lambda, 1, true);
        }
    }

    let h = &problem.hessian_diag;
    let mut z: Vec<f64> = problem.linear.iter().zip(h).map(|(c, hi)| -c / hi).collect();
    let mut active: Vec<usize> = Vec::new();
    let mut lambda: Vec<f64> = Vec::new();
    let max_iter = 50 * (cons.len() + dim) + 100;
    let mut iter = 0;

    loop {
        // Most violated inactive constraint, ties to the lowest index.
        let mut pick: Option<(usize, f64)> = None;
        for (j, c) in cons.iter().enumerate() {
            if active.contains(&j) {
                continue;
            }
            let viol = dot(&c.a, &z) - c.b;
            if viol > ADD_TOL && pick.is_none_or(|(_, v)| viol > v) {
                pick = Some((j, viol));
            }
        }
        let Some((p, _)) = pick else {
            return finish(z, &active, &lambda, iter, false);
        };
        let mut lambda_p = 0.0;
        loop {
            iter += 1;
            if iter > max_iter {
                return infeasible(z, iter);
            }
            let neg_ap: Vec<f64> = cons[p].a.iter().map(|x| -x).collect();
            let zeros_m = vec![0.0; active.len()];
            let Some((dz, dl)) = kkt_solve(h, &cons, &active, &neg_ap, &zeros_m) else {
                return infeasible(z, iter);
            };
            let ap_dz = dot(&cons[p].a, &dz);
            let dz_norm = dz.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let full = if ap_dz < -PIVOT_TOL && dz_norm > PIVOT_TOL {
                (cons[p].b - dot(&cons[p].a, &z)) / ap_dz
            } else {
                f64::INFINITY
            };
            let mut partial = f64::INFINITY;
            let mut drop_at = None;
            for (k, (&l, &d)) in lambda.iter().zip(&dl).enumerate() {
                if d < -PIVOT_TOL {
                    let t = -l / d;
                    if t < partial {
                        partial = t;
                        drop_at = Some(k);
                    }
                }
            }
            if full.is_infinite() && partial.is_infinite() {
                return infeasible(z, iter);
            }
            let t = full.min(partial).max(0.0);
            for (zi, d) in z.iter_mut().zip(&dz) {
                *zi += t * d;
            }
            for (l, d) in lambda.iter_mut().zip(&dl) {
                *l += t * d;
            }
            lambda_p += t;
            if partial < full {
                let k = drop_at.expect("partial step has a blocking multiplier");
                active.remove(k);
                lambda.remove(k);
            } else {
                active.push(p);
                lambda.push(lambda_p);
                break;
            }
        }
    }
}

/// Equality-constrained solve on a guessed working set, accepted only if
/// primal and dual feasible.
fn try_working_set(problem: &QpProblem, cons: &[Canon], active: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
    let neg_c: Vec<f64> = problem.linear.iter().map(|c| -c).collect();
    let b: Vec<f64> = active.iter().map(|&c| cons[c].b).collect();
    let (z, lambda) = kkt_solve(&problem.hessian_diag, cons, active, &neg_c, &b)?;
    if lambda.iter().any(|l| *l < -FEASIBILITY_TOL) {
        return None;
    }
    if cons.iter().any(|c| dot(&c.a, &z) - c.b > ADD_TOL) {
        return None;
    }
    let lambda = lambda.into_iter().map(|l| l.max(0.0)).collect();
    Some((z, lambda))
}

/// Optimality residuals of a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub primal: f64,
    pub dual: f64,
    pub stationarity: f64,
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.stationarity).max(self.complementarity)
    }

    pub fn accepted(&self) -> bool {
        self.max() <= FEASIBILITY_TOL
    }
}

fn complementarity(lambda: f64, slack: f64) -> f64 {
    (lambda * slack).abs() / lambda.abs().max(1.0)
}

/// Primal feasibility, dual feasibility, stationarity (∞-norm of
/// `Hz + c + Σ λ a`) and complementary slackness of `solution`.
/// Complementarity is scaled by the multiplier once it exceeds one, so
/// near-degenerate rows with huge multipliers are judged by their slack.
pub fn verify_kkt(problem: &QpProblem, solution: &QpSolution) -> KktReport {
    let dim = problem.dim();
    let z = &solution.z;
    let lam = &solution.multipliers;
    let mut grad: Vec<f64> = (0..dim).map(|i| problem.hessian_diag[i] * z[i] + problem.linear[i]).collect();
    let mut dual = 0.0f64;
    let mut comp = 0.0f64;
    for (k, row) in problem.rows.iter().enumerate() {
        let (a, b) = row.as_le();
        let l = lam.get(k).copied().unwrap_or(0.0);
        for i in 0..dim {
            grad[i] += l * a[i];
        }
        dual = dual.max(-l);
        comp = comp.max(complementarity(l, b - dot(&a, z)));
    }
    for i in 0..dim {
        let lo = lam.get(problem.rows.len() + i).copied().unwrap_or(0.0);
        let up = lam.get(problem.rows.len() + dim + i).copied().unwrap_or(0.0);
        grad[i] += up - lo;
        dual = dual.max(-lo).max(-up);
        if lo != 0.0 {
            comp = comp.max(complementarity(lo, z[i] - problem.lower[i]));
        }
        if up != 0.0 {
            comp = comp.max(complementarity(up, problem.upper[i] - z[i]));
        }
    }
    KktReport {
        primal: problem.max_violation(z),
        dual: dual.max(0.0),
        stationarity: grad.iter().fold(0.0f64, |m, g| m.max(g.abs())),
        complementarity: comp,
    }
}
