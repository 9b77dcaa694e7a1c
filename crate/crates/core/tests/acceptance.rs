//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. The oracles here are written from scratch
//! and share no code with the library beyond its public entry points.

use std::f64::consts::PI;
use std::process::ExitCode;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cbfmotion::benchmark::{run_benchmark_with, BenchOptions, BenchReport, FamilyName, ScenarioFamily};
use cbfmotion::constraints::{ConstraintRow, RowKind, Sense};
use cbfmotion::controller::VariantTag;
use cbfmotion::distance::{cdf_eval, sdf_eval, CdfSettings};
use cbfmotion::qp::{verify_kkt, QpProblem, QpStatus};
use cbfmotion::simulation::{crossing_scenario, reaching_demo, simulate, StepStatus};
use cbfmotion::{PlanarArm, Point2, DEFAULT_DT};

struct Verdict {
    id: usize,
    title: &'static str,
    passed: bool,
    detail: String,
}

fn rate(report: &BenchReport, family: FamilyName, tag: VariantTag) -> f64 {
    report.cell(family, tag).map_or(f64::NAN, |c| c.success_rate)
}

fn criterion_1(report: &BenchReport) -> Verdict {
    let s1 = FamilyName::S1;
    let cdf = rate(report, s1, VariantTag::CdfTvcbf);
    let sdf = rate(report, s1, VariantTag::SdfTvcbf);
    let base = rate(report, s1, VariantTag::SdfCbfBaseline);
    let avg = report.cell(s1, VariantTag::CdfTvcbf).map_or(f64::NAN, |c| c.time_avg);
    let checks = [
        (cdf >= 0.95, format!("cdf_tvcbf {cdf:.2} (>= 0.95)")),
        (sdf >= 0.95, format!("sdf_tvcbf {sdf:.2} (>= 0.95)")),
        (base <= 0.10, format!("sdf_cbf_baseline {base:.2} (<= 0.10)")),
        ((avg - 3.2).abs() <= 0.3 * 3.2, format!("cdf_tvcbf avg time {avg:.2} s (3.2 s +/- 30%)")),
    ];
    summarize(1, "S1 success rates and time", &checks)
}

fn criterion_2(report: &BenchReport) -> Verdict {
    let mut checks = Vec::new();
    for fam in FamilyName::ALL {
        let cdf = rate(report, fam, VariantTag::CdfTvcbf);
        let sdf = rate(report, fam, VariantTag::SdfTvcbf);
        let base = rate(report, fam, VariantTag::SdfCbfBaseline);
        let sh_s = rate(report, fam, VariantTag::SdfShBaseline);
        let sh_c = rate(report, fam, VariantTag::CdfShBaseline);
        checks.push((
            cdf >= sh_c && sh_c >= sh_s,
            format!("{fam}: cdf_tvcbf {cdf:.2} >= cdf_sh {sh_c:.2} >= sdf_sh {sh_s:.2} (sdf_tvcbf {sdf:.2})"),
        ));
        checks.push((base <= 0.10, format!("{fam}: sdf_cbf_baseline {base:.2} (<= 0.10)")));
    }
    summarize(2, "ordering across S1-S3", &checks)
}

fn criterion_3() -> Verdict {
    let mut checks = Vec::new();
    for speed in [0.5, 1.5, 2.5, 4.5] {
        match simulate(&crossing_scenario(VariantTag::CdfTvcbf, speed)) {
            Ok(log) => {
                let dmin = log.min_raw_distance();
                checks.push((
                    log.success() && dmin >= 0.0,
                    format!("{speed} m/s {} (min d {dmin:.3} m)", log.outcome),
                ));
            }
            Err(e) => checks.push((false, format!("{speed} m/s error: {e}"))),
        }
    }
    summarize(3, "single crossing obstacle", &checks)
}

fn criterion_4() -> Verdict {
    let log = match reaching_demo() {
        Ok(log) => log,
        Err(e) => return summarize(4, "moving-target demo", &[(false, format!("error: {e}"))]),
    };
    let recs = &log.records;
    let final_gap = log.final_goal_distance().unwrap_or(f64::INFINITY);
    let dmin = log.min_raw_distance();
    // A safety-priority increase: V grows while the CLF was being relaxed.
    let safety_rise = recs
        .windows(2)
        .find(|w| w[1].t >= 0.8 - 1e-9 && w[1].v > w[0].v + 1e-9 && w[0].delta > 1e-6)
        .map(|w| w[1].t);
    let cusp = recs
        .windows(3)
        .filter(|w| w[1].v > w[0].v && w[1].v >= w[2].v)
        .map(|w| w[1].t)
        .find(|t| (3.0..=5.0).contains(t));
    let checks = [
        (log.success(), format!("{} at {:.1} s", log.outcome, log.final_time())),
        (final_gap <= 0.02, format!("final target distance {final_gap:.4} rad (<= 0.02)")),
        (dmin >= 0.0, format!("min d {dmin:.3} m")),
        (safety_rise.is_some(), format!("V rises under relaxation at {safety_rise:?} s")),
        (cusp.is_some(), format!("V local max in [3, 5] s at {cusp:?} s")),
    ];
    summarize(4, "moving-target demo", &checks)
}

fn random_q(rng: &mut ChaCha8Rng, arm: &PlanarArm) -> Vec<f64> {
    (0..arm.dof()).map(|i| rng.gen_range(arm.q_min()[i]..arm.q_max()[i])).collect()
}

fn random_reachable_point(rng: &mut ChaCha8Rng, arm: &PlanarArm) -> Point2 {
    let rho = rng.gen_range(0.3..arm.reach() - 0.1);
    let phi = rng.gen_range(-PI..PI);
    Point2::new(rho * phi.cos(), rho * phi.sin())
}

fn criterion_5() -> Verdict {
    let arm = PlanarArm::two_link();
    let settings = CdfSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut n, mut worst, mut skipped) = (0, 0.0f64, 0);
    while n < 1000 {
        let q = random_q(&mut rng, &arm);
        let p = random_reachable_point(&mut rng, &arm);
        let query = cdf_eval(&arm, &q, &p, &settings).expect("reachable point");
        if query.d <= settings.resolution {
            skipped += 1;
            continue;
        }
        let norm = query.grad_q.iter().map(|g| g * g).sum::<f64>().sqrt();
        worst = worst.max((norm - 1.0).abs());
        n += 1;
    }
    summarize(
        5,
        "CDF gradient unit norm",
        &[(worst <= 1e-6, format!("{n} queries, worst |norm - 1| {worst:.2e}, {skipped} near-contact skipped"))],
    )
}

/// Distance from `p` to the arm centerline, by hand.
fn centerline_distance(lengths: &[f64], q: &[f64], p: &Point2) -> (f64, usize) {
    let (mut x, mut y, mut angle) = (0.0, 0.0, 0.0);
    let mut best = (f64::INFINITY, 0);
    for (k, l) in lengths.iter().enumerate() {
        angle += q[k];
        let (nx, ny) = (x + l * angle.cos(), y + l * angle.sin());
        let (dx, dy) = (nx - x, ny - y);
        let t = (((p.x - x) * dx + (p.y - y) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
        let d = ((p.x - x - t * dx).powi(2) + (p.y - y - t * dy).powi(2)).sqrt();
        if d < best.0 {
            best = (d, k);
        }
        (x, y) = (nx, ny);
    }
    best
}

/// Nodes of the grid `origin + step * (i, j)` where, to first order, the
/// zero level of the centerline distance passes within half a cell diagonal.
fn band_nodes(lengths: &[f64], p: &Point2, origin: [f64; 2], step: f64, n: [usize; 2]) -> Vec<[f64; 2]> {
    let at = |i: usize, j: usize| [origin[0] + i as f64 * step, origin[1] + j as f64 * step];
    let grid: Vec<f64> = (0..n[0])
        .flat_map(|i| (0..n[1]).map(move |j| (i, j)))
        .map(|(i, j)| centerline_distance(lengths, &at(i, j), p).0)
        .collect();
    let g = |i: usize, j: usize| grid[i * n[1] + j];
    let mut out = Vec::new();
    for i in 0..n[0] {
        for j in 0..n[1] {
            let d = g(i, j);
            let slope = |a: Option<f64>, b: Option<f64>| {
                [a, b].iter().flatten().map(|v| (v - d).abs()).fold(0.0f64, f64::max)
            };
            let sx = slope(i.checked_sub(1).map(|k| g(k, j)), (i + 1 < n[0]).then(|| g(i + 1, j)));
            let sy = slope(j.checked_sub(1).map(|k| g(i, k)), (j + 1 < n[1]).then(|| g(i, j + 1)));
            if d <= (sx * sx + sy * sy).sqrt() * std::f64::consts::FRAC_1_SQRT_2 {
                out.push(at(i, j));
            }
        }
    }
    out
}

/// Grid brute force of the configuration-space distance to contact with
/// point `p`. Candidate cells of a `step` grid are confirmed on a grid 20
/// times finer, which rejects near misses at the tips and at the cut.
fn brute_force_cdf(arm: &PlanarArm, q: &[f64], p: &Point2, step: f64) -> f64 {
    let lengths = arm.link_lengths();
    let (lo, hi) = (arm.q_min(), arm.q_max());
    let n = [0, 1].map(|k| ((hi[k] - lo[k]) / step).round() as usize + 1);
    let fine = step / 20.0;
    let mut best = f64::INFINITY;
    for c in band_nodes(lengths, p, [lo[0], lo[1]], step, n) {
        let origin = [0, 1].map(|k| (c[k] - step / 2.0).max(lo[k]));
        let count = [0, 1].map(|k| (((c[k] + step / 2.0).min(hi[k]) - origin[k]) / fine).round() as usize + 1);
        for f in band_nodes(lengths, p, origin, fine, count) {
            best = best.min(((f[0] - q[0]).powi(2) + (f[1] - q[1]).powi(2)).sqrt());
        }
    }
    best
}

fn criterion_6() -> Verdict {
    let arm = PlanarArm::two_link();
    let mut rng = ChaCha8Rng::seed_from_u64(6);

    // SDF gradients against central differences.
    let h = 1e-6;
    let (mut worst, mut n) = (0.0f64, 0);
    while n < 500 {
        let q = random_q(&mut rng, &arm);
        let p = Point2::new(rng.gen_range(-4.5..4.5), rng.gen_range(-4.5..4.5));
        let r = 0.3;
        let (d0, link) = centerline_distance(arm.link_lengths(), &q, &p);
        if d0 < 1e-3 {
            continue;
        }
        let base = sdf_eval(&arm, &q, &p, r).expect("valid");
        let mut fd = Vec::new();
        let mut stable = true;
        for i in 0..2 {
            let (mut qf, mut qb) = (q.clone(), q.clone());
            qf[i] += h;
            qb[i] -= h;
            let (df, lf) = centerline_distance(arm.link_lengths(), &qf, &p);
            let (db, lb) = centerline_distance(arm.link_lengths(), &qb, &p);
            stable &= lf == link && lb == link;
            fd.push((df - db) / (2.0 * h));
        }
        for axis in 0..2 {
            let mut e = Point2::zeros();
            e[axis] = h;
            let (df, lf) = centerline_distance(arm.link_lengths(), &q, &(p + e));
            let (db, lb) = centerline_distance(arm.link_lengths(), &q, &(p - e));
            stable &= lf == link && lb == link;
            fd.push((df - db) / (2.0 * h));
        }
        if !stable {
            continue;
        }
        let analytic = [base.grad_q[0], base.grad_q[1], base.grad_p.x, base.grad_p.y];
        let err: f64 = analytic.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
        worst = worst.max(err / scale);
        n += 1;
    }
    let sdf_ok = worst <= 1e-4;

    // CDF distance against the grid oracle.
    let step = 0.005;
    let tol = 2.0 * step * 2f64.sqrt();
    let settings = CdfSettings::default();
    let mut cdf_worst = 0.0f64;
    for _ in 0..200 {
        let q = random_q(&mut rng, &arm);
        let p = random_reachable_point(&mut rng, &arm);
        let d = cdf_eval(&arm, &q, &p, &settings).expect("reachable").d;
        cdf_worst = cdf_worst.max((d - brute_force_cdf(&arm, &q, &p, step)).abs());
    }
    let cdf_ok = cdf_worst <= tol;
    summarize(
        6,
        "distance-field oracles",
        &[
            (sdf_ok, format!("SDF gradient worst rel. error {worst:.2e} over {n} queries (<= 1e-4)")),
            (cdf_ok, format!("CDF vs grid worst |diff| {cdf_worst:.4} rad over 200 queries (<= {tol:.4})")),
        ],
    )
}

/// Random strictly convex diagonal QP. Rows are mostly built around a known
/// feasible point; a few are left free so infeasible instances also occur.
fn random_qp(rng: &mut ChaCha8Rng) -> QpProblem {
    let dim = rng.gen_range(1..=8);
    let m = rng.gen_range(0..=10);
    let anchor: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let hess: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.05..10.0)).collect();
    let lin: Vec<f64> = (0..dim).map(|_| rng.gen_range(-4.0..4.0)).collect();
    let rows = (0..m)
        .map(|_| {
            let coeffs: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let at: f64 = coeffs.iter().zip(&anchor).map(|(a, z)| a * z).sum();
            let slack = if rng.gen_bool(0.9) { rng.gen_range(0.0..0.8) } else { rng.gen_range(-1.0..0.0) };
            let (sense, bound) = if rng.gen_bool(0.5) { (Sense::Le, at + slack) } else { (Sense::Ge, at - slack) };
            ConstraintRow { coeffs, bound, sense, kind: RowKind::Cbf, relaxable: false }
        })
        .collect();
    let mut lower = vec![f64::NEG_INFINITY; dim];
    let mut upper = vec![f64::INFINITY; dim];
    // Bounds on at most two variables keep the enumeration small.
    for _ in 0..rng.gen_range(0..=2) {
        let i = rng.gen_range(0..dim);
        lower[i] = anchor[i] - rng.gen_range(0.0..1.0);
        upper[i] = anchor[i] + rng.gen_range(0.0..1.0);
    }
    QpProblem::new(hess, rows, lower, upper).unwrap().with_linear(lin).unwrap()
}

/// Exhaustive active-set enumeration: every subset of at most `dim`
/// constraints is held with equality; the best primal-feasible point wins.
fn enumerate(p: &QpProblem) -> Option<f64> {
    let dim = p.dim();
    // All constraints as a·z <= b.
    let mut cons: Vec<(Vec<f64>, f64)> = p
        .rows
        .iter()
        .map(|r| match r.sense {
            Sense::Le => (r.coeffs.clone(), r.bound),
            Sense::Ge => (r.coeffs.iter().map(|c| -c).collect(), -r.bound),
        })
        .collect();
    for i in 0..dim {
        let unit = |s: f64| (0..dim).map(|k| if k == i { s } else { 0.0 }).collect::<Vec<_>>();
        if p.lower[i].is_finite() {
            cons.push((unit(-1.0), -p.lower[i]));
        }
        if p.upper[i].is_finite() {
            cons.push((unit(1.0), p.upper[i]));
        }
    }
    let feasible = |z: &DVector<f64>| {
        cons.iter().all(|(a, b)| a.iter().zip(z.iter()).map(|(x, y)| x * y).sum::<f64>() <= b + 1e-9)
    };
    let objective = |z: &DVector<f64>| (0..dim).map(|i| 0.5 * p.hessian_diag[i] * z[i] * z[i] + p.linear[i] * z[i]).sum::<f64>();
    let mut best: Option<f64> = None;
    let m = cons.len();
    for mask in 0u32..(1u32 << m) {
        let active: Vec<usize> = (0..m).filter(|k| mask & (1 << k) != 0).collect();
        if active.len() > dim {
            continue;
        }
        // z = H^-1 (-c - Aᵀλ) with A H^-1 Aᵀ λ = -b - A H^-1 c.
        let k = active.len();
        let hinv: Vec<f64> = p.hessian_diag.iter().map(|h| 1.0 / h).collect();
        let z_free = DVector::from_iterator(dim, (0..dim).map(|i| -p.linear[i] * hinv[i]));
        let z = if k == 0 {
            z_free
        } else {
            let a = DMatrix::from_fn(k, dim, |r, c| cons[active[r]].0[c]);
            let s = DMatrix::from_fn(k, k, |r, c| (0..dim).map(|i| a[(r, i)] * hinv[i] * a[(c, i)]).sum::<f64>());
            let rhs = DVector::from_fn(k, |r, _| a.row(r).dot(&z_free.transpose()) - cons[active[r]].1);
            let Some(lam) = s.lu().solve(&rhs) else { continue };
            if lam.iter().any(|v| !v.is_finite()) {
                continue;
            }
            let at_lam = a.transpose() * lam;
            DVector::from_fn(dim, |i, _| z_free[i] - hinv[i] * at_lam[i])
        };
        if feasible(&z) {
            let f = objective(&z);
            if best.is_none_or(|b| f < b) {
                best = Some(f);
            }
        }
    }
    best
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut obj_worst, mut kkt_worst) = (0.0f64, 0.0f64);
    let (mut status_mismatch, mut infeasible) = (0, 0);
    for _ in 0..500 {
        let p = random_qp(&mut rng);
        let sol = p.solve();
        match (enumerate(&p), sol.status) {
            (Some(f), QpStatus::Optimal) => {
                obj_worst = obj_worst.max((p.objective(&sol.z) - f).abs());
                kkt_worst = kkt_worst.max(verify_kkt(&p, &sol).max());
            }
            (None, QpStatus::Infeasible) => infeasible += 1,
            _ => status_mismatch += 1,
        }
    }
    summarize(
        7,
        "QP solver vs enumeration",
        &[
            (status_mismatch == 0, format!("status mismatches {status_mismatch} ({infeasible} agreed infeasible)")),
            (obj_worst <= 1e-6, format!("worst objective gap {obj_worst:.2e} (<= 1e-6)")),
            (kkt_worst <= 1e-8, format!("worst KKT residual {kkt_worst:.2e} (<= 1e-8)")),
        ],
    )
}

fn criterion_8(report: &BenchReport) -> Verdict {
    let arm = PlanarArm::two_link();
    let alpha = 1.0;
    let mut rollouts = 0;
    let mut barrier_breaks = Vec::new();
    let mut limit_breaks = 0;
    let mut collisions = Vec::new();
    for r in &report.results {
        if !matches!(r.variant, VariantTag::CdfTvcbf | VariantTag::SdfTvcbf) {
            continue;
        }
        let log = r.log.as_ref().expect("benchmark keeps logs");
        if log.records.iter().any(|s| s.status == StepStatus::Infeasible) {
            continue;
        }
        rollouts += 1;
        let mut broke = false;
        for w in log.records.windows(2) {
            for (h_prev, h) in w[0].h.iter().zip(&w[1].h) {
                if *h < -alpha * DEFAULT_DT * h_prev.abs() - 1e-9 {
                    broke = true;
                }
            }
        }
        if broke {
            barrier_breaks.push(format!("{}/{}#{}", r.family, r.variant.name(), r.trial));
        }
        if log.min_raw_distance() < 0.0 {
            collisions.push(format!("{}/{}#{}", r.family, r.variant.name(), r.trial));
        }
        limit_breaks += log.records.iter().filter(|s| !arm.within_limits(&s.q)).count();
    }
    summarize(
        8,
        "forward invariance on feasible rollouts",
        &[
            (barrier_breaks.is_empty(), format!("{rollouts} rollouts, barrier breaks {barrier_breaks:?}")),
            (collisions.is_empty(), format!("raw d < 0 in {collisions:?}")),
            (limit_breaks == 0, format!("joint-limit violations {limit_breaks}")),
        ],
    )
}

fn summarize(id: usize, title: &'static str, checks: &[(bool, String)]) -> Verdict {
    let passed = checks.iter().all(|(ok, _)| *ok);
    let detail = checks
        .iter()
        .map(|(ok, s)| if *ok { s.clone() } else { format!("[x] {s}") })
        .collect::<Vec<_>>()
        .join("; ");
    Verdict { id, title, passed, detail }
}

fn main() -> ExitCode {
    // Ignore libtest arguments such as `--nocapture` or filters.
    let families: Vec<ScenarioFamily> = FamilyName::ALL.iter().map(|f| ScenarioFamily::new(*f, 42)).collect();
    let report = run_benchmark_with(&families, &VariantTag::BENCHMARK, BenchOptions { keep_logs: true })
        .expect("benchmark runs");

    let verdicts = [
        criterion_1(&report),
        criterion_2(&report),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(&report),
    ];
    for v in &verdicts {
        let mark = if v.passed { "PASS" } else { "FAIL" };
        println!("criterion {} {mark}: {}: {}", v.id, v.title, v.detail);
    }
    let failed = verdicts.iter().filter(|v| !v.passed).count();
    println!("acceptance: {} of {} criteria passed", verdicts.len() - failed, verdicts.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
