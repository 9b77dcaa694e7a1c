//! Randomized S1/S2/S3 scenario families and aggregate reports.
//!
//! Every trial draws from its own ChaCha stream keyed by
//! `(master seed, family, trial index)`, so results do not depend on which
//! variants run or on thread scheduling.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{ControllerVariant, EnvironmentState, Obstacle, Target, VariantTag};
use crate::kinematics::{PlanarArm, Point2};
use crate::simulation::{simulate, Outcome, Scenario, TrajectoryLog, PLANAR_GOAL, PLANAR_OBSTACLE_RADIUS, PLANAR_START};
use crate::{Error, Result, DEFAULT_T_MAX};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TRIALS: usize = 100;
/// Resampling budget per trial before it is skipped.
pub const MAX_SPAWN_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FamilyName {
    S1,
    S2,
    S3,
}

impl FamilyName {
    pub const ALL: [FamilyName; 3] = [FamilyName::S1, FamilyName::S2, FamilyName::S3];

    fn index(self) -> u64 {
        match self {
            FamilyName::S1 => 1,
            FamilyName::S2 => 2,
            FamilyName::S3 => 3,
        }
    }
}

impl fmt::Display for FamilyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.index())
    }
}

impl FromStr for FamilyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S1" => Ok(FamilyName::S1),
            "S2" => Ok(FamilyName::S2),
            "S3" => Ok(FamilyName::S3),
            _ => Err(Error::InvalidFamily(format!("unknown family {s:?}; valid: S1, S2, S3"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

/// Spawn box and velocity distribution of one obstacle. The velocity is
/// `axis · s` with `s` uniform in `speed` (signed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpawnSpec {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub axis: Axis,
    pub speed: (f64, f64),
}

impl SpawnSpec {
    pub fn new(x: (f64, f64), y: (f64, f64), axis: Axis, speed: (f64, f64)) -> Self {
        Self { x, y, axis, speed }
    }

    fn validate(&self) -> Result<()> {
        let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 <= r.1;
        if !(ok(self.x) && ok(self.y) && ok(self.speed)) || self.x.0 == self.x.1 || self.y.0 == self.y.1 {
            return Err(Error::InvalidFamily(format!("degenerate spawn spec {self:?}")));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng, radius: f64) -> Obstacle {
        let cx = rng.gen_range(self.x.0..self.x.1);
        let cy = rng.gen_range(self.y.0..self.y.1);
        let s = if self.speed.0 < self.speed.1 { rng.gen_range(self.speed.0..self.speed.1) } else { self.speed.0 };
        let velocity = match self.axis {
            Axis::X => Point2::new(s, 0.0),
            Axis::Y => Point2::new(0.0, s),
        };
        Obstacle::new(Point2::new(cx, cy), radius, velocity)
    }
}

/// Sign convention for the second S2/S3 obstacle pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum S2Signs {
    /// Both obstacles head toward the arm's sweep (−x for the first, +y for
    /// the second).
    #[default]
    Toward,
    /// First obstacle along +x, second along −y.
    Literal,
}

impl FromStr for S2Signs {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "toward" => Ok(S2Signs::Toward),
            "literal" => Ok(S2Signs::Literal),
            _ => Err(Error::InvalidArgument(format!("unknown sign convention {s:?}; valid: toward, literal"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFamily {
    pub name: FamilyName,
    pub obstacles: Vec<SpawnSpec>,
    pub trials: usize,
    pub seed: u64,
    pub radius: f64,
    pub t_max: f64,
}

const UPPER_BOX: ((f64, f64), (f64, f64)) = ((1.5, 3.5), (1.5, 3.5));
const LOWER_BOX: ((f64, f64), (f64, f64)) = ((1.5, 3.0), (-3.0, -1.5));
const LEFT_BOX: ((f64, f64), (f64, f64)) = ((-3.0, -1.5), (-3.0, -1.5));

impl ScenarioFamily {
    pub fn new(name: FamilyName, seed: u64) -> Self {
        Self::with_signs(name, seed, S2Signs::default())
    }

    pub fn with_signs(name: FamilyName, seed: u64, signs: S2Signs) -> Self {
        let (s1, s2) = match signs {
            S2Signs::Toward => (-1.0, 1.0),
            S2Signs::Literal => (1.0, -1.0),
        };
        let obstacles = match name {
            FamilyName::S1 => vec![SpawnSpec::new(UPPER_BOX.0, UPPER_BOX.1, Axis::X, (-4.0, -2.0))],
            FamilyName::S2 => vec![
                SpawnSpec::new(UPPER_BOX.0, UPPER_BOX.1, Axis::X, signed(s1, 3.0, 5.0)),
                SpawnSpec::new(LOWER_BOX.0, LOWER_BOX.1, Axis::Y, signed(s2, 3.0, 5.0)),
            ],
            FamilyName::S3 => vec![
                SpawnSpec::new(UPPER_BOX.0, UPPER_BOX.1, Axis::X, signed(s1, 1.0, 3.0)),
                SpawnSpec::new(LOWER_BOX.0, LOWER_BOX.1, Axis::Y, signed(s2, 1.0, 3.0)),
                SpawnSpec::new(LEFT_BOX.0, LEFT_BOX.1, Axis::X, (1.0, 3.0)),
            ],
        };
        Self { name, obstacles, trials: DEFAULT_TRIALS, seed, radius: PLANAR_OBSTACLE_RADIUS, t_max: DEFAULT_T_MAX }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidFamily(format!("{}: trial count must be positive", self.name)));
        }
        if !(self.radius > 0.0) {
            return Err(Error::InvalidFamily(format!("{}: obstacle radius must be positive", self.name)));
        }
        self.obstacles.iter().try_for_each(SpawnSpec::validate)
    }
}

fn signed(sign: f64, lo: f64, hi: f64) -> (f64, f64) {
    if sign > 0.0 {
        (lo, hi)
    } else {
        (-hi, -lo)
    }
}

/// SplitMix64 finalizer, used to derive per-trial stream seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_seed(master: u64, family: FamilyName, trial: usize) -> u64 {
    mix(mix(mix(master) ^ family.index()) ^ trial as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub family: FamilyName,
    pub index: usize,
    /// Draws needed to get a collision-free start.
    pub attempts: usize,
    /// Scenario with a placeholder variant; see [`Scenario::with_tag`].
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    pub family: FamilyName,
    pub trials: Vec<Trial>,
    /// Trial indices whose spawn budget ran out.
    pub skipped: Vec<usize>,
}

/// Draw the family's scenarios. Starts overlapping the margined safe set
/// of the initial pose are redrawn.
pub fn generate_trials(family: &ScenarioFamily) -> Result<TrialSet> {
    family.validate()?;
    let arm = PlanarArm::two_link();
    let base_variant = ControllerVariant::new(VariantTag::CdfTvcbf);
    let clearance = base_variant.eps_cbf;
    let mut trials = Vec::with_capacity(family.trials);
    let mut skipped = Vec::new();
    for index in 0..family.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(family.seed, family.name, index));
        let mut accepted = None;
        for attempt in 1..=MAX_SPAWN_ATTEMPTS {
            let obstacles: Vec<Obstacle> = family.obstacles.iter().map(|s| s.sample(&mut rng, family.radius)).collect();
            let env = EnvironmentState { obstacles, target: Target::JointGoal(PLANAR_GOAL.into()) };
            let mut scenario = Scenario::new(arm.clone(), PLANAR_START.into(), env, base_variant.clone());
            scenario.t_max = family.t_max;
            let clear = scenario.env.obstacles.iter().all(|o| {
                crate::distance::sdf_eval(&arm, &scenario.initial_q, &o.center, o.radius).is_ok_and(|q| q.d > clearance)
            });
            if clear {
                accepted = Some((attempt, scenario));
                break;
            }
        }
        match accepted {
            Some((attempts, scenario)) => trials.push(Trial { family: family.name, index, attempts, scenario }),
            None => skipped.push(index),
        }
    }
    if trials.is_empty() {
        return Err(Error::InvalidFamily(format!("{}: spawn boxes always overlap the initial pose", family.name)));
    }
    Ok(TrialSet { family: family.name, trials, skipped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub family: FamilyName,
    pub trial: usize,
    pub variant: VariantTag,
    pub outcome: Outcome,
    pub time_to_reach: Option<f64>,
    pub path_length: f64,
    pub log: Option<TrajectoryLog>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub max: f64,
    pub avg: f64,
}

impl Stats {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let avg = values.iter().sum::<f64>() / values.len() as f64;
        Some(Self { min, max, avg })
    }
}

/// Aggregates for one (family, variant) pair. Time min/max cover successful
/// trials; the time average counts failures at `t_max`. Path statistics
/// cover successful trials only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub family: FamilyName,
    pub variant: VariantTag,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub time_min: Option<f64>,
    pub time_max: Option<f64>,
    pub time_avg: f64,
    pub path: Option<Stats>,
    pub collisions: usize,
    pub timeouts: usize,
    pub infeasible_stalls: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub cells: Vec<CellReport>,
    pub results: Vec<TrialResult>,
    /// Skipped trial indices per family.
    pub skipped: Vec<(FamilyName, Vec<usize>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BenchOptions {
    /// Keep full trajectory logs in the results.
    pub keep_logs: bool,
}

/// Worker count from `CBFMOTION_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("CBFMOTION_THREADS").ok()?.trim().parse().ok().filter(|n| *n > 0)
}

pub fn run_benchmark(families: &[ScenarioFamily], variants: &[VariantTag]) -> Result<BenchReport> {
    run_benchmark_with(families, variants, BenchOptions::default())
}

pub fn run_benchmark_with(families: &[ScenarioFamily], variants: &[VariantTag], opts: BenchOptions) -> Result<BenchReport> {
    if variants.is_empty() || families.is_empty() {
        return Ok(BenchReport::default());
    }
    let sets = families.iter().map(generate_trials).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(&Trial, VariantTag)> = sets
        .iter()
        .flat_map(|s| s.trials.iter().flat_map(|t| variants.iter().map(move |v| (t, *v))))
        .collect();
    let run = || -> Result<Vec<TrialResult>> {
        jobs.par_iter()
            .map(|(trial, tag)| {
                let log = simulate(&trial.scenario.with_tag(*tag))?;
                Ok(TrialResult {
                    family: trial.family,
                    trial: trial.index,
                    variant: *tag,
                    outcome: log.outcome,
                    time_to_reach: log.time_to_reach,
                    path_length: log.path_length,
                    log: opts.keep_logs.then_some(log),
                })
            })
            .collect()
    };
    let results = match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };

    let mut cells = Vec::new();
    for (fam, set) in families.iter().zip(&sets) {
        for &tag in variants {
            let rs: Vec<&TrialResult> = results.iter().filter(|r| r.family == set.family && r.variant == tag).collect();
            cells.push(aggregate(fam, tag, &rs));
        }
    }
    let skipped = sets.iter().map(|s| (s.family, s.skipped.clone())).collect();
    Ok(BenchReport { cells, results, skipped })
}

fn aggregate(fam: &ScenarioFamily, tag: VariantTag, rs: &[&TrialResult]) -> CellReport {
    let trials = rs.len();
    let ok: Vec<&&TrialResult> = rs.iter().filter(|r| r.outcome == Outcome::Success).collect();
    let times: Vec<f64> = ok.iter().filter_map(|r| r.time_to_reach).collect();
    let paths: Vec<f64> = ok.iter().map(|r| r.path_length).collect();
    let all_times: f64 = rs.iter().map(|r| r.time_to_reach.unwrap_or(fam.t_max)).sum();
    let count = |o: Outcome| rs.iter().filter(|r| r.outcome == o).count();
    let time = Stats::of(&times);
    CellReport {
        family: fam.name,
        variant: tag,
        trials,
        successes: ok.len(),
        success_rate: if trials == 0 { 0.0 } else { ok.len() as f64 / trials as f64 },
        time_min: time.map(|s| s.min),
        time_max: time.map(|s| s.max),
        time_avg: if trials == 0 { fam.t_max } else { all_times / trials as f64 },
        path: Stats::of(&paths),
        collisions: count(Outcome::Collision),
        timeouts: count(Outcome::Timeout),
        infeasible_stalls: count(Outcome::InfeasibleStall),
    }
}

impl BenchReport {
    pub fn cell(&self, family: FamilyName, variant: VariantTag) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.family == family && c.variant == variant)
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.4}"));
        let mut s = String::from(
            "family,variant,trials,successes,success_rate,time_min,time_max,time_avg,path_min,path_max,path_avg,collisions,timeouts,infeasible_stalls\n",
        );
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.4},{},{},{:.4},{},{},{},{},{},{}",
                c.family,
                c.variant,
                c.trials,
                c.successes,
                c.success_rate,
                opt(c.time_min),
                opt(c.time_max),
                c.time_avg,
                opt(c.path.map(|p| p.min)),
                opt(c.path.map(|p| p.max)),
                opt(c.path.map(|p| p.avg)),
                c.collisions,
                c.timeouts,
                c.infeasible_stalls
            );
        }
        s
    }

    /// Fixed-width table: one block per family, one row per variant.
    pub fn to_table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
        let mut s = String::new();
        let mut families: Vec<FamilyName> = self.cells.iter().map(|c| c.family).collect();
        families.dedup();
        for fam in families {
            let _ = writeln!(s, "{fam}");
            let _ = writeln!(
                s,
                "  {:<14} {:>7} {:>7} {:>7}   {:>7} {:>7} {:>7}   {:>7}",
                "method", "t_min", "t_max", "t_avg", "l_min", "l_max", "l_avg", "success"
            );
            for c in self.cells.iter().filter(|c| c.family == fam) {
                let _ = writeln!(
                    s,
                    "  {:<14} {:>7} {:>7} {:>7.2}   {:>7} {:>7} {:>7}   {:>7.2}",
                    c.variant.label(),
                    opt(c.time_min),
                    opt(c.time_max),
                    c.time_avg,
                    opt(c.path.map(|p| p.min)),
                    opt(c.path.map(|p| p.max)),
                    opt(c.path.map(|p| p.avg)),
                    c.success_rate
                );
            }
        }
        s
    }
}
