//! Randomized inequality campaigns over the pointwise machinery.
//!
//! A [`SuiteSpec`] names one family of relations, the dimensions to sample
//! and a seed. [`run_suite`] evaluates the relations on seeded inputs in
//! chunks, shrinks retained violations and returns a [`SuiteReport`] that is
//! identical for identical specs (wall time is kept out of the serialized form).

pub mod check;
mod scan;
mod shrink;
mod suites;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::PinchParams;
use crate::error::{Error, Result};
use crate::frames::{admissible, PointData, PointRecord};

pub use check::{Check, Relation, LE_TOL};
pub use scan::{admissible_dims, constant_scan, constant_values, ConstantValue};
pub use shrink::shrink_counterexample;
pub use suites::TrialInput;

/// Trials per parallel chunk; chunks are merged in order.
const CHUNK: usize = 256;

/// Counterexamples kept (and shrunk) per report.
pub const MAX_KEPT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteId {
    AmbientSymmetries,
    B2FrameRelations,
    OmegaDualRoute,
    PftChains,
    R2Identity,
    LestBounds,
    ReactionBounds,
    QZeroNegativity,
    HZeroBranch,
    SimonsZBound,
    GaussPositivity,
    AmwBound,
    ConstantScan,
}

impl SuiteId {
    pub const ALL: [SuiteId; 13] = [
        SuiteId::AmbientSymmetries,
        SuiteId::B2FrameRelations,
        SuiteId::OmegaDualRoute,
        SuiteId::PftChains,
        SuiteId::R2Identity,
        SuiteId::LestBounds,
        SuiteId::ReactionBounds,
        SuiteId::QZeroNegativity,
        SuiteId::HZeroBranch,
        SuiteId::SimonsZBound,
        SuiteId::GaussPositivity,
        SuiteId::AmwBound,
        SuiteId::ConstantScan,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteId::AmbientSymmetries => "ambient_symmetries",
            SuiteId::B2FrameRelations => "b2_frame_relations",
            SuiteId::OmegaDualRoute => "omega_dual_route",
            SuiteId::PftChains => "pft_chains",
            SuiteId::R2Identity => "r2_identity",
            SuiteId::LestBounds => "lest_bounds",
            SuiteId::ReactionBounds => "reaction_bounds",
            SuiteId::QZeroNegativity => "q_zero_negativity",
            SuiteId::HZeroBranch => "h_zero_branch",
            SuiteId::SimonsZBound => "simons_z_bound",
            SuiteId::GaussPositivity => "gauss_positivity",
            SuiteId::AmwBound => "amw_bound",
            SuiteId::ConstantScan => "constant_scan",
        }
    }

    /// Suites whose inputs need no admissible `(m, k)`: the ambient suite
    /// reads only `n = (m + k)/2`, the scan enumerates its own dimensions.
    pub fn dims_agnostic(self) -> bool {
        matches!(self, SuiteId::AmbientSymmetries | SuiteId::ConstantScan)
    }

    /// Suites built on points with `Q = 0` exactly.
    pub fn constructed_constraint(self) -> bool {
        matches!(self, SuiteId::QZeroNegativity)
    }

    pub fn default_trials(self) -> usize {
        if self.constructed_constraint() {
            10_000
        } else {
            100_000
        }
    }

    /// Wrong-constant variants each suite must detect. The first entry is the
    /// catalogued mutant of the sensitivity self-test.
    pub fn mutants(self) -> &'static [&'static str] {
        match self {
            SuiteId::AmbientSymmetries => &["einstein_2n_plus_1", "sectional_upper_3"],
            SuiteId::B2FrameRelations => &["base01_sign"],
            SuiteId::OmegaDualRoute => &["omega_coefficient_16"],
            SuiteId::PftChains => &["fp_divisor_8"],
            SuiteId::R2Identity => &["r2_inverse_m_minus_1"],
            SuiteId::LestBounds => &["lest_first_coefficient_1_9"],
            SuiteId::ReactionBounds => &["stima_minus_4m_minus_1", "ii_strong_2m"],
            SuiteId::QZeroNegativity => &["rbar_plus_2"],
            SuiteId::HZeroBranch => &["lili_coefficient_2"],
            SuiteId::SimonsZBound => &["z_drop_2mb"],
            SuiteId::GaussPositivity => &["gauss2_inverse_m_minus_1"],
            SuiteId::AmwBound => &["amw_coefficient_m"],
            SuiteId::ConstantScan => &["gap_5k"],
        }
    }

    pub fn catalogued_mutant(self) -> &'static str {
        self.mutants()[0]
    }
}

impl fmt::Display for SuiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SuiteId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite `{s}`")))
    }
}

fn default_margin() -> f64 {
    1e-6
}

fn default_eps() -> Vec<f64> {
    vec![0.01, 0.1]
}

fn default_c() -> f64 {
    1.0
}

fn default_workers() -> usize {
    1
}

fn default_n_max() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub suite_id: SuiteId,
    /// `(m, k)` pairs; ignored by the constant scan.
    pub dims: Vec<(usize, usize)>,
    /// Trials per `(m, k)`.
    pub trials: usize,
    pub seed: u64,
    /// Relative distance kept from the pinching boundary by the generators.
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Values of `eps` cycled over the trials.
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// Holomorphic sectional curvature scale of `CP^n(4c)`.
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default)]
    pub mutant: Option<String>,
    /// Dimensions are expected to be inadmissible; only generator rejection is asserted.
    #[serde(default)]
    pub negative_test: bool,
    /// Stop after the first chunk containing a violation.
    #[serde(default)]
    pub fail_fast: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Largest `n` of the constant scan.
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

impl SuiteSpec {
    pub fn new(suite_id: SuiteId, dims: Vec<(usize, usize)>, trials: usize, seed: u64) -> Self {
        Self {
            suite_id,
            dims,
            trials,
            seed,
            margin: default_margin(),
            eps: default_eps(),
            c: default_c(),
            mutant: None,
            negative_test: false,
            fail_fast: false,
            workers: default_workers(),
            n_max: default_n_max(),
        }
    }

    pub fn with_mutant(mut self, mutant: &str) -> Self {
        self.mutant = Some(mutant.to_string());
        self
    }

    /// Every problem with the spec, one message each.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let id = self.suite_id;
        if self.trials == 0 {
            out.push("trials must be at least 1".to_string());
        }
        if !(self.margin > 0.0 && self.margin <= 1.0) {
            out.push(format!("margin = {} must lie in (0, 1]", self.margin));
        }
        if self.eps.is_empty() {
            out.push("eps list is empty".to_string());
        }
        for &e in &self.eps {
            if !(0.0..1.0).contains(&e) {
                out.push(format!("eps = {e} outside [0, 1)"));
            }
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            out.push(format!("c = {} must be positive", self.c));
        }
        if self.workers == 0 {
            out.push("workers must be at least 1".to_string());
        }
        if let Some(mu) = &self.mutant {
            if !id.mutants().contains(&mu.as_str()) {
                out.push(format!(
                    "unknown mutant `{mu}` for suite {id}; known: {}",
                    id.mutants().join(", ")
                ));
            }
        }
        if id == SuiteId::ConstantScan {
            if self.n_max < 3 {
                out.push(format!("n_max = {} must be at least 3", self.n_max));
            }
            return out;
        }
        if self.dims.is_empty() {
            out.push("dims list is empty".to_string());
        }
        for &(m, k) in &self.dims {
            if id.dims_agnostic() {
                if (m + k) % 2 != 0 || m + k < 4 || k == 0 {
                    out.push(format!(
                        "dims ({m}, {k}): need k >= 1 and m + k = 2n with n >= 2"
                    ));
                }
                continue;
            }
            match (admissible(m, k), self.negative_test) {
                (Err(e), false) => out.push(e.to_string()),
                (Ok(n), true) => out.push(format!(
                    "dims ({m}, {k}) are admissible (n = {n}) but the suite is marked negative_test"
                )),
                _ => {}
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(p.join("; ")))
        }
    }
}

/// One violated relation with the input that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub suite_id: SuiteId,
    pub check_id: String,
    pub m: usize,
    pub k: usize,
    pub trial: usize,
    pub trial_seed: u64,
    pub eps: f64,
    #[serde(with = "crate::nonfinite")]
    pub lhs: f64,
    #[serde(with = "crate::nonfinite")]
    pub rhs: f64,
    #[serde(with = "crate::nonfinite")]
    pub scale: f64,
    /// Normalized slack after shrinking.
    #[serde(with = "crate::nonfinite")]
    pub slack: f64,
    /// Normalized slack as first observed.
    #[serde(with = "crate::nonfinite")]
    pub original_slack: f64,
    pub shrink_steps: usize,
    /// Generator flags the relations depend on.
    pub on_boundary: bool,
    pub zero_mean: bool,
    pub params: Option<PinchParams>,
    pub point: Option<PointRecord>,
    /// Ambient vectors (one row each) of the ambient suite.
    pub vectors: Option<Vec<Vec<f64>>>,
    pub taus: Option<Vec<f64>>,
}

impl Counterexample {
    /// Reconstructs the trial input (points are re-validated).
    pub fn input(&self) -> Result<TrialInput> {
        let point = self
            .point
            .as_ref()
            .map(PointData::from_record)
            .transpose()?;
        let vectors = self.vectors.as_ref().map(|rows| {
            let d = rows.first().map_or(0, |r| r.len());
            DMatrix::from_fn(d, rows.len(), |r, c| rows[c][r])
        });
        Ok(TrialInput {
            eps: self.eps,
            point,
            vectors,
            taus: self.taus.clone(),
            on_boundary: self.on_boundary,
            zero_mean: self.zero_mean,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckStats {
    pub check_id: String,
    pub evaluations: u64,
    pub violations: u64,
    pub worst_slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimStats {
    pub m: usize,
    pub k: usize,
    pub trials: usize,
    pub violations: u64,
    pub worst_slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite_id: SuiteId,
    pub dims: Vec<(usize, usize)>,
    pub mutant: Option<String>,
    pub trials_run: usize,
    pub pass: bool,
    pub violation_count: u64,
    /// First [`MAX_KEPT`] violations in trial order, shrunk.
    pub violations: Vec<Counterexample>,
    /// Largest normalized slack over every evaluated relation.
    pub worst_slack: f64,
    pub worst_check: String,
    pub checks: Vec<CheckStats>,
    pub per_dim: Vec<DimStats>,
    pub stopped_early: bool,
    /// Values of the constant scan; empty for other suites.
    #[serde(default)]
    pub constants: Vec<ConstantValue>,
    #[serde(skip)]
    pub wall_time: f64,
}

impl SuiteReport {
    /// Row of the flat CSV summary: `suite_id,dims,trials,pass,worst_slack`.
    pub fn csv_row(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|(m, k)| format!("{m}:{k}")).collect();
        format!(
            "{},{},{},{},{:.16e}",
            self.suite_id,
            dims.join(";"),
            self.trials_run,
            self.pass,
            self.worst_slack
        )
    }

    pub const CSV_HEADER: &'static str = "suite_id,dims,trials,pass,worst_slack";
}

/// Slack stored in reports: non-finite values (always violations) map to `f64::MAX`.
fn report_slack(s: f64) -> f64 {
    if s.is_finite() {
        s
    } else {
        f64::MAX
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of trial `trial` for the `dim`-th dimension pair.
pub fn trial_seed(seed: u64, dim: usize, trial: usize) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ dim as u64) ^ trial as u64)
}

/// Accumulator merged in trial order.
#[derive(Default)]
struct Tally {
    checks: Vec<CheckStats>,
    violation_count: u64,
    kept: Vec<(Counterexample, TrialInput)>,
}

impl Tally {
    fn record(&mut self, c: &Check) {
        let s = report_slack(c.slack());
        let stats = match self.checks.iter_mut().find(|x| x.check_id == c.id) {
            Some(x) => x,
            None => {
                self.checks.push(CheckStats {
                    check_id: c.id.to_string(),
                    evaluations: 0,
                    violations: 0,
                    worst_slack: f64::MIN,
                });
                self.checks.last_mut().expect("just pushed")
            }
        };
        stats.evaluations += 1;
        if s > stats.worst_slack {
            stats.worst_slack = s;
        }
        if c.violated() {
            stats.violations += 1;
        }
    }
}

struct TrialOutcome {
    trial: usize,
    seed: u64,
    checks: Vec<Check>,
    /// Kept only when some check is violated.
    input: Option<TrialInput>,
}

fn run_trial(
    ctx: &suites::Context,
    dim: usize,
    trial: usize,
    base_seed: u64,
) -> Result<TrialOutcome> {
    let seed = trial_seed(base_seed, dim, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = suites::generate(ctx, trial, &mut rng)?;
    let checks = suites::evaluate(ctx, &input)?;
    let bad = checks.iter().any(Check::violated);
    Ok(TrialOutcome {
        trial,
        seed,
        checks,
        input: bad.then_some(input),
    })
}

/// Runs one suite. Generator infeasibility and numerical failures are errors.
pub fn run_suite(spec: &SuiteSpec) -> Result<SuiteReport> {
    spec.validate()?;
    let start = Instant::now();
    if spec.suite_id == SuiteId::ConstantScan {
        let mut report = scan::scan_report(spec);
        report.wall_time = start.elapsed().as_secs_f64();
        return Ok(report);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| {
            Error::InvalidArgument(format!("cannot start {} workers: {e}", spec.workers))
        })?;

    let mut tally = Tally::default();
    let mut per_dim = Vec::with_capacity(spec.dims.len());
    let mut trials_run = 0;
    let mut stopped_early = false;

    'dims: for (di, &(m, k)) in spec.dims.iter().enumerate() {
        if spec.negative_test {
            // Only rejection is asserted: validation already required every pair
            // to be inadmissible, so the generator must refuse it.
            let rejected = suites::Context::new(spec, m, k).is_err();
            let c = Check::le(
                "generator_rejects_inadmissible",
                if rejected { 0.0 } else { 1.0 },
                0.0,
                1.0,
            );
            tally.record(&c);
            per_dim.push(DimStats {
                m,
                k,
                trials: 1,
                violations: u64::from(!rejected),
                worst_slack: c.slack(),
            });
            trials_run += 1;
            if !rejected {
                tally.violation_count += 1;
            }
            continue;
        }
        let ctx = suites::Context::new(spec, m, k)?;
        let mut dim = DimStats {
            m,
            k,
            trials: 0,
            violations: 0,
            worst_slack: f64::MIN,
        };
        let mut start_trial = 0;
        while start_trial < spec.trials {
            let end = (start_trial + CHUNK).min(spec.trials);
            let outcomes: Vec<Result<TrialOutcome>> = pool.install(|| {
                (start_trial..end)
                    .into_par_iter()
                    .map(|t| run_trial(&ctx, di, t, spec.seed))
                    .collect()
            });
            let mut chunk_bad = false;
            for out in outcomes {
                let out = out?;
                dim.trials += 1;
                trials_run += 1;
                for c in &out.checks {
                    tally.record(c);
                    dim.worst_slack = dim.worst_slack.max(report_slack(c.slack()));
                }
                if let Some(input) = out.input {
                    chunk_bad = true;
                    dim.violations += 1;
                    tally.violation_count += 1;
                    if tally.kept.len() < MAX_KEPT {
                        let worst = out
                            .checks
                            .iter()
                            .filter(|c| c.violated())
                            .max_by(|a, b| {
                                report_slack(a.slack()).total_cmp(&report_slack(b.slack()))
                            })
                            .expect("violated check");
                        let cx = ctx.counterexample(&input, worst, out.trial, out.seed);
                        tally.kept.push((cx, input));
                    }
                }
            }
            start_trial = end;
            if chunk_bad && spec.fail_fast {
                stopped_early = start_trial < spec.trials || di + 1 < spec.dims.len();
                per_dim.push(dim);
                break 'dims;
            }
        }
        per_dim.push(dim);
    }

    let mut violations = Vec::with_capacity(tally.kept.len());
    for (cx, input) in tally.kept {
        let ctx = suites::Context::new(spec, cx.m, cx.k)?;
        violations.push(shrink::shrink_with(&ctx, cx, input)?);
    }

    let (worst_slack, worst_check) = tally
        .checks
        .iter()
        .max_by(|a, b| a.worst_slack.total_cmp(&b.worst_slack))
        .map(|c| (c.worst_slack, c.check_id.clone()))
        .unwrap_or((0.0, String::new()));
    Ok(SuiteReport {
        suite_id: spec.suite_id,
        dims: spec.dims.clone(),
        mutant: spec.mutant.clone(),
        trials_run,
        pass: tally.violation_count == 0,
        violation_count: tally.violation_count,
        violations,
        worst_slack,
        worst_check,
        checks: tally.checks,
        per_dim,
        stopped_early,
        constants: Vec::new(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Re-evaluates a stored counterexample and returns every relation of its suite.
pub fn reevaluate(spec: &SuiteSpec, cx: &Counterexample) -> Result<Vec<Check>> {
    let ctx = suites::Context::new(spec, cx.m, cx.k)?;
    let input = cx.input()?;
    suites::evaluate(&ctx, &input)
}
