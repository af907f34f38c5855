//! Evolution-equation, pinching and extinction diagnostics along sphere flows.

use std::f64::consts::FRAC_PI_4;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{
    minimal_radius, minimal_radius_closed_form, pinch_range, sphere_point_data, PinchRange,
    SphereModel,
};
use super::ode::{integrate_to, Tolerances};
use super::trajectory::{integrate, StepPolicy, Termination, Trajectory};
use crate::algebra::hypersurface_reaction;
use crate::ambient::AmbientSpace;
use crate::error::{Error, Result};

/// Tolerance of the short integrations feeding the finite differences.
const FD_TOL: Tolerances = Tolerances {
    rtol: 1e-14,
    atol: 1e-15,
};
/// Accepted band for Richardson order estimates.
pub const ORDER_BAND: (f64, f64) = (1.9, 2.1);
/// Relative tolerance on the extrapolated derivative against an identity.
pub const MATCH_TOL: f64 = 1e-6;
/// Relative tolerance of the inequality shadows.
pub const SHADOW_TOL: f64 = 1e-12;
pub const VOLUME_TOL: f64 = 1e-8;
pub const ROUNDNESS_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `d/dt q = rhs`.
    Equal,
    /// `d/dt q <= rhs`.
    AtMost,
    /// `d/dt q >= rhs`.
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionQuantity {
    pub name: String,
    pub comparison: Comparison,
    /// Centered differences at `h`, `h/2`, `h/4`.
    pub fd: [f64; 3],
    /// Richardson extrapolation of the two finest differences.
    pub extrapolated: f64,
    /// Right-hand side of the evolution law with gradient and Laplacian terms dropped.
    pub rhs: f64,
    /// Chain-rule derivative `-H dq/du` from the closed forms.
    pub exact: f64,
    /// `fd[2] - rhs`.
    pub abs_error: f64,
    /// `log2` of successive errors against `rhs`.
    #[serde(with = "crate::nonfinite")]
    pub order_vs_rhs: f64,
    /// `log2(|D(h) - D(h/2)| / |D(h/2) - D(h/4)|)`.
    #[serde(with = "crate::nonfinite")]
    pub order_self: f64,
    /// Round-off estimate at `h/4` exceeds a tenth of the finest difference change.
    pub cancellation: bool,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionReport {
    pub space: AmbientSpace,
    pub u: f64,
    pub h_fd: f64,
    /// `Ric(nu, nu)` of the realized normal.
    pub ricci_normal: f64,
    /// Ambient reaction term of the `|A|^2` law.
    pub reaction: f64,
    pub quantities: Vec<EvolutionQuantity>,
    pub pass: bool,
}

impl EvolutionReport {
    pub fn quantity(&self, name: &str) -> Option<&EvolutionQuantity> {
        self.quantities.iter().find(|q| q.name == name)
    }
}

fn advance(space: AmbientSpace, u: f64, dt: f64) -> Result<f64> {
    let rhs = |_t: f64, y: &[f64; 1]| -> Result<[f64; 1]> {
        Ok([-SphereModel::new(space, y[0])?.scalars().h])
    };
    integrate_to(rhs, 0.0, [u], dt, FD_TOL)
        .map(|y| y[0])
        .map_err(|e| {
            Error::InvalidArgument(format!(
                "h_fd = {} leaves the sphere family from u = {u}: {e}",
                dt.abs()
            ))
        })
}

/// `log2(|a|/|b|)`; zero differences give infinities, which reports store as strings.
fn order(a: f64, b: f64) -> f64 {
    (a.abs() / b.abs()).log2()
}

/// Centered finite differences of `|H|^2`, `|A|^2`, `|Å|^2`, `|H|^4` and
/// `log V` along the flow through the sphere of radius `u`.
pub fn evolution_check(space: &AmbientSpace, u: f64, h_fd: f64) -> Result<EvolutionReport> {
    if !(h_fd.is_finite() && h_fd > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "h_fd = {h_fd} must be positive"
        )));
    }
    let model = SphereModel::new(*space, u)?;
    let p = sphere_point_data(&model)?;
    let nu = p.normal.column(0).into_owned();
    let ric = space.ricci(&nu)?;
    let reaction = hypersurface_reaction(&p)?;
    let s = model.scalars();
    let rates = model.time_derivatives();
    let m = model.m() as f64;

    type Field = fn(&SphereModel) -> f64;
    let fields: [(&str, Field, Comparison, f64, f64); 5] = [
        (
            "H2",
            |x| x.scalars().h2,
            Comparison::Equal,
            2.0 * s.h2 * (s.a2 + ric),
            rates.h2,
        ),
        (
            "A2",
            |x| x.scalars().a2,
            Comparison::Equal,
            2.0 * s.a2 * (s.a2 + ric) + reaction,
            rates.a2,
        ),
        (
            "Ao2",
            |x| x.scalars().ao2,
            Comparison::AtMost,
            4.0 * s.a2 * s.ao2,
            rates.ao2,
        ),
        (
            "H4",
            |x| x.scalars().h2.powi(2),
            Comparison::AtLeast,
            4.0 / m * s.h2.powi(3),
            rates.h4,
        ),
        (
            "log_volume",
            |x| x.log_volume(),
            Comparison::Equal,
            -s.h2,
            rates.log_volume,
        ),
    ];

    let hs = [h_fd, h_fd / 2.0, h_fd / 4.0];
    let mut ends = Vec::with_capacity(3);
    for &h in &hs {
        let plus = SphereModel::new(*space, advance(*space, u, h)?)?;
        let minus = SphereModel::new(*space, advance(*space, u, -h)?)?;
        ends.push((plus, minus));
    }

    let mut quantities = Vec::new();
    for (name, f, comparison, rhs, exact) in fields {
        let mut fd = [0.0; 3];
        for (i, (plus, minus)) in ends.iter().enumerate() {
            fd[i] = (f(plus) - f(minus)) / (2.0 * hs[i]);
        }
        let extrapolated = fd[2] + (fd[2] - fd[1]) / 3.0;
        let q0 = f(&model).abs();
        let noise =
            (f64::EPSILON * q0 + FD_TOL.rtol * u * exact.abs() / s.h.abs().max(1e-300)) / hs[2];
        let cancellation = noise > 0.1 * (fd[1] - fd[2]).abs();
        let scale = rhs.abs().max(1.0);
        let holds = match comparison {
            Comparison::Equal => (extrapolated - rhs).abs() <= MATCH_TOL * scale,
            Comparison::AtMost => extrapolated <= rhs + MATCH_TOL * scale,
            Comparison::AtLeast => extrapolated >= rhs - MATCH_TOL * scale,
        };
        let order_vs_rhs = order(fd[1] - rhs, fd[2] - rhs);
        let order_self = order(fd[0] - fd[1], fd[1] - fd[2]);
        let order_ok = (ORDER_BAND.0..=ORDER_BAND.1).contains(&order_self)
            && (comparison != Comparison::Equal
                || (ORDER_BAND.0..=ORDER_BAND.1).contains(&order_vs_rhs));
        quantities.push(EvolutionQuantity {
            name: name.to_string(),
            comparison,
            fd,
            extrapolated,
            rhs,
            exact,
            abs_error: fd[2] - rhs,
            order_vs_rhs,
            order_self,
            cancellation,
            holds: holds && order_ok && !cancellation,
        });
    }
    let pass = quantities.iter().all(|q| q.holds);
    Ok(EvolutionReport {
        space: *space,
        u,
        h_fd,
        ricci_normal: ric,
        reaction,
        quantities,
        pass,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionBounds {
    /// `u0^2/(2m)`, from `H u <= m`.
    pub lower: f64,
    /// `u0/H(u0)`, from `H` decreasing in `u`.
    pub upper: f64,
    /// `-ln(cos(sqrt(c) u0))/(mu2 c)`, the extinction time of
    /// `u' = -mu2 sqrt(c) cot(sqrt(c) u)`; a supersolution when `sqrt(c) u0 <= pi/4`.
    pub comparison: Option<f64>,
}

impl ExtinctionBounds {
    pub fn new(model: &SphereModel) -> Self {
        let x0 = model.space.c.sqrt() * model.u;
        let (_, m2) = model.multiplicities();
        let comparison = (x0 <= FRAC_PI_4).then(|| -x0.cos().ln() / (m2 as f64 * model.space.c));
        Self {
            lower: model.u * model.u / (2.0 * model.m() as f64),
            upper: model.u / model.scalars().h,
            comparison,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        let slack = 1e-9 * self.upper.abs();
        t >= self.lower - slack
            && t <= self.upper + slack
            && self.comparison.is_none_or(|c| t <= c + slack)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowReport {
    pub samples: usize,
    /// Samples with `d|Å|^2/dt > 4|A|^2|Å|^2`.
    pub ao2_violations: usize,
    /// Samples with `d|H|^4/dt < (4/m)|H|^6`.
    pub h4_violations: usize,
    /// Largest relative `d|Å|^2/dt - 4|A|^2|Å|^2`.
    pub worst_ao2_slack: f64,
    /// Largest relative `(4/m)|H|^6 - d|H|^4/dt`.
    pub worst_h4_slack: f64,
}

/// Inequality shadows at every sample, with exact time derivatives.
pub fn shadow_checks(traj: &Trajectory) -> ShadowReport {
    let mut r = ShadowReport {
        samples: 0,
        ao2_violations: 0,
        h4_violations: 0,
        worst_ao2_slack: f64::MIN,
        worst_h4_slack: f64::MIN,
    };
    let m = traj.model.m() as f64;
    for smp in &traj.samples {
        let Ok(model) = SphereModel::new(traj.model.space, smp.u) else {
            continue;
        };
        let s = model.scalars();
        let d = model.time_derivatives();
        let bound = 4.0 * s.a2 * s.ao2;
        let ao2_slack = (d.ao2 - bound) / bound.abs().max(d.ao2.abs()).max(f64::MIN_POSITIVE);
        let floor = 4.0 / m * s.h2.powi(3);
        let h4_slack = (floor - d.h4) / floor.abs().max(d.h4.abs()).max(f64::MIN_POSITIVE);
        r.samples += 1;
        r.ao2_violations += usize::from(ao2_slack > SHADOW_TOL);
        r.h4_violations += usize::from(h4_slack > SHADOW_TOL);
        r.worst_ao2_slack = r.worst_ao2_slack.max(ao2_slack);
        r.worst_h4_slack = r.worst_h4_slack.max(h4_slack);
    }
    r
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceRun {
    pub u0: f64,
    pub termination: Termination,
    pub samples: usize,
    pub extinction_time: Option<f64>,
    pub extinction_time_extrapolated: Option<f64>,
    pub bounds: ExtinctionBounds,
    pub bounds_hold: bool,
    /// Largest `Q` over the samples.
    pub q_max: f64,
    pub pinched_throughout: bool,
    /// `|Å|^2/|H|^2` at the last sample.
    pub final_roundness: f64,
    /// `|Å|^2/|H|^2` non-increasing on the last half of the samples.
    pub roundness_tail_monotone: bool,
    /// `lambda1/lambda2` at the last sample.
    pub final_lambda_ratio: f64,
    /// `f_0` non-increasing on the last half of the samples.
    pub f0_tail_nonincreasing: bool,
    pub monotone: bool,
    pub volume_error: f64,
    pub shadows: ShadowReport,
    pub pass: bool,
}

fn tail_nonincreasing(v: &[f64]) -> bool {
    let tail = &v[v.len() / 2..];
    tail.windows(2).all(|w| w[1] <= w[0])
}

pub fn invariance_run(
    space: &AmbientSpace,
    u0: f64,
    eps: f64,
    policy: &StepPolicy,
) -> Result<InvarianceRun> {
    let model = SphereModel::new(*space, u0)?;
    let traj = integrate(&model, eps, policy)?;
    Ok(summarize(&traj))
}

/// Pinching, roundness and extinction diagnostics of one trajectory.
pub fn summarize(traj: &Trajectory) -> InvarianceRun {
    let bounds = ExtinctionBounds::new(&traj.model);
    let t_ext = traj.extinction_time_extrapolated;
    let q_max = traj.samples.iter().map(|s| s.q).fold(f64::MIN, f64::max);
    let roundness: Vec<f64> = traj.samples.iter().map(|s| s.ao2 / (s.h * s.h)).collect();
    let f0: Vec<f64> = traj.samples.iter().map(|s| s.f0).collect();
    let last = traj.last();
    let (l1, l2) = SphereModel {
        space: traj.model.space,
        u: last.u.max(f64::MIN_POSITIVE),
    }
    .principal_curvatures();
    let bounds_hold = t_ext.is_some_and(|t| bounds.contains(t));
    let shadows = shadow_checks(traj);
    let mut run = InvarianceRun {
        u0: traj.model.u,
        termination: traj.termination,
        samples: traj.samples.len(),
        extinction_time: traj.extinction_time,
        extinction_time_extrapolated: t_ext,
        bounds,
        bounds_hold,
        q_max,
        pinched_throughout: q_max < 0.0,
        final_roundness: *roundness.last().expect("nonempty"),
        roundness_tail_monotone: tail_nonincreasing(&roundness),
        final_lambda_ratio: l1 / l2,
        f0_tail_nonincreasing: tail_nonincreasing(&f0),
        monotone: traj.monotonicity_defects().is_empty(),
        volume_error: traj.volume_ratio_error(),
        shadows,
        pass: false,
    };
    run.pass = run.termination == Termination::Extinct
        && run.bounds_hold
        && run.pinched_throughout
        && run.final_roundness < ROUNDNESS_TOL
        && run.roundness_tail_monotone
        && (run.final_lambda_ratio - 1.0).abs() < ROUNDNESS_TOL
        && run.f0_tail_nonincreasing
        && run.monotone
        && run.volume_error <= VOLUME_TOL
        && run.shadows.ao2_violations == 0
        && run.shadows.h4_violations == 0;
    run
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub space: AmbientSpace,
    pub eps: f64,
    pub range: PinchRange,
    pub runs: Vec<InvarianceRun>,
    pub pass: bool,
}

/// `count` evenly spaced radii strictly inside the first pinched interval.
pub fn pinched_grid(range: &PinchRange, count: usize) -> Result<Vec<f64>> {
    let &(lo, hi) = range
        .intervals
        .first()
        .ok_or_else(|| Error::InvalidArgument("no pinched radii for this space and eps".into()))?;
    Ok((1..=count)
        .map(|i| lo + (hi - lo) * i as f64 / (count + 1) as f64)
        .collect())
}

/// Runs every `u0` in parallel; the report keeps the order of `u0s`.
pub fn pinching_invariance_run(
    space: &AmbientSpace,
    u0s: &[f64],
    eps: f64,
    policy: &StepPolicy,
    workers: usize,
) -> Result<InvarianceReport> {
    let range = pinch_range(space, eps)?;
    for &u0 in u0s {
        if !range.contains(u0) {
            return Err(Error::InvalidArgument(format!(
                "u0 = {u0} is not a pinched radius"
            )));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let runs = pool.install(|| {
        u0s.par_iter()
            .map(|&u0| invariance_run(space, u0, eps, policy))
            .collect::<Result<Vec<_>>>()
    })?;
    let pass = runs.iter().all(|r| r.pass);
    Ok(InvarianceReport {
        space: *space,
        eps,
        range,
        runs,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalSphereReport {
    pub space: AmbientSpace,
    /// Root of `H` by bisection.
    pub u_star: f64,
    /// `arctan(sqrt(m/mu1))/sqrt(c)`.
    pub u_star_closed_form: f64,
    pub h_at_u_star: f64,
    pub a2: f64,
    /// `2c`.
    pub bound: f64,
    pub a2_bound_holds: bool,
    pub pinch_intervals: Vec<(f64, f64)>,
    pub outside_pinch_range: bool,
    pub pass: bool,
}

pub fn minimal_sphere_check(space: &AmbientSpace) -> Result<MinimalSphereReport> {
    if space.n < 3 {
        return Err(Error::InvalidArgument(format!(
            "minimal sphere check needs n >= 3, got n = {}",
            space.n
        )));
    }
    let u_star = minimal_radius(space)?;
    let model = SphereModel::new(*space, u_star)?;
    let s = model.scalars();
    let range = pinch_range(space, 0.0)?;
    let bound = 2.0 * space.c;
    let a2_bound_holds = s.a2 >= bound;
    let outside = !range.contains(u_star);
    Ok(MinimalSphereReport {
        space: *space,
        u_star,
        u_star_closed_form: minimal_radius_closed_form(space),
        h_at_u_star: s.h,
        a2: s.a2,
        bound,
        a2_bound_holds,
        pinch_intervals: range.intervals,
        outside_pinch_range: outside,
        pass: a2_bound_holds && outside,
    })
}

/// A pinched radius with `lambda1 < 0 < lambda2`, if one exists.
pub fn nonconvex_witness(space: &AmbientSpace, eps: f64) -> Result<Option<f64>> {
    let range = pinch_range(space, eps)?;
    let quarter = FRAC_PI_4 / space.c.sqrt();
    for &(lo, hi) in &range.intervals {
        let lo = lo.max(quarter);
        if lo < hi {
            let u = 0.5 * (lo + hi);
            let (l1, l2) = SphereModel::new(*space, u)?.principal_curvatures();
            if l1 < 0.0 && l2 > 0.0 {
                return Ok(Some(u));
            }
        }
    }
    Ok(None)
}
