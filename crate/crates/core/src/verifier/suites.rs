//! Input generators and relations of every suite.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::check::Check;
use super::{Counterexample, SuiteId, SuiteSpec};
use crate::algebra::{
    evaluate_full, gauss_sectional, hypersurface_reaction, pinch_from_split, r1_r2, r2,
    reaction_terms, sectional_constant, simons_z, traceless_split, z_constants, CurvatureScalars,
    PinchParams,
};
use crate::ambient::{apply_j, apply_j_columns, AmbientSpace, SpaceKind};
use crate::error::{Error, Result};
use crate::frames::{
    admissible, angle_point, b2_residuals, build_b1, build_b2, omega_norm2, pft_norms,
    KahlerAngles, PointData, PointSampler, H_ZERO_TOL,
};

/// Tolerance of the frame relations and the dual routes.
const FRAME_TOL: f64 = 1e-10;
/// Tolerance of exact identities.
const IDENTITY_TOL: f64 = 1e-12;
/// Grid values per Kähler angle in the deterministic part of the P/t suite.
const GRID: usize = 11;

/// Everything one trial needs; the relations of a suite read only this.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialInput {
    pub eps: f64,
    pub point: Option<PointData>,
    /// Ambient vectors as columns (ambient suite).
    pub vectors: Option<DMatrix<f64>>,
    /// Prescribed Kähler angles the point was built from.
    pub taus: Option<Vec<f64>>,
    /// The point satisfies `|A|^2 = a|H|^2 + b` exactly.
    pub on_boundary: bool,
    /// The point has `H = 0`.
    pub zero_mean: bool,
}

/// Per-dimension state shared by all trials of a suite.
pub(crate) struct Context {
    pub id: SuiteId,
    pub m: usize,
    pub k: usize,
    pub space: AmbientSpace,
    pub margin: f64,
    pub eps: Vec<f64>,
    pub params: Vec<PinchParams>,
    pub mutant: Option<String>,
}

impl Context {
    pub fn new(spec: &SuiteSpec, m: usize, k: usize) -> Result<Self> {
        let id = spec.suite_id;
        if id == SuiteId::ConstantScan {
            return Err(Error::InvalidArgument(
                "the constant scan has no per-dimension context".into(),
            ));
        }
        if !id.dims_agnostic() {
            admissible(m, k)?;
        } else if (m + k) % 2 != 0 || k == 0 {
            return Err(Error::InvalidArgument(format!(
                "m + k must be even and k >= 1, got ({m}, {k})"
            )));
        }
        let space = AmbientSpace::new(SpaceKind::ComplexProjective, (m + k) / 2, spec.c)?;
        let params = if id.dims_agnostic() {
            Vec::new()
        } else {
            spec.eps
                .iter()
                .map(|&e| PinchParams::new(&space, m, k, e, 0.0))
                .collect::<Result<_>>()?
        };
        Ok(Self {
            id,
            m,
            k,
            space,
            margin: spec.margin,
            eps: spec.eps.clone(),
            params,
            mutant: spec.mutant.clone(),
        })
    }

    fn mutant(&self, name: &str) -> bool {
        self.mutant.as_deref() == Some(name)
    }

    pub fn params_for(&self, eps: f64) -> Option<PinchParams> {
        self.eps
            .iter()
            .position(|&e| e == eps)
            .and_then(|i| self.params.get(i).copied())
            .or_else(|| {
                (!self.id.dims_agnostic())
                    .then(|| PinchParams::new(&self.space, self.m, self.k, eps, 0.0).ok())
                    .flatten()
            })
    }

    fn sampler(&self, params: &PinchParams) -> Result<PointSampler> {
        PointSampler::new(self.space, self.m, self.k, params.a, params.b, self.margin)
    }

    /// Suites whose relations assume a strictly pinched point.
    fn needs_pinching(&self) -> bool {
        matches!(
            self.id,
            SuiteId::SimonsZBound | SuiteId::GaussPositivity | SuiteId::AmwBound
        )
    }

    /// Suites whose relations assume `H != 0`.
    fn needs_mean_curvature(&self) -> bool {
        matches!(self.id, SuiteId::LestBounds | SuiteId::GaussPositivity)
    }

    pub fn counterexample(
        &self,
        input: &TrialInput,
        c: &Check,
        trial: usize,
        seed: u64,
    ) -> Counterexample {
        let slack = c.slack();
        Counterexample {
            suite_id: self.id,
            check_id: c.id.to_string(),
            m: self.m,
            k: self.k,
            trial,
            trial_seed: seed,
            eps: input.eps,
            lhs: c.lhs,
            rhs: c.rhs,
            scale: c.scale,
            slack,
            original_slack: slack,
            shrink_steps: 0,
            on_boundary: input.on_boundary,
            zero_mean: input.zero_mean,
            params: self.params_for(input.eps),
            point: input.point.as_ref().map(PointData::to_record),
            vectors: input.vectors.as_ref().map(|v| {
                v.column_iter()
                    .map(|c| c.iter().copied().collect())
                    .collect()
            }),
            taus: input.taus.clone(),
        }
    }
}

fn point_input(eps: f64, point: PointData, on_boundary: bool, zero_mean: bool) -> TrialInput {
    TrialInput {
        eps,
        point: Some(point),
        vectors: None,
        taus: None,
        on_boundary,
        zero_mean,
    }
}

/// Points with random frames or prescribed Kähler angles, cycling through
/// Haar sampling, uniform angles and extreme angles `{0, 1, uniform}`.
fn frame_input(ctx: &Context, trial: usize, eps: f64, rng: &mut ChaCha8Rng) -> Result<TrialInput> {
    let pairs = ctx.k / 2;
    let taus: Vec<f64> = match trial % 3 {
        0 => {
            let params = ctx.params_for(eps).expect("admissible suite has params");
            let p = ctx.sampler(&params)?.sample(rng)?;
            return Ok(point_input(eps, p, false, false));
        }
        1 => (0..pairs).map(|_| rng.gen_range(0.0..=1.0)).collect(),
        _ => (0..pairs)
            .map(|_| match rng.gen_range(0..3) {
                0 => 0.0,
                1 => 1.0,
                _ => rng.gen_range(0.0..=1.0),
            })
            .collect(),
    };
    angle_input(ctx, eps, taus, rng)
}

fn angle_input(
    ctx: &Context,
    eps: f64,
    taus: Vec<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<TrialInput> {
    let p = angle_point(ctx.space, ctx.m, ctx.k, &taus, rng)?;
    Ok(TrialInput {
        eps,
        point: Some(p),
        vectors: None,
        taus: Some(taus),
        on_boundary: false,
        zero_mean: false,
    })
}

/// Number of deterministic grid trials of the P/t suite.
fn grid_size(k: usize) -> usize {
    GRID.pow((k / 2) as u32)
}

pub(crate) fn generate(ctx: &Context, trial: usize, rng: &mut ChaCha8Rng) -> Result<TrialInput> {
    let eps = ctx.eps[trial % ctx.eps.len()];
    let (m, k) = (ctx.m, ctx.k);
    let sample = |zero_mean: bool, on_boundary: bool, rng: &mut ChaCha8Rng| -> Result<TrialInput> {
        let params = ctx.params_for(eps).expect("admissible suite has params");
        let p = ctx
            .sampler(&params)?
            .zero_mean(zero_mean)
            .on_boundary(on_boundary)
            .sample(rng)?;
        Ok(point_input(eps, p, on_boundary, zero_mean))
    };
    match ctx.id {
        SuiteId::AmbientSymmetries => {
            let d = ctx.space.realdim();
            let v = DMatrix::from_fn(d, 7, |_, _| rng.sample(StandardNormal));
            Ok(TrialInput {
                eps,
                point: None,
                vectors: Some(v),
                taus: None,
                on_boundary: false,
                zero_mean: false,
            })
        }
        SuiteId::B2FrameRelations | SuiteId::OmegaDualRoute => frame_input(ctx, trial, eps, rng),
        SuiteId::PftChains => {
            let grid = grid_size(k);
            if trial < grid {
                let mut idx = trial;
                let taus = (0..k / 2)
                    .map(|_| {
                        let t = (idx % GRID) as f64 / (GRID - 1) as f64;
                        idx /= GRID;
                        t
                    })
                    .collect();
                angle_input(ctx, eps, taus, rng)
            } else {
                frame_input(ctx, trial - grid, eps, rng)
            }
        }
        SuiteId::R2Identity => sample(trial % 10 == 9, false, rng),
        SuiteId::LestBounds => sample(false, trial % 2 == 1, rng),
        SuiteId::ReactionBounds | SuiteId::GaussPositivity => sample(false, false, rng),
        SuiteId::QZeroNegativity => sample(trial % 4 == 3, true, rng),
        SuiteId::HZeroBranch => sample(true, k >= 2 && trial % 2 == 1, rng),
        SuiteId::SimonsZBound => sample(trial % 5 == 4, false, rng),
        SuiteId::AmwBound => sample(trial % 10 == 9, false, rng),
        SuiteId::ConstantScan => Err(Error::InvalidArgument(format!(
            "no trials for ({m}, {k}) in the scan"
        ))),
    }
}

/// Re-imposes the generator's constraints after a shrinking move, or
/// rejects the candidate when they cannot be restored.
pub(crate) fn restore(ctx: &Context, mut input: TrialInput) -> Option<TrialInput> {
    let Some(p) = input.point.as_mut() else {
        return Some(input);
    };
    let m = p.m();
    let mf = m as f64;
    if input.zero_mean {
        for h in &mut p.h {
            let t = h.trace() / mf;
            for i in 0..m {
                h[(i, i)] -= t;
            }
        }
    }
    let params = ctx.params_for(input.eps);
    let s = traceless_split(p);
    if ctx.needs_mean_curvature() && s.h2.sqrt() <= H_ZERO_TOL {
        return None;
    }
    if input.on_boundary {
        let params = params?;
        let cap = (params.a - 1.0 / mf) * s.h2 + params.b;
        if s.ao2 <= 0.0 || cap <= 0.0 {
            return None;
        }
        let scale = (cap / s.ao2).sqrt();
        let hv = p.mean_curvature();
        for (h, &t) in p.h.iter_mut().zip(hv.iter()) {
            for i in 0..m {
                h[(i, i)] -= t / mf;
            }
            *h *= scale;
            for i in 0..m {
                h[(i, i)] += t / mf;
            }
        }
    } else if ctx.needs_pinching() {
        let params = params?;
        if pinch_from_split(m, &s, &params).q >= 0.0 {
            return None;
        }
    }
    Some(input)
}

pub(crate) fn evaluate(ctx: &Context, input: &TrialInput) -> Result<Vec<Check>> {
    if ctx.id == SuiteId::AmbientSymmetries {
        let v = input
            .vectors
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("ambient trial without vectors".into()))?;
        return ambient_checks(ctx, v);
    }
    let p = input
        .point
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("trial without point data".into()))?;
    let params = || {
        ctx.params_for(input.eps).ok_or_else(|| {
            Error::InvalidArgument(format!("no pinching constants for eps = {}", input.eps))
        })
    };
    match ctx.id {
        SuiteId::AmbientSymmetries | SuiteId::ConstantScan => unreachable!("handled above"),
        SuiteId::B2FrameRelations => b2_checks(ctx, p, input.taus.as_deref()),
        SuiteId::OmegaDualRoute => omega_checks(ctx, p),
        SuiteId::PftChains => pft_checks(ctx, p),
        SuiteId::R2Identity => r2_checks(ctx, p),
        SuiteId::LestBounds => lest_checks(ctx, p, &params()?, input.on_boundary),
        SuiteId::ReactionBounds => reaction_checks(ctx, p, &params()?),
        SuiteId::QZeroNegativity => q_zero_checks(ctx, p, &params()?),
        SuiteId::HZeroBranch => h_zero_checks(ctx, p, &params()?, input.on_boundary),
        SuiteId::SimonsZBound => z_checks(ctx, p, &params()?, input.zero_mean),
        SuiteId::GaussPositivity => gauss_checks(ctx, p, &params()?),
        SuiteId::AmwBound => amw_checks(ctx, p, &params()?),
    }
}

fn orthonormal_pair(x: &DVector<f64>, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let u = x.normalize();
    let mut v = y.clone();
    for _ in 0..2 {
        let s = u.dot(&v);
        v.axpy(-s, &u, 1.0);
    }
    (u, v.normalize())
}

fn ambient_checks(ctx: &Context, v: &DMatrix<f64>) -> Result<Vec<Check>> {
    let s = &ctx.space;
    let c = s.c;
    let col = |i: usize| v.column(i).into_owned();
    let (x, y, z, w) = (col(0), col(1), col(2), col(3));
    let scale = 6.0 * c * x.norm() * y.norm() * z.norm() * w.norm();
    let r = s.riemann(&x, &y, &z, &w)?;
    let mut out = vec![
        Check::eq(
            "antisymmetry_first_pair",
            r,
            -s.riemann(&y, &x, &z, &w)?,
            scale,
            IDENTITY_TOL,
        ),
        Check::eq(
            "antisymmetry_second_pair",
            r,
            -s.riemann(&x, &y, &w, &z)?,
            scale,
            IDENTITY_TOL,
        ),
        Check::eq(
            "pair_symmetry",
            r,
            s.riemann(&z, &w, &x, &y)?,
            scale,
            IDENTITY_TOL,
        ),
        Check::eq(
            "first_bianchi",
            r + s.riemann(&y, &z, &x, &w)? + s.riemann(&z, &x, &y, &w)?,
            0.0,
            3.0 * scale,
            IDENTITY_TOL,
        ),
    ];

    let (u, t) = orthonormal_pair(&col(4), &col(5));
    let k = s.sectional(&u, &t)?;
    let upper = if ctx.mutant("sectional_upper_3") {
        3.0 * c
    } else {
        4.0 * c
    };
    out.push(Check::le("sectional_lower", c, k, 4.0 * c));
    out.push(Check::le("sectional_upper", k, upper, 4.0 * c));

    let e = col(6).normalize();
    let einstein = if ctx.mutant("einstein_2n_plus_1") {
        (2 * s.n + 1) as f64 * c
    } else {
        s.einstein_constant()
    };
    out.push(Check::eq(
        "einstein",
        s.ricci(&e)?,
        einstein,
        einstein,
        IDENTITY_TOL,
    ));

    let je = apply_j(&e);
    out.push(Check::eq(
        "sectional_max_witness",
        s.sectional(&e, &je)?,
        4.0 * c,
        4.0 * c,
        IDENTITY_TOL,
    ));
    let mut f = col(0);
    for b in [&e, &je] {
        for _ in 0..2 {
            let d = b.dot(&f);
            f.axpy(-d, b, 1.0);
        }
    }
    out.push(Check::eq(
        "sectional_min_witness",
        s.sectional(&e, &f.normalize())?,
        c,
        4.0 * c,
        IDENTITY_TOL,
    ));
    Ok(out)
}

/// `base01` residual with the sign of `nu` flipped in its second relation.
fn base01_sign_mutant(q: &PointData, angles: &KahlerAngles) -> f64 {
    let jn = apply_j_columns(&q.normal);
    let mut res: f64 = 0.0;
    for (r, &(tau, nu)) in angles.pairs.iter().enumerate() {
        let (i, j) = (2 * r, 2 * r + 1);
        let first = jn.column(i) - q.tangent.column(i) * tau - q.normal.column(j) * nu;
        let second = jn.column(j) - q.tangent.column(j) * tau - q.normal.column(i) * nu;
        res = res.max(first.amax()).max(second.amax());
    }
    res
}

fn norm_checks(out: &mut Vec<Check>, id: [&'static str; 3], p: &PointData, q: &PointData) {
    let (a, b) = (traceless_split(p), traceless_split(q));
    let mf = p.m() as f64;
    let scale = mf * a.a2;
    out.push(Check::eq(id[0], b.a2, a.a2, scale, IDENTITY_TOL));
    out.push(Check::eq(id[1], b.h2, a.h2, scale, IDENTITY_TOL));
    out.push(Check::eq(id[2], b.ao2, a.ao2, scale, IDENTITY_TOL));
}

fn b2_checks(ctx: &Context, p: &PointData, taus: Option<&[f64]>) -> Result<Vec<Check>> {
    let (q, angles) = build_b2(p)?;
    let res = b2_residuals(&q, &angles);
    let base01 = if ctx.mutant("base01_sign") {
        base01_sign_mutant(&q, &angles)
    } else {
        res.base01
    };
    let range_excess = angles
        .pairs
        .iter()
        .flat_map(|&(t, n)| [-t, t - 1.0, -n, n - 1.0])
        .fold(0.0, f64::max);
    let mut out = vec![
        Check::le("base01", base01, 0.0, 1.0).with_tol(FRAME_TOL),
        Check::le("base02", res.base02, 0.0, 1.0).with_tol(FRAME_TOL),
        Check::le("base03", res.base03, 0.0, 1.0).with_tol(FRAME_TOL),
        Check::le("odd_tail", res.odd_tail, 0.0, 1.0).with_tol(FRAME_TOL),
        Check::le("b2_orthonormal", res.orthonormality, 0.0, 1.0).with_tol(FRAME_TOL),
        Check::eq("kahler_unit", angles.unit_defect(), 0.0, 1.0, IDENTITY_TOL),
        Check::le("kahler_range", range_excess, 0.0, 1.0).with_tol(0.0),
    ];
    norm_checks(
        &mut out,
        ["b2_preserves_a2", "b2_preserves_h2", "b2_preserves_ao2"],
        p,
        &q,
    );
    if p.mean_curvature().norm() > H_ZERO_TOL {
        let q1 = build_b1(p)?;
        norm_checks(
            &mut out,
            ["b1_preserves_a2", "b1_preserves_h2", "b1_preserves_ao2"],
            p,
            &q1,
        );
    }
    if let Some(taus) = taus {
        let mut want = taus.to_vec();
        let mut got: Vec<f64> = angles.pairs.iter().map(|&(t, _)| t).collect();
        want.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        let diff = want
            .iter()
            .zip(&got)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        out.push(Check::eq(
            "kahler_angles_recovered",
            diff,
            0.0,
            1.0,
            FRAME_TOL,
        ));
    }
    Ok(out)
}

fn omega_checks(ctx: &Context, p: &PointData) -> Result<Vec<Check>> {
    let o = omega_norm2(p)?;
    let closed = if ctx.mutant("omega_coefficient_16") {
        o.closed_form * 16.0 / 18.0
    } else {
        o.closed_form
    };
    let c = ctx.space.c;
    let scale = o.direct.abs().max(closed.abs()).max(c * c);
    Ok(vec![Check::eq(
        "omega_dual_route",
        o.direct,
        closed,
        scale,
        FRAME_TOL,
    )])
}

fn pft_checks(ctx: &Context, p: &PointData) -> Result<Vec<Check>> {
    let (m, k) = (ctx.m, ctx.k);
    let mf = m as f64;
    let (q, angles) = build_b2(p)?;
    let pf = pft_norms(p)?;
    let pq = pft_norms(&q)?;
    let s = angles.tau_sq_sum();
    // |omega|^2 / c^2 from the Kähler angles.
    let om = 18.0 * angles.tau_nu_sum();
    let (p2, t2, coef) = if k % 2 == 0 {
        (mf - 2.0 * s, 2.0 * s, mf / 9.0)
    } else {
        (mf - 1.0 - 2.0 * s, 1.0 + 2.0 * s, (mf + 2.0) / 9.0)
    };
    let divisor = if ctx.mutant("fp_divisor_8") { 8.0 } else { 9.0 };
    let chain_id = if k % 2 == 0 {
        "even_pt_chain"
    } else {
        "odd_pt_chain"
    };
    Ok(vec![
        Check::eq("p2_closed_form", pf.p2, p2, mf, FRAME_TOL),
        Check::eq("t2_closed_form", pf.t2, t2, mf, FRAME_TOL),
        Check::eq(
            "fp2_omega_ninth",
            pf.fp2,
            om / divisor,
            om.max(1.0),
            FRAME_TOL,
        ),
        Check::le(
            chain_id,
            coef * om,
            pf.p2 * pf.t2,
            Check::magnitude(&[coef * om, pf.p2 * pf.t2, 1.0]),
        ),
        Check::eq(
            "pft_frame_independent",
            (pq.p2 - pf.p2).abs().max((pq.t2 - pf.t2).abs()),
            0.0,
            mf,
            FRAME_TOL,
        ),
    ])
}

fn r2_checks(ctx: &Context, p: &PointData) -> Result<Vec<Check>> {
    let mf = ctx.m as f64;
    let s = traceless_split(p);
    let r = r2(p);
    let direct_ao2: f64 =
        p.h.iter()
            .map(|h| {
                let t = h.trace() / mf;
                let mut x = h.clone();
                for i in 0..ctx.m {
                    x[(i, i)] -= t;
                }
                x.norm_squared()
            })
            .sum();
    let mut out = vec![Check::eq(
        "ao2_definition",
        direct_ao2,
        s.a2 - s.h2 / mf,
        s.a2,
        IDENTITY_TOL,
    )];
    if s.h2.sqrt() > H_ZERO_TOL {
        let q = build_b1(p)?;
        let h1o2 = q.h[0].norm_squared() - s.h2 / mf;
        let hm2: f64 = q.h.iter().skip(1).map(|x| x.norm_squared()).sum();
        let denom = if ctx.mutant("r2_inverse_m_minus_1") {
            mf - 1.0
        } else {
            mf
        };
        let closed = h1o2 * s.h2 + s.h2 * s.h2 / denom;
        out.push(Check::eq(
            "r2_closed_form",
            r,
            closed,
            s.h2 * s.a2,
            IDENTITY_TOL,
        ));
        out.push(Check::eq(
            "b1_traceless_split",
            s.ao2,
            h1o2 + hm2,
            s.a2,
            IDENTITY_TOL,
        ));
        out.push(Check::eq("split_h1o2", s.h1o2, h1o2, s.a2, IDENTITY_TOL));
    } else {
        out.push(Check::eq("r2_zero_mean", r, 0.0, s.a2 * s.a2, IDENTITY_TOL));
    }
    Ok(out)
}

fn lest_checks(
    ctx: &Context,
    p: &PointData,
    params: &PinchParams,
    on_boundary: bool,
) -> Result<Vec<Check>> {
    let mf = ctx.m as f64;
    let a = params.a;
    let s = traceless_split(p);
    let (r1, r2v) = r1_r2(p);
    let (x, y, h2) = (s.h1o2, s.hminus2, s.h2);
    let lhs = 2.0 * r1 - 2.0 * a * r2v;
    let c1 = if ctx.mutant("lest_first_coefficient_1_9") {
        1.9
    } else {
        2.0
    };
    let terms = [
        c1 * x * x,
        -2.0 * (a - 2.0 / mf) * x * h2,
        -(2.0 / mf) * (a - 1.0 / mf) * h2 * h2,
        8.0 * x * y,
        3.0 * y * y,
    ];
    let rhs: f64 = terms.iter().sum();
    let mut mags = vec![2.0 * r1, 2.0 * a * r2v];
    mags.extend_from_slice(&terms);
    let mut out = vec![Check::le("lest_first", lhs, rhs, Check::magnitude(&mags))];
    if on_boundary {
        let b = s.a2 - a * h2;
        let d = mf * a - 1.0;
        let terms2 = [
            (6.0 - 2.0 / d) * s.ao2 * y,
            -3.0 * y * y,
            2.0 * mf * a * b / d * x,
            4.0 * b / d * y,
            -2.0 * b * b / d,
        ];
        let rhs2: f64 = terms2.iter().sum();
        let mut mags2 = vec![2.0 * r1, 2.0 * a * r2v];
        mags2.extend_from_slice(&terms2);
        out.push(Check::le(
            "lest_second",
            lhs,
            rhs2,
            Check::magnitude(&mags2),
        ));
    }
    Ok(out)
}

fn reaction_checks(ctx: &Context, p: &PointData, params: &PinchParams) -> Result<Vec<Check>> {
    let (m, k) = (ctx.m, ctx.k);
    let (mf, kf, c) = (m as f64, k as f64, ctx.space.c);
    let s = traceless_split(p);
    let rt = reaction_terms(p, params.a)?;
    let ao2 = s.ao2;
    let i_coef = if ctx.mutant("stima_minus_4m_minus_1") {
        4.0 * mf + 1.0
    } else {
        4.0 * mf
    };
    let ii_coef = if ctx.mutant("ii_strong_2m") {
        2.0 * mf
    } else {
        2.0 * (mf + 3.0)
    };
    let i_scale = 4.0 * c * (mf + 6.0) * ao2;
    let ii_scale = 2.0 * c * (mf + 3.0) * (ao2 + (params.a - 1.0 / mf) * s.h2);
    let iii_scale = 32.0 * c * kf * ao2;
    let mut out = vec![
        Check::le(
            "i_bound",
            rt.i,
            -i_coef * c * ao2,
            Check::magnitude(&[rt.i, i_scale]),
        ),
        Check::le(
            "ii_bound",
            rt.ii,
            ii_coef * c * ao2,
            Check::magnitude(&[rt.ii, ii_scale, 2.0 * c * (mf + 3.0) * ao2]),
        ),
        Check::le(
            "iii_bound",
            rt.iii,
            8.0 * kf * c * ao2,
            Check::magnitude(&[rt.iii, iii_scale]),
        ),
    ];
    if k == 2 {
        out.push(Check::le(
            "iii_bound_k2",
            rt.iii,
            16.0 * c * ao2,
            Check::magnitude(&[rt.iii, iii_scale]),
        ));
    }
    if k >= 2 {
        let gap = mf - 3.0 - 4.0 * kf;
        let scale = Check::magnitude(&[rt.i, rt.ii, rt.iii, i_scale, ii_scale, iii_scale]);
        out.push(Check::le(
            "pa_bound",
            rt.total(),
            -2.0 * gap * c * ao2,
            scale,
        ));
    } else {
        let hyp = hypersurface_reaction(p)?;
        let scale = Check::magnitude(&[hyp, i_scale]);
        out.push(Check::le("stima01", hyp, -i_coef * c * ao2, scale));
        out.push(Check::eq("hypersurface_route", hyp, rt.i, scale, FRAME_TOL));
    }
    Ok(out)
}

fn q_zero_checks(ctx: &Context, p: &PointData, params: &PinchParams) -> Result<Vec<Check>> {
    let (m, k) = (ctx.m, ctx.k);
    let (mf, kf, c) = (m as f64, k as f64, ctx.space.c);
    let (a, b) = (params.a, params.b);
    if k >= 2 {
        let ev = evaluate_full(p, params)?;
        let sc = &ev.scalars;
        let rt = &ev.reaction;
        let big_r = 2.0 * sc.R1 - 2.0 * a * sc.R2 + rt.total();
        let bound = 2.0 * b * (5.0 * b / 3.0 - (mf - 3.0 - 4.0 * kf) * c);
        let scale = Check::magnitude(&[2.0 * sc.R1, 2.0 * a * sc.R2, rt.i, rt.ii, rt.iii, bound]);
        return Ok(vec![
            Check::lt("r_negative", big_r, 0.0, scale),
            Check::le("r_chain", big_r, bound, scale),
        ]);
    }
    let s = traceless_split(p);
    let q = pinch_from_split(m, &s, params).q;
    let hyp = hypersurface_reaction(p)?;
    let rbar = ctx.space.einstein_constant()
        + if ctx.mutant("rbar_plus_2") {
            2.0 * c
        } else {
            0.0
        };
    let lhs = 2.0 * b * (s.a2 + rbar) - 4.0 * mf * c * s.ao2;
    let scale = Check::magnitude(&[2.0 * b * s.a2, 2.0 * b * rbar, 4.0 * mf * c * s.ao2]);
    Ok(vec![
        Check::le("hyp_chain", lhs, -(4.0 / a) * c * q, scale),
        Check::lt(
            "hyp_reaction_negative",
            2.0 * b * (s.a2 + rbar) + hyp,
            0.0,
            Check::magnitude(&[2.0 * b * s.a2, 2.0 * b * rbar, hyp]),
        ),
    ])
}

fn h_zero_checks(
    ctx: &Context,
    p: &PointData,
    params: &PinchParams,
    on_boundary: bool,
) -> Result<Vec<Check>> {
    let (m, k) = (ctx.m, ctx.k);
    let (mf, kf, c) = (m as f64, k as f64, ctx.space.c);
    let ev = evaluate_full(p, params)?;
    let sc = &ev.scalars;
    let a4 = sc.A2 * sc.A2;
    let coef = if ctx.mutant("lili_coefficient_2") {
        2.0
    } else {
        3.0
    };
    let mut out = vec![Check::le(
        "two_r1_three_a4",
        2.0 * sc.R1,
        coef * a4,
        Check::magnitude(&[2.0 * sc.R1, 3.0 * a4]),
    )];
    if on_boundary && k >= 2 {
        let rt = &ev.reaction;
        let b = params.b;
        let big_r = 2.0 * sc.R1 - 2.0 * params.a * sc.R2 + rt.total();
        let bound = 3.0 * b * b - 2.0 * (mf - 3.0 - 4.0 * kf) * c * b;
        let scale = Check::magnitude(&[2.0 * sc.R1, rt.i, rt.ii, rt.iii, bound]);
        out.push(Check::le("r_h_zero_chain", big_r, bound, scale));
        out.push(Check::lt("r_h_zero_negative", big_r, 0.0, scale));
    }
    Ok(out)
}

fn z_checks(
    ctx: &Context,
    p: &PointData,
    params: &PinchParams,
    zero_mean: bool,
) -> Result<Vec<Check>> {
    let (m, k) = (ctx.m, ctx.k);
    let mf = m as f64;
    let sc = CurvatureScalars::compute(p, params);
    let z = simons_z(p);
    let zc = z_constants(m, k, ctx.space.c, params);
    let lower = zc.rho * params.eps * sc.Ao2 * sc.W;
    let shift = if ctx.mutant("z_drop_2mb") {
        0.0
    } else {
        2.0 * mf * params.b * sc.Ao2
    };
    let dominant = sc.H2.sqrt() * sc.Ao2.powf(1.5) + sc.H2 * sc.Ao2 / mf + 2.0 * sc.Ao2 * sc.Ao2;
    let mut out = vec![Check::le(
        "z_lower_bound",
        lower,
        z + shift,
        Check::magnitude(&[lower, z, shift, dominant]),
    )];
    if zero_mean {
        let a4 = sc.A2 * sc.A2;
        out.push(Check::le(
            "z_h_zero_floor",
            -1.5 * a4,
            z,
            Check::magnitude(&[a4, z]),
        ));
    }
    Ok(out)
}

fn gauss_checks(ctx: &Context, p: &PointData, params: &PinchParams) -> Result<Vec<Check>> {
    let (m, k) = (ctx.m, ctx.k);
    let (mf, c) = (m as f64, ctx.space.c);
    let s = traceless_split(p);
    let q1 = build_b1(p)?;
    let (_, vecs) = crate::eigen::sym_eigen(&q1.h[0]);
    let q = q1.rotate_tangent(&vecs);
    let mut kmin = f64::INFINITY;
    for i in 0..m {
        for j in i + 1..m {
            kmin = kmin.min(2.0 * gauss_sectional(&q, i, j)?);
        }
    }
    let denom = if ctx.mutant("gauss2_inverse_m_minus_1") {
        mf - 1.0
    } else {
        mf * (mf - 1.0)
    };
    let bound = 2.0 * c + s.h2 / denom - 2.0 * s.ao2;
    let scale = Check::magnitude(&[2.0 * c, s.h2 / (mf - 1.0), 2.0 * s.a2]);
    let mut out = vec![Check::le("gauss2", bound, kmin, scale)];
    if k == 1 {
        let w = pinch_from_split(m, &s, params).w;
        let cm = sectional_constant(m, c, params);
        out.push(Check::le(
            "sectional_positivity",
            params.eps * cm * w,
            kmin,
            scale,
        ));
        // |A|^2 - |H|^2/(m-1) as the sum of squares, for every pair of eigenvalues.
        let lam = DVector::from_iterator(m, (0..m).map(|i| q.h[0][(i, i)]));
        let hn = lam.sum();
        let t = hn / (mf - 1.0);
        let lhs = s.a2 - s.h2 / (mf - 1.0);
        let total_sq: f64 = lam.iter().map(|l| (l - t) * (l - t)).sum();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in i + 1..m {
                let rest = total_sq - (lam[i] - t).powi(2) - (lam[j] - t).powi(2);
                let rhs = -2.0 * lam[i] * lam[j] + (lam[i] + lam[j] - t).powi(2) + rest;
                worst = worst.max((lhs - rhs).abs());
            }
        }
        out.push(Check::eq(
            "prop_alg_identity",
            worst,
            0.0,
            Check::magnitude(&[s.a2, s.h2 / (mf - 1.0)]),
            IDENTITY_TOL,
        ));
    }
    Ok(out)
}

fn amw_checks(ctx: &Context, p: &PointData, params: &PinchParams) -> Result<Vec<Check>> {
    let mf = ctx.m as f64;
    let s = traceless_split(p);
    let pq = pinch_from_split(ctx.m, &s, params);
    let coef = if ctx.mutant("amw_coefficient_m") {
        mf
    } else {
        2.0 * mf
    };
    Ok(vec![
        Check::lt(
            "amw",
            s.a2,
            coef * pq.w,
            Check::magnitude(&[s.a2, 2.0 * mf * pq.w]),
        ),
        Check::lt("w_positive", -pq.w, 0.0, pq.w.abs().max(f64::MIN_POSITIVE)),
    ])
}
