//! Geodesic spheres of radius `u` in `CP^n(4c)` and `HP^n(4c)`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{pinch_from_split, PinchParams, PinchQuantities, TracelessSplit};
use crate::ambient::{AmbientSpace, SpaceKind};
use crate::error::{Error, Result};
use crate::frames::PointData;

/// Bisection stops once the bracket is narrower than this.
pub const ROOT_TOL: f64 = 1e-14;
/// Grid resolution used to bracket sign changes on `(0, pi/(2 sqrt c))`.
pub const RANGE_GRID: usize = 4096;

/// Multiplicities `(mu1, mu2)` of `lambda1 = 2 sqrt(c) cot(2 sqrt(c) u)` and
/// `lambda2 = sqrt(c) cot(sqrt(c) u)`.
pub fn multiplicities(kind: SpaceKind, n: usize) -> (usize, usize) {
    match kind {
        SpaceKind::ComplexProjective => (1, 2 * (n - 1)),
        SpaceKind::QuaternionicProjective => (3, 4 * (n - 1)),
    }
}

/// Radius of the cut locus, `pi/(2 sqrt c)`.
pub fn focal_radius(space: &AmbientSpace) -> f64 {
    FRAC_PI_2 / space.c.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereScalars {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Scalar mean curvature `mu1 lambda1 + mu2 lambda2`.
    pub h: f64,
    pub a2: f64,
    pub h2: f64,
    pub ao2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereModel {
    pub space: AmbientSpace,
    pub u: f64,
}

impl SphereModel {
    pub fn new(space: AmbientSpace, u: f64) -> Result<Self> {
        if space.n < 2 {
            return Err(Error::InvalidArgument(format!(
                "geodesic spheres need n >= 2, got n = {}",
                space.n
            )));
        }
        let uf = focal_radius(&space);
        if !(u > 0.0 && u < uf) {
            return Err(Error::InvalidArgument(format!(
                "radius u = {u} outside (0, {uf})"
            )));
        }
        Ok(Self { space, u })
    }

    pub fn multiplicities(&self) -> (usize, usize) {
        multiplicities(self.space.kind, self.space.n)
    }

    pub fn m(&self) -> usize {
        let (m1, m2) = self.multiplicities();
        m1 + m2
    }

    pub fn principal_curvatures(&self) -> (f64, f64) {
        let s = self.space.c.sqrt();
        let x = s * self.u;
        (2.0 * s / (2.0 * x).tan(), s / x.tan())
    }

    pub fn scalars(&self) -> SphereScalars {
        let (m1, m2) = self.multiplicities();
        let (m1, m2) = (m1 as f64, m2 as f64);
        let (l1, l2) = self.principal_curvatures();
        let h = m1 * l1 + m2 * l2;
        let a2 = m1 * l1 * l1 + m2 * l2 * l2;
        // lambda1 - lambda2 = -sqrt(c) tan(sqrt(c) u) keeps |Å|^2 free of cancellation.
        let gap = self.space.c * (self.space.c.sqrt() * self.u).tan().powi(2);
        let ao2 = m1 * m2 / (m1 + m2) * gap;
        SphereScalars {
            lambda1: l1,
            lambda2: l2,
            h,
            a2,
            h2: h * h,
            ao2,
        }
    }

    /// `H * u`, bounded as `u -> 0` (tends to `m`).
    pub fn h_times_u(&self) -> f64 {
        let (m1, m2) = self.multiplicities();
        let x = self.space.c.sqrt() * self.u;
        m1 as f64 * (2.0 * x) / (2.0 * x).tan() + m2 as f64 * x / x.tan()
    }

    pub fn params(&self, eps: f64) -> Result<PinchParams> {
        PinchParams::new(&self.space, self.m(), 1, eps, 0.0)
    }

    pub fn split(&self) -> TracelessSplit {
        let s = self.scalars();
        TracelessSplit {
            a2: s.a2,
            h2: s.h2,
            ao2: s.ao2,
            h1o2: s.ao2,
            hminus2: 0.0,
        }
    }

    /// `Q`, `W`, `f_0` and the amw margin from the scalar data.
    pub fn pinch(&self, params: &PinchParams) -> PinchQuantities {
        pinch_from_split(self.m(), &self.split(), params)
    }

    /// Log of the area `sin^{mu2}(sqrt(c) u) sin^{mu1}(2 sqrt(c) u)`, up to a constant.
    pub fn log_volume(&self) -> f64 {
        let (m1, m2) = self.multiplicities();
        let x = self.space.c.sqrt() * self.u;
        m2 as f64 * x.sin().ln() + m1 as f64 * (2.0 * x).sin().ln()
    }

    /// Radial derivatives `(d lambda1/du, d lambda2/du) = (-(4c + lambda1^2), -(c + lambda2^2))`.
    pub fn curvature_slopes(&self) -> (f64, f64) {
        let (l1, l2) = self.principal_curvatures();
        let c = self.space.c;
        (-(4.0 * c + l1 * l1), -(c + l2 * l2))
    }

    /// Exact time derivatives along `du/dt = -H`.
    pub fn time_derivatives(&self) -> SphereRates {
        let (m1, m2) = self.multiplicities();
        let (m1, m2) = (m1 as f64, m2 as f64);
        let s = self.scalars();
        let (d1, d2) = self.curvature_slopes();
        let ut = -s.h;
        let h_t = (m1 * d1 + m2 * d2) * ut;
        let a2_t = 2.0 * (m1 * s.lambda1 * d1 + m2 * s.lambda2 * d2) * ut;
        let gap = s.lambda1 - s.lambda2;
        let ao2_t = 2.0 * m1 * m2 / (m1 + m2) * gap * (d1 - d2) * ut;
        SphereRates {
            h2: 2.0 * s.h * h_t,
            a2: a2_t,
            ao2: ao2_t,
            h4: 2.0 * s.h2 * 2.0 * s.h * h_t,
            log_volume: -s.h2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereRates {
    pub h2: f64,
    pub a2: f64,
    pub ao2: f64,
    pub h4: f64,
    pub log_volume: f64,
}

/// Point data of the sphere in `CP^n`: `nu = e_0`, `e_1 = J nu`, then the
/// remaining coordinate vectors; `h = diag(lambda1, lambda2, ..., lambda2)`.
pub fn sphere_point_data(model: &SphereModel) -> Result<PointData> {
    if !model.space.is_complex() {
        return Err(Error::Unsupported(
            "frame realization of geodesic spheres needs CP^n; HP^n is scalar only".into(),
        ));
    }
    let d = model.space.realdim();
    let m = d - 1;
    let normal = DMatrix::from_fn(d, 1, |r, _| if r == 0 { 1.0 } else { 0.0 });
    let tangent = DMatrix::from_fn(d, m, |r, c| if r == c + 1 { 1.0 } else { 0.0 });
    let (l1, l2) = model.principal_curvatures();
    let h = DMatrix::from_fn(m, m, |i, j| match (i, j) {
        (0, 0) => l1,
        _ if i == j => l2,
        _ => 0.0,
    });
    PointData::new(model.space, tangent, normal, vec![h])
}

/// Closed-form pinching test. At `eps = 0` this is
/// `c[2(2n-3)cot^2(2x) - 2(n-1)cot^2(x)]` on `CP^n` and
/// `c[3(4n-5)cot^2(2x) - 4(n-1)cot^2(x) + 4n-5]` on `HP^n`, `x = sqrt(c) u`;
/// both equal `(m-1)Q/d` with `d = 2, 4`. For `eps > 0` the value is
/// `(m-1+eps)Q_eps/d`, which reduces to the same expressions at `eps = 0`.
pub fn pinch_test_closed_form(model: &SphereModel, eps: f64) -> Result<f64> {
    let n = model.space.n as f64;
    let c = model.space.c;
    if eps == 0.0 {
        let x = c.sqrt() * model.u;
        let cot2 = (1.0 / (2.0 * x).tan()).powi(2);
        let cot = (1.0 / x.tan()).powi(2);
        return Ok(match model.space.kind {
            SpaceKind::ComplexProjective => {
                c * (2.0 * (2.0 * n - 3.0) * cot2 - 2.0 * (n - 1.0) * cot)
            }
            SpaceKind::QuaternionicProjective => {
                c * (3.0 * (4.0 * n - 5.0) * cot2 - 4.0 * (n - 1.0) * cot + 4.0 * n - 5.0)
            }
        });
    }
    let params = model.params(eps)?;
    let d = model.space.kind.unit_dim() as f64;
    Ok((model.m() as f64 - 1.0 + eps) * model.pinch(&params).q / d)
}

/// `Q` through the generic pipeline on the realized point data (`CP^n` only).
pub fn pinch_q_generic(model: &SphereModel, eps: f64) -> Result<f64> {
    let p = sphere_point_data(model)?;
    let params = PinchParams::for_point(&p, eps, 0.0)?;
    Ok(crate::algebra::pinch_quantities(&p, &params).q)
}

/// Bisection on a bracket `[lo, hi]` with `f(lo)` and `f(hi)` of opposite sign.
pub fn bisect<F: FnMut(f64) -> Result<f64>>(mut f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut flo = f(lo)?;
    for _ in 0..200 {
        if hi - lo <= ROOT_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinchRange {
    pub space: AmbientSpace,
    pub eps: f64,
    /// Open intervals `(lo, hi)` on which the test is negative.
    pub intervals: Vec<(f64, f64)>,
    /// Set when no sign change was found on the grid.
    pub diagnostic: Option<String>,
}

impl PinchRange {
    pub fn contains(&self, u: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo < u && u < hi)
    }

    /// Upper end of the interval starting at zero, if any.
    pub fn first_boundary(&self) -> Option<f64> {
        self.intervals
            .first()
            .filter(|iv| iv.0 == 0.0)
            .map(|iv| iv.1)
    }
}

/// Intervals of `(0, uf)` where `f < 0`, with boundaries found by bisection.
pub fn negative_intervals<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    uf: f64,
    grid: usize,
) -> Result<(Vec<(f64, f64)>, bool)> {
    let pts: Vec<f64> = (0..grid)
        .map(|i| uf * (i as f64 + 0.5) / grid as f64)
        .collect();
    let vals = pts.iter().map(|&u| f(u)).collect::<Result<Vec<f64>>>()?;
    let mut out = Vec::new();
    let mut start = if vals[0] < 0.0 { Some(0.0) } else { None };
    let mut changed = false;
    for i in 1..grid {
        let (a, b) = (vals[i - 1] < 0.0, vals[i] < 0.0);
        if a == b {
            continue;
        }
        changed = true;
        let root = bisect(&mut f, pts[i - 1], pts[i])?;
        if b {
            start = Some(root);
        } else if let Some(lo) = start.take() {
            out.push((lo, root));
        }
    }
    if let Some(lo) = start {
        out.push((lo, uf));
    }
    Ok((out, changed))
}

/// The pinched radii `{u : pinch_test_closed_form < 0}`.
pub fn pinch_range(space: &AmbientSpace, eps: f64) -> Result<PinchRange> {
    if space.n < 3 {
        return Err(Error::InvalidArgument(format!(
            "pinch range needs n >= 3, got n = {}",
            space.n
        )));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!(
            "eps = {eps} outside [0, 1)"
        )));
    }
    let uf = focal_radius(space);
    let (intervals, changed) = negative_intervals(
        |u| pinch_test_closed_form(&SphereModel { space: *space, u }, eps),
        uf,
        RANGE_GRID,
    )?;
    let diagnostic = (!changed).then(|| {
        if intervals.is_empty() {
            "no sign change: no radius is pinched".to_string()
        } else {
            "no sign change: every radius is pinched".to_string()
        }
    });
    Ok(PinchRange {
        space: *space,
        eps,
        intervals,
        diagnostic,
    })
}

/// The same range located from the sign of `Q`: through the generic
/// pipeline on the realized point data for `CP^n`, from the scalar data for
/// `HP^n`.
pub fn pinch_range_generic(space: &AmbientSpace, eps: f64) -> Result<Vec<(f64, f64)>> {
    let uf = focal_radius(space);
    let q = |u: f64| {
        let model = SphereModel { space: *space, u };
        if space.is_complex() {
            pinch_q_generic(&model, eps)
        } else {
            Ok(model.pinch(&model.params(eps)?).q)
        }
    };
    let (intervals, _) = negative_intervals(q, uf, RANGE_GRID)?;
    Ok(intervals)
}

/// Radius of the minimal geodesic sphere, by bisection on `H`.
pub fn minimal_radius(space: &AmbientSpace) -> Result<f64> {
    let uf = focal_radius(space);
    let h = |u: f64| Ok(SphereModel { space: *space, u }.scalars().h);
    bisect(h, 1e-3 * uf, (1.0 - 1e-3) * uf)
}

/// Closed form `tan^2(sqrt(c) u*) = m/mu1`.
pub fn minimal_radius_closed_form(space: &AmbientSpace) -> f64 {
    let (m1, m2) = multiplicities(space.kind, space.n);
    (((m1 + m2) as f64 / m1 as f64).sqrt()).atan() / space.c.sqrt()
}
