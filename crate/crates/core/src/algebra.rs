//! Pointwise scalars built from the second fundamental form.
//!
//! Every contraction is evaluated in the frame stored in the [`PointData`];
//! all of them are invariant under tangent and normal frame rotations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ambient::{apply_j_columns, AmbientSpace};
use crate::eigen::sym_eigen;
use crate::error::{Error, Result};
use crate::frames::{build_b2, PointData, H_ZERO_TOL};

/// Constants of the pinching condition `|A|^2 < a|H|^2 + b` and of `W = alpha|H|^2 + beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinchParams {
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
}

impl PinchParams {
    /// Constants for an `m`-dimensional submanifold of codimension `k`.
    ///
    /// Hypersurfaces: `a = 1/(m-1+eps)`, `b = 2c(1-eps)`,
    /// `alpha = 2/((m-1+eps)(2 + rbar/c - 2 eps))`, `beta = 2c`.
    /// Codimension `k >= 2`: `b = (m-3-4k)(1-eps)c/m`, `alpha = (m-10)/(3m^2)`,
    /// `beta = (m-3-4k)c/m`.
    pub fn new(space: &AmbientSpace, m: usize, k: usize, eps: f64, sigma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::InvalidArgument(format!(
                "eps = {eps} outside [0, 1)"
            )));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma = {sigma} must be nonnegative"
            )));
        }
        if m < 2 || k == 0 {
            return Err(Error::InvalidArgument(format!(
                "need m >= 2 and k >= 1, got ({m}, {k})"
            )));
        }
        let (mf, kf, c) = (m as f64, k as f64, space.c);
        let a = 1.0 / (mf - 1.0 + eps);
        if k == 1 {
            let rbar = space.einstein_constant() / c;
            Ok(Self {
                a,
                b: 2.0 * c * (1.0 - eps),
                eps,
                alpha: 2.0 / ((mf - 1.0 + eps) * (2.0 + rbar - 2.0 * eps)),
                beta: 2.0 * c,
                sigma,
            })
        } else {
            let gap = mf - 3.0 - 4.0 * kf;
            if gap <= 0.0 {
                return Err(Error::Inadmissible {
                    m,
                    k,
                    reason: format!("m - 3 - 4k = {gap} is not positive"),
                });
            }
            Ok(Self {
                a,
                b: gap * (1.0 - eps) * c / mf,
                eps,
                alpha: (mf - 10.0) / (3.0 * mf * mf),
                beta: gap * c / mf,
                sigma,
            })
        }
    }

    pub fn for_point(p: &PointData, eps: f64, sigma: f64) -> Result<Self> {
        Self::new(&p.space, p.m(), p.k(), eps, sigma)
    }
}

/// Constant `c(m)` of the sectional-positivity chain for hypersurfaces:
/// `2K_ij >= eps c(m) W` with `c(m) = min(1/((m-1)(m-1+eps) alpha), 2c/beta)`.
pub fn sectional_constant(m: usize, c: f64, params: &PinchParams) -> f64 {
    let mf = m as f64;
    (1.0 / ((mf - 1.0) * (mf - 1.0 + params.eps) * params.alpha)).min(2.0 * c / params.beta)
}

/// Branch constants of the lower bound `Z + 2mb|Å|^2 >= rho eps |Å|^2 W`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZConstants {
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    /// Constant for `H != 0` (codimension >= 2) or for every point (hypersurfaces).
    pub rho_h: f64,
    /// Constant for `H = 0` (codimension >= 2).
    pub rho_zero: f64,
    pub rho: f64,
}

/// `rho` for the `Z` bound.
///
/// Hypersurfaces use `rho = c(m)`. For `k >= 2`:
/// `rho1 = min(m/(2(1-eps)), B/eps, C/(2 eps))` with
/// `B = (m-3+3eps)/(2(1-eps))`, `C = (m-2+eps(m+2))/(2(1-eps))`;
/// `rho2 = 1/(2(m-1))`, `rho3 = m/2`;
/// `rho_h = rho1/(eps rho1 + rho3) min(rho2/alpha, 2mb/beta)`,
/// `rho_zero = (2m - 3/2)(1-eps)/eps`.
pub fn z_constants(m: usize, k: usize, c: f64, params: &PinchParams) -> ZConstants {
    let (mf, e) = (m as f64, params.eps);
    if k == 1 {
        let r = sectional_constant(m, c, params);
        return ZConstants {
            rho1: r,
            rho2: r,
            rho3: 0.0,
            rho_h: r,
            rho_zero: r,
            rho: r,
        };
    }
    let big_b = (mf - 3.0 + 3.0 * e) / (2.0 * (1.0 - e));
    let big_c = (mf - 2.0 + e * (mf + 2.0)) / (2.0 * (1.0 - e));
    let rho1 = (mf / (2.0 * (1.0 - e)))
        .min(big_b / e)
        .min(big_c / (2.0 * e));
    let rho2 = 1.0 / (2.0 * (mf - 1.0));
    let rho3 = mf / 2.0;
    let rho_h =
        rho1 / (e * rho1 + rho3) * (rho2 / params.alpha).min(2.0 * mf * params.b / params.beta);
    let rho_zero = (2.0 * mf - 1.5) * (1.0 - e) / e;
    ZConstants {
        rho1,
        rho2,
        rho3,
        rho_h,
        rho_zero,
        rho: rho_h.min(rho_zero),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TracelessSplit {
    pub a2: f64,
    pub h2: f64,
    pub ao2: f64,
    /// `|h_1 - (|H|/m) g|^2` for `h_1` the component along `H/|H|`; zero when `H = 0`.
    pub h1o2: f64,
    /// `|Å|^2 - |h̊_1|^2`.
    pub hminus2: f64,
}

pub fn traceless_split(p: &PointData) -> TracelessSplit {
    let mf = p.m() as f64;
    let hv = p.mean_curvature();
    let h2 = hv.norm_squared();
    let a2: f64 = p.h.iter().map(|x| x.norm_squared()).sum();
    let ao2 = a2 - h2 / mf;
    let norm = h2.sqrt();
    if norm <= H_ZERO_TOL {
        return TracelessSplit {
            a2,
            h2,
            ao2,
            h1o2: 0.0,
            hminus2: ao2,
        };
    }
    let mut h1 = DMatrix::zeros(p.m(), p.m());
    for (x, &w) in p.h.iter().zip(hv.iter()) {
        h1 += x * (w / norm);
    }
    let h1n2 = h1.norm_squared();
    TracelessSplit {
        a2,
        h2,
        ao2,
        h1o2: h1n2 - h2 / mf,
        hminus2: a2 - h1n2,
    }
}

/// Traceless parts `h̊^a = h^a - (H^a/m) Id` and their products, shared by
/// `R1`, `Z` and the reaction terms. Working with `h̊` keeps the trace parts
/// out of every difference, so no `|H|^4`-sized terms cancel.
struct Products {
    ho: Vec<DMatrix<f64>>,
    hv: nalgebra::DVector<f64>,
    m: usize,
    squares: Vec<DMatrix<f64>>,
    /// `h̊^a h̊^b` for `a < b`, row-major over pairs.
    cross: Vec<DMatrix<f64>>,
}

impl Products {
    fn new(p: &PointData) -> Self {
        let (m, k) = (p.m(), p.k());
        let hv = p.mean_curvature();
        let ho: Vec<DMatrix<f64>> =
            p.h.iter()
                .zip(hv.iter())
                .map(|(x, &t)| {
                    let mut y = x.clone();
                    for i in 0..m {
                        y[(i, i)] -= t / m as f64;
                    }
                    y
                })
                .collect();
        let squares = ho.iter().map(|x| x * x).collect();
        let mut cross = Vec::with_capacity(k * (k.saturating_sub(1)) / 2);
        for a in 0..k {
            for b in a + 1..k {
                cross.push(&ho[a] * &ho[b]);
            }
        }
        Self {
            ho,
            hv,
            m,
            squares,
            cross,
        }
    }

    fn pairs(&self) -> impl Iterator<Item = ((usize, usize), &DMatrix<f64>)> {
        let k = self.ho.len();
        (0..k)
            .flat_map(move |a| (a + 1..k).map(move |b| (a, b)))
            .zip(self.cross.iter())
    }

    /// `<h̊^a, h̊^b>`.
    fn gram_traceless(&self) -> DMatrix<f64> {
        let k = self.ho.len();
        DMatrix::from_fn(k, k, |a, b| self.ho[a].dot(&self.ho[b]))
    }

    fn commutators(&self) -> f64 {
        2.0 * self
            .cross
            .iter()
            .map(|pm| (pm - pm.transpose()).norm_squared())
            .sum::<f64>()
    }

    fn r1(&self) -> f64 {
        let mf = self.m as f64;
        let g = self.gram_traceless();
        let full = DMatrix::from_fn(g.nrows(), g.ncols(), |a, b| {
            g[(a, b)] + self.hv[a] * self.hv[b] / mf
        });
        full.norm_squared() + self.commutators()
    }

    /// `Z = sum_a H^a <h̊^a, sum_b (h̊^b)^2> + (|H|^2/m)|Å|^2 - |g̊|^2 - sum |[h̊^a, h̊^b]|^2`,
    /// which equals the defining index sum after expanding the trace parts.
    fn z(&self) -> f64 {
        let m = self.m;
        let mut s2 = DMatrix::zeros(m, m);
        for sq in &self.squares {
            s2 += sq;
        }
        let cubic: f64 = self
            .ho
            .iter()
            .zip(self.hv.iter())
            .map(|(x, &w)| w * x.dot(&s2))
            .sum();
        let g = self.gram_traceless();
        cubic + self.hv.norm_squared() / m as f64 * g.trace()
            - g.norm_squared()
            - self.commutators()
    }
}

/// `R1 = sum_ab <h^a, h^b>^2 + sum_ab |[h^a, h^b]|^2` and
/// `R2 = sum_ij (sum_a H^a h^a_ij)^2`.
pub fn r1_r2(p: &PointData) -> (f64, f64) {
    (Products::new(p).r1(), r2(p))
}

pub fn r2(p: &PointData) -> f64 {
    let hv = p.mean_curvature();
    let mut hh = DMatrix::zeros(p.m(), p.m());
    for (x, &w) in p.h.iter().zip(hv.iter()) {
        hh += x * w;
    }
    hh.norm_squared()
}

/// `Z = sum H^a tr(h^a h^b h^b) - R1`.
pub fn simons_z(p: &PointData) -> f64 {
    Products::new(p).z()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReactionTerms {
    pub i: f64,
    pub ii: f64,
    pub iii: f64,
}

impl ReactionTerms {
    pub fn total(&self) -> f64 {
        self.i + self.ii + self.iii
    }
}

/// Curvature reaction terms `I`, `II`, `III` of the pinching evolution, with
/// the coefficient `a` entering `II`.
///
/// With `omega = <e_i, J e_j>` on the tangent space, `x_a = <e_j, J e_a>` and
/// `M = m Id + 3 X^T X`:
/// `I = 4c sum_a [(tr h)^2 - m|h|^2 - 3 tr(omega h omega h) + 3 tr(omega^2 h^2)]`,
/// `II = 2c sum_ab M_ab (<h^a, h^b> - a H^a H^b)`,
/// `III = -8c sum_ab [x_b^T h^a h^b x_a - x_a^T h^a h^b x_b + 2 O_ab tr(omega h^a h^b)]`.
pub fn reaction_terms(p: &PointData, a: f64) -> Result<ReactionTerms> {
    reaction_from_products(p, &Products::new(p), a)
}

/// [`reaction_terms`] evaluated after moving to a B2 frame.
pub fn reaction_terms_b2(p: &PointData, a: f64) -> Result<ReactionTerms> {
    let (q, _) = build_b2(p)?;
    reaction_terms(&q, a)
}

fn reaction_from_products(p: &PointData, pr: &Products, a: f64) -> Result<ReactionTerms> {
    if !p.space.is_complex() {
        return Err(Error::Unsupported("reaction terms require CP^n".into()));
    }
    let (m, k, c) = (p.m(), p.k(), p.space.c);
    let mf = m as f64;
    let jt = apply_j_columns(&p.tangent);
    let jn = apply_j_columns(&p.normal);
    let omega = p.tangent.transpose() * &jt;
    let x = p.tangent.transpose() * &jn;
    let onn = p.normal.transpose() * &jn;
    let omega2 = &omega * &omega;

    let mut i_sum = 0.0;
    for (h, sq) in pr.ho.iter().zip(&pr.squares) {
        let wh = &omega * h;
        i_sum += -mf * h.norm_squared() - 3.0 * wh.dot(&wh.transpose()) + 3.0 * omega2.dot(sq);
    }

    let hv = &pr.hv;
    let g = pr.gram_traceless();
    let mm = DMatrix::identity(k, k) * mf + x.transpose() * &x * 3.0;
    let mut ii_sum = 0.0;
    for al in 0..k {
        for be in 0..k {
            ii_sum += mm[(al, be)] * (g[(al, be)] - (a - 1.0 / mf) * hv[al] * hv[be]);
        }
    }

    let mut iii_sum = 0.0;
    for ((al, be), pm) in pr.pairs() {
        let xa = x.column(al);
        let xb = x.column(be);
        let t = xb.dot(&(pm * xa)) - xa.dot(&(pm * xb))
            + 2.0 * onn[(al, be)] * omega.dot(&pm.transpose());
        iii_sum += 2.0 * t;
    }
    Ok(ReactionTerms {
        i: 4.0 * c * i_sum,
        ii: 2.0 * c * ii_sum,
        iii: -8.0 * c * iii_sum,
    })
}

/// Hypersurface reaction `-2 sum_jl (lambda_j - lambda_l)^2 K_jl` from the
/// eigenvalues of `h` and the ambient sectional curvatures of its eigenframe.
pub fn hypersurface_reaction(p: &PointData) -> Result<f64> {
    if p.k() != 1 {
        return Err(Error::Unsupported(format!(
            "hypersurface reaction needs k = 1, got k = {}",
            p.k()
        )));
    }
    if !p.space.is_complex() {
        return Err(Error::Unsupported(
            "hypersurface reaction requires CP^n".into(),
        ));
    }
    // Eigenvalue differences are unchanged by removing the trace part, which
    // keeps them accurate when |H| dominates.
    let mut ho = p.h[0].clone();
    let shift = ho.trace() / p.m() as f64;
    for i in 0..p.m() {
        ho[(i, i)] -= shift;
    }
    let (lam, vecs) = sym_eigen(&ho);
    let e = &p.tangent * &vecs;
    let w = e.transpose() * apply_j_columns(&e);
    let c = p.space.c;
    let mut total = 0.0;
    for j in 0..p.m() {
        for l in 0..p.m() {
            if j != l {
                let d = lam[j] - lam[l];
                total += d * d * c * (1.0 + 3.0 * w[(j, l)] * w[(j, l)]);
            }
        }
    }
    Ok(-2.0 * total)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PinchQuantities {
    pub q: f64,
    pub w: f64,
    pub f_sigma: f64,
    /// `2mW - |A|^2`.
    pub amw_margin: f64,
}

pub fn pinch_quantities(p: &PointData, params: &PinchParams) -> PinchQuantities {
    let s = traceless_split(p);
    pinch_from_split(p.m(), &s, params)
}

pub fn pinch_from_split(m: usize, s: &TracelessSplit, params: &PinchParams) -> PinchQuantities {
    let w = params.alpha * s.h2 + params.beta;
    PinchQuantities {
        q: s.a2 - params.a * s.h2 - params.b,
        w,
        f_sigma: s.ao2 / w.powf(1.0 - params.sigma),
        amw_margin: 2.0 * m as f64 * w - s.a2,
    }
}

/// Intrinsic sectional curvature of the plane `(e_i, e_j)` by the Gauss equation.
pub fn gauss_sectional(p: &PointData, i: usize, j: usize) -> Result<f64> {
    let m = p.m();
    if i >= m || j >= m {
        return Err(Error::InvalidArgument(format!(
            "index out of range: ({i}, {j}) with m = {m}"
        )));
    }
    if i == j {
        return Err(Error::InvalidArgument(
            "gauss_sectional needs i != j".into(),
        ));
    }
    let ei = p.tangent.column(i).into_owned();
    let ej = p.tangent.column(j).into_owned();
    let kbar = p.space.sectional(&ei, &ej)?;
    let ext: f64 =
        p.h.iter()
            .map(|h| h[(i, i)] * h[(j, j)] - h[(i, j)] * h[(i, j)])
            .sum();
    Ok(kbar + ext)
}

/// Every scalar of a point at once.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct CurvatureScalars {
    pub A2: f64,
    pub H2: f64,
    pub Ao2: f64,
    pub h1o2: f64,
    pub hminus2: f64,
    pub R1: f64,
    pub R2: f64,
    pub Z: f64,
    pub Q: f64,
    pub W: f64,
    pub f_sigma: f64,
}

impl CurvatureScalars {
    pub fn compute(p: &PointData, params: &PinchParams) -> Self {
        let s = traceless_split(p);
        let pr = Products::new(p);
        let (r1, z) = (pr.r1(), pr.z());
        let pq = pinch_from_split(p.m(), &s, params);
        Self {
            A2: s.a2,
            H2: s.h2,
            Ao2: s.ao2,
            h1o2: s.h1o2,
            hminus2: s.hminus2,
            R1: r1,
            R2: r2(p),
            Z: z,
            Q: pq.q,
            W: pq.w,
            f_sigma: pq.f_sigma,
        }
    }
}

/// Scalars plus reaction terms, sharing the matrix products.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FullEvaluation {
    pub scalars: CurvatureScalars,
    pub reaction: ReactionTerms,
}

pub fn evaluate_full(p: &PointData, params: &PinchParams) -> Result<FullEvaluation> {
    let s = traceless_split(p);
    let pr = Products::new(p);
    let (r1, z) = (pr.r1(), pr.z());
    let pq = pinch_from_split(p.m(), &s, params);
    let reaction = reaction_from_products(p, &pr, params.a)?;
    Ok(FullEvaluation {
        scalars: CurvatureScalars {
            A2: s.a2,
            H2: s.h2,
            Ao2: s.ao2,
            h1o2: s.h1o2,
            hminus2: s.hminus2,
            R1: r1,
            R2: r2(p),
            Z: z,
            Q: pq.q,
            W: pq.w,
            f_sigma: pq.f_sigma,
        },
        reaction,
    })
}
