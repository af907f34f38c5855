use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{mix, KahlerAngles, Orthogonalizer, PointData};
use crate::ambient::{apply_j, apply_j_columns, FrameTensor};
use crate::error::{Error, Result};

/// Pairs whose tangential part `|P_T J e_{m+2r-1}|` falls below this use the
/// degenerate (`tau = 0, nu = 1`) branch.
pub const DEGENERATE_TAU: f64 = 1e-12;

/// Largest accepted Gram deviation of the assembled tangent frame.
const ASSEMBLY_TOL: f64 = 1e-8;

/// J-adapted frame of kind B2 together with its Kähler angles.
///
/// Normal pairs `(e_{m+2r-1}, e_{m+2r})` bring the skew form
/// `phi(X, Y) = <JX, Y>` on the normal space to 2x2 blocks with entries
/// `nu_r`; tangent partners are the normalized tangential parts of their `J`
/// images, and the rest of the tangent space is filled with pairs `(x, Jx)`.
pub fn build_b2(p: &PointData) -> Result<(PointData, KahlerAngles)> {
    if !p.space.is_complex() {
        return Err(Error::Unsupported("B2 frames require CP^n".into()));
    }
    let (m, k) = (p.m(), p.k());
    if k > m {
        return Err(Error::Unsupported(format!(
            "B2 frame needs k <= m, got k = {k}, m = {m}"
        )));
    }

    let jn = apply_j_columns(&p.normal);
    let f = jn.transpose() * &p.normal;
    let (v, nus) = canonical_pairs(&f);

    let normal = &p.normal * &v;
    let jn2 = jn * &v;
    let tcoef = p.tangent.transpose() * &jn2;
    let tan = &p.tangent * &tcoef;

    let pairs_n = k / 2;
    let mut pairs = Vec::with_capacity(pairs_n);
    let mut degenerate = Vec::new();
    let mut regular = Vec::new();
    for r in 0..pairs_n {
        let (ia, ib) = (2 * r, 2 * r + 1);
        let tau_a = tcoef.column(ia).norm();
        let tau_b = tcoef.column(ib).norm();
        if tau_a < DEGENERATE_TAU || tau_b < DEGENERATE_TAU {
            degenerate.push(r);
            pairs.push((0.0, 1.0));
        } else {
            regular.push((r, tau_a, tau_b));
            pairs.push((tau_a.min(1.0), nus[r].clamp(0.0, 1.0)));
        }
    }
    // The direction of a tangential part is accurate to O(eps_mach / tau), so
    // the best-conditioned vectors enter the Gram–Schmidt sweep first and the
    // error of small-tau pairs does not leak into the others.
    regular.sort_by(|x, y| y.1.total_cmp(&x.1));

    let mut orth = Orthogonalizer::new(p.tangent.clone());
    let mut order = Vec::with_capacity(m);
    if k % 2 == 1 {
        orth.push(tan.column(k - 1).normalize());
        order.push(k - 1);
    }
    for (r, tau_a, tau_b) in regular {
        let (ia, ib) = (2 * r, 2 * r + 1);
        orth.push(tan.column(ia) / tau_a);
        let ta = orth.basis().last().expect("just pushed").clone();
        // For small tau the tangential part of J e_b is mostly rounding;
        // the partner from J t_a = -nu t_b - tau e_a stays accurate.
        let tb = if tau_a <= nus[r] {
            let raw = -(apply_j(&ta) + normal.column(ia) * tau_a) / nus[r];
            &p.tangent * (p.tangent.transpose() * raw)
        } else {
            tan.column(ib) / tau_b
        };
        orth.push(tb);
        order.extend([ia, ib]);
    }
    for r in degenerate {
        let x = orth.best_candidate();
        let y = -apply_j(&x);
        orth.push(x);
        orth.push(y);
        order.extend([2 * r, 2 * r + 1]);
    }
    let mut next = k;
    while next + 1 < m {
        let x = orth.best_candidate();
        let y = apply_j(&x);
        orth.push(x);
        orth.push(y);
        order.extend([next, next + 1]);
        next += 2;
    }
    if order.len() != m {
        return Err(Error::Orthonormalization {
            deviation: f64::INFINITY,
            condition: f64::INFINITY,
        });
    }
    let mut slots: Vec<Option<DVector<f64>>> = vec![None; m];
    for (b, &i) in orth.basis().iter().zip(&order) {
        slots[i] = Some(b.clone());
    }
    let t_new = DMatrix::from_columns(
        &slots
            .into_iter()
            .map(|c| c.expect("slot filled"))
            .collect::<Vec<_>>(),
    );

    let gram = t_new.transpose() * &t_new;
    let cross = t_new.transpose() * &normal;
    let deviation = (&gram - DMatrix::identity(m, m)).amax().max(cross.amax());
    if deviation > ASSEMBLY_TOL {
        let sv = gram.singular_values();
        let condition = sv.max() / sv.min();
        return Err(Error::Orthonormalization {
            deviation,
            condition,
        });
    }

    let o = p.tangent.transpose() * &t_new;
    let ot = o.transpose();
    let h_rot: Vec<_> = p.h.iter().map(|hm| &ot * hm * &o).collect();
    let q = PointData {
        space: p.space,
        tangent: &p.tangent * &o,
        normal,
        h: mix(&h_rot, &v),
    };
    Ok((
        q,
        KahlerAngles {
            pairs,
            odd_tail: k % 2 == 1,
        },
    ))
}

/// Orthonormal basis `[a_1, b_1, a_2, b_2, ..., c]` of the coefficient space
/// bringing the skew matrix `f` to blocks `[[0, nu_r], [-nu_r, 0]]`, with `nu_r`
/// descending.
fn canonical_pairs(f: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let k = f.nrows();
    let mut rest = DMatrix::identity(k, k);
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut nus = Vec::with_capacity(k / 2);
    while rest.ncols() >= 2 {
        let fc = rest.transpose() * f * &rest;
        let (values, vectors) = crate::eigen::sym_eigen(&(fc.transpose() * &fc));
        let (imax, lmax) =
            values
                .iter()
                .copied()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, x| if x.1 > acc.1 { x } else { acc },
                );
        let a = (&rest * vectors.column(imax)).normalize();
        let nu_est = lmax.max(0.0).sqrt();
        let mut b = if nu_est > 1e-13 {
            // Projecting onto the deflated complement removes the O(eps / nu)
            // leakage of -f a / nu into the blocks already extracted.
            let raw = -(f * &a) / nu_est;
            let mut b = &rest * (rest.transpose() * raw);
            b.axpy(-a.dot(&b), &a, 1.0);
            b.normalize()
        } else {
            // The top eigenspace of a vanishing block is all of it.
            let mut span = Orthogonalizer::new(rest.clone());
            span.push_exact(a.clone());
            span.best_candidate()
        };
        let mut local = Orthogonalizer::new(rest.clone());
        local.push_exact(a.clone());
        let mut nu = a.dot(&(f * &b));
        if nu < 0.0 {
            b = -b;
            nu = -nu;
        }
        local.push(b.clone());
        while local.len() < rest.ncols() {
            let w = local.best_candidate();
            local.push(w);
        }
        rest = match &local.basis()[2..] {
            [] => DMatrix::zeros(k, 0),
            tail => DMatrix::from_columns(tail),
        };
        cols.push(a);
        cols.push(b);
        nus.push(nu);
    }
    if rest.ncols() == 1 {
        cols.push(rest.column(0).normalize());
    }
    (DMatrix::from_columns(&cols), nus)
}

/// Largest componentwise residuals of the B2 relations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct B2Residuals {
    pub base01: f64,
    pub base02: f64,
    pub base03: f64,
    pub odd_tail: f64,
    pub orthonormality: f64,
}

impl B2Residuals {
    pub fn max(&self) -> f64 {
        self.base01
            .max(self.base02)
            .max(self.base03)
            .max(self.odd_tail)
            .max(self.orthonormality)
    }
}

/// Evaluates every relation of a B2 frame directly in ambient coordinates.
pub fn b2_residuals(q: &PointData, angles: &KahlerAngles) -> B2Residuals {
    let (m, k) = (q.m(), q.k());
    let t = |i: usize| q.tangent.column(i).into_owned();
    let n = |a: usize| q.normal.column(a).into_owned();
    let jt = apply_j_columns(&q.tangent);
    let jn = apply_j_columns(&q.normal);
    let amax = |v: DVector<f64>| v.amax();
    let mut res = B2Residuals {
        orthonormality: q.gram_deviation(),
        ..Default::default()
    };
    for (r, &(tau, nu)) in angles.pairs.iter().enumerate() {
        let (i, j) = (2 * r, 2 * r + 1);
        res.base01 = res
            .base01
            .max(amax(jn.column(i) - t(i) * tau - n(j) * nu))
            .max(amax(jn.column(j) - t(j) * tau + n(i) * nu));
        res.base03 = res
            .base03
            .max(amax(jt.column(i) + t(j) * nu + n(i) * tau))
            .max(amax(jt.column(j) - t(i) * nu + n(j) * tau));
    }
    if k % 2 == 1 {
        let last = k - 1;
        res.odd_tail = amax(jn.column(last) - t(last)).max(amax(jt.column(last) + n(last)));
    }
    let mut i = k;
    while i + 1 < m {
        res.base02 = res.base02.max(amax(jt.column(i) - t(i + 1)));
        i += 2;
    }
    res
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaNorm {
    pub direct: f64,
    pub closed_form: f64,
}

/// `|omega|^2` by contracting the curvature tensor over a B2 frame, next to
/// the Kähler-angle closed form `18 sum tau^2 nu^2` (both scaled by `c^2`).
pub fn omega_norm2(p: &PointData) -> Result<OmegaNorm> {
    let (q, angles) = build_b2(p)?;
    let (m, k) = (q.m(), q.k());
    let ft = FrameTensor::new(&q.space, &q.frame())?;
    let mut direct = 0.0;
    for i in 0..m {
        for alpha in m..m + k {
            let s: f64 = (0..m).map(|j| ft.r(alpha, j, i, j)).sum();
            direct += s * s;
        }
    }
    let c = q.space.c;
    Ok(OmegaNorm {
        direct,
        closed_form: 18.0 * c * c * angles.tau_nu_sum(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PftNorms {
    pub p2: f64,
    pub t2: f64,
    pub fp2: f64,
}

/// Norms of the tangential part `P` of `J` on tangent vectors, the tangential
/// part `t` of `J` on normal vectors, and `FP` (normal part of `J P`).
pub fn pft_norms(p: &PointData) -> Result<PftNorms> {
    if !p.space.is_complex() {
        return Err(Error::Unsupported("P, t and FP require CP^n".into()));
    }
    let jt = apply_j_columns(&p.tangent);
    let jn = apply_j_columns(&p.normal);
    let pcoef = p.tangent.transpose() * &jt;
    let tcoef = p.tangent.transpose() * jn;
    let fp = p.normal.transpose() * jt * &pcoef;
    Ok(PftNorms {
        p2: pcoef.norm_squared(),
        t2: tcoef.norm_squared(),
        fp2: fp.norm_squared(),
    })
}
