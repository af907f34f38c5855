//! Submanifold point data, adapted frames and Kähler-angle invariants.

mod b2;
mod ortho;
pub mod sampling;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ambient::{AmbientSpace, ORTHONORMAL_TOL};
use crate::error::{Error, Result};

pub use b2::{b2_residuals, build_b2, omega_norm2, pft_norms, B2Residuals, OmegaNorm, PftNorms};
pub(crate) use ortho::Orthogonalizer;
pub use sampling::{
    admissible, angle_point, random_orthogonal, random_point, random_unitary, HShape, PointSampler,
};

/// Tolerance on `|H|` below which no B1 frame is built.
pub const H_ZERO_TOL: f64 = 1e-12;

/// Tolerance on `|h - h^T|` (max entry) accepted by [`PointData::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// First- and second-order data of a submanifold at one point.
///
/// `tangent` and `normal` hold frame vectors as columns of `realdim`-row
/// matrices; `h[alpha]` is the matrix `h^alpha_ij` for the normal column `alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointData {
    pub space: AmbientSpace,
    pub tangent: DMatrix<f64>,
    pub normal: DMatrix<f64>,
    pub h: Vec<DMatrix<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KahlerAngles {
    /// `(tau_r, nu_r)` for `r = 1..floor(k/2)`.
    pub pairs: Vec<(f64, f64)>,
    /// Set when `k` is odd (the convention `tau = 1, nu = 0` for the last index).
    pub odd_tail: bool,
}

impl KahlerAngles {
    pub fn tau_nu_sum(&self) -> f64 {
        self.pairs.iter().map(|&(t, n)| t * t * n * n).sum()
    }

    pub fn tau_sq_sum(&self) -> f64 {
        self.pairs.iter().map(|&(t, _)| t * t).sum()
    }

    /// Largest `|tau^2 + nu^2 - 1|` over the pairs.
    pub fn unit_defect(&self) -> f64 {
        self.pairs
            .iter()
            .map(|&(t, n)| (t * t + n * n - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn in_range(&self) -> bool {
        self.pairs
            .iter()
            .all(|&(t, n)| (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&n))
    }
}

impl PointData {
    pub fn new(
        space: AmbientSpace,
        tangent: DMatrix<f64>,
        normal: DMatrix<f64>,
        h: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let p = Self {
            space,
            tangent,
            normal,
            h,
        };
        p.validate(ORTHONORMAL_TOL)?;
        Ok(p)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let d = self.space.realdim();
        let (m, k) = (self.m(), self.k());
        for rows in [self.tangent.nrows(), self.normal.nrows()] {
            if rows != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: rows,
                });
            }
        }
        if m + k != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: m + k,
            });
        }
        if self.h.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: self.h.len(),
            });
        }
        for (index, hm) in self.h.iter().enumerate() {
            if hm.nrows() != m || hm.ncols() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: hm.nrows().max(hm.ncols()),
                });
            }
            let asymmetry = (hm - hm.transpose()).amax();
            if asymmetry > SYMMETRY_TOL * (1.0 + hm.amax()) {
                return Err(Error::NotSymmetric { index, asymmetry });
            }
        }
        let deviation = self.gram_deviation();
        if deviation > tol {
            return Err(Error::NotOrthonormal {
                deviation,
                tolerance: tol,
            });
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.tangent.ncols()
    }

    pub fn k(&self) -> usize {
        self.normal.ncols()
    }

    /// `[tangent | normal]`.
    pub fn frame(&self) -> DMatrix<f64> {
        let (d, m, k) = (self.space.realdim(), self.m(), self.k());
        let mut f = DMatrix::zeros(d, m + k);
        f.columns_mut(0, m).copy_from(&self.tangent);
        f.columns_mut(m, k).copy_from(&self.normal);
        f
    }

    pub fn gram_deviation(&self) -> f64 {
        let f = self.frame();
        let g = f.transpose() * &f;
        (g - DMatrix::identity(f.ncols(), f.ncols())).amax()
    }

    /// Coefficients `H^alpha = tr h^alpha`.
    pub fn mean_curvature(&self) -> DVector<f64> {
        DVector::from_iterator(self.k(), self.h.iter().map(|hm| hm.trace()))
    }

    /// Mean curvature vector `sum_alpha H^alpha e_alpha` in ambient coordinates.
    pub fn mean_curvature_vector(&self) -> DVector<f64> {
        &self.normal * self.mean_curvature()
    }

    /// Rotates the tangent frame: `e'_j = sum_i O_ij e_i`, `h' = O^T h O`.
    pub fn rotate_tangent(&self, o: &DMatrix<f64>) -> Self {
        let ot = o.transpose();
        Self {
            space: self.space,
            tangent: &self.tangent * o,
            normal: self.normal.clone(),
            h: self.h.iter().map(|hm| &ot * hm * o).collect(),
        }
    }

    /// Rotates the normal frame: `e'_alpha = sum_beta U_beta,alpha e_beta`.
    pub fn rotate_normal(&self, u: &DMatrix<f64>) -> Self {
        Self {
            space: self.space,
            tangent: self.tangent.clone(),
            normal: &self.normal * u,
            h: mix(&self.h, u),
        }
    }

    pub fn to_record(&self) -> PointRecord {
        let rows = |mat: &DMatrix<f64>| -> Vec<Vec<f64>> {
            mat.column_iter()
                .map(|c| c.iter().copied().collect())
                .collect()
        };
        PointRecord {
            space: self.space,
            m: self.m(),
            k: self.k(),
            tangent: rows(&self.tangent),
            normal: rows(&self.normal),
            h: self
                .h
                .iter()
                .map(|hm| hm.row_iter().map(|r| r.iter().copied().collect()).collect())
                .collect(),
        }
    }

    pub fn from_record(rec: &PointRecord) -> Result<Self> {
        let d = rec.space.realdim();
        let frame = |vs: &[Vec<f64>]| -> Result<DMatrix<f64>> {
            for v in vs {
                if v.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: v.len(),
                    });
                }
            }
            Ok(DMatrix::from_fn(d, vs.len(), |r, c| vs[c][r]))
        };
        let mut h = Vec::with_capacity(rec.h.len());
        for rows in &rec.h {
            if rows.len() != rec.m || rows.iter().any(|r| r.len() != rec.m) {
                return Err(Error::DimensionMismatch {
                    expected: rec.m,
                    got: rows.len(),
                });
            }
            h.push(DMatrix::from_fn(rec.m, rec.m, |i, j| rows[i][j]));
        }
        let p = Self::new(rec.space, frame(&rec.tangent)?, frame(&rec.normal)?, h)?;
        if p.m() != rec.m || p.k() != rec.k {
            return Err(Error::DimensionMismatch {
                expected: rec.m,
                got: p.m(),
            });
        }
        Ok(p)
    }
}

/// JSON form of [`PointData`]: each frame vector is one row of coordinates;
/// `h[alpha]` is a row-major symmetric matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub space: AmbientSpace,
    pub m: usize,
    pub k: usize,
    pub tangent: Vec<Vec<f64>>,
    pub normal: Vec<Vec<f64>>,
    pub h: Vec<Vec<Vec<f64>>>,
}

/// `out[alpha] = sum_beta u[beta, alpha] h[beta]`.
pub(crate) fn mix(h: &[DMatrix<f64>], u: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let m = h.first().map_or(0, |x| x.nrows());
    (0..u.ncols())
        .map(|a| {
            let mut acc = DMatrix::zeros(m, m);
            for (b, hb) in h.iter().enumerate() {
                let w = u[(b, a)];
                if w != 0.0 {
                    acc += hb * w;
                }
            }
            acc
        })
        .collect()
}

/// B1 frame: first normal along `H`, remaining normals by Gram–Schmidt
/// against the previous normal frame (coordinate order).
pub fn build_b1(p: &PointData) -> Result<PointData> {
    build_b1_with_tol(p, H_ZERO_TOL)
}

pub fn build_b1_with_tol(p: &PointData, tol: f64) -> Result<PointData> {
    let hv = p.mean_curvature();
    let norm = hv.norm();
    if norm <= tol {
        return Err(Error::ZeroMeanCurvature { norm });
    }
    let k = p.k();
    let mut orth = Orthogonalizer::new(DMatrix::identity(k, k));
    orth.push(hv / norm);
    while orth.len() < k {
        let v = orth.best_candidate();
        orth.push(v);
    }
    Ok(p.rotate_normal(&orth.matrix()))
}
