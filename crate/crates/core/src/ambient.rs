//! Tangent-space model of the projective spaces `CP^n(4c)` and `HP^n(4c)`.
//!
//! Vectors are coordinate vectors in a fixed orthonormal frame in which the
//! complex structure acts on consecutive coordinate pairs:
//! `J e_{2i} = e_{2i+1}`, `J e_{2i+1} = -e_{2i}` (0-based indices).
//! The metric is the Euclidean dot product in that frame.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type AmbientVector = DVector<f64>;

/// Default tolerance on Gram-matrix deviations for orthonormality preconditions.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    ComplexProjective,
    QuaternionicProjective,
}

impl SpaceKind {
    /// Real dimension of the division algebra.
    pub fn unit_dim(self) -> usize {
        match self {
            SpaceKind::ComplexProjective => 2,
            SpaceKind::QuaternionicProjective => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SpaceKind::ComplexProjective => "CP",
            SpaceKind::QuaternionicProjective => "HP",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmbientSpace {
    pub kind: SpaceKind,
    pub n: usize,
    pub c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmbientConstants {
    /// Ricci curvature in the unit normal direction of a hypersurface.
    pub rbar: f64,
    pub kmin: f64,
    pub kmax: f64,
}

impl AmbientSpace {
    pub fn new(kind: SpaceKind, n: usize, c: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "curvature scale c = {c} must be positive"
            )));
        }
        Ok(Self { kind, n, c })
    }

    /// `CP^n` with `c = 1`. Panics when `n == 0`.
    pub fn cp(n: usize) -> Self {
        Self::new(SpaceKind::ComplexProjective, n, 1.0).expect("n >= 1")
    }

    /// `HP^n` with `c = 1`. Panics when `n == 0`.
    pub fn hp(n: usize) -> Self {
        Self::new(SpaceKind::QuaternionicProjective, n, 1.0).expect("n >= 1")
    }

    pub fn with_c(self, c: f64) -> Result<Self> {
        Self::new(self.kind, self.n, c)
    }

    pub fn realdim(&self) -> usize {
        self.kind.unit_dim() * self.n
    }

    pub fn is_complex(&self) -> bool {
        self.kind == SpaceKind::ComplexProjective
    }

    pub fn einstein_constant(&self) -> f64 {
        match self.kind {
            SpaceKind::ComplexProjective => 2.0 * (self.n as f64 + 1.0) * self.c,
            SpaceKind::QuaternionicProjective => 4.0 * (self.n as f64 + 2.0) * self.c,
        }
    }

    /// Constants table: `rbar = Ric(nu, nu)` and the sectional bounds `[c, 4c]`.
    pub fn constants(&self) -> AmbientConstants {
        AmbientConstants {
            rbar: self.einstein_constant(),
            kmin: self.c,
            kmax: 4.0 * self.c,
        }
    }

    fn require_complex(&self, op: &str) -> Result<()> {
        if self.is_complex() {
            Ok(())
        } else {
            Err(Error::Unsupported(format!(
                "{op} is only available on CP^n"
            )))
        }
    }

    fn check_len(&self, v: &AmbientVector) -> Result<()> {
        if v.len() == self.realdim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.realdim(),
                got: v.len(),
            })
        }
    }

    pub fn apply_j(&self, v: &AmbientVector) -> Result<AmbientVector> {
        self.require_complex("apply_j")?;
        self.check_len(v)?;
        Ok(apply_j(v))
    }

    /// Fubini–Study curvature tensor `R(X, Y, Z, W)`, scaled by `c`.
    pub fn riemann(
        &self,
        x: &AmbientVector,
        y: &AmbientVector,
        z: &AmbientVector,
        w: &AmbientVector,
    ) -> Result<f64> {
        self.require_complex("riemann")?;
        for v in [x, y, z, w] {
            self.check_len(v)?;
        }
        let (jy, jz, jw) = (apply_j(y), apply_j(z), apply_j(w));
        Ok(self.c
            * (x.dot(z) * y.dot(w) - x.dot(w) * y.dot(z) + x.dot(&jz) * y.dot(&jw)
                - x.dot(&jw) * y.dot(&jz)
                + 2.0 * x.dot(&jy) * z.dot(&jw)))
    }

    pub fn sectional(&self, x: &AmbientVector, y: &AmbientVector) -> Result<f64> {
        self.sectional_with_tol(x, y, ORTHONORMAL_TOL)
    }

    pub fn sectional_with_tol(
        &self,
        x: &AmbientVector,
        y: &AmbientVector,
        tol: f64,
    ) -> Result<f64> {
        self.require_complex("sectional")?;
        self.check_len(x)?;
        self.check_len(y)?;
        let deviation = (x.dot(x) - 1.0)
            .abs()
            .max((y.dot(y) - 1.0).abs())
            .max(x.dot(y).abs());
        if deviation > tol {
            return Err(Error::NotOrthonormal {
                deviation,
                tolerance: tol,
            });
        }
        let s = x.dot(&apply_j(y));
        Ok(self.c * (1.0 + 3.0 * s * s))
    }

    /// Trace of `Y -> R(X, Y, X, Y)` over the coordinate basis; `X` must be unit.
    pub fn ricci(&self, x: &AmbientVector) -> Result<f64> {
        self.require_complex("ricci")?;
        self.check_len(x)?;
        let norm2 = x.dot(x);
        if norm2 == 0.0 {
            return Err(Error::InvalidArgument("ricci of the zero vector".into()));
        }
        if (norm2 - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal {
                deviation: (norm2 - 1.0).abs(),
                tolerance: ORTHONORMAL_TOL,
            });
        }
        let d = self.realdim();
        let mut total = 0.0;
        for i in 0..d {
            let e = AmbientVector::from_fn(d, |r, _| if r == i { 1.0 } else { 0.0 });
            total += self.riemann(x, &e, x, &e)?;
        }
        Ok(total)
    }

    /// Matrix of `J` in the coordinate frame.
    pub fn j_matrix(&self) -> Result<DMatrix<f64>> {
        self.require_complex("j_matrix")?;
        let d = self.realdim();
        let mut j = DMatrix::zeros(d, d);
        for i in 0..d / 2 {
            j[(2 * i + 1, 2 * i)] = 1.0;
            j[(2 * i, 2 * i + 1)] = -1.0;
        }
        Ok(j)
    }
}

/// Block action of `J` on a vector of even length.
pub fn apply_j(v: &AmbientVector) -> AmbientVector {
    let mut out = AmbientVector::zeros(v.len());
    for i in 0..v.len() / 2 {
        out[2 * i] = -v[2 * i + 1];
        out[2 * i + 1] = v[2 * i];
    }
    out
}

/// `J` applied to every column of `e`.
pub fn apply_j_columns(e: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(e.nrows(), e.ncols());
    for col in 0..e.ncols() {
        for i in 0..e.nrows() / 2 {
            out[(2 * i, col)] = -e[(2 * i + 1, col)];
            out[(2 * i + 1, col)] = e[(2 * i, col)];
        }
    }
    out
}

/// Curvature components in a fixed orthonormal frame `(e_1, ..., e_D)`.
///
/// Stores `Omega_ab = <e_a, J e_b>`; then
/// `R_abcd = c (d_ac d_bd - d_ad d_bc + O_ac O_bd - O_ad O_bc + 2 O_ab O_cd)`.
#[derive(Clone, Debug)]
pub struct FrameTensor {
    pub c: f64,
    pub omega: DMatrix<f64>,
}

impl FrameTensor {
    /// `frame` holds the frame vectors as columns; it need not span the whole space.
    pub fn new(space: &AmbientSpace, frame: &DMatrix<f64>) -> Result<Self> {
        space.require_complex("frame tensor")?;
        if frame.nrows() != space.realdim() {
            return Err(Error::DimensionMismatch {
                expected: space.realdim(),
                got: frame.nrows(),
            });
        }
        let omega = frame.transpose() * apply_j_columns(frame);
        Ok(Self { c: space.c, omega })
    }

    #[inline]
    pub fn r(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let o = &self.omega;
        let delta = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };
        self.c
            * (delta(a, c) * delta(b, d) - delta(a, d) * delta(b, c) + o[(a, c)] * o[(b, d)]
                - o[(a, d)] * o[(b, c)]
                + 2.0 * o[(a, b)] * o[(c, d)])
    }
}
