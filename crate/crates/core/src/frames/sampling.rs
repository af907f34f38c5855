//! Seeded generators of pinched point data.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{build_b2, mix, Orthogonalizer, PointData};
use crate::ambient::{apply_j, AmbientSpace};
use crate::error::{Error, Result};

/// Checks the dimension hypotheses `n >= 3, k = 1` or `n >= 7, 2 <= k < (2n - 3)/5`
/// with `m + k = 2n`, returning `n`.
pub fn admissible(m: usize, k: usize) -> Result<usize> {
    let fail = |reason: String| Err(Error::Inadmissible { m, k, reason });
    if k == 0 || m == 0 {
        return fail("m and k must be positive".into());
    }
    if (m + k) % 2 != 0 {
        return fail(format!("m + k = {} is odd, so it is not 2n", m + k));
    }
    let n = (m + k) / 2;
    if k == 1 {
        if n >= 3 {
            return Ok(n);
        }
        return fail(format!("hypersurfaces need n >= 3, got n = {n}"));
    }
    if n < 7 {
        return fail(format!("codimension {k} needs n >= 7, got n = {n}"));
    }
    if 5 * k + 3 >= 2 * n {
        return fail(format!(
            "k < (2n - 3)/5 fails for n = {n}: bound is {:.4}",
            (2.0 * n as f64 - 3.0) / 5.0
        ));
    }
    Ok(n)
}

fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
pub fn random_orthogonal<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let qr = gaussian_matrix(d, d, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Haar unitary of `U(n)` as a real `2n x 2n` matrix commuting with `J`.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let z = DMatrix::from_fn(n, n, |_, _| {
        Complex::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
    });
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let norm = d.norm();
        if norm > 0.0 {
            let phase = d / Complex::new(norm, 0.0);
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
    }
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (q[(i, j)].re, q[(i, j)].im);
            out[(2 * i, 2 * j)] = a;
            out[(2 * i, 2 * j + 1)] = -b;
            out[(2 * i + 1, 2 * j)] = b;
            out[(2 * i + 1, 2 * j + 1)] = a;
        }
    }
    out
}

fn sym_traceless_gaussian<R: Rng>(m: usize, rng: &mut R) -> DMatrix<f64> {
    let g = gaussian_matrix(m, m, rng);
    let mut s = (&g + g.transpose()) * 0.5;
    let tr = s.trace() / m as f64;
    for i in 0..m {
        s[(i, i)] -= tr;
    }
    s
}

fn diag_traceless(d: &[f64]) -> DMatrix<f64> {
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    DMatrix::from_diagonal(&DVector::from_iterator(d.len(), d.iter().map(|x| x - mean)))
}

/// Families of traceless second fundamental forms mixed by the sampler.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HShape {
    /// Independent Gaussian symmetric matrices with log-normal weights.
    Gaussian,
    /// Two distinct eigenvalues per normal direction in a random basis.
    TwoEigen,
    /// Few nonzero entries.
    Sparse,
    /// `diag(1, -1, 0, ...)` and the matching off-diagonal matrix in two normal directions.
    OffDiagonalPair,
    /// `v v^T` minus its trace part.
    RankOne,
    /// Diagonal in a B2 frame, constant on the first `k` tangent vectors.
    Adapted,
}

impl HShape {
    pub const ALL: [HShape; 6] = [
        HShape::Gaussian,
        HShape::TwoEigen,
        HShape::Sparse,
        HShape::OffDiagonalPair,
        HShape::RankOne,
        HShape::Adapted,
    ];
}

/// Generator of point data satisfying `|A|^2 <= (1 - margin)(a |H|^2 + b)`,
/// or `|A|^2 = a |H|^2 + b` exactly when `on_boundary` is set.
#[derive(Clone, Debug)]
pub struct PointSampler {
    pub space: AmbientSpace,
    pub m: usize,
    pub k: usize,
    pub a: f64,
    pub b: f64,
    pub margin: f64,
    pub zero_mean: bool,
    pub on_boundary: bool,
    /// Restricts sampling to one family; `None` mixes all of them.
    pub shape: Option<HShape>,
}

impl PointSampler {
    /// Sampler with the unperturbed constants `a_0 = 1/(m-1)` and
    /// `b_0 = 2c` (k = 1) or `(m - 3 - 4k) c / m` (k >= 2).
    pub fn base(space: AmbientSpace, m: usize, k: usize, margin: f64) -> Result<Self> {
        admissible(m, k)?;
        let mf = m as f64;
        let b = if k == 1 {
            2.0 * space.c
        } else {
            (mf - 3.0 - 4.0 * k as f64) * space.c / mf
        };
        Self::new(space, m, k, 1.0 / (mf - 1.0), b, margin)
    }

    pub fn new(
        space: AmbientSpace,
        m: usize,
        k: usize,
        a: f64,
        b: f64,
        margin: f64,
    ) -> Result<Self> {
        if m + k != space.realdim() {
            return Err(Error::DimensionMismatch {
                expected: space.realdim(),
                got: m + k,
            });
        }
        if !(margin > 0.0 && margin <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "margin {margin} outside (0, 1]"
            )));
        }
        Ok(Self {
            space,
            m,
            k,
            a,
            b,
            margin,
            zero_mean: false,
            on_boundary: false,
            shape: None,
        })
    }

    pub fn zero_mean(mut self, yes: bool) -> Self {
        self.zero_mean = yes;
        self
    }

    pub fn on_boundary(mut self, yes: bool) -> Self {
        self.on_boundary = yes;
        self
    }

    pub fn with_shape(mut self, shape: Option<HShape>) -> Self {
        self.shape = shape;
        self
    }

    /// Draws `(|H|^2, |Å|^2)` meeting the constraint.
    fn norms<R: Rng>(&self, rng: &mut R) -> Result<(f64, f64)> {
        let mf = self.m as f64;
        let keep = if self.on_boundary {
            1.0
        } else {
            1.0 - self.margin
        };
        let slope = keep * self.a - 1.0 / mf;
        let offset = keep * self.b;
        let h2 = if self.zero_mean {
            0.0
        } else if slope >= 0.0 {
            let scale = mf * self.b.abs().max(self.space.c);
            let base = if offset < 0.0 { -offset / slope } else { 0.0 };
            base + scale * 10f64.powf(rng.gen_range(-3.0..3.0))
        } else if offset > 0.0 {
            let hmax = offset / -slope;
            hmax * 10f64.powf(rng.gen_range(-4.0..0.0))
        } else {
            return Err(Error::Infeasible(format!(
                "no |H|^2 satisfies the pinching with a = {}, b = {}, margin = {}",
                self.a, self.b, self.margin
            )));
        };
        let cap = slope * h2 + offset;
        if cap <= 0.0 || !cap.is_finite() {
            return Err(Error::Infeasible(format!(
                "traceless budget {cap:.3e} is not positive at |H|^2 = {h2:.3e} (a = {}, b = {}, margin = {})",
                self.a, self.b, self.margin
            )));
        }
        let ao2 = if self.on_boundary {
            cap
        } else if rng.gen_bool(0.5) {
            cap
        } else {
            cap * rng.gen_range(0.0..1.0f64).max(1e-6)
        };
        Ok((h2, ao2))
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<PointData> {
        let (m, k, d) = (self.m, self.k, self.space.realdim());
        let (h2, ao2) = self.norms(rng)?;
        let shape = match self.shape {
            Some(s) => s,
            None => HShape::ALL[rng.gen_range(0..HShape::ALL.len())],
        };
        let shape = match shape {
            HShape::OffDiagonalPair if k < 2 || m < 2 => HShape::Gaussian,
            HShape::Adapted if !self.space.is_complex() => HShape::TwoEigen,
            s => s,
        };

        let o = random_orthogonal(d, rng);
        let mut tangent = o.columns(0, m).into_owned();
        let mut normal = o.columns(m, k).into_owned();

        let mut g: Vec<DMatrix<f64>> = match shape {
            HShape::Gaussian => (0..k)
                .map(|_| {
                    sym_traceless_gaussian(m, rng) * rng.sample::<f64, _>(StandardNormal).exp()
                })
                .collect(),
            HShape::TwoEigen => {
                let shared = rng.gen_bool(0.5);
                let mut basis = random_orthogonal(m, rng);
                (0..k)
                    .map(|_| {
                        if !shared {
                            basis = random_orthogonal(m, rng);
                        }
                        let p = rng.gen_range(1..m);
                        let w: f64 = rng.sample(StandardNormal);
                        let dg: Vec<f64> = (0..m).map(|i| if i < p { w } else { 0.0 }).collect();
                        &basis * diag_traceless(&dg) * basis.transpose()
                    })
                    .collect()
            }
            HShape::Sparse => (0..k)
                .map(|_| {
                    let mut s = DMatrix::zeros(m, m);
                    for _ in 0..rng.gen_range(1..=3) {
                        let (i, j) = (rng.gen_range(0..m), rng.gen_range(0..m));
                        let w: f64 = rng.sample(StandardNormal);
                        s[(i, j)] += w;
                        if i != j {
                            s[(j, i)] += w;
                        }
                    }
                    let tr = s.trace() / m as f64;
                    for i in 0..m {
                        s[(i, i)] -= tr;
                    }
                    s
                })
                .collect(),
            HShape::OffDiagonalPair => {
                let mut v = vec![DMatrix::zeros(m, m); k];
                v[0][(0, 0)] = 1.0;
                v[0][(1, 1)] = -1.0;
                v[1][(0, 1)] = 1.0;
                v[1][(1, 0)] = 1.0;
                let basis = random_orthogonal(m, rng);
                v.iter().map(|x| &basis * x * basis.transpose()).collect()
            }
            HShape::RankOne => (0..k)
                .map(|_| {
                    let v = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let mut s = &v * v.transpose();
                    let tr = s.trace() / m as f64;
                    for i in 0..m {
                        s[(i, i)] -= tr;
                    }
                    s
                })
                .collect(),
            HShape::Adapted => {
                let zero_h = vec![DMatrix::zeros(m, m); k];
                let p0 = PointData {
                    space: self.space,
                    tangent: tangent.clone(),
                    normal: normal.clone(),
                    h: zero_h,
                };
                let (q, _) = build_b2(&p0)?;
                tangent = q.tangent;
                normal = q.normal;
                (0..k)
                    .map(|_| {
                        let x: f64 = rng.sample(StandardNormal);
                        let y: f64 = if rng.gen_bool(0.5) {
                            0.0
                        } else {
                            rng.sample(StandardNormal)
                        };
                        let dg: Vec<f64> = (0..m).map(|i| if i < k { x } else { y }).collect();
                        diag_traceless(&dg)
                    })
                    .collect()
            }
        };

        // Traceless part aligned with H only, or orthogonal to it only, now and then.
        if k >= 2 && shape != HShape::OffDiagonalPair {
            match rng.gen_range(0..6) {
                0 => g.iter_mut().skip(1).for_each(|x| x.fill(0.0)),
                1 => g[0].fill(0.0),
                _ => {}
            }
        }
        let raw: f64 = g.iter().map(|x| x.norm_squared()).sum();
        let scale = if raw > 0.0 { (ao2 / raw).sqrt() } else { 0.0 };
        let hn = h2.sqrt();
        let mut h: Vec<DMatrix<f64>> = g.into_iter().map(|x| x * scale).collect();
        if raw == 0.0 && ao2 > 0.0 {
            let mut s = sym_traceless_gaussian(m, rng);
            s *= (ao2 / s.norm_squared()).sqrt();
            h[0] = s;
        }
        for i in 0..m {
            h[0][(i, i)] += hn / m as f64;
        }
        // Rotate the coefficient frame so H is not tied to the first normal.
        let u = if shape == HShape::Adapted {
            DMatrix::identity(k, k)
        } else {
            random_orthogonal(k, rng)
        };
        let h = mix(&h, &u.transpose());
        Ok(PointData {
            space: self.space,
            tangent,
            normal,
            h,
        })
    }

    pub fn sample_seeded(&self, seed: u64) -> Result<PointData> {
        self.sample(&mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Random pinched point with the unperturbed constants; deterministic in `seed`.
pub fn random_point(
    space: AmbientSpace,
    m: usize,
    k: usize,
    seed: u64,
    margin: f64,
) -> Result<PointData> {
    PointSampler::base(space, m, k, margin)?.sample_seeded(seed)
}

/// Point whose normal space has prescribed Kähler angles `taus` (one per
/// normal pair), randomly rotated by `U(n)` and in the tangent and normal
/// frames. The second fundamental form is Gaussian traceless plus a random
/// trace part.
pub fn angle_point<R: Rng>(
    space: AmbientSpace,
    m: usize,
    k: usize,
    taus: &[f64],
    rng: &mut R,
) -> Result<PointData> {
    if !space.is_complex() {
        return Err(Error::Unsupported("angle_point requires CP^n".into()));
    }
    let d = space.realdim();
    if m + k != d || k > m {
        return Err(Error::InvalidArgument(format!(
            "need m + k = {d} and k <= m, got ({m}, {k})"
        )));
    }
    if taus.len() != k / 2 || taus.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidArgument(format!(
            "need {} values of tau in [0, 1]",
            k / 2
        )));
    }
    let e = |i: usize| DVector::from_fn(d, |r, _| if r == i { 1.0 } else { 0.0 });
    let mut normals = Vec::with_capacity(k);
    for (r, &tau) in taus.iter().enumerate() {
        let nu = (1.0 - tau * tau).max(0.0).sqrt();
        let p = e(4 * r);
        let q = e(4 * r + 2);
        normals.push(p.clone());
        normals.push(apply_j(&p) * nu + q * tau);
    }
    if k % 2 == 1 {
        normals.push(e(4 * (k / 2)));
    }
    let mut orth = Orthogonalizer::new(DMatrix::identity(d, d));
    for n in &normals {
        orth.push_exact(n.clone());
    }
    while orth.len() < d {
        let v = orth.best_candidate();
        orth.push(v);
    }
    let frame = orth.matrix();
    let u = random_unitary(space.n, rng);
    let rotated = u * frame;
    let tangent = rotated.columns(k, m) * random_orthogonal(m, rng);
    let normal = rotated.columns(0, k) * random_orthogonal(k, rng);
    let h = (0..k)
        .map(|_| {
            let mut s = sym_traceless_gaussian(m, rng);
            let t: f64 = rng.sample(StandardNormal);
            for i in 0..m {
                s[(i, i)] += t;
            }
            s
        })
        .collect();
    Ok(PointData {
        space,
        tangent,
        normal,
        h,
    })
}
