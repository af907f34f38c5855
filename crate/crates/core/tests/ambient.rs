use nalgebra::{DMatrix, DVector};
use pinchlab::frames::random_orthogonal;
use pinchlab::{AmbientSpace, Error, FrameTensor, SpaceKind};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn basis(d: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(d, |r, _| if r == i { 1.0 } else { 0.0 })
}

/// Fubini–Study tensor written out from the explicit complex structure matrix.
fn riemann_oracle(
    c: f64,
    j: &DMatrix<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    w: &DVector<f64>,
) -> f64 {
    let g = |a: &DVector<f64>, b: &DVector<f64>| a.dot(b);
    let (jy, jz, jw) = (j * y, j * z, j * w);
    c * (g(x, z) * g(y, w) - g(x, w) * g(y, z) + g(x, &jz) * g(y, &jw) - g(x, &jw) * g(y, &jz)
        + 2.0 * g(x, &jy) * g(z, &jw))
}

#[test]
fn constants_table() {
    let k = AmbientSpace::cp(3).constants();
    assert_eq!((k.rbar, k.kmin, k.kmax), (8.0, 1.0, 4.0));
    let k = AmbientSpace::hp(3).constants();
    assert_eq!((k.rbar, k.kmin, k.kmax), (20.0, 1.0, 4.0));
    let k = AmbientSpace::hp(2).with_c(0.25).unwrap().constants();
    assert_eq!((k.rbar, k.kmin, k.kmax), (4.0, 0.25, 1.0));
}

#[test]
fn rejects_bad_spaces() {
    assert!(AmbientSpace::new(SpaceKind::ComplexProjective, 0, 1.0).is_err());
    assert!(AmbientSpace::new(SpaceKind::ComplexProjective, 3, 0.0).is_err());
    assert!(AmbientSpace::new(SpaceKind::ComplexProjective, 3, f64::NAN).is_err());
    let hp = AmbientSpace::hp(2);
    let e = basis(8, 0);
    assert!(matches!(
        hp.sectional(&e, &basis(8, 1)),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn sectional_requires_orthonormal_pair() {
    let s = AmbientSpace::cp(2);
    let x = basis(4, 0);
    let y = (basis(4, 0) + basis(4, 1)).normalize();
    assert!(matches!(
        s.sectional(&x, &y),
        Err(Error::NotOrthonormal { .. })
    ));
    assert!(matches!(
        s.sectional(&x, &basis(3, 1)),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn j_is_a_complex_structure() {
    for n in 1..6 {
        let j = AmbientSpace::cp(n).j_matrix().unwrap();
        let d = 2 * n;
        assert_eq!(&j * &j, -DMatrix::identity(d, d));
        assert_eq!(j.transpose() * &j, DMatrix::identity(d, d));
        assert_eq!(&j * basis(d, 0), basis(d, 1));
    }
}

#[test]
fn extreme_sectional_witnesses() {
    for n in 2..=10 {
        let s = AmbientSpace::cp(n);
        let d = 2 * n;
        assert!((s.sectional(&basis(d, 0), &basis(d, 1)).unwrap() - 4.0).abs() < 1e-15);
        assert!((s.sectional(&basis(d, 0), &basis(d, 2)).unwrap() - 1.0).abs() < 1e-15);
    }
}

#[test]
fn einstein_constant_by_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 2..=10 {
        let s = AmbientSpace::cp(n);
        let o = random_orthogonal(2 * n, &mut rng);
        let x = o.column(0).into_owned();
        assert!((s.ricci(&x).unwrap() - 2.0 * (n as f64 + 1.0)).abs() < 1e-12);
    }
}

#[test]
fn frame_tensor_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s = AmbientSpace::cp(3).with_c(0.7).unwrap();
    let o = random_orthogonal(6, &mut rng);
    let ft = FrameTensor::new(&s, &o).unwrap();
    let j = s.j_matrix().unwrap();
    for a in 0..6 {
        for b in 0..6 {
            for c in 0..6 {
                for d in 0..6 {
                    let cols: Vec<DVector<f64>> = [a, b, c, d]
                        .iter()
                        .map(|&i| o.column(i).into_owned())
                        .collect();
                    let want = riemann_oracle(0.7, &j, &cols[0], &cols[1], &cols[2], &cols[3]);
                    assert!((ft.r(a, b, c, d) - want).abs() < 1e-13);
                    let direct = s.riemann(&cols[0], &cols[1], &cols[2], &cols[3]).unwrap();
                    assert!((direct - want).abs() < 1e-13);
                }
            }
        }
    }
}

#[test]
fn curvature_scales_linearly_in_c() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let o = random_orthogonal(8, &mut rng);
    let (x, y) = (o.column(0).into_owned(), o.column(1).into_owned());
    let k1 = AmbientSpace::cp(4).sectional(&x, &y).unwrap();
    let k4 = AmbientSpace::cp(4)
        .with_c(4.0)
        .unwrap()
        .sectional(&x, &y)
        .unwrap();
    assert!((k4 - 4.0 * k1).abs() < 1e-13);
}

fn unit_pair(n: usize, seed: u64) -> (AmbientSpace, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (AmbientSpace::cp(n), random_orthogonal(2 * n, &mut rng))
}

proptest! {
    #[test]
    fn sectional_lies_between_one_and_four(n in 2usize..=10, seed in any::<u64>()) {
        let (s, o) = unit_pair(n, seed);
        let k = s.sectional(&o.column(0).into_owned(), &o.column(1).into_owned()).unwrap();
        prop_assert!((1.0 - 1e-12..=4.0 + 1e-12).contains(&k));
        // Sectional curvature is also R(X, Y, X, Y).
        let x = o.column(0).into_owned();
        let y = o.column(1).into_owned();
        prop_assert!((s.riemann(&x, &y, &x, &y).unwrap() - k).abs() < 1e-12);
    }

    #[test]
    fn riemann_symmetries_and_bianchi(n in 2usize..=6, seed in any::<u64>()) {
        let (s, o) = unit_pair(n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let v = random_orthogonal(2 * n, &mut rng) * 2.0 + o;
        let c = |i: usize| v.column(i).into_owned();
        let (x, y, z, w) = (c(0), c(1), c(2), c(3 % (2 * n)));
        let r = |a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>, d: &DVector<f64>| s.riemann(a, b, c, d).unwrap();
        let base = r(&x, &y, &z, &w);
        let tol = 1e-12 * 100.0;
        prop_assert!((base + r(&y, &x, &z, &w)).abs() < tol);
        prop_assert!((base + r(&x, &y, &w, &z)).abs() < tol);
        prop_assert!((base - r(&z, &w, &x, &y)).abs() < tol);
        prop_assert!((base + r(&y, &z, &x, &w) + r(&z, &x, &y, &w)).abs() < tol);
    }

    #[test]
    fn frame_tensor_symmetries(n in 2usize..=5, seed in any::<u64>()) {
        let (s, o) = unit_pair(n, seed);
        let ft = FrameTensor::new(&s, &o).unwrap();
        let d = 2 * n;
        for a in 0..d { for b in 0..d { for c in 0..d { for e in 0..d {
            let r = ft.r(a, b, c, e);
            prop_assert!((r + ft.r(b, a, c, e)).abs() < 1e-12);
            prop_assert!((r - ft.r(c, e, a, b)).abs() < 1e-12);
            prop_assert!((r + ft.r(b, c, a, e) + ft.r(c, a, b, e)).abs() < 1e-12);
        }}}}
    }
}
