use nalgebra::{DMatrix, DVector};
use pinchlab::algebra::{
    gauss_sectional, hypersurface_reaction, pinch_quantities, r1_r2, r2, reaction_terms,
    reaction_terms_b2, simons_z, traceless_split, CurvatureScalars, PinchParams,
};
use pinchlab::flow::{sphere_point_data, SphereModel};
use pinchlab::frames::{build_b1, random_orthogonal, random_point};
use pinchlab::{AmbientSpace, FrameTensor, PointData};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::FRAC_PI_4;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Unconstrained point: Haar frame, Gaussian symmetric `h^a` with a random trace part.
fn arbitrary_point(n: usize, k: usize, seed: u64) -> PointData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 2 * n;
    let m = d - k;
    let o = random_orthogonal(d, &mut rng);
    let h = (0..k)
        .map(|_| {
            let g = DMatrix::<f64>::from_fn(m, m, |_, _| rng.sample(StandardNormal));
            let shift: f64 = rng.sample::<f64, _>(StandardNormal) * 2.0;
            (&g + g.transpose()) * 0.5 + DMatrix::identity(m, m) * shift
        })
        .collect();
    PointData::new(
        AmbientSpace::cp(n),
        o.columns(0, m).into_owned(),
        o.columns(m, k).into_owned(),
        h,
    )
    .unwrap()
}

fn diagonal_point(n: usize, lambda: &[f64]) -> PointData {
    let d = 2 * n;
    let m = lambda.len();
    assert_eq!(m + 1, d);
    // Normal e_0, tangents e_1..e_{d-1}.
    let id = DMatrix::<f64>::identity(d, d);
    let h = DMatrix::from_diagonal(&DVector::from_column_slice(lambda));
    PointData::new(
        AmbientSpace::cp(n),
        id.columns(1, m).into_owned(),
        id.columns(0, 1).into_owned(),
        vec![h],
    )
    .unwrap()
}

fn mat(p: &PointData) -> Vec<Vec<Vec<f64>>> {
    p.h.iter()
        .map(|h| h.row_iter().map(|r| r.iter().copied().collect()).collect())
        .collect()
}

struct Brute {
    r1: f64,
    r2: f64,
    z: f64,
    i: f64,
    ii: f64,
    iii: f64,
}

/// Index sums exactly as written, with the curvature tensor in the stored frame.
fn brute(p: &PointData, a: f64) -> Brute {
    let (m, k) = (p.m(), p.k());
    let h = mat(p);
    let hv: Vec<f64> = (0..k).map(|al| (0..m).map(|i| h[al][i][i]).sum()).collect();
    let ft = FrameTensor::new(&p.space, &p.frame()).unwrap();
    let rb = |x: usize, y: usize, z: usize, w: usize| ft.r(x, y, z, w);
    let nu = |al: usize| m + al;

    let mut r1 = 0.0;
    for al in 0..k {
        for be in 0..k {
            let mut dot = 0.0;
            for i in 0..m {
                for j in 0..m {
                    dot += h[al][i][j] * h[be][i][j];
                    let mut comm = 0.0;
                    for q in 0..m {
                        comm += h[al][i][q] * h[be][q][j] - h[be][i][q] * h[al][q][j];
                    }
                    r1 += comm * comm;
                }
            }
            r1 += dot * dot;
        }
    }
    let mut r2 = 0.0;
    for i in 0..m {
        for j in 0..m {
            let s: f64 = (0..k).map(|al| hv[al] * h[al][i][j]).sum();
            r2 += s * s;
        }
    }
    let mut cubic = 0.0;
    for al in 0..k {
        for be in 0..k {
            for i in 0..m {
                for q in 0..m {
                    for j in 0..m {
                        cubic += hv[al] * h[al][i][q] * h[be][q][j] * h[be][i][j];
                    }
                }
            }
        }
    }

    let mut i_term = 0.0;
    for i in 0..m {
        for j in 0..m {
            for q in 0..m {
                for s in 0..m {
                    let hh: f64 = (0..k).map(|al| h[al][q][s] * h[al][i][j]).sum();
                    i_term += 4.0 * rb(i, q, j, s) * hh;
                }
            }
        }
    }
    for j in 0..m {
        for s in 0..m {
            for q in 0..m {
                let hh: f64 = (0..k)
                    .map(|al| (0..m).map(|i| h[al][q][i] * h[al][i][j]).sum::<f64>())
                    .sum();
                i_term -= 4.0 * rb(s, j, s, q) * hh;
            }
        }
    }
    let mut ii = 0.0;
    for s in 0..m {
        for al in 0..k {
            for be in 0..k {
                let dot: f64 = (0..m)
                    .map(|i| (0..m).map(|j| h[al][i][j] * h[be][i][j]).sum::<f64>())
                    .sum();
                ii += 2.0 * rb(s, nu(al), s, nu(be)) * (dot - a * hv[al] * hv[be]);
            }
        }
    }
    let mut iii = 0.0;
    for j in 0..m {
        for q in 0..m {
            for al in 0..k {
                for be in 0..k {
                    let hh: f64 = (0..m).map(|i| h[al][i][q] * h[be][i][j]).sum();
                    iii -= 8.0 * rb(j, q, nu(al), nu(be)) * hh;
                }
            }
        }
    }
    Brute {
        r1,
        r2,
        z: cubic - r1,
        i: i_term,
        ii,
        iii,
    }
}

#[test]
fn umbilic_values() {
    let p = diagonal_point(3, &[1.0; 5]);
    let s = traceless_split(&p);
    assert!(s.ao2.abs() < 1e-15);
    assert_eq!((s.a2, s.h2), (5.0, 25.0));
    let (r1, r2) = r1_r2(&p);
    assert!(close(r1, 25.0, 1e-14) && close(r2, 125.0, 1e-14));
    assert!(simons_z(&p).abs() < 1e-12);
    let rt = reaction_terms(&p, 0.25).unwrap();
    assert!(rt.i.abs() < 1e-12 && rt.iii.abs() < 1e-12);
    assert!(hypersurface_reaction(&p).unwrap().abs() < 1e-12);
    // Plane (e_2, e_4) is totally real: K̄ = 1, so K = 1 + 1.
    assert!(close(gauss_sectional(&p, 1, 3).unwrap(), 2.0, 1e-14));
}

#[test]
fn traceless_zero_mean_example() {
    let p = diagonal_point(3, &[1.0, -1.0, 0.0, 0.0, 0.0]);
    let s = traceless_split(&p);
    assert_eq!((s.ao2, s.h1o2, s.hminus2, s.h2), (2.0, 0.0, 2.0, 0.0));
    assert_eq!(r2(&p), 0.0);
}

#[test]
fn geodesic_sphere_quarter_pi() {
    let model = SphereModel::new(AmbientSpace::cp(3), FRAC_PI_4).unwrap();
    let p = sphere_point_data(&model).unwrap();
    let s = traceless_split(&p);
    assert!(close(s.h2, 16.0, 1e-14));
    assert!(close(s.a2, 4.0, 1e-14));
    assert!(close(s.ao2, 0.8, 1e-14));
    let params = PinchParams::new(&p.space, 5, 1, 0.0, 0.0).unwrap();
    assert!(close(pinch_quantities(&p, &params).q, -2.0, 1e-14));
    // -2 * 2 * sum over the four (lambda_1, lambda_2) pairs of 1 * K̄ = 1.
    let hyp = hypersurface_reaction(&p).unwrap();
    assert!(close(hyp, -16.0, 1e-13));
    assert!(hyp <= -4.0 * 5.0 * s.ao2 + 1e-12);
    assert!(close(gauss_sectional(&p, 0, 1).unwrap(), 1.0, 1e-13));
}

#[test]
fn z_of_three_eigenvalues() {
    let p = diagonal_point(2, &[1.0, 2.0, 2.0]);
    assert!(close(simons_z(&p), 4.0, 1e-13));
}

#[test]
fn gauss_sectional_rejects_bad_indices() {
    let p = diagonal_point(2, &[1.0, 2.0, 2.0]);
    assert!(gauss_sectional(&p, 0, 0).is_err());
    assert!(gauss_sectional(&p, 0, 3).is_err());
}

#[test]
fn hypersurface_reaction_needs_k_one() {
    let p = arbitrary_point(4, 2, 1);
    assert!(hypersurface_reaction(&p).is_err());
}

#[test]
fn pinch_params_tables() {
    let s = AmbientSpace::cp(3);
    let p = PinchParams::new(&s, 5, 1, 0.1, 0.0).unwrap();
    assert!(close(p.a, 1.0 / 4.1, 1e-15) && close(p.b, 1.8, 1e-15) && p.beta == 2.0);
    assert!(close(p.alpha, 2.0 / (4.1 * (2.0 + 8.0 - 0.2)), 1e-15));
    let s = AmbientSpace::cp(7);
    let p = PinchParams::new(&s, 12, 2, 0.0, 0.0).unwrap();
    assert!(close(p.b, 1.0 / 12.0, 1e-15) && close(p.alpha, 2.0 / 432.0, 1e-15));
    assert!(PinchParams::new(&s, 10, 4, 0.0, 0.0).is_err());
    assert!(PinchParams::new(&s, 12, 2, 1.0, 0.0).is_err());
}

#[test]
fn b1_split_and_r2_closed_form() {
    for seed in 0..20 {
        let p = arbitrary_point(7, 2, seed);
        let q = build_b1(&p).unwrap();
        let s = traceless_split(&q);
        let h = &q.h;
        let h1o2 = h[0].norm_squared() - h[0].trace().powi(2) / q.m() as f64;
        let hminus2: f64 = h[1..].iter().map(|x| x.norm_squared()).sum();
        assert!(close(s.ao2, h1o2 + hminus2, 1e-12));
        assert!(close(
            r2(&q),
            h1o2 * s.h2 + s.h2 * s.h2 / q.m() as f64,
            1e-12
        ));
        assert!(h[1..].iter().all(|x| x.trace().abs() < 1e-10));
    }
}

#[test]
fn index_sums_match_on_arbitrary_frames() {
    for (n, k, seed) in [
        (2, 1, 1),
        (3, 1, 2),
        (3, 2, 3),
        (4, 3, 4),
        (4, 2, 5),
        (5, 4, 6),
    ] {
        let p = arbitrary_point(n, k, seed);
        let a = 0.3;
        let b = brute(&p, a);
        let (r1, r2v) = r1_r2(&p);
        assert!(close(r1, b.r1, 1e-11), "R1 {r1} vs {}", b.r1);
        assert!(close(r2v, b.r2, 1e-11));
        assert!(close(simons_z(&p), b.z, 1e-11));
        let rt = reaction_terms(&p, a).unwrap();
        let tol = 1e-11 * (b.r1.sqrt() + 1.0);
        assert!((rt.i - b.i).abs() < tol, "I {} vs {}", rt.i, b.i);
        assert!((rt.ii - b.ii).abs() < tol, "II {} vs {}", rt.ii, b.ii);
        assert!((rt.iii - b.iii).abs() < tol, "III {} vs {}", rt.iii, b.iii);
        let rb2 = reaction_terms_b2(&p, a).unwrap();
        assert!((rb2.total() - rt.total()).abs() < tol);
        if k == 1 {
            assert!((hypersurface_reaction(&p).unwrap() - b.i).abs() < tol);
        }
    }
}

#[test]
fn pinched_points_meet_reaction_bounds() {
    for (m, k) in [(5, 1), (12, 2)] {
        for seed in 0..200 {
            let p = random_point(AmbientSpace::cp((m + k) / 2), m, k, seed, 1e-3).unwrap();
            let s = traceless_split(&p);
            let rt = reaction_terms(&p, 1.0 / (m as f64 - 1.0)).unwrap();
            let scale = 1e-9 * (1.0 + s.a2 + s.h2);
            assert!(rt.i <= -4.0 * m as f64 * s.ao2 + scale);
            assert!(rt.iii <= 8.0 * k as f64 * s.ao2 + scale);
            if k == 2 {
                assert!(rt.iii <= 16.0 * s.ao2 + scale);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scalars_are_frame_invariant(seed in any::<u64>(), k in 1usize..=3) {
        let p = arbitrary_point(4, k, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let o = random_orthogonal(p.m(), &mut rng);
        let u = random_orthogonal(k, &mut rng);
        let q = p.rotate_tangent(&o).rotate_normal(&u);
        let params = PinchParams::new(&p.space, p.m(), 1, 0.0, 0.0).unwrap();
        let s1 = CurvatureScalars::compute(&p, &params);
        let s2 = CurvatureScalars::compute(&q, &params);
        for (x, y) in [(s1.A2, s2.A2), (s1.H2, s2.H2), (s1.Ao2, s2.Ao2), (s1.R1, s2.R1), (s1.R2, s2.R2), (s1.Z, s2.Z)] {
            prop_assert!(close(x, y, 1e-10));
        }
        let (r1, r2v) = (reaction_terms(&p, 0.2).unwrap(), reaction_terms(&q, 0.2).unwrap());
        let tol = 1e-10 * (1.0 + s1.A2 + s1.H2);
        prop_assert!((r1.i - r2v.i).abs() < tol && (r1.ii - r2v.ii).abs() < tol && (r1.iii - r2v.iii).abs() < tol);
    }

    #[test]
    fn z_eigenvalue_formula(l in proptest::collection::vec(-3.0f64..3.0, 5)) {
        let p = diagonal_point(3, &l);
        let mut want = 0.0;
        for i in 0..5 { for j in i + 1..5 {
            want += l[i] * l[j] * (l[i] - l[j]).powi(2);
        }}
        prop_assert!((simons_z(&p) - want).abs() < 1e-10 * (1.0 + want.abs()));
    }

    #[test]
    fn traceless_norm_is_nonnegative(seed in any::<u64>(), k in 1usize..=4) {
        let s = traceless_split(&arbitrary_point(5, k, seed));
        prop_assert!(s.ao2 >= -1e-12 * s.a2);
        prop_assert!(close(s.ao2, s.a2 - s.h2 / (10 - k) as f64, 1e-13));
    }
}
