use nalgebra::DMatrix;
use pinchlab::algebra::traceless_split;
use pinchlab::frames::{
    admissible, angle_point, b2_residuals, build_b1, build_b2, omega_norm2, pft_norms,
    random_point, random_unitary, PointSampler,
};
use pinchlab::{AmbientSpace, Error, PointData};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn admissibility_table() {
    assert_eq!(admissible(5, 1).unwrap(), 3);
    assert_eq!(admissible(12, 2).unwrap(), 7);
    assert_eq!(admissible(27, 3).unwrap(), 15);
    assert!(admissible(3, 1).is_err());
    assert!(admissible(6, 1).is_err());
    assert!(admissible(10, 4).is_err());
    match admissible(11, 3) {
        Err(Error::Inadmissible { reason, .. }) => {
            assert!(reason.contains("(2n - 3)/5"), "{reason}")
        }
        other => panic!("expected rejection, got {other:?}"),
    }
}

#[test]
fn unitary_commutes_with_j() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let u = random_unitary(4, &mut rng);
    let j = AmbientSpace::cp(4).j_matrix().unwrap();
    assert!((&u * &j - &j * &u).amax() < 1e-13);
    assert!((u.transpose() * &u - DMatrix::identity(8, 8)).amax() < 1e-13);
}

#[test]
fn samples_are_pinched_and_reproducible() {
    for (m, k) in [(5, 1), (13, 1), (12, 2), (16, 2), (27, 3)] {
        let space = AmbientSpace::cp((m + k) / 2);
        for seed in 0..50 {
            let p = random_point(space, m, k, seed, 1e-3).unwrap();
            assert_eq!(p, random_point(space, m, k, seed, 1e-3).unwrap());
            let s = traceless_split(&p);
            let mf = m as f64;
            let b = if k == 1 {
                2.0
            } else {
                (mf - 3.0 - 4.0 * k as f64) / mf
            };
            assert!(s.a2 <= (1.0 - 1e-3) * (s.h2 / (mf - 1.0) + b) * (1.0 + 1e-12));
        }
    }
}

#[test]
fn boundary_and_zero_mean_samples() {
    let space = AmbientSpace::cp(7);
    let base = PointSampler::base(space, 12, 2, 1e-3).unwrap();
    for seed in 0..20 {
        let p = base.clone().on_boundary(true).sample_seeded(seed).unwrap();
        let s = traceless_split(&p);
        let q = s.a2 - s.h2 / 11.0 - 1.0 / 12.0;
        assert!(q.abs() < 1e-12 * (1.0 + s.a2), "Q = {q}");
        let z = base.clone().zero_mean(true).sample_seeded(seed).unwrap();
        assert!(z.mean_curvature().norm() < 1e-12);
    }
}

#[test]
fn sampler_rejects_inadmissible_dims() {
    assert!(PointSampler::base(AmbientSpace::cp(7), 11, 3, 1e-3).is_err());
    assert!(PointSampler::base(AmbientSpace::cp(2), 3, 1, 1e-3).is_err());
}

#[test]
fn b1_puts_h_on_first_normal() {
    let p = random_point(AmbientSpace::cp(8), 14, 2, 9, 1e-3).unwrap();
    let q = build_b1(&p).unwrap();
    let hv = q.mean_curvature();
    assert!((hv[0] - p.mean_curvature().norm()).abs() < 1e-10);
    assert!(hv[1].abs() < 1e-10);
    assert!((q.mean_curvature_vector() - p.mean_curvature_vector()).amax() < 1e-10);
}

#[test]
fn point_record_round_trip() {
    let p = random_point(AmbientSpace::cp(7), 12, 2, 4, 1e-3).unwrap();
    let json = serde_json::to_string(&p.to_record()).unwrap();
    let q = PointData::from_record(&serde_json::from_str(&json).unwrap()).unwrap();
    assert_eq!(p, q);
}

#[test]
fn point_data_validation() {
    let s = AmbientSpace::cp(2);
    let id = DMatrix::<f64>::identity(4, 4);
    let t = id.columns(0, 3).into_owned();
    let n = id.columns(3, 1).into_owned();
    let mut h = DMatrix::<f64>::zeros(3, 3);
    h[(0, 1)] = 1.0;
    assert!(matches!(
        PointData::new(s, t.clone(), n.clone(), vec![h]),
        Err(Error::NotSymmetric { .. })
    ));
    let mut bent = t.clone();
    bent[(3, 0)] = 0.1;
    assert!(matches!(
        PointData::new(s, bent, n.clone(), vec![DMatrix::zeros(3, 3)]),
        Err(Error::NotOrthonormal { .. })
    ));
    assert!(PointData::new(s, t, n, vec![]).is_err());
}

/// `(p2, t2, omega2)` expected from prescribed Kähler angles in codimension `k`.
fn angle_oracle(m: usize, k: usize, taus: &[f64]) -> (f64, f64, f64) {
    let s: f64 = taus.iter().map(|t| t * t).sum();
    let om: f64 = 18.0 * taus.iter().map(|t| t * t * (1.0 - t * t)).sum::<f64>();
    let mf = m as f64;
    if k % 2 == 0 {
        (mf - 2.0 * s, 2.0 * s, om)
    } else {
        (mf - 1.0 - 2.0 * s, 1.0 + 2.0 * s, om)
    }
}

#[test]
fn prescribed_angles_extreme_values() {
    let space = AmbientSpace::cp(8);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for taus in [
        vec![0.0, 0.0],
        vec![1.0, 1.0],
        vec![1e-7, 0.5],
        vec![1e-9, 1.0 - 1e-12],
    ] {
        let p = angle_point(space, 12, 4, &taus, &mut rng).unwrap();
        let (q, ang) = build_b2(&p).unwrap();
        assert!(
            b2_residuals(&q, &ang).max() < 1e-10,
            "{taus:?}: {:?}",
            b2_residuals(&q, &ang)
        );
        assert!(ang.unit_defect() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn b2_relations_and_recovered_angles(
        seed in any::<u64>(),
        (k, taus) in (2usize..=5).prop_flat_map(|k| (Just(k), proptest::collection::vec(0.0f64..=1.0, k / 2))),
    ) {
        let n = 8;
        let m = 2 * n - k;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = angle_point(AmbientSpace::cp(n), m, k, &taus, &mut rng).unwrap();
        let (q, ang) = build_b2(&p).unwrap();
        prop_assert!(b2_residuals(&q, &ang).max() < 1e-10);
        prop_assert!(ang.unit_defect() < 1e-12);
        prop_assert!(ang.in_range());
        let mut want = taus.clone();
        want.sort_by(f64::total_cmp);
        let mut got: Vec<f64> = ang.pairs.iter().map(|x| x.0).collect();
        got.sort_by(f64::total_cmp);
        for (a, b) in want.iter().zip(&got) {
            // tau is recovered as a norm, so accuracy near 0 is absolute.
            prop_assert!((a - b).abs() < 1e-9, "{want:?} vs {got:?}");
        }

        let (p2, t2, om) = angle_oracle(m, k, &taus);
        let pf = pft_norms(&p).unwrap();
        prop_assert!((pf.p2 - p2).abs() < 1e-10 * m as f64);
        prop_assert!((pf.t2 - t2).abs() < 1e-10 * m as f64);
        let o = omega_norm2(&p).unwrap();
        prop_assert!((o.direct - om).abs() < 1e-10 * om.max(1.0));
        prop_assert!((o.direct - o.closed_form).abs() < 1e-10 * om.max(1.0));
        prop_assert!((pf.fp2 - om / 9.0).abs() < 1e-10 * om.max(1.0));
    }

    #[test]
    fn b2_preserves_norms(seed in any::<u64>(), mk in prop::sample::select(vec![(5usize, 1usize), (12, 2), (16, 2), (27, 3)])) {
        let (m, k) = mk;
        let p = random_point(AmbientSpace::cp((m + k) / 2), m, k, seed, 1e-3).unwrap();
        let (q, ang) = build_b2(&p).unwrap();
        prop_assert!(b2_residuals(&q, &ang).max() < 1e-10);
        let (a, b) = (traceless_split(&p), traceless_split(&q));
        prop_assert!((a.a2 - b.a2).abs() < 1e-11 * (1.0 + a.a2));
        prop_assert!((a.h2 - b.h2).abs() < 1e-11 * (1.0 + a.h2));
    }
}
