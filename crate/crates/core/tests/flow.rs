use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use pinchlab::algebra::{pinch_quantities, traceless_split, PinchParams};
use pinchlab::flow::ode::{adaptive_step, dp45_step, integrate_to, Tolerances};
use pinchlab::flow::{
    evolution_check, focal_radius, integrate, invariance_run, minimal_radius, minimal_sphere_check,
    nonconvex_witness, pinch_q_generic, pinch_range, pinch_range_generic, pinch_test_closed_form,
    pinched_grid, pinching_invariance_run, read_trajectory_csv, sphere_point_data, SphereModel,
    StepPolicy, Termination,
};
use pinchlab::AmbientSpace;
use proptest::prelude::*;

fn sphere(space: AmbientSpace, u: f64) -> SphereModel {
    SphereModel::new(space, u).unwrap()
}

/// `u_b` on `CP^n` from `tan^2 u_b = 1 + 2 sqrt((n-1)/(2n-3))`.
fn boundary_oracle(n: usize) -> f64 {
    let n = n as f64;
    (1.0 + 2.0 * ((n - 1.0) / (2.0 * n - 3.0)).sqrt())
        .sqrt()
        .atan()
}

#[test]
fn cp3_quarter_sphere() {
    let m = sphere(AmbientSpace::cp(3), FRAC_PI_4);
    let s = m.scalars();
    assert!(s.lambda1.abs() < 1e-15);
    assert!((s.lambda2 - 1.0).abs() < 1e-15);
    assert!((s.h - 4.0).abs() < 1e-14 && (s.a2 - 4.0).abs() < 1e-14);
    assert!((s.ao2 - 0.8).abs() < 1e-14);
    let p = sphere_point_data(&m).unwrap();
    let split = traceless_split(&p);
    assert!(
        (split.h2 - 16.0).abs() < 1e-13
            && (split.a2 - 4.0).abs() < 1e-13
            && (split.ao2 - 0.8).abs() < 1e-13
    );
    let pq = pinch_quantities(&p, &PinchParams::for_point(&p, 0.0, 0.0).unwrap());
    assert!((pq.q + 2.0).abs() < 1e-13);
    assert!((pinch_test_closed_form(&m, 0.0).unwrap() + 4.0).abs() < 1e-14);
}

#[test]
fn sphere_frame_is_hopf_adapted() {
    let m = sphere(AmbientSpace::cp(4), 0.7);
    let p = sphere_point_data(&m).unwrap();
    let j = AmbientSpace::cp(4).j_matrix().unwrap();
    // e_1 = J nu, so J e_1 = -nu.
    let je1 = &j * p.tangent.column(0);
    assert!((je1 + p.normal.column(0)).amax() < 1e-15);
    let (l1, l2) = m.principal_curvatures();
    assert_eq!(p.h[0][(0, 0)], l1);
    assert!((1..p.m()).all(|i| p.h[0][(i, i)] == l2));
}

#[test]
fn hp2_quarter_sphere() {
    let m = sphere(AmbientSpace::hp(2), FRAC_PI_4);
    assert_eq!(m.multiplicities(), (3, 4));
    assert!((m.scalars().h - 4.0).abs() < 1e-14);
    assert!((pinch_test_closed_form(&m, 0.0).unwrap() + 1.0).abs() < 1e-14);
    assert!(sphere_point_data(&m).is_err());
}

#[test]
fn small_radius_is_nearly_umbilic() {
    let (l1, l2) = sphere(AmbientSpace::cp(3), 0.01).principal_curvatures();
    let ratio = l1 / l2;
    assert!(ratio < 1.0 && (ratio - 0.9999).abs() < 2e-4, "{ratio}");
    // Leading order (1.5 - 4)/u^2 for n = 3.
    let u = 1e-4;
    let v = pinch_test_closed_form(&sphere(AmbientSpace::cp(3), u), 0.0).unwrap();
    assert!((v * u * u + 2.5).abs() < 1e-6, "{}", v * u * u);
}

#[test]
fn radius_validation() {
    let s = AmbientSpace::cp(3);
    for u in [0.0, -0.1, FRAC_PI_2, 2.0, f64::NAN] {
        assert!(SphereModel::new(s, u).is_err(), "{u}");
    }
    assert!(SphereModel::new(AmbientSpace::cp(1), 0.5).is_err());
    assert!(pinch_range(&AmbientSpace::cp(2), 0.0).is_err());
    assert!(pinch_range(&s, 1.0).is_err());
}

#[test]
fn cp_pinch_boundary_two_routes() {
    for n in 3..=10 {
        let s = AmbientSpace::cp(n);
        let r = pinch_range(&s, 0.0).unwrap();
        assert_eq!(r.intervals.len(), 1, "n = {n}: {:?}", r.intervals);
        assert_eq!(r.intervals[0].0, 0.0);
        let ub = r.first_boundary().unwrap();
        assert!(
            (ub - boundary_oracle(n)).abs() < 1e-10,
            "n = {n}: {ub} vs {}",
            boundary_oracle(n)
        );
        let generic = pinch_range_generic(&s, 0.0).unwrap();
        assert_eq!(generic.len(), 1);
        assert!((generic[0].1 - ub).abs() < 1e-8);
    }
    let ub = pinch_range(&AmbientSpace::cp(3), 0.0)
        .unwrap()
        .first_boundary()
        .unwrap();
    assert!((ub - 1.0185).abs() < 1e-4);
}

#[test]
fn eps_shrinks_the_range() {
    let s = AmbientSpace::cp(3);
    let b0 = pinch_range(&s, 0.0).unwrap().first_boundary().unwrap();
    let b1 = pinch_range(&s, 0.1).unwrap().first_boundary().unwrap();
    assert!(b1 < b0);
    let g = pinch_range_generic(&s, 0.1).unwrap();
    assert!((g[0].1 - b1).abs() < 1e-8);
}

#[test]
fn sign_routes_agree_on_a_thousand_radii() {
    for space in [
        AmbientSpace::cp(3),
        AmbientSpace::cp(4),
        AmbientSpace::cp(7),
    ] {
        let uf = focal_radius(&space);
        for eps in [0.0, 0.1] {
            let mut checked = 0;
            for i in 0..1000 {
                let u = uf * (i as f64 + 0.5) / 1000.0;
                let m = sphere(space, u);
                let a = pinch_test_closed_form(&m, eps).unwrap();
                let b = pinch_q_generic(&m, eps).unwrap();
                // Skip radii within rounding of the boundary.
                if a.abs() > 1e-9 * (1.0 + m.scalars().a2) {
                    assert_eq!(a < 0.0, b < 0.0, "n = {} u = {u}: {a} vs {b}", space.n);
                    checked += 1;
                }
            }
            assert!(checked >= 998);
        }
    }
}

#[test]
fn minimal_radius_closed_forms() {
    let s = AmbientSpace::cp(3);
    let u = minimal_radius(&s).unwrap();
    assert!((u - 5f64.sqrt().atan()).abs() < 1e-13);
    assert!((u - 1.1503).abs() < 1e-4);
    let r = minimal_sphere_check(&s).unwrap();
    assert!(r.pass && r.a2_bound_holds && r.outside_pinch_range);
    // cot^2 u* = 1/5: lambda2^2 = 1/5, lambda1 = -4 lambda2.
    let l2 = (0.2f64).sqrt();
    assert!((r.a2 - (16.0 * l2 * l2 + 4.0 * l2 * l2)).abs() < 1e-12);
    assert!(r.h_at_u_star.abs() < 1e-12);

    // HP^3: 6 cot 2u + 8 cot u = 0 gives tan^2 u* = 11/3.
    let h = minimal_sphere_check(&AmbientSpace::hp(3)).unwrap();
    assert!((h.u_star - (11.0f64 / 3.0).sqrt().atan()).abs() < 1e-13);
    assert!(h.pass && h.a2 >= 2.0);
}

#[test]
fn curvature_scaling() {
    for c in [0.25, 4.0] {
        let s = AmbientSpace::cp(3).with_c(c).unwrap();
        let s1 = AmbientSpace::cp(3);
        let k = c.sqrt();
        let r = minimal_sphere_check(&s).unwrap();
        let r1 = minimal_sphere_check(&s1).unwrap();
        assert!((r.u_star - r1.u_star / k).abs() < 1e-12);
        assert!((r.a2 - c * r1.a2).abs() < 1e-10 * r.a2);
        assert!(r.a2 >= 2.0 * c && r.pass);
        let b = pinch_range(&s, 0.0).unwrap().first_boundary().unwrap();
        assert!((b - boundary_oracle(3) / k).abs() < 1e-10);
        let u = 0.6 / k;
        let (m, m1) = (sphere(s, u), sphere(s1, 0.6));
        assert!((m.scalars().a2 - c * m1.scalars().a2).abs() < 1e-12 * m.scalars().a2);
        assert!(
            (pinch_test_closed_form(&m, 0.0).unwrap()
                - c * pinch_test_closed_form(&m1, 0.0).unwrap())
            .abs()
                < 1e-12
        );
        // Evolution residuals scale with c^2.
        let e = evolution_check(&s, FRAC_PI_4 / k, 1e-3 / c).unwrap();
        let a2 = e.quantity("A2").unwrap();
        assert!((a2.extrapolated - a2.rhs + 16.0 * c * c).abs() < 1e-5 * c * c);
    }
}

#[test]
fn cp3_flow_from_quarter_sphere() {
    let traj = integrate(
        &sphere(AmbientSpace::cp(3), FRAC_PI_4),
        0.0,
        &StepPolicy::default(),
    )
    .unwrap();
    assert_eq!(traj.termination, Termination::Extinct);
    assert!(traj.monotonicity_defects().is_empty());
    assert!(traj
        .samples
        .windows(2)
        .all(|w| w[1].u < w[0].u && w[1].t > w[0].t));
    assert!((traj.last().u - 1e-6).abs() < 1e-12);
    assert!(traj.volume_ratio_error() < 1e-8 && traj.log_volume_error() < 1e-8);
    // V = sin^{2n-2} u sin 2u directly.
    let v = |u: f64| u.sin().powi(4) * (2.0 * u).sin();
    for s in &traj.samples {
        assert!((s.vol_ratio - v(s.u) / v(FRAC_PI_4)).abs() < 1e-12);
        let m = sphere(AmbientSpace::cp(3), s.u);
        let sc = m.scalars();
        assert!((sc.lambda1 - (sc.lambda2 - s.u.tan())).abs() < 1e-12 * sc.lambda2.abs().max(1.0));
    }
    let run = invariance_run(&AmbientSpace::cp(3), FRAC_PI_4, 0.0, &StepPolicy::default()).unwrap();
    assert!(run.pass, "{run:?}");
    let t = run.extinction_time_extrapolated.unwrap();
    assert!(t < 10.0 * FRAC_PI_4 / 4.0);
    // Comparison supersolution at x0 = pi/4.
    assert!(t <= -(FRAC_PI_4.cos().ln()) / 4.0);
}

#[test]
fn hundred_pinched_starts() {
    let s = AmbientSpace::cp(3);
    let grid = pinched_grid(&pinch_range(&s, 0.0).unwrap(), 100).unwrap();
    let rep = pinching_invariance_run(&s, &grid, 0.0, &StepPolicy::default(), 2).unwrap();
    assert!(rep.pass);
    for r in &rep.runs {
        assert_eq!(r.termination, Termination::Extinct);
        assert!(r.q_max < 0.0 && r.final_roundness < 1e-6 && r.bounds_hold);
    }
    assert!(rep.runs.windows(2).all(|w| w[0].u0 < w[1].u0));
    // Starts outside the pinched interval are rejected.
    assert!(pinching_invariance_run(&s, &[1.1], 0.0, &StepPolicy::default(), 1).is_err());
}

#[test]
fn stationary_and_expanding_runs() {
    let s = AmbientSpace::cp(3);
    let ustar = minimal_radius(&s).unwrap();
    let t = integrate(&sphere(s, ustar), 0.0, &StepPolicy::default()).unwrap();
    assert!(t.stationary && t.termination == Termination::Stationary);
    assert!(t.samples.iter().all(|x| x.u == ustar));
    // Above u* the sphere expands toward the cut locus.
    let e = integrate(&sphere(s, 1.3), 0.0, &StepPolicy::default()).unwrap();
    assert_eq!(e.termination, Termination::Focal);
    assert!(e.monotonicity_defects().is_empty());
}

#[test]
fn unpinched_start_still_extinct() {
    // Documentation run just above u_b; no pinching claim.
    let s = AmbientSpace::cp(3);
    let ub = pinch_range(&s, 0.0).unwrap().first_boundary().unwrap();
    let run = invariance_run(&s, ub + 0.05, 0.0, &StepPolicy::default()).unwrap();
    assert_eq!(run.termination, Termination::Extinct);
    assert!(!run.pinched_throughout);
}

#[test]
fn step_policy_validation() {
    let m = sphere(AmbientSpace::cp(3), 0.5);
    for bad in [
        StepPolicy {
            rtol: 0.0,
            ..Default::default()
        },
        StepPolicy {
            u_stop: -1.0,
            ..Default::default()
        },
        StepPolicy {
            max_steps: 0,
            ..Default::default()
        },
    ] {
        assert!(integrate(&m, 0.0, &bad).is_err());
    }
    let short = StepPolicy {
        t_max: 1e-3,
        ..Default::default()
    };
    assert_eq!(
        integrate(&m, 0.0, &short).unwrap().termination,
        Termination::MaxTime
    );
    let tiny = StepPolicy {
        max_steps: 3,
        ..Default::default()
    };
    assert!(integrate(&m, 0.0, &tiny).is_err());
}

#[test]
fn evolution_laws_along_cp_flows() {
    for n in 3..=6 {
        for u in [0.3, FRAC_PI_4, 1.0, 1.3] {
            // Steps well inside the time scale u^2/m of the flow.
            let h_fd = 2e-3 * u * u / (2 * n - 1) as f64;
            let r = evolution_check(&AmbientSpace::cp(n), u, h_fd).unwrap();
            assert!((r.ricci_normal - 2.0 * (n as f64 + 1.0)).abs() < 1e-12);
            let h2 = r.quantity("H2").unwrap();
            assert!(h2.holds, "n = {n} u = {u}: {h2:?}");
            assert!((1.9..=2.1).contains(&h2.order_self));
            assert!((h2.extrapolated - h2.exact).abs() < 1e-6 * h2.exact.abs().max(1.0));
            for name in ["Ao2", "H4", "log_volume"] {
                let q = r.quantity(name).unwrap();
                assert!(q.holds, "n = {n} u = {u}: {q:?}");
            }
            // The |A|^2 law leaves out a curvature-gradient term of size 8(n-1)c^2.
            let a2 = r.quantity("A2").unwrap();
            let resid = a2.extrapolated - a2.rhs;
            assert!(
                (resid + 8.0 * (n as f64 - 1.0)).abs() < 1e-5,
                "n = {n} u = {u}: {resid}"
            );
            assert!((a2.extrapolated - a2.exact).abs() < 1e-6 * a2.exact.abs().max(1.0));
            assert!(!a2.holds && !r.pass);
        }
    }
}

#[test]
fn cp3_quarter_h2_law() {
    let r = evolution_check(&AmbientSpace::cp(3), FRAC_PI_4, 1e-3).unwrap();
    let q = r.quantity("H2").unwrap();
    // 2|H|^2(|A|^2 + 8) with |H|^2 = 16, |A|^2 = 4.
    assert!((q.rhs - 384.0).abs() < 1e-10);
    assert!(q.holds);
    assert!(evolution_check(&AmbientSpace::cp(3), FRAC_PI_4, 0.0).is_err());
    assert!(evolution_check(&AmbientSpace::hp(3), FRAC_PI_4, 1e-3).is_err());
}

#[test]
fn hp_flows_preserve_pinching() {
    for n in [3, 4] {
        let s = AmbientSpace::hp(n);
        let r = pinch_range(&s, 0.0).unwrap();
        assert!(r.contains(FRAC_PI_4));
        let run = invariance_run(&s, FRAC_PI_4, 0.0, &StepPolicy::default()).unwrap();
        assert!(run.pass, "{run:?}");
        let grid = pinched_grid(&r, 10).unwrap();
        assert!(
            pinching_invariance_run(&s, &grid, 0.0, &StepPolicy::default(), 1)
                .unwrap()
                .pass
        );
        let u = nonconvex_witness(&s, 0.0)
            .unwrap()
            .expect("non-convex pinched radius");
        let m = sphere(s, u);
        let (l1, l2) = m.principal_curvatures();
        assert!(l1 < 0.0 && l2 > 0.0);
        let sc = m.scalars();
        assert!(sc.a2 < sc.h2 / (m.m() as f64 - 1.0) + 2.0);
        assert!(pinch_test_closed_form(&m, 0.0).unwrap() < 0.0);
    }
}

#[test]
fn dp45_matches_closed_form_solutions() {
    let tol = Tolerances {
        rtol: 1e-12,
        atol: 1e-14,
    };
    // y' = -y.
    let y = integrate_to(|_t, y: &[f64; 1]| Ok([-y[0]]), 0.0, [1.0], 3.0, tol).unwrap();
    assert!((y[0] - (-3.0f64).exp()).abs() < 1e-11);
    // Harmonic oscillator, integrated backwards.
    let y = integrate_to(
        |_t, y: &[f64; 2]| Ok([y[1], -y[0]]),
        0.0,
        [0.0, 1.0],
        -2.0,
        tol,
    )
    .unwrap();
    assert!((y[0] - (-2.0f64).sin()).abs() < 1e-11 && (y[1] - (-2.0f64).cos()).abs() < 1e-11);
    // y' = t^4 is integrated exactly by a fifth-order step.
    let (y5, _) = dp45_step(&mut |t, _y: &[f64; 1]| Ok([t.powi(4)]), 0.0, &[0.0], 1.0).unwrap();
    assert!((y5[0] - 0.2).abs() < 1e-15);
    // Local error of one step scales like h^5.
    let mut f = |_t: f64, y: &[f64; 1]| Ok([y[0]]);
    let e = |h: f64, f: &mut _| (dp45_step(f, 0.0, &[1.0], h).unwrap().0[0] - h.exp()).abs();
    let ratio = e(0.2, &mut f) / e(0.1, &mut f);
    assert!((ratio.log2() - 6.0).abs() < 0.3, "{}", ratio.log2());
    // The controller rejects oversized steps.
    let acc = adaptive_step(&mut f, 0.0, &[1.0], 5.0, 5.0, tol).unwrap();
    assert!(acc.rejected > 0 && acc.h_used < 5.0);
}

#[test]
fn trajectory_csv_round_trip() {
    let traj = integrate(
        &sphere(AmbientSpace::cp(3), 0.5),
        0.0,
        &StepPolicy::default(),
    )
    .unwrap();
    let csv = traj.to_csv();
    assert!(csv.starts_with("t,u,H,A2,Ao2,Q,W,f0,vol_ratio,neg_int_h2\n"));
    let back = read_trajectory_csv(csv.as_bytes()).unwrap();
    assert_eq!(back, traj.samples);
    assert!(read_trajectory_csv("t,u\n1,2\n".as_bytes()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn extinction_time_within_bounds(frac in 0.02f64..0.98, n in 3usize..=6) {
        let s = AmbientSpace::cp(n);
        let ub = pinch_range(&s, 0.0).unwrap().first_boundary().unwrap();
        let run = invariance_run(&s, frac * ub, 0.0, &StepPolicy::default()).unwrap();
        prop_assert!(run.pass);
        let t = run.extinction_time_extrapolated.unwrap();
        prop_assert!(t >= frac * frac * ub * ub / (2.0 * (2 * n - 1) as f64) * (1.0 - 1e-9));
    }

    #[test]
    fn trig_identity(u in 1e-3f64..1.5, c in prop::sample::select(vec![0.25, 1.0, 4.0])) {
        let s = AmbientSpace::cp(3).with_c(c).unwrap();
        prop_assume!(u < focal_radius(&s));
        let (l1, l2) = sphere(s, u).principal_curvatures();
        let rhs = l2 - c.sqrt() * (c.sqrt() * u).tan();
        prop_assert!((l1 - rhs).abs() < 1e-12 * l2.abs().max(rhs.abs()).max(1.0));
    }
}
