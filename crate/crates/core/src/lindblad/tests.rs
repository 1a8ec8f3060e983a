use proptest::prelude::*;

use super::*;
use crate::fock::{
    coherent, displaced_thermal, fock_state, ground_state, hermitize, occupation_of, ladder_mean, thermal,
    trace_distance,
};

fn space(d: usize) -> FockSpace {
    FockSpace::new(d).unwrap()
}

fn desk_bath() -> EffectiveBath {
    EffectiveBath::direct(0.01, -0.5, 1.0).unwrap()
}

fn desk_control() -> ControlSpec {
    ControlSpec::new(0.02, 0.04, 0.02).unwrap()
}

fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[test]
fn gibbs_is_fixed_point_of_ordinary_bath() {
    let s = space(40);
    let bath = EffectiveBath::direct(0.3, 0.8, 1.0).unwrap();
    let gen = build_engine_dissipator(&bath, s);
    let rho = thermal(s, 0.8).unwrap();
    assert!(max_abs(&gen.apply(rho.matrix())) < 1e-12);
}

#[test]
fn inverted_bath_heats_vacuum_at_upward_rate() {
    let s = space(10);
    let bath = EffectiveBath::direct(0.01, -0.5, 1.0).unwrap();
    let gen = build_engine_dissipator(&bath, s);
    let rho = ground_state(s);
    let dn = occupation_of(&gen.apply(rho.matrix()));
    // dn/dt = up (n + 1) - down n at n = 0
    assert!((dn - 0.01 * 0.5f64.exp()).abs() < 1e-15);
    // Euler step agrees with the closed form to first order
    let dt = 1e-4;
    let stepped = rho.matrix() + gen.apply(rho.matrix()) * c(dt, 0.0);
    let exact = moment_flow(&bath, &ControlSpec::off(), c(0.0, 0.0), 0.0, dt).unwrap();
    assert!((occupation_of(&stepped) - exact.occupation).abs() < 1e-9);
}

#[test]
fn zero_rate_generators_vanish() {
    let s = space(16);
    let rho = coherent(s, c(0.3, 0.1)).unwrap();
    let e = build_engine_dissipator(&EffectiveBath::direct(0.0, -0.5, 1.0).unwrap(), s);
    let m = build_monitoring_dissipator(0.0, s).unwrap();
    let f = build_feedback_dissipator(0.3, 0.0, s).unwrap();
    for g in [e, m, f] {
        assert_eq!(max_abs(&g.apply(rho.matrix())), 0.0);
        assert_eq!(g.superoperator().nnz(), 0);
    }
}

#[test]
fn monitoring_heats_without_damping() {
    let s = space(40);
    let gamma = 0.08;
    let gen = build_monitoring_dissipator(gamma, s).unwrap();
    for rho in [coherent(s, c(0.7, -0.4)).unwrap(), thermal(s, 1.3).unwrap(), fock_state(s, 3).unwrap()] {
        let l = gen.apply(rho.matrix());
        assert!((occupation_of(&l) - gamma / 4.0).abs() < 1e-12);
        assert!(ladder_mean(&l).norm() < 1e-12);
    }
}

#[test]
fn feedback_coefficients() {
    let s = space(5);
    let k = 0.03;
    let f = build_feedback_dissipator(k, k, s).unwrap();
    assert_eq!(f.terms()[0].rate, 2.0 * k);
    assert_eq!(f.terms()[1].rate, 0.0);
    let f = build_feedback_dissipator(2.0 * k, k, s).unwrap();
    assert!((f.terms()[0].rate - 1.5 * k).abs() < 1e-17);
    assert!((f.terms()[1].rate + 0.5 * k).abs() < 1e-17);
    assert!(f.terms()[1].is_formally_negative());
    assert!(matches!(
        build_feedback_dissipator(0.0, k, s),
        Err(FlywheelError::FeedbackWithoutMeasurement { .. })
    ));
    // standalone propagation of a negative coefficient is refused
    let rho = ground_state(s);
    assert!(matches!(
        propagate(&f, &rho, 1.0, 0.01),
        Err(FlywheelError::NegativeRateStandalone)
    ));
    assert!(matches!(steady_state(&f), Err(FlywheelError::NegativeRateStandalone)));
}

#[test]
fn compose_desk_rates() {
    let g = unconditional(&desk_bath(), &desk_control(), space(12)).unwrap();
    let r = g.composite().unwrap();
    assert!((r.Gamma() - 0.05).abs() < 1e-15);
    let up = 0.01 * 0.5f64.exp() + 0.01 + 0.01 - 0.02;
    assert!((r.up - up).abs() < 1e-15);
    assert!((r.up - 0.016487).abs() < 1e-6);
    assert!((r.beta() * r.omega_o - 1.1094).abs() < 1e-4);
    assert!((r.beta() - (0.05f64 / up).ln()).abs() < 1e-13);
}

#[test]
fn compose_at_threshold_is_infinite_temperature() {
    let bath = desk_bath();
    let k = -bath.kappa_e;
    let g = unconditional(&bath, &ControlSpec::new(0.0, 2.0 * k, k).unwrap(), space(8)).unwrap();
    let r = g.composite().unwrap();
    assert!((r.down - r.up).abs() < 1e-16);
    assert!(r.beta().abs() < 1e-12);
}

#[test]
fn compose_without_control_is_the_bath() {
    let s = space(7);
    let bath = desk_bath();
    let g = unconditional(&bath, &ControlSpec::off(), s).unwrap();
    let e = build_engine_dissipator(&bath, s);
    assert_eq!(g.superoperator().to_dense(), e.superoperator().to_dense());
    assert!(matches!(
        compose(&e, &build_monitoring_dissipator(0.1, space(8)).unwrap(), &e, 0.0),
        Err(FlywheelError::DimensionMismatch { .. })
    ));
}

#[test]
fn superoperator_matches_dense_action() {
    let s = space(9);
    let g = unconditional(&desk_bath(), &desk_control(), s).unwrap();
    let rho = random_hermitian(&[0.3, -0.1, 0.7, 0.25, -0.9, 0.05, 0.4], 9);
    let dense = g.apply(&rho);
    let mut y = vec![C64::default(); 81];
    g.superoperator().mul_vec(rho.as_slice(), &mut y);
    let sparse = ComplexMatrix::from_column_slice(9, 9, &y);
    assert!(max_abs(&(dense - sparse)) < 1e-15);
    let (lo, hi) = g.superoperator().bandwidths();
    assert!(lo <= 10 && hi <= 10);
}

#[test]
fn threshold_equivalence_on_a_grid() {
    let bath = desk_bath();
    let th = -bath.kappa_e;
    for k in 1..=40 {
        let kappa_f = th * (0.5 + k as f64 * 0.025);
        if (kappa_f - th).abs() < 1e-9 * th {
            continue;
        }
        for ratio in [0.3, 1.0, 2.0, 5.0] {
            let ctl = ControlSpec::new(0.01, ratio * kappa_f, kappa_f).unwrap();
            let r = unconditional(&bath, &ctl, space(6)).unwrap().composite().unwrap();
            assert_eq!(r.beta() > 0.0, kappa_f > th, "kappa_f = {kappa_f}, ratio = {ratio}");
        }
    }
}

#[test]
fn zero_generator_leaves_state_alone() {
    let s = space(16);
    let g = unconditional(&EffectiveBath::direct(0.0, 1.0, 1.0).unwrap(), &ControlSpec::off(), s).unwrap();
    let rho = coherent(s, c(0.2, 0.1)).unwrap();
    let out = propagate(&g, &rho, 5.0, 0.1).unwrap();
    assert_eq!(out.matrix(), rho.matrix());
}

#[test]
fn ordinary_bath_thermalizes() {
    let s = space(30);
    let bath = EffectiveBath::direct(0.5, 1.0, 1.0).unwrap();
    let g = build_engine_dissipator(&bath, s);
    let rho0 = fock_state(s, 2).unwrap();
    let out = propagate(&g, &rho0, 130.0, g.recommended_dt()).unwrap();
    let gibbs = thermal(s, 1.0).unwrap();
    assert!(trace_distance(&out, &gibbs).unwrap() < 1e-8);
}

#[test]
fn step_guard() {
    let s = space(20);
    let g = unconditional(&desk_bath(), &desk_control(), s).unwrap();
    let dt = 3.0 / g.norm_one();
    assert!(matches!(
        propagate(&g, &ground_state(s), 1.0, dt),
        Err(FlywheelError::StepTooLarge { .. })
    ));
}

#[test]
fn amplifying_bath_matches_closed_form_until_guard() {
    let s = space(60);
    let bath = EffectiveBath::direct(0.05, -0.5, 1.0).unwrap();
    let ctl = ControlSpec::new(0.01, 0.0, 0.0).unwrap();
    let g = unconditional(&bath, &ctl, s).unwrap();
    let mut worst: f64 = 0.0;
    let mut seen = 0;
    let res = evolve(&g, &ground_state(s), 1e4, g.recommended_dt(), 1, |t, m| {
        let exact = moment_flow(&bath, &ctl, c(0.0, 0.0), 0.0, t).unwrap();
        let n = occupation_of(m);
        if t > 0.0 {
            worst = worst.max((n - exact.occupation).abs() / exact.occupation);
            worst = worst.max((ladder_mean(m) - exact.mean_c).norm() / exact.mean_c.norm());
        }
        seen += 1;
    });
    assert!(matches!(res, Err(FlywheelError::TruncationBreached { .. })), "{res:?}");
    assert!(seen > 20);
    assert!(worst < 1e-6, "worst relative deviation {worst:e}");
}

#[test]
fn steady_state_is_displaced_thermal() {
    let s = space(40);
    let bath = desk_bath();
    let ctl = desk_control();
    let g = unconditional(&bath, &ctl, s).unwrap();
    let rho = steady_state(&g).unwrap();
    let kappa = ctl.kappa_f + bath.kappa_e;
    let c_inf = -ctl.eps_d / kappa;
    assert!((rho.mean_amplitude() - c(c_inf, 0.0)).norm() < 1e-8 * c_inf.abs());
    let r = g.composite().unwrap();
    let oracle = displaced_thermal(s, r.beta() * r.omega_o, c(c_inf, 0.0)).unwrap();
    assert!(trace_distance(&rho, &oracle).unwrap() < 1e-8);
    // independent route: long-time propagation from the vacuum
    let late = propagate(&g, &ground_state(s), 1500.0, g.recommended_dt()).unwrap();
    assert!(trace_distance(&rho, &late).unwrap() < 1e-8);
}

#[test]
fn no_steady_state_below_threshold() {
    let bath = desk_bath();
    let k = 0.9 * -bath.kappa_e;
    let g = unconditional(&bath, &ControlSpec::new(0.01, 2.0 * k, k).unwrap(), space(20)).unwrap();
    assert!(matches!(steady_state(&g), Err(FlywheelError::NoSteadyState(_))));
}

#[test]
fn undriven_steady_state_just_above_threshold() {
    // n_o is about ten here; the space has to be large
    let bath = EffectiveBath::direct(0.01, -5.0, 1.0).unwrap();
    let k = 1.1 * -bath.kappa_e;
    let s = space(260);
    let g = unconditional(&bath, &ControlSpec::new(0.0, 2.0 * k, k).unwrap(), s).unwrap();
    let rho = steady_state(&g).unwrap();
    let r = g.composite().unwrap();
    let n_o = 1.0 / (r.beta() * r.omega_o).exp_m1();
    assert!(n_o > 10.0);
    let oracle = thermal(s, r.beta() * r.omega_o).unwrap();
    assert!(trace_distance(&rho, &oracle).unwrap() < 1e-8);
}

#[test]
fn steady_state_detects_small_space() {
    let g = unconditional(&desk_bath(), &desk_control(), space(8)).unwrap();
    assert!(matches!(
        steady_state(&g),
        Err(FlywheelError::TruncationInsufficient { .. })
    ));
}

#[test]
fn free_decay_in_the_lab_frame() {
    let bath = EffectiveBath::direct(0.2, 1.5, 1.3).unwrap();
    let c0 = c(0.5, 0.2);
    let t = 3.7;
    let m = moment_flow(&bath, &ControlSpec::off(), c0, 0.29, t).unwrap().to_schroedinger(1.3, t);
    let expect = c0 * (-(c(bath.kappa_e, 1.3)) * t).exp();
    assert!((m.mean_c - expect).norm() < 1e-15);
    // numerically in the lab frame
    let s = space(20);
    let g = build_engine_dissipator(&bath, s).to_schroedinger(1.3).unwrap();
    let rho = coherent(s, c0).unwrap();
    let out = propagate(&g, &rho, t, 0.5 * g.recommended_dt()).unwrap();
    assert!((out.mean_amplitude() - expect).norm() < 1e-8);
    let driven = unconditional(&bath, &ControlSpec::new(0.1, 0.0, 0.0).unwrap(), s).unwrap();
    assert!(driven.to_schroedinger(1.3).is_err());
}

#[test]
fn driven_fixed_point_without_feedback() {
    let bath = desk_bath();
    let ctl = ControlSpec::new(0.02, 0.0, 0.0).unwrap();
    let fixed = -0.02 / bath.kappa_e;
    for t in [0.0, 1.0, 50.0] {
        let m = moment_flow(&bath, &ctl, c(fixed, 0.0), 0.0, t).unwrap();
        assert!((m.mean_c.re - fixed).abs() < 1e-12 * fixed.abs());
    }
}

#[test]
fn moments_relax_to_the_steady_values() {
    let bath = desk_bath();
    let ctl = desk_control();
    let m = moment_flow(&bath, &ctl, c(0.3, 0.4), 1.0, 4000.0).unwrap();
    let kappa = ctl.kappa_f + bath.kappa_e;
    let c_inf = -ctl.eps_d / kappa;
    assert!((m.mean_c - c(c_inf, 0.0)).norm() < 1e-12);
    let r = unconditional(&bath, &ctl, space(4)).unwrap().composite().unwrap();
    let n_o = r.up / (r.down - r.up);
    assert!((m.occupation - n_o - c_inf * c_inf).abs() < 1e-10);
}

#[test]
fn propagation_matches_moment_flow_above_threshold() {
    let s = space(40);
    let bath = desk_bath();
    let ctl = desk_control();
    let g = unconditional(&bath, &ctl, s).unwrap();
    let c0 = c(0.3, -0.2);
    let rho0 = coherent(s, c0).unwrap();
    let mut worst: f64 = 0.0;
    evolve(&g, &rho0, 200.0, g.recommended_dt(), 25, |t, m| {
        let e = moment_flow(&bath, &ctl, c0, c0.norm_sqr(), t).unwrap();
        worst = worst.max((occupation_of(m) - e.occupation).abs() / e.occupation);
        worst = worst.max((ladder_mean(m) - e.mean_c).norm() / e.mean_c.norm());
    })
    .unwrap();
    assert!(worst < 1e-6, "{worst:e}");
}

#[test]
fn unstable_temperature_examples() {
    let n = 1.0 / (std::f64::consts::E - 1.0);
    assert!((unstable_temperature(n, 2.0).unwrap() - 2.0).abs() < 1e-14);
    assert!(unstable_temperature(1e-300, 1.0).unwrap() < 2e-3);
    let mut last = 0.0;
    for k in 1..100 {
        let t = unstable_temperature(k as f64 * 0.37, 1.0).unwrap();
        assert!(t > last);
        last = t;
    }
    assert!(unstable_temperature(0.0, 1.0).is_err());
}

fn random_hermitian(xs: &[f64], d: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::from_fn(d, d, |i, j| {
        let k = 2 * (i * d + j);
        c(xs[k % xs.len()], xs[(k + 1) % xs.len()])
    });
    hermitize(&mut m);
    m
}

proptest! {
    #[test]
    fn generators_preserve_trace_and_hermiticity(
        d in 2usize..12,
        xs in proptest::collection::vec(-1.0f64..1.0, 50),
        ge in 0.0f64..1.0,
        be in -2.0f64..2.0,
        gm in 0.01f64..1.0,
        kf in 0.0f64..1.0,
        eps in 0.0f64..1.0,
    ) {
        let s = space(d);
        let bath = EffectiveBath::direct(ge, be, 1.0).unwrap();
        let h = random_hermitian(&xs, d);
        let gens = [
            build_engine_dissipator(&bath, s),
            build_monitoring_dissipator(gm, s).unwrap(),
            build_feedback_dissipator(gm, kf, s).unwrap(),
            unconditional(&bath, &ControlSpec::new(eps, gm, kf).unwrap(), s).unwrap(),
        ];
        for g in &gens {
            let l = g.apply(&h);
            prop_assert!(l.trace().norm() < 1e-12);
            prop_assert!(crate::fock::hermiticity_defect(&l) < 1e-12);
        }
    }

    #[test]
    fn composite_rates_match_raw_coefficients(
        ge in 0.0f64..1.0,
        be in -2.0f64..2.0,
        gm in 0.001f64..1.0,
        kf in 0.0f64..1.0,
    ) {
        let bath = EffectiveBath::direct(ge, be, 0.7).unwrap();
        let r = unconditional(&bath, &ControlSpec::new(0.0, gm, kf).unwrap(), space(3))
            .unwrap()
            .composite()
            .unwrap();
        let down = ge + gm / 4.0 + kf * kf / gm + kf;
        let up = ge * (-be * 0.7f64).exp() + gm / 4.0 + kf * kf / gm - kf;
        let scale = down.max(1e-300);
        prop_assert!((r.down - down).abs() <= 4.0 * f64::EPSILON * scale);
        prop_assert!((r.up - up).abs() <= 8.0 * f64::EPSILON * scale);
    }
}
