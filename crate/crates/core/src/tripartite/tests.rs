use super::*;
use crate::fock::{fock_state, hermitize, thermal};
use crate::lindblad::propagate;
use proptest::prelude::*;

fn example() -> EngineSpec {
    EngineSpec {
        omega_h: 3.0,
        omega_c: 2.0,
        beta_h: 0.1,
        beta_c: 1.0,
        gamma_h: 0.1,
        gamma_c: 0.1,
        g: 0.01,
    }
}

fn space(d: usize) -> FockSpace {
    FockSpace::new(d).unwrap()
}

fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn coupling_matches_the_other_ordering() {
    // i g (a^dagger b c - a b^dagger c^dagger)
    let s = space(6);
    let sm = sigma_minus();
    let c = annihilation(s);
    let a = kron(&kron(&sm, &eye(2)), &eye(6));
    let b = kron(&kron(&eye(2), &sm), &eye(6));
    let cc = kron(&eye(4), &c);
    let other = (a.adjoint() * &b * &cc - &a * b.adjoint() * cc.adjoint()) * C64::new(0.0, 0.3);
    assert!(max_abs(&(coupling_hamiltonian(0.3, s) - other)) < 1e-15);
}

#[test]
fn uncoupled_qubits_thermalize_and_leave_the_oscillator_alone() {
    let spec = EngineSpec { g: 0.0, ..example() };
    let s = space(8);
    let gen = build_tripartite_generator(&spec, s).unwrap();
    // excited hot, ground cold, oscillator in a superposition-free mixture
    let mut hc = ComplexMatrix::zeros(4, 4);
    hc[(2, 2)] = C64::new(1.0, 0.0);
    let osc = thermal(s, 5.0).unwrap();
    let rho0 = DensityMatrix::new(kron(&hc, osc.matrix())).unwrap();
    let out = propagate(&gen, &rho0, 250.0, 0.5 / gen.norm_one()).unwrap();
    let st = TripartiteState::from_matrix(out, 8).unwrap();
    let (h, c) = st.qubits();
    assert!(max_abs(&(h - qubit_gibbs(spec.n_h()))) < 1e-8);
    assert!(max_abs(&(c - qubit_gibbs(spec.n_c()))) < 1e-8);
    assert!(max_abs(&(st.oscillator().unwrap().matrix() - osc.matrix())) < 1e-12);
    // product of marginals
    let prod = kron(&kron(&qubit_gibbs(spec.n_h()), &qubit_gibbs(spec.n_c())), osc.matrix());
    assert!(max_abs(&(st.mat.matrix() - prod)) < 1e-8);
}

#[test]
fn partial_trace_of_a_product() {
    let spec = example();
    let osc = fock_state(space(5), 2).unwrap();
    let st = TripartiteState::engine_product(&spec, &osc).unwrap();
    assert!(max_abs(&(st.oscillator().unwrap().matrix() - osc.matrix())) < 1e-15);
    let (h, _) = st.qubits();
    assert!((h[(1, 1)].re - spec.n_h()).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn composite_generator_preserves_trace(seed in proptest::collection::vec(-1.0f64..1.0, 2 * 64 * 64)) {
        let gen = build_tripartite_generator(&example(), space(16)).unwrap();
        let mut m = ComplexMatrix::from_fn(64, 64, |i, j| C64::new(seed[i * 64 + j], seed[64 * 64 + i * 64 + j]));
        hermitize(&mut m);
        let out = gen.apply(&m);
        prop_assert!(out.trace().norm() < 1e-13);
        let mut h = out.clone();
        hermitize(&mut h);
        prop_assert!(max_abs(&(h - out)) < 1e-13);
    }
}

#[test]
fn reduction_improves_as_coupling_weakens() {
    let spec = example();
    let rep = validate_reduction(&spec, space(12), 3.0 / spec.gamma_h).unwrap();
    assert!(rep.monotone, "{rep:?}");
    assert_eq!(rep.points.len(), 3);
    assert!((rep.points[2].g - 0.0025).abs() < 1e-15);
}

#[test]
fn occupation_slopes_agree_at_small_margin() {
    let spec = EngineSpec { g: 0.005, ..example() };
    let rep = validate_reduction(&spec, space(12), 3.0 / spec.gamma_h).unwrap();
    let p = &rep.points[0];
    assert!(p.weak_coupling_margin < 0.055, "{p:?}");
    assert!(p.slope_reduced > 0.0);
    assert!(p.slope_mismatch() < 0.1, "{p:?}");
}

#[test]
fn no_coupling_no_difference() {
    let spec = EngineSpec { g: 0.0, ..example() };
    let rep = validate_reduction(&spec, space(12), 5.0).unwrap();
    for p in &rep.points {
        assert!(p.max_trace_distance < 1e-12, "{p:?}");
    }
}

fn classical(eps: f64) -> ClassicalDriveSpec {
    ClassicalDriveSpec { engine: example(), eps }
}

#[test]
fn classical_power_closed_form_value() {
    // independent evaluation
    let n_h = 1.0 / (0.3f64.exp() + 1.0);
    let n_c = 1.0 / (2.0f64.exp() + 1.0);
    let den = 4e-4 * ((1.0 - n_h) / 0.1 + (1.0 - n_c) / 0.1) + 0.1 * (1.0 + (-0.3f64).exp()) + 0.1 * (1.0 + (-2.0f64).exp());
    let expect = 4e-4 * (n_h - n_c) / den;
    let p = classical_drive_power_closed_form(&classical(0.01));
    assert!((p - expect).abs() < 1e-18);
    assert!((p - 4.18e-4).abs() < 0.01e-4, "{p}");
}

#[test]
fn classical_power_matches_numerical_steady_state() {
    let p = classical_drive_power(&classical(0.01)).unwrap();
    assert!(p.closed_form > 0.0);
    assert!(p.relative_mismatch() < 1e-6, "{p:?}");
}

#[test]
fn classical_power_vanishes() {
    let p = classical_drive_power(&classical(0.0)).unwrap();
    assert_eq!(p.closed_form, 0.0);
    assert!(p.numerical.abs() < 1e-15);
    // equal occupations
    let same = ClassicalDriveSpec {
        engine: EngineSpec {
            omega_h: 3.0,
            omega_c: 2.0,
            beta_h: 0.5,
            beta_c: 0.75,
            ..example()
        },
        eps: 0.01,
    };
    assert!((same.engine.n_h() - same.engine.n_c()).abs() < 1e-15);
    let p = classical_drive_power(&same).unwrap();
    assert!(p.closed_form.abs() < 1e-18 && p.numerical.abs() < 1e-15);
}

#[test]
fn classical_power_sign_follows_inversion() {
    for (beta_h, beta_c) in [(0.1, 1.0), (0.5, 0.6), (1.0, 1.0), (1.0, 0.2)] {
        let spec = ClassicalDriveSpec {
            engine: EngineSpec {
                beta_h,
                beta_c,
                ..example()
            },
            eps: 0.01,
        };
        let p = classical_drive_power(&spec).unwrap();
        let inverted = spec.engine.n_h() > spec.engine.n_c();
        assert_eq!(p.numerical > 0.0, inverted, "{beta_h} {beta_c}: {p:?}");
        assert_eq!(p.closed_form > 0.0, inverted);
    }
}
