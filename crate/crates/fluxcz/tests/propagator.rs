mod common;

use approx::assert_relative_eq;
use fluxcz::drive::{drag_drive, PulseSpec};
use fluxcz::propagator::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

fn unitarity_defect(u: &DMatrix<Complex64>) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - DMatrix::<Complex64>::identity(n, n)).iter().fold(0.0, |m, x| m.max(x.norm()))
}

fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().fold(0.0, |m, x| m.max(x.norm()))
}

/// Interaction-frame propagator from exponential-midpoint steps of the lab-frame
/// Hamiltonian H(t) = E + f(t)·n̂, independent of the RK4 integrator.
fn midpoint_oracle(sys: &GateSystem, pulse: &PulseSpec, omega_d: f64, steps: usize) -> DMatrix<Complex64> {
    let d = sys.dim();
    let (t0, t1) = pulse.window();
    let h = (t1 - t0) / steps as f64;
    let n = sys.drive_op.map(|x| Complex64::new(0.0, x));
    let mut u = DMatrix::<Complex64>::identity(d, d);
    for k in 0..steps {
        let t = t0 + (k as f64 + 0.5) * h;
        let mut ham = &n * Complex64::new(drag_drive(pulse, t, omega_d), 0.0);
        for i in 0..d {
            ham[(i, i)] += sys.energies[i];
        }
        u = (ham * Complex64::new(0.0, -2.0 * PI * h)).exp() * u;
    }
    // Remove free evolution over the window.
    let tg = t1 - t0;
    for i in 0..d {
        let ph = Complex64::from_polar(1.0, 2.0 * PI * sys.energies[i] * tg);
        for j in 0..d {
            u[(i, j)] *= ph;
        }
    }
    u
}

fn toy_pulse() -> PulseSpec {
    PulseSpec { detuning: 0.003, ..PulseSpec::with_gate_time(30.0, 0.06) }
}

#[test]
fn zero_drive_is_identity_in_interaction_frame() {
    let sys = common::toy_system();
    let p = PulseSpec::with_gate_time(30.0, 0.0);
    let u = full_propagator(&sys, &p, sys.drive_frequency(0.0), &IntegratorSettings::default()).unwrap();
    assert!(max_diff(&u, &DMatrix::identity(6, 6)) < 1e-13);
}

#[test]
fn rk4_matches_exponential_midpoint_oracle() {
    let sys = common::toy_system();
    let p = toy_pulse();
    let wd = sys.drive_frequency(p.detuning);
    let set = IntegratorSettings { points_per_period: 64.0, ..Default::default() };
    let u = full_propagator(&sys, &p, wd, &set).unwrap();
    // Richardson-extrapolated second-order oracle.
    let (c1, c2) = (midpoint_oracle(&sys, &p, wd, 20_000), midpoint_oracle(&sys, &p, wd, 40_000));
    let oracle = (c2 * Complex64::new(4.0, 0.0) - c1) / Complex64::new(3.0, 0.0);
    assert!(max_diff(&u, &oracle) < 1e-6, "{}", max_diff(&u, &oracle));
    assert!(unitarity_defect(&u) < 1e-9);
}

#[test]
fn lab_and_interaction_frames_agree() {
    let sys = common::toy_system();
    let p = toy_pulse();
    let wd = sys.drive_frequency(p.detuning);
    let ui = full_propagator(&sys, &p, wd, &IntegratorSettings { points_per_period: 96.0, ..Default::default() }).unwrap();
    // The lab frame carries the full dynamical phase and needs a much finer grid.
    let ul = full_propagator(
        &sys,
        &p,
        wd,
        &IntegratorSettings { points_per_period: 768.0, frame: Frame::Lab, ..Default::default() },
    )
    .unwrap();
    assert!(max_diff(&ui, &ul) < 1e-8, "{}", max_diff(&ui, &ul));
}

#[test]
fn step_refinement_converges() {
    let sys = common::toy_system();
    let p = toy_pulse();
    let wd = sys.drive_frequency(p.detuning);
    let run = |ppp: f64| full_propagator(&sys, &p, wd, &IntegratorSettings { points_per_period: ppp, ..Default::default() }).unwrap();
    let (a, b, c) = (run(16.0), run(32.0), run(64.0));
    let (e1, e2) = (max_diff(&a, &c), max_diff(&b, &c));
    // Fourth order: halving the step cuts the error ~16×.
    assert!(e2 < e1 / 8.0, "{e1} {e2}");
}

#[test]
fn phases_of_a_diagonal_block_are_recovered() {
    let phi = [0.3, -1.1, 0.7, 2.0];
    let mut m = nalgebra::Matrix4::<Complex64>::zeros();
    for k in 0..4 {
        let sign = if k == 3 { -1.0 } else { 1.0 };
        m[(k, k)] = Complex64::from_polar(sign, -phi[k]);
    }
    let got = phases_from_block(&m).unwrap();
    for k in 0..4 {
        assert_relative_eq!(got[k], phi[k], epsilon = 1e-12);
    }
    assert!(phases_from_block(&nalgebra::Matrix4::zeros()).is_err());
}

#[test]
fn resonant_cycle_returns_population() {
    // Seed-amplitude 2π pulse on the toy's driven line returns |1,0,1⟩ to itself.
    let sys = common::toy_system();
    let tau = 60.0 / fluxcz::drive::GATE_OVER_TAU;
    let p = PulseSpec::with_gate_time(60.0, fluxcz::drive::seed_amplitude(tau, sys.m111));
    let ev = evolve_computational(&sys, &p, sys.drive_frequency(0.0), &IntegratorSettings::default()).unwrap();
    assert!(ev.population(&sys, 3, [1, 1, 1]) < 0.02);
    assert!(ev.population(&sys, 3, [1, 0, 1]) > 0.97);
    // The excursion through |1,1,1⟩ flips the sign: a ~π conditional phase that
    // the CZ convention removes.
    assert!(ev.phi_rel().abs() < 0.6, "{}", ev.phi_rel());
}

#[test]
fn table_circuit_frames_agree_and_norm_is_kept() {
    let spec = common::table1_spec();
    let sys = GateSystem::from_circuit(&spec, &common::table1().truncation.options(), 20).unwrap();
    let tau = 60.0 / fluxcz::drive::GATE_OVER_TAU;
    let p = PulseSpec::with_gate_time(60.0, fluxcz::drive::seed_amplitude(tau, sys.m111));
    let wd = sys.drive_frequency(0.0);
    let set = IntegratorSettings { points_per_period: 48.0, ..Default::default() };
    let a = evolve_computational(&sys, &p, wd, &set).unwrap();
    let b = evolve_computational(&sys, &p, wd, &IntegratorSettings { points_per_period: 768.0, frame: Frame::Lab, ..set }).unwrap();
    let diff = (&a.final_states - &b.final_states).iter().fold(0.0f64, |m, x| m.max(x.norm()));
    assert!(diff < 1e-8, "{diff}");
    for c in 0..4 {
        assert_relative_eq!(a.final_states.column(c).norm_squared(), 1.0, epsilon = 1e-9);
    }
}

#[test]
fn wrong_initial_length_rejected() {
    let sys = common::toy_system();
    let r = propagate(&sys, &toy_pulse(), 6.7, &[Complex64::new(1.0, 0.0); 3], &IntegratorSettings::default());
    assert!(r.is_err());
}
