mod common;

use approx::assert_relative_eq;
use fluxcz::drive::{seed_amplitude, PulseSpec, GATE_OVER_TAU};
use fluxcz::propagator::{GateSystem, IntegratorSettings};
use fluxcz::robustness::*;
use fluxcz::units::micro_phi0_to_rad;
use proptest::prelude::*;

#[test]
fn standard_flux_noise() {
    let sigma = flux_sigma(&NoiseSpec::standard()).unwrap();
    assert_relative_eq!(sigma, 5.0 * (1e7f64 * 3600.0).ln().sqrt(), max_relative = 1e-12);
    assert_relative_eq!(sigma, 24.65, max_relative = 1e-3);
    let per_rad = NoiseSpec { convention: NoiseConvention::PerRadian, ..NoiseSpec::standard() };
    assert_relative_eq!(flux_sigma(&per_rad).unwrap(), sigma / std::f64::consts::TAU.sqrt(), max_relative = 1e-12);
    assert!(flux_sigma(&NoiseSpec { f_high: 1e-5, ..NoiseSpec::standard() }).is_err());
    assert_relative_eq!(micro_phi0_to_rad(1e6), std::f64::consts::TAU, max_relative = 1e-14);
}

proptest! {
    #[test]
    fn sigma_linear_in_amplitude(a in 0.0f64..50.0, k in 0.1f64..10.0) {
        let n = NoiseSpec { amplitude: a, ..NoiseSpec::standard() };
        let m = NoiseSpec { amplitude: a * k, ..NoiseSpec::standard() };
        prop_assert!((flux_sigma(&m).unwrap() - k * flux_sigma(&n).unwrap()).abs() < 1e-9 * (1.0 + a * k));
    }
}

#[test]
fn flux_offsets_are_symmetric_about_half_flux() {
    let cfg = common::table1();
    let spec = cfg.circuit_spec().unwrap();
    let opts = cfg.truncation.options();
    let d = 20;
    let sys = GateSystem::from_circuit(&spec, &opts, d).unwrap();
    let tau = 60.0 / GATE_OVER_TAU;
    let pulse = PulseSpec::with_gate_time(60.0, seed_amplitude(tau, sys.m111));
    let dphi = micro_phi0_to_rad(200.0);
    let set = IntegratorSettings::default();
    let pts: Vec<FluxPoint> =
        flux_offset_sweep(&spec, &opts, d, &pulse, &[-dphi, 0.0, dphi], FluxTarget::A, &set).into_iter().map(|r| r.unwrap()).collect();
    assert_relative_eq!(pts[0].infidelity, pts[2].infidelity, max_relative = 1e-6);
    // Detuning the frozen drive can only hurt near the sweet spot.
    assert!(pts[0].infidelity > pts[1].infidelity);
}
