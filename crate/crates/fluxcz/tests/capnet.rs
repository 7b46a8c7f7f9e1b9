mod common;

use approx::assert_relative_eq;
use fluxcz::capnet::*;
use fluxcz::units::E2H_GHZ_FF;
use nalgebra::{DMatrix, Matrix3};
use proptest::prelude::*;

fn grounded(c_f: f64, c_c: f64, c_ab: f64) -> CapacitanceNetwork {
    CapacitanceNetwork { topology: Topology::Grounded, c_f, c_fp: 0.0, c_c, c_ab, z_in: 190.0, omega_in: 7.08 }
}

fn differential(c_f: f64, c_fp: f64, c_c: f64, c_ab: f64) -> CapacitanceNetwork {
    CapacitanceNetwork { topology: Topology::Differential, c_f, c_fp, c_c, c_ab, z_in: 190.0, omega_in: 7.08 }
}

/// Inverse by the adjugate, independent of the library's solver.
fn adjugate_inverse(m: &Matrix3<f64>) -> Matrix3<f64> {
    let c = |r: usize, k: usize| {
        let rows: Vec<usize> = (0..3).filter(|&i| i != r).collect();
        let cols: Vec<usize> = (0..3).filter(|&i| i != k).collect();
        m[(rows[0], cols[0])] * m[(rows[1], cols[1])] - m[(rows[0], cols[1])] * m[(rows[1], cols[0])]
    };
    let det = m[(0, 0)] * c(0, 0) - m[(0, 1)] * c(0, 1) + m[(0, 2)] * c(0, 2);
    Matrix3::from_fn(|i, j| if (i + j) % 2 == 0 { 1.0 } else { -1.0 } * c(j, i) / det)
}

#[test]
fn resonator_lumped_elements() {
    let n = grounded(7.0, 2.0, 0.0);
    assert_relative_eq!(n.c_r(), 1e6 / (2.0 * std::f64::consts::PI * 7.08 * 190.0), max_relative = 1e-14);
    // ω = 1/√(LC), Z = √(L/C)
    let (l, c) = (n.l_r() * 1e-9, n.c_r() * 1e-15);
    assert_relative_eq!(1.0 / (2.0 * std::f64::consts::PI * (l * c).sqrt()) * 1e-9, 7.08, max_relative = 1e-12);
    assert_relative_eq!((l / c).sqrt(), 190.0, max_relative = 1e-12);
}

#[test]
fn uncoupled_network_is_trivial() {
    let n = grounded(7.0, 0.0, 0.0);
    let e = effective_circuit(&n).unwrap();
    assert_eq!((e.j_ac, e.j_bc, e.j_ab), (0.0, 0.0, 0.0));
    assert_relative_eq!(e.e_c_a, E2H_GHZ_FF / (2.0 * 7.0), max_relative = 1e-12);
    assert_relative_eq!(e.z_c_out, 190.0, max_relative = 1e-12);
    assert_relative_eq!(e.omega_c_out, 7.08, max_relative = 1e-12);
}

#[test]
fn grounded_matches_adjugate_oracle() {
    let n = grounded(7.27, 2.45, 0.02);
    let c = truncated_matrix(&n).unwrap();
    let inv = adjugate_inverse(&c);
    let e = effective_circuit(&n).unwrap();
    assert_relative_eq!(e.e_c_a, E2H_GHZ_FF * inv[(0, 0)] / 2.0, max_relative = 1e-12);
    assert_relative_eq!(e.j_ac, 4.0 * E2H_GHZ_FF * inv[(0, 1)], max_relative = 1e-12);
    assert_relative_eq!(e.j_ab, 4.0 * E2H_GHZ_FF * inv[(0, 2)], max_relative = 1e-12);
    assert_relative_eq!(e.z_c_out, 1e3 * (n.l_r() * inv[(1, 1)]).sqrt(), max_relative = 1e-12);
}

#[test]
fn differential_mode_transform() {
    let m = mode_matrix();
    assert!((&m * &m - DMatrix::<f64>::identity(5, 5)).abs().max() < 1e-15);
    assert!((&m - m.transpose()).abs().max() == 0.0);
    let (cf, cfp, cc, cab) = (10.0, 3.0, 2.5, 0.4);
    let n = differential(cf, cfp, cc, cab);
    let t = truncated_matrix(&n).unwrap();
    let s2 = std::f64::consts::SQRT_2;
    assert_relative_eq!(t[(0, 0)], 2.0 * cf + cfp + (cc + cab) / 2.0, max_relative = 1e-14);
    assert_relative_eq!(t[(1, 1)], n.c_r() + 2.0 * cc, max_relative = 1e-14);
    assert_relative_eq!(t[(0, 1)], cc / s2, max_relative = 1e-14);
    assert_relative_eq!(t[(2, 1)], cc / s2, max_relative = 1e-14);
    assert_relative_eq!(t[(0, 2)], -cab / 2.0, max_relative = 1e-14);
    assert!(differential_transform(&DMatrix::zeros(3, 3)).is_err());
}

#[test]
fn invalid_networks_rejected() {
    assert!(build_matrix(&grounded(-1.0, 2.0, 0.0)).is_err());
    assert!(build_matrix(&CapacitanceNetwork { c_fp: 1.0, ..grounded(7.0, 2.0, 0.0) }).is_err());
    assert!(build_matrix(&CapacitanceNetwork { z_in: 0.0, ..grounded(7.0, 2.0, 0.0) }).is_err());
    assert!(effective_circuit(&grounded(0.0, 0.0, 0.0)).is_err());
}

#[test]
fn grounded_main_row_within_three_percent() {
    let cfg = common::config(&["si-grounded-main"]);
    let r = cfg.reference.unwrap();
    let e = effective_circuit(&cfg.network.unwrap().capacitances()).unwrap();
    for (got, want) in [(e.e_c_a, r.e_c), (e.z_c_out, r.z_c), (e.j_ac.abs(), r.j_c), (e.j_ab.abs(), r.j_ab)] {
        assert!((got / want - 1.0).abs() < 0.03, "{got} vs {want}");
    }
}

proptest! {
    #[test]
    fn matrices_symmetric_positive_definite(cf in 1.0f64..30.0, cfp in 0.0f64..10.0, cc in 0.0f64..10.0, cab in 0.0f64..2.0) {
        for n in [grounded(cf, cc, cab), differential(cf, cfp.max(0.1), cc, cab)] {
            let c = build_matrix(&n).unwrap();
            prop_assert!((&c - c.transpose()).abs().max() < 1e-12);
            prop_assert!(c.clone().cholesky().is_some());
            let t = truncated_matrix(&n).unwrap();
            prop_assert!(t.cholesky().is_some());
        }
    }

    #[test]
    fn coupling_capacitance_loads_everything(cf in 3.0f64..20.0, cc in 0.5f64..5.0, cab in 0.0f64..0.5) {
        let lo = effective_circuit(&grounded(cf, cc, cab)).unwrap();
        let hi = effective_circuit(&grounded(cf, cc * 1.2, cab)).unwrap();
        prop_assert!(hi.j_ac.abs() > lo.j_ac.abs());
        prop_assert!(hi.e_c_a < lo.e_c_a);
        prop_assert!(hi.z_c_out < lo.z_c_out && hi.omega_c_out < lo.omega_c_out);
        // Mirror-symmetric network: both sides identical.
        prop_assert!((lo.j_ac - lo.j_bc).abs() < 1e-12 && (lo.e_c_a - lo.e_c_b).abs() < 1e-12);
    }

    #[test]
    fn sign_convention_preserves_loop_sign(cf in 3.0f64..20.0, cfp in 0.1f64..5.0, cc in 0.5f64..5.0, cab in 0.01f64..1.0, diff in proptest::bool::ANY) {
        let n = if diff { differential(cf, cfp, cc, cab) } else { grounded(cf, cc, cab) };
        let e = effective_circuit(&n).unwrap();
        let f = fluxcz::circuit::FluxoniumSpec::new(1.0, 5.0, 0.5);
        let spec = e.to_circuit_spec(&f, &f, 8);
        prop_assert!(spec.j_ac >= 0.0 && spec.j_bc >= 0.0);
        prop_assert!((spec.j_ac * spec.j_bc * spec.j_ab).signum() == (e.j_ac * e.j_bc * e.j_ab).signum());
        prop_assert!(e.j_ac * e.j_bc * e.j_ab > 0.0);
    }
}
