use approx::assert_relative_eq;
use fluxcz::drive::epsilon_phi;
use fluxcz::fidelity::*;
use nalgebra::Matrix4;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cz() -> Matrix4<Complex64> {
    Matrix4::from_diagonal(&nalgebra::Vector4::new(c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)))
}

/// diag(e^{−iφ_ij}) times the CZ sign.
fn phased(phi: [f64; 4]) -> Matrix4<Complex64> {
    let mut m = cz();
    for k in 0..4 {
        m[(k, k)] *= Complex64::from_polar(1.0, -phi[k]);
    }
    m
}

#[test]
fn ideal_cz_has_unit_fidelity() {
    let g = average_gate_fidelity(&cz(), VirtualZ::Off);
    assert_relative_eq!(g.fidelity, 1.0, epsilon = 1e-15);
    assert_eq!(g.leakage, 0.0);
    assert!(g.phi_rel.abs() < 1e-15);
}

#[test]
fn identity_against_cz() {
    let g = average_gate_fidelity(&Matrix4::identity(), VirtualZ::Off);
    assert_relative_eq!(g.fidelity, 0.4, epsilon = 1e-15);
}

#[test]
fn uniform_loss_gives_leakage_error() {
    let l: f64 = 0.013;
    let m = cz() * c((1.0 - l).sqrt(), 0.0);
    let g = average_gate_fidelity(&m, VirtualZ::Off);
    assert_relative_eq!(g.infidelity, l, epsilon = 1e-14);
    assert_relative_eq!(g.leakage, l, epsilon = 1e-14);
}

#[test]
fn wrap_range() {
    use std::f64::consts::PI;
    assert_relative_eq!(wrap(3.0 * PI), PI, epsilon = 1e-12);
    assert_relative_eq!(wrap(-PI), PI, epsilon = 1e-12);
    assert_relative_eq!(wrap(0.5 - 4.0 * PI), 0.5, epsilon = 1e-12);
}

proptest! {
    /// With single-qubit phases undone exactly, the residual conditional phase φ
    /// costs ε(φ) = 1 − (14 + 6 cos φ)/20.
    #[test]
    fn conditional_phase_error_identity(p00 in -3.0f64..3.0, p01 in -3.0f64..3.0, p10 in -3.0f64..3.0, phi in -3.1f64..3.1) {
        let p11 = phi - p00 + p01 + p10;
        let m = phased([p00, p01, p10, p11]);
        let g = average_gate_fidelity(&m, VirtualZ::Fixed(p10 - p00, p01 - p00));
        prop_assert!((g.infidelity - epsilon_phi(phi)).abs() < 1e-12);
        prop_assert!((wrap(g.phi_rel - phi)).abs() < 1e-12);
        // Optimizing the virtual Z can only help.
        let o = average_gate_fidelity(&m, VirtualZ::Optimize(0.0, 0.0));
        prop_assert!(o.infidelity <= g.infidelity + 1e-12);
    }

    #[test]
    fn fixed_phases_are_fully_correctable(p00 in -3.0f64..3.0, p01 in -3.0f64..3.0, p10 in -3.0f64..3.0) {
        let m = phased([p00, p01, p10, p01 + p10 - p00]);
        let g = average_gate_fidelity(&m, VirtualZ::Optimize(0.1, -0.2));
        prop_assert!(g.infidelity.abs() < 1e-12);
    }

    #[test]
    fn fidelity_bounded_for_unitaries(h in proptest::collection::vec(-1.0f64..1.0, 32)) {
        // U = exp(−iH) for a random Hermitian H.
        let mut hm = Matrix4::<Complex64>::zeros();
        for i in 0..4 {
            for j in 0..4 {
                hm[(i, j)] = c(h[4 * i + j], h[16 + 4 * i + j]);
            }
        }
        let herm = (hm + hm.adjoint()) * c(0.5, 0.0);
        let u = (herm * c(0.0, -1.0)).exp();
        let g = average_gate_fidelity(&u, VirtualZ::Optimize(0.0, 0.0));
        prop_assert!(g.fidelity <= 1.0 + 1e-12);
        prop_assert!(g.fidelity >= 0.2 - 1e-12);
        prop_assert!(g.leakage < 1e-12);
    }
}
