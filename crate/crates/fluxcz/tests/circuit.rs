use approx::assert_relative_eq;
use fluxcz::circuit::*;
use fluxcz::error::Error;
use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::PI;

fn table_fluxonium(e_j: f64) -> FluxoniumSpec {
    FluxoniumSpec { e_c: 2.0, e_j, e_l: 0.3, phi_ext: PI, basis_dim: 110 }
}

/// Fourth-order finite-difference Hamiltonian on a uniform φ grid.
fn grid_spectrum(s: &FluxoniumSpec, n: usize, half_width: f64) -> (Vec<f64>, DMatrix<f64>, f64) {
    let h = 2.0 * half_width / (n - 1) as f64;
    let k = 4.0 * s.e_c / (h * h);
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let phi = -half_width + i as f64 * h;
        m[(i, i)] = k * 30.0 / 12.0 + 0.5 * s.e_l * phi * phi - s.e_j * (phi + s.phi_ext).cos();
        if i + 1 < n {
            m[(i, i + 1)] = -k * 16.0 / 12.0;
            m[(i + 1, i)] = -k * 16.0 / 12.0;
        }
        if i + 2 < n {
            m[(i, i + 2)] = k / 12.0;
            m[(i + 2, i)] = k / 12.0;
        }
    }
    let eig = SymmetricEigen::new(m);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, idx.len(), |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs, h)
}

#[test]
fn fluxonium_levels_match_grid_oracle() {
    let spec = table_fluxonium(7.1);
    let es = diagonalize_fluxonium(&spec).unwrap();
    let (grid, vecs, h) = grid_spectrum(&spec, 1400, 6.0 * PI);
    for k in 1..8 {
        assert_relative_eq!(es.energies[k], grid[k] - grid[0], epsilon = 2e-4, max_relative = 1e-4);
    }
    // |⟨0|n̂|1⟩| from the grid: n̂ = −i d/dφ.
    let (v0, v1) = (vecs.column(0), vecs.column(1));
    let n = v0.len();
    let mut d01 = 0.0;
    for i in 1..n - 1 {
        d01 += v0[i] * (v1[i + 1] - v1[i - 1]) / (2.0 * h);
    }
    assert_relative_eq!(es.charge_im[(0, 1)].abs(), d01.abs(), max_relative = 2e-3);
}

#[test]
fn harmonic_limit() {
    let spec = FluxoniumSpec { e_c: 1.0, e_j: 0.0, e_l: 0.5, phi_ext: 0.3, basis_dim: 60 };
    let es = diagonalize_fluxonium(&spec).unwrap();
    let wp = (8.0f64 * 1.0 * 0.5).sqrt();
    for k in 0..10 {
        assert_relative_eq!(es.energies[k], k as f64 * wp, epsilon = 1e-9);
    }
    let n01 = 1.0 / (2.0f64.sqrt() * spec.phi_osc());
    assert_relative_eq!(es.charge_im[(0, 1)].abs(), n01, max_relative = 1e-9);
    assert!(es.charge_im[(0, 2)].abs() < 1e-9);
}

#[test]
fn half_flux_parity_selection_rule() {
    let es = diagonalize_fluxonium(&table_fluxonium(7.2)).unwrap();
    let n = &es.charge_im;
    for i in 0..10 {
        for j in 0..10 {
            if (i + j) % 2 == 0 {
                assert!(n[(i, j)].abs() < 1e-8, "n[{i},{j}] = {}", n[(i, j)]);
            }
        }
    }
    assert!(n[(0, 1)].abs() > 1e-3 && n[(1, 2)].abs() > 0.1);
    let phase = es.phase.as_ref().unwrap();
    assert!(phase[(0, 2)].abs() < 1e-8 && phase[(0, 1)].abs() > 1.0);
}

#[test]
fn charge_is_antisymmetric_phase_symmetric() {
    let es = diagonalize_fluxonium(&table_fluxonium(7.1)).unwrap();
    assert!(fluxcz::linalg::antisymmetry_defect(&es.charge_im) < 1e-12);
    assert!(fluxcz::linalg::asymmetry(es.phase.as_ref().unwrap()) < 1e-12);
    assert_eq!(es.energies[0], 0.0);
    assert!(es.energies.windows(2).all(|w| w[1] >= w[0]));
    assert!(es.converged >= 10);
}

#[test]
fn flux_mirror_symmetry() {
    let mut a = table_fluxonium(7.1);
    let mut b = a;
    a.phi_ext = PI + 0.01;
    b.phi_ext = PI - 0.01;
    let (ea, eb) = (diagonalize_fluxonium(&a).unwrap(), diagonalize_fluxonium(&b).unwrap());
    for k in 0..8 {
        assert_relative_eq!(ea.energies[k], eb.energies[k], epsilon = 1e-9);
    }
}

#[test]
fn too_small_basis_is_reported() {
    let spec = FluxoniumSpec { basis_dim: 20, ..table_fluxonium(7.1) };
    match diagonalize_fluxonium(&spec) {
        Err(Error::BasisUnderflow { dim, .. }) => assert_eq!(dim, 24),
        other => panic!("expected BasisUnderflow, got {other:?}"),
    }
}

#[test]
fn invalid_parameters_rejected() {
    let good = table_fluxonium(7.1);
    for bad in [
        FluxoniumSpec { e_c: 0.0, ..good },
        FluxoniumSpec { e_l: -1.0, ..good },
        FluxoniumSpec { e_j: -0.1, ..good },
        FluxoniumSpec { phi_ext: f64::NAN, ..good },
        FluxoniumSpec { basis_dim: 10, ..good },
    ] {
        assert!(diagonalize_fluxonium(&bad).is_err());
    }
    let r = ResonatorSpec { omega_c: 7.0, impedance: 0.0, basis_dim: 8 };
    assert!(resonator_spectrum(&r).is_err());
}

#[test]
fn resonator_ladder() {
    let r = ResonatorSpec { omega_c: 7.08, impedance: 190.0, basis_dim: 8 };
    let es = resonator_spectrum(&r).unwrap();
    // √(R_K/16πZ) at 190 Ω
    assert_relative_eq!(r.n_zpf(), 1.6440, max_relative = 1e-3);
    for k in 1..8 {
        assert_relative_eq!(es.energies[k], k as f64 * 7.08, epsilon = 1e-12);
        assert_relative_eq!(es.charge_im[(k - 1, k)].abs(), r.n_zpf() * (k as f64).sqrt(), max_relative = 1e-12);
    }
    let z_back = fluxcz::units::R_K / (16.0 * PI * r.n_zpf().powi(2));
    assert_relative_eq!(z_back, 190.0, max_relative = 1e-12);
}
