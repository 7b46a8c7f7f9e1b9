//! Average gate fidelity of a (possibly leaky) 4×4 computational block against
//! CZ, with virtual-Z correction.

use nalgebra::Matrix4;
use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;
use serde::{Deserialize, Serialize};

const CZ_SIGN: [f64; 4] = [1.0, 1.0, 1.0, -1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VirtualZ {
    /// No single-qubit correction.
    Off,
    /// Fixed (θ_A, θ_B).
    Fixed(f64, f64),
    /// Maximize F, starting from the given seed.
    Optimize(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub fidelity: f64,
    pub infidelity: f64,
    /// Mean population leaving the computational block.
    pub leakage: f64,
    pub virtual_z: (f64, f64),
    pub phi_rel: f64,
}

/// Diagonal of U_z: basis order 00, 01, 10, 11 with the first digit on A.
pub fn virtual_z_diag(theta_a: f64, theta_b: f64) -> [Complex64; 4] {
    [
        Complex64::new(1.0, 0.0),
        Complex64::from_polar(1.0, theta_b),
        Complex64::from_polar(1.0, theta_a),
        Complex64::from_polar(1.0, theta_a + theta_b),
    ]
}

fn trace_term(m: &Matrix4<Complex64>, ta: f64, tb: f64) -> Complex64 {
    let z = virtual_z_diag(ta, tb);
    (0..4).map(|k| z[k] * m[(k, k)] * CZ_SIGN[k]).sum()
}

/// F = [Tr(MM†) + |Tr(CZ† U_z M)|²]/20.
pub fn fidelity_at(m: &Matrix4<Complex64>, ta: f64, tb: f64) -> f64 {
    let tr_mm: f64 = m.iter().map(|x| x.norm_sqr()).sum();
    (tr_mm + trace_term(m, ta, tb).norm_sqr()) / 20.0
}

/// Maximize F over (θ_A, θ_B): coordinate ascent from the seed and from a coarse
/// 4×4 grid of starts (the landscape has local maxima when φ is large).
pub fn optimize_virtual_z(m: &Matrix4<Complex64>, seed: (f64, f64)) -> (f64, f64) {
    let d: Vec<Complex64> = (0..4).map(|k| m[(k, k)] * CZ_SIGN[k]).collect();
    let grid = (0..16).map(|k| (seed.0 + (k / 4) as f64 * FRAC_PI_2, seed.1 + (k % 4) as f64 * FRAC_PI_2));
    let mut best = coordinate_ascent(m, &d, seed);
    let mut f_best = fidelity_at(m, best.0, best.1);
    for start in grid.skip(1) {
        let cand = coordinate_ascent(m, &d, start);
        let f = fidelity_at(m, cand.0, cand.1);
        if f > f_best + 1e-15 {
            best = cand;
            f_best = f;
        }
    }
    best
}

/// Each 1-D problem |P + e^{iθ}Q| is solved exactly.
fn coordinate_ascent(m: &Matrix4<Complex64>, d: &[Complex64], seed: (f64, f64)) -> (f64, f64) {
    let (mut ta, mut tb) = seed;
    let mut last = fidelity_at(m, ta, tb);
    for _ in 0..200 {
        let eb = Complex64::from_polar(1.0, tb);
        let (p, q) = (d[0] + eb * d[1], d[2] + eb * d[3]);
        if q.norm() > 0.0 {
            ta = p.arg() - q.arg();
        }
        let ea = Complex64::from_polar(1.0, ta);
        let (p, q) = (d[0] + ea * d[2], d[1] + ea * d[3]);
        if q.norm() > 0.0 {
            tb = p.arg() - q.arg();
        }
        let f = fidelity_at(m, ta, tb);
        if (f - last).abs() < 1e-16 {
            break;
        }
        last = f;
    }
    (wrap(ta), wrap(tb))
}

/// Wrap into (−π, π].
pub fn wrap(x: f64) -> f64 {
    let tp = 2.0 * std::f64::consts::PI;
    let mut y = x.rem_euclid(tp);
    if y > std::f64::consts::PI {
        y -= tp;
    }
    y
}

pub fn leakage_per_input(m: &Matrix4<Complex64>, column_norms: &[f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for a in 0..4 {
        let inside: f64 = (0..4).map(|r| m[(r, a)].norm_sqr()).sum();
        out[a] = (column_norms[a] - inside).max(0.0);
    }
    out
}

/// Relative phase φ = φ_11 + φ_00 − φ_01 − φ_10 read from the diagonal, with the
/// CZ sign removed (convention |ij⟩ → e^{−iφ_ij}|ij⟩).
pub fn diagonal_phi_rel(m: &Matrix4<Complex64>) -> f64 {
    let z = m[(3, 3)] * -1.0 * m[(0, 0)] * m[(1, 1)].conj() * m[(2, 2)].conj();
    -z.arg()
}

pub fn average_gate_fidelity(m: &Matrix4<Complex64>, vz: VirtualZ) -> GateResult {
    let (ta, tb) = match vz {
        VirtualZ::Off => (0.0, 0.0),
        VirtualZ::Fixed(a, b) => (a, b),
        VirtualZ::Optimize(a, b) => optimize_virtual_z(m, (a, b)),
    };
    let f = fidelity_at(m, ta, tb);
    let leak = leakage_per_input(m, &[1.0; 4]);
    GateResult {
        fidelity: f,
        infidelity: 1.0 - f,
        leakage: leak.iter().sum::<f64>() / 4.0,
        virtual_z: (ta, tb),
        phi_rel: diagonal_phi_rel(m),
    }
}
