//! Single-element spectra: fluxonium in the oscillator basis of its L–C part,
//! and a linear resonator.
//!
//! Charge operators of both elements are purely imaginary in the gauge used here
//! (real eigenvectors), so they are stored as the real antisymmetric matrix
//! `charge_im` with n̂ = i·charge_im.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{congruence, eigh};
use crate::units::R_K;

fn default_fluxonium_dim() -> usize {
    110
}

fn default_resonator_dim() -> usize {
    8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxoniumSpec {
    pub e_c: f64,
    pub e_j: f64,
    pub e_l: f64,
    /// External flux as a phase (rad); π is the sweet spot.
    #[serde(default = "pi")]
    pub phi_ext: f64,
    #[serde(default = "default_fluxonium_dim")]
    pub basis_dim: usize,
}

fn pi() -> f64 {
    std::f64::consts::PI
}

impl FluxoniumSpec {
    pub fn new(e_c: f64, e_j: f64, e_l: f64) -> Self {
        FluxoniumSpec { e_c, e_j, e_l, phi_ext: pi(), basis_dim: default_fluxonium_dim() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e_c > 0.0) {
            return Err(Error::invalid("e_c", "must be > 0"));
        }
        // E_J = 0 is the harmonic limit and allowed for testing
        if !(self.e_j >= 0.0) {
            return Err(Error::invalid("e_j", "must be ≥ 0"));
        }
        if !(self.e_l > 0.0) {
            return Err(Error::invalid("e_l", "must be > 0"));
        }
        if !self.phi_ext.is_finite() {
            return Err(Error::invalid("phi_ext", "must be finite"));
        }
        if self.basis_dim < 20 {
            return Err(Error::invalid("basis_dim", "must be ≥ 20"));
        }
        Ok(())
    }

    /// Oscillator length φ_osc = (8E_C/E_L)^{1/4}.
    pub fn phi_osc(&self) -> f64 {
        (8.0 * self.e_c / self.e_l).powf(0.25)
    }

    pub fn plasma_frequency(&self) -> f64 {
        (8.0 * self.e_c * self.e_l).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorSpec {
    pub omega_c: f64,
    /// Characteristic impedance Z_r (Ω).
    pub impedance: f64,
    #[serde(default = "default_resonator_dim")]
    pub basis_dim: usize,
}

impl ResonatorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_c > 0.0) {
            return Err(Error::invalid("omega_c", "must be > 0"));
        }
        if !(self.impedance > 0.0) {
            return Err(Error::invalid("impedance", "must be > 0"));
        }
        if self.basis_dim < 5 {
            return Err(Error::invalid("resonator basis_dim", "must be ≥ 5"));
        }
        Ok(())
    }

    /// |⟨1|n̂_c|0⟩| = √(R_K/16πZ_r).
    pub fn n_zpf(&self) -> f64 {
        (R_K / (16.0 * std::f64::consts::PI * self.impedance)).sqrt()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElementSpectrum {
    /// Ascending, ground state at zero (GHz).
    pub energies: Vec<f64>,
    /// n̂ = i·charge_im in the eigenbasis; real antisymmetric.
    pub charge_im: DMatrix<f64>,
    /// φ̂ in the eigenbasis (fluxonium only).
    pub phase: Option<DMatrix<f64>>,
    /// Levels whose energies are converged to 1 kHz.
    pub converged: usize,
}

impl ElementSpectrum {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn charge_matrix(&self) -> DMatrix<Complex64> {
        self.charge_im.map(|x| Complex64::new(0.0, x))
    }

    /// n_{jk} = ⟨j|n̂|k⟩ in the gauge where each eigenvector's largest component is
    /// real positive.
    pub fn charge_matrix_element(&self, j: usize, k: usize) -> Result<Complex64> {
        for idx in [j, k] {
            if idx >= self.converged {
                return Err(Error::IndexOutOfRange { index: idx, available: self.converged });
            }
        }
        Ok(Complex64::new(0.0, self.charge_im[(j, k)]))
    }

    /// |n_{jk}| without range checks.
    pub fn n_abs(&self, j: usize, k: usize) -> f64 {
        self.charge_im[(j, k)].abs()
    }

    pub fn omega(&self, j: usize, k: usize) -> f64 {
        self.energies[k] - self.energies[j]
    }

    /// Keep the lowest `k` levels.
    pub fn truncated(&self, k: usize) -> ElementSpectrum {
        let k = k.min(self.dim());
        ElementSpectrum {
            energies: self.energies[..k].to_vec(),
            charge_im: self.charge_im.view((0, 0), (k, k)).into_owned(),
            phase: self.phase.as_ref().map(|p| p.view((0, 0), (k, k)).into_owned()),
            converged: self.converged.min(k),
        }
    }
}

/// Matrix elements of cos φ̂ and sin φ̂ in the oscillator basis, φ̂ = φ_osc(a+a†)/√2.
///
/// ⟨m|e^{iφ̂}|n⟩ = i^k γ^k √(n!/m!) e^{−γ²/2} L_n^{(k)}(γ²) for m = n+k, γ = φ_osc/√2.
/// The normalized Laguerre values q_n = √(n!/(n+k)!) L_n^{(k)} follow a stable
/// three-term recursion; all prefactors are combined in log space.
pub fn cos_sin_matrices(phi_osc: f64, dim: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let gamma = phi_osc / std::f64::consts::SQRT_2;
    let x = gamma * gamma;
    let mut cos = DMatrix::zeros(dim, dim);
    let mut sin = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        let kf = k as f64;
        let log_pref = kf * gamma.ln() - 0.5 * x - 0.5 * ln_gamma(kf + 1.0);
        let mut prev = log_pref.exp();
        let mut cur = 0.0;
        // i^k: (re, im)
        let (re, im) = match k % 4 {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
        for n in 0..dim - k {
            let r = if n == 0 {
                prev
            } else if n == 1 {
                cur = (1.0 + kf - x) / (kf + 1.0).sqrt() * prev;
                cur
            } else {
                let nf = (n - 1) as f64;
                let next = ((2.0 * nf + 1.0 + kf - x) * cur - (nf * (nf + kf)).sqrt() * prev)
                    / ((nf + 1.0) * (nf + 1.0 + kf)).sqrt();
                prev = cur;
                cur = next;
                next
            };
            let m = n + k;
            cos[(m, n)] = re * r;
            cos[(n, m)] = re * r;
            sin[(m, n)] = im * r;
            sin[(n, m)] = im * r;
        }
    }
    (cos, sin)
}

/// Ladder operators in a truncated Fock basis: (a + a†) and (a† − a).
fn ladder_sum_diff(dim: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut sum = DMatrix::zeros(dim, dim);
    let mut diff = DMatrix::zeros(dim, dim);
    for m in 0..dim - 1 {
        let s = ((m + 1) as f64).sqrt();
        sum[(m + 1, m)] = s;
        sum[(m, m + 1)] = s;
        diff[(m + 1, m)] = s;
        diff[(m, m + 1)] = -s;
    }
    (sum, diff)
}

/// Fluxonium Hamiltonian 4E_C n̂² + E_L φ̂²/2 − E_J cos(φ̂ + φ_ext) in the oscillator basis.
pub fn fluxonium_hamiltonian(spec: &FluxoniumSpec) -> DMatrix<f64> {
    let dim = spec.basis_dim;
    let (cos, sin) = cos_sin_matrices(spec.phi_osc(), dim);
    let wp = spec.plasma_frequency();
    let (ce, se) = (spec.phi_ext.cos(), spec.phi_ext.sin());
    let mut h = (cos * ce - sin * se) * (-spec.e_j);
    for m in 0..dim {
        h[(m, m)] += wp * (m as f64 + 0.5);
    }
    h
}

fn raw_fluxonium(spec: &FluxoniumSpec) -> (Vec<f64>, DMatrix<f64>) {
    eigh(fluxonium_hamiltonian(spec))
}

/// Per-level transition-energy shift (GHz) when the basis grows by 20%, for
/// the lowest `levels` states.
pub fn fluxonium_convergence(spec: &FluxoniumSpec, levels: usize) -> Vec<f64> {
    let (e1, _) = raw_fluxonium(spec);
    let mut big = *spec;
    big.basis_dim = (spec.basis_dim as f64 * 1.2).ceil() as usize;
    let (e2, _) = raw_fluxonium(&big);
    (0..levels.min(e1.len())).map(|i| ((e1[i] - e1[0]) - (e2[i] - e2[0])).abs()).collect()
}

const CONVERGENCE_TOL: f64 = 1e-6;

pub fn diagonalize_fluxonium(spec: &FluxoniumSpec) -> Result<ElementSpectrum> {
    spec.validate()?;
    let dim = spec.basis_dim;
    let (vals, vecs) = raw_fluxonium(spec);

    let shifts = fluxonium_convergence(spec, dim / 2);
    if let Some((level, &shift)) =
        shifts.iter().take(10).enumerate().find(|(_, s)| **s > CONVERGENCE_TOL)
    {
        return Err(Error::BasisUnderflow {
            level,
            shift_khz: shift * 1e6,
            dim: (dim as f64 * 1.2).ceil() as usize,
        });
    }
    let converged = shifts.iter().take_while(|s| **s <= CONVERGENCE_TOL).count();

    let phi_osc = spec.phi_osc();
    let (sum, diff) = ladder_sum_diff(dim);
    let phase = congruence(&vecs, &(sum * (phi_osc / std::f64::consts::SQRT_2)));
    let charge_im = congruence(&vecs, &(diff / (std::f64::consts::SQRT_2 * phi_osc)));
    let e0 = vals[0];
    Ok(ElementSpectrum {
        energies: vals.iter().map(|e| e - e0).collect(),
        charge_im,
        phase: Some(phase),
        converged,
    })
}

pub fn resonator_spectrum(spec: &ResonatorSpec) -> Result<ElementSpectrum> {
    spec.validate()?;
    let dim = spec.basis_dim;
    let (_, diff) = ladder_sum_diff(dim);
    Ok(ElementSpectrum {
        energies: (0..dim).map(|k| k as f64 * spec.omega_c).collect(),
        charge_im: diff * spec.n_zpf(),
        phase: None,
        converged: dim,
    })
}
