//! Gaussian pulse with linear ramps, DRAG quadrature, and the closed-form
//! Stark-phase / interference-error model used to seed calibration.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::composite::InteractionConstants;
use crate::error::{Error, Result};
use crate::units::TWO_PI;

/// Gate duration in units of τ.
pub const GATE_OVER_TAU: f64 = 2.2;
/// Ramp length in units of τ.
pub const RAMP_OVER_TAU: f64 = 0.1;

/// Constants of the phase model: φ_11 = −C_11/(τα) − C_DET·π·δω·τ.
pub const C_11: f64 = 1.58;
pub const C_DET: f64 = 1.03;
/// Interference-error bracket coefficients.
pub const C1: f64 = 0.612;
pub const C2: f64 = 0.485;
/// Optimal-detuning bracket coefficients.
pub const D1: f64 = -0.488;
pub const D2: f64 = -0.387;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Gaussian scale τ (ns).
    pub tau: f64,
    /// Peak amplitude Ω₀ (GHz).
    pub amplitude: f64,
    /// δω from the |1,0,1⟩→|1,1,1⟩ resonance (GHz).
    #[serde(default)]
    pub detuning: f64,
    #[serde(default)]
    pub drag_scale: f64,
    /// α in the DRAG denominator (GHz); ignored when drag_scale = 0.
    #[serde(default)]
    pub drag_alpha: f64,
    #[serde(default = "one")]
    pub amplitude_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl PulseSpec {
    pub fn with_gate_time(t_gate: f64, amplitude: f64) -> Self {
        PulseSpec {
            tau: t_gate / GATE_OVER_TAU,
            amplitude,
            detuning: 0.0,
            drag_scale: 0.0,
            drag_alpha: 0.0,
            amplitude_scale: 1.0,
        }
    }

    pub fn t_gate(&self) -> f64 {
        GATE_OVER_TAU * self.tau
    }

    /// Window [t_start, t_end] centred on the Gaussian peak.
    pub fn window(&self) -> (f64, f64) {
        let h = 0.5 * self.t_gate();
        (-h, h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::invalid("tau", "must be > 0"));
        }
        if !self.amplitude.is_finite() || !self.detuning.is_finite() {
            return Err(Error::invalid("amplitude", "must be finite"));
        }
        if self.drag_scale != 0.0 && self.drag_alpha == 0.0 {
            return Err(Error::invalid("drag_alpha", "must be nonzero when drag_scale ≠ 0"));
        }
        Ok(())
    }
}

/// Ω(t): Gaussian on [−τ, τ], linear to zero over the outer τ/10.
pub fn envelope(p: &PulseSpec, t: f64) -> f64 {
    let tau = p.tau;
    let at = t.abs();
    let edge = (1.0 + RAMP_OVER_TAU) * tau;
    if at <= tau {
        p.amplitude * (-4.0 * t * t / (tau * tau)).exp()
    } else if at < edge {
        p.amplitude * (-4.0f64).exp() * (edge - at) / (RAMP_OVER_TAU * tau)
    } else {
        0.0
    }
}

/// dΩ/dt of the ramped envelope (one-sided value at the joints is irrelevant
/// for fixed-step integration; the interior formula is used at |t| = τ).
pub fn envelope_derivative(p: &PulseSpec, t: f64) -> f64 {
    let tau = p.tau;
    let at = t.abs();
    let edge = (1.0 + RAMP_OVER_TAU) * tau;
    if at <= tau {
        -8.0 * t / (tau * tau) * p.amplitude * (-4.0 * t * t / (tau * tau)).exp()
    } else if at < edge {
        -t.signum() * p.amplitude * (-4.0f64).exp() / (RAMP_OVER_TAU * tau)
    } else {
        0.0
    }
}

/// a·(Ω cos 2πω_d t + d·Ω̇ sin 2πω_d t / α).
pub fn drag_drive(p: &PulseSpec, t: f64, omega_d: f64) -> f64 {
    let (s, c) = (TWO_PI * omega_d * t).sin_cos();
    let mut v = envelope(p, t) * c;
    if p.drag_scale != 0.0 {
        v += p.drag_scale * envelope_derivative(p, t) * s / p.drag_alpha;
    }
    p.amplitude_scale * v
}

/// Closed-form seed Ω₀ = 2/(√π τ |⟨1,1,1|n̂_c|1,0,1⟩|): area ∫Ω·m dt = 1, one full
/// 2π Rabi cycle of the driven transition in cyclic units.
pub fn seed_amplitude(tau: f64, m111: f64) -> f64 {
    2.0 / (std::f64::consts::PI.sqrt() * tau * m111)
}

/// Population-transfer angle θ₀(t) = (π/2)(1 + erf(2t/τ)).
pub fn theta0(t: f64, tau: f64) -> f64 {
    0.5 * std::f64::consts::PI * (1.0 + erf(2.0 * t / tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarkPrediction {
    /// φ_00, φ_01, φ_10.
    pub phi_ij: [f64; 3],
    pub phi_11: f64,
    pub phi_rel: f64,
    pub epsilon_phi: f64,
    pub delta_opt: f64,
}

/// φ_ij = √(π/2)|m_ij|²/(δχ_ij τ) for ij = 00, 01, 10.
pub fn stark_phases(k: &InteractionConstants, m: &[f64; 3], tau: f64) -> Result<[f64; 3]> {
    let dchi = k.delta_chi();
    let mut out = [0.0; 3];
    for i in 0..3 {
        if dchi[i] == 0.0 {
            return Err(Error::invalid("delta_chi", "zero δχ_ij"));
        }
        out[i] = stark_phase(m[i], dchi[i], tau);
    }
    Ok(out)
}

pub fn stark_phase(m: f64, delta_chi: f64, tau: f64) -> f64 {
    (std::f64::consts::PI / 2.0).sqrt() * m * m / (delta_chi * tau)
}

pub fn phi_11(alpha: f64, tau: f64, detuning: f64) -> f64 {
    -C_11 / (tau * alpha) - C_DET * std::f64::consts::PI * detuning * tau
}

pub fn relative_phase(phi_00: f64, phi_01: f64, phi_10: f64, phi_11: f64) -> f64 {
    phi_11 + phi_00 - phi_01 - phi_10
}

/// Exact 1 − (14 + 6cos φ)/20; ≈ 3φ²/20 for small φ.
pub fn epsilon_phi(phi: f64) -> f64 {
    1.0 - (14.0 + 6.0 * phi.cos()) / 20.0
}

fn dispersive_bracket(k: &InteractionConstants, m: &[f64; 3]) -> f64 {
    let [d00, d01, d10] = k.delta_chi();
    m[1] * m[1] / d01 + m[2] * m[2] / d10 - m[0] * m[0] / d00
}

pub fn interference_error(k: &InteractionConstants, m: &[f64; 3], tau: f64) -> f64 {
    (C1 / k.alpha + C2 * dispersive_bracket(k, m)).powi(2) / (tau * tau)
}

pub fn optimal_detuning(k: &InteractionConstants, m: &[f64; 3], tau: f64) -> f64 {
    (D1 / k.alpha + D2 * dispersive_bracket(k, m)) / (tau * tau)
}

pub fn predict(k: &InteractionConstants, m: &[f64; 3], tau: f64, detuning: f64) -> Result<StarkPrediction> {
    let phi_ij = stark_phases(k, m, tau)?;
    let p11 = phi_11(k.alpha, tau, detuning);
    let rel = relative_phase(phi_ij[0], phi_ij[1], phi_ij[2], p11);
    Ok(StarkPrediction {
        phi_ij,
        phi_11: p11,
        phi_rel: rel,
        epsilon_phi: epsilon_phi(rel),
        delta_opt: optimal_detuning(k, m, tau),
    })
}
