//! Static imperfections: flux offsets with a frozen drive, E_J mistargeting with
//! recalibration, and the rms flux excursion of 1/f noise.

use serde::{Deserialize, Serialize};

use crate::composite::{CircuitSpec, CompositeOptions};
use crate::drive::PulseSpec;
use crate::error::{Error, Result};
use crate::optimize::{optimize_drive, OptimizerSettings};
use crate::par;
use crate::propagator::{gate_outcome, GateSystem, IntegratorSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseConvention {
    /// S(f) = A²/f integrated over f: σ² = A² ln(f_hi/f_lo).
    #[default]
    PerHertz,
    /// S(ω) = A²/ω integrated over ω/2π: σ² = A² ln(f_hi/f_lo)/2π.
    PerRadian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// µΦ₀.
    pub amplitude: f64,
    /// Hz.
    pub f_low: f64,
    pub f_high: f64,
    #[serde(default)]
    pub convention: NoiseConvention,
}

impl NoiseSpec {
    /// 5 µΦ₀, one hour to 100 ns.
    pub fn standard() -> Self {
        NoiseSpec { amplitude: 5.0, f_low: 1.0 / 3600.0, f_high: 1e7, convention: NoiseConvention::PerHertz }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) || !(self.f_low > 0.0) || !(self.f_high > self.f_low) {
            return Err(Error::invalid("noise", "need amplitude ≥ 0 and 0 < f_low < f_high"));
        }
        Ok(())
    }
}

/// rms flux excursion (µΦ₀).
pub fn flux_sigma(n: &NoiseSpec) -> Result<f64> {
    n.validate()?;
    let ln = (n.f_high / n.f_low).ln();
    Ok(match n.convention {
        NoiseConvention::PerHertz => n.amplitude * ln.sqrt(),
        NoiseConvention::PerRadian => n.amplitude * (ln / std::f64::consts::TAU).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxPoint {
    /// δφ_e (rad).
    pub offset: f64,
    pub infidelity: f64,
    pub leakage: f64,
    pub phi_rel: f64,
}

/// Which fluxonium's external flux is offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluxTarget {
    #[default]
    A,
    B,
}

/// ε_c(δφ) with the pulse frozen: the absolute drive frequency and amplitude
/// stay at their δφ = 0 calibration.
pub fn flux_offset_sweep(
    base: &CircuitSpec,
    opts: &CompositeOptions,
    d: usize,
    pulse: &PulseSpec,
    offsets: &[f64],
    target: FluxTarget,
    set: &IntegratorSettings,
) -> Vec<Result<FluxPoint>> {
    let omega_d = GateSystem::from_circuit(base, opts, d).map(|s| s.drive_frequency(pulse.detuning));
    par::map(offsets, |&dphi| {
        let omega_d = *omega_d.as_ref().map_err(|e| Error::Unreachable(format!("baseline: {e}")))?;
        let mut spec = *base;
        match target {
            FluxTarget::A => spec.fluxonium_a.phi_ext += dphi,
            FluxTarget::B => spec.fluxonium_b.phi_ext += dphi,
        }
        let sys = GateSystem::from_circuit(&spec, opts, d)?;
        let p = PulseSpec { detuning: omega_d - sys.omega_res, ..*pulse };
        let (_, g) = gate_outcome(&sys, &p, set)?;
        Ok(FluxPoint { offset: dphi, infidelity: g.infidelity, leakage: g.leakage, phi_rel: g.phi_rel })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EjPoint {
    pub e_j_a: f64,
    pub t_gate: f64,
    /// After full recalibration.
    pub infidelity: f64,
    /// With the nominal-E_J pulse (same absolute drive frequency).
    pub infidelity_fixed: f64,
    pub pulse: PulseSpec,
}

/// ε_c over (E_J^A, t_g), recalibrating the drive at every point.
pub fn ej_sweep(
    base: &CircuitSpec,
    opts: &CompositeOptions,
    d: usize,
    ej_values: &[f64],
    t_gates: &[f64],
    set: &IntegratorSettings,
    s: &OptimizerSettings,
) -> Result<Vec<EjPoint>> {
    let nominal = GateSystem::from_circuit(base, opts, d)?;
    let nominal_cal: Vec<_> = par::map(t_gates, |&t| optimize_drive(&nominal, t, None, set, s))
        .into_iter()
        .collect::<Result<_>>()?;
    let systems: Vec<GateSystem> = par::map(ej_values, |&ej| {
        let mut spec = *base;
        spec.fluxonium_a.e_j = ej;
        GateSystem::from_circuit(&spec, opts, d)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..ej_values.len()).flat_map(|i| (0..t_gates.len()).map(move |j| (i, j))).collect();
    par::map(&jobs, |&(i, j)| {
        let sys = &systems[i];
        let nom = &nominal_cal[j];
        let fixed = PulseSpec { detuning: nominal.drive_frequency(nom.pulse.detuning) - sys.omega_res, ..nom.pulse };
        let infidelity_fixed = gate_outcome(sys, &fixed, set)?.1.infidelity;
        let cal = optimize_drive(sys, t_gates[j], None, set, s)?;
        Ok(EjPoint { e_j_a: ej_values[i], t_gate: t_gates[j], infidelity: cal.infidelity(), infidelity_fixed, pulse: cal.pulse })
    })
    .into_iter()
    .collect()
}
