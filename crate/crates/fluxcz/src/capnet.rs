//! Capacitance networks → charging energies, charge couplings and loaded resonator.
//!
//! Units: capacitances in fF, energies in GHz. With e²/h = 1/R_K the kinetic term
//! ½(2e)² nᵀC⁻¹n becomes 4E_C,i n_i² + Σ_{i<j} J_ij n_i n_j with
//!     E_C,i = (e²/h)(C⁻¹)_ii / 2,   J_ij = 4 (e²/h)(C⁻¹)_ij,
//! and e²/h = E2H_GHZ_FF GHz·fF.

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::circuit::{FluxoniumSpec, ResonatorSpec};
use crate::composite::{build_composite_with, interaction_constants, CircuitSpec, CompositeOptions};
use crate::error::{Error, Result};
use crate::units::{E2H_GHZ_FF, TWO_PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    Grounded,
    Differential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacitanceNetwork {
    pub topology: Topology,
    /// Fluxonium capacitance (to ground, or across the pads when differential).
    pub c_f: f64,
    /// Each pad's parasitic capacitance to ground (differential only).
    #[serde(default)]
    pub c_fp: f64,
    pub c_c: f64,
    pub c_ab: f64,
    /// Unloaded resonator impedance (Ω).
    pub z_in: f64,
    /// Unloaded resonator frequency (GHz).
    pub omega_in: f64,
}

impl CapacitanceNetwork {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c_f", self.c_f), ("c_fp", self.c_fp), ("c_c", self.c_c), ("c_ab", self.c_ab)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, "capacitance must be ≥ 0 and finite"));
            }
        }
        if !(self.z_in > 0.0) || !(self.omega_in > 0.0) {
            return Err(Error::invalid("resonator", "z_in and omega_in must be > 0"));
        }
        if self.topology == Topology::Grounded && self.c_fp != 0.0 {
            return Err(Error::invalid("c_fp", "only meaningful for the differential topology"));
        }
        Ok(())
    }

    /// C_r = 1/(2π f Z) in fF.
    pub fn c_r(&self) -> f64 {
        1e6 / (TWO_PI * self.omega_in * self.z_in)
    }

    /// L_r = Z/(2π f) in nH.
    pub fn l_r(&self) -> f64 {
        self.z_in / (TWO_PI * self.omega_in)
    }

    pub fn with_c_ab(&self, c_ab: f64) -> Self {
        CapacitanceNetwork { c_ab, ..*self }
    }
}

/// Node-basis capacitance matrix: [A, r, B] (grounded) or
/// [A₁, A₂, r, B₁, B₂] (differential).
pub fn build_matrix(net: &CapacitanceNetwork) -> Result<DMatrix<f64>> {
    net.validate()?;
    let (cf, cfp, cc, cab, cr) = (net.c_f, net.c_fp, net.c_c, net.c_ab, net.c_r());
    Ok(match net.topology {
        Topology::Grounded => DMatrix::from_row_slice(3, 3, &[
            cf + cc + cab, -cc, -cab, //
            -cc, cr + 2.0 * cc, -cc, //
            -cab, -cc, cf + cc + cab,
        ]),
        Topology::Differential => DMatrix::from_row_slice(5, 5, &[
            cf + cfp, -cf, 0.0, 0.0, 0.0, //
            -cf, cf + cfp + cc + cab, -cc, 0.0, -cab, //
            0.0, -cc, cr + 2.0 * cc, 0.0, -cc, //
            0.0, 0.0, 0.0, cfp + cf, -cf, //
            0.0, -cab, -cc, -cf, cf + cfp + cc + cab,
        ]),
    })
}

/// Sum/difference mode matrix M (symmetric and orthogonal).
pub fn mode_matrix() -> DMatrix<f64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_row_slice(5, 5, &[
        h, h, 0.0, 0.0, 0.0, //
        h, -h, 0.0, 0.0, 0.0, //
        0.0, 0.0, 1.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, h, h, //
        0.0, 0.0, 0.0, h, -h,
    ])
}

/// C̃ = (Mᵀ)⁻¹ C M⁻¹ = M C M for the orthogonal, symmetric M.
pub fn differential_transform(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if c.shape() != (5, 5) {
        return Err(Error::DimensionMismatch { expected: 5, got: c.nrows() });
    }
    let m = mode_matrix();
    Ok(&m * c * &m)
}

/// Capacitance matrix on the (A, resonator, B) modes; differential sum modes dropped.
pub fn truncated_matrix(net: &CapacitanceNetwork) -> Result<Matrix3<f64>> {
    let c = build_matrix(net)?;
    Ok(match net.topology {
        Topology::Grounded => Matrix3::from_fn(|i, j| c[(i, j)]),
        Topology::Differential => {
            let t = differential_transform(&c)?;
            let keep = [1, 2, 4];
            Matrix3::from_fn(|i, j| t[(keep[i], keep[j])])
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCircuit {
    pub e_c_a: f64,
    pub e_c_b: f64,
    pub z_c_out: f64,
    pub omega_c_out: f64,
    /// Signed couplings in the mode basis of the truncated matrix.
    pub j_ac: f64,
    pub j_bc: f64,
    pub j_ab: f64,
    /// |J_ac|·n_c,01 at the loaded impedance.
    pub j_c_nc01: f64,
}

pub fn effective_circuit(net: &CapacitanceNetwork) -> Result<EffectiveCircuit> {
    let c = truncated_matrix(net)?;
    let inv = c.try_inverse().ok_or_else(|| Error::Singular("truncated capacitance matrix".into()))?;
    if (0..3).any(|i| !(inv[(i, i)] > 0.0)) {
        return Err(Error::Singular("non-positive effective capacitance".into()));
    }
    let c_eff_r = 1.0 / inv[(1, 1)];
    let l_r = net.l_r();
    // √(nH/fF) = 1e3 Ω; 1/(2π√(nH·fF)) = 1e3 GHz
    let z = 1e3 * (l_r / c_eff_r).sqrt();
    let res = ResonatorSpec { omega_c: 1.0, impedance: z, basis_dim: 8 };
    let j_ac = 4.0 * E2H_GHZ_FF * inv[(0, 1)];
    Ok(EffectiveCircuit {
        e_c_a: E2H_GHZ_FF * inv[(0, 0)] / 2.0,
        e_c_b: E2H_GHZ_FF * inv[(2, 2)] / 2.0,
        z_c_out: z,
        omega_c_out: 1e3 / (TWO_PI * (l_r * c_eff_r).sqrt()),
        j_ac,
        j_bc: 4.0 * E2H_GHZ_FF * inv[(2, 1)],
        j_ab: 4.0 * E2H_GHZ_FF * inv[(0, 2)],
        j_c_nc01: j_ac.abs() * res.n_zpf(),
    })
}

impl EffectiveCircuit {
    /// Circuit with the given inductive parameters. Charge signs are flipped per
    /// fluxonium so J_ac, J_bc ≥ 0; sign(J_ac J_bc J_AB) is invariant.
    pub fn to_circuit_spec(&self, a: &FluxoniumSpec, b: &FluxoniumSpec, resonator_dim: usize) -> CircuitSpec {
        let (sa, sb) = (self.j_ac.signum(), self.j_bc.signum());
        CircuitSpec {
            fluxonium_a: FluxoniumSpec { e_c: self.e_c_a, ..*a },
            fluxonium_b: FluxoniumSpec { e_c: self.e_c_b, ..*b },
            resonator: ResonatorSpec { omega_c: self.omega_c_out, impedance: self.z_c_out, basis_dim: resonator_dim },
            j_ac: self.j_ac.abs(),
            j_bc: self.j_bc.abs(),
            j_ab: self.j_ab * sa * sb,
        }
    }
}

/// Exact η of the network's circuit.
pub fn network_eta(net: &CapacitanceNetwork, a: &FluxoniumSpec, b: &FluxoniumSpec, opts: &CompositeOptions) -> Result<f64> {
    let eff = effective_circuit(net)?;
    let spec = eff.to_circuit_spec(a, b, opts.dims.c);
    Ok(interaction_constants(&build_composite_with(&spec, opts)?)?.eta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CabBound {
    /// Largest C_AB (fF) with |η| ≤ threshold.
    Finite(f64),
    /// |η| stays below threshold up to the search limit.
    Unbounded,
}

/// Largest C_AB ≥ the network's own value with |η| ≤ threshold (GHz): expanding
/// bracket, then bisection to `tol` fF on the exact-η pipeline.
pub fn zz_bound_cab(
    net: &CapacitanceNetwork,
    a: &FluxoniumSpec,
    b: &FluxoniumSpec,
    threshold: f64,
    opts: &CompositeOptions,
    tol: f64,
) -> Result<CabBound> {
    if !(threshold > 0.0) {
        return Err(Error::invalid("threshold", "must be > 0"));
    }
    if !threshold.is_finite() {
        return Ok(CabBound::Unbounded);
    }
    let eta = |c: f64| network_eta(&net.with_c_ab(c), a, b, opts);
    let mut lo = net.c_ab;
    if eta(lo)?.abs() > threshold {
        return Err(Error::Unreachable(format!("|η| already exceeds {threshold:e} GHz at C_AB = {lo} fF")));
    }
    let limit = 10.0 * (net.c_f + net.c_c).max(1.0);
    let mut hi = (2.0 * lo).max(0.02);
    loop {
        if eta(hi)?.abs() > threshold {
            break;
        }
        if hi >= limit {
            return Ok(CabBound::Unbounded);
        }
        lo = hi;
        hi = (2.0 * hi).min(limit);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if eta(mid)?.abs() > threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CabBound::Finite(0.5 * (lo + hi)))
}
