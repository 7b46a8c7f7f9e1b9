//! Physical constants and unit conventions.
//!
//! Energies are H/h in GHz, times in ns. A product GHz·ns counts cycles, so
//! every rotation angle picks up an explicit 2π.

/// von Klitzing constant h/e² (Ω).
pub const R_K: f64 = 25812.807;

/// e²/h expressed in GHz·fF: E/h = E2H_GHZ_FF / C[fF] for an energy e²/C.
pub const E2H_GHZ_FF: f64 = 1.0e6 / R_K;

/// k_B/h in GHz per kelvin.
pub const KB_OVER_H_GHZ_PER_K: f64 = 20.8366;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Flux offset in µΦ₀ to a phase offset in radians (δφ = 2π δΦ/Φ₀).
pub fn micro_phi0_to_rad(x: f64) -> f64 {
    TWO_PI * x * 1e-6
}

pub fn rad_to_micro_phi0(x: f64) -> f64 {
    x / TWO_PI * 1e6
}
