//! Closed-form estimates of the dispersive shifts, inherited anharmonicity and
//! ZZ interaction, fed by element matrix elements from the numerics.

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::composite::{CircuitSpec, ElementSet};
use crate::error::{Error, Result};
use crate::linalg::eigh;

/// Below this |denominator| (GHz) the dispersive formulas are refused.
pub const RESONANCE_GUARD: f64 = 0.010;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxoniumData {
    pub omega_01: f64,
    pub omega_12: f64,
    pub omega_23: f64,
    pub omega_03: f64,
    pub n_12: f64,
    pub n_03: f64,
}

/// Everything the estimators consume, read off the element spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationInputs {
    pub a: FluxoniumData,
    pub b: FluxoniumData,
    pub omega_c: f64,
    pub n_c01: f64,
    pub j_ac: f64,
    pub j_bc: f64,
    pub j_ab: f64,
}

impl PerturbationInputs {
    pub fn from_spec(spec: &CircuitSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self::from_elements(spec, &ElementSet::build(spec)?))
    }

    pub fn from_elements(spec: &CircuitSpec, el: &ElementSet) -> Self {
        let data = |s: &crate::circuit::ElementSpectrum| FluxoniumData {
            omega_01: s.omega(0, 1),
            omega_12: s.omega(1, 2),
            omega_23: s.omega(2, 3),
            omega_03: s.omega(0, 3),
            n_12: s.n_abs(1, 2),
            n_03: s.n_abs(0, 3),
        };
        PerturbationInputs {
            a: data(&el.a),
            b: data(&el.b),
            omega_c: spec.resonator.omega_c,
            n_c01: el.c.n_abs(0, 1),
            j_ac: spec.j_ac,
            j_bc: spec.j_bc,
            j_ab: spec.j_ab,
        }
    }

    pub fn plasmon_model(&self) -> PlasmonCouplerModel {
        PlasmonCouplerModel {
            delta_a: self.a.omega_12 - self.omega_c,
            delta_b: self.b.omega_12 - self.omega_c,
            g_a: self.j_ac * self.a.n_12 * self.n_c01,
            g_b: self.j_bc * self.b.n_12 * self.n_c01,
            g_ab: self.j_ab * self.a.n_12 * self.b.n_12,
        }
    }

    /// Second-order 0-3 pathway shifts J²|n_03 n_c01|²/(ω_03 − ω_c), positive
    /// numbers that are subtracted from χ_ij.
    pub fn corrections_03(&self, variant: Denominators) -> Result<ZeroThreeCorrections> {
        let term = |j: f64, f: &FluxoniumData| -> Result<f64> {
            let den = match variant {
                Denominators::MainText => f.omega_03 - self.omega_c,
                Denominators::Ladder => (f.omega_12 - self.omega_c) + f.omega_23 + f.omega_01,
            };
            guard("ω_03 − ω_c", den)?;
            Ok(j * j * (f.n_03 * self.n_c01).powi(2) / den)
        };
        Ok(ZeroThreeCorrections { a: term(self.j_ac, &self.a)?, b: term(self.j_bc, &self.b)? })
    }
}

impl PerturbationInputs {
    /// Counter-rotating partners of the 1-2 and 0-3 pathways, g²/(ω + ω_c) (positive
    /// numbers subtracted from the corresponding χ).
    pub fn counter_rotating(&self) -> CounterRotating {
        let g2 = |j: f64, n: f64| (j * n * self.n_c01).powi(2);
        CounterRotating {
            a_12: g2(self.j_ac, self.a.n_12) / (self.a.omega_12 + self.omega_c),
            b_12: g2(self.j_bc, self.b.n_12) / (self.b.omega_12 + self.omega_c),
            a_03: g2(self.j_ac, self.a.n_03) / (self.a.omega_03 + self.omega_c),
            b_03: g2(self.j_bc, self.b.n_03) / (self.b.omega_03 + self.omega_c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CounterRotating {
    pub a_12: f64,
    pub b_12: f64,
    pub a_03: f64,
    pub b_03: f64,
}

impl ChiSet {
    /// Subtract the counter-rotating shifts from each conditional frequency.
    pub fn with_counter_rotating(&self, cr: &CounterRotating) -> ChiSet {
        ChiSet {
            chi: self.chi - cr.a_12 - cr.b_12,
            chi_10: self.chi_10 - cr.a_12 - cr.b_03,
            chi_01: self.chi_01 - cr.a_03 - cr.b_12,
            chi_00: self.chi_00 - cr.a_03 - cr.b_03,
        }
    }
}

fn guard(what: &str, den: f64) -> Result<()> {
    if den.abs() < RESONANCE_GUARD {
        return Err(Error::Resonance { what: what.to_string(), value: den });
    }
    Ok(())
}

/// Which form of the 0-3 denominators to use. `Ladder` writes ω_03 − ω_c as
/// Δ + ω_23 + ω_01, which is the same number when all frequencies come from one
/// spectrum; it differs only when the ladder frequencies are supplied separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Denominators {
    #[default]
    MainText,
    Ladder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlasmonCouplerModel {
    pub delta_a: f64,
    pub delta_b: f64,
    pub g_a: f64,
    pub g_b: f64,
    /// Direct plasmon–plasmon exchange J_AB n_A12 n_B12.
    #[serde(default)]
    pub g_ab: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ZeroThreeCorrections {
    pub a: f64,
    pub b: f64,
}

/// χ ≡ χ_11 and the three conditional shifts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSet {
    pub chi: f64,
    pub chi_00: f64,
    pub chi_01: f64,
    pub chi_10: f64,
}

impl ChiSet {
    pub fn delta_chi(&self) -> [f64; 3] {
        [self.chi - self.chi_00, self.chi - self.chi_01, self.chi - self.chi_10]
    }
}

pub fn chi_second_order(spec: &CircuitSpec) -> Result<ChiSet> {
    chi_second_order_from(&PerturbationInputs::from_spec(spec)?, Denominators::MainText)
}

pub fn chi_second_order_from(p: &PerturbationInputs, variant: Denominators) -> Result<ChiSet> {
    let m = p.plasmon_model();
    guard("Δ_A", m.delta_a)?;
    guard("Δ_B", m.delta_b)?;
    let pa = m.g_a * m.g_a / m.delta_a;
    let pb = m.g_b * m.g_b / m.delta_b;
    let c = p.corrections_03(variant)?;
    Ok(ChiSet { chi: -pa - pb, chi_10: -pa - c.b, chi_01: -pb - c.a, chi_00: -c.a - c.b })
}

/// Full second-order dispersive shifts summed over every fluxonium level kept in
/// the element spectra, rotating and counter-rotating terms alike:
/// χ_j = Σ_k g_jk² [1/(E_j − E_k − ω_c) + 1/(E_j − E_k + ω_c)].
pub fn chi_second_order_all_levels(spec: &CircuitSpec, el: &ElementSet) -> Result<ChiSet> {
    let nc = el.c.n_abs(0, 1);
    let wc = spec.resonator.omega_c;
    let shift = |s: &crate::circuit::ElementSpectrum, j_cpl: f64, j: usize| -> Result<f64> {
        let mut acc = 0.0;
        for k in 0..s.dim() {
            if k == j {
                continue;
            }
            let g2 = (j_cpl * s.n_abs(j, k) * nc).powi(2);
            let w = s.energies[j] - s.energies[k];
            guard("E_j − E_k ± ω_c", w - wc)?;
            acc += g2 * (1.0 / (w - wc) + 1.0 / (w + wc));
        }
        Ok(acc)
    };
    let (a0, a1) = (shift(&el.a, spec.j_ac, 0)?, shift(&el.a, spec.j_ac, 1)?);
    let (b0, b1) = (shift(&el.b, spec.j_bc, 0)?, shift(&el.b, spec.j_bc, 1)?);
    Ok(ChiSet { chi: a1 + b1, chi_10: a1 + b0, chi_01: a0 + b1, chi_00: a0 + b0 })
}

/// Shift of the level adiabatically connected to the first basis state.
fn connected_shift(h: DMatrix<f64>) -> f64 {
    let (vals, vecs) = eigh(h);
    let best = (0..vals.len())
        .max_by(|&a, &b| vecs[(0, a)].abs().total_cmp(&vecs[(0, b)].abs()))
        .unwrap_or(0);
    vals[best]
}

/// Exchange-subspace model: χ from the {|1,1,1⟩, |2,0,1⟩, |1,0,2⟩} block
/// (Δ/2 − √(8g²+Δ²)/2 for symmetric parameters and g_ab = 0), χ_10/χ_01 from
/// the single-fluxonium 2×2 blocks, each minus the 0-3 second-order terms.
pub fn chi_jc_model(m: &PlasmonCouplerModel, c: &ZeroThreeCorrections) -> ChiSet {
    let block = Matrix3::new(
        0.0, m.g_a, m.g_b, //
        m.g_a, m.delta_a, m.g_ab, //
        m.g_b, m.g_ab, m.delta_b,
    );
    let chi = connected_shift(DMatrix::from_iterator(3, 3, block.iter().copied()));
    let single = |d: f64, g: f64| (d - (4.0 * g * g + d * d).sqrt()) / 2.0;
    ChiSet {
        chi,
        chi_10: single(m.delta_a, m.g_a) - c.b,
        chi_01: single(m.delta_b, m.g_b) - c.a,
        chi_00: -c.a - c.b,
    }
}

/// α⁽⁴⁾ = 2 Σ_i (g_i²/Δ_i) Σ_j (g_j²/Δ_j²), i.e. the 1/Δ³ sector of fourth order.
pub fn alpha_fourth_order(m: &PlasmonCouplerModel) -> Result<f64> {
    guard("Δ_A", m.delta_a)?;
    guard("Δ_B", m.delta_b)?;
    let s1 = m.g_a.powi(2) / m.delta_a + m.g_b.powi(2) / m.delta_b;
    let s2 = m.g_a.powi(2) / m.delta_a.powi(2) + m.g_b.powi(2) / m.delta_b.powi(2);
    Ok(2.0 * s1 * s2)
}

/// Exact α of the two-level-plasmon Jaynes–Cummings truncation, in the frame
/// rotating at ω_c per excitation. Qubit states: g ≙ fluxonium |1⟩, e ≙ |2⟩.
pub fn jc_truncated_alpha(m: &PlasmonCouplerModel) -> f64 {
    let sq2 = std::f64::consts::SQRT_2;
    // one excitation: |g1g⟩, |e0g⟩, |g0e⟩
    let h1 = DMatrix::from_row_slice(3, 3, &[
        0.0, m.g_a, m.g_b, //
        m.g_a, m.delta_a, m.g_ab, //
        m.g_b, m.g_ab, m.delta_b,
    ]);
    // two excitations: |g2g⟩, |e1g⟩, |g1e⟩, |e0e⟩
    let h2 = DMatrix::from_row_slice(4, 4, &[
        0.0, sq2 * m.g_a, sq2 * m.g_b, 0.0, //
        sq2 * m.g_a, m.delta_a, m.g_ab, m.g_b, //
        sq2 * m.g_b, m.g_ab, m.delta_b, m.g_a, //
        0.0, m.g_b, m.g_a, m.delta_a + m.delta_b,
    ]);
    // |1,0,1⟩ has no partner in this truncation, so E101 = 0
    connected_shift(h2) - 2.0 * connected_shift(h1)
}

/// η⁽²⁾ and η⁽³⁾.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaEstimate {
    pub eta2: f64,
    /// Third order from the three-coupling loops of all four computational
    /// states (1-2 excitations for a qubit in |1⟩, 0-3 for a qubit in |0⟩).
    pub eta3: f64,
    /// The |1,0,1⟩ loops only (0-3 pathways neglected).
    pub eta3_101: f64,
    /// The short summary expression without J_AB and plasmon matrix elements;
    /// reported for reference only — it is not an energy shift of the right order.
    pub eta3_compact: f64,
}

impl EtaEstimate {
    pub fn total(&self) -> f64 {
        self.eta2 + self.eta3
    }
}

/// Σ in −η⁽²⁾ = J_AB² Σ: one term per intermediate state of the four
/// computational energies (|2,0,2⟩, |2,0,3⟩, |3,0,2⟩, |3,0,3⟩).
pub fn eta2_sum(p: &PerturbationInputs) -> f64 {
    let (a, b) = (&p.a, &p.b);
    (a.n_12 * b.n_12).powi(2) / (a.omega_12 + b.omega_12)
        - (a.n_03 * b.n_12).powi(2) / (a.omega_03 + b.omega_12)
        - (a.n_12 * b.n_03).powi(2) / (a.omega_12 + b.omega_03)
        + (a.n_03 * b.n_03).powi(2) / (a.omega_03 + b.omega_03)
}

/// Third-order loop shift per unit J_AB for excitations (n_a, ω_a) on A and
/// (n_b, ω_b) on B: the six orderings of the J_ac, J_bc, J_AB couplings.
fn loop_per_jab(p: &PerturbationInputs, n_a: f64, w_a: f64, n_b: f64, w_b: f64) -> f64 {
    let wc = p.omega_c;
    2.0 * p.j_ac * p.j_bc * p.n_c01.powi(2) * n_a.powi(2) * n_b.powi(2)
        * ((1.0 / (w_a + w_b)) * (1.0 / (w_a + wc) + 1.0 / (w_b + wc)) + 1.0 / ((w_a + wc) * (w_b + wc)))
}

/// E⁽³⁾(1,0,1)/J_AB: the right-hand side of the cancellation condition.
pub fn eta3_per_jab(p: &PerturbationInputs) -> f64 {
    loop_per_jab(p, p.a.n_12, p.a.omega_12, p.b.n_12, p.b.omega_12)
}

/// η⁽³⁾/J_AB including the 0-3 loops of |0,0,0⟩, |0,0,1⟩ and |1,0,0⟩.
pub fn eta3_full_per_jab(p: &PerturbationInputs) -> f64 {
    let (a, b) = (&p.a, &p.b);
    loop_per_jab(p, a.n_12, a.omega_12, b.n_12, b.omega_12)
        - loop_per_jab(p, a.n_12, a.omega_12, b.n_03, b.omega_03)
        - loop_per_jab(p, a.n_03, a.omega_03, b.n_12, b.omega_12)
        + loop_per_jab(p, a.n_03, a.omega_03, b.n_03, b.omega_03)
}

pub fn eta_perturbative(spec: &CircuitSpec) -> Result<EtaEstimate> {
    Ok(eta_from(&PerturbationInputs::from_spec(spec)?))
}

pub fn eta_from(p: &PerturbationInputs) -> EtaEstimate {
    let (wa, wb, wc) = (p.a.omega_12, p.b.omega_12, p.omega_c);
    EtaEstimate {
        eta2: -p.j_ab * p.j_ab * eta2_sum(p),
        eta3: p.j_ab * eta3_full_per_jab(p),
        eta3_101: p.j_ab * eta3_per_jab(p),
        eta3_compact: 2.0 * p.j_ac * p.j_bc * p.n_c01.powi(2) * (1.0 / (wa + wc) + 1.0 / (wb + wc)),
    }
}

/// J_AB solving −η⁽²⁾ = η⁽³⁾ (the nonzero root).
pub fn solve_zz_cancellation(spec: &CircuitSpec) -> Result<f64> {
    solve_zz_from(&PerturbationInputs::from_spec(spec)?)
}

pub fn solve_zz_from(p: &PerturbationInputs) -> Result<f64> {
    let s = eta2_sum(p);
    let r = eta3_per_jab(p);
    if r == 0.0 {
        return Ok(0.0);
    }
    if s == 0.0 {
        return Err(Error::Unreachable("η⁽²⁾ sum vanishes; no finite J_AB cancels η⁽³⁾".into()));
    }
    let j = r / s;
    if j < 0.0 {
        log::warn!("ZZ cancellation needs a negative J_AB = {j:.4} GHz");
    }
    Ok(j)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbativeEstimates {
    /// 1-2 / 0-3 rotating pathways only.
    pub chi2: ChiSet,
    /// `chi2` plus the counter-rotating partners.
    pub chi2_cr: ChiSet,
    pub chi_jc: ChiSet,
    /// `chi_jc` plus the counter-rotating partners.
    pub chi_jc_cr: ChiSet,
    pub alpha4: f64,
    pub alpha_jc: f64,
    pub eta: EtaEstimate,
    /// Cancellation J_AB from the |1,0,1⟩ loops (the closed-form condition).
    pub j_ab_cancel: f64,
    /// Cancellation J_AB with the 0-3 loops included.
    pub j_ab_cancel_full: f64,
}

pub fn estimates(spec: &CircuitSpec) -> Result<PerturbativeEstimates> {
    let p = PerturbationInputs::from_spec(spec)?;
    let m = p.plasmon_model();
    let cr = p.counter_rotating();
    let chi2 = chi_second_order_from(&p, Denominators::MainText)?;
    let chi_jc = chi_jc_model(&m, &p.corrections_03(Denominators::MainText)?);
    Ok(PerturbativeEstimates {
        chi2,
        chi2_cr: chi2.with_counter_rotating(&cr),
        chi_jc,
        chi_jc_cr: chi_jc.with_counter_rotating(&cr),
        alpha4: alpha_fourth_order(&m)?,
        alpha_jc: jc_truncated_alpha(&m),
        eta: eta_from(&p),
        j_ab_cancel: solve_zz_from(&p)?,
        j_ab_cancel_full: eta3_full_per_jab(&p) / eta2_sum(&p),
    })
}
