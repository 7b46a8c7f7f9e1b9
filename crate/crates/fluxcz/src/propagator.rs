//! Time-domain Schrödinger propagation in the truncated dressed basis, lab-frame
//! drive Ω(t) n̂_c cos ω_d t without rotating-wave approximation.
//!
//! The default frame factors out the dressed energies exactly: with ψ = Σ c_k
//! e^{−i2πE_k s}|k⟩ and n̂_c = iA (A real antisymmetric),
//!     dc_k/ds = 2π g(t) Σ_l A_kl e^{i2π(E_k−E_l)s} c_l,
//! so the integrator only sees the drive-induced motion. The lab-frame path is
//! kept for cross-checking.

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::composite::{build_composite_with, CircuitSpec, CompositeOptions, DressedSpectrum, Element, Label, COMPUTATIONAL};
use crate::drive::{drag_drive, PulseSpec};
use crate::error::{Error, Result};
use crate::fidelity::{average_gate_fidelity, leakage_per_input, wrap, GateResult, VirtualZ};
use crate::units::TWO_PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    #[default]
    Interaction,
    Lab,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSettings {
    /// Steps per period of the fastest frequency in the right-hand side.
    pub points_per_period: f64,
    /// Optional hard cap on the step (ns).
    pub max_step: Option<f64>,
    pub frame: Frame,
    /// Couplings |A_kl| below this fraction of max|A| do not set the step.
    pub coupling_floor: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings { points_per_period: 24.0, max_step: None, frame: Frame::Interaction, coupling_floor: 1e-6 }
    }
}

/// Truncated dressed model the drive acts on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateSystem {
    pub energies: Vec<f64>,
    /// n̂_c = i·drive_op in the dressed basis.
    pub drive_op: DMatrix<f64>,
    pub labels: Vec<Label>,
    pub comp: [usize; 4],
    pub idx_111: usize,
    /// E(1,1,1) − E(1,0,1).
    pub omega_res: f64,
    /// |⟨1,1,1|n̂_c|1,0,1⟩|.
    pub m111: f64,
}

impl GateSystem {
    pub fn from_spectrum(s: &DressedSpectrum) -> Result<GateSystem> {
        let nc = s.dressed_charge(Element::C)?;
        let comp = s.computational_indices()?;
        let idx_111 = s.index_of([1, 1, 1])?;
        Ok(GateSystem {
            energies: s.energies[..s.truncation_dim].to_vec(),
            m111: nc[(idx_111, comp[3])].abs(),
            drive_op: nc,
            labels: s.labels[..s.truncation_dim].to_vec(),
            comp,
            idx_111,
            omega_res: s.energies[idx_111] - s.energies[comp[3]],
        })
    }

    /// Diagonalize, truncate to `d` dressed states and extract the gate model.
    pub fn from_circuit(spec: &CircuitSpec, opts: &CompositeOptions, d: usize) -> Result<GateSystem> {
        GateSystem::from_spectrum(&build_composite_with(spec, opts)?.truncate(d)?)
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn index_of(&self, l: Label) -> Option<usize> {
        self.labels.iter().position(|x| *x == l)
    }

    /// Absolute drive frequency for a detuning from the |1,0,1⟩→|1,1,1⟩ line.
    pub fn drive_frequency(&self, detuning: f64) -> f64 {
        self.omega_res + detuning
    }

    /// Largest frequency in the interaction-frame right-hand side.
    pub fn max_frequency(&self, omega_d: f64, floor: f64) -> f64 {
        let d = self.dim();
        let amax = self.drive_op.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut bohr = 0.0f64;
        for k in 0..d {
            for l in 0..d {
                if self.drive_op[(k, l)].abs() > floor * amax {
                    bohr = bohr.max((self.energies[k] - self.energies[l]).abs());
                }
            }
        }
        bohr + omega_d.abs()
    }

    pub fn max_energy(&self) -> f64 {
        self.energies.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Fixed step grid over the pulse window.
pub fn step_grid(sys: &GateSystem, pulse: &PulseSpec, omega_d: f64, set: &IntegratorSettings) -> (usize, f64) {
    let (t0, t1) = pulse.window();
    let fmax = match set.frame {
        Frame::Interaction => sys.max_frequency(omega_d, set.coupling_floor),
        Frame::Lab => sys.max_energy() + omega_d.abs(),
    }
    .max(1e-3);
    let mut h = 1.0 / (set.points_per_period * fmax);
    if let Some(m) = set.max_step {
        h = h.min(m);
    }
    let n = ((t1 - t0) / h).ceil().max(1.0) as usize;
    (n, (t1 - t0) / n as f64)
}

/// Column block of complex amplitudes, row-major d × 2k with (re, im) pairs.
#[derive(Debug, Clone)]
pub struct Block {
    pub d: usize,
    pub k: usize,
    pub data: Vec<f64>,
}

impl Block {
    pub fn zeros(d: usize, k: usize) -> Block {
        Block { d, k, data: vec![0.0; d * 2 * k] }
    }

    pub fn from_columns(cols: &DMatrix<Complex64>) -> Block {
        let (d, k) = cols.shape();
        let mut b = Block::zeros(d, k);
        for r in 0..d {
            for c in 0..k {
                b.data[r * 2 * k + 2 * c] = cols[(r, c)].re;
                b.data[r * 2 * k + 2 * c + 1] = cols[(r, c)].im;
            }
        }
        b
    }

    pub fn basis_columns(d: usize, idx: &[usize]) -> Block {
        let mut b = Block::zeros(d, idx.len());
        for (c, &r) in idx.iter().enumerate() {
            b.data[r * 2 * idx.len() + 2 * c] = 1.0;
        }
        b
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let o = r * 2 * self.k + 2 * c;
        Complex64::new(self.data[o], self.data[o + 1])
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.d, self.k, |r, c| self.get(r, c))
    }

    /// Multiply row r by e^{iθ_r}.
    pub fn rotate_rows(&mut self, cs: &[(f64, f64)], conj: bool) {
        let w = 2 * self.k;
        for (r, &(s, c)) in cs.iter().enumerate() {
            let s = if conj { -s } else { s };
            for x in self.data[r * w..(r + 1) * w].chunks_exact_mut(2) {
                let (re, im) = (x[0], x[1]);
                x[0] = c * re - s * im;
                x[1] = s * re + c * im;
            }
        }
    }
}

/// out = alpha · A · x with A row-major d × d (A as nalgebra column-major is read transposed-safe
/// through explicit strides).
fn real_gemm(a: &DMatrix<f64>, x: &[f64], out: &mut [f64], cols: usize, alpha: f64, beta: f64) {
    let d = a.nrows();
    unsafe {
        matrixmultiply::dgemm(
            d,
            d,
            cols,
            alpha,
            a.as_ptr(),
            1,
            d as isize,
            x.as_ptr(),
            cols as isize,
            1,
            beta,
            out.as_mut_ptr(),
            cols as isize,
            1,
        );
    }
}

/// Right-hand side evaluator shared by the unitary and the non-Hermitian solvers.
pub struct Rhs<'a> {
    pub energies: &'a [f64],
    /// Coefficient matrix multiplying 2π g(t).
    pub drive: &'a DMatrix<f64>,
    /// Optional time-independent real matrix added as-is (e.g. −K/2).
    pub constant: Option<&'a DMatrix<f64>>,
    pub frame: Frame,
    phases: Vec<(f64, f64)>,
    scratch: Vec<f64>,
}

impl<'a> Rhs<'a> {
    pub fn new(energies: &'a [f64], drive: &'a DMatrix<f64>, constant: Option<&'a DMatrix<f64>>, frame: Frame, k: usize) -> Self {
        let d = energies.len();
        Rhs { energies, drive, constant, frame, phases: vec![(0.0, 1.0); d], scratch: vec![0.0; d * 2 * k] }
    }

    /// dy/ds at elapsed time s with drive value g.
    pub fn eval(&mut self, s: f64, g: f64, y: &Block, out: &mut Block) {
        let cols = 2 * y.k;
        match self.frame {
            Frame::Interaction => {
                for (p, e) in self.phases.iter_mut().zip(self.energies) {
                    *p = (TWO_PI * e * s).sin_cos();
                }
                self.scratch.copy_from_slice(&y.data);
                let mut u = Block { d: y.d, k: y.k, data: std::mem::take(&mut self.scratch) };
                u.rotate_rows(&self.phases, true);
                real_gemm(self.drive, &u.data, &mut out.data, cols, TWO_PI * g, 0.0);
                if let Some(c) = self.constant {
                    real_gemm(c, &u.data, &mut out.data, cols, 1.0, 1.0);
                }
                self.scratch = u.data;
                out.rotate_rows(&self.phases, false);
            }
            Frame::Lab => {
                real_gemm(self.drive, &y.data, &mut out.data, cols, TWO_PI * g, 0.0);
                if let Some(c) = self.constant {
                    real_gemm(c, &y.data, &mut out.data, cols, 1.0, 1.0);
                }
                let w = cols;
                for (r, e) in self.energies.iter().enumerate() {
                    let f = TWO_PI * e;
                    for c in 0..y.k {
                        let o = r * w + 2 * c;
                        // −i f y
                        out.data[o] += f * y.data[o + 1];
                        out.data[o + 1] -= f * y.data[o];
                    }
                }
            }
        }
    }
}

/// Classical RK4 over `n` steps of size `h` (negative h integrates backwards),
/// starting at pulse time t0. `observe(step_index, s, &y)` is called on every
/// grid point including the first and last.
pub fn rk4<F, O>(rhs: &mut Rhs, drive: F, t0: f64, h: f64, n: usize, s0: f64, y: &mut Block, mut observe: O)
where
    F: Fn(f64) -> f64,
    O: FnMut(usize, f64, &Block),
{
    let (d, k) = (y.d, y.k);
    let mut k1 = Block::zeros(d, k);
    let mut k2 = Block::zeros(d, k);
    let mut k3 = Block::zeros(d, k);
    let mut k4 = Block::zeros(d, k);
    let mut tmp = Block::zeros(d, k);
    observe(0, s0, y);
    for i in 0..n {
        let s = s0 + i as f64 * h;
        let t = t0 + i as f64 * h;
        let (g0, gm, g1) = (drive(t), drive(t + 0.5 * h), drive(t + h));
        rhs.eval(s, g0, y, &mut k1);
        axpy(&mut tmp, &y.data, &k1.data, 0.5 * h);
        rhs.eval(s + 0.5 * h, gm, &tmp, &mut k2);
        axpy(&mut tmp, &y.data, &k2.data, 0.5 * h);
        rhs.eval(s + 0.5 * h, gm, &tmp, &mut k3);
        axpy(&mut tmp, &y.data, &k3.data, h);
        rhs.eval(s + h, g1, &tmp, &mut k4);
        let h6 = h / 6.0;
        for (j, v) in y.data.iter_mut().enumerate() {
            *v += h6 * (k1.data[j] + 2.0 * (k2.data[j] + k3.data[j]) + k4.data[j]);
        }
        observe(i + 1, s + h, y);
    }
}

fn axpy(out: &mut Block, y: &[f64], k: &[f64], a: f64) {
    for ((o, yv), kv) in out.data.iter_mut().zip(y).zip(k) {
        *o = yv + a * kv;
    }
}

/// Propagate the columns `init` over the full pulse window. Returns
/// interaction-frame amplitudes (dressed free evolution removed) in either frame.
pub fn propagate_block(
    sys: &GateSystem,
    pulse: &PulseSpec,
    omega_d: f64,
    init: Block,
    set: &IntegratorSettings,
) -> Result<Block> {
    pulse.validate()?;
    let (t0, _) = pulse.window();
    let (n, h) = step_grid(sys, pulse, omega_d, set);
    let mut y = init;
    let mut rhs = Rhs::new(&sys.energies, &sys.drive_op, None, set.frame, y.k);
    rk4(&mut rhs, |t| drag_drive(pulse, t, omega_d), t0, h, n, 0.0, &mut y, |_, _, _| {});
    if set.frame == Frame::Lab {
        let tg = n as f64 * h;
        let cs: Vec<(f64, f64)> = sys.energies.iter().map(|e| (TWO_PI * e * tg).sin_cos()).collect();
        y.rotate_rows(&cs, false);
    }
    let norm_drift = (0..y.k)
        .map(|c| ((0..y.d).map(|r| y.get(r, c).norm_sqr()).sum::<f64>() - 1.0).abs())
        .fold(0.0f64, f64::max);
    if !norm_drift.is_finite() || norm_drift > 1e-6 {
        return Err(Error::Integrator(format!("norm drift {norm_drift:.3e}")));
    }
    Ok(y)
}

/// Single-state propagation.
pub fn propagate(
    sys: &GateSystem,
    pulse: &PulseSpec,
    omega_d: f64,
    initial: &[Complex64],
    set: &IntegratorSettings,
) -> Result<Vec<Complex64>> {
    if initial.len() != sys.dim() {
        return Err(Error::DimensionMismatch { expected: sys.dim(), got: initial.len() });
    }
    let col = DMatrix::from_column_slice(sys.dim(), 1, initial);
    let y = propagate_block(sys, pulse, omega_d, Block::from_columns(&col), set)?;
    Ok((0..sys.dim()).map(|r| y.get(r, 0)).collect())
}

/// Full d × d propagator (interaction frame).
pub fn full_propagator(sys: &GateSystem, pulse: &PulseSpec, omega_d: f64, set: &IntegratorSettings) -> Result<DMatrix<Complex64>> {
    let idx: Vec<usize> = (0..sys.dim()).collect();
    Ok(propagate_block(sys, pulse, omega_d, Block::basis_columns(sys.dim(), &idx), set)?.to_matrix())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionResult {
    /// Final interaction-frame states of the four computational inputs (d × 4).
    pub final_states: DMatrix<Complex64>,
    /// 4×4 block ⟨c|U|a⟩ over computational states.
    pub propagator_matrix: Matrix4<Complex64>,
    /// φ_00, φ_01, φ_10, φ_11 (π removed from φ_11).
    pub phases: [f64; 4],
    pub leakage_budget: [f64; 4],
    /// |amplitude|² per dressed state for each input, d × 4.
    pub state_populations: DMatrix<f64>,
}

impl EvolutionResult {
    pub fn phi_rel(&self) -> f64 {
        wrap(self.phases[3] + self.phases[0] - self.phases[1] - self.phases[2])
    }

    pub fn mean_leakage(&self) -> f64 {
        self.leakage_budget.iter().sum::<f64>() / 4.0
    }

    /// Residual population of a labeled state after starting in input `a`.
    pub fn population(&self, sys: &GateSystem, a: usize, l: Label) -> f64 {
        sys.index_of(l).map(|i| self.state_populations[(i, a)]).unwrap_or(0.0)
    }

    /// Seed for the virtual-Z optimizer that undoes the single-qubit phases.
    pub fn virtual_z_seed(&self) -> (f64, f64) {
        (self.phases[2] - self.phases[0], self.phases[1] - self.phases[0])
    }
}

/// Phases from the superposition protocol ψ_ij(0) = (|000⟩ + |ij⟩)/√2, anchored to the
/// interaction-frame phase of |000⟩ (free evolution at the dressed energies removed).
pub fn phases_from_block(u: &Matrix4<Complex64>) -> Result<[f64; 4]> {
    let phi00 = -u[(0, 0)].arg();
    let mut out = [phi00, 0.0, 0.0, 0.0];
    for a in 1..4 {
        let cij = (u[(a, 0)] + u[(a, a)]) / std::f64::consts::SQRT_2;
        let c00 = (u[(0, 0)] + u[(0, a)]) / std::f64::consts::SQRT_2;
        let rho = cij * c00.conj();
        if rho.norm() < 1e-6 {
            return Err(Error::PhaseUndefined(format!("|ρ_(ij,000)| = {:.2e} for input {a}", rho.norm())));
        }
        let mut phi = phi00 - rho.arg();
        if a == 3 {
            phi += std::f64::consts::PI;
        }
        out[a] = wrap(phi);
    }
    Ok(out)
}

pub fn evolve_computational(sys: &GateSystem, pulse: &PulseSpec, omega_d: f64, set: &IntegratorSettings) -> Result<EvolutionResult> {
    let y = propagate_block(sys, pulse, omega_d, Block::basis_columns(sys.dim(), &sys.comp), set)?;
    let states = y.to_matrix();
    let block = Matrix4::from_fn(|r, c| states[(sys.comp[r], c)]);
    let norms: Vec<f64> = (0..4).map(|c| states.column(c).norm_squared()).collect();
    Ok(EvolutionResult {
        phases: phases_from_block(&block)?,
        leakage_budget: leakage_per_input(&block, &[norms[0], norms[1], norms[2], norms[3]]),
        state_populations: states.map(|x| x.norm_sqr()),
        propagator_matrix: block,
        final_states: states,
    })
}

pub fn measure_phases(sys: &GateSystem, pulse: &PulseSpec, omega_d: f64, set: &IntegratorSettings) -> Result<[f64; 4]> {
    Ok(evolve_computational(sys, pulse, omega_d, set)?.phases)
}

pub fn leakage_budget(sys: &GateSystem, pulse: &PulseSpec, omega_d: f64, set: &IntegratorSettings) -> Result<([f64; 4], f64)> {
    let e = evolve_computational(sys, pulse, omega_d, set)?;
    Ok((e.leakage_budget, e.mean_leakage()))
}

/// Evolution plus virtual-Z-optimized gate metrics.
pub fn gate_outcome(sys: &GateSystem, pulse: &PulseSpec, set: &IntegratorSettings) -> Result<(EvolutionResult, GateResult)> {
    let omega_d = sys.drive_frequency(pulse.detuning);
    let ev = evolve_computational(sys, pulse, omega_d, set)?;
    let (sa, sb) = ev.virtual_z_seed();
    let mut g = average_gate_fidelity(&ev.propagator_matrix, VirtualZ::Optimize(sa, sb));
    g.phi_rel = ev.phi_rel();
    Ok((ev, g))
}

/// Labels of the computational states, for reports.
pub fn computational_labels() -> [Label; 4] {
    COMPUTATIONAL
}
