//! Pulse calibration: amplitude and detuning that minimize the coherent CZ error.

use serde::{Deserialize, Serialize};

use crate::drive::{optimal_detuning, seed_amplitude, PulseSpec, C_DET, GATE_OVER_TAU};
use crate::error::{Error, Result};
use crate::fidelity::GateResult;
use crate::par;
use crate::propagator::{gate_outcome, GateSystem, IntegratorSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Alternate a 1-D amplitude minimization with a root solve of φ(δω) = 0.
    #[default]
    Coordinate,
    /// Exhaustive amplitude × detuning grid, then a refined grid.
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub strategy: Strategy,
    /// Relative half-width of the amplitude search.
    pub amplitude_span: f64,
    /// Half-width of the detuning search (GHz).
    pub detuning_span: f64,
    pub grid_amplitude: usize,
    pub grid_detuning: usize,
    /// Span shrink factor of the refinement grid.
    pub refine: f64,
    pub max_widen: usize,
    pub max_rounds: usize,
    /// Target |φ| (rad).
    pub phase_tol: f64,
    /// Relative amplitude tolerance.
    pub amplitude_tol: f64,
    /// Start the detuning from the closed-form estimate instead of zero.
    pub analytic_seed: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            strategy: Strategy::Coordinate,
            amplitude_span: 0.03,
            detuning_span: 0.002,
            grid_amplitude: 25,
            grid_detuning: 41,
            refine: 5.0,
            max_widen: 4,
            max_rounds: 6,
            phase_tol: 1e-4,
            amplitude_tol: 1e-6,
            analytic_seed: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub t_gate: f64,
    pub pulse: PulseSpec,
    pub gate: GateResult,
    pub evaluations: usize,
}

impl Calibration {
    pub fn infidelity(&self) -> f64 {
        self.gate.infidelity
    }
}

struct Objective<'a> {
    sys: &'a GateSystem,
    base: PulseSpec,
    set: &'a IntegratorSettings,
    evals: std::cell::Cell<usize>,
}

impl Objective<'_> {
    fn eval(&self, amplitude: f64, detuning: f64) -> Result<GateResult> {
        self.evals.set(self.evals.get() + 1);
        let p = PulseSpec { amplitude, detuning, ..self.base };
        Ok(gate_outcome(self.sys, &p, self.set)?.1)
    }
}

/// Brent's parabolic/golden-section minimizer on [a, b].
pub fn brent_min<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Result<(f64, f64)> {
    const CG: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut x = a + CG * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = xtol + 1e-12 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CG * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1 * d.signum() };
        let fu = f(u)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    Ok((x, fx))
}

/// Minimize over amplitude at fixed detuning, widening the bracket if the optimum
/// sits on its edge.
fn calibrate_amplitude(obj: &Objective, center: f64, detuning: f64, s: &OptimizerSettings) -> Result<f64> {
    let mut c = center;
    let mut span = s.amplitude_span;
    for _ in 0..=s.max_widen {
        let (lo, hi) = (c * (1.0 - span), c * (1.0 + span));
        let (x, _) = brent_min(|a| Ok(obj.eval(a, detuning)?.infidelity), lo, hi, s.amplitude_tol * c, 60)?;
        let edge = 0.02 * (hi - lo);
        if x - lo > edge && hi - x > edge {
            return Ok(x);
        }
        c = x;
        span *= 2.0;
    }
    Err(Error::OptimumOnBoundary { axis: "amplitude".into() })
}

/// Secant iteration for φ(δω) = 0 starting from the linear phase model slope.
fn solve_detuning(obj: &Objective, amplitude: f64, start: f64, tau: f64, s: &OptimizerSettings) -> Result<(f64, GateResult)> {
    let mut x0 = start;
    let mut g0 = obj.eval(amplitude, x0)?;
    if g0.phi_rel.abs() < s.phase_tol {
        return Ok((x0, g0));
    }
    let mut x1 = x0 + g0.phi_rel / (C_DET * std::f64::consts::PI * tau);
    for _ in 0..30 {
        let g1 = obj.eval(amplitude, x1)?;
        if g1.phi_rel.abs() < s.phase_tol {
            return Ok((x1, g1));
        }
        let slope = (g1.phi_rel - g0.phi_rel) / (x1 - x0);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let step = (-g1.phi_rel / slope).clamp(-s.detuning_span, s.detuning_span);
        (x0, g0) = (x1, g1);
        x1 += step;
    }
    Err(Error::Unreachable(format!("phase root not bracketed near δω = {x1:.3e} GHz")))
}

/// Amplitude calibrated on resonance (δω = 0): the reference for detuning gains.
pub fn calibrate_resonant(sys: &GateSystem, t_gate: f64, set: &IntegratorSettings, s: &OptimizerSettings) -> Result<Calibration> {
    let tau = t_gate / GATE_OVER_TAU;
    let base = PulseSpec::with_gate_time(t_gate, seed_amplitude(tau, sys.m111));
    let obj = Objective { sys, base, set, evals: 0.into() };
    let a = calibrate_amplitude(&obj, base.amplitude, 0.0, s)?;
    let gate = obj.eval(a, 0.0)?;
    Ok(Calibration { t_gate, pulse: PulseSpec { amplitude: a, ..base }, gate, evaluations: obj.evals.get() })
}

/// Optimize amplitude and detuning at gate time `t_gate`. `analytic` supplies the
/// closed-form detuning estimate when `analytic_seed` is set.
pub fn optimize_drive(
    sys: &GateSystem,
    t_gate: f64,
    analytic: Option<f64>,
    set: &IntegratorSettings,
    s: &OptimizerSettings,
) -> Result<Calibration> {
    let tau = t_gate / GATE_OVER_TAU;
    let base = PulseSpec::with_gate_time(t_gate, seed_amplitude(tau, sys.m111));
    let det0 = if s.analytic_seed { analytic.unwrap_or(0.0) } else { 0.0 };
    match s.strategy {
        Strategy::Coordinate => coordinate(sys, base, det0, set, s),
        Strategy::Grid => grid(sys, base, det0, set, s),
    }
}

fn coordinate(sys: &GateSystem, base: PulseSpec, det0: f64, set: &IntegratorSettings, s: &OptimizerSettings) -> Result<Calibration> {
    let obj = Objective { sys, base, set, evals: 0.into() };
    let (mut amp, mut det) = (base.amplitude, det0);
    let mut gate = None;
    for _ in 0..s.max_rounds {
        let a_new = calibrate_amplitude(&obj, amp, det, s)?;
        let (d_new, g) = solve_detuning(&obj, a_new, det, base.tau, s)?;
        let settled = ((a_new - amp) / amp).abs() < 10.0 * s.amplitude_tol && (d_new - det).abs() < 1e-7;
        (amp, det, gate) = (a_new, d_new, Some(g));
        if settled {
            break;
        }
    }
    let gate = gate.ok_or_else(|| Error::Unreachable("no optimizer rounds".into()))?;
    Ok(Calibration {
        t_gate: base.t_gate(),
        pulse: PulseSpec { amplitude: amp, detuning: det, ..base },
        gate,
        evaluations: obj.evals.get(),
    })
}

fn grid(sys: &GateSystem, base: PulseSpec, det0: f64, set: &IntegratorSettings, s: &OptimizerSettings) -> Result<Calibration> {
    let (mut ca, mut cd) = (base.amplitude, det0);
    let (mut sa, mut sd) = (s.amplitude_span * base.amplitude, s.detuning_span);
    let mut evals = 0;
    let mut stage = 0;
    let mut widen = 0;
    loop {
        let pts: Vec<(f64, f64)> = (0..s.grid_amplitude)
            .flat_map(|i| {
                let a = ca - sa + 2.0 * sa * i as f64 / (s.grid_amplitude - 1).max(1) as f64;
                (0..s.grid_detuning).map(move |j| (a, cd - sd + 2.0 * sd * j as f64 / (s.grid_detuning - 1).max(1) as f64))
            })
            .collect();
        let vals = par::map(&pts, |&(a, d)| gate_outcome(sys, &PulseSpec { amplitude: a, detuning: d, ..base }, set).map(|x| x.1));
        evals += pts.len();
        let mut best: Option<(usize, GateResult)> = None;
        for (k, v) in vals.into_iter().enumerate() {
            let g = v?;
            if best.map_or(true, |(_, b)| g.infidelity < b.infidelity) {
                best = Some((k, g));
            }
        }
        let (k, g) = best.ok_or_else(|| Error::invalid("grid", "empty grid"))?;
        let (i, j) = (k / s.grid_detuning, k % s.grid_detuning);
        (ca, cd) = pts[k];
        let on_edge = i == 0 || i + 1 == s.grid_amplitude || j == 0 || j + 1 == s.grid_detuning;
        if on_edge {
            widen += 1;
            if widen > s.max_widen {
                let axis = if i == 0 || i + 1 == s.grid_amplitude { "amplitude" } else { "detuning" };
                return Err(Error::OptimumOnBoundary { axis: axis.into() });
            }
            continue;
        }
        if stage == 1 {
            return Ok(Calibration {
                t_gate: base.t_gate(),
                pulse: PulseSpec { amplitude: ca, detuning: cd, ..base },
                gate: g,
                evaluations: evals,
            });
        }
        stage = 1;
        sa /= s.refine;
        sd /= s.refine;
    }
}

/// Closed-form detuning seed for a system with known constants.
pub fn analytic_detuning(k: &crate::composite::InteractionConstants, m: &[f64; 3], t_gate: f64) -> f64 {
    optimal_detuning(k, m, t_gate / GATE_OVER_TAU)
}

/// Calibrate a batch of gate times in parallel.
pub fn optimize_many(
    sys: &GateSystem,
    t_gates: &[f64],
    analytic: impl Fn(f64) -> Option<f64> + Sync + Send,
    set: &IntegratorSettings,
    s: &OptimizerSettings,
) -> Vec<Result<Calibration>> {
    par::map(t_gates, |&t| optimize_drive(sys, t, analytic(t), set, s))
}
