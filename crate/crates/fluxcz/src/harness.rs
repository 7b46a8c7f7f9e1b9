//! Stage orchestration and result emission.
//!
//! Each stage writes `<stage>.json` (config echo, versions, results) and one or
//! more `<stage>*.csv` tables; wall-clock timing goes to `manifest.json` so the
//! numeric outputs are byte-identical across runs. Gate-time sweeps are cached
//! under `cache/<config hash>-sweep-tg.json` and reused by `fit-scaling`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::capnet::{build_matrix, effective_circuit, truncated_matrix, zz_bound_cab, CabBound};
use crate::composite::{build_composite_with, interaction_constants, ElementSet, COMPUTATIONAL};
use crate::config::RunConfig;
use crate::drive::{predict, GATE_OVER_TAU};
use crate::error::{Error, Result};
use crate::lindblad::{error_budget, loss_estimates, LossEstimateForm};
use crate::optimize::{analytic_detuning, calibrate_resonant, optimize_drive, Calibration};
use crate::perturbation::{chi_second_order_all_levels, estimates, ChiSet};
use crate::propagator::{gate_outcome, GateSystem};
use crate::robustness::{ej_sweep, flux_offset_sweep, flux_sigma};
use crate::units::micro_phi0_to_rad;
use crate::{par, units};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Spectrum,
    Constants,
    PerturbCompare,
    Gate,
    Optimize,
    SweepTg,
    SweepFlux,
    SweepEj,
    Lindblad,
    Capnet,
    FitScaling,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::Spectrum,
        Stage::Constants,
        Stage::PerturbCompare,
        Stage::Gate,
        Stage::Optimize,
        Stage::SweepTg,
        Stage::SweepFlux,
        Stage::SweepEj,
        Stage::Lindblad,
        Stage::Capnet,
        Stage::FitScaling,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Spectrum => "spectrum",
            Stage::Constants => "constants",
            Stage::PerturbCompare => "perturb-compare",
            Stage::Gate => "gate",
            Stage::Optimize => "optimize",
            Stage::SweepTg => "sweep-tg",
            Stage::SweepFlux => "sweep-flux",
            Stage::SweepEj => "sweep-ej",
            Stage::Lindblad => "lindblad",
            Stage::Capnet => "capnet",
            Stage::FitScaling => "fit-scaling",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Stage> {
        Stage::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage '{s}'")))
    }
}

/// A CSV table: header plus rows of already-formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Table {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn f(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone)]
pub struct StageOutput {
    pub results: Value,
    pub tables: Vec<Table>,
}

pub struct RunContext<'a> {
    pub config: &'a RunConfig,
    /// Cache directory; None disables caching.
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub config_hash: String,
    pub version: String,
    pub parallel: bool,
    pub workers: usize,
    pub wall_seconds: f64,
    pub files: Vec<String>,
    pub cache_hit: bool,
}

pub fn versions() -> Value {
    json!({ "fluxcz": env!("CARGO_PKG_VERSION"), "parallel": par::is_parallel() })
}

/// Run one stage and write its files under `out`.
pub fn run(config: &RunConfig, stage: Stage, out: &Path, workers: usize) -> Result<Manifest> {
    std::fs::create_dir_all(out)?;
    let start = Instant::now();
    let ctx = RunContext { config, cache_dir: Some(out.join("cache")) };
    let (output, cache_hit) = par::with_workers(workers, || execute(&ctx, stage))?;
    let mut files = vec![];
    let doc = json!({
        "stage": stage.name(),
        "config_hash": config.hash(),
        "versions": versions(),
        "config": config,
        "results": output.results,
    });
    let json_name = format!("{}.json", stage.name());
    std::fs::write(out.join(&json_name), serde_json::to_string_pretty(&doc)? + "\n")?;
    files.push(json_name);
    for t in &output.tables {
        let name = format!("{}.csv", t.name);
        t.write(&out.join(&name))?;
        files.push(name);
    }
    let manifest = Manifest {
        stage: stage.name().into(),
        config_hash: config.hash(),
        version: env!("CARGO_PKG_VERSION").into(),
        parallel: par::is_parallel(),
        workers,
        wall_seconds: start.elapsed().as_secs_f64(),
        files,
        cache_hit,
    };
    std::fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

/// Compute a stage without touching the output directory (except the cache).
/// The flag reports whether cached intermediates were used.
pub fn execute(ctx: &RunContext, stage: Stage) -> Result<(StageOutput, bool)> {
    let c = ctx.config;
    let mut hit = false;
    let out = match stage {
        Stage::Spectrum => spectrum(c)?,
        Stage::Constants => constants(c)?,
        Stage::PerturbCompare => perturb_compare(c)?,
        Stage::Gate => gate(c)?,
        Stage::Optimize => optimize(c)?,
        Stage::SweepTg => {
            let (rows, h) = sweep_tg_cached(ctx)?;
            hit = h;
            sweep_tg_output(&rows)
        }
        Stage::SweepFlux => sweep_flux(c)?,
        Stage::SweepEj => sweep_ej(c)?,
        Stage::Lindblad => lindblad(c)?,
        Stage::Capnet => capnet(c)?,
        Stage::FitScaling => {
            let (rows, h) = sweep_tg_cached(ctx)?;
            hit = h;
            fit_scaling(c, &rows)?
        }
    };
    Ok((out, hit))
}

fn label(l: [usize; 3]) -> String {
    format!("{}{}{}", l[0], l[1], l[2])
}

fn spectrum(c: &RunConfig) -> Result<StageOutput> {
    let s = build_composite_with(&c.circuit_spec()?, &c.truncation.options())?;
    let mut t = Table::new("spectrum", &["index", "label", "energy_ghz", "overlap"]);
    for i in 0..s.truncation_dim {
        t.push(vec![i.to_string(), label(s.labels[i]), f(s.energies[i]), f(s.overlaps[i])]);
    }
    let states: Vec<Value> = (0..s.truncation_dim)
        .map(|i| json!({ "label": s.labels[i], "energy": s.energies[i], "overlap": s.overlaps[i] }))
        .collect();
    Ok(StageOutput { results: json!({ "states": states, "hamiltonian_trace": s.hamiltonian_trace }), tables: vec![t] })
}

fn constants(c: &RunConfig) -> Result<StageOutput> {
    let s = build_composite_with(&c.circuit_spec()?, &c.truncation.options())?;
    let k = interaction_constants(&s)?;
    let (m, m111) = s.coupler_ratios()?;
    let sys = GateSystem::from_spectrum(&s.truncate(c.truncation.d)?)?;
    let dchi = k.delta_chi();
    let rows = [
        ("chi", k.chi),
        ("chi_00", k.chi_00),
        ("chi_01", k.chi_01),
        ("chi_10", k.chi_10),
        ("delta_chi_00", dchi[0]),
        ("delta_chi_01", dchi[1]),
        ("delta_chi_10", dchi[2]),
        ("alpha", k.alpha),
        ("eta", k.eta),
        ("h_a", k.h_a),
        ("h_b", k.h_b),
        ("m_00", m[0]),
        ("m_01", m[1]),
        ("m_10", m[2]),
        ("m_111", m111),
        ("omega_res", sys.omega_res),
    ];
    let mut t = Table::new("constants", &["quantity", "value_ghz"]);
    for (n, v) in rows {
        t.push(vec![n.into(), f(v)]);
    }
    Ok(StageOutput {
        results: json!({ "constants": k, "m_ratios": m, "m_111": m111, "omega_res": sys.omega_res }),
        tables: vec![t],
    })
}

fn chi_cells(x: &ChiSet) -> [String; 4] {
    [f(x.chi), f(x.chi_00), f(x.chi_01), f(x.chi_10)]
}

fn perturb_compare(c: &RunConfig) -> Result<StageOutput> {
    let base = c.circuit_spec()?;
    let opts = c.truncation.options();
    let point = |spec: &crate::composite::CircuitSpec| -> Result<Value> {
        let k = interaction_constants(&build_composite_with(spec, &opts)?)?;
        let e = estimates(spec)?;
        let all = chi_second_order_all_levels(spec, &ElementSet::build(spec)?)?;
        Ok(json!({ "exact": k, "estimates": e, "all_levels": all }))
    };
    let here = point(&base)?;

    let mut wc = Table::new(
        "perturb-compare-omega-c",
        &[
            "omega_c", "exact_chi", "exact_chi_00", "exact_chi_01", "exact_chi_10", "exact_alpha", "jc_chi", "jc_chi_00",
            "jc_chi_01", "jc_chi_10", "jc_cr_chi", "jc_cr_chi_00", "jc_cr_chi_01", "jc_cr_chi_10", "alpha4", "alpha_jc",
        ],
    );
    let sweep: Vec<Result<Value>> = par::map(&c.sweep.omega_c, |&w| {
        let mut s = base;
        s.resonator.omega_c = w;
        point(&s)
    });
    let mut omega_pts = vec![];
    for (w, r) in c.sweep.omega_c.iter().zip(sweep) {
        let v = r?;
        let k: crate::composite::InteractionConstants = serde_json::from_value(v["exact"].clone())?;
        let e: crate::perturbation::PerturbativeEstimates = serde_json::from_value(v["estimates"].clone())?;
        let mut row = vec![f(*w), f(k.chi), f(k.chi_00), f(k.chi_01), f(k.chi_10), f(k.alpha)];
        row.extend(chi_cells(&e.chi_jc));
        row.extend(chi_cells(&e.chi_jc_cr));
        row.extend([f(e.alpha4), f(e.alpha_jc)]);
        wc.push(row);
        omega_pts.push(json!({ "omega_c": w, "point": v }));
    }

    let mut sc = Table::new(
        "perturb-compare-scale",
        &[
            "s", "exact_chi", "exact_chi_00", "exact_chi_01", "exact_chi_10", "second_chi", "second_chi_00", "second_chi_01",
            "second_chi_10",
        ],
    );
    let scaled: Vec<Result<(Value, ChiSet, ChiSet)>> = par::map(&c.sweep.coupling_scales, |&s| {
        let spec = base.with_coupling_scale(s);
        let k = interaction_constants(&build_composite_with(&spec, &opts)?)?;
        let all = chi_second_order_all_levels(&spec, &ElementSet::build(&spec)?)?;
        let s2 = s * s;
        let ex = ChiSet { chi: k.chi / s2, chi_00: k.chi_00 / s2, chi_01: k.chi_01 / s2, chi_10: k.chi_10 / s2 };
        let so = ChiSet { chi: all.chi / s2, chi_00: all.chi_00 / s2, chi_01: all.chi_01 / s2, chi_10: all.chi_10 / s2 };
        Ok((json!({ "s": s, "exact_over_s2": ex, "second_order_over_s2": so }), ex, so))
    });
    let mut scale_pts = vec![];
    for (s, r) in c.sweep.coupling_scales.iter().zip(scaled) {
        let (v, ex, so) = r?;
        let mut row = vec![f(*s)];
        row.extend(chi_cells(&ex));
        row.extend(chi_cells(&so));
        sc.push(row);
        scale_pts.push(v);
    }
    Ok(StageOutput {
        results: json!({ "base": here, "omega_c_sweep": omega_pts, "coupling_scale_sweep": scale_pts }),
        tables: vec![wc, sc],
    })
}

fn gate(c: &RunConfig) -> Result<StageOutput> {
    let s = build_composite_with(&c.circuit_spec()?, &c.truncation.options())?;
    let k = interaction_constants(&s)?;
    let (m, _) = s.coupler_ratios()?;
    let sys = GateSystem::from_spectrum(&s.truncate(c.truncation.d)?)?;
    let pulse = c.pulse.pulse(sys.m111);
    pulse.validate()?;
    let (ev, g) = gate_outcome(&sys, &pulse, &c.integrator)?;
    let pred = predict(&k, &m, pulse.tau, pulse.detuning)?;
    let predicted = [pred.phi_ij[0], pred.phi_ij[1], pred.phi_ij[2], pred.phi_11];
    let mut t = Table::new("gate", &["state", "phi_numeric_rad", "phi_predicted_rad", "leakage"]);
    for i in 0..4 {
        t.push(vec![label(COMPUTATIONAL[i]), f(ev.phases[i]), f(predicted[i]), f(ev.leakage_budget[i])]);
    }
    Ok(StageOutput {
        results: json!({
            "pulse": pulse, "gate": g, "phases": ev.phases, "leakage_budget": ev.leakage_budget,
            "phi_rel": ev.phi_rel(), "prediction": pred,
        }),
        tables: vec![t],
    })
}

fn analytic_seed(c: &RunConfig, s: &crate::composite::DressedSpectrum) -> Result<impl Fn(f64) -> Option<f64> + Sync + Send> {
    let k = interaction_constants(s)?;
    let (m, _) = s.coupler_ratios()?;
    let on = c.optimizer.analytic_seed;
    Ok(move |t: f64| on.then(|| analytic_detuning(&k, &m, t)))
}

fn optimize(c: &RunConfig) -> Result<StageOutput> {
    let s = build_composite_with(&c.circuit_spec()?, &c.truncation.options())?;
    let seed = analytic_seed(c, &s)?;
    let sys = GateSystem::from_spectrum(&s.truncate(c.truncation.d)?)?;
    let t_gate = c.pulse.t_gate;
    let jobs = [true, false];
    let mut r = par::map(&jobs, |&opt| {
        if opt {
            optimize_drive(&sys, t_gate, seed(t_gate), &c.integrator, &c.optimizer)
        } else {
            calibrate_resonant(&sys, t_gate, &c.integrator, &c.optimizer)
        }
    })
    .into_iter();
    let best = r.next().expect("two jobs")?;
    let resonant = r.next().expect("two jobs")?;
    let mut t = Table::new("optimize", &["drive", "t_gate_ns", "amplitude_ghz", "detuning_ghz", "eps_c", "phi_rel", "leakage"]);
    for (n, cal) in [("optimized", &best), ("resonant", &resonant)] {
        t.push(vec![
            n.into(),
            f(cal.t_gate),
            f(cal.pulse.amplitude),
            f(cal.pulse.detuning),
            f(cal.infidelity()),
            f(cal.gate.phi_rel),
            f(cal.gate.leakage),
        ]);
    }
    Ok(StageOutput {
        results: json!({ "optimized": best, "resonant": resonant, "reduction": best.infidelity() / resonant.infidelity() }),
        tables: vec![t],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTgRow {
    pub t_gate: f64,
    pub optimized: Calibration,
    pub resonant: Option<Calibration>,
}

pub fn sweep_tg_rows(c: &RunConfig) -> Result<Vec<SweepTgRow>> {
    let s = build_composite_with(&c.circuit_spec()?, &c.truncation.options())?;
    let seed = analytic_seed(c, &s)?;
    let sys = GateSystem::from_spectrum(&s.truncate(c.truncation.d)?)?;
    let jobs: Vec<(f64, bool)> = c
        .sweep
        .t_gates
        .iter()
        .flat_map(|&t| std::iter::once((t, true)).chain(c.sweep.resonant_reference.then_some((t, false))))
        .collect();
    let cals = par::map(&jobs, |&(t, opt)| {
        if opt {
            optimize_drive(&sys, t, seed(t), &c.integrator, &c.optimizer)
        } else {
            calibrate_resonant(&sys, t, &c.integrator, &c.optimizer)
        }
    });
    let mut rows: Vec<SweepTgRow> = vec![];
    for ((t, opt), cal) in jobs.into_iter().zip(cals) {
        let cal = cal?;
        if opt {
            rows.push(SweepTgRow { t_gate: t, optimized: cal, resonant: None });
        } else if let Some(r) = rows.last_mut() {
            r.resonant = Some(cal);
        }
    }
    Ok(rows)
}

/// Key over everything a gate-time sweep depends on.
fn sweep_key(c: &RunConfig) -> Result<String> {
    let v = json!({
        "circuit": c.circuit_spec()?, "truncation": c.truncation, "integrator": c.integrator,
        "optimizer": c.optimizer, "t_gates": c.sweep.t_gates, "resonant": c.sweep.resonant_reference,
    });
    Ok(crate::config::hash_hex(v.to_string().as_bytes()))
}

fn sweep_tg_cached(ctx: &RunContext) -> Result<(Vec<SweepTgRow>, bool)> {
    let path = match &ctx.cache_dir {
        Some(d) => Some(d.join(format!("{}-sweep-tg.json", sweep_key(ctx.config)?))),
        None => None,
    };
    if let Some(p) = &path {
        if let Ok(text) = std::fs::read_to_string(p) {
            if let Ok(rows) = serde_json::from_str::<Vec<SweepTgRow>>(&text) {
                log::info!("sweep-tg cache hit: {}", p.display());
                return Ok((rows, true));
            }
        }
    }
    let rows = sweep_tg_rows(ctx.config)?;
    if let Some(p) = &path {
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(p, serde_json::to_string(&rows)?)?;
    }
    Ok((rows, false))
}

fn sweep_tg_output(rows: &[SweepTgRow]) -> StageOutput {
    let mut t = Table::new(
        "sweep-tg",
        &["t_gate_ns", "eps_c", "amplitude_ghz", "detuning_ghz", "phi_rel", "leakage", "eps_resonant"],
    );
    for r in rows {
        let o = &r.optimized;
        t.push(vec![
            f(r.t_gate),
            f(o.infidelity()),
            f(o.pulse.amplitude),
            f(o.pulse.detuning),
            f(o.gate.phi_rel),
            f(o.gate.leakage),
            r.resonant.as_ref().map(|x| f(x.infidelity())).unwrap_or_default(),
        ]);
    }
    StageOutput { results: json!({ "points": rows }), tables: vec![t] }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// ε = prefactor · t^exponent.
    pub exponent: f64,
    /// 1σ from the fit residuals.
    pub exponent_sigma: f64,
    pub prefactor: f64,
    pub points: usize,
}

/// Least squares on (ln t, ln ε).
pub fn fit_power_law(t: &[f64], eps: &[f64]) -> Result<PowerLawFit> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(eps)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len();
    if n < 3 {
        return Err(Error::Unreachable(format!("power-law fit needs ≥ 3 positive points, got {n}")));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Unreachable("power-law fit: all gate times equal".into()));
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    Ok(PowerLawFit { exponent: slope, exponent_sigma: (ssr / (nf - 2.0) / sxx).sqrt(), prefactor: icpt.exp(), points: n })
}

fn fit_scaling(c: &RunConfig, rows: &[SweepTgRow]) -> Result<StageOutput> {
    let [lo, hi] = c.sweep.fit_window;
    let sel: Vec<&SweepTgRow> = rows.iter().filter(|r| r.t_gate >= lo && r.t_gate <= hi).collect();
    let t: Vec<f64> = sel.iter().map(|r| r.t_gate).collect();
    let e: Vec<f64> = sel.iter().map(|r| r.optimized.infidelity()).collect();
    let fit = fit_power_law(&t, &e)?;
    let mut tab = Table::new("fit-scaling", &["t_gate_ns", "eps_c", "eps_fit"]);
    for (a, b) in t.iter().zip(&e) {
        tab.push(vec![f(*a), f(*b), f(fit.prefactor * a.powf(fit.exponent))]);
    }
    Ok(StageOutput { results: json!({ "fit": fit, "window_ns": [lo, hi] }), tables: vec![tab] })
}

fn sweep_flux(c: &RunConfig) -> Result<StageOutput> {
    let spec = c.circuit_spec()?;
    let opts = c.truncation.options();
    let sys = GateSystem::from_circuit(&spec, &opts, c.truncation.d)?;
    let cal = optimize_drive(&sys, c.pulse.t_gate, None, &c.integrator, &c.optimizer)?;
    let offsets: Vec<f64> = c.sweep.flux_offsets.iter().map(|&x| micro_phi0_to_rad(x)).collect();
    let pts = flux_offset_sweep(&spec, &opts, c.truncation.d, &cal.pulse, &offsets, c.sweep.flux_target, &c.integrator)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let sigma = flux_sigma(&c.noise)?;
    let mut t = Table::new("sweep-flux", &["offset_uphi0", "offset_rad", "eps_c", "leakage", "phi_rel"]);
    for p in &pts {
        t.push(vec![f(units::rad_to_micro_phi0(p.offset)), f(p.offset), f(p.infidelity), f(p.leakage), f(p.phi_rel)]);
    }
    Ok(StageOutput {
        results: json!({ "calibration": cal, "points": pts, "sigma_uphi0": sigma, "noise": c.noise }),
        tables: vec![t],
    })
}

fn sweep_ej(c: &RunConfig) -> Result<StageOutput> {
    let spec = c.circuit_spec()?;
    let ej: Vec<f64> = c.sweep.ej_fractions.iter().map(|x| spec.fluxonium_a.e_j * (1.0 + x)).collect();
    let pts = ej_sweep(&spec, &c.truncation.options(), c.truncation.d, &ej, &c.sweep.t_gates, &c.integrator, &c.optimizer)?;
    let mut t = Table::new("sweep-ej", &["e_j_a_ghz", "t_gate_ns", "eps_c", "eps_c_fixed_drive"]);
    for p in &pts {
        t.push(vec![f(p.e_j_a), f(p.t_gate), f(p.infidelity), f(p.infidelity_fixed)]);
    }
    Ok(StageOutput { results: json!({ "points": pts }), tables: vec![t] })
}

fn lindblad(c: &RunConfig) -> Result<StageOutput> {
    let set = c
        .dissipation
        .clone()
        .ok_or_else(|| Error::Config("stage lindblad needs [dissipation] (e.g. preset dissipation-A)".into()))?;
    let s = build_composite_with(&c.circuit_spec()?, &c.truncation.options())?.truncate(c.truncation.d_open)?;
    let sys = GateSystem::from_spectrum(&s)?;
    let cal = optimize_drive(&sys, c.pulse.t_gate, None, &c.integrator, &c.optimizer)?;
    let budget = error_budget(&s, &sys, &cal.pulse, &set, cal.gate.virtual_z, &c.integrator)?;
    let tau = c.pulse.t_gate / GATE_OVER_TAU;
    let jump = loss_estimates(&s, &set, tau, LossEstimateForm::JumpElement)?;
    let charge = loss_estimates(&s, &set, tau, LossEstimateForm::ChargeElement)?;
    let mut t = Table::new("lindblad", &["channel", "master_equation", "estimate_jump_element", "estimate_charge_element"]);
    for ch in crate::lindblad::Channel::ALL {
        t.push(vec![
            format!("{ch:?}").to_lowercase(),
            f(budget.incoherent_budget.get(ch)),
            f(jump.get(ch)),
            f(charge.get(ch)),
        ]);
    }
    t.push(vec!["total".into(), f(budget.infidelity), f(jump.sum()), f(charge.sum())]);
    Ok(StageOutput {
        results: json!({
            "dissipation": set, "calibration": cal, "budget": budget,
            "estimates": { "jump_element": jump, "charge_element": charge },
        }),
        tables: vec![t],
    })
}

fn capnet(c: &RunConfig) -> Result<StageOutput> {
    let n = c.network.ok_or_else(|| Error::Config("stage capnet needs [network] (e.g. preset si-differential)".into()))?;
    let net = n.capacitances();
    let eff = effective_circuit(&net)?;
    let full = build_matrix(&net)?;
    let trunc = truncated_matrix(&net)?;
    let (a, b) = n.fluxonia();
    let bound = if c.capnet.bound_threshold_khz > 0.0 {
        Some(zz_bound_cab(&net, &a, &b, c.capnet.bound_threshold_khz * 1e-6, &c.truncation.options(), c.capnet.bound_tol))
    } else {
        None
    };
    let bound_value = match &bound {
        Some(Ok(CabBound::Finite(x))) => json!(x),
        Some(Ok(CabBound::Unbounded)) => json!("unbounded"),
        Some(Err(e)) => json!({ "error": e.to_string() }),
        None => Value::Null,
    };
    let bound_num = match bound {
        Some(Ok(CabBound::Finite(x))) => Some(x),
        _ => None,
    };
    let computed = [
        ("e_c_a", eff.e_c_a),
        ("e_c_b", eff.e_c_b),
        ("z_c", eff.z_c_out),
        ("omega_c", eff.omega_c_out),
        ("j_c", eff.j_ac.abs()),
        ("j_c_nc01", eff.j_c_nc01),
        ("j_ab", eff.j_ab.abs()),
        ("c_ab_bound", bound_num.unwrap_or(f64::NAN)),
    ];
    let reference = |name: &str| -> Option<f64> {
        let r = c.reference?;
        Some(match name {
            "e_c_a" | "e_c_b" => r.e_c,
            "z_c" => r.z_c,
            "j_c" => r.j_c,
            "j_c_nc01" => r.j_c_nc01,
            "j_ab" => r.j_ab,
            "c_ab_bound" => r.c_ab_bound,
            _ => return None,
        })
    };
    let mut t = Table::new("capnet", &["quantity", "computed", "reference", "relative_deviation"]);
    for (name, v) in computed {
        let r = reference(name);
        t.push(vec![
            name.into(),
            if v.is_nan() { String::new() } else { f(v) },
            r.map(f).unwrap_or_default(),
            r.filter(|_| !v.is_nan()).map(|r| f((v - r) / r)).unwrap_or_default(),
        ]);
    }
    let rows = |m: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> { m.row_iter().map(|r| r.iter().copied().collect()).collect() };
    let trunc_rows: Vec<Vec<f64>> = trunc.row_iter().map(|r| r.iter().copied().collect()).collect();
    Ok(StageOutput {
        results: json!({
            "network": n, "effective": eff, "capacitance_matrix_ff": rows(&full),
            "truncated_matrix_ff": trunc_rows, "c_ab_bound_ff": bound_value,
            "threshold_khz": c.capnet.bound_threshold_khz, "reference": c.reference,
        }),
        tables: vec![t],
    })
}
