//! Run configuration: TOML files layered over named presets, plus `key=value`
//! overrides. Precedence, lowest first: presets (in order), file, overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::capnet::{effective_circuit, CapacitanceNetwork, Topology};
use crate::circuit::FluxoniumSpec;
use crate::composite::{CircuitSpec, CompositeOptions, CouplerReference, ProductDims};
use crate::drive::{seed_amplitude, PulseSpec, GATE_OVER_TAU};
use crate::error::{Error, Result};
use crate::lindblad::DissipationSet;
use crate::optimize::OptimizerSettings;
use crate::propagator::IntegratorSettings;
use crate::robustness::{FluxTarget, NoiseSpec};

const PRESETS: &[(&str, &str)] = &[
    ("table1-main", include_str!("../presets/table1-main.toml")),
    ("si-grounded-main", include_str!("../presets/si-grounded-main.toml")),
    ("si-grounded-highZ", include_str!("../presets/si-grounded-highZ.toml")),
    ("si-differential", include_str!("../presets/si-differential.toml")),
    ("si-differential-highZ", include_str!("../presets/si-differential-highZ.toml")),
    ("si-lowEC-highZ", include_str!("../presets/si-lowEC-highZ.toml")),
    ("dissipation-A", include_str!("../presets/dissipation-A.toml")),
    ("dissipation-B", include_str!("../presets/dissipation-B.toml")),
    ("dissipation-C", include_str!("../presets/dissipation-C.toml")),
    ("dissipation-D", include_str!("../presets/dissipation-D.toml")),
    ("dissipation-E", include_str!("../presets/dissipation-E.toml")),
    ("dissipation-F", include_str!("../presets/dissipation-F.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

pub fn preset_table(name: &str) -> Result<toml::Table> {
    let (_, src) = PRESETS
        .iter()
        .find(|p| p.0.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Config(format!("unknown preset '{name}' (known: {})", preset_names().join(", "))))?;
    src.parse::<toml::Table>().map_err(|e| Error::Config(format!("preset {name}: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inductive {
    pub e_j_a: f64,
    pub e_j_b: f64,
    pub e_l_a: f64,
    pub e_l_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSource {
    pub topology: Topology,
    pub c_f: f64,
    #[serde(default)]
    pub c_fp: f64,
    pub c_c: f64,
    pub c_ab: f64,
    pub z_in: f64,
    pub omega_in: f64,
    pub inductive: Inductive,
}

impl NetworkSource {
    pub fn capacitances(&self) -> CapacitanceNetwork {
        CapacitanceNetwork {
            topology: self.topology,
            c_f: self.c_f,
            c_fp: self.c_fp,
            c_c: self.c_c,
            c_ab: self.c_ab,
            z_in: self.z_in,
            omega_in: self.omega_in,
        }
    }

    pub fn fluxonia(&self) -> (FluxoniumSpec, FluxoniumSpec) {
        let i = &self.inductive;
        // E_C is replaced by the network's value.
        (FluxoniumSpec::new(1.0, i.e_j_a, i.e_l_a), FluxoniumSpec::new(1.0, i.e_j_b, i.e_l_b))
    }
}

/// Tabulated network outputs a capnet run is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapnetReference {
    pub e_c: f64,
    pub z_c: f64,
    pub j_c: f64,
    pub j_c_nc01: f64,
    pub j_ab: f64,
    /// fF.
    pub c_ab_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Truncation {
    pub dims: ProductDims,
    pub retain: usize,
    /// Dressed states kept for coherent propagation.
    pub d: usize,
    /// Dressed states kept for open-system runs.
    pub d_open: usize,
    pub reference: CouplerReference,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { dims: ProductDims::default(), retain: 60, d: 45, d_open: 28, reference: CouplerReference::Bare }
    }
}

impl Truncation {
    pub fn options(&self) -> CompositeOptions {
        CompositeOptions { dims: self.dims, retain: self.retain, reference: self.reference }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseTemplate {
    pub t_gate: f64,
    /// GHz; defaults to the first-order π-pulse estimate.
    pub amplitude: Option<f64>,
    pub detuning: f64,
    pub drag_scale: f64,
    pub drag_alpha: f64,
}

impl Default for PulseTemplate {
    fn default() -> Self {
        PulseTemplate { t_gate: 100.0, amplitude: None, detuning: 0.0, drag_scale: 0.0, drag_alpha: 0.0 }
    }
}

impl PulseTemplate {
    pub fn pulse(&self, m111: f64) -> PulseSpec {
        let tau = self.t_gate / GATE_OVER_TAU;
        PulseSpec {
            amplitude: self.amplitude.unwrap_or_else(|| seed_amplitude(tau, m111)),
            detuning: self.detuning,
            drag_scale: self.drag_scale,
            drag_alpha: self.drag_alpha,
            ..PulseSpec::with_gate_time(self.t_gate, 0.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// ns.
    pub t_gates: Vec<f64>,
    /// Also calibrate the resonant drive at each gate time.
    pub resonant_reference: bool,
    /// µΦ₀.
    pub flux_offsets: Vec<f64>,
    pub flux_target: FluxTarget,
    /// Relative E_J^A offsets.
    pub ej_fractions: Vec<f64>,
    /// Bare coupler frequencies (GHz) for perturb-compare.
    pub omega_c: Vec<f64>,
    /// Coupling scale factors s for perturb-compare.
    pub coupling_scales: Vec<f64>,
    /// Gate-time window (ns) of the power-law fit.
    pub fit_window: [f64; 2],
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            t_gates: vec![45.0, 55.0, 65.0, 75.0, 85.0, 95.0, 105.0, 115.0],
            resonant_reference: false,
            flux_offsets: vec![-50.0, -25.0, -10.0, 0.0, 10.0, 25.0, 50.0],
            flux_target: FluxTarget::A,
            ej_fractions: vec![-0.02, -0.01, 0.0, 0.01, 0.02],
            omega_c: vec![],
            coupling_scales: vec![],
            fit_window: [45.0, 115.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapnetSettings {
    /// |η| bound for the C_AB search (kHz); 0 disables it.
    pub bound_threshold_khz: f64,
    /// fF.
    pub bound_tol: f64,
}

impl Default for CapnetSettings {
    fn default() -> Self {
        CapnetSettings { bound_threshold_khz: 4.0, bound_tol: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Presets applied below this file, in order.
    #[serde(default)]
    pub presets: Vec<String>,
    pub circuit: Option<CircuitSpec>,
    pub network: Option<NetworkSource>,
    pub reference: Option<CapnetReference>,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub pulse: PulseTemplate,
    #[serde(default)]
    pub integrator: IntegratorSettings,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    pub dissipation: Option<DissipationSet>,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default = "NoiseSpec::standard")]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub capnet: CapnetSettings,
}

/// Recursive table merge; `top` wins.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// `a.b.c=value`; the value is read as TOML, falling back to a bare string.
pub fn parse_override(s: &str) -> Result<(Vec<String>, toml::Value)> {
    let (key, raw) = s.split_once('=').ok_or_else(|| Error::Config(format!("override '{s}' is not key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(|p| p.trim().to_string()).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override '{s}' has an empty key segment")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((path, value))
}

fn set_path(t: &mut toml::Table, path: &[String], v: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = t;
    for p in parents {
        let entry = cur.entry(p.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| Error::Config(format!("override: '{p}' is not a table")))?;
    }
    cur.insert(last.clone(), v);
    Ok(())
}

/// Layer presets, file contents and overrides into one validated config.
pub fn resolve(file: Option<toml::Table>, presets: &[String], overrides: &[String]) -> Result<RunConfig> {
    let mut user = file.unwrap_or_default();
    let mut names: Vec<String> = match user.remove("presets") {
        Some(toml::Value::Array(a)) => a
            .into_iter()
            .map(|v| v.as_str().map(str::to_string).ok_or_else(|| Error::Config("presets: expected strings".into())))
            .collect::<Result<_>>()?,
        Some(_) => return Err(Error::Config("presets: expected an array of names".into())),
        None => vec![],
    };
    names.extend(presets.iter().cloned());
    let mut merged = toml::Table::new();
    for n in &names {
        merge(&mut merged, preset_table(n)?);
    }
    merge(&mut merged, user);
    for o in overrides {
        let (path, v) = parse_override(o)?;
        set_path(&mut merged, &path, v)?;
    }
    merged.insert("presets".into(), toml::Value::Array(names.into_iter().map(toml::Value::String).collect()));
    let cfg: RunConfig = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path, presets: &[String], overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let table = text.parse::<toml::Table>().map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    resolve(Some(table), presets, overrides)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        match (&self.circuit, &self.network) {
            (Some(_), Some(_)) => return Err(Error::Config("give either [circuit] or [network], not both".into())),
            (None, None) => return Err(Error::Config("missing circuit source: [circuit] or [network] (or a preset)".into())),
            (Some(c), None) => c.validate()?,
            (None, Some(n)) => n.capacitances().validate()?,
        }
        let t = &self.truncation;
        if t.d < 16 || t.d_open < 16 || t.d > t.retain || t.d_open > t.retain || t.retain > t.dims.total() {
            return Err(Error::invalid("truncation", "need 16 ≤ d, d_open ≤ retain ≤ product dimension"));
        }
        if !(self.pulse.t_gate > 0.0) {
            return Err(Error::invalid("pulse.t_gate", "must be > 0"));
        }
        if !(self.integrator.points_per_period >= 4.0) {
            return Err(Error::invalid("integrator.points_per_period", "must be ≥ 4"));
        }
        if let Some(d) = &self.dissipation {
            d.validate()?;
        }
        let s = &self.sweep;
        if s.t_gates.is_empty() || s.t_gates.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::invalid("sweep.t_gates", "must be non-empty and positive"));
        }
        if s.fit_window[0] >= s.fit_window[1] {
            return Err(Error::invalid("sweep.fit_window", "need lower < upper"));
        }
        self.noise.validate()
    }

    /// The circuit Hamiltonian, derived from the network when one is given.
    pub fn circuit_spec(&self) -> Result<CircuitSpec> {
        if let Some(c) = self.circuit {
            return Ok(c);
        }
        let n = self.network.ok_or_else(|| Error::Config("no circuit source".into()))?;
        let (a, b) = n.fluxonia();
        let spec = effective_circuit(&n.capacitances())?.to_circuit_spec(&a, &b, self.truncation.dims.c);
        spec.validate()?;
        Ok(spec)
    }

    /// Canonical JSON of the config (what the hash and the echo use).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// sha256 of the canonical JSON, hex.
    pub fn hash(&self) -> String {
        hash_hex(self.canonical_json().as_bytes())
    }
}

pub fn hash_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
