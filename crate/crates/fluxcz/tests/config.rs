mod common;

use approx::assert_relative_eq;
use fluxcz::config::*;
use fluxcz::lindblad::DissipationSet;

fn s(v: &[&str]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

#[test]
fn every_preset_parses() {
    for name in preset_names() {
        let t = preset_table(name).unwrap();
        assert!(!t.is_empty(), "{name}");
        let presets = if name.starts_with("dissipation") { vec!["table1-main", name] } else { vec![name] };
        let cfg = common::config(&presets);
        assert!(cfg.circuit_spec().is_ok(), "{name}");
    }
    assert!(preset_table("TABLE1-MAIN").is_ok());
    assert!(preset_table("nope").is_err());
}

#[test]
fn table1_values() {
    let c = common::table1_spec();
    assert_eq!((c.j_ac, c.j_bc, c.j_ab), (0.33, 0.33, 0.1));
    assert_eq!((c.fluxonium_a.e_c, c.fluxonium_a.e_j, c.fluxonium_a.e_l), (2.0, 7.1, 0.3));
    assert_eq!(c.fluxonium_b.e_j, 7.2);
    assert_eq!(c.fluxonium_a.phi_ext, std::f64::consts::PI);
    assert_eq!((c.resonator.omega_c, c.resonator.impedance), (7.08, 190.0));
    let t = common::table1().truncation;
    assert_eq!((t.dims.a, t.dims.c, t.dims.b, t.retain, t.d, t.d_open), (12, 8, 12, 60, 45, 28));
}

#[test]
fn dissipation_presets_match_table() {
    for l in ["A", "B", "C", "D", "E", "F"] {
        let cfg = common::config(&["table1-main", &format!("dissipation-{l}")]);
        assert_eq!(cfg.dissipation.unwrap(), DissipationSet::preset(l).unwrap());
    }
}

#[test]
fn network_presets_derive_circuit() {
    let cfg = common::config(&["si-grounded-main"]);
    let spec = cfg.circuit_spec().unwrap();
    assert_relative_eq!(spec.fluxonium_a.e_c, 2.0, max_relative = 0.03);
    assert_eq!(spec.fluxonium_a.e_j, 7.1);
    assert!(spec.j_ac > 0.0 && spec.j_bc > 0.0);
}

#[test]
fn overrides() {
    let (p, v) = parse_override("pulse.t_gate=80").unwrap();
    assert_eq!(p, s(&["pulse", "t_gate"]));
    assert_eq!(v.as_integer(), Some(80));
    assert_eq!(parse_override("sweep.flux_target=b").unwrap().1.as_str(), Some("b"));
    assert_eq!(parse_override("x.y=[1.0, 2.0]").unwrap().1.as_array().unwrap().len(), 2);
    assert!(parse_override("novalue").is_err());
    assert!(parse_override("a..b=1").is_err());

    let cfg = resolve(None, &s(&["table1-main"]), &s(&["pulse.t_gate=80.0", "circuit.j_ab=0.12"])).unwrap();
    assert_eq!(cfg.pulse.t_gate, 80.0);
    assert_eq!(cfg.circuit.unwrap().j_ab, 0.12);
}

#[test]
fn layering_and_file_loading() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "presets = [\"table1-main\"]\n[pulse]\nt_gate = 70.0\n[circuit]\nj_ab = 0.2\n").unwrap();
    let cfg = load_config(&path, &s(&["dissipation-D"]), &s(&["pulse.t_gate=55.0"])).unwrap();
    assert_eq!(cfg.pulse.t_gate, 55.0);
    assert_eq!(cfg.circuit.unwrap().j_ab, 0.2);
    assert_eq!(cfg.circuit.unwrap().j_ac, 0.33);
    assert_eq!(cfg.dissipation.unwrap().label, "D");
    assert_eq!(cfg.presets, s(&["table1-main", "dissipation-D"]));
    assert!(load_config(&dir.path().join("missing.toml"), &[], &[]).is_err());
}

#[test]
fn config_errors() {
    let err = |presets: &[&str], ov: &[&str]| resolve(None, &s(presets), &s(ov)).unwrap_err();
    assert!(err(&[], &[]).is_config());
    assert!(err(&["table1-main", "si-grounded-main"], &[]).is_config());
    assert!(err(&["table1-main"], &["circuit.bogus=1"]).is_config());
    assert!(err(&["table1-main"], &["truncation.d=5"]).is_config());
    assert!(err(&["table1-main"], &["pulse.t_gate=-1"]).is_config());
    assert!(err(&["table1-main"], &["sweep.fit_window=[100.0, 50.0]"]).is_config());
    assert!(err(&["table1-main"], &["circuit.resonator.impedance=0.0"]).is_config());
    assert!(err(&["unknown"], &[]).is_config());
    let mut missing = preset_table("table1-main").unwrap();
    missing.get_mut("circuit").unwrap().as_table_mut().unwrap().remove("j_ac");
    assert!(resolve(Some(missing), &[], &[]).unwrap_err().is_config());
}

#[test]
fn hashing() {
    assert_eq!(hash_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    let a = common::table1();
    let b = common::table1();
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
    let c = resolve(None, &s(&["table1-main"]), &s(&["pulse.t_gate=99.0"])).unwrap();
    assert_ne!(a.hash(), c.hash());
    let back: RunConfig = serde_json::from_str(&a.canonical_json()).unwrap();
    assert_eq!(back.hash(), a.hash());
}
