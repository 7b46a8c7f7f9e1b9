use approx::assert_relative_eq;
use fluxcz::config::{resolve, RunConfig};
use fluxcz::harness::*;
use fluxcz::optimize::brent_min;
use proptest::prelude::*;

fn cfg(presets: &[&str], ov: &[&str]) -> RunConfig {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    resolve(None, &s(presets), &s(ov)).unwrap()
}

fn read(dir: &std::path::Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn stage_names_roundtrip() {
    for s in Stage::ALL {
        assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        assert_eq!(serde_json::to_value(s).unwrap(), serde_json::json!(s.name()));
    }
    assert!("bogus".parse::<Stage>().unwrap_err().is_config());
}

proptest! {
    #[test]
    fn power_law_recovers_exact_exponent(p in -6.0f64..-1.0, a in 1e-3f64..1e3) {
        let t: [f64; 5] = [45.0, 60.0, 80.0, 100.0, 115.0];
        let e: Vec<f64> = t.iter().map(|x| a * x.powf(p)).collect();
        let fit = fit_power_law(&t, &e).unwrap();
        prop_assert!((fit.exponent - p).abs() < 1e-10);
        prop_assert!((fit.prefactor / a - 1.0).abs() < 1e-8);
        prop_assert!(fit.exponent_sigma < 1e-8);
    }
}

#[test]
fn power_law_noise_and_errors() {
    let t: [f64; 4] = [45.0, 60.0, 80.0, 100.0];
    let e: Vec<f64> = t.iter().zip([1.1, 0.9, 1.05, 0.95]).map(|(x, k)| k * x.powf(-4.0)).collect();
    let fit = fit_power_law(&t, &e).unwrap();
    assert!((fit.exponent + 4.0).abs() < 0.3 && fit.exponent_sigma > 0.0);
    // Non-positive points are dropped.
    assert!(fit_power_law(&[1.0, 2.0, 3.0], &[1.0, 0.0, 2.0]).is_err());
    assert!(fit_power_law(&[2.0; 4], &[1.0, 2.0, 3.0, 4.0]).is_err());
}

#[test]
fn brent_finds_parabola_minimum() {
    let mut calls = 0;
    let (x, fx) = brent_min(
        |x| {
            calls += 1;
            Ok((x - 0.3721).powi(2) + 2.0)
        },
        -1.0,
        2.0,
        1e-7,
        100,
    )
    .unwrap();
    // A quadratic minimum is only resolvable to ~√ε_mach·|f|.
    assert_relative_eq!(x, 0.3721, epsilon = 1e-7);
    assert_relative_eq!(fx, 2.0, epsilon = 1e-14);
    assert!(calls < 20, "{calls}");
}

#[test]
fn capnet_stage_files_are_deterministic() {
    let c = cfg(&["si-grounded-main"], &["capnet.bound_threshold_khz=0.0"]);
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let m = run(&c, Stage::Capnet, d1.path(), 1).unwrap();
    run(&c, Stage::Capnet, d2.path(), 1).unwrap();
    assert_eq!(m.files, ["capnet.json", "capnet.csv"]);
    assert_eq!(m.config_hash, c.hash());
    for f in &m.files {
        assert_eq!(read(d1.path(), f), read(d2.path(), f), "{f}");
    }
    let csv = read(d1.path(), "capnet.csv");
    assert!(csv.starts_with("quantity,computed,reference,relative_deviation\n"));
    let doc: serde_json::Value = serde_json::from_str(&read(d1.path(), "capnet.json")).unwrap();
    assert_eq!(doc["config_hash"], c.hash());
    assert!(doc["versions"]["fluxcz"].is_string());
    assert_eq!(doc["config"]["network"]["c_c"], 2.45);
    assert!(!read(d1.path(), "capnet.json").contains("wall_seconds"));
    let man: serde_json::Value = serde_json::from_str(&read(d1.path(), "manifest.json")).unwrap();
    assert!(man["wall_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn missing_sections_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&cfg(&["table1-main"], &[]), Stage::Capnet, dir.path(), 1).unwrap_err().is_config());
    assert!(run(&cfg(&["table1-main"], &[]), Stage::Lindblad, dir.path(), 1).unwrap_err().is_config());
}

#[test]
fn sweep_is_cached_and_reused_by_fit() {
    let c = cfg(
        &["table1-main"],
        &[
            "truncation.dims.a=8",
            "truncation.dims.c=5",
            "truncation.dims.b=8",
            "truncation.retain=40",
            "truncation.d=16",
            "truncation.d_open=16",
            "sweep.t_gates=[50.0, 70.0, 90.0]",
            "sweep.resonant_reference=false",
            "sweep.fit_window=[40.0, 100.0]",
        ],
    );
    let dir = tempfile::tempdir().unwrap();
    let m1 = run(&c, Stage::SweepTg, dir.path(), 1).unwrap();
    assert!(!m1.cache_hit);
    let m2 = run(&c, Stage::FitScaling, dir.path(), 1).unwrap();
    assert!(m2.cache_hit);
    let csv = read(dir.path(), "sweep-tg.csv");
    assert_eq!(csv.lines().count(), 4);
    let doc: serde_json::Value = serde_json::from_str(&read(dir.path(), "fit-scaling.json")).unwrap();
    assert_eq!(doc["results"]["fit"]["points"], 3);
    assert!(doc["results"]["fit"]["exponent"].as_f64().unwrap() < 0.0);
}
