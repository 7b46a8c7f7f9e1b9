#![allow(dead_code)]

use fluxcz::composite::CircuitSpec;
use fluxcz::config::{resolve, RunConfig};
use fluxcz::propagator::GateSystem;
use nalgebra::DMatrix;

pub fn config(presets: &[&str]) -> RunConfig {
    let names: Vec<String> = presets.iter().map(|s| s.to_string()).collect();
    resolve(None, &names, &[]).expect("preset resolves")
}

pub fn table1() -> RunConfig {
    config(&["table1-main"])
}

pub fn table1_spec() -> CircuitSpec {
    table1().circuit_spec().unwrap()
}

/// Six-level toy with the gate's label structure: computational states, the
/// resonator-excited |1,1,1⟩ target and a spectator |0,1,0⟩.
pub fn toy_system() -> GateSystem {
    let energies = vec![0.0, 0.52, 0.61, 1.13, 7.83, 6.95];
    let mut a = DMatrix::<f64>::zeros(6, 6);
    for (i, j, v) in [(3, 4, 1.3), (0, 5, 1.2), (1, 4, 0.05), (2, 5, 0.04), (1, 2, 0.02)] {
        a[(i, j)] = v;
        a[(j, i)] = -v;
    }
    GateSystem {
        energies,
        m111: 1.3,
        drive_op: a,
        labels: vec![[0, 0, 0], [0, 0, 1], [1, 0, 0], [1, 0, 1], [1, 1, 1], [0, 1, 0]],
        comp: [0, 1, 2, 3],
        idx_111: 4,
        omega_res: 7.83 - 1.13,
    }
}
