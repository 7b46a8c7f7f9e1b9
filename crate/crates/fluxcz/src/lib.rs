pub mod capnet;
pub mod circuit;
pub mod composite;
pub mod config;
pub mod drive;
pub mod error;
pub mod fidelity;
pub mod harness;
pub mod lindblad;
pub mod linalg;
pub mod optimize;
pub mod par;
pub mod perturbation;
pub mod propagator;
pub mod robustness;
pub mod units;

pub use error::{Error, Result};
