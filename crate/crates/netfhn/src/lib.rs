//! Stochastic FitzHugh-Nagumo dynamics on finite networks: diffusion on the
//! edges, dynamic stochastic Kirchhoff conditions on the nodes driven by
//! compensated pure-jump noise, and a verification harness that checks the
//! structural properties of the system (self-adjointness, dissipativity,
//! stochastic-convolution isometry, pathwise contraction, Yosida convergence)
//! at desk scale.

pub mod assembly;
pub mod coeffs;
pub mod config;
pub mod error;
pub mod graph;
pub mod integrator;
pub mod levy;
pub mod mesh;
pub mod nonlinearity;
pub mod output;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
