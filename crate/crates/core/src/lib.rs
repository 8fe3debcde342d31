//! Weakly interacting oscillators on dense graphs.
//!
//! Simulation of the interacting particle system on sampled or file-backed
//! graphs, graphon cut-norm and cut-distance machinery, a pseudo-spectral
//! solver for the labeled non-linear Fokker-Planck limit, and the experiment
//! drivers wiring them together.

pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fokker_planck;
pub mod graphon;
pub mod graphs;
pub mod torus;

pub use error::{Error, Result};
