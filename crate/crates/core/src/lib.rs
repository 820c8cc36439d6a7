//! Localization, Lyapunov exponents and transport for the one-dimensional
//! discrete Dirac operator with a decaying random potential.

pub mod disorder;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod greens;
pub mod linalg;
pub mod lyapunov;
pub mod model;
pub mod phase;
pub mod prufer;
pub mod spectra;
pub mod stats;
pub mod transfer;

pub use error::{Error, Result};
