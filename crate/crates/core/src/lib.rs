//! Anisotropic threshold dynamics with forcing, the limit-flow quantities it
//! converges to, and a level-set reference solver.

pub mod anisotropy;
pub mod config;
pub mod error;
pub mod fft;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod nonlocal;
pub mod norms;
pub mod quad;
pub mod refsolver;
pub mod scenario;
pub mod scheme;

pub use error::{Error, Result};
