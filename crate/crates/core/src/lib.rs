//! Fiber spectra and one-boson scattering for translation-invariant
//! matter-field models restricted to the vacuum and one-particle sectors.

pub mod cli;
pub mod config;
pub mod error;
pub mod fiber;
pub mod grid;
pub mod model;
pub mod mourre;
pub mod quad;
pub mod scattering;
pub mod smooth;
pub mod spectral;
pub mod thresholds;

pub use error::{Error, Result};
pub use fiber::{assemble_fiber, ArrowheadFiberOperator, ExtendedFiberOperator};
pub use grid::{FiberState, GridSpec, MomentumGrid};
pub use model::DispersionModel;
pub use spectral::EigenDecomposition;

/// Complex scalar used for all state and operator entries.
pub type C64 = num_complex::Complex64;
