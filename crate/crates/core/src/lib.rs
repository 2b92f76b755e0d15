//! Global and local Rademacher complexity bounds for `l_p`-norm multiple
//! kernel learning, the excess-risk rates they imply, and Monte Carlo tools
//! that check them on synthetic data.
//!
//! Modules follow the data flow: [`norms`] and [`spectra`] describe the class
//! and the kernels, [`bounds`] evaluates complexity bounds, [`excess`] turns
//! them into fixed points and rates, and [`empirical`] estimates the same
//! quantities by simulation.

pub mod bounds;
pub mod empirical;
mod error;
pub mod excess;
pub mod norms;
mod roots;
pub mod spectra;

pub use bounds::{BoundReport, FormulaId, JointSpectrum, LocalQuery};
pub use empirical::{CoordinateLaw, GeneratorSpec, McConfig, McEstimate, SolverOptions};
pub use error::{Error, Result};
pub use excess::{DecayFactor, ExcessReport, FixedPointBound, RateSpec, RiskParams, SoftSparseBayes};
pub use norms::{block_norm, BlockVector, Exponent, MklClass};
pub use spectra::{GramSpectrum, KernelSpectrum, SpectrumSet};
