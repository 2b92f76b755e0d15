//! Synthetic generators, Monte Carlo complexity estimators, the constrained
//! supremum solver and the inequality harness.

pub mod generator;
pub mod local_sup;
pub mod mc;
pub mod verify;

pub use generator::{generate_sample, CoordinateLaw, GeneratorSpec};
pub use local_sup::{local_sup, local_sup_with, ActiveSet, LocalSup, SolverOptions};
pub use mc::{
    grc_empirical_mc, lrc_empirical_mc, lrc_on_averages, lrc_on_sample, rademacher_averages, McConfig, McEstimate,
};
pub use verify::{run_suites, VerifyConfig, VerifyReport};
