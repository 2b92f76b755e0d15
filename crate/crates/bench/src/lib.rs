//! Shared inputs for the benchmarks.

use lpmkl_core::empirical::{generate_sample, rademacher_averages};
use lpmkl_core::{
    BlockVector, CoordinateLaw, Exponent, GeneratorSpec, KernelSpectrum, McConfig, MklClass, SpectrumSet,
};

pub fn class(p: f64, m: usize) -> MklClass {
    MklClass::new(Exponent::new(p).expect("valid exponent"), 1.0, m).expect("valid class")
}

/// `m` identical algebraic spectra `j^-alpha`.
pub fn algebraic(m: usize, alpha: f64) -> SpectrumSet {
    SpectrumSet::identical(KernelSpectrum::algebraic(1.0, alpha, None).expect("valid"), m).expect("valid")
}

/// A constrained-supremum problem: `draws` Rademacher averages over `m`
/// blocks of `rank` coordinates, with the coordinate variances.
pub struct LocalProblem {
    pub averages: Vec<BlockVector>,
    pub lambda: Vec<Vec<f64>>,
}

pub fn local_problem(m: usize, rank: usize, n: usize, draws: usize) -> LocalProblem {
    let eig: Vec<f64> = (1..=rank).map(|j| 1.0 / (j * j) as f64).collect();
    let spec = KernelSpectrum::finite_rank(eig).expect("valid");
    let gen = GeneratorSpec::iid_blocks(spec, m, CoordinateLaw::UniformScaled, 1).expect("valid");
    let data = generate_sample(&gen, n).expect("sample");
    let averages = rademacher_averages(&data, &McConfig::new(n, draws, 2).expect("valid")).expect("averages");
    LocalProblem { averages, lambda: gen.variances().expect("bounded") }
}
