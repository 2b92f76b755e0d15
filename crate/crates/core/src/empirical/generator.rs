//! Synthetic feature generators with diagonal block covariance.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::norms::BlockVector;
use crate::spectra::{KernelSpectrum, SpectrumSet};

/// Stream domains; every random sequence is keyed by `(seed, domain, index)`.
pub(crate) const DOMAIN_SAMPLE: u64 = 1;
pub(crate) const DOMAIN_SIGMA: u64 = 2;
pub(crate) const DOMAIN_HARNESS: u64 = 3;

/// A ChaCha8 stream addressed by `(seed, domain, index)`. Indices must fit in
/// 48 bits.
pub(crate) fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    debug_assert!(index < 1 << 48);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 48) | index);
    rng
}

/// Distribution of the standardized coordinates `eps` in `x_j = sqrt(lambda_j) eps`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CoordinateLaw {
    /// `eps = +-1`, so `||x_m||^2` equals the block trace exactly.
    #[default]
    RademacherScaled,
    /// `eps ~ U[-sqrt 3, sqrt 3]`.
    UniformScaled,
    /// Standard normal; unbounded, only allowed with `unbounded = true`.
    Gaussian,
}

impl CoordinateLaw {
    /// `sup eps^2`, or `None` for unbounded laws.
    pub fn sup_square(self) -> Option<f64> {
        match self {
            CoordinateLaw::RademacherScaled => Some(1.0),
            CoordinateLaw::UniformScaled => Some(3.0),
            CoordinateLaw::Gaussian => None,
        }
    }

    fn draw<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            CoordinateLaw::RademacherScaled => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            CoordinateLaw::UniformScaled => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
            CoordinateLaw::Gaussian => rng.sample(StandardNormal),
        }
    }
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorRepr {
    spectra: SpectrumSet,
    #[serde(default)]
    law: CoordinateLaw,
    #[serde(default)]
    iid_blocks: bool,
    #[serde(default)]
    j_max: Option<u64>,
    #[serde(default)]
    unbounded: bool,
    #[serde(default)]
    seed: u64,
}

/// A generator of feature vectors whose block `m` has covariance
/// `diag(lambda^(m))` and is uncorrelated with every other block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeneratorRepr", into = "GeneratorRepr")]
pub struct GeneratorSpec {
    spectra: SpectrumSet,
    law: CoordinateLaw,
    iid_blocks: bool,
    j_max: Option<u64>,
    unbounded: bool,
    seed: u64,
    coords: Vec<Vec<f64>>,
}

impl TryFrom<GeneratorRepr> for GeneratorSpec {
    type Error = crate::Error;
    fn try_from(r: GeneratorRepr) -> Result<Self> {
        let mut g = GeneratorSpec::new(r.spectra, r.law, r.seed)?;
        if r.unbounded {
            g = g.allow_unbounded();
        }
        if let Some(j) = r.j_max {
            g = g.with_j_max(j)?;
        }
        if r.iid_blocks {
            g = g.iid()?;
        }
        g.check()?;
        Ok(g)
    }
}

impl From<GeneratorSpec> for GeneratorRepr {
    fn from(g: GeneratorSpec) -> Self {
        GeneratorRepr {
            spectra: g.spectra,
            law: g.law,
            iid_blocks: g.iid_blocks,
            j_max: g.j_max,
            unbounded: g.unbounded,
            seed: g.seed,
        }
    }
}

fn truncated(spec: &KernelSpectrum, j_max: Option<u64>) -> Result<Vec<f64>> {
    match (spec, j_max) {
        (KernelSpectrum::Algebraic { cutoff: None, .. }, Some(j)) => Ok((1..=j).map(|k| spec.eigenvalue(k)).collect()),
        (KernelSpectrum::Algebraic { cutoff: Some(c), .. }, Some(j)) => {
            Ok((1..=j.min(*c)).map(|k| spec.eigenvalue(k)).collect())
        }
        _ => spec.coordinates(),
    }
}

impl GeneratorSpec {
    /// A Rademacher-or-uniform generator with independent coordinates.
    /// Algebraic spectra need a cutoff or a later `with_j_max`.
    pub fn new(spectra: SpectrumSet, law: CoordinateLaw, seed: u64) -> Result<Self> {
        let mut g =
            GeneratorSpec { spectra, law, iid_blocks: false, j_max: None, unbounded: false, seed, coords: Vec::new() };
        g.refresh_coords();
        Ok(g)
    }

    /// `M` i.i.d. copies of one block.
    pub fn iid_blocks(spec: KernelSpectrum, m: usize, law: CoordinateLaw, seed: u64) -> Result<Self> {
        GeneratorSpec::new(SpectrumSet::identical(spec, m)?, law, seed)?.iid()
    }

    fn iid(mut self) -> Result<Self> {
        let first = self.spectra.kernel(0);
        if self.spectra.kernels().iter().any(|k| k != first) {
            return Err(invalid("iid_blocks", "i.i.d. blocks need one shared spectrum"));
        }
        self.iid_blocks = true;
        Ok(self)
    }

    fn refresh_coords(&mut self) {
        self.coords = self.spectra.kernels().iter().filter_map(|k| truncated(k, self.j_max).ok()).collect();
    }

    /// Truncates algebraic spectra at `j_max` coordinates for generation.
    pub fn with_j_max(mut self, j_max: u64) -> Result<Self> {
        if j_max == 0 {
            return Err(invalid("j_max", "must be at least 1"));
        }
        if j_max > 1 << 24 {
            return Err(invalid("j_max", "too many coordinates to generate"));
        }
        self.j_max = Some(j_max);
        self.refresh_coords();
        Ok(self)
    }

    /// Permits `CoordinateLaw::Gaussian`.
    pub fn allow_unbounded(mut self) -> Self {
        self.unbounded = true;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn check(&self) -> Result<()> {
        if self.law == CoordinateLaw::Gaussian && !self.unbounded {
            return Err(invalid("law", "the Gaussian law is unbounded; set `unbounded` to use it"));
        }
        for k in self.spectra.kernels() {
            truncated(k, self.j_max)?;
        }
        Ok(())
    }

    pub fn spectra(&self) -> &SpectrumSet {
        &self.spectra
    }

    pub fn law(&self) -> CoordinateLaw {
        self.law
    }

    pub fn is_iid(&self) -> bool {
        self.iid_blocks
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kernels(&self) -> usize {
        self.spectra.len()
    }

    /// Per-block coordinate variances actually generated.
    pub fn variances(&self) -> Result<Vec<Vec<f64>>> {
        self.check()?;
        Ok(self.coords.clone())
    }

    /// The generated spectra as finite lists, for bounds that must see exactly
    /// what the generator produces.
    pub fn generated_spectra(&self) -> Result<SpectrumSet> {
        let v = self.variances()?;
        SpectrumSet::new(v.into_iter().map(KernelSpectrum::explicit).collect::<Result<_>>()?)
    }

    /// `B` with `k_m(x, x) = ||x_m||^2 <= B` almost surely; `None` if unbounded.
    pub fn kernel_bound(&self) -> Option<f64> {
        let c = self.law.sup_square()?;
        self.check().ok()?;
        let max_trace = self.coords.iter().map(|b| b.iter().sum::<f64>()).fold(0.0, f64::max);
        Some(c * max_trace)
    }
}

/// `n` i.i.d. samples. Sample `i` is drawn from its own stream, so the result
/// does not depend on the thread count.
pub fn generate_sample(gen: &GeneratorSpec, n: usize) -> Result<Vec<BlockVector>> {
    if n == 0 {
        return Err(invalid("n", "need at least one sample"));
    }
    let scales: Vec<Vec<f64>> = gen.variances()?.iter().map(|b| b.iter().map(|l| l.sqrt()).collect()).collect();
    let law = gen.law;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(gen.seed, DOMAIN_SAMPLE, i as u64);
            let blocks = scales.iter().map(|s| s.iter().map(|&sl| sl * law.draw(&mut rng)).collect()).collect();
            BlockVector::new(blocks)
        })
        .collect()
}
