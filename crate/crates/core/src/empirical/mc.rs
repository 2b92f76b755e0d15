//! Monte Carlo estimators of the global and local Rademacher complexities.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generator::{generate_sample, stream, GeneratorSpec, DOMAIN_SIGMA};
use super::local_sup::{local_sup_with, SolverOptions};
use crate::error::{invalid, Error, Result};
use crate::norms::{block_norm, BlockVector, MklClass};

/// Monte Carlo settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    /// Sample size.
    pub n: usize,
    /// Number of Rademacher-vector draws `S`.
    pub draws: usize,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { n: 200, draws: 200, seed: 0, solver: SolverOptions::default() }
    }
}

impl McConfig {
    pub fn new(n: usize, draws: usize, seed: u64) -> Result<Self> {
        let c = McConfig { n, draws, seed, solver: SolverOptions::default() };
        c.check()?;
        Ok(c)
    }

    pub fn check(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "need at least one sample"));
        }
        if self.draws == 0 {
            return Err(invalid("draws", "need at least one draw"));
        }
        Ok(())
    }
}

/// Mean and standard error over draws, with the raw per-draw values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub values: Vec<f64>,
}

impl McEstimate {
    /// Sequential summary in draw order, so the result is bit-stable. Sums
    /// are shifted by the first value; constant draws give exactly zero spread.
    pub fn from_values(values: Vec<f64>) -> McEstimate {
        let s = values.len() as f64;
        let x0 = values[0];
        let d1: f64 = values.iter().map(|x| x - x0).sum();
        let d2: f64 = values.iter().map(|x| (x - x0) * (x - x0)).sum();
        let mean = x0 + d1 / s;
        let std_error = if values.len() > 1 {
            let var = ((d2 - d1 * d1 / s) / (s - 1.0)).max(0.0);
            (var / s).sqrt()
        } else {
            0.0
        };
        McEstimate { mean, std_error, values }
    }
}

/// `(1/n) sum_i sigma_i x_i` for the draw-`s` sign vector.
fn rademacher_average(data: &[BlockVector], seed: u64, s: usize) -> BlockVector {
    let mut rng = stream(seed, DOMAIN_SIGMA, s as u64);
    let mut acc: Vec<Vec<f64>> = data[0].shape().iter().map(|&k| vec![0.0; k]).collect();
    for x in data {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        for (a, b) in acc.iter_mut().zip(x.blocks()) {
            for (aj, bj) in a.iter_mut().zip(b) {
                *aj += sign * bj;
            }
        }
    }
    let inv = 1.0 / data.len() as f64;
    BlockVector::new(acc.into_iter().map(|b| b.into_iter().map(|x| x * inv).collect()).collect())
        .expect("shape comes from the data")
}

fn check_data(data: &[BlockVector], class: &MklClass) -> Result<()> {
    let first = data.first().ok_or_else(|| invalid("data", "need at least one sample"))?;
    if first.num_blocks() != class.kernels() {
        return Err(invalid(
            "data",
            format!("samples have {} blocks, class has M = {}", first.num_blocks(), class.kernels()),
        ));
    }
    let shape = first.shape();
    if let Some(bad) = data.iter().find(|x| x.shape() != shape) {
        return Err(Error::ShapeMismatch(shape, bad.shape()));
    }
    Ok(())
}

/// The Rademacher averages for draws `0..mc.draws`.
pub fn rademacher_averages(data: &[BlockVector], mc: &McConfig) -> Result<Vec<BlockVector>> {
    mc.check()?;
    if data.is_empty() {
        return Err(invalid("data", "need at least one sample"));
    }
    Ok((0..mc.draws).into_par_iter().map(|s| rademacher_average(data, mc.seed, s)).collect())
}

/// Empirical global complexity: each draw's supremum is exact,
/// `D ||(1/n) sum sigma_i x_i||_{2,p*}`.
pub fn grc_empirical_mc(data: &[BlockVector], class: &MklClass, mc: &McConfig) -> Result<McEstimate> {
    check_data(data, class)?;
    let d = class.radius();
    let q = class.p_star();
    let values = rademacher_averages(data, mc)?.iter().map(|v| d * block_norm(v, q)).collect();
    Ok(McEstimate::from_values(values))
}

/// Local complexity on a fixed sample with known coordinate variances.
pub fn lrc_on_sample(
    data: &[BlockVector],
    lambda: &[Vec<f64>],
    class: &MklClass,
    r: f64,
    mc: &McConfig,
) -> Result<McEstimate> {
    check_data(data, class)?;
    let averages = rademacher_averages(data, mc)?;
    lrc_on_averages(&averages, lambda, class, r, mc.solver)
}

/// Local complexity from precomputed Rademacher averages.
pub fn lrc_on_averages(
    averages: &[BlockVector],
    lambda: &[Vec<f64>],
    class: &MklClass,
    r: f64,
    solver: SolverOptions,
) -> Result<McEstimate> {
    let values: Vec<Result<f64>> =
        averages.par_iter().map(|v| local_sup_with(v, class, r, lambda, solver).map(|s| s.value)).collect();
    let mut out = Vec::with_capacity(values.len());
    for (s, v) in values.into_iter().enumerate() {
        out.push(v.map_err(|e| Error::Draw { draw: s, source: Box::new(e) })?);
    }
    Ok(McEstimate::from_values(out))
}

/// Population local complexity: a fresh sample of size `mc.n` from `gen`,
/// then `mc.draws` sign vectors.
pub fn lrc_empirical_mc(gen: &GeneratorSpec, class: &MklClass, r: f64, mc: &McConfig) -> Result<McEstimate> {
    mc.check()?;
    let data = generate_sample(gen, mc.n)?;
    lrc_on_sample(&data, &gen.variances()?, class, r, mc)
}
