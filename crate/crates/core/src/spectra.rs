//! Eigenvalue sequences of kernel covariance operators.
//!
//! Algebraic spectra `lambda_j = d j^{-alpha}` are summed exactly through a
//! Hurwitz zeta evaluation (Euler-Maclaurin), never by truncation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::norms::BlockVector;

const TIE_TOL: f64 = 1e-12;
const DIRECT_SUM_LIMIT: u64 = 1_000_000;

/// Even-index Bernoulli numbers `B_2, B_4, ..., B_22`.
const BERNOULLI: [f64; 11] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
];

/// Hurwitz zeta `sum_{k>=0} (a + k)^{-s}` for `s > 1`, `a > 0`.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(s > 1.0 && a > 0.0, "hurwitz_zeta needs s > 1 and a > 0");
    let start = 20f64.max(2.0 * s);
    let n_direct = if a >= start { 0 } else { (start - a).ceil() as u64 };
    let mut direct = 0.0;
    for k in (0..n_direct).rev() {
        direct += (a + k as f64).powf(-s);
    }
    let b = a + n_direct as f64;
    let bs = b.powf(-s);
    let mut corr = 0.0;
    // Rising factorial s (s+1) ... (s+2k-2) over (2k)!, times b^{1-2k}.
    let mut coef = s / 2.0 / b;
    for (k, &b2k) in BERNOULLI.iter().enumerate() {
        let kk = (k + 1) as f64;
        let term = b2k * coef;
        corr += term;
        if term.abs() < 1e-18 * (b / (s - 1.0) + 0.5) {
            break;
        }
        let two_k = 2.0 * kk;
        coef *= (s + two_k - 1.0) * (s + two_k) / ((two_k + 1.0) * (two_k + 2.0)) / (b * b);
    }
    direct + bs * (b / (s - 1.0) + 0.5 + corr)
}

/// One kernel's eigenvalue sequence, 1-indexed, nonincreasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectrumRepr", into = "SpectrumRepr")]
pub enum KernelSpectrum {
    /// A listed sequence, understood as zero past its end.
    Explicit(Vec<f64>),
    /// `lambda_j = d j^{-alpha}`, optionally zero past `cutoff`.
    Algebraic { d: f64, alpha: f64, cutoff: Option<u64> },
    /// A finite-rank operator; the rank is the list length.
    FiniteRank(Vec<f64>),
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SpectrumRepr {
    Explicit {
        eigenvalues: Vec<f64>,
    },
    Algebraic {
        d: f64,
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<u64>,
    },
    FiniteRank {
        eigenvalues: Vec<f64>,
    },
}

impl TryFrom<SpectrumRepr> for KernelSpectrum {
    type Error = Error;
    fn try_from(r: SpectrumRepr) -> Result<Self> {
        match r {
            SpectrumRepr::Explicit { eigenvalues } => KernelSpectrum::explicit(eigenvalues),
            SpectrumRepr::Algebraic { d, alpha, cutoff } => KernelSpectrum::algebraic(d, alpha, cutoff),
            SpectrumRepr::FiniteRank { eigenvalues } => KernelSpectrum::finite_rank(eigenvalues),
        }
    }
}

impl From<KernelSpectrum> for SpectrumRepr {
    fn from(k: KernelSpectrum) -> Self {
        match k {
            KernelSpectrum::Explicit(eigenvalues) => SpectrumRepr::Explicit { eigenvalues },
            KernelSpectrum::Algebraic { d, alpha, cutoff } => SpectrumRepr::Algebraic { d, alpha, cutoff },
            KernelSpectrum::FiniteRank(eigenvalues) => SpectrumRepr::FiniteRank { eigenvalues },
        }
    }
}

fn check_sequence(name: &'static str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(invalid(name, "eigenvalue list is empty"));
    }
    for (j, &x) in v.iter().enumerate() {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(invalid(name, format!("eigenvalue {} is {x}; need finite and >= 0", j + 1)));
        }
        if j > 0 && x > v[j - 1] * (1.0 + TIE_TOL) + TIE_TOL * f64::MIN_POSITIVE {
            return Err(invalid(name, format!("eigenvalues must be nonincreasing (index {})", j + 1)));
        }
    }
    Ok(())
}

impl KernelSpectrum {
    pub fn explicit(eigenvalues: Vec<f64>) -> Result<Self> {
        check_sequence("eigenvalues", &eigenvalues)?;
        Ok(KernelSpectrum::Explicit(eigenvalues))
    }

    pub fn algebraic(d: f64, alpha: f64, cutoff: Option<u64>) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(invalid("d", format!("must be positive, got {d}")));
        }
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(invalid("alpha", format!("must exceed 1, got {alpha}")));
        }
        if cutoff == Some(0) {
            return Err(invalid("cutoff", "must be at least 1"));
        }
        Ok(KernelSpectrum::Algebraic { d, alpha, cutoff })
    }

    pub fn finite_rank(eigenvalues: Vec<f64>) -> Result<Self> {
        check_sequence("eigenvalues", &eigenvalues)?;
        Ok(KernelSpectrum::FiniteRank(eigenvalues))
    }

    fn listed(&self) -> Option<&[f64]> {
        match self {
            KernelSpectrum::Explicit(v) | KernelSpectrum::FiniteRank(v) => Some(v),
            KernelSpectrum::Algebraic { .. } => None,
        }
    }

    /// `lambda_j` for `j >= 1`.
    pub fn eigenvalue(&self, j: u64) -> f64 {
        assert!(j >= 1, "eigenvalues are 1-indexed");
        match self {
            KernelSpectrum::Algebraic { d, alpha, cutoff } => {
                if cutoff.is_some_and(|c| j > c) {
                    0.0
                } else {
                    d * (j as f64).powf(-alpha)
                }
            }
            KernelSpectrum::Explicit(v) | KernelSpectrum::FiniteRank(v) => {
                v.get((j - 1) as usize).copied().unwrap_or(0.0)
            }
        }
    }

    /// Number of represented eigenvalues, or `None` for an infinite sequence.
    pub fn len(&self) -> Option<u64> {
        match self {
            KernelSpectrum::Algebraic { cutoff, .. } => *cutoff,
            KernelSpectrum::Explicit(v) | KernelSpectrum::FiniteRank(v) => Some(v.len() as u64),
        }
    }

    pub fn top(&self) -> f64 {
        self.eigenvalue(1)
    }

    pub fn trace(&self) -> f64 {
        self.tail_sum(0)
    }

    /// `sum_{j > h} lambda_j`.
    pub fn tail_sum(&self, h: u64) -> f64 {
        match self {
            KernelSpectrum::Algebraic { d, alpha, cutoff } => match cutoff {
                None => d * hurwitz_zeta(*alpha, h as f64 + 1.0),
                Some(c) if h >= *c => 0.0,
                Some(c) if c - h <= DIRECT_SUM_LIMIT => {
                    let mut s = 0.0;
                    for j in (h + 1..=*c).rev() {
                        s += (j as f64).powf(-alpha);
                    }
                    d * s
                }
                Some(c) => d * (hurwitz_zeta(*alpha, h as f64 + 1.0) - hurwitz_zeta(*alpha, *c as f64 + 1.0)),
            },
            KernelSpectrum::Explicit(v) | KernelSpectrum::FiniteRank(v) => {
                let h = (h as usize).min(v.len());
                v[h..].iter().rev().sum()
            }
        }
    }

    /// The integral bound `d h^{1-alpha} / (alpha - 1)` for algebraic spectra
    /// (`+inf` at `h = 0`); `None` for listed spectra.
    pub fn tail_bound(&self, h: u64) -> Option<f64> {
        match self {
            KernelSpectrum::Algebraic { d, alpha, .. } => {
                Some(if h == 0 { f64::INFINITY } else { d * (h as f64).powf(1.0 - alpha) / (alpha - 1.0) })
            }
            _ => None,
        }
    }

    /// Number of indices with `c * lambda_j >= r` (the crossover index `j0`).
    pub fn crossover_index(&self, r: f64, c: f64) -> u64 {
        if c <= 0.0 || r.is_infinite() && r > 0.0 {
            return if c <= 0.0 { 0 } else { self.len().unwrap_or(u64::MAX) };
        }
        if r <= 0.0 {
            return self.len().unwrap_or(u64::MAX);
        }
        match self {
            KernelSpectrum::Algebraic { d, alpha, cutoff } => {
                if c * d < r {
                    return 0;
                }
                let guess = (c * d / r).powf(1.0 / alpha).floor().min(9.0e15) as u64;
                let mut j0 = cutoff.map_or(guess, |cc| guess.min(cc));
                while c * self.eigenvalue(j0 + 1) >= r && cutoff.map_or(true, |cc| j0 < cc) {
                    j0 += 1;
                }
                while j0 > 0 && c * self.eigenvalue(j0) < r {
                    j0 -= 1;
                }
                match cutoff {
                    Some(cc) => j0.min(*cc),
                    None => j0,
                }
            }
            KernelSpectrum::Explicit(v) | KernelSpectrum::FiniteRank(v) => v.partition_point(|&l| c * l >= r) as u64,
        }
    }

    /// `sum_j min(r, c lambda_j)`.
    pub fn truncated_min_sum(&self, r: f64, c: f64) -> f64 {
        if r <= 0.0 || c <= 0.0 {
            return 0.0;
        }
        if r.is_infinite() {
            return c * self.trace();
        }
        let j0 = self.crossover_index(r, c);
        j0 as f64 * r + c * self.tail_sum(j0)
    }

    /// The finite list of eigenvalues used for data generation.
    pub fn coordinates(&self) -> Result<Vec<f64>> {
        match self {
            KernelSpectrum::Algebraic { cutoff: None, .. } => {
                Err(invalid("cutoff", "algebraic spectra need a cutoff to generate data"))
            }
            KernelSpectrum::Algebraic { cutoff: Some(c), .. } => Ok((1..=*c).map(|j| self.eigenvalue(j)).collect()),
            _ => Ok(self.listed().expect("listed variant").to_vec()),
        }
    }

    /// `(d, alpha)` for algebraic spectra.
    pub fn algebraic_params(&self) -> Option<(f64, f64)> {
        match self {
            KernelSpectrum::Algebraic { d, alpha, .. } => Some((*d, *alpha)),
            _ => None,
        }
    }
}

/// Per-kernel spectra for `M` kernels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<KernelSpectrum>", into = "Vec<KernelSpectrum>")]
pub struct SpectrumSet {
    kernels: Vec<KernelSpectrum>,
}

impl TryFrom<Vec<KernelSpectrum>> for SpectrumSet {
    type Error = Error;
    fn try_from(k: Vec<KernelSpectrum>) -> Result<Self> {
        SpectrumSet::new(k)
    }
}

impl From<SpectrumSet> for Vec<KernelSpectrum> {
    fn from(s: SpectrumSet) -> Self {
        s.kernels
    }
}

impl SpectrumSet {
    pub fn new(kernels: Vec<KernelSpectrum>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(invalid("spectra", "need at least one kernel"));
        }
        Ok(SpectrumSet { kernels })
    }

    /// `M` copies of the same spectrum.
    pub fn identical(spec: KernelSpectrum, m: usize) -> Result<Self> {
        SpectrumSet::new(vec![spec; m])
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn kernel(&self, m: usize) -> &KernelSpectrum {
        &self.kernels[m]
    }

    pub fn kernels(&self) -> &[KernelSpectrum] {
        &self.kernels
    }

    pub fn traces(&self) -> Vec<f64> {
        self.kernels.iter().map(KernelSpectrum::trace).collect()
    }

    pub fn tail_sum(&self, m: usize, h: u64) -> f64 {
        self.kernels[m].tail_sum(h)
    }

    pub fn truncated_min_sum(&self, m: usize, r: f64, c: f64) -> f64 {
        self.kernels[m].truncated_min_sum(r, c)
    }

    /// Per-block coordinate variances for generation.
    pub fn coordinates(&self) -> Result<Vec<Vec<f64>>> {
        self.kernels.iter().map(KernelSpectrum::coordinates).collect()
    }
}

/// Eigenvalues of the normalized Gram matrix of one kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct GramSpectrum {
    /// Nonincreasing, clamped at zero.
    pub eigenvalues: Vec<f64>,
    /// `(1/n) sum_i k(x_i, x_i)`.
    pub trace: f64,
}

fn check_block(points: &[BlockVector], m: usize) -> Result<usize> {
    let first = points.first().ok_or_else(|| invalid("points", "need at least one sample"))?;
    if m >= first.num_blocks() {
        return Err(invalid("m", format!("kernel index {m} out of range")));
    }
    let dim = first.block(m).len();
    if points.iter().any(|x| x.num_blocks() <= m || x.block(m).len() != dim) {
        return Err(invalid("points", "samples have inconsistent shapes"));
    }
    Ok(dim)
}

fn sorted_eigenvalues(mat: DMatrix<f64>) -> Result<Vec<f64>> {
    let n = mat.nrows();
    let eig = mat.try_symmetric_eigen(1e-14, 10_000).ok_or(Error::Eigensolver(n))?;
    let mut ev: Vec<f64> = eig.eigenvalues.iter().map(|&x| x.max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

/// Spectrum of the matrix with entries `(1/n) <x_i^(m), x_j^(m)>`.
pub fn gram_spectrum(points: &[BlockVector], m: usize) -> Result<GramSpectrum> {
    check_block(points, m)?;
    let n = points.len();
    let inv_n = 1.0 / n as f64;
    let gram = DMatrix::from_fn(n, n, |i, j| {
        inv_n * points[i].block(m).iter().zip(points[j].block(m)).map(|(a, b)| a * b).sum::<f64>()
    });
    let trace = inv_n * points.iter().map(|x| x.block(m).iter().map(|a| a * a).sum::<f64>()).sum::<f64>();
    Ok(GramSpectrum { eigenvalues: sorted_eigenvalues(gram)?, trace })
}

/// Eigenvalues of the sample covariance of block `m`, centered or not.
pub fn sample_covariance_spectrum(points: &[BlockVector], m: usize, centered: bool) -> Result<Vec<f64>> {
    let dim = check_block(points, m)?;
    let n = points.len() as f64;
    let mut mean = vec![0.0; dim];
    if centered {
        for x in points {
            for (acc, v) in mean.iter_mut().zip(x.block(m)) {
                *acc += v / n;
            }
        }
    }
    let cov = DMatrix::from_fn(dim, dim, |a, b| {
        points.iter().map(|x| (x.block(m)[a] - mean[a]) * (x.block(m)[b] - mean[b])).sum::<f64>() / n
    });
    sorted_eigenvalues(cov)
}
