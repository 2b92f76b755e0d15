//! Exponents, block vectors, the `l_{2,p}` block norm and the explicit
//! constants shared by every bound.
//!
//! `+inf` is a first-class exponent value: `Exponent::INFINITY` is stored as
//! `f64::INFINITY` and every norm routine branches on it.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

/// An exponent `p` in `[1, +inf]` together with its conjugate `p*`.
///
/// The conjugate is stored alongside `p`, so `conjugate` is an exact
/// involution: `e.conjugate().conjugate() == e` bit for bit.
#[derive(Clone, Copy, Debug)]
pub struct Exponent {
    p: f64,
    conj: f64,
}

impl Exponent {
    pub const ONE: Exponent = Exponent { p: 1.0, conj: f64::INFINITY };
    pub const TWO: Exponent = Exponent { p: 2.0, conj: 2.0 };
    pub const INFINITY: Exponent = Exponent { p: f64::INFINITY, conj: 1.0 };

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidExponent(p));
        }
        let conj = if p == 1.0 {
            f64::INFINITY
        } else if p.is_infinite() {
            1.0
        } else if p == 2.0 {
            2.0
        } else {
            p / (p - 1.0)
        };
        Ok(Exponent { p, conj })
    }

    /// Builds the exponent whose conjugate is `q`, i.e. `q*`.
    pub fn from_conjugate(q: f64) -> Result<Self> {
        Ok(Exponent::new(q)?.conjugate())
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.p
    }

    #[inline]
    pub fn conjugate(self) -> Exponent {
        Exponent { p: self.conj, conj: self.p }
    }

    /// `p*` as a plain number.
    #[inline]
    pub fn star(self) -> f64 {
        self.conj
    }

    #[inline]
    pub fn is_infinite(self) -> bool {
        self.p.is_infinite()
    }

    /// `1/p`, with `1/inf = 0`.
    #[inline]
    pub fn recip(self) -> f64 {
        if self.p.is_infinite() {
            0.0
        } else {
            1.0 / self.p
        }
    }
}

impl PartialEq for Exponent {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.p.partial_cmp(&other.p)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.p.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.p)
        }
    }
}

impl TryFrom<f64> for Exponent {
    type Error = Error;
    fn try_from(p: f64) -> Result<Self> {
        Exponent::new(p)
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.p.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.p)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        let p = match Repr::deserialize(d)? {
            Repr::Num(p) => p,
            Repr::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "+inf" => f64::INFINITY,
                other => {
                    other.parse::<f64>().map_err(|_| serde::de::Error::custom(format!("not an exponent: {s:?}")))?
                }
            },
        };
        Exponent::new(p).map_err(serde::de::Error::custom)
    }
}

/// `p -> p*` with `1 <-> inf` and `2 -> 2`.
pub fn conjugate(p: Exponent) -> Exponent {
    p.conjugate()
}

/// Largest entry, or `None` for an empty slice.
fn max_entry(a: &[f64]) -> f64 {
    a.iter().copied().fold(0.0, f64::max)
}

/// `(sum a_i^q)^{1/q}` for any `q > 0` (a quasi-norm when `q < 1`), using
/// max-rescaling so large `q` cannot overflow. Entries must be nonnegative.
pub(crate) fn power_norm(a: &[f64], q: f64) -> f64 {
    let m = max_entry(a);
    if m == 0.0 || m.is_infinite() {
        return m;
    }
    if q.is_infinite() {
        return m;
    }
    if q == 1.0 {
        return a.iter().sum();
    }
    let s: f64 = a.iter().map(|&x| (x / m).powf(q)).sum();
    m * s.powf(1.0 / q)
}

/// The `l_q` norm of a nonnegative vector. Negative or NaN entries are rejected.
pub fn lp_norm(a: &[f64], q: Exponent) -> Result<f64> {
    if let Some(bad) = a.iter().find(|x| !(**x >= 0.0)) {
        return Err(invalid("a", format!("entries must be nonnegative, got {bad}")));
    }
    Ok(power_norm(a, q.value()))
}

fn euclid(x: &[f64]) -> f64 {
    let m = x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let s: f64 = x.iter().map(|v| (v / m) * (v / m)).sum();
    m * s.sqrt()
}

/// An element of `H_1 x ... x H_M` in eigencoordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct BlockVector {
    blocks: Vec<Vec<f64>>,
}

impl TryFrom<Vec<Vec<f64>>> for BlockVector {
    type Error = Error;
    fn try_from(blocks: Vec<Vec<f64>>) -> Result<Self> {
        BlockVector::new(blocks)
    }
}

impl From<BlockVector> for Vec<Vec<f64>> {
    fn from(v: BlockVector) -> Self {
        v.blocks
    }
}

impl BlockVector {
    pub fn new(blocks: Vec<Vec<f64>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(invalid("blocks", "need at least one block"));
        }
        if let Some(m) = blocks.iter().position(|b| b.is_empty()) {
            return Err(invalid("blocks", format!("block {m} is empty")));
        }
        Ok(BlockVector { blocks })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        BlockVector::new(shape.iter().map(|&k| vec![0.0; k]).collect())
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, m: usize) -> &[f64] {
        &self.blocks[m]
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.blocks
    }

    pub fn shape(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn into_blocks(self) -> Vec<Vec<f64>> {
        self.blocks
    }

    /// Euclidean norm of every block.
    pub fn block_norms(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| euclid(b)).collect()
    }

    pub fn dot(&self, other: &BlockVector) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(self.shape(), other.shape()));
        }
        Ok(self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()).sum())
    }

    pub fn scaled(&self, c: f64) -> BlockVector {
        BlockVector { blocks: self.blocks.iter().map(|b| b.iter().map(|x| c * x).collect()).collect() }
    }

    pub fn add(&self, other: &BlockVector) -> Result<BlockVector> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(self.shape(), other.shape()));
        }
        Ok(BlockVector {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect(),
        })
    }
}

/// `||v||_{2,p}`: the `l_p` norm of the per-block Euclidean norms.
pub fn block_norm(v: &BlockVector, p: Exponent) -> f64 {
    power_norm(&v.block_norms(), p.value())
}

/// A unit-norm attaining witness for block Hoelder duality: returns `w` with
/// `||w||_{2,p} = 1` and `<w, v> = ||v||_{2,p*}`.
pub fn dual_witness(v: &BlockVector, p: Exponent) -> BlockVector {
    let a = v.block_norms();
    let q = p.star();
    let total = power_norm(&a, q);
    let mut w = BlockVector::zeros(&v.shape()).expect("shape comes from a valid vector");
    if total == 0.0 {
        w.blocks[0][0] = 1.0;
        return w;
    }
    // Per-block weights s with ||s||_p = 1 and <s, a> = ||a||_q.
    let s: Vec<f64> = if q.is_infinite() {
        let top = a.iter().enumerate().fold(0, |best, (m, &x)| if x > a[best] { m } else { best });
        (0..a.len()).map(|m| if m == top { 1.0 } else { 0.0 }).collect()
    } else if q == 1.0 {
        vec![1.0; a.len()]
    } else {
        a.iter().map(|&x| (x / total).powf(q - 1.0)).collect()
    };
    for (m, block) in w.blocks.iter_mut().enumerate() {
        if a[m] > 0.0 {
            for (wj, vj) in block.iter_mut().zip(&v.blocks[m]) {
                *wj = s[m] * vj / a[m];
            }
        } else if s[m] > 0.0 {
            block[0] = s[m];
        }
    }
    w
}

/// The hypothesis class `H_{p,D,M}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MklClassRepr", into = "MklClassRepr")]
pub struct MklClass {
    p: Exponent,
    d: f64,
    m: usize,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
struct MklClassRepr {
    p: Exponent,
    #[serde(rename = "D")]
    d: f64,
    #[serde(rename = "M")]
    m: usize,
}

impl TryFrom<MklClassRepr> for MklClass {
    type Error = Error;
    fn try_from(r: MklClassRepr) -> Result<Self> {
        MklClass::new(r.p, r.d, r.m)
    }
}

impl From<MklClass> for MklClassRepr {
    fn from(c: MklClass) -> Self {
        MklClassRepr { p: c.p, d: c.d, m: c.m }
    }
}

impl MklClass {
    pub fn new(p: Exponent, d: f64, m: usize) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(invalid("D", format!("must be positive and finite, got {d}")));
        }
        if m == 0 {
            return Err(invalid("M", "must be at least 1"));
        }
        Ok(MklClass { p, d, m })
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn p_star(&self) -> Exponent {
        self.p.conjugate()
    }

    pub fn radius(&self) -> f64 {
        self.d
    }

    pub fn kernels(&self) -> usize {
        self.m
    }

    pub fn with_p(&self, p: Exponent) -> MklClass {
        MklClass { p, ..*self }
    }

    pub fn with_radius(&self, d: f64) -> Result<MklClass> {
        MklClass::new(self.p, d, self.m)
    }
}

/// Both constants of the Khintchine-Kahane inequality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KhintchineConstant {
    /// `p*`, the constant used in the displayed bounds.
    pub operative: f64,
    /// `max(1, p* - 1)`.
    pub tight: f64,
}

pub fn khintchine_constant(p: Exponent) -> KhintchineConstant {
    let ps = p.star();
    KhintchineConstant { operative: ps, tight: (ps - 1.0).max(1.0) }
}

/// `C_q = (2qe)^q` for `q >= 1/2`.
pub fn rosenthal_young_constant(q: f64) -> Result<f64> {
    if !(q >= 0.5) || !q.is_finite() {
        return Err(invalid("q", format!("must be finite and >= 1/2, got {q}")));
    }
    Ok((2.0 * q * std::f64::consts::E).powf(q))
}

/// `M^{1/q - 1/p}`, so that `||a||_q <= factor * ||a||_p` on `R^M`.
pub fn lq_to_lp_factor(m: usize, q: Exponent, p: Exponent) -> Result<f64> {
    if m == 0 {
        return Err(invalid("M", "must be at least 1"));
    }
    if q.value() > p.value() {
        return Err(invalid("q", format!("need q <= p, got q={q}, p={p}")));
    }
    Ok((m as f64).powf(q.recip() - p.recip()))
}
