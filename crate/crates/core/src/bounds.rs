//! Global and local Rademacher complexity bounds for `H_{p,D,M}`.
//!
//! Every bound has a fixed-`t` evaluator (`*_at`) and a public entry point
//! that, when no `t` is given, minimizes over [`t_grid`]. Grid points are
//! scanned in ascending order with a strict comparison, so ties resolve to
//! the smallest `t`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::norms::{power_norm, Exponent, MklClass};
use crate::spectra::{KernelSpectrum, SpectrumSet};

/// Default number of geometric grid points on `[p, 2]`.
pub const T_GRID_POINTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FormulaId {
    GrcEmp,
    GrcPop,
    LrcP12,
    LrcPge2,
    LrcP1,
    LrcHparam,
    Lower,
}

impl FormulaId {
    pub fn as_str(self) -> &'static str {
        match self {
            FormulaId::GrcEmp => "GRC_EMP",
            FormulaId::GrcPop => "GRC_POP",
            FormulaId::LrcP12 => "LRC_P12",
            FormulaId::LrcPge2 => "LRC_PGE2",
            FormulaId::LrcP1 => "LRC_P1",
            FormulaId::LrcHparam => "LRC_HPARAM",
            FormulaId::Lower => "LOWER",
        }
    }

    pub fn is_local(self) -> bool {
        !matches!(self, FormulaId::GrcEmp | FormulaId::GrcPop)
    }
}

/// A bound value with its breakdown.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub value: f64,
    pub main_term: f64,
    pub remainder_term: f64,
    pub t_used: Exponent,
    pub h_used: Option<Vec<u64>>,
    pub formula_id: FormulaId,
}

impl BoundReport {
    fn new(formula_id: FormulaId, main_term: f64, remainder_term: f64, t_used: Exponent) -> Self {
        BoundReport { value: main_term + remainder_term, main_term, remainder_term, t_used, h_used: None, formula_id }
    }
}

/// Inputs shared by the local bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalQuery {
    pub class: MklClass,
    /// Squared radius of the `L_2(P)` ball.
    pub r: f64,
    pub n: usize,
    /// `B` with `k(x, x) <= B` almost surely.
    pub kernel_bound: f64,
}

impl LocalQuery {
    pub fn new(class: MklClass, r: f64, n: usize, kernel_bound: f64) -> Result<Self> {
        if !(r >= 0.0) {
            return Err(invalid("r", format!("must be >= 0, got {r}")));
        }
        if n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if !(kernel_bound > 0.0 && kernel_bound.is_finite()) {
            return Err(invalid("B", format!("must be positive and finite, got {kernel_bound}")));
        }
        Ok(LocalQuery { class, r, n, kernel_bound })
    }

    pub fn with_r(&self, r: f64) -> Result<Self> {
        LocalQuery::new(self.class, r, self.n, self.kernel_bound)
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }
}

/// Candidate `t` values: `points` geometric points on `[p, 2]`, the ends,
/// and the analytic minimizers `(2 log M)*` and `(log M)*` clamped to
/// `[p, 2]`. For `p > 2` the grid is `{p}`.
pub fn t_grid(p: Exponent, m: usize, points: usize) -> Vec<Exponent> {
    t_grid_ln(p, (m as f64).ln(), points)
}

pub(crate) fn t_grid_ln(p: Exponent, lm: f64, points: usize) -> Vec<Exponent> {
    let pv = p.value();
    if pv >= 2.0 {
        return vec![p];
    }
    let mut ts: Vec<f64> = vec![pv, 2.0];
    if points >= 2 {
        let ratio = 2.0 / pv;
        for k in 0..points {
            ts.push(pv * ratio.powf(k as f64 / (points - 1) as f64));
        }
    }
    for x in [2.0 * lm, lm] {
        if x > 1.0 {
            let t = x / (x - 1.0);
            ts.push(t.clamp(pv, 2.0));
        }
    }
    ts.retain(|t| t.is_finite());
    ts.sort_by(|a, b| a.total_cmp(b));
    ts.dedup();
    ts.into_iter().map(|t| if t == pv { p } else { Exponent::new(t).expect("grid point >= p >= 1") }).collect()
}

/// Minimizes `eval` over `grid`, skipping points where `t* = inf`.
pub fn optimize_t<F>(grid: &[Exponent], mut eval: F) -> Result<BoundReport>
where
    F: FnMut(Exponent) -> Result<BoundReport>,
{
    let mut best: Option<BoundReport> = None;
    for &t in grid {
        match eval(t) {
            Ok(rep) => {
                if best.as_ref().is_none_or(|b| rep.value < b.value) {
                    best = Some(rep);
                }
            }
            Err(Error::InfiniteConjugate) => continue,
            Err(e) => return Err(e),
        }
    }
    best.ok_or(Error::InfiniteConjugate)
}

fn finite_star(t: Exponent) -> Result<f64> {
    let x = t.star();
    if x.is_infinite() {
        Err(Error::InfiniteConjugate)
    } else {
        Ok(x)
    }
}

fn check_t_at_least_p(class: &MklClass, t: Exponent) -> Result<()> {
    if t.value() < class.p().value() * (1.0 - 1e-12) {
        return Err(invalid("t", format!("need t >= p = {}, got {t}", class.p())));
    }
    Ok(())
}

fn check_t_in_p2(class: &MklClass, t: Exponent) -> Result<()> {
    check_t_at_least_p(class, t)?;
    if t.value() > 2.0 * (1.0 + 1e-12) {
        return Err(invalid("t", format!("need t <= 2, got {t}")));
    }
    Ok(())
}

fn check_p_at_most_2(class: &MklClass) -> Result<()> {
    if class.p().value() > 2.0 {
        return Err(invalid("p", format!("this bound needs 1 <= p <= 2, got {}", class.p())));
    }
    Ok(())
}

fn check_len(class: &MklClass, len: usize, what: &'static str) -> Result<()> {
    if len != class.kernels() {
        return Err(invalid(what, format!("expected {} entries, got {len}", class.kernels())));
    }
    Ok(())
}

fn remainder(class: &MklClass, n: f64, b: f64, x: f64) -> f64 {
    (b * E).sqrt() * class.radius() * (class.kernels() as f64).powf(1.0 / x) * x / n
}

fn default_grid(class: &MklClass) -> Vec<Exponent> {
    t_grid(class.p(), class.kernels(), T_GRID_POINTS)
}

/// Empirical global bound `D sqrt(t*/n ||(tr K_m)_m||_{t*/2})` at a fixed `t`.
pub fn grc_empirical_at(class: &MklClass, traces: &[f64], n: usize, t: Exponent) -> Result<BoundReport> {
    check_len(class, traces.len(), "traces")?;
    if traces.iter().any(|x| !(*x >= 0.0)) {
        return Err(invalid("traces", "must be nonnegative"));
    }
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    check_t_at_least_p(class, t)?;
    let x = finite_star(t)?;
    let main = class.radius() * (x / n as f64 * power_norm(traces, x / 2.0)).sqrt();
    Ok(BoundReport::new(FormulaId::GrcEmp, main, 0.0, t))
}

pub fn grc_empirical(class: &MklClass, traces: &[f64], n: usize, t: Option<Exponent>) -> Result<BoundReport> {
    match t {
        Some(t) => grc_empirical_at(class, traces, n, t),
        None => optimize_t(&default_grid(class), |t| grc_empirical_at(class, traces, n, t)),
    }
}

/// Population global bound at a fixed `t`; the remainder is dropped for `t >= 2`.
pub fn grc_population_at(
    class: &MklClass,
    spec: &SpectrumSet,
    n: usize,
    kernel_bound: f64,
    t: Exponent,
) -> Result<BoundReport> {
    check_len(class, spec.len(), "spectra")?;
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    if !(kernel_bound > 0.0) {
        return Err(invalid("B", "must be positive"));
    }
    check_t_at_least_p(class, t)?;
    let x = finite_star(t)?;
    let nf = n as f64;
    let main = class.radius() * x * (E / nf * power_norm(&spec.traces(), x / 2.0)).sqrt();
    let rem = if t.value() >= 2.0 { 0.0 } else { remainder(class, nf, kernel_bound, x) };
    Ok(BoundReport::new(FormulaId::GrcPop, main, rem, t))
}

pub fn grc_population(
    class: &MklClass,
    spec: &SpectrumSet,
    n: usize,
    kernel_bound: f64,
    t: Option<Exponent>,
) -> Result<BoundReport> {
    match t {
        Some(t) => grc_population_at(class, spec, n, kernel_bound, t),
        None => optimize_t(&default_grid(class), |t| grc_population_at(class, spec, n, kernel_bound, t)),
    }
}

/// Local bound for `p in [1, 2]` at a fixed `t`, with the constant inside the
/// min scaled by `multiplier` (1 reproduces `e D^2 t*^2`).
pub fn lrc_upper_p12_at(q: &LocalQuery, spec: &SpectrumSet, t: Exponent, multiplier: f64) -> Result<BoundReport> {
    let class = &q.class;
    check_p_at_most_2(class)?;
    check_len(class, spec.len(), "spectra")?;
    check_t_in_p2(class, t)?;
    if !(multiplier > 0.0) {
        return Err(invalid("multiplier", "must be positive"));
    }
    let x = finite_star(t)?;
    let m = class.kernels() as f64;
    let r_eff = q.r * m.powf(1.0 - 2.0 / x);
    let c_eff = multiplier * E * class.radius().powi(2) * x * x;
    let sums: Vec<f64> = (0..spec.len()).map(|k| spec.truncated_min_sum(k, r_eff, c_eff)).collect();
    let main = (16.0 / q.nf() * power_norm(&sums, x / 2.0)).sqrt();
    let rem = remainder(class, q.nf(), q.kernel_bound, x);
    Ok(BoundReport::new(FormulaId::LrcP12, main, rem, t))
}

pub fn lrc_upper_p12(q: &LocalQuery, spec: &SpectrumSet, t: Option<Exponent>) -> Result<BoundReport> {
    lrc_upper_p12_scaled(q, spec, t, 1.0)
}

pub fn lrc_upper_p12_scaled(
    q: &LocalQuery,
    spec: &SpectrumSet,
    t: Option<Exponent>,
    multiplier: f64,
) -> Result<BoundReport> {
    check_p_at_most_2(&q.class)?;
    match t {
        Some(t) => lrc_upper_p12_at(q, spec, t, multiplier),
        None => optimize_t(&default_grid(&q.class), |t| lrc_upper_p12_at(q, spec, t, multiplier)),
    }
}

/// The eigenvalue sequence of the joint covariance `J`.
#[derive(Clone, Copy, Debug)]
pub enum JointSpectrum<'a> {
    /// The spectrum of `J` given directly.
    Direct(&'a KernelSpectrum),
    /// Uncorrelated centered blocks: the union, with multiplicity, of the
    /// per-kernel spectra.
    Union(&'a SpectrumSet),
}

impl JointSpectrum<'_> {
    pub fn truncated_min_sum(&self, r: f64, c: f64) -> f64 {
        match self {
            JointSpectrum::Direct(s) => s.truncated_min_sum(r, c),
            JointSpectrum::Union(set) => (0..set.len()).map(|m| set.truncated_min_sum(m, r, c)).sum(),
        }
    }
}

/// Local bound for `p >= 2`: `sqrt(2/n sum_j min(r, D^2 M^{2/p*-1} lambda_j))`.
pub fn lrc_upper_pge2(q: &LocalQuery, joint: JointSpectrum<'_>) -> Result<BoundReport> {
    let class = &q.class;
    if class.p().value() < 2.0 {
        return Err(invalid("p", format!("this bound needs p >= 2, got {}", class.p())));
    }
    let m = class.kernels() as f64;
    let c = class.radius().powi(2) * m.powf(2.0 * class.p_star().recip() - 1.0);
    let main = (2.0 / q.nf() * joint.truncated_min_sum(q.r, c)).sqrt();
    Ok(BoundReport::new(FormulaId::LrcPge2, main, 0.0, class.p()))
}

/// The `p = 1` specialization at `t = (log M)*`.
pub fn lrc_upper_p1(q: &LocalQuery, spec: &SpectrumSet) -> Result<BoundReport> {
    let class = &q.class;
    let mk = class.kernels();
    if mk < 2 {
        return Err(invalid("M", "the p = 1 bound needs M >= 2"));
    }
    check_len(class, spec.len(), "spectra")?;
    let m = mk as f64;
    let lm = m.ln();
    let d = class.radius();
    let c = E.powi(3) * d * d * lm * lm;
    let worst = (0..spec.len()).map(|k| spec.truncated_min_sum(k, q.r * m, c)).fold(0.0, f64::max);
    let main = (16.0 / q.nf() * worst).sqrt();
    let rem = q.kernel_bound.sqrt() * E.powf(1.5) * d * lm / q.nf();
    let t_used = if lm > 1.0 { Exponent::from_conjugate(lm)? } else { class.p() };
    Ok(BoundReport::new(FormulaId::LrcP1, main, rem, t_used))
}

/// The truncation-level form, valid for every `h`:
/// `sqrt(4 r sum h / n) + sqrt(4 e t*^2 D^2 / n ||tails||_{t*/2}) + remainder`.
pub fn lrc_hparam(q: &LocalQuery, spec: &SpectrumSet, h: &[u64], t: Exponent) -> Result<BoundReport> {
    let class = &q.class;
    check_p_at_most_2(class)?;
    check_len(class, spec.len(), "spectra")?;
    check_len(class, h.len(), "h")?;
    check_t_in_p2(class, t)?;
    let x = finite_star(t)?;
    let hsum: f64 = h.iter().map(|&v| v as f64).sum();
    let tails: Vec<f64> = h.iter().enumerate().map(|(m, &hm)| spec.tail_sum(m, hm)).collect();
    let first = (4.0 * q.r * hsum / q.nf()).sqrt();
    let second = (4.0 * E * x * x * class.radius().powi(2) / q.nf() * power_norm(&tails, x / 2.0)).sqrt();
    let rem = remainder(class, q.nf(), q.kernel_bound, x);
    let mut rep = BoundReport::new(FormulaId::LrcHparam, first + second, rem, t);
    rep.h_used = Some(h.to_vec());
    Ok(rep)
}

/// Lower bound `sqrt(c/n sum_j min(r M, D^2 M^{2/p*} lambda_j))` for i.i.d.
/// identical centered blocks with base spectrum `base`.
pub fn lrc_lower(q: &LocalQuery, base: &KernelSpectrum, c_abs: f64) -> Result<BoundReport> {
    let class = &q.class;
    if !(c_abs > 0.0) {
        return Err(invalid("c_abs", "must be positive"));
    }
    let n = q.nf();
    let d = class.radius();
    let lam1 = base.top();
    if lam1 < 1.0 / (n * d * d) {
        return Err(Error::LowerBoundPrecondition(format!("lambda_1 = {lam1} < 1/(n D^2) = {}", 1.0 / (n * d * d))));
    }
    if q.r < 1.0 / n {
        return Err(Error::LowerBoundPrecondition(format!("r = {} < 1/n = {}", q.r, 1.0 / n)));
    }
    let m = class.kernels() as f64;
    let c = d * d * m.powf(2.0 * class.p_star().recip());
    let main = (c_abs / n * base.truncated_min_sum(q.r * m, c)).sqrt();
    Ok(BoundReport::new(FormulaId::Lower, main, 0.0, class.p()))
}
