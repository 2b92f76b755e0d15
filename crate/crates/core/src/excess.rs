//! Fixed points of the local bound, excess-risk bounds, rate comparisons and
//! the bound factor `nu_p`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::bounds::{t_grid, T_GRID_POINTS};
use crate::error::{invalid, Error, Result};
use crate::norms::{power_norm, Exponent, MklClass};
use crate::roots::brent;
use crate::spectra::SpectrumSet;

/// Inputs of the excess-risk bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RiskParamsRepr", into = "RiskParamsRepr")]
pub struct RiskParams {
    kernel_bound: f64,
    lipschitz: f64,
    variance: f64,
    n: usize,
    confidence: f64,
    loss_range: (f64, f64),
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RiskParamsRepr {
    #[serde(rename = "B")]
    kernel_bound: f64,
    #[serde(rename = "L")]
    lipschitz: f64,
    #[serde(rename = "F")]
    variance: f64,
    n: usize,
    x_conf: f64,
    loss_range: (f64, f64),
}

impl TryFrom<RiskParamsRepr> for RiskParams {
    type Error = Error;
    fn try_from(r: RiskParamsRepr) -> Result<Self> {
        RiskParams::new(r.kernel_bound, r.lipschitz, r.variance, r.n, r.x_conf, r.loss_range)
    }
}

impl From<RiskParams> for RiskParamsRepr {
    fn from(r: RiskParams) -> Self {
        RiskParamsRepr {
            kernel_bound: r.kernel_bound,
            lipschitz: r.lipschitz,
            variance: r.variance,
            n: r.n,
            x_conf: r.confidence,
            loss_range: r.loss_range,
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {v}")))
    }
}

impl RiskParams {
    pub fn new(
        kernel_bound: f64,
        lipschitz: f64,
        variance: f64,
        n: usize,
        confidence: f64,
        loss_range: (f64, f64),
    ) -> Result<Self> {
        positive("B", kernel_bound)?;
        positive("L", lipschitz)?;
        positive("F", variance)?;
        positive("x_conf", confidence)?;
        if n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if !(loss_range.0 < loss_range.1) || !loss_range.0.is_finite() || !loss_range.1.is_finite() {
            return Err(invalid("loss_range", format!("need a < b, got {loss_range:?}")));
        }
        Ok(RiskParams { kernel_bound, lipschitz, variance, n, confidence, loss_range })
    }

    /// All constants 1, loss range `[-1, 1]`.
    pub fn unit(n: usize) -> Result<Self> {
        RiskParams::new(1.0, 1.0, 1.0, n, 1.0, (-1.0, 1.0))
    }

    pub fn kernel_bound(&self) -> f64 {
        self.kernel_bound
    }
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    pub fn variance(&self) -> f64 {
        self.variance
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn confidence(&self) -> f64 {
        self.confidence
    }
    pub fn loss_range(&self) -> (f64, f64) {
        self.loss_range
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        RiskParams::new(self.kernel_bound, self.lipschitz, self.variance, n, self.confidence, self.loss_range)
    }

    pub fn with_confidence(&self, x: f64) -> Result<Self> {
        RiskParams::new(self.kernel_bound, self.lipschitz, self.variance, self.n, x, self.loss_range)
    }
}

/// Largest root of `r = sqrt(a r) + b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FixedPoint {
    pub r: f64,
    /// Set when `a = b = 0`.
    pub degenerate: bool,
}

pub fn fixed_point_quadratic(a: f64, b: f64) -> Result<FixedPoint> {
    if !(a >= 0.0 && b >= 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(invalid("a, b", format!("need finite a, b >= 0, got ({a}, {b})")));
    }
    if a == 0.0 && b == 0.0 {
        return Ok(FixedPoint { r: 0.0, degenerate: true });
    }
    let r = 0.5 * ((a + 2.0 * b) + (a * (a + 4.0 * b)).sqrt());
    Ok(FixedPoint { r, degenerate: false })
}

/// The minimized fixed-point bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPointBound {
    /// `min over (h, t)` of `a + 2b`.
    pub r_star: f64,
    /// The exact root of `r = sqrt(a r) + b` at the minimizer; `<= r_star`.
    pub quadratic_root: f64,
    pub a: f64,
    pub b: f64,
    pub h_used: Vec<u64>,
    pub t_used: Exponent,
}

/// Precomputed pieces of `a + 2b` at a fixed `t`.
struct FixedPointObjective<'a> {
    spec: &'a SpectrumSet,
    x: f64,
    lin: f64,
    mid: f64,
    rem: f64,
}

impl<'a> FixedPointObjective<'a> {
    fn new(class: &MklClass, spec: &'a SpectrumSet, rp: &RiskParams, t: Exponent) -> Result<Self> {
        let x = t.star();
        if x.is_infinite() {
            return Err(Error::InfiniteConjugate);
        }
        let n = rp.n as f64;
        let (f, l, d) = (rp.variance, rp.lipschitz, class.radius());
        let m = class.kernels() as f64;
        Ok(FixedPointObjective {
            spec,
            x,
            lin: 4.0 * f * f / n,
            mid: 4.0 * f * l * (E * x * x * d * d / n).sqrt(),
            rem: 2.0 * (rp.kernel_bound * E).sqrt() * d * f * l * m.powf(1.0 / x) * x / n,
        })
    }

    fn ab_with_tails(&self, h: &[u64], tails: &[f64]) -> (f64, f64) {
        let a = self.lin * h.iter().map(|&v| v as f64).sum::<f64>();
        let b = self.mid * power_norm(tails, self.x / 2.0).sqrt() + self.rem;
        (a, b)
    }

    fn ab(&self, h: &[u64]) -> (f64, f64) {
        let tails: Vec<f64> = h.iter().enumerate().map(|(m, &hm)| self.spec.tail_sum(m, hm)).collect();
        self.ab_with_tails(h, &tails)
    }

    fn value(&self, h: &[u64]) -> f64 {
        let (a, b) = self.ab(h);
        a + 2.0 * b
    }
}

const EXHAUSTIVE_LIMIT: f64 = 1.0e6;

/// Minimizes `a + 2b` over integer `h` at a fixed `t`.
fn minimize_h(obj: &FixedPointObjective<'_>, start: Vec<u64>) -> Vec<u64> {
    let spec = obj.spec;
    let mk = spec.len();
    let lens: Vec<Option<u64>> = spec.kernels().iter().map(|k| k.len()).collect();
    let product: f64 = lens.iter().map(|l| l.map_or(f64::INFINITY, |v| v as f64 + 1.0)).product();
    if product <= EXHAUSTIVE_LIMIT {
        let caps: Vec<u64> = lens.iter().map(|l| l.expect("finite")).collect();
        let tails: Vec<Vec<f64>> = (0..mk).map(|m| (0..=caps[m]).map(|h| spec.tail_sum(m, h)).collect()).collect();
        let mut h = vec![0u64; mk];
        let mut best = h.clone();
        let mut best_val = f64::INFINITY;
        let mut cur_tails: Vec<f64> = (0..mk).map(|m| tails[m][0]).collect();
        loop {
            let (a, b) = obj.ab_with_tails(&h, &cur_tails);
            let v = a + 2.0 * b;
            if v < best_val {
                best_val = v;
                best.clone_from(&h);
            }
            // Odometer increment.
            let mut k = 0;
            loop {
                if k == mk {
                    return best;
                }
                if h[k] < caps[k] {
                    h[k] += 1;
                    cur_tails[k] = tails[k][h[k] as usize];
                    break;
                }
                h[k] = 0;
                cur_tails[k] = tails[k][0];
                k += 1;
            }
        }
    }
    // Coordinate-wise exhaustive scans until no coordinate moves. Each scan
    // stops once the linear term alone exceeds the incumbent value.
    let mut h = start;
    let mut best_val = obj.value(&h);
    for _sweep in 0..100 {
        let mut moved = false;
        for m in 0..mk {
            let rest: f64 = h.iter().enumerate().filter(|(k, _)| *k != m).map(|(_, &v)| v as f64).sum();
            let mut trial = h.clone();
            let mut hm = 0u64;
            loop {
                if lens[m].is_some_and(|c| hm > c) {
                    break;
                }
                if obj.lin * (rest + hm as f64) > best_val {
                    break;
                }
                trial[m] = hm;
                let v = obj.value(&trial);
                if v < best_val {
                    best_val = v;
                    if h[m] != hm {
                        h[m] = hm;
                        moved = true;
                    }
                }
                hm += 1;
            }
        }
        if !moved {
            break;
        }
    }
    h
}

fn continuous_start(class: &MklClass, spec: &SpectrumSet, rp: &RiskParams, t: Exponent) -> Vec<u64> {
    let rate =
        RateSpec { kernels: spec.kernels().iter().map(|k| k.algebraic_params().unwrap_or((0.0, 2.0))).collect() };
    let h = optimal_truncation_unchecked(&rate, class, rp, t);
    h.iter()
        .zip(spec.kernels())
        .map(|(&v, k)| {
            let v = if v.is_finite() { v.round().max(0.0) as u64 } else { 0 };
            k.len().map_or(v, |c| v.min(c))
        })
        .collect()
}

/// `min over h (and t)` of the fixed-point bound
/// `4F^2 sum h/n + 8FL sqrt(e t*^2 D^2/n ||tails||_{t*/2}) + 4 sqrt(Be) D F L M^{1/t*} t*/n`.
pub fn fixed_point_bound(
    class: &MklClass,
    spec: &SpectrumSet,
    rp: &RiskParams,
    h: Option<&[u64]>,
    t: Option<Exponent>,
) -> Result<FixedPointBound> {
    if class.p().value() > 2.0 {
        return Err(invalid("p", "the fixed-point bound needs 1 <= p <= 2"));
    }
    if spec.len() != class.kernels() {
        return Err(invalid("spectra", format!("expected {} kernels, got {}", class.kernels(), spec.len())));
    }
    if let Some(h) = h {
        if h.len() != class.kernels() {
            return Err(invalid("h", format!("expected {} entries, got {}", class.kernels(), h.len())));
        }
    }
    if let Some(t) = t {
        if t.value() < class.p().value() * (1.0 - 1e-12) || t.value() > 2.0 * (1.0 + 1e-12) {
            return Err(invalid("t", format!("need t in [p, 2], got {t}")));
        }
    }
    let grid = match t {
        Some(t) => vec![t],
        None => t_grid(class.p(), class.kernels(), T_GRID_POINTS),
    };
    let mut best: Option<FixedPointBound> = None;
    for t in grid {
        let obj = match FixedPointObjective::new(class, spec, rp, t) {
            Ok(o) => o,
            Err(Error::InfiniteConjugate) => continue,
            Err(e) => return Err(e),
        };
        let hv = match h {
            Some(h) => h.to_vec(),
            None => minimize_h(&obj, continuous_start(class, spec, rp, t)),
        };
        let (a, b) = obj.ab(&hv);
        let v = a + 2.0 * b;
        if best.as_ref().is_none_or(|bst| v < bst.r_star) {
            let root = fixed_point_quadratic(a, b)?.r;
            best = Some(FixedPointBound { r_star: v, quadratic_root: root, a, b, h_used: hv, t_used: t });
        }
    }
    best.ok_or(Error::InfiniteConjugate)
}

/// Excess-risk bound from a fixed point: `7 r*/F + (11 L (b - a) + 27 F) x / n`.
pub fn excess_from_fixed_point(r_star: f64, rp: &RiskParams) -> f64 {
    let (lo, hi) = rp.loss_range;
    7.0 * r_star / rp.variance + (11.0 * rp.lipschitz * (hi - lo) + 27.0 * rp.variance) * rp.confidence / rp.n as f64
}

/// Per-kernel algebraic decay parameters `(d_m, alpha_m)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    pub kernels: Vec<(f64, f64)>,
}

impl RateSpec {
    pub fn new(kernels: Vec<(f64, f64)>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(invalid("kernels", "need at least one kernel"));
        }
        for &(d, a) in &kernels {
            positive("d", d)?;
            if !(a > 1.0) {
                return Err(invalid("alpha", format!("must exceed 1, got {a}")));
            }
        }
        Ok(RateSpec { kernels })
    }

    pub fn uniform(d: f64, alpha: f64, m: usize) -> Result<Self> {
        RateSpec::new(vec![(d, alpha); m])
    }

    /// Reads `(d, alpha)` off algebraic spectra.
    pub fn from_spectra(spec: &SpectrumSet) -> Result<Self> {
        let ks = spec
            .kernels()
            .iter()
            .map(|k| k.algebraic_params().ok_or_else(|| invalid("spectra", "rate specs need algebraic spectra")))
            .collect::<Result<Vec<_>>>()?;
        RateSpec::new(ks)
    }

    pub fn d_max(&self) -> f64 {
        self.kernels.iter().map(|k| k.0).fold(f64::MIN, f64::max)
    }

    pub fn alpha_min(&self) -> f64 {
        self.kernels.iter().map(|k| k.1).fold(f64::INFINITY, f64::min)
    }
}

fn optimal_truncation_unchecked(rate: &RateSpec, class: &MklClass, rp: &RiskParams, t: Exponent) -> Vec<f64> {
    let x = t.star();
    let m = class.kernels() as f64;
    let (f, l, d) = (rp.variance, rp.lipschitz, class.radius());
    let base = 4.0 * E * x * x * d * d * l * l / (f * f) * m.powf(2.0 / x - 2.0) * rp.n as f64;
    rate.kernels.iter().map(|&(dm, am)| (base * dm).powf(1.0 / (1.0 + am))).collect()
}

/// `h_m = (4 d_m e t*^2 D^2 F^{-2} L^2 M^{2/t*-2} n)^{1/(1+alpha_m)}`.
pub fn optimal_truncation(rate: &RateSpec, class: &MklClass, rp: &RiskParams, t: Exponent) -> Result<Vec<f64>> {
    if rate.kernels.iter().any(|k| !(k.1 > 1.0)) {
        return Err(invalid("alpha", "all alpha_m must exceed 1"));
    }
    if rate.kernels.len() != class.kernels() {
        return Err(invalid("rate", "one (d, alpha) pair per kernel is required"));
    }
    if t.star().is_infinite() {
        return Err(Error::InfiniteConjugate);
    }
    Ok(optimal_truncation_unchecked(rate, class, rp, t))
}

/// Which form of the decay factor multiplies the main term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayFactor {
    /// `sqrt((alpha + 1)/(alpha - 1))`, the literal factor with the sign of
    /// `1 - alpha` corrected.
    #[default]
    SignCorrected,
    /// `sqrt(|(3 - alpha)/(1 - alpha)|)`, the literal factor under an absolute value.
    LiteralAbs,
}

impl DecayFactor {
    pub fn value(self, alpha: f64) -> f64 {
        match self {
            DecayFactor::SignCorrected => ((alpha + 1.0) / (alpha - 1.0)).sqrt(),
            DecayFactor::LiteralAbs => ((3.0 - alpha) / (1.0 - alpha)).abs().sqrt(),
        }
    }
}

/// `true` when the literal ratio `(3 - alpha)/(1 - alpha)` is negative.
pub fn literal_ratio_negative(alpha: f64) -> bool {
    (3.0 - alpha) / (1.0 - alpha) < 0.0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExcessReport {
    pub value: f64,
    pub main_term: f64,
    pub remainder_term: f64,
    pub confidence_term: f64,
    pub t_used: Exponent,
    pub decay_factor: DecayFactor,
    pub decay_factor_value: f64,
    /// Set whenever the literal ratio under the root is negative, i.e. a
    /// sign fix was needed.
    pub sign_fix_applied: bool,
}

pub fn excess_risk_bound(class: &MklClass, rate: &RateSpec, rp: &RiskParams) -> Result<ExcessReport> {
    excess_risk_bound_with(class, rate, rp, DecayFactor::default())
}

/// Evaluates the excess-risk rate bound at a fixed `t`.
pub fn excess_risk_bound_at(
    class: &MklClass,
    rate: &RateSpec,
    rp: &RiskParams,
    factor: DecayFactor,
    t: Exponent,
) -> Result<ExcessReport> {
    if class.p().value() > 2.0 {
        return Err(invalid("p", "the excess-risk bound needs 1 <= p <= 2"));
    }
    let x = t.star();
    if x.is_infinite() {
        return Err(Error::InfiniteConjugate);
    }
    let am = rate.alpha_min();
    let dm = rate.d_max();
    let m = class.kernels() as f64;
    let (b, l, f, d) = (rp.kernel_bound, rp.lipschitz, rp.variance, class.radius());
    let n = rp.n as f64;
    let fac = factor.value(am);
    let g = 1.0 / (1.0 + am);
    let main = 186.0
        * fac
        * (dm * d * d * l * l * x * x / (f * f)).powf(g)
        * m.powf(1.0 + 2.0 * g * (1.0 / x - 1.0))
        * n.powf(-am * g);
    let rem = 47.0 * b.sqrt() * d * l * m.powf(1.0 / x) * x / n;
    let conf = (22.0 * b * d * l * m.powf(1.0 / x) + 27.0 * f) * rp.confidence / n;
    Ok(ExcessReport {
        value: main + rem + conf,
        main_term: main,
        remainder_term: rem,
        confidence_term: conf,
        t_used: t,
        decay_factor: factor,
        decay_factor_value: fac,
        sign_fix_applied: literal_ratio_negative(am),
    })
}

pub fn excess_risk_bound_with(
    class: &MklClass,
    rate: &RateSpec,
    rp: &RiskParams,
    factor: DecayFactor,
) -> Result<ExcessReport> {
    if rate.kernels.len() != class.kernels() {
        return Err(invalid("rate", "one (d, alpha) pair per kernel is required"));
    }
    let mut best: Option<ExcessReport> = None;
    for t in t_grid(class.p(), class.kernels(), T_GRID_POINTS) {
        match excess_risk_bound_at(class, rate, rp, factor, t) {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.value < b.value) {
                    best = Some(r);
                }
            }
            Err(Error::InfiniteConjugate) => continue,
            Err(e) => return Err(e),
        }
    }
    best.ok_or(Error::InfiniteConjugate)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(invalid("xs, ys", "need at least two paired points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(invalid("xs, ys", "log-log fit needs positive values"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(invalid("xs", "all x values coincide"));
    }
    Ok(sxy / sxx)
}

/// Block-norm profile `||w*_m|| = m^{-beta}` of the Bayes hypothesis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftSparseBayes {
    pub beta: f64,
    #[serde(rename = "M")]
    pub m: usize,
}

impl SoftSparseBayes {
    pub fn new(beta: f64, m: usize) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(invalid("beta", format!("must be finite and >= 0, got {beta}")));
        }
        if m == 0 {
            return Err(invalid("M", "must be at least 1"));
        }
        Ok(SoftSparseBayes { beta, m })
    }
}

/// `D_p = (sum_m m^{-beta p})^{1/p}`.
pub fn bayes_radius(bayes: &SoftSparseBayes, p: Exponent) -> f64 {
    let profile: Vec<f64> = (1..=bayes.m).map(|m| (m as f64).powf(-bayes.beta)).collect();
    power_norm(&profile, p.value())
}

fn nu_at(alpha: f64, m: f64, d_p: f64, x: f64) -> f64 {
    let g = 2.0 / (1.0 + alpha);
    (d_p * x).powf(g) * m.powf(1.0 + g * (1.0 / x - 1.0))
}

/// `min over t in [p, 2]` of `(D_p t*)^{2/(1+alpha)} M^{1+(2/(1+alpha))(1/t*-1)}`,
/// with the minimizing `t`.
pub fn nu_factor_report(p: Exponent, alpha: f64, m: usize, d_p: f64) -> Result<(f64, Exponent)> {
    if !(alpha > 1.0) {
        return Err(invalid("alpha", format!("must exceed 1, got {alpha}")));
    }
    if p.value() > 2.0 {
        return Err(invalid("p", "nu_p is defined for p in [1, 2]"));
    }
    positive("D_p", d_p)?;
    if m == 0 {
        return Err(invalid("M", "must be at least 1"));
    }
    let mut best: Option<(f64, Exponent)> = None;
    for t in t_grid(p, m, T_GRID_POINTS) {
        let x = t.star();
        if x.is_infinite() {
            continue;
        }
        let v = nu_at(alpha, m as f64, d_p, x);
        if best.is_none_or(|b| v < b.0) {
            best = Some((v, t));
        }
    }
    best.ok_or(Error::InfiniteConjugate)
}

pub fn nu_factor(p: Exponent, alpha: f64, m: usize, d_p: f64) -> Result<f64> {
    Ok(nu_factor_report(p, alpha, m, d_p)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NuPoint {
    pub p: Exponent,
    pub nu: f64,
    pub t_used: Exponent,
    pub d_p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NuCurve {
    pub points: Vec<NuPoint>,
    pub argmin: Exponent,
    pub min: f64,
}

/// `1, 1 + step, ..., 2` with the right end exactly 2.
pub fn p_grid(step: f64) -> Result<Vec<Exponent>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(invalid("step", format!("must lie in (0, 1], got {step}")));
    }
    let k = (1.0 / step).round() as usize;
    if ((k as f64) * step - 1.0).abs() > 1e-9 {
        return Err(invalid("step", "must divide 1 evenly"));
    }
    (0..=k).map(|i| Exponent::new(if i == k { 2.0 } else { 1.0 + i as f64 / k as f64 })).collect()
}

pub fn nu_curve(bayes: &SoftSparseBayes, alpha: f64, grid: &[Exponent]) -> Result<NuCurve> {
    if grid.is_empty() {
        return Err(invalid("p_grid", "must be nonempty"));
    }
    if grid.windows(2).any(|w| !(w[0].value() < w[1].value())) {
        return Err(invalid("p_grid", "must be strictly increasing"));
    }
    if grid.iter().any(|p| p.value() > 2.0) {
        return Err(invalid("p_grid", "entries must lie in [1, 2]"));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &p in grid {
        let d_p = bayes_radius(bayes, p);
        let (nu, t_used) = nu_factor_report(p, alpha, bayes.m, d_p)?;
        points.push(NuPoint { p, nu, t_used, d_p });
    }
    let best = points.iter().fold(&points[0], |b, q| if q.nu < b.nu { q } else { b });
    Ok(NuCurve { argmin: best.p, min: best.nu, points })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Local,
    Global,
}

/// Shape-level comparison of the local and global excess-risk rates (unit
/// hidden constants).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateComparison {
    pub local: f64,
    pub local_t: Exponent,
    pub global: f64,
    pub global_t: Exponent,
    pub best: f64,
    pub winner: Regime,
}

fn rates_with_ln_m(p: Exponent, d: f64, m: f64, alpha: f64, n: f64) -> Result<RateComparison> {
    let grid = crate::bounds::t_grid_ln(p, m.ln(), T_GRID_POINTS);
    let g = 2.0 / (1.0 + alpha);
    let mut local = (f64::INFINITY, p);
    let mut global = (f64::INFINITY, p);
    for t in grid {
        let x = t.star();
        if x.is_infinite() {
            continue;
        }
        let lv = (x * d).powf(g) * m.powf(1.0 + g * (1.0 / x - 1.0)) * n.powf(-alpha / (1.0 + alpha));
        let gv = x * d * m.powf(1.0 / x) / n.sqrt();
        if lv < local.0 {
            local = (lv, t);
        }
        if gv < global.0 {
            global = (gv, t);
        }
    }
    if local.0.is_infinite() {
        return Err(Error::InfiniteConjugate);
    }
    let winner = if local.0 < global.0 { Regime::Local } else { Regime::Global };
    Ok(RateComparison {
        local: local.0,
        local_t: local.1,
        global: global.0,
        global_t: global.1,
        best: local.0.min(global.0),
        winner,
    })
}

fn check_rate_inputs(p: Exponent, d: f64, alpha: f64) -> Result<()> {
    if p.value() > 2.0 {
        return Err(invalid("p", "rate comparison needs p in [1, 2]"));
    }
    positive("D", d)?;
    if !(alpha > 1.0) {
        return Err(invalid("alpha", "must exceed 1"));
    }
    Ok(())
}

/// Local rate `(t*D)^{2/(1+alpha)} M^{1+(2/(1+alpha))(1/t*-1)} n^{-alpha/(1+alpha)}`
/// against global rate `t* D M^{1/t*} n^{-1/2}`, each minimized over `t`.
pub fn rate_comparison(class: &MklClass, alpha: f64, n: f64) -> Result<RateComparison> {
    check_rate_inputs(class.p(), class.radius(), alpha)?;
    positive("n", n)?;
    rates_with_ln_m(class.p(), class.radius(), class.kernels() as f64, alpha, n)
}

/// Axis swept by [`phase_transition_locator`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Sweep `n` at a fixed number of kernels.
    SampleSize { m: f64, n_grid: Vec<f64> },
    /// Sweep `M` (treated as a real) at a fixed sample size.
    Kernels { n: f64, m_grid: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Crossover {
    /// Sample size at the crossing.
    pub n: f64,
    /// Number of kernels at the crossing.
    pub m: f64,
    /// `M^{1/p} / D` at the crossing.
    pub ratio: f64,
    /// `(M^{1/p}/D) / sqrt(n)` at the crossing.
    pub ratio_over_sqrt_n: f64,
}

/// Locates where the local and global rates cross along a sorted grid:
/// brackets the first sign change of `log(local/global)`, then bisects in
/// log scale.
pub fn phase_transition_locator(p: Exponent, d: f64, alpha: f64, axis: &SweepAxis) -> Result<Crossover> {
    check_rate_inputs(p, d, alpha)?;
    let (grid, eval): (&[f64], Box<dyn Fn(f64) -> Result<f64>>) = match axis {
        SweepAxis::SampleSize { m, n_grid } => {
            positive("M", *m)?;
            let m = *m;
            (n_grid, Box::new(move |n: f64| rates_with_ln_m(p, d, m, alpha, n).map(|c| (c.local / c.global).ln())))
        }
        SweepAxis::Kernels { n, m_grid } => {
            positive("n", *n)?;
            let n = *n;
            (m_grid, Box::new(move |m: f64| rates_with_ln_m(p, d, m, alpha, n).map(|c| (c.local / c.global).ln())))
        }
    };
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|v| !(*v > 0.0)) {
        return Err(invalid("grid", "need a strictly increasing positive grid with at least two points"));
    }
    let vals = grid.iter().map(|&g| eval(g)).collect::<Result<Vec<f64>>>()?;
    let k = (0..grid.len() - 1)
        .find(|&i| vals[i] == 0.0 || vals[i].signum() != vals[i + 1].signum())
        .ok_or(Error::NoCrossing)?;
    let root = if vals[k] == 0.0 {
        grid[k].ln()
    } else {
        brent(|lg| eval(lg.exp()).unwrap_or(f64::NAN), grid[k].ln(), grid[k + 1].ln(), 1e-13, 500)
            .ok_or(Error::NoCrossing)?
    };
    let at = root.exp();
    let (n, m) = match axis {
        SweepAxis::SampleSize { m, .. } => (at, *m),
        SweepAxis::Kernels { n, .. } => (*n, at),
    };
    let ratio = m.powf(p.recip()) / d;
    Ok(Crossover { n, m, ratio, ratio_over_sqrt_n: ratio / n.sqrt() })
}

/// Fit of `M^{1/p}/D  ~  n^gamma` over crossovers located along `n_grid`
/// for each `M` in `m_grid`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseFit {
    pub gamma: f64,
    pub crossovers: Vec<Crossover>,
}

pub fn crossover_exponent(p: Exponent, d: f64, alpha: f64, m_grid: &[f64], n_grid: &[f64]) -> Result<PhaseFit> {
    let crossovers = m_grid
        .iter()
        .map(|&m| phase_transition_locator(p, d, alpha, &SweepAxis::SampleSize { m, n_grid: n_grid.to_vec() }))
        .collect::<Result<Vec<_>>>()?;
    let ns: Vec<f64> = crossovers.iter().map(|c| c.n).collect();
    let rs: Vec<f64> = crossovers.iter().map(|c| c.ratio).collect();
    Ok(PhaseFit { gamma: loglog_slope(&ns, &rs)?, crossovers })
}
