//! Exact-computation checks of the moment and norm inequalities behind the
//! bounds: sign-sum moments by full enumeration, sums of discrete variables by
//! exact convolution, Poisson moments by a series with a certified tail.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::generator::{stream, DOMAIN_HARNESS};
use crate::error::{invalid, Error, Result};
use crate::norms::{
    block_norm, dual_witness, lp_norm, lq_to_lp_factor, rosenthal_young_constant, BlockVector, Exponent,
};

/// Largest `n` for sign enumeration (`2^12` patterns).
pub const MAX_ENUMERATION_N: usize = 12;
/// Largest product support for exact discrete moments.
pub const MAX_PRODUCT_SUPPORT: usize = 1 << 22;

/// Relative slack allowed for floating-point rounding in every check.
const ROUNDING: f64 = 1e-12;

/// Violations of one inequality variant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariantTally {
    pub trials: usize,
    pub violations: usize,
    /// Largest observed `lhs / rhs`.
    pub max_ratio: f64,
}

impl VariantTally {
    fn new() -> Self {
        VariantTally { trials: 0, violations: 0, max_ratio: 0.0 }
    }

    fn record(&mut self, lhs: f64, rhs: f64) {
        self.trials += 1;
        if lhs > rhs * (1.0 + ROUNDING) {
            self.violations += 1;
        }
        if rhs > 0.0 {
            self.max_ratio = self.max_ratio.max(lhs / rhs);
        }
    }

    fn merge(&mut self, other: &VariantTally) {
        self.trials += other.trials;
        self.violations += other.violations;
        self.max_ratio = self.max_ratio.max(other.max_ratio);
    }
}

/// Sign-sum moment check with `c = max(1, q - 1)` and `c = q`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KhintchineReport {
    pub q: f64,
    pub tight: VariantTally,
    pub operative: VariantTally,
}

/// `E_sigma ||sum sigma_i v_i||^q` over all `2^n` sign patterns, by Gray code.
pub fn sign_sum_moment(vectors: &[Vec<f64>], q: f64) -> Result<f64> {
    let n = vectors.len();
    if n == 0 || n > MAX_ENUMERATION_N {
        return Err(invalid("n", format!("need 1 <= n <= {MAX_ENUMERATION_N}, got {n}")));
    }
    let dim = vectors[0].len();
    let mut s: Vec<f64> = (0..dim).map(|j| vectors.iter().map(|v| v[j]).sum()).collect();
    let mut signs = vec![1.0; n];
    let norm_q = |s: &[f64]| s.iter().map(|x| x * x).sum::<f64>().powf(0.5 * q);
    let mut total = norm_q(&s);
    for k in 1u64..(1 << n) {
        let bit = k.trailing_zeros() as usize;
        signs[bit] = -signs[bit];
        for (sj, vj) in s.iter_mut().zip(&vectors[bit]) {
            *sj += 2.0 * signs[bit] * vj;
        }
        total += norm_q(&s);
    }
    Ok(total / (1u64 << n) as f64)
}

fn random_vectors(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    // Half the trials use equal-magnitude collinear vectors, which is where the
    // moment bound is closest to tight.
    if rng.random::<bool>() {
        let e: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        (0..n).map(|_| e.clone()).collect()
    } else {
        (0..n)
            .map(|_| {
                let scale = (2.0 * rng.random::<f64>() - 1.0).exp();
                (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
            })
            .collect()
    }
}

/// Random vector tuples with `n` drawn from `1..=n_max`, each checked by exact
/// enumeration against `(c sum ||v_i||^2)^{q/2}`.
pub fn verify_khintchine(n_max: usize, dim: usize, q: f64, trials: usize, seed: u64) -> Result<KhintchineReport> {
    if n_max == 0 || n_max > MAX_ENUMERATION_N {
        return Err(invalid("n", format!("need 1 <= n <= {MAX_ENUMERATION_N}, got {n_max}")));
    }
    if dim == 0 {
        return Err(invalid("dim", "must be at least 1"));
    }
    if !(q > 0.0) || !q.is_finite() {
        return Err(invalid("q", "must be finite and positive"));
    }
    let mut rng = stream(seed, DOMAIN_HARNESS, 0);
    let mut tight = VariantTally::new();
    let mut operative = VariantTally::new();
    for _ in 0..trials {
        let n = rng.random_range(1..=n_max);
        let vs = random_vectors(&mut rng, n, dim);
        let lhs = sign_sum_moment(&vs, q)?;
        let s2: f64 = vs.iter().flatten().map(|x| x * x).sum();
        tight.record(lhs, ((q - 1.0).max(1.0) * s2).powf(0.5 * q));
        operative.record(lhs, (q * s2).powf(0.5 * q));
    }
    Ok(KhintchineReport { q, tight, operative })
}

/// Families of bounded nonnegative variables for the Rosenthal-type check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiscreteFamily {
    /// Each `X_i` takes `support` random values in `[0, B]` with random weights.
    Random { support: usize },
    /// `X_i = B * Bernoulli(prob)`; a random `prob` per variable when absent.
    Bernoulli { prob: Option<f64> },
}

/// Exact `E ((1/n) sum X_i)^q` for independent discrete `X_i`, each given as
/// `(value, probability)` pairs.
pub fn mean_moment(vars: &[Vec<(f64, f64)>], q: f64) -> Result<f64> {
    let n = vars.len();
    if n == 0 {
        return Err(invalid("vars", "need at least one variable"));
    }
    let size = vars.iter().try_fold(1usize, |acc, v| acc.checked_mul(v.len()).filter(|s| *s <= MAX_PRODUCT_SUPPORT));
    if size.is_none() {
        return Err(Error::TooLarge(format!("product support exceeds {MAX_PRODUCT_SUPPORT}")));
    }
    let mut dist = vec![(0.0f64, 1.0f64)];
    for v in vars {
        let mut next = Vec::with_capacity(dist.len() * v.len());
        for &(s, ps) in &dist {
            for &(x, px) in v {
                next.push((s + x, ps * px));
            }
        }
        dist = next;
    }
    let inv = 1.0 / n as f64;
    Ok(dist.iter().map(|&(s, ps)| ps * (s * inv).powf(q)).sum())
}

/// Exact moment for `X_i = B Bernoulli(pi_i)` via the count distribution.
fn bernoulli_moment(b: f64, probs: &[f64], q: f64) -> f64 {
    let n = probs.len();
    let mut dist = vec![0.0; n + 1];
    dist[0] = 1.0;
    for (i, &pi) in probs.iter().enumerate() {
        for k in (0..=i + 1).rev() {
            let stay = dist[k] * (1.0 - pi);
            let up = if k > 0 { dist[k - 1] * pi } else { 0.0 };
            dist[k] = stay + up;
        }
    }
    dist.iter().enumerate().map(|(k, pk)| pk * (b * k as f64 / n as f64).powf(q)).sum()
}

/// Checks `E((1/n) sum X_i)^q <= C_q ((B/n)^q + ((1/n) sum E X_i)^q)` on random
/// families with `n` drawn from `1..=n_max`.
pub fn verify_rosenthal_young(
    n_max: usize,
    b: f64,
    q: f64,
    trials: usize,
    family: DiscreteFamily,
    seed: u64,
) -> Result<VariantTally> {
    if n_max == 0 || n_max > MAX_ENUMERATION_N {
        return Err(invalid("n", format!("need 1 <= n <= {MAX_ENUMERATION_N}, got {n_max}")));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(invalid("B", "must be finite and positive"));
    }
    let cq = rosenthal_young_constant(q)?;
    if let DiscreteFamily::Random { support } = family {
        if support == 0 {
            return Err(invalid("support", "must be at least 1"));
        }
        if (support as f64).powi(n_max as i32) > MAX_PRODUCT_SUPPORT as f64 {
            return Err(Error::TooLarge(format!("support {support}^{n_max} exceeds {MAX_PRODUCT_SUPPORT}")));
        }
    }
    if let DiscreteFamily::Bernoulli { prob: Some(pr) } = family {
        if !(0.0..=1.0).contains(&pr) {
            return Err(invalid("prob", "must lie in [0, 1]"));
        }
    }
    let mut rng = stream(seed, DOMAIN_HARNESS, 1);
    let mut tally = VariantTally::new();
    for _ in 0..trials {
        let n = rng.random_range(1..=n_max);
        let (lhs, mean) = match family {
            DiscreteFamily::Random { support } => {
                let vars: Vec<Vec<(f64, f64)>> = (0..n)
                    .map(|_| {
                        let w: Vec<f64> = (0..support).map(|_| rng.random::<f64>() + 1e-3).collect();
                        let tot: f64 = w.iter().sum();
                        w.into_iter().map(|wk| (b * rng.random::<f64>(), wk / tot)).collect()
                    })
                    .collect();
                let mean = vars.iter().flatten().map(|(x, p)| x * p).sum::<f64>() / n as f64;
                (mean_moment(&vars, q)?, mean)
            }
            DiscreteFamily::Bernoulli { prob } => {
                let probs: Vec<f64> = (0..n).map(|_| prob.unwrap_or_else(|| rng.random::<f64>())).collect();
                let mean = b * probs.iter().sum::<f64>() / n as f64;
                (bernoulli_moment(b, &probs, q), mean)
            }
        };
        let nf = n as f64;
        tally.record(lhs, cq * ((b / nf).powf(q) + mean.powf(q)));
    }
    Ok(tally)
}

/// One row of the Poisson moment table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoissonRow {
    pub q: u32,
    /// `E Z^q` for `Z ~ Poisson(1)`.
    pub moment: f64,
    /// The Bell number `B_q`, which `moment` must reproduce.
    pub exact: f64,
    /// `(q + e)^q`.
    pub bound: f64,
    /// Certified bound on the truncated tail of the series.
    pub remainder: f64,
    pub holds: bool,
}

/// `E Z^q = e^{-1} sum_k k^q / k!` with the tail bounded by a geometric series
/// once the term ratio `((k+1)/k)^q / (k+1)` drops below one. Terms are
/// summed smallest first, so low moments come out exact to the last bit.
pub fn poisson_moment(q: u32) -> (f64, f64) {
    let qf = q as f64;
    let inv_e = (-1.0f64).exp();
    if q == 0 {
        return (1.0, 0.0);
    }
    let mut terms = vec![inv_e]; // k = 1
    let mut term = inv_e;
    let mut sum = term;
    let mut k = 1u64;
    loop {
        let kf = k as f64;
        term *= ((kf + 1.0) / kf).powf(qf) / (kf + 1.0);
        terms.push(term);
        sum += term;
        k += 1;
        let kf = k as f64;
        let next_ratio = ((kf + 1.0) / kf).powf(qf) / (kf + 1.0);
        if next_ratio < 1.0 {
            let tail = term * next_ratio / (1.0 - next_ratio);
            if tail < 1e-18 * sum {
                return (terms.iter().rev().sum(), tail);
            }
        }
    }
}

/// Bell numbers by the Bell triangle; `E Z^q` equals the `q`-th one.
pub fn bell_number(q: u32) -> u128 {
    let mut row = vec![1u128];
    for _ in 0..q {
        let mut next = vec![*row.last().expect("nonempty")];
        for &v in &row {
            let last = *next.last().expect("nonempty");
            next.push(last + v);
        }
        row = next;
    }
    row[0]
}

/// The table for `q = 1..=q_max`.
pub fn verify_poisson_moment(q_max: u32) -> Vec<PoissonRow> {
    (1..=q_max)
        .map(|q| {
            let (moment, remainder) = poisson_moment(q);
            let bound = (q as f64 + std::f64::consts::E).powi(q as i32);
            let exact = bell_number(q) as f64;
            let holds = moment + remainder <= bound && (moment - exact).abs() <= 1e-12 * exact;
            PoissonRow { q, moment, exact, bound, remainder, holds }
        })
        .collect()
}

const HOLDER_EXPONENTS: [f64; 6] = [1.0, 4.0 / 3.0, 1.5, 2.0, 3.0, f64::INFINITY];

fn random_exponent(rng: &mut ChaCha8Rng) -> Exponent {
    let p = if rng.random::<bool>() {
        HOLDER_EXPONENTS[rng.random_range(0..HOLDER_EXPONENTS.len())]
    } else {
        1.0 + 9.0 * rng.random::<f64>()
    };
    Exponent::new(p).expect("p >= 1")
}

fn random_block_pair(rng: &mut ChaCha8Rng) -> (BlockVector, BlockVector) {
    let m = rng.random_range(1..=6);
    let shape: Vec<usize> = (0..m).map(|_| rng.random_range(1..=4)).collect();
    let mut draw = || {
        BlockVector::new(
            shape
                .iter()
                .map(|&k| {
                    let s = (2.0 * rng.random::<f64>() - 1.0).exp();
                    (0..k).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect()
                })
                .collect(),
        )
        .expect("nonempty shape")
    };
    (draw(), draw())
}

/// Block Hoelder `<x, y> <= ||x||_{2,p} ||y||_{2,p*}` on random instances.
pub fn verify_block_holder(instances: usize, seed: u64) -> Result<VariantTally> {
    let mut rng = stream(seed, DOMAIN_HARNESS, 2);
    let mut t = VariantTally::new();
    for _ in 0..instances {
        let (x, y) = random_block_pair(&mut rng);
        let p = random_exponent(&mut rng);
        t.record(x.dot(&y)?, block_norm(&x, p) * block_norm(&y, p.conjugate()));
    }
    Ok(t)
}

/// Equality in block Hoelder at the dual witness, to `1e-9` relative.
/// Returns the number of instances that miss.
pub fn verify_holder_attainment(instances: usize, seed: u64) -> Result<VariantTally> {
    let mut rng = stream(seed, DOMAIN_HARNESS, 3);
    let mut t = VariantTally::new();
    for _ in 0..instances {
        let (v, _) = random_block_pair(&mut rng);
        let p = random_exponent(&mut rng);
        let w = dual_witness(&v, p);
        let target = block_norm(&v, p.conjugate());
        let unit = block_norm(&w, p);
        let miss = (w.dot(&v)? - target).abs() > 1e-9 * target || (unit - 1.0).abs() > 1e-9;
        t.trials += 1;
        t.violations += miss as usize;
    }
    Ok(t)
}

fn random_nonneg(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| if rng.random::<f64>() < 0.2 { 0.0 } else { (3.0 * rng.random::<f64>() - 1.5).exp() }).collect()
}

/// `||a||_q + ||b||_q <= 2^{1-1/q} ||a + b||_q <= 2 ||a + b||_q` for
/// nonnegative `a, b`.
pub fn verify_norm_sum(instances: usize, seed: u64) -> Result<VariantTally> {
    let mut rng = stream(seed, DOMAIN_HARNESS, 4);
    let mut t = VariantTally::new();
    for _ in 0..instances {
        let k = rng.random_range(1..=10);
        let a = random_nonneg(&mut rng, k);
        let b = random_nonneg(&mut rng, k);
        let q = random_exponent(&mut rng);
        let s: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let lhs = lp_norm(&a, q)? + lp_norm(&b, q)?;
        let mid = 2f64.powf(1.0 - q.recip()) * lp_norm(&s, q)?;
        t.record(lhs, mid);
        t.record(mid, 2.0 * lp_norm(&s, q)?);
    }
    Ok(t)
}

/// `||a||_q <= M^{1/q - 1/p} ||a||_p` for `q <= p` on `R^M`.
pub fn verify_norm_conversion(instances: usize, seed: u64) -> Result<VariantTally> {
    let mut rng = stream(seed, DOMAIN_HARNESS, 5);
    let mut t = VariantTally::new();
    for _ in 0..instances {
        let m = rng.random_range(1..=12);
        let a = random_nonneg(&mut rng, m);
        let mut q = random_exponent(&mut rng);
        let mut p = random_exponent(&mut rng);
        if q > p {
            std::mem::swap(&mut q, &mut p);
        }
        t.record(lp_norm(&a, q)?, lq_to_lp_factor(m, q, p)? * lp_norm(&a, p)?);
    }
    Ok(t)
}

/// Settings for the full inequality suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    pub khintchine_n_max: usize,
    pub khintchine_dim: usize,
    pub khintchine_q: Vec<f64>,
    pub khintchine_trials: usize,
    pub rosenthal_n_max: usize,
    pub rosenthal_b: f64,
    pub rosenthal_q: Vec<f64>,
    pub rosenthal_trials: usize,
    pub rosenthal_support: usize,
    pub poisson_q_max: u32,
    pub instances: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 0,
            khintchine_n_max: MAX_ENUMERATION_N,
            khintchine_dim: 3,
            khintchine_q: vec![2.0, 3.0, 4.0],
            khintchine_trials: 1000,
            rosenthal_n_max: 10,
            rosenthal_b: 1.0,
            rosenthal_q: vec![1.0, 2.0, 3.0],
            rosenthal_trials: 500,
            rosenthal_support: 3,
            poisson_q_max: 10,
            instances: 1000,
        }
    }
}

/// Outcome of one suite. Soft suites are reported but never fail the run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub hard: bool,
    pub trials: usize,
    pub violations: usize,
    pub max_ratio: f64,
    pub error: Option<String>,
    pub passed: bool,
}

impl SuiteResult {
    fn from(name: String, hard: bool, r: Result<VariantTally>) -> Self {
        match r {
            Ok(t) => SuiteResult {
                name,
                hard,
                trials: t.trials,
                violations: t.violations,
                max_ratio: t.max_ratio,
                error: None,
                passed: !hard || t.violations == 0,
            },
            Err(e) => SuiteResult {
                name,
                hard,
                trials: 0,
                violations: 0,
                max_ratio: 0.0,
                error: Some(e.to_string()),
                passed: !hard,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteResult>,
    pub poisson: Vec<PoissonRow>,
    pub all_passed: bool,
}

/// Runs every suite; a failing or erroring suite does not stop the others.
pub fn run_suites(cfg: &VerifyConfig) -> VerifyReport {
    let mut suites = Vec::new();
    for &q in &cfg.khintchine_q {
        match verify_khintchine(cfg.khintchine_n_max, cfg.khintchine_dim, q, cfg.khintchine_trials, cfg.seed) {
            Ok(k) => {
                suites.push(SuiteResult::from(format!("khintchine_c_q[q={q}]"), true, Ok(k.operative)));
                suites.push(SuiteResult::from(format!("khintchine_c_max1_qm1[q={q}]"), false, Ok(k.tight)));
            }
            Err(e) => suites.push(SuiteResult::from(format!("khintchine[q={q}]"), true, Err(e))),
        }
    }
    for &q in &cfg.rosenthal_q {
        let fam = DiscreteFamily::Random { support: cfg.rosenthal_support };
        let r = verify_rosenthal_young(cfg.rosenthal_n_max, cfg.rosenthal_b, q, cfg.rosenthal_trials, fam, cfg.seed);
        suites.push(SuiteResult::from(format!("rosenthal_young_discrete[q={q}]"), true, r));
        let fam = DiscreteFamily::Bernoulli { prob: Some(0.5) };
        let r = verify_rosenthal_young(cfg.rosenthal_n_max, cfg.rosenthal_b, q, cfg.rosenthal_trials, fam, cfg.seed);
        suites.push(SuiteResult::from(format!("rosenthal_young_bernoulli[q={q}]"), true, r));
    }
    let poisson = verify_poisson_moment(cfg.poisson_q_max);
    let mut pt = VariantTally::new();
    for row in &poisson {
        pt.trials += 1;
        pt.violations += (!row.holds) as usize;
        pt.max_ratio = pt.max_ratio.max(row.moment / row.bound);
    }
    suites.push(SuiteResult::from("poisson_moment".into(), true, Ok(pt)));
    suites.push(SuiteResult::from("block_holder".into(), true, verify_block_holder(cfg.instances, cfg.seed)));
    suites.push(SuiteResult::from("holder_attainment".into(), true, verify_holder_attainment(cfg.instances, cfg.seed)));
    suites.push(SuiteResult::from("norm_sum".into(), true, verify_norm_sum(cfg.instances, cfg.seed)));
    suites.push(SuiteResult::from("norm_conversion".into(), true, verify_norm_conversion(cfg.instances, cfg.seed)));
    let all_passed = suites.iter().all(|s| s.passed);
    VerifyReport { suites, poisson, all_passed }
}

impl VariantTally {
    /// Pools several tallies.
    pub fn pooled<'a>(items: impl IntoIterator<Item = &'a VariantTally>) -> VariantTally {
        let mut t = VariantTally::new();
        for i in items {
            t.merge(i);
        }
        t
    }
}
