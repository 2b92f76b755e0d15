//! The constrained supremum `sup { <w, v> : ||w||_{2,p} <= D, sum lambda w^2 <= r }`.
//!
//! Closed forms cover the cases where one constraint is inactive. Otherwise
//! the solver runs projected ascent `w <- P(w + eta v)` with slowly growing `eta`,
//! where `P` projects onto the intersection by warm-started Dykstra
//! alternation between the two single-set projections. Every iterate is
//! rescaled into the feasible set for a certified lower value, and a dual
//! split `v = u + s Lambda w` gives a certified upper value; the solver stops
//! when the two agree to the requested relative tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::norms::{power_norm, BlockVector, Exponent, MklClass};
use crate::roots::golden_min;
use crate::spectra::SpectrumSet;

/// Solver settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Relative gap between certified lower and upper values.
    pub tol: f64,
    /// Cap on outer ascent iterations.
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-7, max_iter: 400 }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions { tol, ..Self::default() }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(invalid("tol", "must lie in (0, 1)"));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

/// Which constraints bind at the returned witness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveSet {
    /// `v = 0`.
    Trivial,
    Ball,
    Ellipsoid,
    Both,
}

/// Result of `local_sup`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalSup {
    /// `<w, v>` at the feasible witness.
    pub value: f64,
    /// A certified upper bound on the supremum.
    pub upper: f64,
    pub witness: BlockVector,
    pub active: ActiveSet,
    pub iterations: usize,
}

/// `local_sup_with` using the listed coordinates of `pop_spec` as variances.
pub fn local_sup(
    v: &BlockVector,
    class: &MklClass,
    r: f64,
    pop_spec: &SpectrumSet,
    opts: SolverOptions,
) -> Result<LocalSup> {
    local_sup_with(v, class, r, &pop_spec.coordinates()?, opts)
}

/// The supremum with coordinate variances `lambda[m][j]` given directly.
pub fn local_sup_with(
    v: &BlockVector,
    class: &MklClass,
    r: f64,
    lambda: &[Vec<f64>],
    opts: SolverOptions,
) -> Result<LocalSup> {
    opts.check()?;
    if !(r > 0.0) || r.is_nan() {
        return Err(invalid("r", "must be positive"));
    }
    let shape: Vec<usize> = lambda.iter().map(Vec::len).collect();
    if shape != v.shape() {
        return Err(Error::ShapeMismatch(v.shape(), shape));
    }
    if v.num_blocks() != class.kernels() {
        return Err(invalid("v", format!("has {} blocks but the class has M = {}", v.num_blocks(), class.kernels())));
    }
    if lambda.iter().flatten().any(|l| !(*l >= 0.0) || l.is_infinite()) {
        return Err(invalid("lambda", "variances must be finite and nonnegative"));
    }
    if v.blocks().iter().flatten().any(|x| !x.is_finite()) {
        return Err(invalid("v", "entries must be finite"));
    }
    Problem::new(v, class, r, lambda).solve(opts, v)
}

struct Problem {
    v: Vec<f64>,
    lam: Vec<f64>,
    ranges: Vec<(usize, usize)>,
    p: Exponent,
    d: f64,
    r: f64,
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

impl Problem {
    fn new(v: &BlockVector, class: &MklClass, r: f64, lambda: &[Vec<f64>]) -> Self {
        let mut ranges = Vec::with_capacity(lambda.len());
        let mut start = 0;
        for b in lambda {
            ranges.push((start, start + b.len()));
            start += b.len();
        }
        Problem {
            v: v.blocks().iter().flatten().copied().collect(),
            lam: lambda.iter().flatten().copied().collect(),
            ranges,
            p: class.p(),
            d: class.radius(),
            r,
        }
    }

    fn block_norms(&self, x: &[f64]) -> Vec<f64> {
        self.ranges.iter().map(|&(a, b)| norm2(&x[a..b])).collect()
    }

    fn ball_norm(&self, x: &[f64], q: f64) -> f64 {
        power_norm(&self.block_norms(x), q)
    }

    fn energy(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.lam).map(|(a, l)| l * a * a).sum()
    }

    fn dot(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.v).map(|(a, b)| a * b).sum()
    }

    fn to_blocks(&self, x: &[f64]) -> BlockVector {
        BlockVector::new(self.ranges.iter().map(|&(a, b)| x[a..b].to_vec()).collect())
            .expect("ranges come from a valid vector")
    }

    /// Shrinks `x` radially into both sets.
    fn feasible(&self, x: &[f64]) -> Vec<f64> {
        let bn = self.ball_norm(x, self.p.value());
        let en = self.energy(x);
        let mut f: f64 = 1.0;
        if bn > self.d {
            f = f.min(self.d / bn);
        }
        if en > self.r {
            f = f.min((self.r / en).sqrt());
        }
        x.iter().map(|a| a * f).collect()
    }

    /// `min_s D ||v - s Lambda x||_{2,p*} + s sqrt(r) ||Lambda^{1/2} x||`,
    /// an upper bound on the supremum for every `x`.
    fn certificate(&self, x: &[f64]) -> f64 {
        let q = self.p.star();
        let lx: Vec<f64> = x.iter().zip(&self.lam).map(|(a, l)| a * l).collect();
        let e = self.energy(x).sqrt();
        let mut buf = vec![0.0; self.v.len()];
        let mut u = |s: f64| {
            for ((b, vj), lj) in buf.iter_mut().zip(&self.v).zip(&lx) {
                *b = vj - s * lj;
            }
            self.d * self.ball_norm(&buf, q) + s * self.r.sqrt() * e
        };
        let u0 = u(0.0);
        if e == 0.0 {
            return u0;
        }
        let smax = u0 / (self.r.sqrt() * e);
        let (_, best) = golden_min(&mut u, 0.0, smax, 1e-13);
        best.min(u0)
    }

    fn ball_project(&self, z: &[f64], out: &mut [f64], state: &mut LpState) {
        let a = self.block_norms(z);
        let pv = self.p.value();
        if power_norm(&a, pv) <= self.d {
            out.copy_from_slice(z);
            return;
        }
        let rho = project_lp(&a, self.p, self.d, state);
        for (m, &(s, e)) in self.ranges.iter().enumerate() {
            let f = if a[m] > 0.0 { rho[m] / a[m] } else { 0.0 };
            for j in s..e {
                out[j] = z[j] * f;
            }
        }
    }

    fn ellipsoid_project(&self, z: &[f64], out: &mut [f64]) {
        let psi0 = self.energy(z);
        if psi0 <= self.r {
            out.copy_from_slice(z);
            return;
        }
        // phi(theta) = psi(theta)^{-1/2} is concave and increasing, so Newton
        // from theta = 0 approaches the root monotonically from the left.
        let target = self.r.powf(-0.5);
        let mut theta = 0.0f64;
        for _ in 0..200 {
            let (mut psi, mut dpsi) = (0.0, 0.0);
            for (zj, lj) in z.iter().zip(&self.lam) {
                let den = 1.0 + 2.0 * theta * lj;
                let t = lj * zj * zj / (den * den);
                psi += t;
                dpsi += 2.0 * lj * t / den;
            }
            let phi = psi.powf(-0.5);
            let dphi = phi * dpsi / psi;
            let step = (target - phi) / dphi;
            if !(step > 0.0) || !step.is_finite() {
                break;
            }
            theta += step;
            if step <= 1e-15 * theta {
                break;
            }
        }
        for ((o, zj), lj) in out.iter_mut().zip(z).zip(&self.lam) {
            *o = zj / (1.0 + 2.0 * theta * lj);
        }
    }

    fn solve(&self, opts: SolverOptions, v_blocks: &BlockVector) -> Result<LocalSup> {
        let n = self.v.len();
        let vn = norm2(&self.v);
        if vn == 0.0 {
            return Ok(LocalSup {
                value: 0.0,
                upper: 0.0,
                witness: self.to_blocks(&vec![0.0; n]),
                active: ActiveSet::Trivial,
                iterations: 0,
            });
        }
        let q = self.p.star();
        let ball_value = self.d * self.ball_norm(&self.v, q);
        let wb: Vec<f64> = crate::norms::dual_witness(v_blocks, self.p)
            .into_blocks()
            .into_iter()
            .flatten()
            .map(|x| self.d * x)
            .collect();
        if self.energy(&wb) <= self.r {
            return Ok(LocalSup {
                value: ball_value,
                upper: ball_value,
                witness: self.to_blocks(&wb),
                active: ActiveSet::Ball,
                iterations: 0,
            });
        }
        let mut upper = ball_value;
        let mut candidates = vec![self.feasible(&wb)];
        let ellipsoid_bounded = self.v.iter().zip(&self.lam).all(|(vj, lj)| *vj == 0.0 || *lj > 0.0);
        if ellipsoid_bounded {
            let s: f64 = self.v.iter().zip(&self.lam).filter(|(_, l)| **l > 0.0).map(|(vj, lj)| vj * vj / lj).sum();
            let ell_value = (self.r * s).sqrt();
            let we: Vec<f64> = self
                .v
                .iter()
                .zip(&self.lam)
                .map(|(vj, lj)| if *lj > 0.0 { (self.r / s).sqrt() * vj / lj } else { 0.0 })
                .collect();
            if self.ball_norm(&we, self.p.value()) <= self.d {
                return Ok(LocalSup {
                    value: ell_value,
                    upper: ell_value,
                    witness: self.to_blocks(&we),
                    active: ActiveSet::Ellipsoid,
                    iterations: 0,
                });
            }
            upper = upper.min(ell_value);
            candidates.push(self.feasible(&we));
        }
        let mut best = candidates
            .into_iter()
            .map(|w| (self.dot(&w), w))
            .fold((f64::NEG_INFINITY, Vec::new()), |acc, c| if c.0 > acc.0 { c } else { acc });
        let gap = |lo: f64, up: f64| (up - lo) / lo.abs().max(f64::MIN_POSITIVE);

        let mut w = best.1.clone();
        // A step comparable to |w| keeps each Dykstra run short; mild growth
        // speeds up the final approach without letting corrections blow up.
        let mut eta = 2.0 * norm2(&w).max(self.d * 1e-3) / vn;
        let eta_cap = eta * 1e6;
        let growth = 1.5;
        let itol = 1e-10;
        let mut pb = vec![0.0; n];
        let mut qe = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut buf = vec![0.0; n];
        let mut lp_state = LpState::default();
        for it in 1..=opts.max_iter {
            let z: Vec<f64> = w.iter().zip(&self.v).map(|(a, b)| a + eta * b).collect();
            for j in 0..n {
                x[j] = z[j] - pb[j] - qe[j];
            }
            let scale = norm2(&w);
            for _ in 0..20_000 {
                for j in 0..n {
                    buf[j] = x[j] + pb[j];
                }
                self.ball_project(&buf, &mut y, &mut lp_state);
                for j in 0..n {
                    pb[j] = buf[j] - y[j];
                    buf[j] = y[j] + qe[j];
                }
                let x_old = x.clone();
                self.ellipsoid_project(&buf, &mut x);
                // Stationary once both single-set iterates agree, which also
                // freezes the correction terms.
                let (mut dxy, mut dyx) = (0.0, 0.0);
                for j in 0..n {
                    qe[j] = buf[j] - x[j];
                    dxy += (x_old[j] - y[j]).powi(2);
                    dyx += (y[j] - x[j]).powi(2);
                }
                if dxy.max(dyx).sqrt() <= itol * scale {
                    break;
                }
            }
            let wf = self.feasible(&x);
            let val = self.dot(&wf);
            if val > best.0 {
                best = (val, wf);
            }
            upper = upper.min(self.certificate(&x));
            if gap(best.0, upper) <= opts.tol {
                return Ok(LocalSup {
                    value: best.0,
                    upper,
                    witness: self.to_blocks(&best.1),
                    active: ActiveSet::Both,
                    iterations: it,
                });
            }
            w.copy_from_slice(&x);
            if eta < eta_cap {
                let g = growth;
                eta *= g;
                for j in 0..n {
                    pb[j] *= g;
                    qe[j] *= g;
                }
            }
        }
        Err(Error::NonConvergence { iterations: opts.max_iter, gap: gap(best.0, upper) })
    }
}

/// Warm-start state for repeated `l_p` projections of nearby points.
#[derive(Clone, Debug, Default)]
pub(crate) struct LpState {
    rho: Vec<f64>,
    log_theta: Option<f64>,
}

/// Euclidean projection of a nonnegative vector `a` with `||a||_p > radius`
/// onto the `l_p` ball.
pub(crate) fn project_lp(a: &[f64], p: Exponent, radius: f64, state: &mut LpState) -> Vec<f64> {
    let pv = p.value();
    if p.is_infinite() {
        return a.iter().map(|&x| x.min(radius)).collect();
    }
    if pv == 2.0 {
        let f = radius / power_norm(a, 2.0);
        return a.iter().map(|&x| x * f).collect();
    }
    if pv == 1.0 {
        let mut s = a.to_vec();
        s.sort_by(|x, y| y.total_cmp(x));
        let mut cum = 0.0;
        let mut tau = 0.0;
        for (k, &x) in s.iter().enumerate() {
            cum += x;
            let t = (cum - radius) / (k + 1) as f64;
            if t < x {
                tau = t;
            } else {
                break;
            }
        }
        return a.iter().map(|&x| (x - tau).max(0.0)).collect();
    }
    // KKT: rho_m + theta rho_m^{p-1} = a_m, with theta > 0 chosen so that
    // F(u) = ln sum rho^p - p ln radius vanishes at u = ln theta. F decreases
    // in u; safeguarded Newton keeps a bracket.
    if state.rho.len() != a.len() {
        state.rho = vec![0.0; a.len()];
        state.log_theta = None;
    }
    let target = pv * radius.ln();
    let mut u = state
        .log_theta
        .unwrap_or_else(|| ((power_norm(a, pv) - radius).max(radius * 1e-12) / radius.powf(pv - 1.0)).ln());
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for _ in 0..200 {
        let theta = u.exp();
        let (mut sp, mut dsp) = (0.0, 0.0);
        for (rm, &am) in state.rho.iter_mut().zip(a) {
            let r = block_rho(am, theta, pv, *rm);
            *rm = r;
            if r > 0.0 {
                let rp1 = r.powf(pv - 1.0);
                sp += rp1 * r;
                // d rho / d theta = -rho^{p-1} / (1 + theta (p-1) rho^{p-2})
                dsp += pv * rp1 * (-rp1 / (1.0 + theta * (pv - 1.0) * rp1 / r));
            }
        }
        let f = sp.ln() - target;
        if f.abs() <= 1e-15 {
            break;
        }
        if f > 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let df = theta * dsp / sp;
        let mut nu = u - f / df;
        if !(nu > lo && nu < hi) || !nu.is_finite() {
            nu = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => u + 2.0,
                _ => u - 2.0,
            };
        }
        if (nu - u).abs() <= 1e-15 * u.abs().max(1.0) {
            u = nu;
            break;
        }
        u = nu;
    }
    state.log_theta = Some(u);
    let theta = u.exp();
    let guess = state.rho.clone();
    a.iter().zip(guess).map(|(&am, g)| block_rho(am, theta, pv, g)).collect()
}

/// The root of `rho + theta rho^{p-1} = a` in `[0, a]`, by safeguarded Newton.
fn block_rho(a: f64, theta: f64, p: f64, guess: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, a);
    let mut x = if guess > 0.0 && guess < a { guess } else { 0.5 * a };
    for _ in 0..100 {
        let xp = x.powf(p - 2.0);
        let g = x + theta * xp * x - a;
        if g == 0.0 {
            return x;
        }
        if g < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dg = 1.0 + theta * (p - 1.0) * xp;
        let mut nx = x - g / dg;
        if !(nx > lo && nx < hi) {
            nx = 0.5 * (lo + hi);
        }
        if (nx - x).abs() <= 1e-16 * x || hi - lo <= 1e-16 * hi {
            return nx;
        }
        x = nx;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class(p: f64, d: f64, m: usize) -> MklClass {
        MklClass::new(Exponent::new(p).unwrap(), d, m).unwrap()
    }

    #[test]
    fn ball_only_matches_dual_norm() {
        let v = BlockVector::new(vec![vec![0.3, -0.1], vec![0.2]]).unwrap();
        let c = class(1.5, 1.0, 2);
        let lam = vec![vec![1.0, 0.5], vec![0.8]];
        let s = local_sup_with(&v, &c, 1e6, &lam, SolverOptions::default()).unwrap();
        let exact = crate::norms::block_norm(&v, c.p_star());
        assert_eq!(s.active, ActiveSet::Ball);
        assert!((s.value - exact).abs() <= 1e-12 * exact);
    }

    #[test]
    fn ellipsoid_only_closed_form() {
        let v = BlockVector::new(vec![vec![0.3, -0.2, 0.1]]).unwrap();
        let lam = vec![vec![1.0, 0.25, 0.04]];
        let c = class(2.0, 1e6, 1);
        let r = 0.01;
        let s = local_sup_with(&v, &c, r, &lam, SolverOptions::default()).unwrap();
        let hand = (r * (0.09 / 1.0 + 0.04 / 0.25 + 0.01 / 0.04)).sqrt();
        assert_eq!(s.active, ActiveSet::Ellipsoid);
        assert!((s.value - hand).abs() <= 1e-12 * hand);
    }

    #[test]
    fn both_active_gap_closes() {
        let v = BlockVector::new(vec![vec![0.5, 0.4], vec![0.3, -0.6]]).unwrap();
        let lam = vec![vec![1.0, 0.1], vec![0.5, 0.05]];
        for p in [1.0, 1.3, 1.5, 2.0, 3.0] {
            let c = class(p, 1.0, 2);
            let s = local_sup_with(&v, &c, 0.05, &lam, SolverOptions::default()).unwrap();
            assert!(s.upper - s.value <= 1e-7 * s.value, "p = {p}: {s:?}");
            let w = &s.witness;
            assert!(crate::norms::block_norm(w, c.p()) <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn lp_projection_satisfies_kkt() {
        let a = [1.0, 0.5, 0.2, 0.0];
        for p in [1.0, 1.3, 1.5, 2.0, 4.0, f64::INFINITY] {
            let e = Exponent::new(p).unwrap();
            let rho = project_lp(&a, e, 0.6, &mut LpState::default());
            assert!((power_norm(&rho, p) - 0.6).abs() < 1e-10, "p = {p}: {rho:?}");
            assert!(rho.iter().zip(&a).all(|(r, x)| *r <= *x + 1e-15));
        }
    }
}
