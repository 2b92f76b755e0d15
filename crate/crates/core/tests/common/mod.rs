//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use lpmkl_core::norms::{block_norm, BlockVector, Exponent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller, kept local so the oracle shares no sampling code with the library.
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// A small constrained-supremum instance.
#[derive(Clone, Debug)]
pub struct Instance {
    pub v: Vec<Vec<f64>>,
    pub lam: Vec<Vec<f64>>,
    pub p: f64,
    pub d: f64,
    pub r: f64,
}

impl Instance {
    fn ball(&self, x: &[Vec<f64>]) -> f64 {
        let a: Vec<f64> = x.iter().map(|b| b.iter().map(|t| t * t).sum::<f64>().sqrt()).collect();
        if self.p.is_infinite() {
            a.iter().copied().fold(0.0, f64::max)
        } else {
            a.iter().map(|t| t.powf(self.p)).sum::<f64>().powf(1.0 / self.p)
        }
    }

    fn energy(&self, x: &[Vec<f64>]) -> f64 {
        x.iter().zip(&self.lam).flat_map(|(b, l)| b.iter().zip(l).map(|(t, lj)| lj * t * t)).sum()
    }

    /// Objective at the boundary point along direction `x`.
    pub fn radial_value(&self, x: &[Vec<f64>]) -> f64 {
        let dot: f64 = x.iter().zip(&self.v).flat_map(|(b, v)| b.iter().zip(v).map(|(s, t)| s * t)).sum();
        if dot <= 0.0 {
            return 0.0;
        }
        let bn = self.ball(x);
        let en = self.energy(x);
        let mut s = self.d / bn;
        if en > 0.0 {
            s = s.min((self.r / en).sqrt());
        }
        dot * s
    }
}

/// Dense random search over directions followed by a (1+1) evolution-strategy
/// polish of the best few. Every candidate is scaled onto the boundary of the
/// feasible set, so each evaluated value is attained.
pub fn brute_force(inst: &Instance, candidates: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let shape: Vec<usize> = inst.v.iter().map(Vec::len).collect();
    let draw = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        // Occasionally zero whole blocks to reach the corners of the p=1 ball.
        let keep: Vec<bool> = shape.iter().map(|_| rng.random::<f64>() > 0.15).collect();
        shape.iter().zip(&keep).map(|(&k, &on)| (0..k).map(|_| if on { gauss(rng) } else { 0.0 }).collect()).collect()
    };
    // Keep the best candidates per block-support pattern, and polish inside
    // that pattern, so faces where whole blocks vanish are searched too.
    let mut top: std::collections::BTreeMap<u64, Vec<(f64, Vec<Vec<f64>>)>> = Default::default();
    for _ in 0..candidates {
        let x = draw(&mut rng);
        let f = inst.radial_value(&x);
        let mask = pattern(&x);
        let list = top.entry(mask).or_default();
        if list.len() < 3 || f > list[list.len() - 1].0 {
            list.push((f, x));
            list.sort_by(|a, b| b.0.total_cmp(&a.0));
            list.truncate(3);
        }
    }
    let mut top: Vec<(f64, Vec<Vec<f64>>)> = top.into_values().flatten().collect();
    // Seed the polish with the unconstrained-ball and unconstrained-ellipsoid maximizers too.
    top.push((0.0, inst.v.clone()));
    let ell: Vec<Vec<f64>> = inst
        .v
        .iter()
        .zip(&inst.lam)
        .map(|(b, l)| b.iter().zip(l).map(|(t, lj)| t / lj.max(1e-300)).collect())
        .collect();
    top.push((0.0, ell));
    let mut best = 0.0f64;
    for (_, start) in top {
        let mut x = start;
        let mut fx = inst.radial_value(&x);
        let norm = x.iter().flatten().map(|t| t * t).sum::<f64>().sqrt().max(1e-300);
        let mut sigma = 0.1 * norm;
        let mut evals = 0;
        let mut restarts = 0;
        while evals < 400_000 {
            if sigma < 1e-14 * norm {
                // The ridge where both constraints bind stalls a single run; restart wide.
                restarts += 1;
                if restarts > 12 {
                    break;
                }
                sigma = 1e-2 * norm;
            }
            let y: Vec<Vec<f64>> = x
                .iter()
                .map(|b| {
                    let on = b.iter().any(|t| *t != 0.0);
                    b.iter().map(|t| if on { t + sigma * gauss(&mut rng) } else { 0.0 }).collect()
                })
                .collect();
            let fy = inst.radial_value(&y);
            evals += 1;
            if fy > fx {
                x = y;
                fx = fy;
                sigma *= 1.5;
            } else {
                sigma *= 0.93;
            }
        }
        best = best.max(fx);
    }
    best
}

fn pattern(x: &[Vec<f64>]) -> u64 {
    x.iter().enumerate().filter(|(_, b)| b.iter().any(|t| *t != 0.0)).map(|(m, _)| 1u64 << m).sum()
}

pub fn block(v: &[Vec<f64>]) -> BlockVector {
    BlockVector::new(v.to_vec()).unwrap()
}

pub fn exp(p: f64) -> Exponent {
    Exponent::new(p).unwrap()
}

pub fn ball_value(inst: &Instance) -> f64 {
    inst.d * block_norm(&block(&inst.v), exp(inst.p).conjugate())
}

/// A random instance of total dimension at most 6. `r` is drawn log-uniformly
/// around the radius at which the ball-only maximizer leaves the ellipsoid, so
/// both single-constraint and two-constraint regimes occur.
pub fn random_instance(rng: &mut ChaCha8Rng, p: f64) -> Instance {
    let m = rng.random_range(1..=3usize);
    let mut dims: Vec<usize> = (0..m).map(|_| rng.random_range(1..=3usize)).collect();
    while dims.iter().sum::<usize>() > 6 {
        let i = dims.iter().position(|&k| k > 1).unwrap();
        dims[i] -= 1;
    }
    let v: Vec<Vec<f64>> = dims.iter().map(|&k| (0..k).map(|_| gauss(rng)).collect()).collect();
    let lam: Vec<Vec<f64>> = dims
        .iter()
        .map(|&k| {
            let mut l: Vec<f64> = (0..k).map(|_| (-4.0 * rng.random::<f64>()).exp()).collect();
            l.sort_by(|a, b| b.total_cmp(a));
            l
        })
        .collect();
    let d = (2.0 * rng.random::<f64>() - 1.0).exp();
    let w = lpmkl_core::norms::dual_witness(&block(&v), exp(p));
    let e: f64 =
        w.blocks().iter().zip(&lam).flat_map(|(b, l)| b.iter().zip(l).map(|(t, lj)| lj * t * t)).sum::<f64>() * d * d;
    let r = e * (10f64).powf(-1.0 + 1.3 * rng.random::<f64>());
    Instance { v, lam, p, d, r }
}

/// The dual side of the same supremum:
/// `min_u D ||v - u||_{2,p*} + sqrt(r) ||Lambda^{-1/2} u||`, an upper bound for
/// every `u`, minimized by random search plus the same polish. Needs
/// `lambda > 0`.
pub fn dual_brute_force(inst: &Instance, candidates: usize, seed: u64) -> f64 {
    let q = exp(inst.p).star();
    let g = |u: &[Vec<f64>]| -> f64 {
        let a: Vec<f64> = u
            .iter()
            .zip(&inst.v)
            .map(|(b, v)| b.iter().zip(v).map(|(s, t)| (t - s) * (t - s)).sum::<f64>().sqrt())
            .collect();
        let dn = if q.is_infinite() {
            a.iter().copied().fold(0.0, f64::max)
        } else {
            a.iter().map(|t| t.powf(q)).sum::<f64>().powf(1.0 / q)
        };
        let e: f64 = u.iter().zip(&inst.lam).flat_map(|(b, l)| b.iter().zip(l).map(|(s, lj)| s * s / lj)).sum();
        inst.d * dn + inst.r.sqrt() * e.sqrt()
    };
    let mut rng = rng(seed ^ 0x5eed);
    let mut starts: Vec<Vec<Vec<f64>>> = (0..=10).map(|k| scale(&inst.v, k as f64 / 10.0)).collect();
    let mut best_start = (f64::INFINITY, inst.v.clone());
    for _ in 0..candidates {
        let t: f64 = rng.random();
        let u: Vec<Vec<f64>> =
            inst.v.iter().map(|b| b.iter().map(|x| t * x + 0.3 * gauss(&mut rng) * x.abs()).collect()).collect();
        let f = g(&u);
        if f < best_start.0 {
            best_start = (f, u);
        }
    }
    starts.push(best_start.1);
    let norm = inst.v.iter().flatten().map(|t| t * t).sum::<f64>().sqrt();
    let mut best = f64::INFINITY;
    for start in starts {
        let mut x = start;
        let mut fx = g(&x);
        let mut sigma = 0.1 * norm;
        let mut evals = 0;
        let mut restarts = 0;
        while evals < 200_000 {
            if sigma < 1e-14 * norm {
                restarts += 1;
                if restarts > 6 {
                    break;
                }
                sigma = 1e-2 * norm;
            }
            let y: Vec<Vec<f64>> = x.iter().map(|b| b.iter().map(|t| t + sigma * gauss(&mut rng)).collect()).collect();
            let fy = g(&y);
            evals += 1;
            if fy < fx {
                x = y;
                fx = fy;
                sigma *= 1.5;
            } else {
                sigma *= 0.93;
            }
        }
        best = best.min(fx);
    }
    best
}

fn scale(v: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    v.iter().map(|b| b.iter().map(|x| t * x).collect()).collect()
}

/// For `p = 1` the dual reduces to one scalar `t = max_m ||v_m - u_m||`:
/// `min_t D t + sqrt(r) (sum_m phi_m(t))^{1/2}` with
/// `phi_m(t) = min { u' Lambda^{-1} u : ||u - v_m|| <= t }`, solved per block by
/// bisection on the trust-region multiplier. The outer scan is a dense grid
/// refined around its best point.
pub fn dual_p1_scan(inst: &Instance) -> f64 {
    let phi = |m: usize, t: f64| -> f64 {
        let v = &inst.v[m];
        let l = &inst.lam[m];
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if t >= vn {
            return 0.0;
        }
        let dist = |k: f64| v.iter().zip(l).map(|(x, lj)| (x / (k * lj + 1.0)).powi(2)).sum::<f64>().sqrt();
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while dist(hi) > t {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if dist(mid) > t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let k = hi;
        v.iter()
            .zip(l)
            .map(|(x, lj)| {
                let u = k * lj * x / (k * lj + 1.0);
                u * u / lj
            })
            .sum()
    };
    let g = |t: f64| inst.d * t + inst.r.sqrt() * (0..inst.v.len()).map(|m| phi(m, t)).sum::<f64>().sqrt();
    let tmax = inst.v.iter().map(|b| b.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max);
    let (mut a, mut b) = (0.0, tmax);
    let mut best = g(tmax);
    for _ in 0..8 {
        let k = 200;
        let mut arg = a;
        for i in 0..=k {
            let t = a + (b - a) * i as f64 / k as f64;
            let f = g(t);
            if f < best {
                best = f;
                arg = t;
            }
        }
        let h = (b - a) / k as f64;
        a = (arg - 2.0 * h).max(0.0);
        b = (arg + 2.0 * h).min(tmax);
    }
    best
}
