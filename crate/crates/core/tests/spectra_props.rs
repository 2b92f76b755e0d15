use std::f64::consts::PI;

use lpmkl_core::empirical::generate_sample;
use lpmkl_core::spectra::{gram_spectrum, sample_covariance_spectrum};
use lpmkl_core::{CoordinateLaw, GeneratorSpec, KernelSpectrum, SpectrumSet};
use proptest::prelude::*;

fn nonincreasing() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..2.0, 1..30).prop_map(|mut v| {
        v.sort_by(|a, b| b.total_cmp(a));
        v
    })
}

fn scan_min(spec: &KernelSpectrum, r: f64, c: f64, h_max: u64) -> f64 {
    (0..=h_max).map(|h| h as f64 * r + c * spec.tail_sum(h)).fold(f64::INFINITY, f64::min)
}

#[test]
fn algebraic_tail_and_bound() {
    let s = KernelSpectrum::algebraic(1.0, 2.0, None).unwrap();
    assert!((s.tail_sum(1) - (PI * PI / 6.0 - 1.0)).abs() < 1e-12);
    assert!((s.tail_sum(1) - 0.644934).abs() < 1e-6);
    assert_eq!(s.tail_bound(1), Some(1.0));
}

#[test]
fn finite_lists_have_exact_tails() {
    assert_eq!(KernelSpectrum::finite_rank(vec![1.0, 0.5, 0.25]).unwrap().tail_sum(3), 0.0);
    let e = KernelSpectrum::explicit(vec![0.5, 0.3, 0.2]).unwrap();
    assert!((e.tail_sum(1) - 0.5).abs() < 1e-15);
}

#[test]
fn min_sum_on_a_long_listed_sequence() {
    let j = 1_000_000u64;
    let list: Vec<f64> = (1..=j).map(|k| 1.0 / (k as f64 * k as f64)).collect();
    let direct: f64 = list.iter().map(|&l| l.min(0.25)).sum();
    let e = KernelSpectrum::explicit(list).unwrap();
    let v = e.truncated_min_sum(0.25, 1.0);
    assert!((v - direct).abs() < 1e-12 * direct);
    // 0.25 + 0.25 + (pi^2/6 - 1 - 1/4), less the part past 10^6.
    assert!((v - 0.894934).abs() < 2e-6);
}

#[test]
fn algebraic_min_sum_matches_direct_summation() {
    let s = KernelSpectrum::algebraic(1.5, 2.5, None).unwrap();
    for &(r, c) in &[(0.3, 1.0), (1e-3, 2.0), (5.0, 0.1), (1e-6, 1e3)] {
        let direct: f64 =
            (1..=2_000_000u64).map(|j| (c * s.eigenvalue(j)).min(r)).sum::<f64>() + c * s.tail_sum(2_000_000);
        assert!((s.truncated_min_sum(r, c) - direct).abs() < 1e-10 * direct, "r={r}, c={c}");
    }
}

proptest! {
    #[test]
    fn min_sum_is_the_minimum_over_truncation_levels(v in nonincreasing(), r in 0.0f64..1.0, c in 0.0f64..3.0) {
        let s = KernelSpectrum::explicit(v.clone()).unwrap();
        let got = s.truncated_min_sum(r, c);
        let direct: f64 = v.iter().map(|&l| (c * l).min(r)).sum();
        let scan = scan_min(&s, r, c, v.len() as u64);
        prop_assert!((got - direct).abs() <= 1e-12 * (1.0 + direct));
        prop_assert!((got - scan).abs() <= 1e-12 * (1.0 + scan));
    }

    #[test]
    fn min_sum_is_monotone(v in nonincreasing(), r in 0.0f64..1.0, c in 0.0f64..3.0, dr in 0.0f64..1.0, dc in 0.0f64..1.0) {
        let s = KernelSpectrum::explicit(v).unwrap();
        let base = s.truncated_min_sum(r, c);
        prop_assert!(s.truncated_min_sum(r + dr, c) >= base * (1.0 - 1e-12));
        prop_assert!(s.truncated_min_sum(r, c + dc) >= base * (1.0 - 1e-12));
    }

    #[test]
    fn algebraic_tail_below_its_bound(d in 0.1f64..5.0, alpha in 1.05f64..6.0, h in 1u64..100_000) {
        let s = KernelSpectrum::algebraic(d, alpha, None).unwrap();
        let bound = s.tail_bound(h).unwrap();
        prop_assert!(s.tail_sum(h) <= bound * (1.0 + 1e-12));
        prop_assert!(s.tail_sum(h + 1) <= s.tail_sum(h));
    }

    #[test]
    fn saturated_min_sum_is_the_scaled_trace(d in 0.1f64..5.0, alpha in 1.2f64..5.0, c in 0.1f64..3.0) {
        let s = KernelSpectrum::algebraic(d, alpha, None).unwrap();
        let v = s.truncated_min_sum(c * d * 1.5, c);
        prop_assert!((v - c * s.trace()).abs() <= 1e-10 * c * s.trace());
        prop_assert_eq!(s.truncated_min_sum(0.0, c), 0.0);
    }
}

#[test]
fn gram_trace_matches_population_trace() {
    let spec = SpectrumSet::new(vec![KernelSpectrum::algebraic(1.0, 2.0, None).unwrap()]).unwrap();
    let gen = GeneratorSpec::new(spec, CoordinateLaw::UniformScaled, 11).unwrap().with_j_max(4000).unwrap();
    let n = 50;
    let data = generate_sample(&gen, n).unwrap();
    let norms: Vec<f64> = data.iter().map(|x| x.block(0).iter().map(|a| a * a).sum()).collect();
    let mean = norms.iter().sum::<f64>() / n as f64;
    let sd = (norms.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    let se = sd / (n as f64).sqrt();
    let g = gram_spectrum(&data, 0).unwrap();
    assert!((g.trace - mean).abs() < 1e-12 * mean);
    let pop = gen.generated_spectra().unwrap().kernel(0).trace();
    assert!((pop - PI * PI / 6.0).abs() < 3e-4);
    assert!((g.trace - pop).abs() < 3.0 * se, "trace {} vs {pop} (se {se})", g.trace);
    assert!(g.eigenvalues.iter().all(|&e| e >= 0.0));
    let ev_sum: f64 = g.eigenvalues.iter().sum();
    assert!((ev_sum - g.trace).abs() < 1e-10 * g.trace);
}

#[test]
fn gram_rank_is_capped_by_sample_size_and_rank() {
    let spec = SpectrumSet::new(vec![
        KernelSpectrum::finite_rank(vec![1.0, 0.5, 0.25]).unwrap(),
        KernelSpectrum::finite_rank(vec![2.0]).unwrap(),
    ])
    .unwrap();
    let gen = GeneratorSpec::new(spec, CoordinateLaw::UniformScaled, 5).unwrap();
    for n in [2usize, 3, 10, 40] {
        let data = generate_sample(&gen, n).unwrap();
        for (m, rank) in [(0usize, 3usize), (1, 1)] {
            let g = gram_spectrum(&data, m).unwrap();
            assert_eq!(g.eigenvalues.len(), n);
            let top = g.eigenvalues[0];
            let nonzero = g.eigenvalues.iter().filter(|&&e| e > 1e-10 * top).count();
            assert!(nonzero <= n.min(rank), "n={n}, m={m}: {nonzero} nonzero");
        }
    }
}

#[test]
fn centered_covariance_eigenvalues_are_dominated() {
    let spec = SpectrumSet::new(vec![
        KernelSpectrum::explicit(vec![1.0, 0.6, 0.3, 0.1]).unwrap(),
        KernelSpectrum::algebraic(1.0, 2.0, Some(6)).unwrap(),
    ])
    .unwrap();
    for seed in 0..5 {
        let gen = GeneratorSpec::new(spec.clone(), CoordinateLaw::RademacherScaled, seed).unwrap();
        let data = generate_sample(&gen, 30).unwrap();
        for m in 0..2 {
            let c = sample_covariance_spectrum(&data, m, true).unwrap();
            let u = sample_covariance_spectrum(&data, m, false).unwrap();
            for (a, b) in c.iter().zip(&u) {
                assert!(*a <= b + 1e-9, "seed {seed}, block {m}: {a} > {b}");
            }
        }
    }
}
