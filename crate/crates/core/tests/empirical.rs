use lpmkl_core::bounds::{grc_empirical, lrc_upper_p12, lrc_upper_pge2};
use lpmkl_core::empirical::verify::{
    sign_sum_moment, verify_khintchine, verify_poisson_moment, verify_rosenthal_young, DiscreteFamily,
};
use lpmkl_core::empirical::{
    generate_sample, grc_empirical_mc, local_sup_with, lrc_empirical_mc, lrc_on_sample, rademacher_averages,
    run_suites, VerifyConfig,
};
use lpmkl_core::spectra::gram_spectrum;
use lpmkl_core::{
    block_norm, BlockVector, CoordinateLaw, Exponent, GeneratorSpec, JointSpectrum, KernelSpectrum, LocalQuery,
    McConfig, MklClass, SolverOptions, SpectrumSet,
};

fn cls(p: f64, d: f64, m: usize) -> MklClass {
    MklClass::new(Exponent::new(p).unwrap(), d, m).unwrap()
}

fn finite(lists: &[&[f64]]) -> SpectrumSet {
    SpectrumSet::new(lists.iter().map(|l| KernelSpectrum::finite_rank(l.to_vec()).unwrap()).collect()).unwrap()
}

#[test]
fn rank_one_rademacher_blocks_are_signs() {
    let gen = GeneratorSpec::new(finite(&[&[1.0], &[1.0]]), CoordinateLaw::RademacherScaled, 3).unwrap();
    for x in generate_sample(&gen, 500).unwrap() {
        assert!(x.blocks().iter().flatten().all(|&v| v == 1.0 || v == -1.0));
    }
    assert_eq!(gen.kernel_bound(), Some(1.0));
}

#[test]
fn generator_rejects_unsupported_settings() {
    let alg = SpectrumSet::new(vec![KernelSpectrum::algebraic(1.0, 2.0, None).unwrap()]).unwrap();
    let gen = GeneratorSpec::new(alg.clone(), CoordinateLaw::RademacherScaled, 0).unwrap();
    assert!(generate_sample(&gen, 3).is_err());
    assert_eq!(gen.kernel_bound(), None);
    assert!(generate_sample(&gen.with_j_max(50).unwrap(), 3).is_ok());
    let gauss = GeneratorSpec::new(finite(&[&[1.0]]), CoordinateLaw::Gaussian, 0).unwrap();
    assert!(generate_sample(&gauss, 3).is_err());
    let gauss = gauss.allow_unbounded();
    assert!(generate_sample(&gauss, 3).is_ok());
    assert_eq!(gauss.kernel_bound(), None);
    let json = r#"{"spectra": [{"kind": "finite_rank", "eigenvalues": [1.0]}], "law": "GAUSSIAN"}"#;
    assert!(serde_json::from_str::<GeneratorSpec>(json).is_err());
    let json = r#"{"spectra": [{"kind": "finite_rank", "eigenvalues": [1.0]}], "law": "GAUSSIAN", "unbounded": true}"#;
    let g: GeneratorSpec = serde_json::from_str(json).unwrap();
    let back: GeneratorSpec = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
    assert_eq!(g, back);
}

#[test]
fn blocks_are_uncorrelated_and_have_the_target_variance() {
    let spec = finite(&[&[1.0, 0.3], &[0.6]]);
    let n = 100_000;
    for law in [CoordinateLaw::RademacherScaled, CoordinateLaw::UniformScaled] {
        let gen = GeneratorSpec::new(spec.clone(), law, 17).unwrap();
        let data = generate_sample(&gen, n).unwrap();
        let coords: Vec<Vec<f64>> = data.iter().map(|x| x.blocks().iter().flatten().copied().collect()).collect();
        let var = [1.0, 0.3, 0.6];
        for a in 0..3 {
            for b in (a + 1)..3 {
                let c: f64 = coords.iter().map(|x| x[a] * x[b]).sum::<f64>() / n as f64;
                let corr = c / (var[a] * var[b] as f64).sqrt();
                assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "{law:?}: corr({a},{b}) = {corr}");
            }
            let mean_sq: f64 = coords.iter().map(|x| x[a] * x[a]).sum::<f64>() / n as f64;
            assert!((mean_sq / var[a] - 1.0).abs() < 0.02);
        }
    }
}

#[test]
fn uniform_law_trace_within_three_standard_errors() {
    let gen = GeneratorSpec::new(finite(&[&[1.0, 0.5, 0.25, 0.125]]), CoordinateLaw::UniformScaled, 8).unwrap();
    let n = 2000;
    let data = generate_sample(&gen, n).unwrap();
    let sq: Vec<f64> = data.iter().map(|x| x.block(0).iter().map(|v| v * v).sum()).collect();
    let mean = sq.iter().sum::<f64>() / n as f64;
    let se = (sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0) / n as f64).sqrt();
    assert!((mean - 1.875).abs() < 3.0 * se);
    assert!(sq.iter().all(|&v| v <= gen.kernel_bound().unwrap() + 1e-12));
}

#[test]
fn single_sample_has_no_spread() {
    let x = BlockVector::new(vec![vec![0.3, -1.2], vec![2.0]]).unwrap();
    let class = cls(1.5, 2.0, 2);
    let est = grc_empirical_mc(&[x.clone()], &class, &McConfig::new(1, 25, 4).unwrap()).unwrap();
    assert_eq!(est.std_error, 0.0);
    let want = 2.0 * block_norm(&x, class.p_star());
    assert!(est.values.iter().all(|v| (v - want).abs() < 1e-14 * want));
}

#[test]
fn global_estimate_below_the_trace_bound() {
    for seed in 0..12u64 {
        let m = 1 + (seed as usize % 5);
        let lists: Vec<Vec<f64>> = (0..m).map(|k| (1..=3).map(|j| 1.0 / (j * (k + 1)) as f64).collect()).collect();
        let spec =
            SpectrumSet::new(lists.into_iter().map(|l| KernelSpectrum::finite_rank(l).unwrap()).collect()).unwrap();
        let gen = GeneratorSpec::new(spec, CoordinateLaw::UniformScaled, seed).unwrap();
        let data = generate_sample(&gen, 60).unwrap();
        let class = cls(1.0 + (seed as f64) / 12.0, 1.5, m);
        let traces: Vec<f64> = (0..m).map(|k| gram_spectrum(&data, k).unwrap().trace).collect();
        let bound = grc_empirical(&class, &traces, 60, None).unwrap().value;
        let est = grc_empirical_mc(&data, &class, &McConfig::new(60, 100, seed).unwrap()).unwrap();
        assert!(est.mean <= bound * (1.0 + 1e-9), "seed {seed}: {} > {bound}", est.mean);
        let doubled: Vec<BlockVector> = data.iter().flat_map(|x| [x.clone(), x.clone()]).collect();
        let traces2: Vec<f64> = (0..m).map(|k| gram_spectrum(&doubled, k).unwrap().trace).collect();
        let bound2 = grc_empirical(&class, &traces2, 120, None).unwrap().value;
        assert!((bound2 * 2f64.sqrt() - bound).abs() < 1e-12 * bound);
        for (a, b) in traces.iter().zip(&traces2) {
            assert!((a - b).abs() < 1e-12 * a);
        }
    }
}

#[test]
fn large_radius_local_complexity_equals_the_global_one() {
    let spec = finite(&[&[1.0, 0.4], &[0.7, 0.2, 0.1]]);
    let gen = GeneratorSpec::new(spec, CoordinateLaw::RademacherScaled, 21).unwrap();
    let mc = McConfig::new(40, 30, 9).unwrap();
    let data = generate_sample(&gen, mc.n).unwrap();
    for p in [1.0, 1.5, 2.0, 3.0] {
        let class = cls(p, 1.3, 2);
        let g = grc_empirical_mc(&data, &class, &mc).unwrap();
        let l = lrc_on_sample(&data, &gen.variances().unwrap(), &class, 1e9, &mc).unwrap();
        for (a, b) in g.values.iter().zip(&l.values) {
            assert!((a - b).abs() <= 1e-7 * a, "p {p}: {a} vs {b}");
        }
        let full = lrc_empirical_mc(&gen, &class, 1e9, &mc).unwrap();
        assert_eq!(full.values, l.values);
    }
}

#[test]
fn local_sup_nondecreasing_in_radius_and_ball() {
    let spec = finite(&[&[1.0, 0.5], &[0.8, 0.3]]);
    let lam = spec.coordinates().unwrap();
    let gen = GeneratorSpec::new(spec, CoordinateLaw::UniformScaled, 2).unwrap();
    let data = generate_sample(&gen, 30).unwrap();
    let avgs = rademacher_averages(&data, &McConfig::new(30, 5, 1).unwrap()).unwrap();
    let opts = SolverOptions::default();
    for v in &avgs {
        for p in [1.0, 1.5, 2.0] {
            let mut last = 0.0;
            for k in 0..8 {
                let r = 1e-3 * 4f64.powi(k);
                let s = local_sup_with(v, &cls(p, 1.0, 2), r, &lam, opts).unwrap();
                assert!(s.value >= last * (1.0 - 1e-6));
                let bigger = local_sup_with(v, &cls(p, 1.5, 2), r, &lam, opts).unwrap();
                assert!(bigger.value >= s.value * (1.0 - 1e-6));
                let w = &s.witness;
                assert!(block_norm(w, Exponent::new(p).unwrap()) <= 1.0 * (1.0 + 1e-7));
                let energy: f64 =
                    w.blocks().iter().zip(&lam).flat_map(|(b, l)| b.iter().zip(l).map(|(x, y)| y * x * x)).sum();
                assert!(energy <= r * (1.0 + 1e-7));
                last = s.value;
            }
        }
    }
}

#[test]
fn local_estimate_below_the_upper_bounds() {
    let spec = finite(&[&[0.6, 0.3, 0.1], &[0.5, 0.25], &[0.9]]);
    let gen = GeneratorSpec::new(spec.clone(), CoordinateLaw::RademacherScaled, 5).unwrap();
    let b = gen.kernel_bound().unwrap();
    let mc = McConfig::new(100, 60, 3).unwrap();
    for p in [1.0, 1.5, 2.0, 3.0] {
        let class = cls(p, 1.0, 3);
        for r in [0.01, 0.1, 1.0] {
            let est = lrc_empirical_mc(&gen, &class, r, &mc).unwrap();
            let q = LocalQuery::new(class, r, mc.n, b).unwrap();
            let up = if p <= 2.0 {
                lrc_upper_p12(&q, &spec, None).unwrap().value
            } else {
                lrc_upper_pge2(&q, JointSpectrum::Union(&spec)).unwrap().value
            };
            assert!(est.mean <= up + 2.0 * est.std_error, "p {p}, r {r}: {} > {up}", est.mean);
        }
    }
}

#[test]
fn estimates_do_not_depend_on_the_thread_count() {
    let gen = GeneratorSpec::iid_blocks(
        KernelSpectrum::finite_rank(vec![1.0, 0.5, 0.2]).unwrap(),
        3,
        CoordinateLaw::UniformScaled,
        77,
    )
    .unwrap();
    let class = cls(1.3, 1.0, 3);
    let mc = McConfig::new(50, 24, 5).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let l = lrc_empirical_mc(&gen, &class, 0.05, &mc).unwrap();
            let data = generate_sample(&gen, mc.n).unwrap();
            let g = grc_empirical_mc(&data, &class, &mc).unwrap();
            (l, g)
        })
    };
    let (l1, g1) = run(1);
    for t in [2, 4] {
        let (l, g) = run(t);
        assert_eq!(l.mean.to_bits(), l1.mean.to_bits());
        assert_eq!(g.mean.to_bits(), g1.mean.to_bits());
        assert_eq!(l.values, l1.values);
    }
}

#[test]
fn khintchine_special_cases() {
    let v = vec![vec![0.3, -0.4]];
    for q in [1.0, 2.5, 4.0] {
        let m = sign_sum_moment(&v, q).unwrap();
        assert!((m - 0.5f64.powf(q)).abs() < 1e-15);
    }
    let vs = vec![vec![1.0, 0.0], vec![0.5, 2.0], vec![-1.0, 1.0]];
    let sq: f64 = vs.iter().flatten().map(|x| x * x).sum();
    assert!((sign_sum_moment(&vs, 2.0).unwrap() - sq).abs() < 1e-12);
    let q2 = verify_khintchine(10, 3, 2.0, 200, 1).unwrap();
    assert_eq!(q2.tight.violations, 0);
    let q4 = verify_khintchine(8, 3, 4.0, 1000, 2).unwrap();
    assert_eq!(q4.operative.violations, 0);
    assert!(verify_khintchine(13, 2, 2.0, 1, 0).is_err());
}

#[test]
fn rosenthal_cases() {
    let bern = verify_rosenthal_young(10, 1.0, 3.0, 500, DiscreteFamily::Bernoulli { prob: Some(0.5) }, 4).unwrap();
    assert_eq!(bern.violations, 0);
    let one = verify_rosenthal_young(10, 1.0, 1.0, 200, DiscreteFamily::Random { support: 3 }, 4).unwrap();
    assert_eq!(one.violations, 0);
    assert!(one.max_ratio < 0.2);
    let constant = verify_rosenthal_young(6, 1.0, 2.0, 20, DiscreteFamily::Random { support: 1 }, 4).unwrap();
    assert_eq!(constant.violations, 0);
    assert!(verify_rosenthal_young(10, 1.0, 2.0, 1, DiscreteFamily::Random { support: 5 }, 0).is_err());
}

#[test]
fn poisson_table() {
    let rows = verify_poisson_moment(10);
    assert_eq!(rows.len(), 10);
    assert_eq!(rows[0].moment, 1.0);
    assert!((rows[1].moment - 2.0).abs() < 1e-13);
    assert!((rows[9].moment - 115_975.0).abs() < 1e-7);
    assert!(rows.iter().all(|r| r.holds && r.remainder < 1e-12));
}

#[test]
fn default_suite_passes() {
    let report = run_suites(&VerifyConfig::default());
    assert!(report.all_passed);
    for s in report.suites.iter().filter(|s| s.hard) {
        assert_eq!(s.violations, 0, "{}", s.name);
    }
    let soft: Vec<_> = report.suites.iter().filter(|s| !s.hard).collect();
    assert!(!soft.is_empty());
}
