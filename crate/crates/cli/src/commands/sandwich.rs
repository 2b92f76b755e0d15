use lpmkl_core::bounds::{lrc_lower, lrc_upper_p12, lrc_upper_pge2};
use lpmkl_core::empirical::{generate_sample, lrc_on_averages, rademacher_averages};
use lpmkl_core::{
    CoordinateLaw, Error, Exponent, GeneratorSpec, JointSpectrum, KernelSpectrum, LocalQuery, McConfig, MklClass,
    SolverOptions,
};
use serde::{Deserialize, Serialize};

use super::{check_grid, one};
use crate::error::{field, CliError};
use crate::experiment::{Experiment, Report};
use crate::output::{num, Table};

/// Lower bound, Monte Carlo estimate and upper bound of the local complexity
/// on one generated sample, with i.i.d. blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SandwichConfig {
    pub spectrum: KernelSpectrum,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(default)]
    pub law: CoordinateLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_max: Option<u64>,
    pub p: Exponent,
    #[serde(rename = "D")]
    pub radius: f64,
    pub r_grid: Vec<f64>,
    pub n: usize,
    pub draws: usize,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default = "one")]
    pub c_abs: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SandwichConfig {
    fn default() -> Self {
        SandwichConfig {
            spectrum: KernelSpectrum::finite_rank(vec![1.0, 0.5, 0.25, 0.125]).expect("valid"),
            m: 4,
            law: CoordinateLaw::RademacherScaled,
            j_max: None,
            p: Exponent::new(1.5).expect("valid"),
            radius: 1.0,
            r_grid: vec![1e-3, 1e-2, 1e-1, 1.0, 10.0],
            n: 200,
            draws: 200,
            solver: SolverOptions::default(),
            c_abs: 1.0,
            seed: 0,
        }
    }
}

impl SandwichConfig {
    fn generator(&self) -> Result<GeneratorSpec, CliError> {
        let mut g = GeneratorSpec::iid_blocks(self.spectrum.clone(), self.m, self.law, self.seed)
            .map_err(|e| field("spectrum", e))?;
        if let Some(j) = self.j_max {
            g = g.with_j_max(j).map_err(|e| field("j_max", e))?;
        }
        g.variances().map_err(|e| field("spectrum", e))?;
        Ok(g)
    }
}

fn status(e: &Error) -> Option<&'static str> {
    match e {
        Error::NonConvergence { .. } => Some("nonconvergence"),
        Error::Draw { source, .. } => status(source),
        _ => None,
    }
}

impl Experiment for SandwichConfig {
    const NAME: &'static str = "sandwich";

    fn validate(&self) -> Result<(), CliError> {
        if self.m == 0 {
            return Err(field("M", "must be at least 1"));
        }
        MklClass::new(self.p, self.radius, self.m).map_err(|e| field("D", e))?;
        if self.law.sup_square().is_none() {
            return Err(field("law", "the bounds need a bounded law"));
        }
        check_grid("r_grid", &self.r_grid, 0.0)?;
        McConfig { n: self.n, draws: self.draws, seed: self.seed, solver: self.solver }
            .check()
            .map_err(|e| field("n", e))?;
        self.solver.check().map_err(|e| field("solver", e))?;
        if !(self.c_abs > 0.0) {
            return Err(field("c_abs", "must be positive"));
        }
        self.generator()?;
        Ok(())
    }

    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    fn run(&self) -> Result<Report, CliError> {
        let gen = self.generator()?;
        let class = MklClass::new(self.p, self.radius, self.m)?;
        let spectra = gen.generated_spectra()?;
        let lambda = gen.variances()?;
        let b = gen.kernel_bound().expect("bounded law");
        let mc = McConfig { n: self.n, draws: self.draws, seed: self.seed, solver: self.solver };
        // One sample and one set of sign vectors shared by every radius.
        let data = generate_sample(&gen, self.n)?;
        let averages = rademacher_averages(&data, &mc)?;

        let mut table = Table::new(&[
            "r",
            "lower",
            "mc_estimate",
            "mc_stderr",
            "upper",
            "lower_status",
            "solver_status",
            "ordered",
        ]);
        let mut kappa1 = f64::INFINITY;
        let mut all_ordered = true;
        let mut violations = Vec::new();
        for &r in &self.r_grid {
            let q = LocalQuery::new(class, r, self.n, b)?;
            let upper = if self.p.value() <= 2.0 {
                lrc_upper_p12(&q, &spectra, None)?
            } else {
                lrc_upper_pge2(&q, JointSpectrum::Union(&spectra))?
            };
            let (lower, lower_status) = match lrc_lower(&q, spectra.kernel(0), self.c_abs) {
                Ok(rep) => (Some(rep.value), "ok"),
                Err(Error::LowerBoundPrecondition(_)) => (None, "precondition"),
                Err(e) => return Err(e.into()),
            };
            let (est, solver_status) = match lrc_on_averages(&averages, &lambda, &class, r, self.solver) {
                Ok(e) => (Some(e), "ok"),
                Err(e) => match status(&e) {
                    Some(s) => (None, s),
                    None => return Err(e.into()),
                },
            };
            let (mean, se) = est.as_ref().map_or((f64::NAN, f64::NAN), |e| (e.mean, e.std_error));
            let below_upper = est.is_some() && mean <= upper.value + 2.0 * se;
            let above_lower = lower.is_none_or(|l| mean >= l);
            let ordered = below_upper && above_lower;
            if est.is_some() && !below_upper {
                violations.push(r);
            }
            if let Some(l) = lower {
                if est.is_some() && l > 0.0 {
                    kappa1 = kappa1.min(mean / l);
                }
            }
            all_ordered &= ordered;
            table.push(vec![
                num(r),
                num(lower.unwrap_or(f64::NAN)),
                num(mean),
                num(se),
                num(upper.value),
                lower_status.into(),
                solver_status.into(),
                ordered.to_string(),
            ]);
        }
        let failure = (!violations.is_empty()).then(|| {
            format!("Monte Carlo estimate exceeds the upper bound by more than 2 standard errors at r = {violations:?}")
        });
        Ok(Report {
            tables: vec![(Self::NAME.into(), table)],
            summary: serde_json::json!({
                "kappa1": kappa1.is_finite().then_some(kappa1),
                "all_ordered": all_ordered,
                "n": self.n,
                "draws": self.draws,
                "B": b,
            }),
            failure,
        })
    }
}
