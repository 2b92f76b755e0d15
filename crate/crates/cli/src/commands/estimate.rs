use lpmkl_core::empirical::{generate_sample, lrc_on_averages, rademacher_averages};
use lpmkl_core::{
    block_norm, CoordinateLaw, Exponent, GeneratorSpec, KernelSpectrum, McConfig, McEstimate, MklClass, SolverOptions,
    SpectrumSet,
};
use serde::{Deserialize, Serialize};

use super::check_grid;
use crate::error::{field, CliError};
use crate::experiment::{Experiment, Report};
use crate::output::{num, Table};

/// Monte Carlo estimates of the global and local complexities on one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    /// The generator draws the sample from its own `seed`.
    pub generator: GeneratorSpec,
    pub class: MklClass,
    pub n: usize,
    pub draws: usize,
    #[serde(default)]
    pub solver: SolverOptions,
    /// Radii of the local estimates; may be empty.
    #[serde(default)]
    pub r_grid: Vec<f64>,
    /// Seed of the sign vectors.
    #[serde(default)]
    pub seed: u64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        let m = 4;
        let spec = SpectrumSet::identical(KernelSpectrum::algebraic(1.0, 2.0, None).expect("valid"), m).expect("valid");
        EstimateConfig {
            generator: GeneratorSpec::new(spec, CoordinateLaw::RademacherScaled, 0)
                .and_then(|g| g.with_j_max(64))
                .expect("valid"),
            class: MklClass::new(Exponent::new(1.5).expect("valid"), 1.0, m).expect("valid"),
            n: 200,
            draws: 200,
            solver: SolverOptions::default(),
            r_grid: vec![1e-2, 1e-1, 1.0],
            seed: 0,
        }
    }
}

impl Experiment for EstimateConfig {
    const NAME: &'static str = "estimate";

    fn validate(&self) -> Result<(), CliError> {
        let m = self.class.kernels();
        if self.generator.kernels() != m {
            return Err(field(
                "generator.spectra",
                format!("expected M = {m} spectra, got {}", self.generator.kernels()),
            ));
        }
        self.generator.variances().map_err(|e| field("generator", e))?;
        McConfig { n: self.n, draws: self.draws, seed: self.seed, solver: self.solver }
            .check()
            .map_err(|e| field("n", e))?;
        self.solver.check().map_err(|e| field("solver", e))?;
        if !self.r_grid.is_empty() {
            check_grid("r_grid", &self.r_grid, 0.0)?;
        }
        Ok(())
    }

    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.generator = self.generator.clone().with_seed(seed);
    }

    fn run(&self) -> Result<Report, CliError> {
        let mc = McConfig { n: self.n, draws: self.draws, seed: self.seed, solver: self.solver };
        let data = generate_sample(&self.generator, self.n)?;
        let lambda = self.generator.variances()?;
        let averages = rademacher_averages(&data, &mc)?;
        let d = self.class.radius();
        let q = self.class.p_star();

        // The global row is the local one at r = inf.
        let mut rows: Vec<(&'static str, Option<f64>, McEstimate)> = Vec::new();
        let grc = McEstimate::from_values(averages.iter().map(|v| d * block_norm(v, q)).collect());
        rows.push(("GRC", None, grc));
        for &r in &self.r_grid {
            rows.push(("LRC", Some(r), lrc_on_averages(&averages, &lambda, &self.class, r, self.solver)?));
        }

        let mut summary = Table::new(&["kind", "r", "mean", "std_error"]);
        let mut draws = Table::new(&["kind", "r", "draw", "value"]);
        let mut json_rows = Vec::new();
        for (kind, radius, est) in &rows {
            let r = radius.map_or_else(|| "inf".to_string(), num);
            summary.push(vec![kind.to_string(), r.clone(), num(est.mean), num(est.std_error)]);
            for (s, v) in est.values.iter().enumerate() {
                draws.push(vec![kind.to_string(), r.clone(), s.to_string(), num(*v)]);
            }
            json_rows.push(serde_json::json!({
                "kind": kind,
                "r": radius,
                "mean": est.mean,
                "std_error": est.std_error,
            }));
        }
        Ok(Report {
            tables: vec![(Self::NAME.into(), summary), ("estimate_draws".into(), draws)],
            summary: serde_json::json!({ "n": self.n, "draws": self.draws, "rows": json_rows }),
            failure: None,
        })
    }
}
