use lpmkl_core::excess::{
    excess_from_fixed_point, excess_risk_bound_at, excess_risk_bound_with, fixed_point_bound, loglog_slope,
};
use lpmkl_core::{DecayFactor, ExcessReport, Exponent, KernelSpectrum, MklClass, RateSpec, RiskParams, SpectrumSet};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{field, CliError};
use crate::experiment::{Experiment, Report};
use crate::output::{exponent, joined, num, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcessConfig {
    pub class: MklClass,
    pub spectra: SpectrumSet,
    pub risk: RiskParams,
    pub n_grid: Vec<usize>,
    /// Decay parameters for the rate bound; read off the spectra when they
    /// are all algebraic, otherwise the rate columns are left empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateSpec>,
    #[serde(default)]
    pub decay_factor: DecayFactor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Exponent>,
}

impl Default for ExcessConfig {
    fn default() -> Self {
        let m = 4;
        ExcessConfig {
            class: MklClass::new(Exponent::new(1.5).expect("valid"), 1.0, m).expect("valid"),
            spectra: SpectrumSet::identical(KernelSpectrum::algebraic(1.0, 2.0, None).expect("valid"), m)
                .expect("valid"),
            risk: RiskParams::unit(1000).expect("valid"),
            n_grid: (3..=7).map(|k| 10usize.pow(k)).collect(),
            rate: None,
            decay_factor: DecayFactor::default(),
            t: None,
        }
    }
}

struct Row {
    n: usize,
    r_star: f64,
    quadratic_root: f64,
    excess: f64,
    h_used: Vec<u64>,
    t_used: Exponent,
    rate: Option<ExcessReport>,
}

impl ExcessConfig {
    fn rate(&self) -> Option<RateSpec> {
        self.rate.clone().or_else(|| RateSpec::from_spectra(&self.spectra).ok())
    }

    fn evaluate(&self, n: usize, rate: Option<&RateSpec>) -> Result<Row, CliError> {
        let rp = self.risk.with_n(n)?;
        let fp = fixed_point_bound(&self.class, &self.spectra, &rp, None, self.t)?;
        let rate = match rate {
            None => None,
            Some(rs) => Some(match self.t {
                Some(t) => excess_risk_bound_at(&self.class, rs, &rp, self.decay_factor, t)?,
                None => excess_risk_bound_with(&self.class, rs, &rp, self.decay_factor)?,
            }),
        };
        Ok(Row {
            n,
            r_star: fp.r_star,
            quadratic_root: fp.quadratic_root,
            excess: excess_from_fixed_point(fp.r_star, &rp),
            h_used: fp.h_used,
            t_used: fp.t_used,
            rate,
        })
    }
}

impl Experiment for ExcessConfig {
    const NAME: &'static str = "excess";

    fn validate(&self) -> Result<(), CliError> {
        let m = self.class.kernels();
        if self.spectra.len() != m {
            return Err(field("spectra", format!("expected M = {m} spectra, got {}", self.spectra.len())));
        }
        if self.class.p().value() > 2.0 {
            return Err(field("class.p", "the excess bounds need 1 <= p <= 2"));
        }
        if self.n_grid.is_empty() {
            return Err(field("n_grid", "list at least one sample size"));
        }
        for (k, w) in self.n_grid.iter().enumerate() {
            if *w == 0 || (k > 0 && *w <= self.n_grid[k - 1]) {
                return Err(field(&format!("n_grid[{k}]"), "sample sizes must be positive and strictly increasing"));
            }
        }
        if let Some(rs) = &self.rate {
            if rs.kernels.len() != m {
                return Err(field("rate.kernels", format!("need {m} (d, alpha) pairs, got {}", rs.kernels.len())));
            }
            RateSpec::new(rs.kernels.clone()).map_err(|e| field("rate.kernels", e))?;
        }
        if let Some(t) = self.t {
            if t.value() < self.class.p().value() || t.value() > 2.0 {
                return Err(field("t", "need p <= t <= 2"));
            }
        }
        Ok(())
    }

    fn run(&self) -> Result<Report, CliError> {
        let rate = self.rate();
        let rows: Vec<Row> =
            self.n_grid.par_iter().map(|&n| self.evaluate(n, rate.as_ref())).collect::<Result<_, _>>()?;
        let mut table = Table::new(&[
            "n",
            "r_star",
            "quadratic_root",
            "excess_fixed_point",
            "rate_bound",
            "rate_main",
            "h_used",
            "t_used",
        ]);
        for r in &rows {
            let (rb, rm) = match &r.rate {
                Some(e) => (num(e.value), num(e.main_term)),
                None => (String::new(), String::new()),
            };
            table.push(vec![
                r.n.to_string(),
                num(r.r_star),
                num(r.quadratic_root),
                num(r.excess),
                rb,
                rm,
                joined(&r.h_used),
                exponent(r.t_used),
            ]);
        }
        let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let slope = |ys: Vec<f64>| if xs.len() > 1 { loglog_slope(&xs, &ys).ok() } else { None };
        let fp_slope = slope(rows.iter().map(|r| r.excess).collect());
        let rate_slope = match rate {
            Some(_) => slope(rows.iter().map(|r| r.rate.as_ref().map_or(f64::NAN, |e| e.main_term)).collect()),
            None => None,
        };
        // Fixed point at the configured sample size.
        let at_n = self.evaluate(self.risk.n(), None)?;
        Ok(Report {
            tables: vec![(Self::NAME.into(), table)],
            summary: serde_json::json!({
                "fixed_point": {
                    "n": at_n.n,
                    "r_star": at_n.r_star,
                    "excess": at_n.excess,
                    "h_used": at_n.h_used,
                    "t_used": at_n.t_used,
                },
                "slopes": {
                    "fixed_point": fp_slope,
                    "rate_main": rate_slope,
                    "expected": rate.as_ref().map(|rs| -rs.alpha_min() / (1.0 + rs.alpha_min())),
                },
                "decay_factor": self.decay_factor,
                "sign_fix_applied": rows.iter().any(|r| r.rate.as_ref().is_some_and(|e| e.sign_fix_applied)),
            }),
            failure: None,
        })
    }
}
