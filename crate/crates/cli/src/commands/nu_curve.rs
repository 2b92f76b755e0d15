use lpmkl_core::excess::{nu_curve, p_grid};
use lpmkl_core::{Exponent, SoftSparseBayes};
use serde::{Deserialize, Serialize};

use crate::error::{field, CliError};
use crate::experiment::{Experiment, Report};
use crate::output::{exponent, num, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuCurveConfig {
    pub alpha: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub betas: Vec<f64>,
    /// Step of the default grid `1, 1 + step, ..., 2`; ignored when `p_grid` is given.
    #[serde(default = "default_step")]
    pub p_step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_grid: Option<Vec<Exponent>>,
}

fn default_step() -> f64 {
    0.02
}

impl Default for NuCurveConfig {
    fn default() -> Self {
        NuCurveConfig { alpha: 2.0, m: 1000, betas: vec![0.5, 1.0, 2.0], p_step: default_step(), p_grid: None }
    }
}

impl NuCurveConfig {
    fn grid(&self) -> Result<Vec<Exponent>, CliError> {
        match &self.p_grid {
            Some(g) => Ok(g.clone()),
            None => p_grid(self.p_step).map_err(|e| field("p_step", e)),
        }
    }
}

impl Experiment for NuCurveConfig {
    const NAME: &'static str = "nu_curve";

    fn validate(&self) -> Result<(), CliError> {
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return Err(field("alpha", "must be finite and exceed 1"));
        }
        if self.m == 0 {
            return Err(field("M", "must be at least 1"));
        }
        if self.betas.is_empty() {
            return Err(field("betas", "list at least one beta"));
        }
        for (k, &b) in self.betas.iter().enumerate() {
            SoftSparseBayes::new(b, self.m).map_err(|e| field(&format!("betas[{k}]"), e))?;
        }
        let g = self.grid()?;
        if g.is_empty() || g.iter().any(|p| p.value() > 2.0) || g.windows(2).any(|w| !(w[0].value() < w[1].value())) {
            return Err(field("p_grid", "need a strictly increasing grid inside [1, 2]"));
        }
        Ok(())
    }

    fn run(&self) -> Result<Report, CliError> {
        let grid = self.grid()?;
        let mut table = Table::new(&["beta", "p", "nu", "t_used", "d_p"]);
        let mut curves = Vec::new();
        for &beta in &self.betas {
            let c = nu_curve(&SoftSparseBayes::new(beta, self.m)?, self.alpha, &grid)?;
            for pt in &c.points {
                table.push(vec![num(beta), exponent(pt.p), num(pt.nu), exponent(pt.t_used), num(pt.d_p)]);
            }
            curves.push(serde_json::json!({ "beta": beta, "argmin": c.argmin, "min": c.min }));
        }
        Ok(Report {
            tables: vec![(Self::NAME.into(), table)],
            summary: serde_json::json!({ "alpha": self.alpha, "M": self.m, "curves": curves }),
            failure: None,
        })
    }
}
