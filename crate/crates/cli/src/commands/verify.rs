use lpmkl_core::empirical::{run_suites, VerifyConfig};
use serde::{Deserialize, Serialize};

use crate::error::{field, CliError};
use crate::experiment::{Experiment, Report};
use crate::output::{num, Table};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VerifyCommand(pub VerifyConfig);

impl Experiment for VerifyCommand {
    const NAME: &'static str = "verify";

    fn validate(&self) -> Result<(), CliError> {
        let c = &self.0;
        if c.khintchine_q.iter().any(|q| !(*q > 0.0 && q.is_finite())) {
            return Err(field("khintchine_q", "exponents must be positive and finite"));
        }
        if c.rosenthal_q.iter().any(|q| !(*q >= 0.5 && q.is_finite())) {
            return Err(field("rosenthal_q", "exponents must be finite and >= 1/2"));
        }
        if c.khintchine_dim == 0 {
            return Err(field("khintchine_dim", "must be at least 1"));
        }
        Ok(())
    }

    fn set_seed(&mut self, seed: u64) {
        self.0.seed = seed;
    }

    fn run(&self) -> Result<Report, CliError> {
        let report = run_suites(&self.0);
        let mut suites = Table::new(&["suite", "hard", "trials", "violations", "max_ratio", "passed", "error"]);
        for s in &report.suites {
            suites.push(vec![
                s.name.clone(),
                s.hard.to_string(),
                s.trials.to_string(),
                s.violations.to_string(),
                num(s.max_ratio),
                s.passed.to_string(),
                s.error.clone().unwrap_or_default().replace(',', ";"),
            ]);
        }
        let mut poisson = Table::new(&["q", "moment", "exact", "bound", "remainder", "holds"]);
        for r in &report.poisson {
            poisson.push(vec![
                r.q.to_string(),
                num(r.moment),
                num(r.exact),
                num(r.bound),
                num(r.remainder),
                r.holds.to_string(),
            ]);
        }
        let failed: Vec<&str> = report.suites.iter().filter(|s| !s.passed).map(|s| s.name.as_str()).collect();
        let failure = (!failed.is_empty()).then(|| format!("hard suites failed: {}", failed.join(", ")));
        Ok(Report {
            tables: vec![("verify".into(), suites), ("verify_poisson".into(), poisson)],
            summary: serde_json::to_value(&report).expect("report serializes"),
            failure,
        })
    }
}
