use std::collections::BTreeMap;

use lpmkl_core::bounds::{
    grc_empirical, grc_population, lrc_hparam, lrc_lower, lrc_upper_p1, lrc_upper_p12_scaled, lrc_upper_pge2,
    optimize_t, t_grid, T_GRID_POINTS,
};
use lpmkl_core::{
    BoundReport, Error, Exponent, FormulaId, JointSpectrum, KernelSpectrum, LocalQuery, MklClass, SpectrumSet,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_grid, one};
use crate::error::{field, CliError};
use crate::experiment::{Experiment, Report};
use crate::output::{exponent, num, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub class: MklClass,
    pub spectra: SpectrumSet,
    pub n: usize,
    #[serde(rename = "B")]
    pub kernel_bound: f64,
    pub r_grid: Vec<f64>,
    pub formulas: Vec<FormulaId>,
    /// Fixed `t`; minimized over the grid when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Exponent>,
    /// Gram traces for `GRC_EMP`; the population traces when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traces: Option<Vec<f64>>,
    /// Truncation levels for `LRC_HPARAM`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<u64>>,
    /// Constant of the lower bound.
    #[serde(default = "one")]
    pub c_abs: f64,
    /// Multiplier inside the min of `LRC_P12`.
    #[serde(default = "one")]
    pub multiplier: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        let m = 4;
        BoundsConfig {
            class: MklClass::new(Exponent::new(1.5).expect("valid"), 1.0, m).expect("valid"),
            spectra: SpectrumSet::identical(KernelSpectrum::algebraic(1.0, 2.0, None).expect("valid"), m)
                .expect("valid"),
            n: 1000,
            kernel_bound: 1.0,
            r_grid: (0..=8).map(|k| 10f64.powf(-4.0 + 0.5 * k as f64)).collect(),
            formulas: vec![FormulaId::GrcPop, FormulaId::LrcP12, FormulaId::LrcP1, FormulaId::Lower],
            t: None,
            traces: None,
            h: None,
            c_abs: 1.0,
            multiplier: 1.0,
        }
    }
}

struct Row {
    formula: FormulaId,
    r: f64,
    report: Option<BoundReport>,
    status: &'static str,
}

impl BoundsConfig {
    fn evaluate(&self, formula: FormulaId, r: f64) -> Result<Row, CliError> {
        let q = LocalQuery::new(self.class, r, self.n, self.kernel_bound)?;
        let spec = &self.spectra;
        let res = match formula {
            FormulaId::GrcEmp => {
                let traces = self.traces.clone().unwrap_or_else(|| spec.traces());
                grc_empirical(&self.class, &traces, self.n, self.t)
            }
            FormulaId::GrcPop => grc_population(&self.class, spec, self.n, self.kernel_bound, self.t),
            FormulaId::LrcP12 => lrc_upper_p12_scaled(&q, spec, self.t, self.multiplier),
            FormulaId::LrcPge2 => lrc_upper_pge2(&q, JointSpectrum::Union(spec)),
            FormulaId::LrcP1 => lrc_upper_p1(&q, spec),
            FormulaId::LrcHparam => {
                let h = self.h.as_deref().expect("validated");
                match self.t {
                    Some(t) => lrc_hparam(&q, spec, h, t),
                    None => optimize_t(&t_grid(self.class.p(), self.class.kernels(), T_GRID_POINTS), |t| {
                        lrc_hparam(&q, spec, h, t)
                    }),
                }
            }
            FormulaId::Lower => lrc_lower(&q, spec.kernel(0), self.c_abs),
        };
        match res {
            Ok(rep) => Ok(Row { formula, r, report: Some(rep), status: "ok" }),
            Err(Error::LowerBoundPrecondition(_)) => Ok(Row { formula, r, report: None, status: "precondition" }),
            Err(e) => Err(e.into()),
        }
    }
}

impl Experiment for BoundsConfig {
    const NAME: &'static str = "bounds";

    fn validate(&self) -> Result<(), CliError> {
        let m = self.class.kernels();
        if self.spectra.len() != m {
            return Err(field("spectra", format!("expected M = {m} spectra, got {}", self.spectra.len())));
        }
        if self.n == 0 {
            return Err(field("n", "must be at least 1"));
        }
        if !(self.kernel_bound > 0.0 && self.kernel_bound.is_finite()) {
            return Err(field("B", "must be positive and finite"));
        }
        check_grid("r_grid", &self.r_grid, 0.0)?;
        if self.formulas.is_empty() {
            return Err(field("formulas", "list at least one formula"));
        }
        if let Some(tr) = &self.traces {
            if tr.len() != m || tr.iter().any(|x| !(*x >= 0.0)) {
                return Err(field("traces", format!("need {m} nonnegative traces")));
            }
        }
        if self.formulas.contains(&FormulaId::LrcHparam) {
            match &self.h {
                Some(h) if h.len() == m => {}
                Some(h) => return Err(field("h", format!("need {m} levels, got {}", h.len()))),
                None => return Err(field("h", "LRC_HPARAM needs truncation levels")),
            }
        }
        if self.formulas.contains(&FormulaId::Lower)
            && self.spectra.kernels().iter().any(|k| k != self.spectra.kernel(0))
        {
            return Err(field("spectra", "LOWER assumes identical kernels"));
        }
        if !(self.c_abs > 0.0) {
            return Err(field("c_abs", "must be positive"));
        }
        if !(self.multiplier > 0.0) {
            return Err(field("multiplier", "must be positive"));
        }
        Ok(())
    }

    fn run(&self) -> Result<Report, CliError> {
        let rows: Vec<Vec<Row>> = self
            .r_grid
            .par_iter()
            .map(|&r| self.formulas.iter().map(|&f| self.evaluate(f, r)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<_, _>>()?;
        let mut table =
            Table::new(&["formula_id", "p", "t_used", "r", "value", "main_term", "remainder_term", "status"]);
        // Whether each local formula is nondecreasing along the grid.
        let mut monotone: BTreeMap<&'static str, bool> = BTreeMap::new();
        let mut last: BTreeMap<&'static str, f64> = BTreeMap::new();
        for row in rows.iter().flatten() {
            let id = row.formula.as_str();
            let (t, v, main, rem) = match &row.report {
                Some(b) => (exponent(b.t_used), num(b.value), num(b.main_term), num(b.remainder_term)),
                None => ("NaN".into(), num(f64::NAN), num(f64::NAN), num(f64::NAN)),
            };
            table.push(vec![id.into(), exponent(self.class.p()), t, num(row.r), v, main, rem, row.status.into()]);
            if row.formula.is_local() {
                if let Some(b) = &row.report {
                    let ok = last.get(id).is_none_or(|&prev| b.value >= prev * (1.0 - 1e-12));
                    *monotone.entry(id).or_insert(true) &= ok;
                    last.insert(id, b.value);
                }
            }
        }
        let flagged = rows.iter().flatten().filter(|r| r.report.is_none()).count();
        Ok(Report {
            summary: serde_json::json!({ "rows": table.len(), "flagged_rows": flagged, "monotone_in_r": monotone }),
            tables: vec![(Self::NAME.into(), table)],
            failure: None,
        })
    }
}
