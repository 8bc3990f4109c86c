use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::run::RunReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub metric: String,
    pub h_coarse: f64,
    pub h_fine: f64,
    pub e_coarse: f64,
    pub e_fine: f64,
    /// `log(e_coarse / e_fine) / log(h_coarse / h_fine)`.
    pub order: f64,
    /// Set when the errors are equal, zero or not finite.
    pub flagged: bool,
}

/// Observed orders between consecutive refinements for every metric the
/// reports share. Reports are ordered by decreasing spacing.
pub fn convergence_table(reports: &[RunReport]) -> Result<Vec<ConvergenceRow>> {
    if reports.len() < 2 {
        return Err(Error::Config("a convergence table needs at least 2 reports".into()));
    }
    let name = &reports[0].scenario.name;
    if let Some(r) = reports.iter().find(|r| &r.scenario.name != name) {
        return Err(Error::Config(format!(
            "reports belong to different scenarios: `{name}` and `{}`",
            r.scenario.name
        )));
    }
    let mut sorted: Vec<&RunReport> = reports.iter().collect();
    sorted.sort_by(|a, b| b.grid.max_spacing().total_cmp(&a.grid.max_spacing()));
    if sorted.windows(2).any(|w| w[0].grid.max_spacing() == w[1].grid.max_spacing()) {
        return Err(Error::Config("reports must use distinct spacings".into()));
    }
    let metrics = |r: &RunReport| -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        for e in &r.experiments {
            for (k, v) in &e.metrics {
                m.insert(format!("{:02}_{}.{k}", e.index, e.kind), *v);
            }
        }
        m
    };
    let mut rows = Vec::new();
    for w in sorted.windows(2) {
        let (a, b) = (metrics(w[0]), metrics(w[1]));
        let (ha, hb) = (w[0].grid.max_spacing(), w[1].grid.max_spacing());
        for (k, &ea) in &a {
            let Some(&eb) = b.get(k) else { continue };
            let usable = ea.is_finite() && eb.is_finite() && ea != 0.0 && eb != 0.0 && ea != eb;
            rows.push(ConvergenceRow {
                metric: k.clone(),
                h_coarse: ha,
                h_fine: hb,
                e_coarse: ea,
                e_fine: eb,
                order: if usable { (ea.abs() / eb.abs()).ln() / (ha / hb).ln() } else { 0.0 },
                flagged: !usable,
            });
        }
    }
    Ok(rows)
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("metric,h_coarse,h_fine,e_coarse,e_fine,order,flagged\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:e},{:e},{:e},{:e},{},{}",
            r.metric, r.h_coarse, r.h_fine, r.e_coarse, r.e_fine, r.order, r.flagged
        );
    }
    s
}
