//! `correlate`: Spearman-screen every lagged covariate against cases.

use crate::context::{per_city, report_failures, Context};
use anyhow::Result;
use auspex::stats;
use auspex::TimeSeries;
use std::fmt::Write as _;

pub fn run(ctx: &Context) -> Result<usize> {
    let (panel, _gaps) = ctx.load_imputed()?;
    let (ok, failed) = per_city(&panel, |_, city| {
        let (cases, exog) = ctx.lagged_city(city)?;
        let names: Vec<&str> = city.covariates().map(|(name, _)| name).collect();
        let candidates: Vec<(&str, &TimeSeries)> =
            names.iter().copied().zip(exog.iter()).collect();
        let rows = stats::screen_variables(&cases, &candidates)?;
        let mut csv = String::from("variable,rho,p_value,selected\n");
        for row in rows {
            let _ = writeln!(csv, "{},{},{},{}", row.variable, row.rho, row.p_value, row.selected);
        }
        Ok(csv)
    });

    for output in &ok {
        let path = ctx.out.join(format!("correlations_{}.csv", output.city_id));
        std::fs::write(path, &output.value)?;
    }
    Ok(report_failures("correlate", &failed))
}
