//! `predict`: per-city model fitting, prediction export, and the
//! summary table (city, order, ME, RMSE, MAE).

use crate::context::{per_city, report_failures, Context, Method};
use anyhow::Result;
use auspex::arimax::{self};
use auspex::hybrid::{fit_hybrid, HybridConfig};
use auspex::stats::{self, Metrics};
use auspex::{seed, TimeSeries};
use std::fmt::Write as _;

struct CityFit {
    order: String,
    metrics: Metrics,
    predictions_csv: String,
    model_record: String,
}

fn render_predictions(observed: &TimeSeries, predicted: &TimeSeries) -> String {
    let mut csv = String::from("date,observed,predicted\n");
    for (i, (obs, pred)) in observed.values().iter().zip(predicted.values()).enumerate() {
        let date = observed.date_at(i);
        let _ = writeln!(csv, "{date},{obs},{pred}");
    }
    csv
}

pub fn run(ctx: &Context, method: Method) -> Result<usize> {
    let (panel, _gaps) = ctx.load_imputed()?;
    let (ok, failed) = per_city(&panel, |index, city| {
        let (cases, exog) = ctx.lagged_city(city)?;
        let names: Vec<&str> = city.covariates().map(|(name, _)| name).collect();
        let candidates: Vec<(&str, &TimeSeries)> =
            names.iter().copied().zip(exog.iter()).collect();
        let screened = stats::screen_variables(&cases, &candidates)?;
        let selected: Vec<&TimeSeries> = screened
            .iter()
            .zip(exog.iter())
            .filter(|(row, _)| row.selected)
            .map(|(_, series)| series)
            .collect();

        let fit = match method {
            Method::Arimax => {
                let sel = arimax::select_order(&cases, &selected, ctx.bounds)?;
                let fitted = arimax::fitted_values(&sel.model, &cases, &selected)?;
                let metrics = stats::metrics(fitted.values(), cases.values())?;
                CityFit {
                    order: sel.model.order().to_string(),
                    metrics,
                    predictions_csv: render_predictions(&cases, &fitted),
                    model_record: sel.model.to_text_record(),
                }
            }
            Method::EemdArimax => {
                let config = HybridConfig {
                    eemd: auspex::eemd::EemdConfig {
                        seed: seed::derive(ctx.seed, index as u64),
                        ..ctx.eemd
                    },
                    bounds: ctx.bounds,
                    per_level_orders: None,
                };
                let model = fit_hybrid(&cases, &selected, &config)?;
                let metrics = model.evaluate(&cases)?;
                let levels = model.level_fits();
                let order = levels.last().expect("at least the residual level").model.order();
                let mut record = String::new();
                for level in levels {
                    let _ = writeln!(record, "# level {}", level.label);
                    record.push_str(&level.model.to_text_record());
                }
                CityFit {
                    order: order.to_string(),
                    metrics,
                    predictions_csv: render_predictions(&cases, model.prediction()),
                    model_record: record,
                }
            }
        };
        Ok(fit)
    });

    let mut summary = String::from("city,order,me,rmse,mae\n");
    for output in &ok {
        let fit = &output.value;
        std::fs::write(
            ctx.out.join(format!("predictions_{}.csv", output.city_id)),
            &fit.predictions_csv,
        )?;
        std::fs::write(ctx.out.join(format!("model_{}.txt", output.city_id)), &fit.model_record)?;
        let _ = writeln!(
            summary,
            "{},\"{}\",{},{},{}",
            output.city_id, fit.order, fit.metrics.me, fit.metrics.rmse, fit.metrics.mae
        );
    }
    std::fs::write(ctx.out.join("summary.csv"), summary)?;
    Ok(report_failures("predict", &failed))
}
