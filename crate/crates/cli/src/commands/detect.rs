//! `detect`: cross-reference each city's significant prediction errors
//! (read back from `predict` output) with the days the spectral
//! pipeline flags as anomalous.

use crate::context::{per_city, report_failures, Context};
use anyhow::{anyhow, bail, Context as _, Result};
use auspex::anomaly::{self, ErrorSeries};
use auspex::spectral::SpectralFilter;
use chrono::NaiveDate;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

/// One parsed `predictions_<city>.csv` file.
struct Predictions {
    start: NaiveDate,
    observed: Vec<f64>,
    predicted: Vec<f64>,
}

fn parse_predictions(path: &Path) -> Result<Predictions> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("no prediction file '{}'", path.display()))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "date,observed,predicted")) => {}
        other => bail!("'{}': expected 'date,observed,predicted' header, got {other:?}", path.display()),
    }
    let mut start = None;
    let mut prev: Option<NaiveDate> = None;
    let mut observed = Vec::new();
    let mut predicted = Vec::new();
    for (i, line) in lines {
        let mut fields = line.split(',');
        let (Some(date), Some(obs), Some(pred), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            bail!("'{}' line {}: expected 3 fields", path.display(), i + 1);
        };
        let date = NaiveDate::parse_from_str(date, "%Y-%m-%d")
            .with_context(|| format!("'{}' line {}: bad date '{date}'", path.display(), i + 1))?;
        if let Some(p) = prev {
            if date != p.succ_opt().expect("date arithmetic") {
                bail!("'{}' line {}: dates must be consecutive", path.display(), i + 1);
            }
        }
        prev = Some(date);
        start.get_or_insert(date);
        observed.push(obs.parse()?);
        predicted.push(pred.parse()?);
    }
    let start = start.ok_or_else(|| anyhow!("'{}' has no data rows", path.display()))?;
    Ok(Predictions { start, observed, predicted })
}

pub fn run(ctx: &Context, predictions_dir: &Path) -> Result<usize> {
    let (panel, _gaps) = ctx.load_imputed()?;
    let graph = ctx.graph(&panel)?;
    let filter = SpectralFilter::accentuate(ctx.alpha)?;
    let reports = anomaly::detect_anomalies(&panel, &graph, &filter)?;
    let (common_start, common_end) = panel.date_range();
    let nc = (common_end - common_start).num_days() as usize + 1;

    let (ok, failed) = per_city(&panel, |index, city| {
        let path = predictions_dir.join(format!("predictions_{}.csv", city.city_id()));
        let preds = parse_predictions(&path)?;
        let obs_series = auspex::TimeSeries::new("observed", preds.start, preds.observed)?;
        let pred_series = obs_series.with_values(preds.predicted.clone())?.renamed("predicted");
        let errors = anomaly::model_errors(&obs_series, &pred_series)?;
        let series = ErrorSeries::from_errors(city.city_id(), errors)?;

        // Significant-error days live on the prediction timeline; shift
        // them onto the panel's common range before matching.
        let offset = (preds.start - common_start).num_days();
        let ce: BTreeSet<usize> = series
            .significant_days()
            .iter()
            .filter_map(|&day| {
                let shifted = day as i64 + offset;
                (1..=nc as i64).contains(&shifted).then_some(shifted as usize)
            })
            .collect();
        let report = &reports[index];
        let fraction = anomaly::match_errors_anomalies(&ce, report.anomalous_days(), nc)?;
        let eligible = ce.iter().filter(|&&t| t > 1 && t < nc).count();

        let mut csv = String::from("day,date,accentuated,error,in_ce,in_ca,matched\n");
        for day in 1..=nc {
            let date = common_start + chrono::Days::new(day as u64 - 1);
            let accentuated = if day >= 2 {
                format!("{}", report.accentuated()[day - 2])
            } else {
                String::new()
            };
            let error_index = day as i64 - offset;
            let error = if (1..=series.errors().len() as i64).contains(&error_index) {
                format!("{}", series.errors()[error_index as usize - 1])
            } else {
                String::new()
            };
            let in_ce = ce.contains(&day);
            let in_ca = report.anomalous_days().contains(&day);
            let matched = in_ce
                && (day > 1 && day < nc)
                && (day - 1..=day + 1).any(|t| report.anomalous_days().contains(&t));
            let _ = writeln!(csv, "{day},{date},{accentuated},{error},{in_ce},{in_ca},{matched}");
        }
        Ok((csv, fraction, eligible))
    });

    let mut summary = String::from("city,match_fraction,eligible,note\n");
    let mut fractions = Vec::new();
    for output in &ok {
        let (csv, fraction, eligible) = &output.value;
        std::fs::write(ctx.out.join(format!("anomalies_{}.csv", output.city_id)), csv)?;
        let note = if *eligible == 0 { "eligible=0" } else { "" };
        let _ = writeln!(summary, "{},{},{},{}", output.city_id, fraction, eligible, note);
        fractions.push(*fraction);
    }
    if !fractions.is_empty() {
        let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
        let _ = writeln!(summary, "# mean_match_fraction = {mean}");
    }
    std::fs::write(ctx.out.join("detection_summary.csv"), summary)?;
    Ok(report_failures("detect", &failed))
}
