//! `normalize`: low-pass filter the cross-city case signal day by day
//! and write the repaired panel back out in the canonical cases schema.

use crate::context::Context;
use anyhow::Result;
use auspex::anomaly;
use auspex::spectral::GraphSignal;
use auspex::PanelDataset;
use chrono::Days;
use std::fmt::Write as _;

/// Cases of every city on one common-range day, in city order.
fn day_signal(panel: &PanelDataset, day: usize) -> Result<GraphSignal> {
    let (start, _) = panel.date_range();
    let values = panel
        .cities()
        .iter()
        .map(|city| {
            let base = city.cases().index_of(start).expect("common range within city");
            city.cases().values()[base + day]
        })
        .collect();
    Ok(GraphSignal::new(values)?)
}

pub fn run(ctx: &Context) -> Result<usize> {
    let (panel, _gaps) = ctx.load_imputed()?;
    let graph = ctx.graph(&panel)?;
    let (normalized, clamped) = anomaly::normalize_cases(&panel, &graph, ctx.cutoff)?;

    let mut cases_csv = Vec::new();
    auspex::ingest::write_cases_csv(&normalized, &mut cases_csv)?;
    std::fs::write(ctx.out.join("normalized_cases.csv"), cases_csv)?;

    let (start, end) = panel.date_range();
    let nc = (end - start).num_days() as usize + 1;
    let mut diagnostics = String::from("day,date,high_band_before,high_band_after\n");
    for day in 0..nc {
        let date = start + Days::new(day as u64);
        let before = anomaly::high_band_energy(&graph, &day_signal(&panel, day)?, ctx.cutoff)?;
        let after = anomaly::high_band_energy(&graph, &day_signal(&normalized, day)?, ctx.cutoff)?;
        let _ = writeln!(diagnostics, "{},{date},{before},{after}", day + 1);
    }
    let _ = writeln!(diagnostics, "# clamped_negatives = {clamped}");
    std::fs::write(ctx.out.join("band_energy.csv"), diagnostics)?;

    println!(
        "normalized {nc} day(s) across {} cities; clamped {clamped} negative value(s)",
        panel.cities().len()
    );
    Ok(0)
}
