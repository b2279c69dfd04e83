//! `decompose`: export one city's IMF/residual decomposition as CSV
//! plus one gnuplot-ready data file per component.

use crate::context::Context;
use anyhow::{anyhow, Result};
use auspex::eemd;
use std::fmt::Write as _;

pub fn run(ctx: &Context, city_id: &str) -> Result<usize> {
    let (panel, _gaps) = ctx.load_imputed()?;
    let city = panel
        .city(city_id)
        .ok_or_else(|| anyhow!("unknown city '{city_id}'"))?;

    let decomposition = eemd::eemd(city.cases(), &ctx.eemd)?;

    let mut csv = Vec::new();
    decomposition.write_csv(&mut csv, "%Y-%m-%d")?;
    std::fs::write(ctx.out.join(format!("decomposition_{city_id}.csv")), csv)?;

    for level in 1..=decomposition.num_levels() {
        let component = decomposition.level(level).expect("level within bounds");
        let mut dat = format!("# {} of {city_id} daily cases\n# day value\n", component.name());
        for (i, value) in component.values().iter().enumerate() {
            let _ = writeln!(dat, "{} {value}", i + 1);
        }
        std::fs::write(
            ctx.out.join(format!("{city_id}_{}.dat", component.name())),
            dat,
        )?;
    }
    Ok(0)
}
