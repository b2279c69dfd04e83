//! Model-error analysis, spectral anomaly detection, and case-count
//! normalization.
//!
//! Three related questions about reported case counts are answered here:
//!
//! 1. *Where was the prediction wrong?* Relative model errors
//!    `e_t = |1 − c_t/ĉ_t|` are thresholded at mean + 1.5·std to find
//!    significant-error days (the set `CE`).
//! 2. *Where does the data itself look anomalous?* Daily variations
//!    `s_t = |1 − c_t/c_{t−1}|` form one cross-city graph signal per day;
//!    a high-frequency accentuator makes variations that break the
//!    spatial pattern stand out, and the same threshold rule marks
//!    anomalous days (the set `CA`). A significant error on day `t` is
//!    *matched* when an anomaly occurred on `t−1`, `t`, or `t+1`.
//! 3. *Can the data be repaired?* A per-day low-pass filter over the same
//!    graph smooths reporting artifacts; negative filtered counts are
//!    clamped to zero and counted.
//!
//! Days are numbered 1-based over the panel's common date range; daily
//! variations (and therefore anomalies) exist for days 2 and onward.

use crate::exec;
use crate::spectral::{self, CityGraph, GraphSignal, SpectralError, SpectralFilter};
use crate::timeseries::{CityRecord, PanelDataset, TimeSeries, TimeSeriesError};
use std::collections::BTreeSet;
use std::io;
use thiserror::Error;

/// Cap applied when a division guard trips (zero predicted cases, or a
/// positive count following a zero).
pub const E_MAX: f64 = 10.0;

/// Errors from anomaly detection and normalization.
#[derive(Debug, Error)]
pub enum AnomalyError {
    /// Observed and predicted series must have equal lengths.
    #[error("length mismatch: observed {observed}, predicted {predicted}")]
    LengthMismatch { observed: usize, predicted: usize },
    /// Thresholds need at least one value.
    #[error("empty input: {0}")]
    Empty(String),
    /// Daily variation needs at least two days.
    #[error("series too short: got {got} days, need at least 2")]
    TooShort { got: usize },
    /// Day indices live in `[1, nc]`.
    #[error("day {day} out of range [1, {nc}]")]
    DayOutOfRange { day: usize, nc: usize },
    /// The graph's node order must match the panel's city order.
    #[error("graph/panel mismatch: {0}")]
    GraphMismatch(String),
    /// Detection requires an accentuate filter.
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    /// Spectral failures bubbling up from filtering.
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    /// Series-container failures while rebuilding panels.
    #[error(transparent)]
    Series(#[from] TimeSeriesError),
}

/// Relative model errors `e_t = |1 − c_t/ĉ_t|`, with `ĉ_t = 0` capped at
/// [`E_MAX`].
pub fn model_errors(
    observed: &TimeSeries,
    predicted: &TimeSeries,
) -> Result<Vec<f64>, AnomalyError> {
    if observed.len() != predicted.len() {
        return Err(AnomalyError::LengthMismatch {
            observed: observed.len(),
            predicted: predicted.len(),
        });
    }
    Ok(observed
        .values()
        .iter()
        .zip(predicted.values())
        .map(|(c, c_hat)| {
            if *c_hat == 0.0 {
                E_MAX
            } else {
                (1.0 - c / c_hat).abs().min(E_MAX)
            }
        })
        .collect())
}

/// Mean plus 1.5 sample standard deviations (divide by N−1; a single
/// value has standard deviation 0 by definition).
pub fn threshold(values: &[f64]) -> Result<f64, AnomalyError> {
    if values.is_empty() {
        return Err(AnomalyError::Empty("threshold input".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() == 1 {
        0.0
    } else {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1.0)).sqrt()
    };
    Ok(mean + 1.5 * std)
}

/// Daily variations `s_t = |1 − c_t/c_{t−1}|` for days 2..=n.
///
/// Division guards: a zero followed by a zero varies by 0; a zero
/// followed by a positive count varies by [`E_MAX`].
pub fn daily_variation(cases: &TimeSeries) -> Result<Vec<f64>, AnomalyError> {
    let v = cases.values();
    if v.len() < 2 {
        return Err(AnomalyError::TooShort { got: v.len() });
    }
    Ok(v.windows(2)
        .map(|pair| {
            let (prev, cur) = (pair[0], pair[1]);
            if prev == 0.0 {
                if cur == 0.0 {
                    0.0
                } else {
                    E_MAX
                }
            } else {
                (1.0 - cur / prev).abs().min(E_MAX)
            }
        })
        .collect())
}

/// Exceedance days (1-based, strict) with a Chebyshev sanity bound: at
/// most 1/1.5² of the points can exceed mean + 1.5·std.
fn exceedance_days(values: &[f64], td: f64, first_day: usize) -> BTreeSet<usize> {
    let days: BTreeSet<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > td)
        .map(|(i, _)| i + first_day)
        .collect();
    assert!(
        days.len() as f64 <= values.len() as f64 / 2.25 + 1e-9,
        "threshold exceedances violate the Chebyshev bound: {}/{}",
        days.len(),
        values.len()
    );
    days
}

/// Per-city model errors with their significance threshold.
#[derive(Debug, Clone)]
pub struct ErrorSeries {
    city_id: String,
    errors: Vec<f64>,
    threshold: f64,
    significant_days: BTreeSet<usize>,
}

impl ErrorSeries {
    /// Computes the threshold and the significant-day set `CE` from raw
    /// errors (day 1 = first error).
    pub fn from_errors(
        city_id: impl Into<String>,
        errors: Vec<f64>,
    ) -> Result<Self, AnomalyError> {
        let td = threshold(&errors)?;
        let significant_days = exceedance_days(&errors, td, 1);
        Ok(Self { city_id: city_id.into(), errors, threshold: td, significant_days })
    }

    /// City identifier.
    pub fn city_id(&self) -> &str {
        &self.city_id
    }

    /// Raw errors, day 1 first.
    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    /// The significance threshold TD.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Days (1-based) whose error strictly exceeds the threshold.
    pub fn significant_days(&self) -> &BTreeSet<usize> {
        &self.significant_days
    }
}

/// Per-city anomaly detection output.
#[derive(Debug, Clone)]
pub struct AnomalyReport {
    city_id: String,
    accentuated: Vec<f64>,
    threshold: f64,
    anomalous_days: BTreeSet<usize>,
    negative_observed_days: BTreeSet<usize>,
    match_fraction: Option<f64>,
}

impl AnomalyReport {
    /// City identifier.
    pub fn city_id(&self) -> &str {
        &self.city_id
    }

    /// Accentuated variations `r_t` for days 2..=nc (index 0 is day 2).
    pub fn accentuated(&self) -> &[f64] {
        &self.accentuated
    }

    /// The anomaly threshold TD over the accentuated variations.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Days (1-based, ≥ 2) flagged as anomalous — the set `CA`.
    pub fn anomalous_days(&self) -> &BTreeSet<usize> {
        &self.anomalous_days
    }

    /// Days (1-based) with negative observed case counts; such days are
    /// data defects and worth inspecting regardless of detection.
    pub fn negative_observed_days(&self) -> &BTreeSet<usize> {
        &self.negative_observed_days
    }

    /// Fraction of eligible significant-error days matched by an anomaly
    /// (set by [`attach_match_fraction`]).
    pub fn match_fraction(&self) -> Option<f64> {
        self.match_fraction
    }
}

fn check_graph_panel(graph: &CityGraph, panel: &PanelDataset) -> Result<(), AnomalyError> {
    let panel_ids: Vec<&str> = panel.cities().iter().map(CityRecord::city_id).collect();
    let graph_ids: Vec<&str> = graph.node_ids().iter().map(String::as_str).collect();
    if panel_ids != graph_ids {
        return Err(AnomalyError::GraphMismatch(format!(
            "graph nodes {graph_ids:?} vs panel cities {panel_ids:?}"
        )));
    }
    Ok(())
}

/// Case values for the panel's common date range, one row per city.
fn common_range_cases(panel: &PanelDataset) -> Result<Vec<Vec<f64>>, AnomalyError> {
    let (start, end) = panel.date_range();
    panel
        .cities()
        .iter()
        .map(|city| {
            let cases = city.cases();
            let from = cases.index_of(start).expect("common range within every city");
            let to = cases.index_of(end).expect("common range within every city") + 1;
            Ok(cases.slice(from, to)?.values().to_vec())
        })
        .collect()
}

/// Runs spectral anomaly detection over the panel's common date range.
///
/// For each day `t ≥ 2` the cross-city daily variations form a graph
/// signal; the accentuate filter amplifies its high-frequency (spatially
/// inconsistent) content, and each city thresholds its own accentuated
/// sequence `R_i` to obtain the anomalous-day set `CA`.
pub fn detect_anomalies(
    panel: &PanelDataset,
    graph: &CityGraph,
    filter: &SpectralFilter,
) -> Result<Vec<AnomalyReport>, AnomalyError> {
    check_graph_panel(graph, panel)?;
    if !matches!(filter, SpectralFilter::Accentuate { .. }) {
        return Err(AnomalyError::InvalidFilter(
            "detection requires an accentuate filter".into(),
        ));
    }
    let cases = common_range_cases(panel)?;
    let nc = cases[0].len();
    if nc < 2 {
        return Err(AnomalyError::TooShort { got: nc });
    }

    let variations: Vec<Vec<f64>> = panel
        .cities()
        .iter()
        .zip(&cases)
        .map(|(city, values)| {
            daily_variation(&TimeSeries::new(
                city.city_id(),
                city.cases().start(),
                values.clone(),
            )?)
        })
        .collect::<Result<_, _>>()?;

    // One filtered cross-city signal per day; days are independent.
    let filtered_days = exec::map_indexed(nc - 1, |k| {
        let signal: Vec<f64> = variations.iter().map(|s| s[k]).collect();
        spectral::apply_filter(graph, &GraphSignal::new(signal)?, filter)
            .map(GraphSignal::into_values)
    });

    let mut per_city: Vec<Vec<f64>> = vec![Vec::with_capacity(nc - 1); panel.cities().len()];
    for day in filtered_days {
        let day = day?;
        for (city_values, value) in per_city.iter_mut().zip(day) {
            city_values.push(value);
        }
    }

    panel
        .cities()
        .iter()
        .zip(per_city)
        .zip(&cases)
        .map(|((city, accentuated), observed)| {
            let td = threshold(&accentuated)?;
            // First variation belongs to day 2.
            let anomalous_days = exceedance_days(&accentuated, td, 2);
            let negative_observed_days = observed
                .iter()
                .enumerate()
                .filter(|(_, v)| **v < 0.0)
                .map(|(i, _)| i + 1)
                .collect();
            Ok(AnomalyReport {
                city_id: city.city_id().to_string(),
                accentuated,
                threshold: td,
                anomalous_days,
                negative_observed_days,
                match_fraction: None,
            })
        })
        .collect()
}

/// Fraction of eligible significant-error days matched by an anomaly.
///
/// A day `t ∈ CE` is eligible when `1 < t < nc` and matched when any of
/// `{t−1, t, t+1}` is in `CA`. With no eligible days the fraction is 0.
pub fn match_errors_anomalies(
    ce: &BTreeSet<usize>,
    ca: &BTreeSet<usize>,
    nc: usize,
) -> Result<f64, AnomalyError> {
    for day in ce.iter().chain(ca) {
        if *day < 1 || *day > nc {
            return Err(AnomalyError::DayOutOfRange { day: *day, nc });
        }
    }
    let eligible: Vec<usize> = ce.iter().copied().filter(|t| 1 < *t && *t < nc).collect();
    if eligible.is_empty() {
        return Ok(0.0);
    }
    let matched = eligible
        .iter()
        .filter(|t| ca.contains(&(*t - 1)) || ca.contains(t) || ca.contains(&(*t + 1)))
        .count();
    Ok(matched as f64 / eligible.len() as f64)
}

/// Computes and stores the report's match fraction against an error
/// series for the same city and day range.
pub fn attach_match_fraction(
    report: &mut AnomalyReport,
    errors: &ErrorSeries,
) -> Result<f64, AnomalyError> {
    let nc = errors.errors().len();
    let fraction =
        match_errors_anomalies(errors.significant_days(), report.anomalous_days(), nc)?;
    report.match_fraction = Some(fraction);
    Ok(fraction)
}

/// Low-pass normalization of case counts over the common date range.
///
/// Each day's cross-city case signal is low-pass filtered on the graph;
/// negative filtered counts are clamped to zero. Values outside the
/// common range are left untouched. Returns the rebuilt panel and the
/// number of clamped values.
pub fn normalize_cases(
    panel: &PanelDataset,
    graph: &CityGraph,
    kappa: f64,
) -> Result<(PanelDataset, usize), AnomalyError> {
    check_graph_panel(graph, panel)?;
    let filter = SpectralFilter::lowpass(kappa)?;
    let cases = common_range_cases(panel)?;
    let nc = cases[0].len();

    let filtered_days = exec::map_indexed(nc, |k| {
        let signal: Vec<f64> = cases.iter().map(|c| c[k]).collect();
        spectral::apply_filter(graph, &GraphSignal::new(signal)?, &filter)
            .map(GraphSignal::into_values)
    });

    let n_cities = panel.cities().len();
    let mut normalized: Vec<Vec<f64>> = vec![Vec::with_capacity(nc); n_cities];
    let mut clamped = 0usize;
    for day in filtered_days {
        let day = day?;
        for (city_values, value) in normalized.iter_mut().zip(day) {
            if value < 0.0 {
                clamped += 1;
                city_values.push(0.0);
            } else {
                city_values.push(value);
            }
        }
    }

    let (start, _) = panel.date_range();
    let rebuilt: Vec<CityRecord> = panel
        .cities()
        .iter()
        .zip(normalized)
        .map(|(city, filtered)| {
            let cases = city.cases();
            let from = cases.index_of(start).expect("common range within every city");
            let mut values = cases.values().to_vec();
            values[from..from + nc].copy_from_slice(&filtered);
            city.with_cases(cases.with_values(values)?)
        })
        .collect::<Result<_, _>>()?;
    Ok((PanelDataset::new(rebuilt)?, clamped))
}

/// Energy in the graph-spectral band above the low-pass cutoff: the sum
/// of squared Fourier coefficients at 1-based positions `> ceil(κ·N)`.
pub fn high_band_energy(
    graph: &CityGraph,
    signal: &GraphSignal,
    kappa: f64,
) -> Result<f64, AnomalyError> {
    if !(kappa.is_finite() && kappa > 0.0 && kappa <= 1.0) {
        return Err(AnomalyError::InvalidFilter(format!(
            "cutoff must lie in (0, 1], got {kappa}"
        )));
    }
    let spectrum = spectral::gft(graph, signal)?;
    let keep = (kappa * graph.len() as f64).ceil() as usize;
    Ok(spectrum.values().iter().skip(keep).map(|c| c * c).sum())
}

/// Writes a combined per-day report as CSV: day, model error, accentuated
/// variation (blank on day 1), membership flags, and whether the day was
/// matched, followed by a comment line with the city's match fraction.
pub fn write_report<W: io::Write>(
    out: &mut W,
    errors: &ErrorSeries,
    report: &AnomalyReport,
) -> io::Result<()> {
    let nc = errors.errors().len();
    assert_eq!(
        report.accentuated().len() + 1,
        nc,
        "error series and anomaly report cover different day ranges"
    );
    writeln!(out, "city_id,day,e,r,in_CE,in_CA,matched")?;
    let ca = report.anomalous_days();
    for t in 1..=nc {
        let e = errors.errors()[t - 1];
        let r = if t >= 2 { report.accentuated()[t - 2].to_string() } else { String::new() };
        let in_ce = errors.significant_days().contains(&t);
        let in_ca = ca.contains(&t);
        let matched = in_ce
            && 1 < t
            && t < nc
            && (ca.contains(&(t - 1)) || ca.contains(&t) || ca.contains(&(t + 1)));
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            errors.city_id(),
            t,
            e,
            r,
            u8::from(in_ce),
            u8::from(in_ca),
            u8::from(matched)
        )?;
    }
    match report.match_fraction() {
        Some(f) => writeln!(out, "# match_fraction = {f}"),
        None => writeln!(out, "# match_fraction = unset"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_graph, WeightMode};
    use chrono::NaiveDate;

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        assert!((a - b).abs() <= tol, "{what}: {a} vs {b} (tol {tol})");
    }

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 6, 1).unwrap()
    }

    fn series(name: &str, values: Vec<f64>) -> TimeSeries {
        TimeSeries::new(name, start(), values).unwrap()
    }

    /// A panel of cities with the given case values, all sharing the same
    /// date range, plus the matching literal-distance graph.
    fn panel_and_graph(case_rows: &[(&str, Vec<f64>)]) -> (PanelDataset, CityGraph) {
        let cities: Vec<CityRecord> = case_rows
            .iter()
            .enumerate()
            .map(|(i, (id, values))| {
                CityRecord::new(
                    *id,
                    -20.0 + i as f64,
                    -45.0 - 0.5 * i as f64,
                    series(id, values.clone()),
                    vec![],
                    vec![],
                )
                .unwrap()
            })
            .collect();
        let panel = PanelDataset::new(cities).unwrap();
        let graph = spectral::graph_from_panel(&panel, WeightMode::LiteralDistance).unwrap();
        (panel, graph)
    }

    // -- model errors ------------------------------------------------------

    #[test]
    fn model_error_hand_values() {
        let obs = series("c", vec![50.0, 100.0, 100.0, 30.0]);
        let pred = series("p", vec![100.0, 100.0, 0.0, -60.0]);
        let e = model_errors(&obs, &pred).unwrap();
        assert_eq!(e[0], 0.5, "|1 - 50/100|");
        assert_eq!(e[1], 0.0, "perfect prediction");
        assert_eq!(e[2], E_MAX, "zero prediction capped");
        assert_eq!(e[3], 1.5, "|1 - 30/(-60)|");
        let short = series("p", vec![1.0]);
        assert!(matches!(
            model_errors(&obs, &short),
            Err(AnomalyError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn perfect_predictions_give_zero_errors() {
        let obs = series("c", vec![3.0, 4.0, 5.0]);
        assert_eq!(model_errors(&obs, &obs).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    // -- threshold ---------------------------------------------------------

    #[test]
    fn threshold_hand_values() {
        assert_eq!(threshold(&[0.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        // Sample std of [1,1,1,5] is 2: TD = 2 + 1.5·2 = 5.
        assert_eq!(threshold(&[1.0, 1.0, 1.0, 5.0]).unwrap(), 5.0);
        assert_eq!(threshold(&[7.5, 7.5, 7.5]).unwrap(), 7.5);
        assert_eq!(threshold(&[42.0]).unwrap(), 42.0);
        assert!(matches!(threshold(&[]), Err(AnomalyError::Empty(_))));
    }

    #[test]
    fn error_series_uses_strict_exceedance() {
        // For [a,a,a,b] the threshold works out to exactly b, so a single
        // spike among three equal values is never significant: membership
        // is strict.
        let es = ErrorSeries::from_errors("x", vec![1.0, 1.0, 1.0, 5.0]).unwrap();
        assert_eq!(es.threshold(), 5.0);
        assert!(es.significant_days().is_empty());
        // One more quiet day pulls the threshold below the spike.
        let es = ErrorSeries::from_errors("x", vec![0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(es.significant_days().iter().copied().collect::<Vec<_>>(), vec![5]);
    }

    // -- daily variation ---------------------------------------------------

    #[test]
    fn daily_variation_hand_values() {
        assert_eq!(
            daily_variation(&series("c", vec![100.0, 100.0, 100.0])).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(daily_variation(&series("c", vec![100.0, 150.0])).unwrap(), vec![0.5]);
        assert_eq!(daily_variation(&series("c", vec![100.0, 0.0])).unwrap(), vec![1.0]);
        assert_eq!(daily_variation(&series("c", vec![0.0, 0.0])).unwrap(), vec![0.0]);
        assert_eq!(daily_variation(&series("c", vec![0.0, 5.0])).unwrap(), vec![E_MAX]);
        assert!(matches!(
            daily_variation(&series("c", vec![1.0])),
            Err(AnomalyError::TooShort { got: 1 })
        ));
    }

    // -- matching ----------------------------------------------------------

    #[test]
    fn match_hand_values() {
        let set = |days: &[usize]| days.iter().copied().collect::<BTreeSet<_>>();
        assert_eq!(match_errors_anomalies(&set(&[5]), &set(&[6]), 100).unwrap(), 1.0);
        assert_eq!(match_errors_anomalies(&set(&[5]), &set(&[9]), 100).unwrap(), 0.0);
        assert_eq!(
            match_errors_anomalies(&set(&[5, 10]), &set(&[4, 10]), 100).unwrap(),
            1.0
        );
        // Boundary days are not eligible.
        assert_eq!(match_errors_anomalies(&set(&[1]), &set(&[1, 2]), 10).unwrap(), 0.0);
        assert_eq!(match_errors_anomalies(&set(&[10]), &set(&[9]), 10).unwrap(), 0.0);
        // Half matched.
        assert_eq!(
            match_errors_anomalies(&set(&[5, 50]), &set(&[4]), 100).unwrap(),
            0.5
        );
        assert!(matches!(
            match_errors_anomalies(&set(&[0]), &set(&[]), 10),
            Err(AnomalyError::DayOutOfRange { day: 0, nc: 10 })
        ));
        assert!(matches!(
            match_errors_anomalies(&set(&[5]), &set(&[11]), 10),
            Err(AnomalyError::DayOutOfRange { day: 11, nc: 10 })
        ));
    }

    #[test]
    fn match_fraction_is_monotone_in_anomalies() {
        let ce: BTreeSet<usize> = [3, 7, 12, 20].into_iter().collect();
        let mut ca = BTreeSet::new();
        let mut last = 0.0;
        for day in [2, 8, 13, 19] {
            ca.insert(day);
            let f = match_errors_anomalies(&ce, &ca, 25).unwrap();
            assert!(f >= last, "adding anomaly day {day} decreased the fraction");
            last = f;
        }
        assert_eq!(last, 1.0);
    }

    // -- detection ---------------------------------------------------------

    #[test]
    fn constant_panel_has_no_anomalies() {
        let (panel, graph) = panel_and_graph(&[
            ("a", vec![100.0; 30]),
            ("b", vec![80.0; 30]),
            ("c", vec![60.0; 30]),
        ]);
        let filter = SpectralFilter::accentuate(1.0).unwrap();
        let reports = detect_anomalies(&panel, &graph, &filter).unwrap();
        for report in &reports {
            assert!(report.accentuated().iter().all(|r| r.abs() < 1e-12));
            assert!(report.anomalous_days().is_empty());
            assert!(report.negative_observed_days().is_empty());
            assert_eq!(report.match_fraction(), None);
        }
    }

    #[test]
    fn planted_spike_is_detected() {
        // City "b" jumps 10× on day 15 (1-based) and returns to baseline.
        let mut spiky = vec![100.0; 30];
        spiky[14] = 1000.0;
        let (panel, graph) = panel_and_graph(&[
            ("a", vec![90.0; 30]),
            ("b", spiky),
            ("c", vec![110.0; 30]),
            ("d", vec![70.0; 30]),
        ]);
        let filter = SpectralFilter::accentuate(1.0).unwrap();
        let reports = detect_anomalies(&panel, &graph, &filter).unwrap();
        let b = reports.iter().find(|r| r.city_id() == "b").unwrap();
        assert!(
            b.anomalous_days().contains(&15),
            "spike day missing from CA: {:?}",
            b.anomalous_days()
        );
    }

    #[test]
    fn zero_gain_detection_reduces_to_raw_variation_thresholding() {
        let mut wobble = vec![50.0; 25];
        wobble[10] = 120.0;
        wobble[17] = 20.0;
        let (panel, graph) =
            panel_and_graph(&[("a", wobble.clone()), ("b", vec![55.0; 25]), ("c", vec![45.0; 25])]);
        let filter = SpectralFilter::accentuate(0.0).unwrap();
        let reports = detect_anomalies(&panel, &graph, &filter).unwrap();
        let a = reports.iter().find(|r| r.city_id() == "a").unwrap();
        let raw = daily_variation(&series("a", wobble)).unwrap();
        for (got, want) in a.accentuated().iter().zip(&raw) {
            assert_close(*got, *want, 1e-9, "α=0 must pass variations through");
        }
        let td = threshold(&raw).unwrap();
        let expect: BTreeSet<usize> = raw
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > td)
            .map(|(i, _)| i + 2)
            .collect();
        assert_eq!(a.anomalous_days(), &expect);
    }

    #[test]
    fn negative_counts_are_flagged() {
        let (panel, graph) = panel_and_graph(&[
            ("a", vec![10.0, 12.0, -3.0, 11.0, 10.0]),
            ("b", vec![9.0; 5]),
        ]);
        let filter = SpectralFilter::accentuate(1.0).unwrap();
        let reports = detect_anomalies(&panel, &graph, &filter).unwrap();
        let a = reports.iter().find(|r| r.city_id() == "a").unwrap();
        assert_eq!(a.negative_observed_days().iter().copied().collect::<Vec<_>>(), vec![3]);
    }

    #[test]
    fn detection_validates_graph_and_filter() {
        let (panel, _) = panel_and_graph(&[("a", vec![1.0; 10]), ("b", vec![2.0; 10])]);
        let other = build_graph(
            &[("x".into(), 0.0, 0.0), ("y".into(), 1.0, 1.0)],
            WeightMode::LiteralDistance,
        )
        .unwrap();
        let filter = SpectralFilter::accentuate(1.0).unwrap();
        assert!(matches!(
            detect_anomalies(&panel, &other, &filter),
            Err(AnomalyError::GraphMismatch(_))
        ));
        let (panel, graph) = panel_and_graph(&[("a", vec![1.0; 10]), ("b", vec![2.0; 10])]);
        let lowpass = SpectralFilter::lowpass(0.5).unwrap();
        assert!(matches!(
            detect_anomalies(&panel, &graph, &lowpass),
            Err(AnomalyError::InvalidFilter(_))
        ));
    }

    #[test]
    fn attach_match_fraction_round_trip() {
        let mut spiky = vec![100.0; 20];
        spiky[9] = 700.0;
        let (panel, graph) = panel_and_graph(&[
            ("a", spiky),
            ("b", vec![95.0; 20]),
            ("c", vec![105.0; 20]),
        ]);
        let filter = SpectralFilter::accentuate(1.0).unwrap();
        let mut reports = detect_anomalies(&panel, &graph, &filter).unwrap();
        // Pretend the model erred exactly on the spike day.
        let mut errors = vec![0.01; 20];
        errors[9] = 2.0;
        let es = ErrorSeries::from_errors("a", errors).unwrap();
        let f = attach_match_fraction(&mut reports[0], &es).unwrap();
        assert_eq!(f, 1.0, "spike-day error must be matched by the spike anomaly");
        assert_eq!(reports[0].match_fraction(), Some(1.0));
    }

    // -- normalization -----------------------------------------------------

    #[test]
    fn full_band_normalization_is_identity() {
        let rows = [
            ("a", vec![10.0, 20.0, 30.0, 25.0, 15.0]),
            ("b", vec![5.0, 6.0, 7.0, 8.0, 9.0]),
            ("c", vec![100.0, 90.0, 80.0, 70.0, 60.0]),
        ];
        let (panel, graph) = panel_and_graph(&rows);
        let (normalized, clamped) = normalize_cases(&panel, &graph, 1.0).unwrap();
        assert_eq!(clamped, 0);
        for (city, (_, want)) in normalized.cities().iter().zip(&rows) {
            for (got, want) in city.cases().values().iter().zip(want) {
                assert_close(*got, *want, 1e-6, "κ=1 identity");
            }
        }
    }

    #[test]
    fn equal_cities_pass_through_the_lowpass() {
        let (panel, graph) = panel_and_graph(&[
            ("a", vec![40.0, 50.0, 60.0]),
            ("b", vec![40.0, 50.0, 60.0]),
            ("c", vec![40.0, 50.0, 60.0]),
        ]);
        let (normalized, clamped) = normalize_cases(&panel, &graph, 0.5).unwrap();
        assert_eq!(clamped, 0);
        for city in normalized.cities() {
            for (got, want) in city.cases().values().iter().zip([40.0, 50.0, 60.0]) {
                assert_close(*got, want, 1e-6, "constant cross-city signal");
            }
        }
    }

    #[test]
    fn normalization_removes_high_band_energy_on_the_spike_day() {
        // The spike is kept moderate so no filtered value goes negative:
        // clamping would re-introduce a little high-band energy and the
        // projection would no longer be exact.
        let mut spiky = vec![100.0; 9];
        spiky[4] = 400.0;
        let rows = [
            ("a", vec![100.0; 9]),
            ("b", spiky),
            ("c", vec![100.0; 9]),
            ("d", vec![100.0; 9]),
            ("e", vec![100.0; 9]),
        ];
        let (panel, graph) = panel_and_graph(&rows);
        let day_signal = |p: &PanelDataset, day: usize| {
            GraphSignal::new(p.cities().iter().map(|c| c.cases().values()[day]).collect())
                .unwrap()
        };
        let before = high_band_energy(&graph, &day_signal(&panel, 4), 0.5).unwrap();
        assert!(before > 1.0, "spike must load the high band, got {before}");
        let (normalized, clamped) = normalize_cases(&panel, &graph, 0.5).unwrap();
        assert_eq!(clamped, 0, "moderate spike must not trigger clamping");
        let after = high_band_energy(&graph, &day_signal(&normalized, 4), 0.5).unwrap();
        assert!(after <= 1e-9, "high band must vanish after low-pass, got {after}");
    }

    #[test]
    fn normalization_clamps_negative_outputs_and_preserves_shape() {
        // A deep negative spike in one city drives some filtered values
        // negative in this small panel.
        let (panel, graph) = panel_and_graph(&[
            ("a", vec![1.0, 1.0, 1.0, 1.0]),
            ("b", vec![1.0, -500.0, 1.0, 1.0]),
            ("c", vec![1.0, 1.0, 1.0, 1.0]),
        ]);
        let (normalized, clamped) = normalize_cases(&panel, &graph, 0.4).unwrap();
        assert!(clamped > 0, "expected at least one clamped value");
        for (city, original) in normalized.cities().iter().zip(panel.cities()) {
            assert_eq!(city.cases().len(), original.cases().len());
            assert_eq!(city.cases().start(), original.cases().start());
            assert!(city.cases().values().iter().all(|v| *v >= 0.0));
        }
    }

    // -- report export -----------------------------------------------------

    #[test]
    fn report_export_has_expected_shape() {
        let mut spiky = vec![100.0; 12];
        spiky[6] = 800.0;
        let (panel, graph) = panel_and_graph(&[
            ("a", spiky),
            ("b", vec![95.0; 12]),
            ("c", vec![105.0; 12]),
        ]);
        let filter = SpectralFilter::accentuate(1.0).unwrap();
        let mut reports = detect_anomalies(&panel, &graph, &filter).unwrap();
        let mut errors = vec![0.02; 12];
        errors[6] = 1.0;
        let es = ErrorSeries::from_errors("a", errors).unwrap();
        attach_match_fraction(&mut reports[0], &es).unwrap();

        let mut buf = Vec::new();
        write_report(&mut buf, &es, &reports[0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "city_id,day,e,r,in_CE,in_CA,matched");
        assert_eq!(lines.len(), 1 + 12 + 1, "header + days + summary");
        assert!(lines[1].starts_with("a,1,0.02,,"), "day 1 has no variation: {}", lines[1]);
        assert!(lines.last().unwrap().starts_with("# match_fraction = "));
    }
}
