//! CSV ingestion, gap accounting, ARIMA gap imputation, and the
//! exogenous lag.
//!
//! Four canonical CSV schemas feed the pipeline:
//!
//! | file       | columns                                              |
//! |------------|------------------------------------------------------|
//! | cases      | `date,city_id,new_cases`                             |
//! | meteo      | `date,city_id,rain_mm,max_temp_c,min_temp_c,humidity_pct` |
//! | mobility   | `date,city_id,rr,gp,pa,ts,wo,re`                     |
//! | coords     | `city_id,lat,lon`                                    |
//!
//! Each city's series runs from its own first cases row to the common
//! final date (the earliest last-cases date across cities). A date row
//! that is absent counts as a gap in all of that file's variables and is
//! reported once at group granularity; an empty field is a gap in that
//! variable alone. Gaps are filled with a last-observation-carried-forward
//! placeholder at load time (leading gaps are backfilled) and recorded,
//! so that [`impute_gaps`] can later replace the placeholders with
//! model-based forecasts trained on the data before each gap.

use crate::arimax::{self, ArimaxError};
use crate::timeseries::{CityRecord, PanelDataset, TimeSeries, TimeSeriesError};
use crate::timeseries::{METEO_VARS, MOBILITY_VARS};
use chrono::NaiveDate;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Errors from loading, imputation, and lag application.
#[derive(Debug, Error)]
pub enum IngestError {
    /// Filesystem failure for a named path.
    #[error("cannot read '{path}': {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    /// A malformed row or field, with its 1-based line number.
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    /// Manifest problems: missing keys, unknown keys, bad values.
    #[error("manifest error: {0}")]
    Manifest(String),
    /// A secondary file references a city with no cases, or a cases city
    /// lacks coordinates.
    #[error("{path}: unknown city '{city}' ({detail})")]
    UnknownCity { path: PathBuf, city: String, detail: String },
    /// Per-city dates must be strictly increasing.
    #[error("{path}:{line}: dates for city '{city}' are not strictly increasing")]
    DateOrder { path: PathBuf, line: u64, city: String },
    /// A variable with no observed values at all cannot be loaded.
    #[error("city '{city}': variable '{variable}' has no observed values")]
    NoData { city: String, variable: String },
    /// A gap without enough pre-gap history cannot be imputed.
    #[error(
        "city '{city}', variable '{variable}': gap at offset {gap_start} has only \
         {available} training days (need at least {needed})"
    )]
    ShortPreGap {
        city: String,
        variable: String,
        gap_start: usize,
        available: usize,
        needed: usize,
    },
    /// Model selection or forecasting failed while filling a gap.
    #[error("city '{city}', variable '{variable}': imputation failed: {source}")]
    Imputation {
        city: String,
        variable: String,
        #[source]
        source: ArimaxError,
    },
    /// The exogenous lag must be shorter than the series.
    #[error("lag of {lag} days on a series of {len} days")]
    BadLag { lag: usize, len: usize },
    /// Series passed together must share start date and length.
    #[error("misaligned series: {0}")]
    Misaligned(String),
    /// A city's data ends before another city's begins.
    #[error("city '{city}' first reports cases on {start}, after the common final date {end}")]
    NoOverlap { city: String, start: NaiveDate, end: NaiveDate },
    /// A gap report does not match the panel it is applied to.
    #[error("gap report mismatch: {0}")]
    BadGap(String),
    /// Series-container failures while assembling records.
    #[error(transparent)]
    Series(#[from] TimeSeriesError),
}

/// Minimum pre-gap training days required by [`impute_gaps`].
pub const MIN_TRAINING_DAYS: usize = 20;

/// Paths and options describing one dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    /// Cases CSV path.
    pub cases_path: PathBuf,
    /// Meteorological CSV path.
    pub meteo_path: PathBuf,
    /// Mobility CSV path.
    pub mobility_path: PathBuf,
    /// Coordinates CSV path.
    pub coords_path: PathBuf,
    /// `chrono` date pattern for every file (default `%Y-%m-%d`).
    pub date_format: String,
    /// Exogenous lag in days (default 5).
    pub lag_days: usize,
}

impl DatasetManifest {
    /// A manifest with default date format and lag.
    pub fn new(
        cases_path: impl Into<PathBuf>,
        meteo_path: impl Into<PathBuf>,
        mobility_path: impl Into<PathBuf>,
        coords_path: impl Into<PathBuf>,
    ) -> Self {
        Self {
            cases_path: cases_path.into(),
            meteo_path: meteo_path.into(),
            mobility_path: mobility_path.into(),
            coords_path: coords_path.into(),
            date_format: "%Y-%m-%d".to_string(),
            lag_days: 5,
        }
    }

    /// Parses `key = value` manifest text. Relative paths are resolved
    /// against `base_dir`; `#` starts a comment.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, IngestError> {
        let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                IngestError::Manifest(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            if fields.insert(key, value).is_some() {
                return Err(IngestError::Manifest(format!("duplicate key '{key}'")));
            }
        }
        const KNOWN: [&str; 6] = [
            "cases_path",
            "meteo_path",
            "mobility_path",
            "coords_path",
            "date_format",
            "lag_days",
        ];
        for key in fields.keys() {
            if !KNOWN.contains(key) {
                return Err(IngestError::Manifest(format!("unknown key '{key}'")));
            }
        }
        let path = |key: &str| -> Result<PathBuf, IngestError> {
            let raw = fields
                .get(key)
                .ok_or_else(|| IngestError::Manifest(format!("missing key '{key}'")))?;
            let p = PathBuf::from(raw);
            Ok(if p.is_absolute() { p } else { base_dir.join(p) })
        };
        let mut manifest = Self::new(
            path("cases_path")?,
            path("meteo_path")?,
            path("mobility_path")?,
            path("coords_path")?,
        );
        if let Some(fmt) = fields.get("date_format") {
            manifest.date_format = (*fmt).to_string();
        }
        if let Some(raw) = fields.get("lag_days") {
            manifest.lag_days = raw.parse().map_err(|e| {
                IngestError::Manifest(format!("lag_days '{raw}': {e}"))
            })?;
        }
        Ok(manifest)
    }

    /// Reads and parses a manifest file; relative paths resolve against
    /// the manifest's own directory.
    pub fn from_file(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }
}

/// One contiguous stretch of missing data in a city's series.
///
/// Offsets are 0-based, inclusive, relative to the city's series start.
/// `variable` names a single column, or a whole file group
/// (`meteorological`, `mobility`) when entire date rows were absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapReport {
    /// City identifier.
    pub city_id: String,
    /// Variable name or file-group name.
    pub variable: String,
    /// First missing offset (inclusive).
    pub gap_start: usize,
    /// Last missing offset (inclusive).
    pub gap_end: usize,
    /// How the gap was filled; `"unfilled"` until imputation runs.
    pub imputation_method: String,
}

/// One parsed data row: date, city, and the value columns in file order
/// (`None` for empty fields).
struct RawRow {
    date: NaiveDate,
    city: String,
    values: Vec<Option<f64>>,
    line: u64,
}

fn read_csv_rows(
    path: &Path,
    date_format: &str,
    expected_header: &[&str],
) -> Result<Vec<RawRow>, IngestError> {
    let parse_err = |line: u64, message: String| IngestError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => IngestError::Io {
                path: path.to_path_buf(),
                source: io::Error::other(e.to_string()),
            },
            _ => parse_err(1, e.to_string()),
        })?;
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected_header {
        return Err(parse_err(
            1,
            format!("expected header '{}', got '{}'", expected_header.join(","), got.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, csv::Position::line);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, csv::Position::line);
        if record.len() != expected_header.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, got {}", expected_header.len(), record.len()),
            ));
        }
        let date = NaiveDate::parse_from_str(record[0].trim(), date_format)
            .map_err(|e| parse_err(line, format!("bad date '{}': {e}", &record[0])))?;
        let city = record[1].trim().to_string();
        if city.is_empty() {
            return Err(parse_err(line, "empty city_id".into()));
        }
        let values = record
            .iter()
            .skip(2)
            .enumerate()
            .map(|(col, field)| {
                let field = field.trim();
                if field.is_empty() {
                    Ok(None)
                } else {
                    field.parse::<f64>().map(Some).map_err(|e| {
                        parse_err(
                            line,
                            format!("bad value '{field}' in column '{}': {e}", expected_header[col + 2]),
                        )
                    })
                }
            })
            .collect::<Result<_, _>>()?;
        rows.push(RawRow { date, city, values, line });
    }
    Ok(rows)
}

/// Per-city observations for one file, on the city's date window:
/// `observed[v][i]` is variable `v` at offset `i` and `row_present[i]`
/// says whether the date row existed at all.
struct CityObservations {
    observed: Vec<Vec<Option<f64>>>,
    row_present: Vec<bool>,
}

/// Distributes file rows onto each city's date window, enforcing per-city
/// strict date ordering and known-city references.
fn collect_observations(
    rows: &[RawRow],
    n_vars: usize,
    windows: &BTreeMap<String, (NaiveDate, usize)>,
    path: &Path,
) -> Result<BTreeMap<String, CityObservations>, IngestError> {
    let mut per_city: BTreeMap<String, CityObservations> = BTreeMap::new();
    let mut last_date: BTreeMap<&str, NaiveDate> = BTreeMap::new();
    for row in rows {
        let Some((start, len)) = windows.get(&row.city) else {
            return Err(IngestError::UnknownCity {
                path: path.to_path_buf(),
                city: row.city.clone(),
                detail: "no cases recorded for this city".into(),
            });
        };
        if let Some(prev) = last_date.get(row.city.as_str()) {
            if row.date <= *prev {
                return Err(IngestError::DateOrder {
                    path: path.to_path_buf(),
                    line: row.line,
                    city: row.city.clone(),
                });
            }
        }
        last_date.insert(&row.city, row.date);
        let offset = (row.date - *start).num_days();
        if offset < 0 || offset as usize >= *len {
            continue; // outside the loaded window
        }
        let entry = per_city.entry(row.city.clone()).or_insert_with(|| CityObservations {
            observed: vec![vec![None; *len]; n_vars],
            row_present: vec![false; *len],
        });
        entry.row_present[offset as usize] = true;
        for (v, value) in row.values.iter().enumerate() {
            entry.observed[v][offset as usize] = *value;
        }
    }
    Ok(per_city)
}

/// Maximal runs of `None` as (start, end) inclusive offsets.
fn missing_runs(observed: &[Option<f64>]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut open: Option<usize> = None;
    for (i, v) in observed.iter().enumerate() {
        match (v, open) {
            (None, None) => open = Some(i),
            (Some(_), Some(s)) => {
                runs.push((s, i - 1));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        runs.push((s, observed.len() - 1));
    }
    runs
}

/// Fills `None`s in place by carrying the last observation forward;
/// leading gaps are backfilled from the first observation.
fn fill_placeholders(observed: &[Option<f64>]) -> Option<Vec<f64>> {
    let first = observed.iter().flatten().next().copied()?;
    let mut last = first;
    Some(
        observed
            .iter()
            .map(|v| {
                if let Some(v) = v {
                    last = *v;
                }
                last
            })
            .collect(),
    )
}

/// Builds `(name, series)` pairs for one file's variables plus the gap
/// reports, coalescing runs caused purely by absent rows into a single
/// group-level report.
fn build_variables(
    city: &str,
    start: NaiveDate,
    obs: &CityObservations,
    var_names: &[&str],
    group: &str,
) -> Result<(Vec<(String, TimeSeries)>, Vec<GapReport>), IngestError> {
    let mut series = Vec::with_capacity(var_names.len());
    let mut per_var_runs: Vec<Vec<(usize, usize)>> = Vec::with_capacity(var_names.len());
    for (v, name) in var_names.iter().enumerate() {
        let filled = fill_placeholders(&obs.observed[v]).ok_or_else(|| IngestError::NoData {
            city: city.to_string(),
            variable: (*name).to_string(),
        })?;
        series.push(((*name).to_string(), TimeSeries::new(*name, start, filled)?));
        per_var_runs.push(missing_runs(&obs.observed[v]));
    }

    // A run is row-caused when no date row exists anywhere inside it; a
    // row-caused run necessarily appears in every variable, so it is
    // reported once for the whole group.
    let row_caused = |(s, e): &(usize, usize)| (*s..=*e).all(|i| !obs.row_present[i]);
    let mut reports = Vec::new();
    let mut seen_group: Vec<(usize, usize)> = Vec::new();
    for (runs, name) in per_var_runs.iter().zip(var_names) {
        for run in runs {
            if var_names.len() > 1 && row_caused(run) {
                if !seen_group.contains(run) {
                    seen_group.push(*run);
                    reports.push(GapReport {
                        city_id: city.to_string(),
                        variable: group.to_string(),
                        gap_start: run.0,
                        gap_end: run.1,
                        imputation_method: "unfilled".to_string(),
                    });
                }
            } else {
                reports.push(GapReport {
                    city_id: city.to_string(),
                    variable: (*name).to_string(),
                    gap_start: run.0,
                    gap_end: run.1,
                    imputation_method: "unfilled".to_string(),
                });
            }
        }
    }
    reports.sort_by(|a, b| a.gap_start.cmp(&b.gap_start).then(a.variable.cmp(&b.variable)));
    Ok((series, reports))
}

/// Loads the four CSV files into a panel, recording (but not yet
/// imputing) every gap. Values inside gaps hold a last-observation
/// placeholder until [`impute_gaps`] replaces them.
pub fn load_panel(
    manifest: &DatasetManifest,
) -> Result<(PanelDataset, Vec<GapReport>), IngestError> {
    let fmt = manifest.date_format.as_str();
    let coords = read_coords(&manifest.coords_path)?;

    // Cases define each city's window.
    let case_rows =
        read_csv_rows(&manifest.cases_path, fmt, &["date", "city_id", "new_cases"])?;
    if case_rows.is_empty() {
        return Err(IngestError::Parse {
            path: manifest.cases_path.clone(),
            line: 1,
            message: "no data rows".into(),
        });
    }
    let mut first_date: BTreeMap<String, NaiveDate> = BTreeMap::new();
    let mut last_date: BTreeMap<String, NaiveDate> = BTreeMap::new();
    let mut prev_date: BTreeMap<String, (NaiveDate, u64)> = BTreeMap::new();
    for row in &case_rows {
        if let Some((prev, _)) = prev_date.get(&row.city) {
            if row.date <= *prev {
                return Err(IngestError::DateOrder {
                    path: manifest.cases_path.clone(),
                    line: row.line,
                    city: row.city.clone(),
                });
            }
        }
        prev_date.insert(row.city.clone(), (row.date, row.line));
        first_date.entry(row.city.clone()).or_insert(row.date);
        last_date.insert(row.city.clone(), row.date);
    }
    let common_end = *last_date.values().min().expect("non-empty cases file");
    let mut windows: BTreeMap<String, (NaiveDate, usize)> = BTreeMap::new();
    for (city, start) in &first_date {
        let len = (common_end - *start).num_days() + 1;
        if len <= 0 {
            return Err(IngestError::NoOverlap {
                city: city.clone(),
                start: *start,
                end: common_end,
            });
        }
        windows.insert(city.clone(), (*start, len as usize));
    }

    // Every cases city needs coordinates.
    for city in windows.keys() {
        if !coords.contains_key(city) {
            return Err(IngestError::UnknownCity {
                path: manifest.coords_path.clone(),
                city: city.clone(),
                detail: "city has cases but no coordinates".into(),
            });
        }
    }
    for city in coords.keys() {
        if !windows.contains_key(city) {
            return Err(IngestError::UnknownCity {
                path: manifest.coords_path.clone(),
                city: city.clone(),
                detail: "coordinates given but no cases recorded".into(),
            });
        }
    }

    let case_obs = collect_observations(&case_rows, 1, &windows, &manifest.cases_path)?;
    let meteo_rows = read_csv_rows(&manifest.meteo_path, fmt, &{
        let mut h = vec!["date", "city_id"];
        h.extend_from_slice(&METEO_VARS);
        h
    })?;
    let meteo_obs =
        collect_observations(&meteo_rows, METEO_VARS.len(), &windows, &manifest.meteo_path)?;
    let mobility_rows = read_csv_rows(&manifest.mobility_path, fmt, &{
        let mut h = vec!["date", "city_id"];
        h.extend_from_slice(&MOBILITY_VARS);
        h
    })?;
    let mobility_obs = collect_observations(
        &mobility_rows,
        MOBILITY_VARS.len(),
        &windows,
        &manifest.mobility_path,
    )?;

    let mut cities = Vec::with_capacity(windows.len());
    let mut gaps = Vec::new();
    for (city, (start, _len)) in &windows {
        let obs = case_obs.get(city).expect("every windowed city has cases rows");
        let (mut case_series, case_gaps) =
            build_variables(city, *start, obs, &["new_cases"], "new_cases")?;
        gaps.extend(case_gaps);
        let cases = case_series.pop().expect("one cases variable").1;

        let meteo = match meteo_obs.get(city) {
            Some(obs) => {
                let (series, m_gaps) =
                    build_variables(city, *start, obs, &METEO_VARS, "meteorological")?;
                gaps.extend(m_gaps);
                series
            }
            None => Vec::new(),
        };
        let mobility = match mobility_obs.get(city) {
            Some(obs) => {
                let (series, m_gaps) =
                    build_variables(city, *start, obs, &MOBILITY_VARS, "mobility")?;
                gaps.extend(m_gaps);
                series
            }
            None => Vec::new(),
        };

        let (lat, lon) = coords[city];
        cities.push(CityRecord::new(city.clone(), lat, lon, cases, meteo, mobility)?);
    }
    // Stable report order: city, then start offset, then variable.
    gaps.sort_by(|a, b| {
        a.city_id
            .cmp(&b.city_id)
            .then(a.gap_start.cmp(&b.gap_start))
            .then(a.variable.cmp(&b.variable))
    });
    Ok((PanelDataset::new(cities)?, gaps))
}

fn read_coords(path: &Path) -> Result<BTreeMap<String, (f64, f64)>, IngestError> {
    let parse_err = |line: u64, message: String| IngestError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => IngestError::Io {
                path: path.to_path_buf(),
                source: io::Error::other(e.to_string()),
            },
            _ => parse_err(1, e.to_string()),
        })?;
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != ["city_id", "lat", "lon"] {
        return Err(parse_err(1, format!("expected header 'city_id,lat,lon', got '{}'", got.join(","))));
    }
    let mut coords = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, csv::Position::line);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, csv::Position::line);
        if record.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, got {}", record.len())));
        }
        let city = record[0].trim().to_string();
        let lat: f64 = record[1]
            .trim()
            .parse()
            .map_err(|e| parse_err(line, format!("bad lat '{}': {e}", &record[1])))?;
        let lon: f64 = record[2]
            .trim()
            .parse()
            .map_err(|e| parse_err(line, format!("bad lon '{}': {e}", &record[2])))?;
        if coords.insert(city.clone(), (lat, lon)).is_some() {
            return Err(parse_err(line, format!("duplicate coordinates for city '{city}'")));
        }
    }
    Ok(coords)
}

/// The variables a group-level gap report expands to.
fn group_members(variable: &str) -> Vec<String> {
    match variable {
        "meteorological" => METEO_VARS.iter().map(|v| v.to_string()).collect(),
        "mobility" => MOBILITY_VARS.iter().map(|v| v.to_string()).collect(),
        other => vec![other.to_string()],
    }
}

/// Replaces gap placeholders with multi-step forecasts.
///
/// Per gap and variable, an order is selected (no exogenous inputs) on
/// the data before the gap and the fitted model forecasts across it.
/// Gaps are processed in chronological order per city, so earlier filled
/// values become training data for later gaps. Each report's
/// `imputation_method` is updated with the selected order(s).
pub fn impute_gaps(
    panel: &PanelDataset,
    gaps: &mut [GapReport],
) -> Result<PanelDataset, IngestError> {
    let mut cities: Vec<CityRecord> = panel.cities().to_vec();

    let mut order: Vec<usize> = (0..gaps.len()).collect();
    order.sort_by(|&a, &b| {
        gaps[a]
            .city_id
            .cmp(&gaps[b].city_id)
            .then(gaps[a].gap_start.cmp(&gaps[b].gap_start))
            .then(gaps[a].variable.cmp(&gaps[b].variable))
    });

    for idx in order {
        let gap = &gaps[idx];
        let city = cities
            .iter_mut()
            .find(|c| c.city_id() == gap.city_id)
            .ok_or_else(|| IngestError::BadGap(format!("unknown city '{}'", gap.city_id)))?;
        let mut methods = Vec::new();
        for variable in group_members(&gap.variable) {
            let series = if variable == "new_cases" {
                city.cases()
            } else {
                city.covariate(&variable).ok_or_else(|| {
                    IngestError::BadGap(format!(
                        "city '{}' has no variable '{variable}'",
                        gap.city_id
                    ))
                })?
            };
            if gap.gap_end >= series.len() || gap.gap_start > gap.gap_end {
                return Err(IngestError::BadGap(format!(
                    "gap {}..={} outside series '{}' of length {}",
                    gap.gap_start,
                    gap.gap_end,
                    variable,
                    series.len()
                )));
            }
            if gap.gap_start < MIN_TRAINING_DAYS {
                return Err(IngestError::ShortPreGap {
                    city: gap.city_id.clone(),
                    variable,
                    gap_start: gap.gap_start,
                    available: gap.gap_start,
                    needed: MIN_TRAINING_DAYS,
                });
            }
            let history = series.slice(0, gap.gap_start)?;
            let steps = gap.gap_end - gap.gap_start + 1;
            let wrap = |source: ArimaxError| IngestError::Imputation {
                city: gap.city_id.clone(),
                variable: variable.clone(),
                source,
            };
            let selection =
                arimax::select_order(&history, &[], arimax::OrderBounds::default())
                    .map_err(wrap)?;
            let forecast =
                arimax::forecast(&selection.model, &history, &[], &[], steps).map_err(wrap)?;
            let mut values = series.values().to_vec();
            values[gap.gap_start..=gap.gap_end].copy_from_slice(&forecast);
            let updated = series.with_values(values)?;
            if variable == "new_cases" {
                *city.cases_mut() = updated;
            } else {
                *city.series_mut(&variable).expect("variable existence checked above") =
                    updated;
            }
            methods.push((variable, selection.model.order()));
        }
        let method = if methods.len() == 1 {
            let (_, order) = &methods[0];
            format!("arima{order}")
        } else {
            let mut s = String::new();
            for (i, (variable, order)) in methods.iter().enumerate() {
                if i > 0 {
                    s.push(';');
                }
                let _ = write!(s, "{variable}=arima{order}");
            }
            s
        };
        gaps[idx].imputation_method = method;
    }
    Ok(PanelDataset::new(cities)?)
}

/// Aligns day-`t` cases with day-`t − lag` exogenous values.
///
/// The first `lag_days` case values (with no lagged covariate) are
/// dropped; exogenous series are trimmed at the end and re-stamped onto
/// the case timeline, so all outputs share dates and shrink by
/// `lag_days`.
pub fn apply_lag(
    cases: &TimeSeries,
    exog: &[&TimeSeries],
    lag_days: usize,
) -> Result<(TimeSeries, Vec<TimeSeries>), IngestError> {
    for x in exog {
        if x.start() != cases.start() || x.len() != cases.len() {
            return Err(IngestError::Misaligned(format!(
                "exogenous series '{}' does not share the case series' dates",
                x.name()
            )));
        }
    }
    if lag_days >= cases.len() {
        return Err(IngestError::BadLag { lag: lag_days, len: cases.len() });
    }
    let n = cases.len() - lag_days;
    let lagged_cases = cases.slice(lag_days, cases.len())?;
    let lagged_exog = exog
        .iter()
        .map(|x| {
            Ok(TimeSeries::new(
                x.name(),
                lagged_cases.start(),
                x.values()[..n].to_vec(),
            )?)
        })
        .collect::<Result<Vec<_>, IngestError>>()?;
    Ok((lagged_cases, lagged_exog))
}

// ---------------------------------------------------------------------------
// Canonical writers
// ---------------------------------------------------------------------------

/// Dates of the panel's full span (earliest city start to common end).
fn panel_dates(panel: &PanelDataset) -> Vec<NaiveDate> {
    let start = panel
        .cities()
        .iter()
        .map(|c| c.cases().start())
        .min()
        .expect("panels are non-empty");
    let (_, end) = panel.date_range();
    let mut dates = Vec::new();
    let mut d = start;
    while d <= end {
        dates.push(d);
        d = d.succ_opt().expect("date range fits in chrono");
    }
    dates
}

/// Writes the canonical cases CSV (`date,city_id,new_cases`), rows
/// ordered by date then city.
pub fn write_cases_csv<W: io::Write>(panel: &PanelDataset, out: &mut W) -> io::Result<()> {
    writeln!(out, "date,city_id,new_cases")?;
    for date in panel_dates(panel) {
        for city in panel.cities() {
            if let Some(i) = city.cases().index_of(date) {
                writeln!(out, "{},{},{}", date, city.city_id(), city.cases().values()[i])?;
            }
        }
    }
    Ok(())
}

fn write_group_csv<W: io::Write>(
    panel: &PanelDataset,
    out: &mut W,
    vars: &[&str],
) -> io::Result<()> {
    for date in panel_dates(panel) {
        for city in panel.cities() {
            let series: Vec<&TimeSeries> =
                vars.iter().filter_map(|v| city.covariate(v)).collect();
            if series.len() != vars.len() {
                continue; // city has no data for this file
            }
            if let Some(i) = series[0].index_of(date) {
                write!(out, "{},{}", date, city.city_id())?;
                for s in &series {
                    write!(out, ",{}", s.values()[i])?;
                }
                writeln!(out)?;
            }
        }
    }
    Ok(())
}

/// Writes the canonical meteorological CSV.
pub fn write_meteo_csv<W: io::Write>(panel: &PanelDataset, out: &mut W) -> io::Result<()> {
    writeln!(out, "date,city_id,{}", METEO_VARS.join(","))?;
    write_group_csv(panel, out, &METEO_VARS)
}

/// Writes the canonical mobility CSV.
pub fn write_mobility_csv<W: io::Write>(panel: &PanelDataset, out: &mut W) -> io::Result<()> {
    writeln!(out, "date,city_id,{}", MOBILITY_VARS.join(","))?;
    write_group_csv(panel, out, &MOBILITY_VARS)
}

/// Writes the canonical coordinates CSV, rows ordered by city.
pub fn write_coords_csv<W: io::Write>(panel: &PanelDataset, out: &mut W) -> io::Result<()> {
    writeln!(out, "city_id,lat,lon")?;
    for city in panel.cities() {
        writeln!(out, "{},{},{}", city.city_id(), city.lat(), city.lon())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;
    use tempfile::TempDir;

    /// Writes the four canonical files for a clean two-city fixture and
    /// returns its manifest. City "rio" starts two days after "sao".
    fn clean_fixture(dir: &Path) -> DatasetManifest {
        let cases = "\
date,city_id,new_cases
2020-03-01,sao,10
2020-03-02,sao,12
2020-03-03,rio,5
2020-03-03,sao,14
2020-03-04,rio,6
2020-03-04,sao,13
2020-03-05,rio,8
2020-03-05,sao,15
2020-03-06,rio,7
2020-03-06,sao,16
";
        let meteo = "\
date,city_id,rain_mm,max_temp_c,min_temp_c,humidity_pct
2020-03-01,sao,0,30,20,70
2020-03-02,sao,1.5,29,19,72
2020-03-03,rio,0,33,24,65
2020-03-03,sao,0,31,21,68
2020-03-04,rio,2,32,23,66
2020-03-04,sao,0.5,30,20,71
2020-03-05,rio,0,34,25,60
2020-03-05,sao,0,32,22,69
2020-03-06,rio,1,33,24,63
2020-03-06,sao,3,28,18,75
";
        let mobility = "\
date,city_id,rr,gp,pa,ts,wo,re
2020-03-01,sao,-10,-20,-30,-40,-15,5
2020-03-02,sao,-11,-21,-31,-41,-16,6
2020-03-03,rio,-5,-15,-25,-35,-10,2
2020-03-03,sao,-12,-22,-32,-42,-17,7
2020-03-04,rio,-6,-16,-26,-36,-11,3
2020-03-04,sao,-13,-23,-33,-43,-18,8
2020-03-05,rio,-7,-17,-27,-37,-12,4
2020-03-05,sao,-14,-24,-34,-44,-19,9
2020-03-06,rio,-8,-18,-28,-38,-13,5
2020-03-06,sao,-15,-25,-35,-45,-20,10
";
        let coords = "\
city_id,lat,lon
rio,-22.9,-43.2
sao,-23.55,-46.63
";
        fs::write(dir.join("cases.csv"), cases).unwrap();
        fs::write(dir.join("meteo.csv"), meteo).unwrap();
        fs::write(dir.join("mobility.csv"), mobility).unwrap();
        fs::write(dir.join("coords.csv"), coords).unwrap();
        DatasetManifest::new(
            dir.join("cases.csv"),
            dir.join("meteo.csv"),
            dir.join("mobility.csv"),
            dir.join("coords.csv"),
        )
    }

    // -- manifest ----------------------------------------------------------

    #[test]
    fn manifest_parses_with_defaults_and_overrides() {
        let base = Path::new("/data");
        let text = "\
# dataset description
cases_path = cases.csv
meteo_path = /abs/meteo.csv
mobility_path = mobility.csv
coords_path = coords.csv
";
        let m = DatasetManifest::parse(text, base).unwrap();
        assert_eq!(m.cases_path, Path::new("/data/cases.csv"));
        assert_eq!(m.meteo_path, Path::new("/abs/meteo.csv"));
        assert_eq!(m.date_format, "%Y-%m-%d");
        assert_eq!(m.lag_days, 5);

        let text = format!("{text}date_format = %d/%m/%Y\nlag_days = 7\n");
        let m = DatasetManifest::parse(&text, base).unwrap();
        assert_eq!(m.date_format, "%d/%m/%Y");
        assert_eq!(m.lag_days, 7);
    }

    #[test]
    fn manifest_rejects_bad_input() {
        let base = Path::new(".");
        assert!(matches!(
            DatasetManifest::parse("cases_path = a\n", base),
            Err(IngestError::Manifest(_))
        ));
        let full = "cases_path=a\nmeteo_path=b\nmobility_path=c\ncoords_path=d\n";
        assert!(DatasetManifest::parse(full, base).is_ok());
        assert!(matches!(
            DatasetManifest::parse(&format!("{full}typo_key=x\n"), base),
            Err(IngestError::Manifest(_))
        ));
        assert!(matches!(
            DatasetManifest::parse(&format!("{full}lag_days=-3\n"), base),
            Err(IngestError::Manifest(_))
        ));
    }

    // -- load --------------------------------------------------------------

    #[test]
    fn clean_fixture_loads_without_gaps() {
        let dir = TempDir::new().unwrap();
        let manifest = clean_fixture(dir.path());
        let (panel, gaps) = load_panel(&manifest).unwrap();
        assert!(gaps.is_empty(), "clean fixture must have no gaps: {gaps:?}");
        assert_eq!(panel.cities().len(), 2);

        let sao = panel.city("sao").unwrap();
        assert_eq!(sao.cases().start(), NaiveDate::from_ymd_opt(2020, 3, 1).unwrap());
        assert_eq!(sao.cases().values(), &[10.0, 12.0, 14.0, 13.0, 15.0, 16.0]);
        assert_eq!(sao.covariate("rain_mm").unwrap().values()[1], 1.5);
        assert_eq!(sao.covariate("re").unwrap().values()[5], 10.0);

        let rio = panel.city("rio").unwrap();
        assert_eq!(rio.cases().start(), NaiveDate::from_ymd_opt(2020, 3, 3).unwrap());
        assert_eq!(rio.cases().len(), 4, "rio runs from its first case to the common end");
    }

    #[test]
    fn missing_mobility_week_yields_one_group_gap() {
        let dir = TempDir::new().unwrap();
        let manifest = clean_fixture(dir.path());
        // Rewrite with a longer span and drop a 7-day block of sao
        // mobility rows.
        let mut cases = String::from("date,city_id,new_cases\n");
        let mut mobility = String::from("date,city_id,rr,gp,pa,ts,wo,re\n");
        let mut meteo = String::from("date,city_id,rain_mm,max_temp_c,min_temp_c,humidity_pct\n");
        for day in 1..=20 {
            let date = NaiveDate::from_ymd_opt(2020, 3, day).unwrap();
            cases.push_str(&format!("{date},sao,{}\n", 10 + day));
            meteo.push_str(&format!("{date},sao,0,30,20,70\n"));
            if !(8..=14).contains(&day) {
                mobility.push_str(&format!("{date},sao,-1,-2,-3,-4,-5,-6\n"));
            }
        }
        fs::write(&manifest.cases_path, cases).unwrap();
        fs::write(&manifest.meteo_path, meteo).unwrap();
        fs::write(&manifest.mobility_path, mobility).unwrap();
        fs::write(&manifest.coords_path, "city_id,lat,lon\nsao,-23.55,-46.63\n").unwrap();

        let (panel, gaps) = load_panel(&manifest).unwrap();
        assert_eq!(gaps.len(), 1, "a missing row block is one group gap: {gaps:?}");
        let gap = &gaps[0];
        assert_eq!(gap.city_id, "sao");
        assert_eq!(gap.variable, "mobility");
        assert_eq!(gap.gap_end - gap.gap_start + 1, 7, "gap spans 7 days");
        assert_eq!(gap.gap_start, 7, "offsets are 0-based from the city start");
        assert_eq!(gap.imputation_method, "unfilled");
        // Placeholder fill carries the last observation forward.
        let rr = panel.city("sao").unwrap().covariate("rr").unwrap();
        assert_eq!(rr.values()[9], rr.values()[6]);
    }

    #[test]
    fn empty_field_yields_a_single_variable_gap() {
        let dir = TempDir::new().unwrap();
        let manifest = clean_fixture(dir.path());
        let meteo = fs::read_to_string(&manifest.meteo_path)
            .unwrap()
            .replace("2020-03-04,sao,0.5,30,20,71", "2020-03-04,sao,,30,20,71");
        fs::write(&manifest.meteo_path, meteo).unwrap();
        let (panel, gaps) = load_panel(&manifest).unwrap();
        assert_eq!(gaps.len(), 1);
        assert_eq!(gaps[0].variable, "rain_mm");
        assert_eq!((gaps[0].gap_start, gaps[0].gap_end), (3, 3));
        // Placeholder: previous day's rain.
        let rain = panel.city("sao").unwrap().covariate("rain_mm").unwrap();
        assert_eq!(rain.values()[3], rain.values()[2]);
    }

    #[test]
    fn shuffled_dates_are_rejected() {
        let dir = TempDir::new().unwrap();
        let manifest = clean_fixture(dir.path());
        let cases = "\
date,city_id,new_cases
2020-03-02,sao,12
2020-03-01,sao,10
";
        fs::write(&manifest.cases_path, cases).unwrap();
        let err = load_panel(&manifest).unwrap_err();
        assert!(matches!(err, IngestError::DateOrder { line: 3, .. }), "got {err}");
    }

    #[test]
    fn unknown_city_in_secondary_file_is_rejected() {
        let dir = TempDir::new().unwrap();
        let manifest = clean_fixture(dir.path());
        let mut meteo = fs::read_to_string(&manifest.meteo_path).unwrap();
        meteo.push_str("2020-03-06,ghost,0,30,20,70\n");
        fs::write(&manifest.meteo_path, meteo).unwrap();
        let err = load_panel(&manifest).unwrap_err();
        assert!(
            matches!(err, IngestError::UnknownCity { ref city, .. } if city == "ghost"),
            "got {err}"
        );
    }

    #[test]
    fn malformed_rows_carry_line_numbers() {
        let dir = TempDir::new().unwrap();
        let manifest = clean_fixture(dir.path());
        let cases = "\
date,city_id,new_cases
2020-03-01,sao,10
2020-03-02,sao,not_a_number
";
        fs::write(&manifest.cases_path, cases).unwrap();
        let err = load_panel(&manifest).unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 3, .. }), "got {err}");
    }

    #[test]
    fn round_trip_reproduces_clean_fixture_files() {
        let dir = TempDir::new().unwrap();
        let manifest = clean_fixture(dir.path());
        let (panel, _) = load_panel(&manifest).unwrap();

        let render = |f: fn(&PanelDataset, &mut Vec<u8>) -> io::Result<()>| {
            let mut buf = Vec::new();
            f(&panel, &mut buf).unwrap();
            String::from_utf8(buf).unwrap()
        };
        assert_eq!(render(write_cases_csv), fs::read_to_string(&manifest.cases_path).unwrap());
        assert_eq!(render(write_meteo_csv), fs::read_to_string(&manifest.meteo_path).unwrap());
        assert_eq!(
            render(write_mobility_csv),
            fs::read_to_string(&manifest.mobility_path).unwrap()
        );
        assert_eq!(render(write_coords_csv), fs::read_to_string(&manifest.coords_path).unwrap());
    }

    // -- imputation --------------------------------------------------------

    /// A single-city panel with the given case values and a hand-made gap
    /// report (the values inside the gap hold placeholders).
    fn panel_with_case_gap(values: Vec<f64>, gap: (usize, usize)) -> (PanelDataset, Vec<GapReport>) {
        let series =
            TimeSeries::new("new_cases", NaiveDate::from_ymd_opt(2020, 4, 1).unwrap(), values)
                .unwrap();
        let city = CityRecord::new("solo", -20.0, -45.0, series, vec![], vec![]).unwrap();
        let gaps = vec![GapReport {
            city_id: "solo".into(),
            variable: "new_cases".into(),
            gap_start: gap.0,
            gap_end: gap.1,
            imputation_method: "unfilled".into(),
        }];
        (PanelDataset::new(vec![city]).unwrap(), gaps)
    }

    #[test]
    fn constant_history_imputes_constants() {
        let mut values = vec![5.0; 28];
        values[22] = -1.0; // placeholder garbage inside the gap
        values[23] = -1.0;
        values[24] = -1.0;
        let (panel, mut gaps) = panel_with_case_gap(values, (22, 24));
        let imputed = impute_gaps(&panel, &mut gaps).unwrap();
        let cases = imputed.city("solo").unwrap().cases();
        for t in 22..=24 {
            assert!((cases.values()[t] - 5.0).abs() <= 1e-6, "constant fill at {t}");
        }
        assert_eq!(gaps[0].imputation_method, "arima(0,0,0)");
    }

    #[test]
    fn trend_history_continues_the_line() {
        let values: Vec<f64> = (0..30).map(|t| 2.0 * t as f64 + 3.0).collect();
        let mut with_gap = values.clone();
        for t in 25..=27 {
            with_gap[t] = 0.0;
        }
        let (panel, mut gaps) = panel_with_case_gap(with_gap, (25, 27));
        let imputed = impute_gaps(&panel, &mut gaps).unwrap();
        let cases = imputed.city("solo").unwrap().cases();
        for t in 25..=27 {
            let expect = values[t];
            let got = cases.values()[t];
            assert!(
                (got - expect).abs() <= 0.05 * expect,
                "trend fill at {t}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn non_gap_values_are_untouched_and_no_gaps_is_identity() {
        let mut values: Vec<f64> = (0..40).map(|t| 10.0 + (t as f64 * 0.7).sin()).collect();
        values[30] = 99.0;
        let (panel, mut gaps) = panel_with_case_gap(values.clone(), (30, 30));
        let imputed = impute_gaps(&panel, &mut gaps).unwrap();
        let cases = imputed.city("solo").unwrap().cases();
        for (t, v) in values.iter().enumerate() {
            if t != 30 {
                assert_eq!(cases.values()[t], *v, "non-gap value changed at {t}");
            }
        }

        let (panel, mut no_gaps) = panel_with_case_gap((0..25).map(|t| t as f64).collect(), (0, 0));
        no_gaps.clear();
        let imputed = impute_gaps(&panel, &mut no_gaps).unwrap();
        assert_eq!(
            imputed.city("solo").unwrap().cases().values(),
            panel.city("solo").unwrap().cases().values()
        );
    }

    #[test]
    fn short_pre_gap_history_is_rejected() {
        let (panel, mut gaps) = panel_with_case_gap(vec![5.0; 30], (10, 12));
        let err = impute_gaps(&panel, &mut gaps).unwrap_err();
        assert!(
            matches!(err, IngestError::ShortPreGap { gap_start: 10, needed: 20, .. }),
            "got {err}"
        );
    }

    // -- lag ---------------------------------------------------------------

    #[test]
    fn lag_pairs_cases_with_earlier_exogenous_values() {
        let start = NaiveDate::from_ymd_opt(2020, 5, 1).unwrap();
        let cases =
            TimeSeries::new("new_cases", start, (1..=10).map(f64::from).collect()).unwrap();
        let exog =
            TimeSeries::new("rain_mm", start, (101..=110).map(f64::from).collect()).unwrap();
        let (c, x) = apply_lag(&cases, &[&exog], 5).unwrap();
        assert_eq!(c.values(), &[6.0, 7.0, 8.0, 9.0, 10.0]);
        assert_eq!(x[0].values(), &[101.0, 102.0, 103.0, 104.0, 105.0]);
        assert_eq!(c.start(), NaiveDate::from_ymd_opt(2020, 5, 6).unwrap());
        assert_eq!(x[0].start(), c.start(), "exog re-stamped onto the case timeline");
        assert_eq!(x[0].name(), "rain_mm");
    }

    #[test]
    fn zero_lag_is_identity_and_oversized_lag_errors() {
        let start = NaiveDate::from_ymd_opt(2020, 5, 1).unwrap();
        let cases = TimeSeries::new("new_cases", start, vec![1.0, 2.0, 3.0]).unwrap();
        let exog = TimeSeries::new("rr", start, vec![7.0, 8.0, 9.0]).unwrap();
        let (c, x) = apply_lag(&cases, &[&exog], 0).unwrap();
        assert_eq!(c.values(), cases.values());
        assert_eq!(x[0].values(), exog.values());
        assert!(matches!(
            apply_lag(&cases, &[&exog], 3),
            Err(IngestError::BadLag { lag: 3, len: 3 })
        ));
    }
}
