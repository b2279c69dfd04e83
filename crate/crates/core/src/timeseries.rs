//! Daily time-series and panel containers shared by every pipeline stage.
//!
//! A [`TimeSeries`] is a named, strictly-daily sequence of finite values
//! anchored at a calendar start date; all date arithmetic reduces to
//! integer day offsets, so time zones and DST never enter the picture.
//! A [`PanelDataset`] groups one [`CityRecord`] per city — the dependent
//! count series plus named meteorological and mobility covariates, all
//! sharing one per-city date range.
//!
//! The free functions [`difference`], [`integrate`] and [`align`] are the
//! primitive series operations the estimation stages build on. They obey
//! the exact round-trip contract `integrate(difference(x, d), d, heads) == x`
//! where `heads` are the first `d` values of the original series.

use chrono::NaiveDate;
use thiserror::Error;

/// Canonical meteorological covariate names, in fixed vocabulary order:
/// daily rainfall (mm), maximum and minimum temperature (°C), and relative
/// humidity (%).
pub const METEO_VARS: [&str; 4] = ["rain_mm", "max_temp_c", "min_temp_c", "humidity_pct"];

/// Canonical mobility covariate names, in fixed vocabulary order: retail &
/// recreation, grocery & pharmacy, parks, transit stations, workplaces,
/// and residential.
pub const MOBILITY_VARS: [&str; 6] = ["rr", "gp", "pa", "ts", "wo", "re"];

/// Errors from series and panel construction or manipulation.
#[derive(Debug, Error)]
pub enum TimeSeriesError {
    /// A series must contain at least one observation.
    #[error("series '{0}' is empty")]
    Empty(String),
    /// Series values must be finite (no NaN or infinity).
    #[error("series '{name}' has a non-finite value at index {index}")]
    NonFinite { name: String, index: usize },
    /// The operation needs more observations than the series holds.
    #[error("series too short: need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    /// `integrate` was handed the wrong number of integration seeds.
    #[error("integration heads mismatch: order {order} needs {order} seeds, got {got}")]
    HeadsMismatch { order: usize, got: usize },
    /// The aligned series (or panel cities) share no common date range.
    #[error("series share no overlapping date range")]
    NoOverlap,
    /// A panel must contain at least one city.
    #[error("panel contains no cities")]
    EmptyPanel,
    /// City ids within a panel must be unique.
    #[error("duplicate city id '{0}'")]
    DuplicateCity(String),
    /// Covariate names must come from the fixed vocabulary.
    #[error("city '{city}': unknown {group} variable '{variable}'")]
    UnknownVariable { city: String, group: &'static str, variable: String },
    /// A covariate was listed twice for one city.
    #[error("city '{city}': duplicate variable '{variable}'")]
    DuplicateVariable { city: String, variable: String },
    /// Every series of a city must share the case series' date range.
    #[error(
        "city '{city}': series '{variable}' does not share the city date range \
         (expected {expected_start} x {expected_len} days)"
    )]
    MisalignedSeries {
        city: String,
        variable: String,
        expected_start: NaiveDate,
        expected_len: usize,
    },
    /// Latitude must lie in [-90, 90] and longitude in [-180, 180].
    #[error("city '{city}': coordinates ({lat}, {lon}) out of range")]
    BadCoordinate { city: String, lat: f64, lon: f64 },
    /// A requested sub-window falls outside the series range.
    #[error("window [{from}, {to}) is invalid for a series of length {len}")]
    BadWindow { from: usize, to: usize, len: usize },
}

/// Adds a (possibly negative) number of days to a date.
pub(crate) fn shift_date(date: NaiveDate, days: i64) -> NaiveDate {
    date.checked_add_signed(chrono::Duration::days(days))
        .expect("date arithmetic overflow")
}

/// A named daily series of finite values anchored at a start date.
///
/// Sampling is strictly daily with no holes: index `i` always corresponds
/// to `start + i` days. Gappy raw data must be imputed before a
/// `TimeSeries` can be built (see the ingest stage).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    name: String,
    start: NaiveDate,
    values: Vec<f64>,
}

impl TimeSeries {
    /// Creates a series, validating that it is non-empty and finite.
    pub fn new(
        name: impl Into<String>,
        start: NaiveDate,
        values: Vec<f64>,
    ) -> Result<Self, TimeSeriesError> {
        let name = name.into();
        if values.is_empty() {
            return Err(TimeSeriesError::Empty(name));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(TimeSeriesError::NonFinite { name, index });
        }
        Ok(Self { name, start, values })
    }

    /// Series name (a variable identity such as `"cases"` or `"rain_mm"`).
    pub fn name(&self) -> &str {
        &self.name
    }

    /// First observation date.
    pub fn start(&self) -> NaiveDate {
        self.start
    }

    /// Last observation date (`start + len − 1` days).
    pub fn end(&self) -> NaiveDate {
        shift_date(self.start, self.values.len() as i64 - 1)
    }

    /// Number of daily observations.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false: construction rejects empty series. Present for
    /// `len`/`is_empty` API symmetry.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Observed values, oldest first.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Calendar date of observation `i` (which may exceed the range).
    pub fn date_at(&self, i: usize) -> NaiveDate {
        shift_date(self.start, i as i64)
    }

    /// Index of `date` within the series, if covered.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start).num_days();
        if offset >= 0 && (offset as usize) < self.values.len() {
            Some(offset as usize)
        } else {
            None
        }
    }

    /// Copy of the half-open index window `[from, to)` as a new series
    /// anchored at the corresponding date.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self, TimeSeriesError> {
        if from >= to || to > self.values.len() {
            return Err(TimeSeriesError::BadWindow { from, to, len: self.values.len() });
        }
        Ok(Self {
            name: self.name.clone(),
            start: self.date_at(from),
            values: self.values[from..to].to_vec(),
        })
    }

    /// Same name and start date, different values (validated).
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, TimeSeriesError> {
        Self::new(self.name.clone(), self.start, values)
    }

    /// Same data under a different name.
    pub fn renamed(&self, name: impl Into<String>) -> Self {
        Self { name: name.into(), start: self.start, values: self.values.clone() }
    }
}

/// One first difference: `y[t] = x[t+1] - x[t]`.
pub(crate) fn diff_once(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

/// `d`-fold first difference of a value slice. Length shrinks by `d`.
pub(crate) fn diff_n(x: &[f64], d: usize) -> Vec<f64> {
    let mut out = x.to_vec();
    for _ in 0..d {
        out = diff_once(&out);
    }
    out
}

/// Inverse of [`diff_n`]: rebuilds the original slice from its `d`-fold
/// difference and the first `d` original values.
pub(crate) fn undiff_n(dx: &[f64], heads: &[f64]) -> Vec<f64> {
    let d = heads.len();
    // Seed for recursion level l is the first value of the l-fold
    // difference of the original, recoverable from the heads alone.
    let mut seeds = Vec::with_capacity(d);
    let mut h = heads.to_vec();
    for _ in 0..d {
        seeds.push(h[0]);
        h = diff_once(&h);
    }
    let mut cur = dx.to_vec();
    for level in (0..d).rev() {
        let mut out = Vec::with_capacity(cur.len() + 1);
        out.push(seeds[level]);
        for v in &cur {
            let prev = *out.last().expect("non-empty accumulator");
            out.push(prev + v);
        }
        cur = out;
    }
    cur
}

/// `d`-th order differencing of a daily series.
///
/// The result is `d` observations shorter and starts `d` days later, so
/// each output value sits on the date of the *latest* input it involves.
/// `difference(x, 0)` is a copy.
pub fn difference(x: &TimeSeries, d: usize) -> Result<TimeSeries, TimeSeriesError> {
    if x.len() < d + 1 {
        return Err(TimeSeriesError::TooShort { needed: d + 1, got: x.len() });
    }
    Ok(TimeSeries {
        name: x.name.clone(),
        start: shift_date(x.start, d as i64),
        values: diff_n(&x.values, d),
    })
}

/// Inverse of [`difference`]: rebuilds the original series from its
/// `d`-th difference and the first `d` original values (`heads`).
///
/// For every series `x`, `integrate(&difference(&x, d)?, d, &x.values()[..d])`
/// reproduces `x` exactly up to floating-point round-off.
pub fn integrate(
    dx: &TimeSeries,
    d: usize,
    heads: &[f64],
) -> Result<TimeSeries, TimeSeriesError> {
    if heads.len() != d {
        return Err(TimeSeriesError::HeadsMismatch { order: d, got: heads.len() });
    }
    if let Some(index) = heads.iter().position(|v| !v.is_finite()) {
        return Err(TimeSeriesError::NonFinite { name: dx.name.clone(), index });
    }
    Ok(TimeSeries {
        name: dx.name.clone(),
        start: shift_date(dx.start, -(d as i64)),
        values: undiff_n(&dx.values, heads),
    })
}

/// Trims a set of series to their common date range, preserving order.
///
/// Errors with [`TimeSeriesError::NoOverlap`] when the intersection of the
/// date ranges is empty (and with [`TimeSeriesError::EmptyPanel`] for an
/// empty input).
pub fn align(series: &[&TimeSeries]) -> Result<Vec<TimeSeries>, TimeSeriesError> {
    let first = series.first().ok_or(TimeSeriesError::EmptyPanel)?;
    let mut start = first.start();
    let mut end = first.end();
    for s in &series[1..] {
        start = start.max(s.start());
        end = end.min(s.end());
    }
    if start > end {
        return Err(TimeSeriesError::NoOverlap);
    }
    series
        .iter()
        .map(|s| {
            let from = s.index_of(start).expect("start within every series");
            let to = s.index_of(end).expect("end within every series") + 1;
            s.slice(from, to)
        })
        .collect()
}

/// Per-city record: the dependent case-count series plus named covariate
/// series, all sharing one date range.
#[derive(Debug, Clone)]
pub struct CityRecord {
    city_id: String,
    lat: f64,
    lon: f64,
    cases: TimeSeries,
    meteorological: Vec<(String, TimeSeries)>,
    mobility: Vec<(String, TimeSeries)>,
}

impl CityRecord {
    /// Builds a record, validating coordinates, variable vocabulary and
    /// that every covariate shares the case series' date range.
    pub fn new(
        city_id: impl Into<String>,
        lat: f64,
        lon: f64,
        cases: TimeSeries,
        meteorological: Vec<(String, TimeSeries)>,
        mobility: Vec<(String, TimeSeries)>,
    ) -> Result<Self, TimeSeriesError> {
        let city_id = city_id.into();
        if city_id.is_empty() {
            return Err(TimeSeriesError::Empty("city_id".into()));
        }
        if !(lat.is_finite() && lon.is_finite() && lat.abs() <= 90.0 && lon.abs() <= 180.0) {
            return Err(TimeSeriesError::BadCoordinate { city: city_id, lat, lon });
        }
        for (group, vocab, vars) in [
            ("meteorological", &METEO_VARS[..], &meteorological),
            ("mobility", &MOBILITY_VARS[..], &mobility),
        ] {
            let mut seen: Vec<&str> = Vec::new();
            for (name, series) in vars {
                if !vocab.contains(&name.as_str()) {
                    return Err(TimeSeriesError::UnknownVariable {
                        city: city_id,
                        group,
                        variable: name.clone(),
                    });
                }
                if seen.contains(&name.as_str()) {
                    return Err(TimeSeriesError::DuplicateVariable {
                        city: city_id,
                        variable: name.clone(),
                    });
                }
                seen.push(name);
                if series.start() != cases.start() || series.len() != cases.len() {
                    return Err(TimeSeriesError::MisalignedSeries {
                        city: city_id,
                        variable: name.clone(),
                        expected_start: cases.start(),
                        expected_len: cases.len(),
                    });
                }
            }
        }
        Ok(Self { city_id, lat, lon, cases, meteorological, mobility })
    }

    /// Unique city identifier.
    pub fn city_id(&self) -> &str {
        &self.city_id
    }

    /// Latitude in degrees, in [-90, 90].
    pub fn lat(&self) -> f64 {
        self.lat
    }

    /// Longitude in degrees, in [-180, 180].
    pub fn lon(&self) -> f64 {
        self.lon
    }

    /// Daily case counts.
    pub fn cases(&self) -> &TimeSeries {
        &self.cases
    }

    /// Meteorological covariates in input order.
    pub fn meteorological(&self) -> &[(String, TimeSeries)] {
        &self.meteorological
    }

    /// Mobility covariates in input order.
    pub fn mobility(&self) -> &[(String, TimeSeries)] {
        &self.mobility
    }

    /// Looks up a covariate by name across both groups.
    pub fn covariate(&self, name: &str) -> Option<&TimeSeries> {
        self.meteorological
            .iter()
            .chain(self.mobility.iter())
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
    }

    /// All covariates, meteorological first, in input order.
    pub fn covariates(&self) -> impl Iterator<Item = (&str, &TimeSeries)> {
        self.meteorological
            .iter()
            .chain(self.mobility.iter())
            .map(|(n, s)| (n.as_str(), s))
    }

    /// Replaces the case series (same date range required).
    pub fn with_cases(&self, cases: TimeSeries) -> Result<Self, TimeSeriesError> {
        Self::new(
            self.city_id.clone(),
            self.lat,
            self.lon,
            cases,
            self.meteorological.clone(),
            self.mobility.clone(),
        )
    }

    pub(crate) fn cases_mut(&mut self) -> &mut TimeSeries {
        &mut self.cases
    }

    pub(crate) fn series_mut(&mut self, variable: &str) -> Option<&mut TimeSeries> {
        if variable == "cases" {
            return Some(&mut self.cases);
        }
        self.meteorological
            .iter_mut()
            .chain(self.mobility.iter_mut())
            .find(|(n, _)| n == variable)
            .map(|(_, s)| s)
    }
}

/// A panel of city records with a non-empty common date range.
///
/// Cities are kept sorted by id, which fixes node order for the city
/// graph and output order for every exporter.
#[derive(Debug, Clone)]
pub struct PanelDataset {
    cities: Vec<CityRecord>,
    date_range: (NaiveDate, NaiveDate),
}

impl PanelDataset {
    /// Builds a panel, sorting cities by id and validating uniqueness and
    /// a non-empty common date range.
    pub fn new(mut cities: Vec<CityRecord>) -> Result<Self, TimeSeriesError> {
        if cities.is_empty() {
            return Err(TimeSeriesError::EmptyPanel);
        }
        cities.sort_by(|a, b| a.city_id.cmp(&b.city_id));
        for pair in cities.windows(2) {
            if pair[0].city_id == pair[1].city_id {
                return Err(TimeSeriesError::DuplicateCity(pair[0].city_id.clone()));
            }
        }
        let mut start = cities[0].cases.start();
        let mut end = cities[0].cases.end();
        for c in &cities[1..] {
            start = start.max(c.cases.start());
            end = end.min(c.cases.end());
        }
        if start > end {
            return Err(TimeSeriesError::NoOverlap);
        }
        Ok(Self { cities, date_range: (start, end) })
    }

    /// City records, sorted by city id.
    pub fn cities(&self) -> &[CityRecord] {
        &self.cities
    }

    /// Looks up one city by id.
    pub fn city(&self, city_id: &str) -> Option<&CityRecord> {
        self.cities.iter().find(|c| c.city_id == city_id)
    }

    /// Common (intersection) date range over all cities.
    pub fn date_range(&self) -> (NaiveDate, NaiveDate) {
        self.date_range
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn series(values: &[f64]) -> TimeSeries {
        TimeSeries::new("x", date(2020, 3, 14), values.to_vec()).unwrap()
    }

    #[test]
    fn construction_rejects_empty_and_non_finite() {
        assert!(matches!(
            TimeSeries::new("x", date(2020, 1, 1), vec![]),
            Err(TimeSeriesError::Empty(_))
        ));
        assert!(matches!(
            TimeSeries::new("x", date(2020, 1, 1), vec![1.0, f64::NAN]),
            Err(TimeSeriesError::NonFinite { index: 1, .. })
        ));
        assert!(matches!(
            TimeSeries::new("x", date(2020, 1, 1), vec![f64::INFINITY]),
            Err(TimeSeriesError::NonFinite { index: 0, .. })
        ));
    }

    #[test]
    fn date_indexing_round_trips() {
        let s = series(&[1.0, 2.0, 3.0]);
        assert_eq!(s.end(), date(2020, 3, 16));
        assert_eq!(s.date_at(2), date(2020, 3, 16));
        assert_eq!(s.index_of(date(2020, 3, 15)), Some(1));
        assert_eq!(s.index_of(date(2020, 3, 13)), None);
        assert_eq!(s.index_of(date(2020, 3, 17)), None);
    }

    #[test]
    fn first_difference_matches_hand_computation() {
        let s = series(&[5.0, 7.0, 4.0, 8.0]);
        let d = difference(&s, 1).unwrap();
        assert_eq!(d.values(), &[2.0, -3.0, 4.0]);
        assert_eq!(d.start(), date(2020, 3, 15));
    }

    #[test]
    fn zeroth_difference_is_a_copy() {
        let s = series(&[5.0, 7.0, 4.0]);
        let d = difference(&s, 0).unwrap();
        assert_eq!(d.values(), s.values());
        assert_eq!(d.start(), s.start());
    }

    #[test]
    fn second_difference_is_iterated_first_difference() {
        let s = series(&[1.0, 4.0, 9.0, 16.0, 25.0]);
        let twice = difference(&difference(&s, 1).unwrap(), 1).unwrap();
        let second = difference(&s, 2).unwrap();
        assert_eq!(second.values(), twice.values());
        assert_eq!(second.start(), twice.start());
        // Second difference of squares is the constant 2.
        assert_eq!(second.values(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn difference_rejects_too_short_series() {
        let s = series(&[1.0, 2.0]);
        assert!(matches!(
            difference(&s, 2),
            Err(TimeSeriesError::TooShort { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn integrate_rebuilds_hand_example() {
        // Second difference [1, 1] with heads [1, 2] rebuilds [1, 2, 4, 7]:
        // x2 = 2*2 - 1 + 1 = 4, x3 = 2*4 - 2 + 1 = 7.
        let dx = TimeSeries::new("x", date(2020, 3, 16), vec![1.0, 1.0]).unwrap();
        let x = integrate(&dx, 2, &[1.0, 2.0]).unwrap();
        assert_eq!(x.values(), &[1.0, 2.0, 4.0, 7.0]);
        assert_eq!(x.start(), date(2020, 3, 14));
    }

    #[test]
    fn integrate_checks_head_count() {
        let dx = series(&[1.0, 1.0]);
        assert!(matches!(
            integrate(&dx, 2, &[1.0]),
            Err(TimeSeriesError::HeadsMismatch { order: 2, got: 1 })
        ));
    }

    #[test]
    fn difference_integrate_round_trip_is_exact_on_integers() {
        let s = series(&[3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0]);
        for d in 0..=3 {
            let dx = difference(&s, d).unwrap();
            let back = integrate(&dx, d, &s.values()[..d]).unwrap();
            assert_eq!(back.values(), s.values(), "round trip failed at d={d}");
            assert_eq!(back.start(), s.start());
        }
    }

    #[test]
    fn difference_is_linear() {
        let a = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0];
        let b = [2.0, 7.0, 1.0, 8.0, 2.0, 8.0];
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        for d in 0..=2 {
            let da = diff_n(&a, d);
            let db = diff_n(&b, d);
            let dsum = diff_n(&sum, d);
            for i in 0..dsum.len() {
                assert!((dsum[i] - (da[i] + db[i])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn align_trims_to_overlap() {
        let a = TimeSeries::new("a", date(2020, 3, 14), vec![1.0; 10]).unwrap();
        let b = TimeSeries::new("b", date(2020, 3, 17), vec![2.0; 10]).unwrap();
        let out = align(&[&a, &b]).unwrap();
        assert_eq!(out[0].start(), date(2020, 3, 17));
        assert_eq!(out[1].start(), date(2020, 3, 17));
        assert_eq!(out[0].len(), 7);
        assert_eq!(out[1].len(), 7);
        assert_eq!(out[0].name(), "a");
        assert_eq!(out[1].name(), "b");
    }

    #[test]
    fn align_rejects_disjoint_ranges() {
        let a = TimeSeries::new("a", date(2020, 1, 1), vec![1.0; 5]).unwrap();
        let b = TimeSeries::new("b", date(2020, 2, 1), vec![2.0; 5]).unwrap();
        assert!(matches!(align(&[&a, &b]), Err(TimeSeriesError::NoOverlap)));
    }

    fn flat(name: &str, n: usize) -> TimeSeries {
        TimeSeries::new(name, date(2020, 3, 14), vec![0.0; n]).unwrap()
    }

    #[test]
    fn city_record_validates_vocabulary_and_alignment() {
        let cases = flat("cases", 5);
        let ok = CityRecord::new(
            "sp",
            -23.5,
            -46.6,
            cases.clone(),
            vec![("rain_mm".into(), flat("rain_mm", 5))],
            vec![("rr".into(), flat("rr", 5))],
        );
        assert!(ok.is_ok());

        let bad_name = CityRecord::new(
            "sp",
            -23.5,
            -46.6,
            cases.clone(),
            vec![("rainfall".into(), flat("rainfall", 5))],
            vec![],
        );
        assert!(matches!(bad_name, Err(TimeSeriesError::UnknownVariable { .. })));

        let misaligned = CityRecord::new(
            "sp",
            -23.5,
            -46.6,
            cases.clone(),
            vec![("rain_mm".into(), flat("rain_mm", 4))],
            vec![],
        );
        assert!(matches!(misaligned, Err(TimeSeriesError::MisalignedSeries { .. })));

        let bad_coord = CityRecord::new("sp", 91.0, 0.0, cases, vec![], vec![]);
        assert!(matches!(bad_coord, Err(TimeSeriesError::BadCoordinate { .. })));
    }

    #[test]
    fn panel_sorts_cities_and_intersects_ranges() {
        let mk = |id: &str, start: NaiveDate, n: usize| {
            CityRecord::new(
                id,
                0.0,
                0.0,
                TimeSeries::new("cases", start, vec![1.0; n]).unwrap(),
                vec![],
                vec![],
            )
            .unwrap()
        };
        let panel = PanelDataset::new(vec![
            mk("rio", date(2020, 3, 16), 10),
            mk("bsb", date(2020, 3, 14), 10),
        ])
        .unwrap();
        assert_eq!(panel.cities()[0].city_id(), "bsb");
        assert_eq!(panel.cities()[1].city_id(), "rio");
        assert_eq!(panel.date_range(), (date(2020, 3, 16), date(2020, 3, 23)));

        let dup = PanelDataset::new(vec![
            mk("rio", date(2020, 3, 14), 5),
            mk("rio", date(2020, 3, 14), 5),
        ]);
        assert!(matches!(dup, Err(TimeSeriesError::DuplicateCity(_))));
    }
}
