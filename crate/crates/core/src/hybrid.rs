//! Hybrid decomposition–regression forecasting.
//!
//! The hybrid scheme decomposes the dependent series and every exogenous
//! series into the same number of oscillatory levels, fits one ARIMAX
//! model per level (level `j` of the dependent against level `j` of each
//! exogenous series), and sums the per-level one-step-ahead fits into the
//! final prediction. Slow components are explained by slow regressors and
//! fast components by fast ones, which is the point of the split.
//!
//! Reproducibility: each input series gets its own noise stream, derived
//! from the master seed by position — the dependent uses sub-seed 0 and
//! exogenous series `i` uses sub-seed `i + 1` — so adding or reordering
//! regressors never silently changes another series' decomposition.

use crate::arimax::{self, ArimaxError, ArimaxModel, ArimaxOrder, OrderBounds};
use crate::eemd::{self, Decomposition, EemdConfig, EemdError};
use crate::seed;
use crate::stats::{self, Metrics, StatsError};
use crate::timeseries::{TimeSeries, TimeSeriesError};
use thiserror::Error;

/// Errors from hybrid model construction.
#[derive(Debug, Error)]
pub enum HybridError {
    /// Configuration rejected before any work.
    #[error("invalid hybrid configuration: {0}")]
    InvalidConfig(String),
    /// Decomposition of an input series failed.
    #[error("decomposition of '{series}' failed: {source}")]
    Decomposition {
        series: String,
        #[source]
        source: EemdError,
    },
    /// A per-level model could not be estimated.
    #[error("level '{level}' failed: {source}")]
    Level {
        level: String,
        #[source]
        source: ArimaxError,
    },
    /// Errors raised while combining series.
    #[error(transparent)]
    Series(#[from] TimeSeriesError),
    /// Errors raised while scoring predictions.
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Configuration for a hybrid fit.
#[derive(Debug, Clone)]
pub struct HybridConfig {
    /// Decomposition settings; `eemd.seed` acts as the master seed from
    /// which per-series sub-seeds are derived.
    pub eemd: EemdConfig,
    /// Order-selection grid bounds used for every level.
    pub bounds: OrderBounds,
    /// Optional fixed per-level orders (one per level, slowest last);
    /// when set, order selection is skipped.
    pub per_level_orders: Option<Vec<ArimaxOrder>>,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            eemd: EemdConfig::default(),
            bounds: OrderBounds::default(),
            per_level_orders: None,
        }
    }
}

/// One fitted level of the hybrid model.
#[derive(Debug, Clone)]
pub struct LevelFit {
    /// Level label: `imf_1` (fastest) … `imf_s`, then `residual`.
    pub label: String,
    /// The ARIMAX model for this level.
    pub model: ArimaxModel,
    /// One-step-ahead fitted values for this level.
    pub fitted: TimeSeries,
}

/// A fitted hybrid model.
#[derive(Debug)]
pub struct HybridModel {
    level_fits: Vec<LevelFit>,
    prediction: TimeSeries,
    decomposition: Decomposition,
}

impl HybridModel {
    /// Per-level models and fitted series, fastest level first.
    pub fn level_fits(&self) -> &[LevelFit] {
        &self.level_fits
    }

    /// The summed prediction, aligned with the dependent series.
    pub fn prediction(&self) -> &TimeSeries {
        &self.prediction
    }

    /// The dependent series' decomposition.
    pub fn decomposition(&self) -> &Decomposition {
        &self.decomposition
    }

    /// Scores the prediction against an observed series.
    pub fn evaluate(&self, observed: &TimeSeries) -> Result<Metrics, HybridError> {
        if observed.start() != self.prediction.start() || observed.len() != self.prediction.len()
        {
            return Err(HybridError::InvalidConfig(format!(
                "observed series '{}' is not aligned with the prediction",
                observed.name()
            )));
        }
        Ok(stats::metrics(self.prediction.values(), observed.values())?)
    }
}

/// Decomposes the dependent and exogenous series with per-series derived
/// sub-seeds (dependent first, then each exogenous series in order).
pub fn decompose_inputs(
    y: &TimeSeries,
    exog: &[&TimeSeries],
    config: &HybridConfig,
) -> Result<(Decomposition, Vec<Decomposition>), HybridError> {
    let master = config.eemd.seed;
    let decompose = |series: &TimeSeries, sub_seed: u64| {
        let cfg = EemdConfig { seed: sub_seed, ..config.eemd.clone() };
        eemd::eemd(series, &cfg).map_err(|source| HybridError::Decomposition {
            series: series.name().to_string(),
            source,
        })
    };
    let dependent = decompose(y, seed::derive(master, 0))?;
    let mut others = Vec::with_capacity(exog.len());
    for (i, x) in exog.iter().enumerate() {
        others.push(decompose(x, seed::derive(master, i as u64 + 1))?);
    }
    Ok((dependent, others))
}

/// Fits the hybrid model: decompose everything, fit one ARIMAX model per
/// level, and sum the per-level fitted series into the prediction.
///
/// Per-level exogenous inputs are renamed `source.level` (for example
/// `rain_mm.imf_2`) so every level's model record identifies its
/// regressors unambiguously.
pub fn fit_hybrid(
    y: &TimeSeries,
    exog: &[&TimeSeries],
    config: &HybridConfig,
) -> Result<HybridModel, HybridError> {
    let total_levels = config.eemd.levels + 1;
    if let Some(orders) = &config.per_level_orders {
        if orders.len() != total_levels {
            return Err(HybridError::InvalidConfig(format!(
                "{} per-level orders supplied for {} levels",
                orders.len(),
                total_levels
            )));
        }
    }

    let (dependent, exog_decomps) = decompose_inputs(y, exog, config)?;

    let mut level_fits = Vec::with_capacity(total_levels);
    let mut summed = vec![0.0; y.len()];
    for level in 1..=total_levels {
        let dep_level = dependent
            .level(level)
            .expect("level index within decomposition range");
        let label = dep_level.name().to_string();
        let exog_levels: Vec<TimeSeries> = exog_decomps
            .iter()
            .map(|d| {
                let series = d.level(level).expect("aligned decomposition level");
                series.renamed(format!("{}.{}", d.source_name(), series.name()))
            })
            .collect();
        let exog_refs: Vec<&TimeSeries> = exog_levels.iter().collect();

        let model = match &config.per_level_orders {
            Some(orders) => arimax::fit(dep_level, &exog_refs, orders[level - 1])
                .map_err(|source| HybridError::Level { level: label.clone(), source })?,
            None => {
                arimax::select_order(dep_level, &exog_refs, config.bounds)
                    .map_err(|source| HybridError::Level { level: label.clone(), source })?
                    .model
            }
        };
        let fitted = arimax::fitted_values(&model, dep_level, &exog_refs)
            .map_err(|source| HybridError::Level { level: label.clone(), source })?;
        for (acc, v) in summed.iter_mut().zip(fitted.values()) {
            *acc += v;
        }
        level_fits.push(LevelFit { label, model, fitted });
    }

    let prediction = TimeSeries::new("predicted", y.start(), summed)?;
    Ok(HybridModel { level_fits, prediction, decomposition: dependent })
}
