//! Hybrid decomposition–regression forecasting and graph-spectral anomaly
//! detection for daily panel data.
//!
//! `auspex` implements an end-to-end pipeline for panels of daily count
//! series observed across a set of geo-located cities, with per-city
//! meteorological and mobility covariates:
//!
//! 1. **Screening** ([`stats`]) — Spearman rank correlation with a
//!    t-approximation p-value selects which lagged covariates enter each
//!    city's regression.
//! 2. **Decomposition** ([`eemd`]) — ensemble empirical mode decomposition
//!    splits every series into a fixed number of intrinsic mode functions
//!    plus a residual trend, using seeded white-noise ensembles so runs are
//!    exactly reproducible.
//! 3. **Forecasting** ([`arimax`], [`hybrid`]) — ARIMAX models with
//!    exogenous regressors are estimated by conditional sum of squares;
//!    the hybrid model fits one ARIMAX per decomposition level and sums
//!    the per-level predictions.
//! 4. **Anomaly detection** ([`spectral`], [`anomaly`]) — a complete
//!    weighted graph over the cities supports a graph Fourier transform;
//!    high-frequency accentuation flags days whose cross-city pattern is
//!    spatially irregular, and a low-pass variant repairs reporting
//!    artifacts in the raw counts.
//!
//! [`ingest`] handles the CSV panel format, manifest files, gap imputation
//! and lag alignment; [`timeseries`] provides the daily-series and panel
//! containers shared by every stage; [`synth`] generates the synthetic
//! panels used by the benchmark and acceptance suites.
//!
//! # Determinism
//!
//! Every stochastic step derives its random stream from an explicit `u64`
//! seed via [`seed`], and every data-parallel reduction folds partial
//! results in index order. Outputs are therefore byte-identical across
//! runs, thread counts, and the `parallel` feature flag.

pub mod anomaly;
pub mod arimax;
pub mod eemd;
mod exec;
pub mod hybrid;
pub mod ingest;
pub mod linalg;
pub mod seed;
pub mod spectral;
pub mod stats;
pub mod synth;
pub mod timeseries;

pub use timeseries::{CityRecord, PanelDataset, TimeSeries};
