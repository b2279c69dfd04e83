//! Shared option parsing, configuration layering, and panel plumbing
//! for all subcommands. Precedence: CLI flags > manifest file >
//! built-in defaults.

use anyhow::{Context as _, Result};
use auspex::arimax::OrderBounds;
use auspex::eemd::EemdConfig;
use auspex::ingest::{self, DatasetManifest, GapReport};
use auspex::spectral::{self, CityGraph, WeightMode};
use auspex::{CityRecord, PanelDataset, TimeSeries};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use std::path::PathBuf;

/// Options shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Dataset manifest path (`key = value` lines naming the CSV files).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed for every stochastic step.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// EEMD ensemble size (number of noise-perturbed copies).
    #[arg(long, default_value_t = 125)]
    pub ensembles: usize,
    /// EEMD noise ratio (noise std as a fraction of the signal std).
    #[arg(long, default_value_t = 0.01)]
    pub noise_ratio: f64,
    /// Number of IMF levels extracted before the residual.
    #[arg(long, default_value_t = 5)]
    pub imfs: usize,
    /// Exogenous lag in days; overrides the manifest's `lag_days`.
    #[arg(long)]
    pub lag: Option<usize>,
    /// Spectral accentuation strength for anomaly detection.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Low-pass cutoff in (0, 1] for normalization.
    #[arg(long, default_value_t = 0.5)]
    pub cutoff: f64,
    /// Graph edge weighting scheme.
    #[arg(long, value_enum, default_value_t)]
    pub weight_mode: WeightModeArg,
    /// Largest autoregressive order searched.
    #[arg(long, default_value_t = 5)]
    pub max_p: usize,
    /// Largest differencing order searched.
    #[arg(long, default_value_t = 2)]
    pub max_d: usize,
    /// Largest moving-average order searched.
    #[arg(long, default_value_t = 5)]
    pub max_q: usize,
}

/// Forecasting method for `predict`.
#[derive(ValueEnum, Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Method {
    /// Single model on the raw series.
    Arimax,
    /// Decompose, model each level, and sum the level predictions.
    #[default]
    EemdArimax,
}

/// Graph weighting scheme flag.
#[derive(ValueEnum, Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum WeightModeArg {
    /// Edge weight equals the inter-city distance in kilometres.
    #[default]
    LiteralDistance,
    /// Gaussian kernel of distance with the median-distance bandwidth.
    GaussianKernel,
}

/// Resolved configuration for one command invocation.
pub struct Context {
    pub manifest: DatasetManifest,
    pub out: PathBuf,
    pub seed: u64,
    pub eemd: EemdConfig,
    pub bounds: OrderBounds,
    pub lag: usize,
    pub alpha: f64,
    pub cutoff: f64,
    pub weight_mode: WeightMode,
}

impl Context {
    /// Loads the manifest and layers flag overrides on top.
    pub fn build(args: &CommonArgs) -> Result<Context> {
        let manifest = DatasetManifest::from_file(&args.manifest)
            .with_context(|| format!("loading manifest '{}'", args.manifest.display()))?;
        std::fs::create_dir_all(&args.out)
            .with_context(|| format!("creating output directory '{}'", args.out.display()))?;
        let lag = args.lag.unwrap_or(manifest.lag_days);
        Ok(Context {
            manifest,
            out: args.out.clone(),
            seed: args.seed,
            eemd: EemdConfig {
                ensemble_size: args.ensembles,
                noise_ratio: args.noise_ratio,
                levels: args.imfs,
                sift_iterations: 1,
                seed: args.seed,
            },
            bounds: OrderBounds { max_p: args.max_p, max_d: args.max_d, max_q: args.max_q },
            lag,
            alpha: args.alpha,
            cutoff: args.cutoff,
            weight_mode: match args.weight_mode {
                WeightModeArg::LiteralDistance => WeightMode::LiteralDistance,
                WeightModeArg::GaussianKernel => WeightMode::GaussianKernel,
            },
        })
    }

    /// Loads the panel and replaces recorded gaps with model forecasts.
    pub fn load_imputed(&self) -> Result<(PanelDataset, Vec<GapReport>)> {
        let (panel, mut gaps) = ingest::load_panel(&self.manifest).context("loading panel")?;
        let panel = ingest::impute_gaps(&panel, &mut gaps).context("imputing gaps")?;
        Ok((panel, gaps))
    }

    /// Case series and covariates for one city, lag-aligned so day-t
    /// cases sit next to day-(t − lag) covariates.
    pub fn lagged_city(&self, city: &CityRecord) -> Result<(TimeSeries, Vec<TimeSeries>)> {
        let refs: Vec<&TimeSeries> = city.covariates().map(|(_, s)| s).collect();
        Ok(ingest::apply_lag(city.cases(), &refs, self.lag)?)
    }

    /// Distance-weighted city graph for the panel.
    pub fn graph(&self, panel: &PanelDataset) -> Result<CityGraph> {
        Ok(spectral::graph_from_panel(panel, self.weight_mode)?)
    }
}

/// A successfully processed city's artifacts, gathered before the
/// single writer phase.
pub struct CityOutput<T> {
    pub city_id: String,
    pub value: T,
}

/// Runs `f` over all cities in parallel, splitting ordered successes
/// from ordered failures (city id, error text).
pub fn per_city<T: Send>(
    panel: &PanelDataset,
    f: impl Fn(usize, &CityRecord) -> Result<T> + Sync,
) -> (Vec<CityOutput<T>>, Vec<(String, String)>) {
    let results: Vec<(String, Result<T>)> = panel
        .cities()
        .par_iter()
        .enumerate()
        .map(|(i, city)| (city.city_id().to_string(), f(i, city)))
        .collect();
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (city_id, result) in results {
        match result {
            Ok(value) => ok.push(CityOutput { city_id, value }),
            Err(err) => failed.push((city_id, format!("{err:#}"))),
        }
    }
    (ok, failed)
}

/// Prints per-city failures to stderr and returns how many there were.
pub fn report_failures(command: &str, failed: &[(String, String)]) -> usize {
    for (city, message) in failed {
        eprintln!("{command}: city '{city}': {message}");
    }
    failed.len()
}
