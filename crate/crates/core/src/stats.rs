//! Rank correlation screening and forecast-accuracy metrics.
//!
//! Covariate screening uses Spearman's rank correlation with mid-ranks
//! for ties, with a two-sided p-value from the Student-t approximation
//! `t = ρ·√((n−2)/(1−ρ²))` on `n−2` degrees of freedom. A covariate is
//! selected when `|ρ| ≥ 0.3` and `p ≤ 0.01` (both boundaries inclusive by
//! default; [`ScreenOptions::strict`] switches to strict inequalities).
//!
//! Forecast accuracy is summarised by mean error, root mean squared error
//! and mean absolute error over (predicted, observed) pairs.

use crate::timeseries::TimeSeries;
use thiserror::Error;

/// Errors from correlation and metric computations.
#[derive(Debug, Error)]
pub enum StatsError {
    /// Paired inputs must have equal lengths.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    /// At least `needed` paired observations are required.
    #[error("too few observations: need at least {needed}, got {got}")]
    TooFew { needed: usize, got: usize },
    /// Correlation is undefined when either side has zero rank variance.
    #[error("correlation undefined: '{0}' has zero rank variance")]
    UndefinedCorrelation(String),
    /// The t distribution needs at least one degree of freedom.
    #[error("invalid degrees of freedom: {0}")]
    InvalidDf(f64),
}

// ---------------------------------------------------------------------------
// Student-t survival function
// ---------------------------------------------------------------------------

/// Lanczos coefficients (g = 7, n = 9) for the log-gamma function.
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for positive arguments.
fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued-fraction kernel of the regularized incomplete beta function
/// (modified Lentz algorithm).
fn beta_cont_frac(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        // Even step.
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // Odd step.
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The continued fraction converges fast only for x below the mean
    // a/(a+b); use the symmetry I_x(a,b) = 1 − I_{1−x}(b,a) otherwise.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cont_frac(a, b, x) / a
    } else {
        1.0 - front * beta_cont_frac(b, a, 1.0 - x) / b
    }
}

/// Upper-tail probability `P(T > t)` of the Student-t distribution with
/// `df` degrees of freedom.
///
/// Evaluated through the regularized incomplete beta function:
/// `P(T > t) = ½·I_x(df/2, ½)` with `x = df/(df + t²)` for `t ≥ 0`, and by
/// symmetry for `t < 0`. Errors when `df < 1`.
pub fn student_t_sf(t: f64, df: f64) -> Result<f64, StatsError> {
    if !(df.is_finite() && df >= 1.0) {
        return Err(StatsError::InvalidDf(df));
    }
    if t.is_nan() {
        return Err(StatsError::InvalidDf(f64::NAN));
    }
    if t < 0.0 {
        return Ok(1.0 - student_t_sf(-t, df)?);
    }
    if t == 0.0 {
        return Ok(0.5);
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    let x = df / (df + t * t);
    Ok(0.5 * beta_reg(0.5 * df, 0.5, x))
}

// ---------------------------------------------------------------------------
// Spearman rank correlation
// ---------------------------------------------------------------------------

/// Mid-ranks (1-based; ties share the average of their positions).
fn mid_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[order[j]] == x[order[i]] {
            j += 1;
        }
        // Positions i..j (0-based) hold one tie group; its mid-rank is the
        // average of the 1-based positions.
        let mid = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = mid;
        }
        i = j;
    }
    ranks
}

/// Pearson correlation of two equal-length slices. Returns `None` when
/// either side has zero variance.
fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Spearman rank correlation with its two-sided p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spearman {
    /// Rank correlation coefficient in [-1, 1].
    pub rho: f64,
    /// Two-sided p-value from the t approximation on `n − 2` degrees of
    /// freedom.
    pub p_value: f64,
    /// Number of paired observations.
    pub n: usize,
}

/// Spearman rank correlation of two paired samples.
///
/// Ranks use mid-ranks for ties, and ρ is the Pearson correlation of the
/// rank vectors — which reduces to the classical `1 − 6ΣD²/(n³−n)` formula
/// when no ties are present. Needs `n ≥ 3`; errors when either sample has
/// zero rank variance (constant input).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Spearman, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFew { needed: 3, got: n });
    }
    let rx = mid_ranks(x);
    let ry = mid_ranks(y);
    let rho = match (pearson(&rx, &ry), mid_var_zero(&rx), mid_var_zero(&ry)) {
        (Some(r), _, _) => r,
        (None, true, _) => return Err(StatsError::UndefinedCorrelation("x".into())),
        (None, _, _) => return Err(StatsError::UndefinedCorrelation("y".into())),
    };
    // Round-off can push |rho| a hair past 1.
    let rho = rho.clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p_value = if 1.0 - rho * rho <= 0.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        (2.0 * student_t_sf(t.abs(), df)?).min(1.0)
    };
    Ok(Spearman { rho, p_value, n })
}

fn mid_var_zero(ranks: &[f64]) -> bool {
    ranks.iter().all(|&r| r == ranks[0])
}

// ---------------------------------------------------------------------------
// Covariate screening
// ---------------------------------------------------------------------------

/// Selection thresholds for covariate screening.
#[derive(Debug, Clone, Copy)]
pub struct ScreenOptions {
    /// Minimum absolute rank correlation (default 0.3).
    pub min_abs_rho: f64,
    /// Maximum p-value (default 0.01).
    pub alpha: f64,
    /// When true, use strict inequalities (`>` and `<`) instead of the
    /// default inclusive boundaries (`≥` and `≤`).
    pub strict: bool,
}

impl Default for ScreenOptions {
    fn default() -> Self {
        Self { min_abs_rho: 0.3, alpha: 0.01, strict: false }
    }
}

/// Screening outcome for one candidate covariate.
#[derive(Debug, Clone)]
pub struct CorrelationResult {
    /// Candidate variable name.
    pub variable: String,
    /// Spearman ρ against the dependent series (NaN when degenerate).
    pub rho: f64,
    /// Two-sided p-value (NaN when degenerate).
    pub p_value: f64,
    /// Number of paired observations.
    pub n: usize,
    /// Whether the variable passed both thresholds.
    pub selected: bool,
    /// True when the correlation was undefined (zero rank variance);
    /// such variables are never selected.
    pub degenerate: bool,
}

/// Screens candidate covariates against a dependent series, with default
/// thresholds `|ρ| ≥ 0.3` and `p ≤ 0.01`.
///
/// Candidates must already be lag-aligned with the dependent series (same
/// length). Output preserves candidate order. Degenerate candidates
/// (constant series) are returned unselected with the `degenerate` flag
/// rather than failing the whole screen.
pub fn screen_variables(
    dependent: &TimeSeries,
    candidates: &[(&str, &TimeSeries)],
) -> Result<Vec<CorrelationResult>, StatsError> {
    screen_variables_with(dependent, candidates, &ScreenOptions::default())
}

/// [`screen_variables`] with explicit thresholds.
pub fn screen_variables_with(
    dependent: &TimeSeries,
    candidates: &[(&str, &TimeSeries)],
    opts: &ScreenOptions,
) -> Result<Vec<CorrelationResult>, StatsError> {
    let dep = dependent.values();
    candidates
        .iter()
        .map(|(name, series)| {
            if series.len() != dep.len() {
                return Err(StatsError::LengthMismatch {
                    left: dep.len(),
                    right: series.len(),
                });
            }
            match spearman(dep, series.values()) {
                Ok(s) => {
                    let selected = if opts.strict {
                        s.rho.abs() > opts.min_abs_rho && s.p_value < opts.alpha
                    } else {
                        s.rho.abs() >= opts.min_abs_rho && s.p_value <= opts.alpha
                    };
                    Ok(CorrelationResult {
                        variable: name.to_string(),
                        rho: s.rho,
                        p_value: s.p_value,
                        n: s.n,
                        selected,
                        degenerate: false,
                    })
                }
                Err(StatsError::UndefinedCorrelation(_)) => Ok(CorrelationResult {
                    variable: name.to_string(),
                    rho: f64::NAN,
                    p_value: f64::NAN,
                    n: dep.len(),
                    selected: false,
                    degenerate: true,
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Forecast-accuracy metrics
// ---------------------------------------------------------------------------

/// Mean error, root mean squared error and mean absolute error of a
/// prediction against observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Mean of (predicted − observed): signed bias.
    pub me: f64,
    /// Root mean squared error.
    pub rmse: f64,
    /// Mean absolute error.
    pub mae: f64,
}

/// Computes [`Metrics`] over paired (predicted, observed) values.
///
/// The error convention is `predicted − observed`, so a positive mean
/// error means over-prediction. For any input, `RMSE ≥ MAE ≥ |ME|`.
pub fn metrics(predicted: &[f64], observed: &[f64]) -> Result<Metrics, StatsError> {
    if predicted.len() != observed.len() {
        return Err(StatsError::LengthMismatch {
            left: predicted.len(),
            right: observed.len(),
        });
    }
    if predicted.is_empty() {
        return Err(StatsError::TooFew { needed: 1, got: 0 });
    }
    let n = predicted.len() as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut sum_abs = 0.0;
    for (p, o) in predicted.iter().zip(observed) {
        let e = p - o;
        sum += e;
        sum_sq += e * e;
        sum_abs += e.abs();
    }
    Ok(Metrics { me: sum / n, rmse: (sum_sq / n).sqrt(), mae: sum_abs / n })
}
