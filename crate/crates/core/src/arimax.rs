//! ARIMAX estimation by conditional sum of squares.
//!
//! The model for the `d`-times differenced series `W_t` with exogenous
//! regressors `Y_1..Y_n` is
//!
//! ```text
//! W_t = η + Σ φ_i·W_{t−i} − Σ θ_j·e_{t−j} + Σ ζ_l·Y_l(t) + e_t
//! ```
//!
//! — note the *subtracted* moving-average terms and the contemporaneous
//! exogenous contribution. Innovations are computed recursively with
//! pre-sample observations replaced by the series mean and pre-sample
//! innovations by zero; the sum of squared innovations (CSS) is the
//! estimation objective, minimized by Nelder–Mead with a BFGS polish.
//! Moving-average invertibility is enforced by optimizing an
//! unconstrained vector that maps to θ through a partial-autocorrelation
//! transform.
//!
//! Order selection evaluates a (p, d, q) grid in parallel and ranks cells
//! by the corrected Akaike criterion (AICc) with deterministic
//! tie-breaking: smaller p+q first, then smaller p, then smaller d.

use crate::exec;
use crate::linalg::{self, Matrix};
use crate::timeseries::{diff_n, TimeSeries, TimeSeriesError};
use std::fmt;
use thiserror::Error;

mod optim;

/// Errors from model estimation and evaluation.
#[derive(Debug, Error)]
pub enum ArimaxError {
    /// The series cannot support the requested order.
    #[error("series too short for order {order}: need more than {limit} observations, got {got}")]
    TooShort { order: ArimaxOrder, limit: usize, got: usize },
    /// Exogenous series must be aligned with the dependent series.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// A caller-provided argument is out of range.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Neither optimization stage met its tolerance within the caps.
    #[error(
        "optimizer failed to converge for order {order} \
         (simplex {simplex_iters} + polish {polish_iters} iterations, best CSS {best_css:.6e})"
    )]
    NonConvergence {
        order: ArimaxOrder,
        simplex_iters: usize,
        polish_iters: usize,
        best_css: f64,
    },
    /// AICc is undefined when `nobs ≤ k + 1`.
    #[error("AICc undefined: {nobs} observations with {k} parameters")]
    UndefinedCriterion { nobs: usize, k: usize },
    /// Every cell of the selection grid failed.
    #[error("order selection failed: all {attempted} grid cells errored (first: {first_error})")]
    SelectionFailure { attempted: usize, first_error: String },
    /// A model text record could not be parsed.
    #[error("malformed model record: {0}")]
    MalformedRecord(String),
    /// Errors raised while wrapping results into series containers.
    #[error(transparent)]
    Series(#[from] TimeSeriesError),
}

/// Non-seasonal model order (autoregressive, differencing, moving-average).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArimaxOrder {
    /// Autoregressive lags.
    pub p: usize,
    /// Differencing depth.
    pub d: usize,
    /// Moving-average lags.
    pub q: usize,
}

impl ArimaxOrder {
    /// Convenience constructor.
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }
}

impl fmt::Display for ArimaxOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

/// Inclusive upper bounds for the order-selection grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderBounds {
    /// Largest autoregressive order tried (default 5).
    pub max_p: usize,
    /// Largest differencing depth tried (default 2).
    pub max_d: usize,
    /// Largest moving-average order tried (default 5).
    pub max_q: usize,
}

impl Default for OrderBounds {
    fn default() -> Self {
        Self { max_p: 5, max_d: 2, max_q: 5 }
    }
}

/// Floor applied to the innovation variance so the Gaussian log-likelihood
/// stays finite on exact fits (all-zero residuals). Candidate orders that
/// all hit the floor tie on AICc and fall through to the parsimony
/// tie-break.
const SIGMA2_FLOOR: f64 = 1e-300;

/// A fitted ARIMAX model.
#[derive(Debug, Clone, PartialEq)]
pub struct ArimaxModel {
    order: ArimaxOrder,
    exog_names: Vec<String>,
    eta: f64,
    phi: Vec<f64>,
    theta: Vec<f64>,
    zeta: Vec<f64>,
    sigma2: f64,
    log_likelihood: f64,
    aicc: f64,
    nobs: usize,
}

impl ArimaxModel {
    /// Assembles a model from explicit parts without estimation. Intended
    /// for record parsing and for constructing reference models in tests.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        order: ArimaxOrder,
        exog_names: Vec<String>,
        eta: f64,
        phi: Vec<f64>,
        theta: Vec<f64>,
        zeta: Vec<f64>,
        sigma2: f64,
        log_likelihood: f64,
        aicc: f64,
        nobs: usize,
    ) -> Result<Self, ArimaxError> {
        if phi.len() != order.p || theta.len() != order.q {
            return Err(ArimaxError::InvalidInput(format!(
                "coefficient counts ({}, {}) disagree with order {}",
                phi.len(),
                theta.len(),
                order
            )));
        }
        if zeta.len() != exog_names.len() {
            return Err(ArimaxError::InvalidInput(format!(
                "{} exogenous coefficients for {} names",
                zeta.len(),
                exog_names.len()
            )));
        }
        Ok(Self {
            order,
            exog_names,
            eta,
            phi,
            theta,
            zeta,
            sigma2,
            log_likelihood,
            aicc,
            nobs,
        })
    }

    /// Model order.
    pub fn order(&self) -> ArimaxOrder {
        self.order
    }

    /// Names of the exogenous regressors, in coefficient order.
    pub fn exog_names(&self) -> &[String] {
        &self.exog_names
    }

    /// Constant term (on the differenced scale).
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Autoregressive coefficients `φ_1..φ_p`.
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Moving-average coefficients `θ_1..θ_q` (entering with a minus sign).
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Exogenous coefficients `ζ_1..ζ_n`.
    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    /// Innovation variance estimate `CSS / nobs`.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Gaussian conditional log-likelihood at the optimum.
    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// Corrected Akaike information criterion.
    pub fn aicc(&self) -> f64 {
        self.aicc
    }

    /// Number of observations on the differenced scale.
    pub fn nobs(&self) -> usize {
        self.nobs
    }

    /// Serializes the model as a self-describing text record. Floats use
    /// the shortest round-trip format, so parsing restores them exactly.
    pub fn to_text_record(&self) -> String {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut out = String::from("arimax_model v1\n");
        out.push_str(&format!("order = {},{},{}\n", self.order.p, self.order.d, self.order.q));
        out.push_str(&format!("exog_names = {}\n", self.exog_names.join(",")));
        out.push_str(&format!("eta = {}\n", self.eta));
        out.push_str(&format!("phi = {}\n", join(&self.phi)));
        out.push_str(&format!("theta = {}\n", join(&self.theta)));
        out.push_str(&format!("zeta = {}\n", join(&self.zeta)));
        out.push_str(&format!("sigma2 = {}\n", self.sigma2));
        out.push_str(&format!("log_likelihood = {}\n", self.log_likelihood));
        out.push_str(&format!("aicc = {}\n", self.aicc));
        out.push_str(&format!("nobs = {}\n", self.nobs));
        out
    }

    /// Parses a record produced by [`Self::to_text_record`].
    pub fn from_text_record(text: &str) -> Result<Self, ArimaxError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default().trim();
        if header != "arimax_model v1" {
            return Err(ArimaxError::MalformedRecord(format!("unknown header '{header}'")));
        }
        let mut fields = std::collections::BTreeMap::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ArimaxError::MalformedRecord(format!("expected 'key = value', got '{line}'")))?;
            fields.insert(key.trim().to_string(), value.trim().to_string());
        }
        let get = |key: &str| {
            fields
                .get(key)
                .ok_or_else(|| ArimaxError::MalformedRecord(format!("missing field '{key}'")))
        };
        let parse_f64 = |key: &str| -> Result<f64, ArimaxError> {
            get(key)?
                .parse::<f64>()
                .map_err(|e| ArimaxError::MalformedRecord(format!("field '{key}': {e}")))
        };
        let parse_vec = |key: &str| -> Result<Vec<f64>, ArimaxError> {
            let raw = get(key)?;
            if raw.is_empty() {
                return Ok(Vec::new());
            }
            raw.split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|e| ArimaxError::MalformedRecord(format!("field '{key}': {e}")))
                })
                .collect()
        };
        let order_parts: Vec<usize> = get("order")?
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<usize>()
                    .map_err(|e| ArimaxError::MalformedRecord(format!("field 'order': {e}")))
            })
            .collect::<Result<_, _>>()?;
        if order_parts.len() != 3 {
            return Err(ArimaxError::MalformedRecord("order needs 3 components".into()));
        }
        let exog_names: Vec<String> = {
            let raw = get("exog_names")?;
            if raw.is_empty() {
                Vec::new()
            } else {
                raw.split(',').map(|s| s.trim().to_string()).collect()
            }
        };
        let nobs = get("nobs")?
            .parse::<usize>()
            .map_err(|e| ArimaxError::MalformedRecord(format!("field 'nobs': {e}")))?;
        Self::from_parts(
            ArimaxOrder::new(order_parts[0], order_parts[1], order_parts[2]),
            exog_names,
            parse_f64("eta")?,
            parse_vec("phi")?,
            parse_vec("theta")?,
            parse_vec("zeta")?,
            parse_f64("sigma2")?,
            parse_f64("log_likelihood")?,
            parse_f64("aicc")?,
            nobs,
        )
    }
}

/// Corrected Akaike information criterion.
///
/// `AICc = −2·LL + 2k + 2k(k+1)/(nobs − k − 1)`, defined only when
/// `nobs > k + 1`. `k` counts every estimated parameter including the
/// constant and the innovation variance.
pub fn aicc(log_likelihood: f64, k: usize, nobs: usize) -> Result<f64, ArimaxError> {
    if nobs <= k + 1 {
        return Err(ArimaxError::UndefinedCriterion { nobs, k });
    }
    let kf = k as f64;
    Ok(-2.0 * log_likelihood + 2.0 * kf + 2.0 * kf * (kf + 1.0) / (nobs as f64 - kf - 1.0))
}

// ---------------------------------------------------------------------------
// Estimation internals
// ---------------------------------------------------------------------------

/// Maps an unconstrained vector to invertible moving-average coefficients
/// through partial autocorrelations: `r_j = tanh(u_j)` feeds a
/// Durbin-style recursion whose output polynomial `1 + c·B + …` is always
/// invertible; the model's subtracted convention makes `θ = −c`.
fn ma_from_unconstrained(u: &[f64]) -> Vec<f64> {
    let q = u.len();
    let mut c: Vec<f64> = u.iter().map(|v| v.tanh()).collect();
    for k in 1..q {
        let ck = c[k];
        let prev = c[..k].to_vec();
        for j in 0..k {
            c[j] = prev[j] + ck * prev[k - 1 - j];
        }
    }
    c.iter().map(|v| -v).collect()
}

/// Innovations of the differenced series under the given coefficients.
///
/// Pre-sample observations are replaced by the mean of `w`; pre-sample
/// innovations by zero.
fn innovations(
    w: &[f64],
    exog: &[Vec<f64>],
    eta: f64,
    phi: &[f64],
    theta: &[f64],
    zeta: &[f64],
) -> Vec<f64> {
    let n = w.len();
    let mean_w = w.iter().sum::<f64>() / n as f64;
    let mut e = vec![0.0; n];
    for t in 0..n {
        let mut pred = eta;
        for (i, ph) in phi.iter().enumerate() {
            let lag = i + 1;
            pred += ph * if t >= lag { w[t - lag] } else { mean_w };
        }
        for (j, th) in theta.iter().enumerate() {
            let lag = j + 1;
            pred -= th * if t >= lag { e[t - lag] } else { 0.0 };
        }
        for (z, x) in zeta.iter().zip(exog) {
            pred += z * x[t];
        }
        e[t] = w[t] - pred;
    }
    e
}

/// Conditional sum of squares for explicit coefficients on already
/// differenced data. Non-finite accumulations map to +∞ so the optimizer
/// steers clear of explosive regions.
pub(crate) fn css_direct(
    w: &[f64],
    exog: &[Vec<f64>],
    eta: f64,
    phi: &[f64],
    theta: &[f64],
    zeta: &[f64],
) -> f64 {
    let css: f64 = innovations(w, exog, eta, phi, theta, zeta).iter().map(|e| e * e).sum();
    if css.is_finite() {
        css
    } else {
        f64::INFINITY
    }
}

struct CssProblem {
    w: Vec<f64>,
    exog: Vec<Vec<f64>>,
    p: usize,
    q: usize,
}

impl CssProblem {
    /// Parameter layout: `[η, φ_1..φ_p, u_1..u_q, ζ_1..ζ_n]` where `u`
    /// lives in the unconstrained moving-average space.
    fn split(&self, params: &[f64]) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
        let eta = params[0];
        let phi = params[1..1 + self.p].to_vec();
        let theta = ma_from_unconstrained(&params[1 + self.p..1 + self.p + self.q]);
        let zeta = params[1 + self.p + self.q..].to_vec();
        (eta, phi, theta, zeta)
    }

    fn objective(&self, params: &[f64]) -> f64 {
        let (eta, phi, theta, zeta) = self.split(params);
        css_direct(&self.w, &self.exog, eta, &phi, &theta, &zeta)
    }
}

fn check_alignment(y: &TimeSeries, exog: &[&TimeSeries]) -> Result<(), ArimaxError> {
    for x in exog {
        if x.start() != y.start() || x.len() != y.len() {
            return Err(ArimaxError::DimensionMismatch(format!(
                "exogenous series '{}' ({} x {} days) is not aligned with '{}' ({} x {} days)",
                x.name(),
                x.start(),
                x.len(),
                y.name(),
                y.start(),
                y.len()
            )));
        }
    }
    Ok(())
}

/// Least-squares warm start for the exogenous coefficients: regress the
/// differenced dependent on the differenced exogenous (no intercept);
/// singular designs fall back to zeros.
fn warm_start_zeta(w: &[f64], exog: &[Vec<f64>]) -> Vec<f64> {
    let k = exog.len();
    if k == 0 {
        return Vec::new();
    }
    let mut gram = Matrix::zeros(k, k);
    let mut rhs = vec![0.0; k];
    for a in 0..k {
        for b in 0..k {
            gram[(a, b)] = exog[a].iter().zip(&exog[b]).map(|(x, y)| x * y).sum();
        }
        rhs[a] = exog[a].iter().zip(w).map(|(x, y)| x * y).sum();
    }
    linalg::solve(&gram, &rhs).unwrap_or_else(|_| vec![0.0; k])
}

/// Fits an ARIMAX model of the given order.
///
/// The dependent series and each exogenous series are differenced `d`
/// times; coefficients minimize the conditional sum of squares via
/// Nelder–Mead (φ, θ, ζ start at zero / least squares, η at the residual
/// mean) followed by a BFGS polish. Errors on short series, misaligned
/// exogenous inputs, or optimizer non-convergence.
pub fn fit(
    y: &TimeSeries,
    exog: &[&TimeSeries],
    order: ArimaxOrder,
) -> Result<ArimaxModel, ArimaxError> {
    check_alignment(y, exog)?;
    let n_exog = exog.len();
    let limit = order.p + order.q + n_exog + order.d + 1;
    if y.len() <= limit {
        return Err(ArimaxError::TooShort { order, limit, got: y.len() });
    }

    let w = diff_n(y.values(), order.d);
    let xd: Vec<Vec<f64>> = exog.iter().map(|x| diff_n(x.values(), order.d)).collect();
    let nobs = w.len();

    let zeta0 = warm_start_zeta(&w, &xd);
    let eta0 = {
        let mut acc = 0.0;
        for (t, wt) in w.iter().enumerate() {
            let fit: f64 = zeta0.iter().zip(&xd).map(|(z, x)| z * x[t]).sum();
            acc += wt - fit;
        }
        acc / nobs as f64
    };
    let mut params0 = vec![eta0];
    params0.extend(std::iter::repeat(0.0).take(order.p + order.q));
    params0.extend_from_slice(&zeta0);

    let problem = CssProblem { w, exog: xd, p: order.p, q: order.q };
    let objective = |params: &[f64]| problem.objective(params);
    let stage1 = optim::nelder_mead(objective, &params0, optim::MAX_SIMPLEX_ITER);
    let stage2 = optim::bfgs(objective, &stage1.x, optim::MAX_POLISH_ITER);
    let (best_x, best_css) = if stage2.value <= stage1.value {
        (stage2.x.clone(), stage2.value)
    } else {
        (stage1.x.clone(), stage1.value)
    };
    if !(stage1.converged || stage2.converged) {
        return Err(ArimaxError::NonConvergence {
            order,
            simplex_iters: stage1.iterations,
            polish_iters: stage2.iterations,
            best_css,
        });
    }

    let (eta, phi, theta, zeta) = problem.split(&best_x);
    let sigma2 = (best_css / nobs as f64).max(SIGMA2_FLOOR);
    let log_likelihood =
        -0.5 * nobs as f64 * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let k = order.p + order.q + n_exog + 2;
    let aicc_value = aicc(log_likelihood, k, nobs)?;

    Ok(ArimaxModel {
        order,
        exog_names: exog.iter().map(|x| x.name().to_string()).collect(),
        eta,
        phi,
        theta,
        zeta,
        sigma2,
        log_likelihood,
        aicc: aicc_value,
        nobs,
    })
}

/// One-step-ahead in-sample predictions on the original scale.
///
/// On the differenced scale, indices with a complete lag history predict
/// `w[t] − e[t]` (the conditional mean given the past); indices inside
/// the first `max(p, q)` observations fall back to the constant plus the
/// exogenous contribution. Undifferencing adds back the observed history,
/// and the first `d` output values are seeded with the observations
/// themselves.
pub fn fitted_values(
    model: &ArimaxModel,
    y: &TimeSeries,
    exog: &[&TimeSeries],
) -> Result<TimeSeries, ArimaxError> {
    check_alignment(y, exog)?;
    if exog.len() != model.zeta.len() {
        return Err(ArimaxError::DimensionMismatch(format!(
            "model has {} exogenous coefficients but {} series were supplied",
            model.zeta.len(),
            exog.len()
        )));
    }
    let d = model.order.d;
    if y.len() <= d {
        return Err(ArimaxError::TooShort {
            order: model.order,
            limit: d,
            got: y.len(),
        });
    }
    let w = diff_n(y.values(), d);
    let xd: Vec<Vec<f64>> = exog.iter().map(|x| diff_n(x.values(), d)).collect();
    let e = innovations(&w, &xd, model.eta, &model.phi, &model.theta, &model.zeta);

    let warmup = model.order.p.max(model.order.q);
    let fitted_w: Vec<f64> = (0..w.len())
        .map(|t| {
            if t < warmup {
                let exog_part: f64 = model.zeta.iter().zip(&xd).map(|(z, x)| z * x[t]).sum();
                model.eta + exog_part
            } else {
                w[t] - e[t]
            }
        })
        .collect();

    let yv = y.values();
    let mut out = Vec::with_capacity(yv.len());
    out.extend_from_slice(&yv[..d]);
    for t in d..yv.len() {
        out.push(fitted_w[t - d] + undifference_step(yv, t, d));
    }
    Ok(TimeSeries::new("fitted", y.start(), out)?)
}

/// The observed-history part of undoing `d`-fold differencing at index
/// `t`: `Σ_{k=1..d} (−1)^{k+1}·C(d,k)·x[t−k]`.
fn undifference_step(history: &[f64], t: usize, d: usize) -> f64 {
    let mut acc = 0.0;
    let mut binom = 1.0;
    for k in 1..=d {
        binom *= (d - k + 1) as f64 / k as f64;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        acc += sign * binom * history[t - k];
    }
    acc
}

/// Multi-step point forecasts on the original scale.
///
/// Future innovations are set to their conditional mean of zero; future
/// autoregressive lags consume earlier forecasts. With exogenous
/// regressors, `exog_future` must supply one slice per regressor covering
/// all `steps` future days (original scale; differencing is applied
/// across the train/future boundary).
pub fn forecast(
    model: &ArimaxModel,
    y: &TimeSeries,
    exog: &[&TimeSeries],
    exog_future: &[&[f64]],
    steps: usize,
) -> Result<Vec<f64>, ArimaxError> {
    check_alignment(y, exog)?;
    if steps == 0 {
        return Err(ArimaxError::InvalidInput("steps must be >= 1".into()));
    }
    if exog.len() != model.zeta.len() || exog_future.len() != model.zeta.len() {
        return Err(ArimaxError::DimensionMismatch(format!(
            "model has {} exogenous coefficients but {} series / {} future slices were supplied",
            model.zeta.len(),
            exog.len(),
            exog_future.len()
        )));
    }
    for (x, fut) in exog.iter().zip(exog_future) {
        if fut.len() < steps {
            return Err(ArimaxError::DimensionMismatch(format!(
                "future values for '{}' cover {} steps, need {steps}",
                x.name(),
                fut.len()
            )));
        }
        if fut.iter().any(|v| !v.is_finite()) {
            return Err(ArimaxError::InvalidInput(format!(
                "future values for '{}' contain non-finite entries",
                x.name()
            )));
        }
    }
    let d = model.order.d;
    if y.len() <= d {
        return Err(ArimaxError::TooShort { order: model.order, limit: d, got: y.len() });
    }

    let w = diff_n(y.values(), d);
    let xd: Vec<Vec<f64>> = exog.iter().map(|x| diff_n(x.values(), d)).collect();
    // Differenced future exogenous values: difference across the
    // train/future boundary, then keep the future part.
    let xd_future: Vec<Vec<f64>> = exog
        .iter()
        .zip(exog_future)
        .map(|(x, fut)| {
            let mut joined = x.values().to_vec();
            joined.extend_from_slice(&fut[..steps]);
            let diffed = diff_n(&joined, d);
            diffed[diffed.len() - steps..].to_vec()
        })
        .collect();

    let e = innovations(&w, &xd, model.eta, &model.phi, &model.theta, &model.zeta);
    let nobs = w.len();
    let mean_w = w.iter().sum::<f64>() / nobs as f64;

    // Differenced-scale forecasts, appended to the observed history.
    let mut w_ext = w;
    for h in 0..steps {
        let t = nobs + h;
        let mut pred = model.eta;
        for (i, ph) in model.phi.iter().enumerate() {
            let lag = i + 1;
            pred += ph * if t >= lag { w_ext[t - lag] } else { mean_w };
        }
        for (j, th) in model.theta.iter().enumerate() {
            let lag = j + 1;
            // Future innovations are zero; past ones come from the fit.
            let lagged = if t >= lag && t - lag < nobs { e[t - lag] } else { 0.0 };
            pred -= th * lagged;
        }
        for (z, x) in model.zeta.iter().zip(&xd_future) {
            pred += z * x[h];
        }
        w_ext.push(pred);
    }

    // Undifference: each forecast adds back the (partly forecasted)
    // original-scale history.
    let mut y_ext = y.values().to_vec();
    for h in 0..steps {
        let t = y.len() + h;
        let w_hat = w_ext[nobs + h];
        y_ext.push(w_hat + undifference_step(&y_ext, t, d));
    }
    Ok(y_ext[y.len()..].to_vec())
}

/// Selection outcome: the winning model plus grid bookkeeping.
#[derive(Debug, Clone)]
pub struct OrderSelection {
    /// The winning fitted model.
    pub model: ArimaxModel,
    /// Grid cells attempted.
    pub attempted: usize,
    /// Grid cells that failed to fit, with their errors.
    pub failures: Vec<(ArimaxOrder, String)>,
}

/// Fits every order on the `(p, d, q)` grid and keeps the AICc-best model.
///
/// Cells are evaluated in parallel; the winner is chosen by scanning the
/// grid in a fixed order with the key `(AICc, p+q, p, d)`, so results are
/// identical regardless of thread count. Individual cell failures are
/// tolerated and reported; only a grid with no successful cell errors.
pub fn select_order(
    y: &TimeSeries,
    exog: &[&TimeSeries],
    bounds: OrderBounds,
) -> Result<OrderSelection, ArimaxError> {
    let mut grid = Vec::new();
    for d in 0..=bounds.max_d {
        for p in 0..=bounds.max_p {
            for q in 0..=bounds.max_q {
                grid.push(ArimaxOrder::new(p, d, q));
            }
        }
    }
    let results = exec::map_indexed(grid.len(), |i| fit(y, exog, grid[i]));

    let mut best: Option<ArimaxModel> = None;
    let mut failures = Vec::new();
    for (order, result) in grid.iter().zip(results) {
        match result {
            Ok(model) if model.aicc.is_finite() => {
                let better = match &best {
                    None => true,
                    Some(cur) => {
                        let key = |m: &ArimaxModel| {
                            (m.aicc, m.order.p + m.order.q, m.order.p, m.order.d)
                        };
                        let (na, ns, np, nd) = key(&model);
                        let (ca, cs, cp, cd) = key(cur);
                        na.total_cmp(&ca)
                            .then(ns.cmp(&cs))
                            .then(np.cmp(&cp))
                            .then(nd.cmp(&cd))
                            .is_lt()
                    }
                };
                if better {
                    best = Some(model);
                }
            }
            Ok(model) => {
                failures.push((*order, format!("non-finite AICc {}", model.aicc)));
            }
            Err(e) => failures.push((*order, e.to_string())),
        }
    }
    match best {
        Some(model) => Ok(OrderSelection { model, attempted: grid.len(), failures }),
        None => Err(ArimaxError::SelectionFailure {
            attempted: grid.len(),
            first_error: failures
                .first()
                .map(|(o, e)| format!("{o}: {e}"))
                .unwrap_or_else(|| "empty grid".into()),
        }),
    }
}
