//! Ensemble empirical mode decomposition (EEMD) of daily series.
//!
//! Empirical mode decomposition splits a signal into a fixed number of
//! intrinsic mode functions (IMFs) — oscillatory components extracted
//! fastest-first — plus a residual trend. One sifting pass subtracts the
//! mean of the upper and lower extrema envelopes, each built as a natural
//! cubic spline through the signal's local maxima (resp. minima) after
//! mirror-extending one reflected extremum past each boundary.
//!
//! The ensemble variant runs EMD over `ensemble_size` copies of the input
//! perturbed by seeded white noise with standard deviation
//! `noise_ratio × σ(signal)`, then averages the per-level results. Noise
//! cancels at rate `1/√ensemble_size`, so the averaged levels still sum
//! back to the input to within a small, quantifiable error, while mode
//! mixing is greatly reduced.
//!
//! Every ensemble member draws its noise from a stream seeded by
//! `(seed, member index)`, so results are bit-identical across runs and
//! thread counts; the member loop is data-parallel under the `parallel`
//! feature.

use crate::exec;
use crate::seed;
use crate::timeseries::{TimeSeries, TimeSeriesError};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use std::io;

use thiserror::Error;

/// Errors from decomposition routines.
#[derive(Debug, Error)]
pub enum EemdError {
    /// Extrema detection and sifting need at least 3 samples.
    #[error("signal too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    /// A configuration field is out of range.
    #[error("invalid EEMD configuration: {0}")]
    InvalidConfig(String),
    /// Envelope construction needs at least two maxima and two minima.
    #[error("degenerate envelope: {maxima} maxima / {minima} minima (need 2 of each)")]
    DegenerateEnvelope { maxima: usize, minima: usize },
    /// Spline knots must be strictly increasing and within the signal.
    #[error("invalid spline knots: {0}")]
    BadKnots(String),
    /// Errors raised while wrapping results into series containers.
    #[error(transparent)]
    Series(#[from] TimeSeriesError),
}

// ---------------------------------------------------------------------------
// Extrema detection
// ---------------------------------------------------------------------------

/// Interior extrema of a signal, as sample indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extrema {
    /// Indices of strict local maxima, ascending.
    pub maxima: Vec<usize>,
    /// Indices of strict local minima, ascending.
    pub minima: Vec<usize>,
}

/// Finds the interior extrema of a signal.
///
/// A run of equal values (a plateau) counts as a single extremum at its
/// midpoint index when the samples flanking the run are both lower
/// (maximum) or both higher (minimum). Runs touching either boundary are
/// not extrema, so monotone signals report none. Needs at least 3 samples.
pub fn find_extrema(x: &[f64]) -> Result<Extrema, EemdError> {
    let n = x.len();
    if n < 3 {
        return Err(EemdError::TooShort { needed: 3, got: n });
    }
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && x[end + 1] == x[start] {
            end += 1;
        }
        if start > 0 && end < n - 1 {
            let v = x[start];
            let left = x[start - 1];
            let right = x[end + 1];
            let mid = (start + end) / 2;
            if left < v && right < v {
                maxima.push(mid);
            } else if left > v && right > v {
                minima.push(mid);
            }
        }
        start = end + 1;
    }
    Ok(Extrema { maxima, minima })
}

// ---------------------------------------------------------------------------
// Natural cubic spline
// ---------------------------------------------------------------------------

/// Natural cubic spline through strictly increasing knots.
///
/// Second derivatives vanish at both end knots; between knots the curve is
/// the classic piecewise cubic interpolant.
struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots (tridiagonal solve).
    y2: Vec<f64>,
}

impl CubicSpline {
    fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        debug_assert!(n >= 2);
        let mut y2 = vec![0.0; n];
        let mut u = vec![0.0; n];
        // Forward sweep of the tridiagonal system; natural boundary keeps
        // y2[0] = y2[n-1] = 0.
        for i in 1..n - 1 {
            let sig = (xs[i] - xs[i - 1]) / (xs[i + 1] - xs[i - 1]);
            let p = sig * y2[i - 1] + 2.0;
            y2[i] = (sig - 1.0) / p;
            let slope_hi = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
            let slope_lo = (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
            u[i] = (6.0 * (slope_hi - slope_lo) / (xs[i + 1] - xs[i - 1]) - sig * u[i - 1]) / p;
        }
        for i in (1..n - 1).rev() {
            y2[i] = y2[i] * y2[i + 1] + u[i];
        }
        Self { xs, ys, y2 }
    }

    fn evaluate(&self, t: f64) -> f64 {
        // Locate the knot interval by binary search; arguments outside the
        // knot span extrapolate the end cubics.
        let n = self.xs.len();
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.xs[mid] > t {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let h = self.xs[hi] - self.xs[lo];
        let a = (self.xs[hi] - t) / h;
        let b = (t - self.xs[lo]) / h;
        a * self.ys[lo]
            + b * self.ys[hi]
            + ((a * a * a - a) * self.y2[lo] + (b * b * b - b) * self.y2[hi]) * h * h / 6.0
    }
}

/// Builds an envelope as a natural cubic spline through extrema knots,
/// evaluated at every sample index `0..length`.
///
/// Knots are `(sample index, value)` pairs with strictly increasing
/// indices inside the signal. Before splining, one reflected extremum is
/// appended past each boundary (the first/last knot mirrored across
/// sample 0 / `length − 1`; when that knot already sits on the boundary
/// the next knot is mirrored instead), which anchors the spline's ends.
/// Needs at least 2 knots.
pub fn spline_envelope(knots: &[(usize, f64)], length: usize) -> Result<Vec<f64>, EemdError> {
    if knots.len() < 2 {
        return Err(EemdError::BadKnots(format!("need at least 2 knots, got {}", knots.len())));
    }
    if length < 2 {
        return Err(EemdError::TooShort { needed: 2, got: length });
    }
    for pair in knots.windows(2) {
        if pair[1].0 <= pair[0].0 {
            return Err(EemdError::BadKnots(format!(
                "knot indices not strictly increasing: {} then {}",
                pair[0].0, pair[1].0
            )));
        }
    }
    if let Some(last) = knots.last() {
        if last.0 >= length {
            return Err(EemdError::BadKnots(format!(
                "knot index {} outside signal of length {length}",
                last.0
            )));
        }
    }
    if knots.iter().any(|(_, v)| !v.is_finite()) {
        return Err(EemdError::BadKnots("non-finite knot value".into()));
    }

    let first = knots[0];
    let second = knots[1];
    let last = knots[knots.len() - 1];
    let second_last = knots[knots.len() - 2];
    let right_edge = (length - 1) as f64;

    let left_ghost = if first.0 > 0 {
        (-(first.0 as f64), first.1)
    } else {
        (-(second.0 as f64), second.1)
    };
    let right_ghost = if (last.0 as f64) < right_edge {
        (2.0 * right_edge - last.0 as f64, last.1)
    } else {
        (2.0 * right_edge - second_last.0 as f64, second_last.1)
    };

    let mut xs = Vec::with_capacity(knots.len() + 2);
    let mut ys = Vec::with_capacity(knots.len() + 2);
    xs.push(left_ghost.0);
    ys.push(left_ghost.1);
    for &(i, v) in knots {
        xs.push(i as f64);
        ys.push(v);
    }
    xs.push(right_ghost.0);
    ys.push(right_ghost.1);

    let spline = CubicSpline::new(xs, ys);
    Ok((0..length).map(|i| spline.evaluate(i as f64)).collect())
}

/// Upper/lower extrema envelopes and their pointwise mean.
#[derive(Debug, Clone)]
pub struct Envelope {
    /// Spline through the local maxima.
    pub upper: Vec<f64>,
    /// Spline through the local minima.
    pub lower: Vec<f64>,
    /// Pointwise mean of `upper` and `lower`.
    pub mean: Vec<f64>,
}

/// Builds both extrema envelopes of a signal.
///
/// Errors with [`EemdError::DegenerateEnvelope`] when the signal has fewer
/// than two maxima or two minima (e.g. monotone input).
pub fn envelope(x: &[f64]) -> Result<Envelope, EemdError> {
    let ext = find_extrema(x)?;
    if ext.maxima.len() < 2 || ext.minima.len() < 2 {
        return Err(EemdError::DegenerateEnvelope {
            maxima: ext.maxima.len(),
            minima: ext.minima.len(),
        });
    }
    let knots = |idx: &[usize]| idx.iter().map(|&i| (i, x[i])).collect::<Vec<_>>();
    let upper = spline_envelope(&knots(&ext.maxima), x.len())?;
    let lower = spline_envelope(&knots(&ext.minima), x.len())?;
    let mean = upper.iter().zip(&lower).map(|(u, l)| 0.5 * (u + l)).collect();
    Ok(Envelope { upper, lower, mean })
}

// ---------------------------------------------------------------------------
// Sifting and EMD
// ---------------------------------------------------------------------------

/// Result of sifting one mode out of a signal.
#[derive(Debug, Clone)]
pub struct Sifted {
    /// The extracted mode. All zeros when the input was degenerate.
    pub imf: Vec<f64>,
    /// `input − imf`, carried into the next extraction level.
    pub remainder: Vec<f64>,
    /// True when the input had too few extrema to build envelopes, so no
    /// oscillation could be extracted.
    pub degenerate: bool,
}

/// Extracts one mode by iterated envelope-mean subtraction.
///
/// Each iteration subtracts the mean of the upper and lower envelopes
/// from the working signal; after `iterations` passes the working signal
/// is the mode and `remainder = input − imf` exactly. A signal with fewer
/// than two maxima or two minima yields an all-zero mode with
/// `remainder == input` (flagged `degenerate`); if envelopes degenerate
/// mid-way, the passes so far stand.
pub fn sift(z: &[f64], iterations: usize) -> Result<Sifted, EemdError> {
    if iterations == 0 {
        return Err(EemdError::InvalidConfig("sift_iterations must be >= 1".into()));
    }
    if z.len() < 3 {
        return Err(EemdError::TooShort { needed: 3, got: z.len() });
    }
    let mut d = z.to_vec();
    for pass in 0..iterations {
        match envelope(&d) {
            Ok(env) => {
                for (v, m) in d.iter_mut().zip(&env.mean) {
                    *v -= m;
                }
            }
            Err(EemdError::DegenerateEnvelope { .. }) if pass == 0 => {
                return Ok(Sifted {
                    imf: vec![0.0; z.len()],
                    remainder: z.to_vec(),
                    degenerate: true,
                });
            }
            Err(EemdError::DegenerateEnvelope { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    let remainder = z.iter().zip(&d).map(|(orig, imf)| orig - imf).collect();
    Ok(Sifted { imf: d, remainder, degenerate: false })
}

/// Plain EMD output on raw value slices.
#[derive(Debug, Clone)]
pub struct RawDecomposition {
    /// Extracted modes, fastest first; always exactly `levels` entries
    /// (zero-filled past the point where extraction degenerated).
    pub imfs: Vec<Vec<f64>>,
    /// What remains after the last extracted mode.
    pub residual: Vec<f64>,
}

/// Empirical mode decomposition into exactly `levels` modes plus a
/// residual.
///
/// Level `j` applies [`sift`] to the running remainder. When a level
/// degenerates (too few extrema), that level and all later ones are
/// zero-filled and the running remainder becomes the residual, so the
/// output arity is always `levels`. The components sum back to the input
/// exactly up to floating-point round-off.
pub fn emd(x: &[f64], levels: usize, sift_iterations: usize) -> Result<RawDecomposition, EemdError> {
    if levels == 0 {
        return Err(EemdError::InvalidConfig("levels must be >= 1".into()));
    }
    if x.len() < 3 {
        return Err(EemdError::TooShort { needed: 3, got: x.len() });
    }
    let mut imfs = Vec::with_capacity(levels);
    let mut z = x.to_vec();
    for _ in 0..levels {
        let sifted = sift(&z, sift_iterations)?;
        if sifted.degenerate {
            break;
        }
        imfs.push(sifted.imf);
        z = sifted.remainder;
    }
    while imfs.len() < levels {
        imfs.push(vec![0.0; x.len()]);
    }
    Ok(RawDecomposition { imfs, residual: z })
}

// ---------------------------------------------------------------------------
// Ensemble EMD
// ---------------------------------------------------------------------------

/// Configuration for [`eemd`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EemdConfig {
    /// Number of noise-perturbed ensemble members (default 125).
    pub ensemble_size: usize,
    /// Noise standard deviation as a fraction of the signal's standard
    /// deviation (default 0.01).
    pub noise_ratio: f64,
    /// Number of modes to extract (default 5).
    pub levels: usize,
    /// Envelope-subtraction passes per mode (default 1).
    pub sift_iterations: usize,
    /// Master seed for the per-member noise streams.
    pub seed: u64,
}

impl Default for EemdConfig {
    fn default() -> Self {
        Self { ensemble_size: 125, noise_ratio: 0.01, levels: 5, sift_iterations: 1, seed: 0 }
    }
}

impl EemdConfig {
    fn validate(&self) -> Result<(), EemdError> {
        if self.ensemble_size == 0 {
            return Err(EemdError::InvalidConfig("ensemble_size must be >= 1".into()));
        }
        if !(self.noise_ratio.is_finite() && self.noise_ratio >= 0.0) {
            return Err(EemdError::InvalidConfig(format!(
                "noise_ratio must be finite and >= 0, got {}",
                self.noise_ratio
            )));
        }
        if self.levels == 0 {
            return Err(EemdError::InvalidConfig("levels must be >= 1".into()));
        }
        if self.sift_iterations == 0 {
            return Err(EemdError::InvalidConfig("sift_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Ensemble decomposition of a daily series.
#[derive(Debug, Clone)]
pub struct Decomposition {
    source_name: String,
    imfs: Vec<TimeSeries>,
    residual: TimeSeries,
}

impl Decomposition {
    /// Name of the decomposed series.
    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    /// Ensemble-averaged modes, fastest first, named `imf_1..imf_s`.
    pub fn imfs(&self) -> &[TimeSeries] {
        &self.imfs
    }

    /// Ensemble-averaged residual trend.
    pub fn residual(&self) -> &TimeSeries {
        &self.residual
    }

    /// Number of modelling levels: one per mode plus the residual.
    pub fn num_levels(&self) -> usize {
        self.imfs.len() + 1
    }

    /// Level accessor: levels `1..=s` are the modes, level `s + 1` is the
    /// residual.
    pub fn level(&self, level: usize) -> Option<&TimeSeries> {
        if level == 0 || level > self.num_levels() {
            return None;
        }
        if level <= self.imfs.len() {
            Some(&self.imfs[level - 1])
        } else {
            Some(&self.residual)
        }
    }

    /// Pointwise sum of all modes and the residual.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.residual.values().to_vec();
        for imf in &self.imfs {
            for (o, v) in out.iter_mut().zip(imf.values()) {
                *o += v;
            }
        }
        out
    }

    /// Writes the decomposition as CSV: `date,imf_1,..,imf_s,residual`.
    pub fn write_csv<W: io::Write>(&self, w: &mut W, date_format: &str) -> io::Result<()> {
        write!(w, "date")?;
        for j in 1..=self.imfs.len() {
            write!(w, ",imf_{j}")?;
        }
        writeln!(w, ",residual")?;
        for i in 0..self.residual.len() {
            write!(w, "{}", self.residual.date_at(i).format(date_format))?;
            for imf in &self.imfs {
                write!(w, ",{}", imf.values()[i])?;
            }
            writeln!(w, ",{}", self.residual.values()[i])?;
        }
        Ok(())
    }
}

/// Population standard deviation (divides by N).
fn population_std(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Ensemble empirical mode decomposition of a series.
///
/// Runs [`emd`] over `ensemble_size` noise-perturbed copies of the input
/// (noise std = `noise_ratio × σ(input)`, one seeded stream per member)
/// and averages each level across members in member order. A zero-variance
/// input receives no noise and reduces to plain EMD.
pub fn eemd(x: &TimeSeries, config: &EemdConfig) -> Result<Decomposition, EemdError> {
    config.validate()?;
    if x.len() < 3 {
        return Err(EemdError::TooShort { needed: 3, got: x.len() });
    }
    let values = x.values();
    let n = values.len();
    let sigma_noise = config.noise_ratio * population_std(values);

    let members = exec::map_indexed(config.ensemble_size, |k| -> Result<RawDecomposition, EemdError> {
        let perturbed = if sigma_noise > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(config.seed, k as u64));
            let normal = Normal::new(0.0, sigma_noise)
                .map_err(|e| EemdError::InvalidConfig(format!("noise distribution: {e}")))?;
            values.iter().map(|v| v + rng.sample(normal)).collect::<Vec<f64>>()
        } else {
            values.to_vec()
        };
        emd(&perturbed, config.levels, config.sift_iterations)
    });

    // Average across members strictly in member order so the result does
    // not depend on scheduling.
    let mut imf_sums = vec![vec![0.0; n]; config.levels];
    let mut residual_sum = vec![0.0; n];
    for member in members {
        let member = member?;
        for (sum, imf) in imf_sums.iter_mut().zip(&member.imfs) {
            for (s, v) in sum.iter_mut().zip(imf) {
                *s += v;
            }
        }
        for (s, v) in residual_sum.iter_mut().zip(&member.residual) {
            *s += v;
        }
    }
    let scale = 1.0 / config.ensemble_size as f64;
    let imfs = imf_sums
        .into_iter()
        .enumerate()
        .map(|(j, mut sum)| {
            sum.iter_mut().for_each(|v| *v *= scale);
            TimeSeries::new(format!("imf_{}", j + 1), x.start(), sum)
        })
        .collect::<Result<Vec<_>, _>>()?;
    residual_sum.iter_mut().for_each(|v| *v *= scale);
    let residual = TimeSeries::new("residual", x.start(), residual_sum)?;

    Ok(Decomposition { source_name: x.name().to_string(), imfs, residual })
}
