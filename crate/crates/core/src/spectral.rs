//! City graphs, Laplacian spectra, and graph Fourier filtering.
//!
//! Cities form a complete weighted graph. Edge weights come from
//! great-circle distances in kilometres, either literally (the raw
//! distance) or through a Gaussian similarity kernel. The combinatorial
//! Laplacian `L = D − W` is eigendecomposed at build time; its
//! eigenvectors define the graph Fourier transform used by the anomaly
//! detector (high-frequency accentuation) and the normalizer (low-pass).
//!
//! Eigenpairs are sorted by ascending eigenvalue with deterministic
//! tie-breaking: each eigenvector is sign-normalized (first non-zero
//! entry positive) and exact eigenvalue ties are ordered lexicographically
//! by eigenvector entries, so degenerate spectra — routine for complete
//! graphs — always produce the same basis.

use crate::linalg::{self, LinalgError, Matrix};
use crate::timeseries::PanelDataset;
use std::collections::BTreeSet;
use std::io;
use thiserror::Error;

/// Mean Earth radius in kilometres.
const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Entries smaller than this are treated as zero during eigenvector
/// sign normalization.
const SIGN_EPS: f64 = 1e-12;

/// Errors from graph construction and spectral filtering.
#[derive(Debug, Error)]
pub enum SpectralError {
    /// A graph needs at least two nodes.
    #[error("graph too small: got {got} cities, need at least 2")]
    TooSmall { got: usize },
    /// Node identifiers must be distinct.
    #[error("duplicate city id '{0}'")]
    DuplicateNode(String),
    /// Latitude/longitude out of range or non-finite.
    #[error("bad coordinate for city '{city}': lat {lat}, lon {lon}")]
    BadCoordinate { city: String, lat: f64, lon: f64 },
    /// Signal length does not match the node count.
    #[error("dimension mismatch: signal length {got}, graph has {expected} nodes")]
    DimensionMismatch { expected: usize, got: usize },
    /// Filter parameters outside their documented domain.
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    /// Signals must be finite.
    #[error("non-finite signal value at position {0}")]
    NonFinite(usize),
    /// Eigendecomposition failure (should not occur for symmetric input).
    #[error(transparent)]
    Eigen(#[from] LinalgError),
}

/// Edge-weight construction mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// `w_ij` is the great-circle distance in kilometres.
    LiteralDistance,
    /// `w_ij = exp(−d_ij² / (2θ²))` with `θ` the median pairwise
    /// distance; co-located inputs (θ = 0) degrade to unit weights.
    GaussianKernel,
}

/// Great-circle distance between two lat/lon points in kilometres.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let phi1 = lat1.to_radians();
    let phi2 = lat2.to_radians();
    let dphi = (lat2 - lat1).to_radians();
    let dlambda = (lon2 - lon1).to_radians();
    let a = (dphi / 2.0).sin().powi(2)
        + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().atan2((1.0 - a).sqrt())
}

/// A complete weighted city graph with its Laplacian spectrum.
#[derive(Debug, Clone)]
pub struct CityGraph {
    node_ids: Vec<String>,
    weights: Matrix,
    laplacian: Matrix,
    eigenvalues: Vec<f64>,
    /// Column `l` is the eigenvector paired with `eigenvalues[l]`.
    eigenvectors: Matrix,
}

/// A value per node, ordered as the graph's node ids.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSignal {
    values: Vec<f64>,
}

impl GraphSignal {
    /// Wraps per-node values; every value must be finite.
    pub fn new(values: Vec<f64>) -> Result<Self, SpectralError> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite(pos));
        }
        Ok(Self { values })
    }

    /// Per-node values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Consumes the signal, returning the raw values.
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// A spectral filter acting on graph Fourier coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralFilter {
    /// Multiplies coefficient `l` by `1 + α·λ_l/λ_max`: unit gain at the
    /// constant mode, amplified high frequencies.
    Accentuate {
        /// Gain knob `α ≥ 0`.
        alpha: f64,
    },
    /// Keeps the `ceil(κ·N)` lowest-frequency coefficients and zeroes
    /// the rest.
    Lowpass {
        /// Cutoff fraction `κ ∈ (0, 1]`.
        kappa: f64,
    },
}

impl SpectralFilter {
    /// High-frequency accentuator with gain `α ≥ 0`.
    pub fn accentuate(alpha: f64) -> Result<Self, SpectralError> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(SpectralError::InvalidFilter(format!(
                "accentuate gain must be finite and >= 0, got {alpha}"
            )));
        }
        Ok(Self::Accentuate { alpha })
    }

    /// Low-pass filter keeping the fraction `κ ∈ (0, 1]` of the spectrum.
    pub fn lowpass(kappa: f64) -> Result<Self, SpectralError> {
        if !kappa.is_finite() || kappa <= 0.0 || kappa > 1.0 {
            return Err(SpectralError::InvalidFilter(format!(
                "lowpass cutoff must lie in (0, 1], got {kappa}"
            )));
        }
        Ok(Self::Lowpass { kappa })
    }
}

/// Builds the complete city graph and eigendecomposes its Laplacian.
///
/// Weights follow the chosen mode; the Laplacian is `L = D − W` with `D`
/// the diagonal degree matrix. Construction fails on fewer than two
/// cities, duplicate ids, or out-of-range coordinates.
pub fn build_graph(
    cities: &[(String, f64, f64)],
    mode: WeightMode,
) -> Result<CityGraph, SpectralError> {
    let n = cities.len();
    if n < 2 {
        return Err(SpectralError::TooSmall { got: n });
    }
    let mut seen = BTreeSet::new();
    for (id, lat, lon) in cities {
        if !seen.insert(id.as_str()) {
            return Err(SpectralError::DuplicateNode(id.clone()));
        }
        let ok = lat.is_finite()
            && lon.is_finite()
            && (-90.0..=90.0).contains(lat)
            && (-180.0..=180.0).contains(lon);
        if !ok {
            return Err(SpectralError::BadCoordinate { city: id.clone(), lat: *lat, lon: *lon });
        }
    }

    let mut distances = Matrix::zeros(n, n);
    let mut pairwise = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = haversine_km(cities[i].1, cities[i].2, cities[j].1, cities[j].2);
            distances[(i, j)] = d;
            distances[(j, i)] = d;
            pairwise.push(d);
        }
    }

    let mut weights = Matrix::zeros(n, n);
    match mode {
        WeightMode::LiteralDistance => {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        weights[(i, j)] = distances[(i, j)];
                    }
                }
            }
        }
        WeightMode::GaussianKernel => {
            pairwise.sort_by(f64::total_cmp);
            let mid = pairwise.len() / 2;
            let theta = if pairwise.len() % 2 == 1 {
                pairwise[mid]
            } else {
                0.5 * (pairwise[mid - 1] + pairwise[mid])
            };
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        weights[(i, j)] = if theta == 0.0 {
                            1.0
                        } else {
                            let d = distances[(i, j)];
                            (-d * d / (2.0 * theta * theta)).exp()
                        };
                    }
                }
            }
        }
    }

    let mut laplacian = Matrix::zeros(n, n);
    for i in 0..n {
        let degree: f64 = (0..n).map(|j| weights[(i, j)]).sum();
        for j in 0..n {
            laplacian[(i, j)] = if i == j { degree } else { -weights[(i, j)] };
        }
    }

    let eigen = linalg::sym_eigen(&laplacian)?;
    let (eigenvalues, eigenvectors) = sort_eigenpairs(&eigen.values, &eigen.vectors);

    Ok(CityGraph {
        node_ids: cities.iter().map(|(id, _, _)| id.clone()).collect(),
        weights,
        laplacian,
        eigenvalues,
        eigenvectors,
    })
}

/// Builds a graph from a panel's city records, in panel (id-sorted) order.
pub fn graph_from_panel(
    panel: &PanelDataset,
    mode: WeightMode,
) -> Result<CityGraph, SpectralError> {
    let cities: Vec<(String, f64, f64)> = panel
        .cities()
        .iter()
        .map(|c| (c.city_id().to_string(), c.lat(), c.lon()))
        .collect();
    build_graph(&cities, mode)
}

/// Sorts eigenpairs by ascending eigenvalue, sign-normalizing each vector
/// (first entry of magnitude > 1e−12 made positive) and breaking exact
/// eigenvalue ties lexicographically on vector entries.
fn sort_eigenpairs(values: &[f64], vectors: &Matrix) -> (Vec<f64>, Matrix) {
    let n = values.len();
    let mut columns: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|l| {
            let mut col: Vec<f64> = (0..n).map(|r| vectors[(r, l)]).collect();
            if let Some(first) = col.iter().find(|v| v.abs() > SIGN_EPS) {
                if *first < 0.0 {
                    for v in &mut col {
                        *v = -*v;
                    }
                }
            }
            (values[l], col)
        })
        .collect();
    columns.sort_by(|a, b| {
        a.0.total_cmp(&b.0).then_with(|| {
            for (x, y) in a.1.iter().zip(&b.1) {
                let ord = x.total_cmp(y);
                if ord != std::cmp::Ordering::Equal {
                    return ord;
                }
            }
            std::cmp::Ordering::Equal
        })
    });
    let mut sorted_values = Vec::with_capacity(n);
    let mut sorted_vectors = Matrix::zeros(n, n);
    for (l, (value, col)) in columns.into_iter().enumerate() {
        sorted_values.push(value);
        for (r, v) in col.into_iter().enumerate() {
            sorted_vectors[(r, l)] = v;
        }
    }
    (sorted_values, sorted_vectors)
}

impl CityGraph {
    /// Node identifiers in signal order.
    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    /// Always false: construction requires at least two nodes.
    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    /// Symmetric weight matrix with zero diagonal.
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    /// Combinatorial Laplacian `D − W`.
    pub fn laplacian(&self) -> &Matrix {
        &self.laplacian
    }

    /// Eigenvalues in non-decreasing order (`λ_1 ≈ 0` first).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvector matrix; column `l` pairs with `λ_l`.
    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    /// Writes the undirected edge list as CSV (`id_i,id_j,w_ij`).
    pub fn write_edge_list<W: io::Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "id_i,id_j,w_ij")?;
        let n = self.len();
        for i in 0..n {
            for j in i + 1..n {
                writeln!(
                    out,
                    "{},{},{}",
                    self.node_ids[i],
                    self.node_ids[j],
                    self.weights[(i, j)]
                )?;
            }
        }
        Ok(())
    }

    /// Writes the spectrum as CSV (`index,eigenvalue`), 1-based indices.
    pub fn write_spectrum<W: io::Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "index,eigenvalue")?;
        for (l, lambda) in self.eigenvalues.iter().enumerate() {
            writeln!(out, "{},{}", l + 1, lambda)?;
        }
        Ok(())
    }

    fn check_len(&self, got: usize) -> Result<(), SpectralError> {
        if got != self.len() {
            return Err(SpectralError::DimensionMismatch { expected: self.len(), got });
        }
        Ok(())
    }
}

/// Graph Fourier transform: coefficients `x̂ = Uᵀ·x`, ordered by
/// ascending eigenvalue.
pub fn gft(graph: &CityGraph, signal: &GraphSignal) -> Result<GraphSignal, SpectralError> {
    graph.check_len(signal.values.len())?;
    GraphSignal::new(graph.eigenvectors.transpose_matvec(&signal.values)?)
}

/// Inverse graph Fourier transform: `x = U·x̂`.
pub fn igft(graph: &CityGraph, spectrum: &GraphSignal) -> Result<GraphSignal, SpectralError> {
    graph.check_len(spectrum.values.len())?;
    GraphSignal::new(graph.eigenvectors.matvec(&spectrum.values)?)
}

/// Applies a spectral filter in the Fourier domain and transforms back.
///
/// Accentuation multiplies coefficient `l` by `1 + α·λ_l/λ_max` (identity
/// when `λ_max = 0`); low-pass keeps the `ceil(κ·N)` lowest-frequency
/// coefficients. Negative eigenvalue round-off is clamped to zero so the
/// accentuator's gain never dips below 1.
pub fn apply_filter(
    graph: &CityGraph,
    signal: &GraphSignal,
    filter: &SpectralFilter,
) -> Result<GraphSignal, SpectralError> {
    graph.check_len(signal.values.len())?;
    let mut spectrum = gft(graph, signal)?.into_values();
    match filter {
        SpectralFilter::Accentuate { alpha } => {
            let lambda_max = *graph
                .eigenvalues
                .last()
                .expect("graphs have at least two eigenvalues");
            if lambda_max > SIGN_EPS {
                for (coef, lambda) in spectrum.iter_mut().zip(&graph.eigenvalues) {
                    *coef *= 1.0 + alpha * lambda.max(0.0) / lambda_max;
                }
            }
        }
        SpectralFilter::Lowpass { kappa } => {
            let keep = (kappa * graph.len() as f64).ceil() as usize;
            for (pos, coef) in spectrum.iter_mut().enumerate() {
                if pos + 1 > keep {
                    *coef = 0.0;
                }
            }
        }
    }
    igft(graph, &GraphSignal::new(spectrum)?)
}
