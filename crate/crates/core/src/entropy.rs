//! Equidistant-cell histograms and the Shannon, Rényi and Tsallis entropies
//! of their cell probabilities. Values are in nats; empty cells contribute
//! nothing to any of the sums.

use serde::Serialize;

use crate::error::{Error, Result};

/// Orders and indices evaluated when none are given.
pub const DEFAULT_GRID: [f64; 3] = [1.4, 1.45, 1.5];

/// Orders this close to 1 are evaluated as Shannon entropy.
const UNIT_ORDER_TOL: f64 = 1e-8;

/// Tsallis indices in `[1, 5/3)` keep the associated q-Gaussian's variance finite.
pub const TSALLIS_FINITE_VARIANCE: std::ops::Range<f64> = 1.0..5.0 / 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub probs: Vec<f64>,
}

impl Histogram {
    /// Histogram over unit cells `[i, i+1)` with the given counts.
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if counts.is_empty() || total == 0 {
            return Err(Error::Empty);
        }
        let edges = (0..=counts.len()).map(|i| i as f64).collect();
        let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(Self { edges, counts, probs })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn shannon(&self) -> f64 {
        shannon(&self.probs)
    }

    pub fn renyi(&self, alpha: f64) -> Result<f64> {
        renyi(&self.probs, alpha)
    }

    pub fn tsallis(&self, q: f64) -> Result<f64> {
        tsallis(&self.probs, q)
    }
}

/// `ceil(sqrt(n))`, at least one cell.
pub fn default_bins(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).max(1)
}

/// Equal-width cells spanning `[min, max]`. Cells are left-closed except
/// the last, which also holds the maximum.
pub fn build_histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    if bins == 0 {
        return Err(Error::Domain("bin count must be >= 1".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::DataQuality("non-finite value".into()));
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi <= lo {
        return Err(Error::DegenerateSupport);
    }
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    edges[bins] = hi;
    let mut counts = vec![0u64; bins];
    for &v in values {
        let idx = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let n = values.len() as f64;
    let probs = counts.iter().map(|&c| c as f64 / n).collect();
    Ok(Histogram { edges, counts, probs })
}

/// `-sum p ln p` with `0 ln 0 = 0`.
pub fn shannon(probs: &[f64]) -> f64 {
    let h: f64 = probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    h.max(0.0)
}

fn power_sum(probs: &[f64], order: f64) -> f64 {
    probs.iter().filter(|&&p| p > 0.0).map(|&p| p.powf(order)).sum()
}

/// Rényi entropy of order `alpha > 0`.
pub fn renyi(probs: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("Renyi order must be > 0 (got {alpha})")));
    }
    if (alpha - 1.0).abs() <= UNIT_ORDER_TOL {
        return Ok(shannon(probs));
    }
    Ok((power_sum(probs, alpha).ln() / (1.0 - alpha)).max(0.0))
}

/// Tsallis entropy of index `q >= 0`.
pub fn tsallis(probs: &[f64], q: f64) -> Result<f64> {
    if !(q >= 0.0) || !q.is_finite() {
        return Err(Error::Domain(format!("Tsallis index must be >= 0 (got {q})")));
    }
    if (q - 1.0).abs() <= UNIT_ORDER_TOL {
        return Ok(shannon(probs));
    }
    Ok(((1.0 - power_sum(probs, q)) / (q - 1.0)).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub shannon: f64,
    pub renyi: Vec<(f64, f64)>,
    pub tsallis: Vec<(f64, f64)>,
    pub bins: usize,
    pub n_obs: usize,
    pub warnings: Vec<String>,
}

/// Warnings for Tsallis indices outside the finite-variance range.
pub fn grid_warnings(q_grid: &[f64]) -> Vec<String> {
    q_grid
        .iter()
        .filter(|q| !TSALLIS_FINITE_VARIANCE.contains(q))
        .map(|q| format!("Tsallis index q = {q} lies outside [1, 5/3); finite-variance applications need 1 <= q < 5/3"))
        .collect()
}

/// One histogram, every estimator evaluated on it. `bins = None` uses
/// [`default_bins`].
pub fn entropy_report(
    values: &[f64],
    bins: Option<usize>,
    alpha_grid: &[f64],
    q_grid: &[f64],
) -> Result<EntropyReport> {
    if alpha_grid.is_empty() || q_grid.is_empty() {
        return Err(Error::Domain("entropy grids must be nonempty".into()));
    }
    let m = bins.unwrap_or_else(|| default_bins(values.len()));
    let h = build_histogram(values, m)?;
    let renyi = alpha_grid.iter().map(|&a| h.renyi(a).map(|v| (a, v))).collect::<Result<_>>()?;
    let tsallis = q_grid.iter().map(|&q| h.tsallis(q).map(|v| (q, v))).collect::<Result<_>>()?;
    Ok(EntropyReport {
        shannon: h.shannon(),
        renyi,
        tsallis,
        bins: m,
        n_obs: values.len(),
        warnings: grid_warnings(q_grid),
    })
}
