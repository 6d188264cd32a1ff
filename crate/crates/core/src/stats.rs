//! Order statistics, bootstrap errors and histograms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};

/// Linear-interpolation percentile of already sorted data, `q ∈ [0, 1]`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sorted copy; NaNs are rejected.
pub fn sorted(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(invalid("no values"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(invalid("values contain NaN"));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

pub fn median(values: &[f64]) -> Result<f64> {
    Ok(percentile_sorted(&sorted(values)?, 0.5))
}

/// 16th, 50th and 84th percentiles.
pub fn p16_p50_p84(values: &[f64]) -> Result<(f64, f64, f64)> {
    let s = sorted(values)?;
    Ok((percentile_sorted(&s, 0.16), percentile_sorted(&s, 0.5), percentile_sorted(&s, 0.84)))
}

/// Bootstrap standard error of the median with `resamples` seeded draws.
/// Resample `b` uses its own stream, so the result does not depend on
/// scheduling.
pub fn bootstrap_median_se(values: &[f64], resamples: usize, seed: u64) -> Result<f64> {
    if resamples < 2 {
        return Err(invalid("bootstrap needs at least two resamples"));
    }
    sorted(values)?;
    let n = values.len();
    let medians: Vec<f64> = (0..resamples as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let mut draw: Vec<f64> = (0..n).map(|_| values[rng.random_range(0..n)]).collect();
            draw.sort_by(f64::total_cmp);
            percentile_sorted(&draw, 0.5)
        })
        .collect();
    let mean = medians.iter().sum::<f64>() / resamples as f64;
    let var = medians.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64;
    Ok(var.sqrt())
}

/// Equal-width histogram.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Bins `values` into `bins` equal bins spanning `[lo, hi]`; values
    /// outside are clamped into the end bins.
    pub fn new(values: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins == 0 || !(lo.is_finite() && hi.is_finite()) {
            return Err(invalid("histogram needs at least one bin and a finite range"));
        }
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        for v in values {
            let k = ((v - lo) / width).floor();
            let k = if k.is_nan() { 0 } else { (k.max(0.0) as usize).min(bins - 1) };
            counts[k] += 1;
        }
        Ok(Self { edges, counts })
    }

    /// Bins spanning the data range.
    pub fn auto(values: &[f64], bins: usize) -> Result<Self> {
        let s = sorted(values)?;
        Self::new(values, bins, s[0], s[s.len() - 1])
    }

    /// Probability density per bin.
    pub fn density(&self) -> Vec<f64> {
        let total: u64 = self.counts.iter().sum();
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(c, e)| if total > 0 { *c as f64 / (total as f64 * (e[1] - e[0])) } else { 0.0 })
            .collect()
    }
}
