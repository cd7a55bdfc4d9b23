use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::ClusterSample;
use crate::stats::{BatchAccumulator, Estimate};

/// Batch count used by every size-moment estimate (fewer only when there
/// are fewer samples).
pub const DEFAULT_BATCHES: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub n_samples: u64,
    pub n_truncated: u64,
    /// Fraction of truncated samples. Moments are computed on the
    /// untruncated ones, so each `E|K|^p` is biased low by at most the mass
    /// this fraction represents.
    pub truncated_fraction: f64,
    pub n_batches: usize,
    /// `E|K|^p` for `p = 0..=p_max`.
    pub moment_est: Vec<Estimate>,
    pub size_biased_mean: Estimate,
    pub vertex_factor: Estimate,
    /// `E|K|³ E|K| / (E|K|²)²`, present when `p_max ≥ 3`.
    pub chi_ratio: Option<Estimate>,
}

/// Columns `|K|^p`, `p = 0..=p_max`, in contiguous batches.
pub fn size_accumulator(sizes: &[f64], p_max: usize, n_batches: usize) -> BatchAccumulator {
    let rows: Vec<Vec<f64>> = sizes
        .iter()
        .map(|&s| {
            let mut w = 1.0;
            (0..=p_max)
                .map(|_| {
                    let v = w;
                    w *= s;
                    v
                })
                .collect()
        })
        .collect();
    BatchAccumulator::from_rows(&rows, p_max + 1, n_batches)
}

/// Moment estimates from an accumulator of `size_accumulator` columns.
pub fn moments_from_accumulator(acc: &BatchAccumulator, n_truncated: u64) -> Result<MomentReport> {
    let width = acc.width;
    if width < 3 {
        return Err(Error::domain("moment estimates need p_max ≥ 2"));
    }
    if acc.n_batches() < 2 {
        return Err(Error::Estimation("moment estimates need at least two batches".into()));
    }
    let moment_est = (0..width).map(|p| acc.mean(p)).collect::<Result<Vec<_>>>()?;
    let size_biased_mean = acc.ratio(2, 1)?;
    let vertex_factor = acc.jackknife(|m| m[2] / m[1].powi(3))?;
    let chi_ratio = if width > 3 { Some(acc.jackknife(|m| m[3] * m[1] / (m[2] * m[2]))?) } else { None };
    let n = acc.total_count() + n_truncated;
    Ok(MomentReport {
        n_samples: n,
        n_truncated,
        truncated_fraction: n_truncated as f64 / n as f64,
        n_batches: acc.n_batches(),
        moment_est,
        size_biased_mean,
        vertex_factor,
        chi_ratio,
    })
}

/// Moments of real-valued sizes, e.g. synthetic ones.
pub fn estimate_size_moments(sizes: &[f64], p_max: usize) -> Result<MomentReport> {
    if sizes.len() < 2 {
        return Err(Error::Estimation(format!("{} samples cannot form two batches", sizes.len())));
    }
    moments_from_accumulator(&size_accumulator(sizes, p_max, DEFAULT_BATCHES), 0)
}

/// Batch-means estimates of `E|K|^p` and the size-biased ratios. Truncated
/// samples are excluded and reported.
pub fn estimate_moments(samples: &[ClusterSample], p_max: usize) -> Result<MomentReport> {
    let sizes: Vec<f64> = samples.iter().filter(|s| !s.truncated).map(|s| s.size as f64).collect();
    let n_truncated = (samples.len() - sizes.len()) as u64;
    if sizes.is_empty() && !samples.is_empty() {
        return Err(Error::Estimation("every sample is truncated".into()));
    }
    if sizes.len() < 2 {
        return Err(Error::Estimation(format!("{} untruncated samples cannot form two batches", sizes.len())));
    }
    moments_from_accumulator(&size_accumulator(&sizes, p_max, DEFAULT_BATCHES), n_truncated)
}

/// `ξ_2(r)² = E[Σ_{x∈K} ‖x‖²] / E|K|` over untruncated samples, with a
/// delta-method standard error.
pub fn estimate_gyration(samples: &[ClusterSample]) -> Result<Estimate> {
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .filter(|s| !s.truncated)
        .map(|s| {
            let w = s.spatial_sums.get(1).copied().ok_or_else(|| Error::domain("samples lack the second spatial sum"))?;
            Ok(vec![w, s.size as f64])
        })
        .collect::<Result<_>>()?;
    if rows.len() < 2 {
        return Err(Error::Estimation("gyration needs at least two untruncated samples".into()));
    }
    BatchAccumulator::from_rows(&rows, 2, DEFAULT_BATCHES).ratio(0, 1)
}
