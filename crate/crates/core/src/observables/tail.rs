use crate::error::{Error, Result};
use crate::rg_ode::log_grid;
use crate::sampler::ClusterSample;
use crate::tauberian::{fit_tail_sizes, FitOptions, TailFit};

/// Largest truncated fraction accepted by the tail fit.
pub const MAX_TRUNCATED_FRACTION: f64 = 0.01;

/// Default fit window `[10², min(10⁴, max_size/10)]`.
pub fn default_tail_window(max_size: u64) -> (f64, f64) {
    (1e2, 1e4f64.min(max_size as f64 / 10.0))
}

/// Weighted log-log fit, with jackknife errors, of `P̂(|K| ≥ n)` on a window with 10 grid points per
/// decade; the amplitude is the plateau of `√n P̂(|K| ≥ n)`.
///
/// Truncated samples count as `|K| ≥ n` for every `n` below `max_size`,
/// which is exact inside the window.
pub fn estimate_volume_tail(samples: &[ClusterSample], max_size: u64, window: Option<(f64, f64)>) -> Result<TailFit> {
    estimate_volume_tail_with(samples, max_size, window, FitOptions::default().min_decades)
}

/// [`estimate_volume_tail`] with an explicit minimum window span in decades.
pub fn estimate_volume_tail_with(samples: &[ClusterSample], max_size: u64, window: Option<(f64, f64)>, min_decades: f64) -> Result<TailFit> {
    if samples.is_empty() {
        return Err(Error::Fit("no samples".into()));
    }
    let (lo, hi) = window.unwrap_or_else(|| default_tail_window(max_size));
    if !(lo < hi) || hi > max_size as f64 {
        return Err(Error::Fit(format!("window [{lo}, {hi}] empty or beyond max_size {max_size}")));
    }
    let n_trunc = samples.iter().filter(|s| s.truncated).count();
    let frac = n_trunc as f64 / samples.len() as f64;
    if frac > MAX_TRUNCATED_FRACTION {
        return Err(Error::Estimation(format!("truncated fraction {frac} exceeds {MAX_TRUNCATED_FRACTION}")));
    }
    let sizes: Vec<f64> = samples.iter().map(|s| s.size as f64).collect();
    let per_decade = 10;
    let n = ((hi / lo).log10() * per_decade as f64).round().max(2.0) as usize;
    let grid = log_grid(lo, hi, n);
    fit_tail_sizes(
        &sizes,
        &grid,
        FitOptions {
            window: Some((lo, hi)),
            index_candidate: Some(-0.5),
            min_decades,
        },
    )
}
