use crate::error::{Error, Result};
use crate::stats::line_fit;

/// Slope of `log f` against `log r` over the last decade of samples.
///
/// Takes logarithms directly so that radii far beyond `f64` range can be
/// probed; for `f = r^a (log r)^k` the bias is `k / log r`.
pub fn log_slope_last_decade(log_r: &[f64], log_f: &[f64]) -> Result<f64> {
    let (x, y) = last_decade(log_r, log_f)?;
    Ok(line_fit(&x, &y)?.slope)
}

fn last_decade(log_r: &[f64], vals: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if log_r.len() != vals.len() || log_r.is_empty() {
        return Err(Error::Fit("length mismatch or empty samples".into()));
    }
    let top = log_r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = top - std::f64::consts::LN_10 * (1.0 + 1e-12);
    let (x, y): (Vec<f64>, Vec<f64>) = log_r
        .iter()
        .zip(vals)
        .filter(|(l, _)| **l >= lo)
        .map(|(l, v)| (*l, *v))
        .unzip();
    if x.len() < 2 {
        return Err(Error::Fit("fewer than two samples in the last decade".into()));
    }
    Ok((x, y))
}

/// Fits `f = C r^a log r + D r^a` over the last decade; returns `(C, D)`.
pub fn fit_critical_log(r: &[f64], f: &[f64], a: f64) -> Result<(f64, f64)> {
    let lr: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let g: Vec<f64> = r.iter().zip(f).map(|(r, f)| f / r.powf(a)).collect();
    let (x, y) = last_decade(&lr, &g)?;
    let fit = line_fit(&x, &y)?;
    Ok((fit.slope, fit.intercept))
}

/// `h / f` along a trajectory, for the sub-case where only `h = o(f)` is known.
pub fn driving_ratio(h: &[f64], f: &[f64]) -> Vec<f64> {
    h.iter().zip(f).map(|(h, f)| h / f).collect()
}
