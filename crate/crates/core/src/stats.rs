//! Batch-means estimators shared by the observables and the samplers' tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(mean: f64) -> Self {
        Self { mean, stderr: 0.0 }
    }

    /// Number of standard errors separating the estimate from `target`.
    pub fn z(&self, target: f64) -> f64 {
        if self.stderr == 0.0 {
            if self.mean == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - target) / self.stderr
        }
    }
}

/// Per-batch sums of several quantities.
///
/// Batches are kept separately so that standard errors can be formed from
/// batch means and two accumulators merge by concatenation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchAccumulator {
    pub width: usize,
    pub counts: Vec<u64>,
    pub sums: Vec<Vec<f64>>,
}

impl BatchAccumulator {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            counts: Vec::new(),
            sums: Vec::new(),
        }
    }

    /// Splits `rows` into `n_batches` contiguous batches of near-equal size.
    pub fn from_rows(rows: &[Vec<f64>], width: usize, n_batches: usize) -> Self {
        let mut acc = Self::new(width);
        let n = rows.len();
        if n == 0 {
            return acc;
        }
        let b = n_batches.clamp(1, n);
        for k in 0..b {
            let lo = k * n / b;
            let hi = (k + 1) * n / b;
            let mut sums = vec![0.0; width];
            for row in &rows[lo..hi] {
                for (s, v) in sums.iter_mut().zip(row) {
                    *s += v;
                }
            }
            acc.counts.push((hi - lo) as u64);
            acc.sums.push(sums);
        }
        acc
    }

    pub fn push_batch(&mut self, count: u64, sums: Vec<f64>) {
        assert_eq!(sums.len(), self.width);
        self.counts.push(count);
        self.sums.push(sums);
    }

    pub fn merge(&mut self, other: &BatchAccumulator) {
        assert_eq!(self.width, other.width);
        self.counts.extend_from_slice(&other.counts);
        self.sums.extend(other.sums.iter().cloned());
    }

    pub fn n_batches(&self) -> usize {
        self.counts.len()
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn batch_mean(&self, b: usize, q: usize) -> f64 {
        self.sums[b][q] / self.counts[b] as f64
    }

    /// Mean of quantity `q` over all rows, with a batch-means standard error.
    pub fn mean(&self, q: usize) -> Result<Estimate> {
        let nb = self.n_batches();
        if nb < 2 {
            return Err(Error::Estimation("batch means need at least two batches".into()));
        }
        let total: f64 = self.sums.iter().map(|s| s[q]).sum();
        let n = self.total_count() as f64;
        let mean = total / n;
        // Count-weighted variance of batch means.
        let mut ss = 0.0;
        for b in 0..nb {
            let w = self.counts[b] as f64 / n;
            ss += w * w * (self.batch_mean(b, q) - mean).powi(2);
        }
        let stderr = (ss * nb as f64 / (nb as f64 - 1.0)).sqrt();
        Ok(Estimate { mean, stderr })
    }

    /// Ratio of the means of quantities `num` and `den` (delta method).
    pub fn ratio(&self, num: usize, den: usize) -> Result<Estimate> {
        let nb = self.n_batches();
        if nb < 2 {
            return Err(Error::Estimation("batch means need at least two batches".into()));
        }
        let tn: f64 = self.sums.iter().map(|s| s[num]).sum();
        let td: f64 = self.sums.iter().map(|s| s[den]).sum();
        if td == 0.0 {
            return Err(Error::Estimation("ratio with vanishing denominator".into()));
        }
        let n = self.total_count() as f64;
        let r = tn / td;
        let dbar = td / n;
        let mut ss = 0.0;
        for b in 0..nb {
            let w = self.counts[b] as f64 / n;
            let resid = self.batch_mean(b, num) - r * self.batch_mean(b, den);
            ss += w * w * resid * resid;
        }
        let stderr = (ss * nb as f64 / (nb as f64 - 1.0)).sqrt() / dbar.abs();
        Ok(Estimate { mean: r, stderr })
    }
}

impl BatchAccumulator {
    /// Delete-one-batch jackknife of a smooth function of the quantity means.
    pub fn jackknife(&self, f: impl Fn(&[f64]) -> f64) -> Result<Estimate> {
        let nb = self.n_batches();
        if nb < 2 {
            return Err(Error::Estimation("jackknife needs at least two batches".into()));
        }
        let total: Vec<f64> = (0..self.width).map(|q| self.sums.iter().map(|s| s[q]).sum()).collect();
        let n = self.total_count() as f64;
        let full: Vec<f64> = total.iter().map(|t| t / n).collect();
        let mean = f(&full);
        let leave: Vec<f64> = (0..nb)
            .map(|b| {
                let m = n - self.counts[b] as f64;
                let means: Vec<f64> = (0..self.width).map(|q| (total[q] - self.sums[b][q]) / m).collect();
                f(&means)
            })
            .collect();
        let lbar = leave.iter().sum::<f64>() / nb as f64;
        let ss: f64 = leave.iter().map(|v| (v - lbar).powi(2)).sum();
        let stderr = (ss * (nb as f64 - 1.0) / nb as f64).sqrt();
        if !mean.is_finite() || !stderr.is_finite() {
            return Err(Error::Estimation("jackknife produced a non-finite value".into()));
        }
        Ok(Estimate { mean, stderr })
    }
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Largest jump of the empirical distribution function (ties counted together).
pub fn max_ecdf_jump(samples: &[f64]) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let mut best = 0usize;
    let mut run = 0usize;
    for i in 0..xs.len() {
        run = if i > 0 && xs[i] == xs[i - 1] { run + 1 } else { 1 };
        best = best.max(run);
    }
    best as f64 / xs.len().max(1) as f64
}

/// Sample mean and standard error of i.i.d. values.
pub fn mean_stderr(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Estimate {
        mean,
        stderr: (var / n).sqrt(),
    }
}

/// Streaming mean/variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn estimate(&self) -> Estimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        Estimate {
            mean: self.mean,
            stderr: (var / self.n.max(1) as f64).sqrt(),
        }
    }
}

/// Ordinary least squares `y = intercept + slope * x` with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    /// Weighted residual sum of squares per degree of freedom.
    pub reduced_chi2: f64,
}

/// Weighted least squares; `w` are inverse variances (use 1 for OLS).
pub fn weighted_line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n || w.len() != n {
        return Err(Error::Fit("need at least two points".into()));
    }
    let sw: f64 = w.iter().sum();
    let sx: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
    let sy: f64 = y.iter().zip(w).map(|(a, b)| a * b).sum();
    let xm = sx / sw;
    let ym = sy / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        sxx += w[i] * (x[i] - xm).powi(2);
        sxy += w[i] * (x[i] - xm) * (y[i] - ym);
    }
    if sxx <= 0.0 {
        return Err(Error::Fit("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = (0..n).map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2)).sum();
    let dof = (n as f64 - 2.0).max(1.0);
    let reduced_chi2 = rss / dof;
    // Scale by the residual variance when it exceeds the nominal weights.
    let scale = reduced_chi2.max(1.0);
    let slope_se = (scale / sxx).sqrt();
    let intercept_se = (scale * (1.0 / sw + xm * xm / sxx)).sqrt();
    Ok(LineFit {
        slope,
        intercept,
        slope_se,
        intercept_se,
        reduced_chi2,
    })
}

pub fn line_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    weighted_line_fit(x, y, &vec![1.0; x.len()])
}

/// Median of a slice (NaN-free input).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Pearson chi-square goodness of fit of counts against cell probabilities.
///
/// Cells whose expected count is below `min_expected` are pooled in order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

pub fn chi_square_gof(observed: &[u64], probs: &[f64], min_expected: f64) -> Result<GofResult> {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    if observed.len() != probs.len() {
        return Err(Error::Estimation("observed and expected cells differ in length".into()));
    }
    let n: u64 = observed.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&k, &p) in observed.iter().zip(probs) {
        o += k as f64;
        e += p * n as f64;
        if e >= min_expected {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => cells.push((o, e)),
        }
    }
    let statistic: f64 = cells.iter().map(|(o, e)| if *e > 0.0 { (o - e).powi(2) / e } else { 0.0 }).sum();
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Estimation(e.to_string()))?;
        1.0 - dist.cdf(statistic)
    };
    Ok(GofResult {
        statistic,
        dof,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_equals_union() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let a = BatchAccumulator::from_rows(&rows[..40], 2, 4);
        let b = BatchAccumulator::from_rows(&rows[40..], 2, 6);
        let mut m = a.clone();
        m.merge(&b);
        let mean = m.mean(0).unwrap();
        assert!((mean.mean - 49.5).abs() < 1e-12);
        assert_eq!(m.n_batches(), 10);
    }

    #[test]
    fn ratio_of_proportional_columns_is_exact() {
        let rows: Vec<Vec<f64>> = (1..=64).map(|i| vec![3.0 * i as f64, i as f64]).collect();
        let acc = BatchAccumulator::from_rows(&rows, 2, 8);
        let r = acc.ratio(0, 1).unwrap();
        assert!((r.mean - 3.0).abs() < 1e-14);
        assert!(r.stderr < 1e-12);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = line_fit(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gof_accepts_exact_counts_and_rejects_wrong_ones() {
        let probs = [0.25, 0.25, 0.5];
        let g = chi_square_gof(&[250, 250, 500], &probs, 5.0).unwrap();
        assert_eq!(g.statistic, 0.0);
        assert_eq!(g.dof, 2);
        assert!((g.p_value - 1.0).abs() < 1e-12);
        let bad = chi_square_gof(&[400, 100, 500], &probs, 5.0).unwrap();
        assert!(bad.p_value < 1e-6);
        let pooled = chi_square_gof(&[0, 1, 999], &[0.0001, 0.0009, 0.999], 5.0).unwrap();
        assert_eq!(pooled.dof, 0);
    }

    #[test]
    fn welford_matches_two_pass() {
        let vals: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let mut w = Welford::default();
        let mut w2 = Welford::default();
        for (i, v) in vals.iter().enumerate() {
            if i < 20 {
                w.push(*v)
            } else {
                w2.push(*v)
            }
        }
        w.merge(&w2);
        let e = mean_stderr(&vals);
        assert!((w.estimate().mean - e.mean).abs() < 1e-12);
        assert!((w.estimate().stderr - e.stderr).abs() < 1e-12);
    }
}
