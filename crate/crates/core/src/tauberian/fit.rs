use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{line_fit, median, weighted_line_fit, Estimate};

/// Empirical `P(X ≥ x)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailData {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// Per-point standard errors; `None` for exact data.
    pub stderr: Option<Vec<f64>>,
}

/// `Ê[1 - e^{-h X}]` on an `h` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceProfile {
    pub h: Vec<f64>,
    pub values: Vec<Estimate>,
}

impl LaplaceProfile {
    /// Values in `[0, 1]` and non-decreasing in `h` up to rounding.
    pub fn is_valid(&self) -> bool {
        let mut idx: Vec<usize> = (0..self.h.len()).collect();
        idx.sort_by(|&a, &b| self.h[a].total_cmp(&self.h[b]));
        self.values.iter().all(|v| (0.0..=1.0).contains(&v.mean)) && idx.windows(2).all(|w| self.values[w[1]].mean >= self.values[w[0]].mean - 1e-15)
    }
}

/// Tail on a grid from i.i.d. sizes.
pub fn tail_from_sizes(sizes: &[f64], grid: &[f64]) -> TailData {
    let mut xs = sizes.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut p = Vec::with_capacity(grid.len());
    let mut se = Vec::with_capacity(grid.len());
    for &g in grid {
        let below = xs.partition_point(|v| *v < g);
        let q = (xs.len() - below) as f64 / n;
        p.push(q);
        se.push((q * (1.0 - q) / n).sqrt());
    }
    TailData {
        x: grid.to_vec(),
        p,
        stderr: Some(se),
    }
}

/// `Ê[1 - e^{-hX}]` from i.i.d. sizes.
pub fn laplace_profile(sizes: &[f64], h: &[f64]) -> LaplaceProfile {
    let n = sizes.len() as f64;
    let values = h
        .iter()
        .map(|&h| {
            let (mut s, mut s2) = (0.0, 0.0);
            for &x in sizes {
                let v = -(-h * x).exp_m1();
                s += v;
                s2 += v * v;
            }
            let m = s / n;
            let var = (s2 / n - m * m).max(0.0);
            Estimate {
                mean: m,
                stderr: (var / (n - 1.0).max(1.0)).sqrt(),
            }
        })
        .collect();
    LaplaceProfile { h: h.to_vec(), values }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailSide {
    /// `P(X ≥ x) ≈ A x^{slope}`, slope < 0.
    Tail,
    /// `E[1 - e^{-hX}] ≈ A h^{slope}`, slope > 0.
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Inclusive fit window; `None` uses every usable point.
    pub window: Option<(f64, f64)>,
    /// Exponent used in the amplitude plateau; defaults to the fitted slope.
    pub index_candidate: Option<f64>,
    pub min_decades: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            window: None,
            index_candidate: None,
            min_decades: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub side: TailSide,
    pub window: (f64, f64),
    pub n_points: usize,
    pub slope: f64,
    /// 95% half-width: regression error plus the half-window slope drift.
    pub slope_ci: f64,
    /// Median of `x^{-index} P̂(x)` over the window.
    pub amplitude: f64,
    /// 95% half-width: pointwise statistical error combined with the
    /// difference between the plateau medians of the two window halves.
    pub amplitude_ci: f64,
    pub index_used: f64,
    /// False when the two half-window slopes disagree by more than 20% of
    /// the slope beyond their regression error, i.e. the data bend away
    /// from a power law.
    pub power_law: bool,
}

fn fit_power(side: TailSide, x: &[f64], y: &[f64], se: Option<&[f64]>, opts: FitOptions) -> Result<TailFit> {
    let (lo, hi) = opts.window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    if !(lo < hi) {
        return Err(Error::Fit("window must have lo < hi".into()));
    }
    let idx: Vec<usize> = (0..x.len()).filter(|&i| x[i] >= lo && x[i] <= hi && x[i] > 0.0 && y[i] > 0.0).collect();
    if idx.len() < 3 {
        return Err(Error::Fit(format!("only {} usable points in the window", idx.len())));
    }
    let xmin = idx.iter().map(|&i| x[i]).fold(f64::INFINITY, f64::min);
    let xmax = idx.iter().map(|&i| x[i]).fold(0.0, f64::max);
    // A finite window is judged by its own span, so that a tail dying out
    // inside it still gets fitted (and flagged).
    let span = if lo.is_finite() && hi.is_finite() && lo > 0.0 { (hi / lo).log10() } else { (xmax / xmin).log10() };
    if span < opts.min_decades - 1e-12 {
        return Err(Error::Fit(format!("window spans {span:.2} decades, need {}", opts.min_decades)));
    }
    let lx: Vec<f64> = idx.iter().map(|&i| x[i].ln()).collect();
    let ly: Vec<f64> = idx.iter().map(|&i| y[i].ln()).collect();
    if ly.iter().all(|v| *v == ly[0]) {
        return Err(Error::Fit("constant data carry no power law".into()));
    }
    let fit = match se {
        Some(se) => {
            let w: Vec<f64> = idx.iter().map(|&i| (y[i] / se[i].max(1e-300)).powi(2)).collect();
            weighted_line_fit(&lx, &ly, &w)?
        }
        None => line_fit(&lx, &ly)?,
    };
    let ok = match side {
        TailSide::Tail => fit.slope < 0.0,
        TailSide::Laplace => fit.slope > 0.0,
    };
    if !ok {
        return Err(Error::Fit(format!("fitted slope {} has the wrong sign for a {side:?} fit", fit.slope)));
    }
    let k = lx.len();
    let half = k / 2;
    let slope_of = |a: usize, b: usize| -> f64 {
        if b - a >= 2 {
            line_fit(&lx[a..b], &ly[a..b]).map(|f| f.slope).unwrap_or(fit.slope)
        } else {
            fit.slope
        }
    };
    let slope_drift = 0.5 * (slope_of(0, half) - slope_of(half, k)).abs();
    // Half-window slopes carry about four times the full-window error.
    let power_law = 2.0 * slope_drift <= 0.2 * fit.slope.abs() + 1.96 * 4.0 * fit.slope_se;
    let index = opts.index_candidate.unwrap_or(fit.slope);
    let plateau: Vec<f64> = lx.iter().zip(&ly).map(|(a, b)| (b - index * a).exp()).collect();
    let amplitude = median(&plateau);
    let drift = (median(&plateau[..half.max(1)]) - median(&plateau[half..])).abs();
    let stat = match se {
        Some(se) => {
            let rel: Vec<f64> = idx.iter().map(|&i| se[i] / y[i]).collect();
            amplitude * median(&rel)
        }
        None => 0.0,
    };
    Ok(TailFit {
        side,
        window: (xmin, xmax),
        n_points: k,
        slope: fit.slope,
        slope_ci: 1.96 * fit.slope_se + slope_drift,
        amplitude,
        amplitude_ci: ((1.96 * stat).powi(2) + drift * drift).sqrt(),
        index_used: index,
        power_law,
    })
}

pub fn fit_tail(data: &TailData, opts: FitOptions) -> Result<TailFit> {
    fit_power(TailSide::Tail, &data.x, &data.p, data.stderr.as_deref(), opts)
}

pub fn fit_laplace_profile(profile: &LaplaceProfile, opts: FitOptions) -> Result<TailFit> {
    let y: Vec<f64> = profile.values.iter().map(|v| v.mean).collect();
    let se: Vec<f64> = profile.values.iter().map(|v| v.stderr).collect();
    let exact = se.iter().all(|s| *s == 0.0);
    fit_power(TailSide::Laplace, &profile.h, &y, if exact { None } else { Some(&se) }, opts)
}

/// Groups used by the jackknife of `fit_tail_sizes`.
pub const TAIL_JACKKNIFE_GROUPS: usize = 32;

/// `fit_tail` on i.i.d. sizes, with the slope and amplitude errors widened
/// to a delete-one-group jackknife over contiguous groups. Tail estimates at
/// nested thresholds are strongly correlated, which the regression error
/// alone ignores.
pub fn fit_tail_sizes(sizes: &[f64], grid: &[f64], opts: FitOptions) -> Result<TailFit> {
    let data = tail_from_sizes(sizes, grid);
    let mut fit = fit_tail(&data, opts)?;
    let n = sizes.len();
    let g = TAIL_JACKKNIFE_GROUPS.min(n);
    if g < 2 {
        return Ok(fit);
    }
    let mut counts = vec![vec![0u64; grid.len()]; g];
    let mut sizes_g = vec![0u64; g];
    for k in 0..g {
        let (lo, hi) = (k * n / g, (k + 1) * n / g);
        sizes_g[k] = (hi - lo) as u64;
        for &x in &sizes[lo..hi] {
            for (c, &t) in counts[k].iter_mut().zip(grid) {
                if x >= t {
                    *c += 1;
                }
            }
        }
    }
    let total: Vec<u64> = (0..grid.len()).map(|j| counts.iter().map(|c| c[j]).sum()).collect();
    let mut slopes = Vec::with_capacity(g);
    let mut amps = Vec::with_capacity(g);
    for k in 0..g {
        let m = (n as u64 - sizes_g[k]) as f64;
        let p: Vec<f64> = (0..grid.len()).map(|j| (total[j] - counts[k][j]) as f64 / m).collect();
        let se: Vec<f64> = p.iter().map(|q| (q * (1.0 - q) / m).sqrt()).collect();
        let d = TailData {
            x: grid.to_vec(),
            p,
            stderr: Some(se),
        };
        let Ok(f) = fit_tail(&d, opts) else {
            return Err(Error::Fit("tail fit unstable under the jackknife".into()));
        };
        slopes.push(f.slope);
        amps.push(f.amplitude);
    }
    let jk = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() * (v.len() as f64 - 1.0) / v.len() as f64).sqrt()
    };
    let (s_se, a_se) = (jk(&slopes), jk(&amps));
    fit.slope_ci = fit.slope_ci.hypot(1.96 * s_se);
    fit.amplitude_ci = fit.amplitude_ci.hypot(1.96 * a_se);
    Ok(fit)
}
