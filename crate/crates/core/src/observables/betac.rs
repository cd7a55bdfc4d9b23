use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{line_fit, weighted_line_fit, Estimate};

/// Flatness diagnostic of `θ(β, r) = β r^{-α} E_{β,r}|K|` at one `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessPoint {
    pub beta: f64,
    pub r: Vec<f64>,
    pub theta: Vec<Estimate>,
    /// Slope of `log θ` against `log r` over the top decade; `+∞` when some
    /// `θ` is not finite (treated as supercritical).
    pub slope: f64,
    pub slope_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetacEstimate {
    pub beta_hat: f64,
    /// `[lo, hi]`, containing `beta_hat`.
    pub ci: (f64, f64),
    /// Every evaluated `β`, in evaluation order.
    pub profile: Vec<FlatnessPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetacOptions {
    /// Bisection stops once the bracket is narrower than this.
    pub resolution: f64,
    pub max_iter: usize,
}

impl Default for BetacOptions {
    fn default() -> Self {
        Self {
            resolution: 1e-3,
            max_iter: 20,
        }
    }
}

/// `θ` profile and its top-decade slope at one `β`. `mean_size(β, r)`
/// returns an estimate of `E_{β,r}|K|`.
pub fn flatness<F>(mean_size: &mut F, alpha: f64, beta: f64, r_grid: &[f64]) -> Result<FlatnessPoint>
where
    F: FnMut(f64, f64) -> Result<Estimate>,
{
    let r_top = r_grid.iter().copied().fold(0.0, f64::max);
    let mut theta = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let m = mean_size(beta, r)?;
        let s = beta * r.powf(-alpha);
        theta.push(Estimate {
            mean: s * m.mean,
            stderr: s * m.stderr,
        });
    }
    let top: Vec<usize> = (0..r_grid.len()).filter(|&i| r_grid[i] >= r_top / 10.0 * (1.0 - 1e-12)).collect();
    if top.len() < 2 {
        return Err(Error::domain("the r grid needs at least two points in its top decade"));
    }
    let (slope, slope_se) = if top.iter().any(|&i| !(theta[i].mean.is_finite() && theta[i].mean > 0.0)) {
        (f64::INFINITY, 0.0)
    } else {
        let x: Vec<f64> = top.iter().map(|&i| r_grid[i].ln()).collect();
        let y: Vec<f64> = top.iter().map(|&i| theta[i].mean.ln()).collect();
        let exact = top.iter().all(|&i| theta[i].stderr == 0.0);
        let fit = if exact || top.len() < 3 {
            line_fit(&x, &y)?
        } else {
            let w: Vec<f64> = top.iter().map(|&i| (theta[i].mean / theta[i].stderr).powi(2)).collect();
            weighted_line_fit(&x, &y, &w)?
        };
        let se = if exact {
            0.0
        } else if top.len() == 2 {
            let rel = |i: usize| theta[i].stderr / theta[i].mean;
            (rel(top[0]).powi(2) + rel(top[1]).powi(2)).sqrt() / (x[1] - x[0]).abs()
        } else {
            fit.slope_se
        };
        (fit.slope, se)
    };
    Ok(FlatnessPoint {
        beta,
        r: r_grid.to_vec(),
        theta,
        slope,
        slope_se,
    })
}

/// Bisection on `β` for a flat `θ(β, ·)` across the top decade of `r_grid`.
///
/// The CI combines the final bracket half-width with `1.96 σ / |∂slope/∂β|`,
/// the slope derivative taken from a line fit over the finite evaluated
/// slopes.
pub fn estimate_betac<F>(mut mean_size: F, alpha: f64, r_grid: &[f64], bracket: (f64, f64), opts: BetacOptions) -> Result<BetacEstimate>
where
    F: FnMut(f64, f64) -> Result<Estimate>,
{
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !(lo >= 0.0) {
        return Err(Error::domain("bracket must satisfy 0 ≤ β_lo < β_hi"));
    }
    let mut profile = Vec::new();
    let f_lo = flatness(&mut mean_size, alpha, lo, r_grid)?;
    let f_hi = flatness(&mut mean_size, alpha, hi, r_grid)?;
    let (mut s_lo, mut s_hi) = (f_lo.slope, f_hi.slope);
    profile.push(f_lo);
    profile.push(f_hi);
    if !(s_lo < 0.0 && s_hi > 0.0) {
        return Err(Error::Bracketing(format!("top-decade θ slopes {s_lo} at β = {lo} and {s_hi} at β = {hi} do not straddle zero")));
    }
    let mut iter = 0;
    while hi - lo > opts.resolution && iter < opts.max_iter {
        let mid = 0.5 * (lo + hi);
        let f = flatness(&mut mean_size, alpha, mid, r_grid)?;
        let s = f.slope;
        profile.push(f);
        iter += 1;
        if s == 0.0 {
            lo = mid;
            hi = mid;
            s_lo = 0.0;
            s_hi = 0.0;
            break;
        }
        if s < 0.0 {
            lo = mid;
            s_lo = s;
        } else {
            hi = mid;
            s_hi = s;
        }
    }
    let beta_hat = if s_hi.is_finite() && s_hi > s_lo {
        lo + (hi - lo) * (-s_lo) / (s_hi - s_lo)
    } else {
        0.5 * (lo + hi)
    };
    let finite: Vec<&FlatnessPoint> = profile.iter().filter(|p| p.slope.is_finite()).collect();
    let mut stat = 0.0;
    if finite.len() >= 2 {
        let x: Vec<f64> = finite.iter().map(|p| p.beta).collect();
        let y: Vec<f64> = finite.iter().map(|p| p.slope).collect();
        if let Ok(fit) = line_fit(&x, &y) {
            let near = finite
                .iter()
                .min_by(|a, b| (a.beta - beta_hat).abs().total_cmp(&(b.beta - beta_hat).abs()))
                .map_or(0.0, |p| p.slope_se);
            if fit.slope.abs() > 0.0 {
                stat = 1.96 * near / fit.slope.abs();
            }
        }
    }
    let half = 0.5 * (hi - lo);
    Ok(BetacEstimate {
        beta_hat,
        ci: (beta_hat - half - stat, beta_hat + half + stat),
        profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rg_ode::{log_grid, solve_riccati_exact, Profile};

    /// `E|K|` from the Riccati closed form with `h(r) = κ (β_c - β) r^{-b}`
    /// and `A = β`.
    fn synthetic(beta_c: f64, alpha: f64) -> impl FnMut(f64, f64) -> Result<Estimate> {
        move |beta, r| {
            let h = Profile::Power {
                c: 0.8 * (beta_c - beta),
                b: -0.4,
            };
            Ok(Estimate::exact(solve_riccati_exact(beta, alpha, &h, r, 1e12)?))
        }
    }

    #[test]
    fn recovers_planted_critical_point() {
        let (beta_c, alpha) = (0.4573, 0.3);
        let grid = log_grid(1e2, 1e4, 8);
        let est = estimate_betac(synthetic(beta_c, alpha), alpha, &grid, (0.3, 0.6), BetacOptions::default()).unwrap();
        assert!(est.ci.0 <= est.beta_hat && est.beta_hat <= est.ci.1);
        assert!(est.ci.0 <= beta_c && beta_c <= est.ci.1, "{:?}", (est.beta_hat, est.ci));
        assert!(est.ci.1 - est.ci.0 < 2e-3);
    }

    #[test]
    fn same_sign_bracket_fails() {
        let grid = log_grid(1e2, 1e4, 8);
        let r = estimate_betac(synthetic(0.45, 0.3), 0.3, &grid, (0.3, 0.4), BetacOptions::default());
        assert!(matches!(r, Err(Error::Bracketing(_))));
    }

    #[test]
    fn non_finite_theta_is_supercritical() {
        let grid = log_grid(1e2, 1e4, 4);
        let mut f = |beta: f64, r: f64| -> Result<Estimate> {
            Ok(Estimate::exact(if beta > 0.5 { f64::INFINITY } else { r.powf(0.3) * (1.0 + (0.5 - beta) * 10.0 / r.sqrt()) }))
        };
        let p = flatness(&mut f, 0.3, 0.6, &grid).unwrap();
        assert_eq!(p.slope, f64::INFINITY);
        let q = flatness(&mut f, 0.3, 0.4, &grid).unwrap();
        assert!(q.slope < 0.0);
    }
}
