//! Volume-tail analysis: chi-squared Laplace functionals, Karamata-style
//! index and amplitude fits, and the scaling functions of the flow.

mod fit;

pub use fit::{fit_laplace_profile, fit_tail, fit_tail_sizes, laplace_profile, tail_from_sizes, FitOptions, LaplaceProfile, TailData, TailFit, TailSide, TAIL_JACKKNIFE_GROUPS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::FlowPoint;
use crate::quad::{integrate_to_inf, QuadOptions};
use crate::special::gamma;
use crate::stats::Estimate;

/// `∫ (1 - e^{-λx}) / x dQ(x)` for `Q` the chi-squared law with one degree
/// of freedom, `√(2λ+1) - 1`.
pub fn chi2_laplace_functional(lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::domain("λ must be non-negative"));
    }
    Ok((2.0 * lambda + 1.0).sqrt() - 1.0)
}

/// The same functional by quadrature of
/// `(2π)^{-1/2} ∫ (1 - e^{-λx}) e^{-x/2} x^{-3/2} dx`, with `x = t²`.
pub fn chi2_laplace_quadrature(lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::domain("λ must be non-negative"));
    }
    let q = integrate_to_inf(
        |t| {
            let x = t * t;
            let g = if x == 0.0 { lambda } else { -(-lambda * x).exp_m1() / x };
            2.0 * g * (-0.5 * x).exp()
        },
        0.0,
        QuadOptions::tol(1e-14, 1e-12),
    )?;
    Ok(q.value / (2.0 * std::f64::consts::PI).sqrt())
}

/// Laplace-side and tail-side constants, `A_4 = A_3 / Γ(1/a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantReport {
    pub a: f64,
    #[serde(rename = "A_3")]
    pub a3: f64,
    #[serde(rename = "A_4")]
    pub a4: f64,
    pub gamma_inv_a: f64,
}

pub fn constant_report(a: f64, a3: f64) -> Result<ConstantReport> {
    if !(a > 0.0) {
        return Err(Error::domain("index parameter a must be positive"));
    }
    let g = gamma(1.0 / a);
    Ok(ConstantReport {
        a,
        a3,
        a4: a3 / g,
        gamma_inv_a: g,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub beta: f64,
    pub r: f64,
    /// `(1/4) E|K|² / E|K|`.
    pub zeta: Estimate,
    /// `4 (E|K|)² / E|K|²`.
    pub eta: Estimate,
    /// `r^d η / ζ`.
    pub n_clusters: Estimate,
}

/// `ζ`, `η` and `N` along a flow, first-order error propagation treating
/// `E|K|` and the size-biased mean as independent.
pub fn scaling_functions(flow: &[FlowPoint], d: usize) -> Result<Vec<ScalingRow>> {
    flow.iter()
        .map(|p| {
            if p.moment_est.len() < 3 {
                return Err(Error::domain("flow point lacks the second moment"));
            }
            let m1 = p.moment_est[1];
            let sb = p.size_biased_mean;
            let zeta = Estimate {
                mean: sb.mean / 4.0,
                stderr: sb.stderr / 4.0,
            };
            let rel = ((m1.stderr / m1.mean).powi(2) + (sb.stderr / sb.mean).powi(2)).sqrt();
            let eta_v = 4.0 * m1.mean / sb.mean;
            let n_v = p.r.powi(d as i32) * eta_v / zeta.mean;
            let rel_n = ((m1.stderr / m1.mean).powi(2) + 4.0 * (sb.stderr / sb.mean).powi(2)).sqrt();
            Ok(ScalingRow {
                beta: p.beta,
                r: p.r,
                zeta,
                eta: Estimate {
                    mean: eta_v,
                    stderr: eta_v * rel,
                },
                n_clusters: Estimate {
                    mean: n_v,
                    stderr: n_v * rel_n,
                },
            })
        })
        .collect()
}
