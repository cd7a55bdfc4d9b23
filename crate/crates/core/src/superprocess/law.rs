use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::coefficients::{displacement_coefficients, Branch};
use super::levy::{ball_euclid_radius, ball_moment, sample_uniform_ball, Vector};
use crate::error::{Error, Result};
use crate::model::{NormFamily, NormSpec};

pub const DEFAULT_EPS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "kebab-case")]
pub enum DisplacementLawSpec {
    Stable { norm: NormSpec, alpha: f64, eps: f64 },
    /// `sigma` is row-major `d × d`.
    Laplace { d: usize, sigma: Vec<f64> },
}

/// What the stable sampler leaves out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub eps: f64,
    /// Per-coordinate variance per unit time carried by the Gaussian
    /// replacement of the small jumps.
    pub small_jump_variance: f64,
    /// `∫_{small} ‖x‖₂³ dΠ_1`, bounding the error in any smooth test function
    /// with bounded third derivative.
    pub bias_budget: f64,
}

/// Prepared sampler for `ν_disp`.
#[derive(Debug, Clone)]
pub struct DisplacementLaw {
    spec: DisplacementLawSpec,
    d: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Stable {
        norm: NormSpec,
        alpha: f64,
        eps: f64,
        /// `E[Y_i²]` for `Y` uniform on the ball.
        coord_var: f64,
    },
    Laplace {
        chol: [[f64; 4]; 4],
    },
}

fn cholesky(d: usize, s: &[f64]) -> Result<[[f64; 4]; 4]> {
    let mut l = [[0.0; 4]; 4];
    for i in 0..d {
        for j in 0..=i {
            let mut v = s[i * d + j];
            for k in 0..j {
                v -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(v > 0.0) {
                    return Err(Error::domain("covariance is not positive definite"));
                }
                l[i][i] = v.sqrt();
            } else {
                l[i][j] = v / l[j][j];
            }
        }
    }
    Ok(l)
}

impl DisplacementLaw {
    pub fn new(spec: DisplacementLawSpec) -> Result<Self> {
        let (d, kind) = match &spec {
            DisplacementLawSpec::Stable { norm, alpha, eps } => {
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return Err(Error::domain("stable displacement needs 0 < α < 2"));
                }
                if !(*eps > 0.0 && *eps < 1.0) {
                    return Err(Error::domain("small-jump cutoff must lie in (0, 1)"));
                }
                let mut e1 = vec![0.0; norm.d];
                e1[0] = 1.0;
                let coord_var = ball_moment(norm, 1, &e1)?;
                (
                    norm.d,
                    Kind::Stable {
                        norm: *norm,
                        alpha: *alpha,
                        eps: *eps,
                        coord_var,
                    },
                )
            }
            DisplacementLawSpec::Laplace { d, sigma } => {
                let d = *d;
                if d == 0 || d > 4 || sigma.len() != d * d {
                    return Err(Error::domain("covariance must be d×d with 1 ≤ d ≤ 4"));
                }
                for i in 0..d {
                    for j in 0..i {
                        if (sigma[i * d + j] - sigma[j * d + i]).abs() > 1e-12 {
                            return Err(Error::domain("covariance must be symmetric"));
                        }
                    }
                }
                let tr: f64 = (0..d).map(|i| sigma[i * d + i]).sum();
                if (tr - 1.0).abs() > 1e-10 {
                    return Err(Error::domain("covariance must have unit trace"));
                }
                (d, Kind::Laplace { chol: cholesky(d, sigma)? })
            }
        };
        Ok(Self { spec, d, kind })
    }

    pub fn stable(norm: NormSpec, alpha: f64, eps: f64) -> Result<Self> {
        Self::new(DisplacementLawSpec::Stable { norm, alpha, eps })
    }

    /// Laplace law with covariance `I/d`.
    pub fn isotropic_laplace(d: usize) -> Result<Self> {
        let mut sigma = vec![0.0; d * d];
        for i in 0..d {
            sigma[i * d + i] = 1.0 / d as f64;
        }
        Self::new(DisplacementLawSpec::Laplace { d, sigma })
    }

    pub fn spec(&self) -> &DisplacementLawSpec {
        &self.spec
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Scaling exponent `min{2, α}` of the spatial motion.
    pub fn scaling_exponent(&self) -> f64 {
        match &self.kind {
            Kind::Stable { alpha, .. } => *alpha,
            Kind::Laplace { .. } => 2.0,
        }
    }

    pub fn branch(&self, u: &[f64]) -> Branch {
        match &self.kind {
            Kind::Stable { alpha, .. } => Branch::Stable { alpha: *alpha },
            Kind::Laplace { .. } => Branch::Laplace { variance: self.variance_along(u) },
        }
    }

    /// `<u, Σ u>` per unit time of the driving process.
    pub fn variance_along(&self, u: &[f64]) -> f64 {
        match &self.kind {
            Kind::Stable { alpha, coord_var, .. } => alpha / (2.0 - alpha) * coord_var * u.iter().map(|v| v * v).sum::<f64>(),
            Kind::Laplace { chol } => {
                let mut s = 0.0;
                for k in 0..self.d {
                    let lu: f64 = (k..self.d).map(|i| chol[i][k] * u[i]).sum();
                    s += lu * lu;
                }
                s
            }
        }
    }

    /// Per-coordinate variance per unit time when the law is a Laplace law
    /// with covariance proportional to the identity.
    pub fn isotropic_variance(&self) -> Option<f64> {
        let DisplacementLawSpec::Laplace { d, sigma } = &self.spec else {
            return None;
        };
        let v = sigma[0];
        let iso = (0..*d).all(|i| (0..*d).all(|j| (sigma[i * d + j] - if i == j { v } else { 0.0 }).abs() < 1e-14));
        iso.then_some(v)
    }

    pub fn truncation(&self) -> Option<TruncationReport> {
        match &self.kind {
            Kind::Stable { norm, alpha, eps, coord_var } => Some(TruncationReport {
                eps: *eps,
                small_jump_variance: alpha * eps.powf(2.0 - alpha) / (2.0 - alpha) * coord_var,
                bias_budget: alpha * eps.powf(3.0 - alpha) / (3.0 - alpha) * ball_euclid_radius(norm).powi(3),
            }),
            Kind::Laplace { .. } => None,
        }
    }

    /// Exact shortfall `E<X,u>^{2p} - E<X̃,u>^{2p}` of the truncated sampler
    /// for `p ≤ 3`; zero for the Laplace branch.
    pub fn moment_bias(&self, u: &[f64], p: usize) -> Result<f64> {
        let Kind::Stable { norm, alpha, eps, .. } = &self.kind else {
            return Ok(0.0);
        };
        let small = |j: u32| -> Result<f64> { Ok(alpha * eps.powf(2.0 * j as f64 - alpha) / (2.0 * j as f64 - alpha) * ball_moment(norm, j, u)?) };
        match p {
            0 | 1 => Ok(0.0),
            2 => small(2),
            3 => {
                let k2 = alpha / (2.0 - alpha) * ball_moment(norm, 1, u)?;
                Ok(small(3)? + 30.0 * k2 * small(2)?)
            }
            _ => Err(Error::domain("moment bias is tabulated for p ≤ 3")),
        }
    }

    /// One draw of `ν_disp`: the driving process stopped at an Exp(1) time.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let t: f64 = Exp1.sample(rng);
        self.sample_at(t, 1.0, rng)
    }

    /// `c · L_t` for the driving Lévy process `L`, with the small-jump
    /// cutoff applied at scale `eps / c` so the work does not depend on `c`.
    pub fn sample_at<R: Rng + ?Sized>(&self, t: f64, c: f64, rng: &mut R) -> Vector {
        let mut x = [0.0; 4];
        match &self.kind {
            Kind::Laplace { chol } => {
                let mut z = [0.0; 4];
                for v in z.iter_mut().take(self.d) {
                    *v = rng.sample(StandardNormal);
                }
                let sc = c * t.sqrt();
                for i in 0..self.d {
                    x[i] = sc * (0..=i).map(|k| chol[i][k] * z[k]).sum::<f64>();
                }
            }
            Kind::Stable { norm, alpha, eps, coord_var } => {
                let eps = (eps / c).min(0.5);
                let ea = eps.powf(-alpha);
                let rate = t * (ea - 1.0);
                let n = if rate > 0.0 {
                    Poisson::new(rate).map(|p| p.sample(rng) as u64).unwrap_or(0)
                } else {
                    0
                };
                for _ in 0..n {
                    // Radius law ∝ s^{-α-1} on (ε, 1].
                    let s = (1.0 + rng.random::<f64>() * (ea - 1.0)).powf(-1.0 / alpha);
                    let y = sample_uniform_ball(norm, rng);
                    for i in 0..self.d {
                        x[i] += s * y[i];
                    }
                }
                let sd = (t * alpha * eps.powf(2.0 - alpha) / (2.0 - alpha) * coord_var).sqrt();
                for v in x.iter_mut().take(self.d) {
                    let g: f64 = rng.sample(StandardNormal);
                    *v = c * (*v + sd * g);
                }
            }
        }
        x
    }

    pub fn coefficient_table(&self, u: &[f64], p_max: usize) -> Result<super::coefficients::CoefficientTable> {
        let norm = match &self.kind {
            Kind::Stable { norm, .. } => *norm,
            Kind::Laplace { .. } => NormSpec::new(NormFamily::ScaledEuclidean, self.d)?,
        };
        displacement_coefficients(self.branch(u), &norm, u, p_max)
    }
}

/// Analytic one-dimensional Laplace density, `K_{1/2}(z) = √(π/2z) e^{-z}`
/// reduced: `(1/√(2σ²)) e^{-√2|x|/σ}`.
pub fn laplace_density_1d(x: f64, variance: f64) -> f64 {
    let s = variance.sqrt();
    (-(2f64.sqrt()) * x.abs() / s).exp() / (2.0 * variance).sqrt()
}

pub fn laplace_cdf_1d(x: f64, variance: f64) -> f64 {
    let e = 0.5 * (-(2f64.sqrt()) * x.abs() / variance.sqrt()).exp();
    if x < 0.0 {
        e
    } else {
        1.0 - e
    }
}
