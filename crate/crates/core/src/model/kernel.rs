use serde::{Deserialize, Serialize};

use super::norm::{NormSpec, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelVariant {
    PurePower,
    /// `(1 + s/L)^{-d-α}`, rescaled so that `|J'(s)| s^{d+α+1} → 1`.
    SmoothedSpreadOut { l: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub d: usize,
    pub alpha: f64,
    pub variant: KernelVariant,
}

impl KernelSpec {
    pub fn pure_power(d: usize, alpha: f64) -> Self {
        Self {
            d,
            alpha,
            variant: KernelVariant::PurePower,
        }
    }

    pub fn smoothed(d: usize, alpha: f64, l: f64) -> Self {
        Self {
            d,
            alpha,
            variant: KernelVariant::SmoothedSpreadOut { l },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::domain("dimension must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::domain(format!("alpha = {} must be positive", self.alpha)));
        }
        if let KernelVariant::SmoothedSpreadOut { l } = self.variant {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::domain(format!("spread L = {l} must be positive")));
            }
        }
        Ok(())
    }

    fn exponent(&self) -> f64 {
        self.d as f64 + self.alpha
    }

    /// `J(s)` without argument checks.
    #[inline]
    pub fn j(&self, s: f64) -> f64 {
        let e = self.exponent();
        match self.variant {
            KernelVariant::PurePower => s.powf(-e) / e,
            KernelVariant::SmoothedSpreadOut { l } => (1.0 + s / l).powf(-e) / (e * l.powf(e)),
        }
    }

    /// `J_r(s)` without argument checks.
    #[inline]
    pub fn j_cut(&self, s: f64, r: f64) -> f64 {
        if s >= r {
            return 0.0;
        }
        let e = self.exponent();
        match self.variant {
            KernelVariant::PurePower => (s.powf(-e) - r.powf(-e)) / e,
            KernelVariant::SmoothedSpreadOut { .. } => (self.j(s) - self.j(r)).max(0.0),
        }
    }

    /// `|J'(s)|`.
    pub fn j_prime_abs(&self, s: f64) -> f64 {
        let e = self.exponent();
        match self.variant {
            KernelVariant::PurePower => s.powf(-e - 1.0),
            KernelVariant::SmoothedSpreadOut { l } => (1.0 + s / l).powf(-e - 1.0) / l.powf(e + 1.0),
        }
    }

    /// Error function `δ_s` defined by `|J'(s)| = (1 + δ_s) s^{-d-α-1}`.
    pub fn delta(&self, s: f64) -> f64 {
        match self.variant {
            KernelVariant::PurePower => 0.0,
            KernelVariant::SmoothedSpreadOut { l } => (1.0 + l / s).powf(-self.exponent() - 1.0) - 1.0,
        }
    }
}

pub fn kernel_value(kernel: &KernelSpec, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!("kernel distance s = {s} must be positive")));
    }
    Ok(kernel.j(s))
}

pub fn cutoff_kernel_value(kernel: &KernelSpec, s: f64, r: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!("kernel distance s = {s} must be positive")));
    }
    if !(r > 0.0) {
        return Err(Error::domain(format!("cutoff r = {r} must be positive")));
    }
    Ok(kernel.j_cut(s, r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub kernel: KernelSpec,
    pub norm: NormSpec,
    pub beta: f64,
    pub seed: u64,
}

impl ModelParams {
    pub fn new(kernel: KernelSpec, norm: NormSpec, beta: f64, seed: u64) -> Result<Self> {
        kernel.validate()?;
        if kernel.d != norm.d {
            return Err(Error::domain(format!(
                "kernel dimension {} differs from norm dimension {}",
                kernel.d, norm.d
            )));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!("beta = {beta} must be non-negative")));
        }
        Ok(Self {
            kernel,
            norm,
            beta,
            seed,
        })
    }

    pub fn d(&self) -> usize {
        self.kernel.d
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        Self { beta, ..*self }
    }

    /// Edge probability at distance `s` under the cut-off measure.
    #[inline]
    pub fn p_at(&self, s: f64, r: f64) -> f64 {
        -(-self.beta * self.kernel.j_cut(s, r)).exp_m1()
    }
}

pub fn edge_probability(params: &ModelParams, x: &Point, y: &Point, r: f64) -> Result<f64> {
    if x == y {
        return Err(Error::domain("no self-loops: x = y"));
    }
    if !(r > 0.0) {
        return Err(Error::domain(format!("cutoff r = {r} must be positive")));
    }
    Ok(params.p_at(params.norm.lattice_distance(x, y), r))
}
