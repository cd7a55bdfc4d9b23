use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NormFamily, NormSpec};
use crate::quad::{integrate, integrate_to_inf, QuadOptions};
use crate::diagrams::double_factorial_f64;
use crate::special::binomial;

pub type Vector = [f64; 4];

/// Truncated α-stable Lévy measure
/// `dΠ_λ/dx = α 1(‖x‖ ≤ λ) ∫_{‖x‖}^λ s^{-d-α-1} ds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyMeasureSpec {
    pub norm: NormSpec,
    pub alpha: f64,
    /// `None` is `λ = ∞`.
    pub lambda: Option<f64>,
}

impl LevyMeasureSpec {
    pub fn new(norm: NormSpec, alpha: f64, lambda: Option<f64>) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::domain("Lévy measures need 0 < α < 2"));
        }
        if let Some(l) = lambda {
            if !(l > 0.0) {
                return Err(Error::domain("truncation must be positive"));
            }
        }
        Ok(Self { norm, alpha, lambda })
    }

    pub fn d(&self) -> usize {
        self.norm.d
    }

    /// Density as a function of `t = ‖x‖`.
    pub fn radial_density(&self, t: f64) -> f64 {
        let e = self.d() as f64 + self.alpha;
        match self.lambda {
            None => self.alpha / e * t.powf(-e),
            Some(l) if t >= l => 0.0,
            Some(l) => self.alpha / e * (t.powf(-e) - l.powf(-e)),
        }
    }
}

pub fn levy_density(spec: &LevyMeasureSpec, x: &[f64]) -> Result<f64> {
    let t = spec.norm.norm_value(x);
    if t == 0.0 {
        return Err(Error::Pole(format!("Lévy density at the origin (α = {})", spec.alpha)));
    }
    Ok(spec.radial_density(t))
}

/// `∫ g(‖x‖) dΠ(x)` with the unit-volume ball: `∫_0^∞ g(t) ρ(t) d t^{d-1} dt`.
pub fn radial_integral<G: Fn(f64) -> f64>(spec: &LevyMeasureSpec, g: G, opts: QuadOptions) -> Result<f64> {
    let d = spec.d() as f64;
    let f = |t: f64| g(t) * spec.radial_density(t) * d * t.powf(d - 1.0);
    let inner = spec.lambda.unwrap_or(1.0).min(1.0);
    // Substitute t = inner·e^{-u} on the singular part.
    let near = integrate_to_inf(|u| f(inner * (-u).exp()) * inner * (-u).exp(), 0.0, opts)?.value;
    let far = match spec.lambda {
        Some(l) if l > inner => integrate(&f, inner, l, opts)?.value,
        Some(_) => 0.0,
        None => integrate_to_inf(|u| f(inner * u.exp()) * inner * u.exp(), 0.0, opts)?.value,
    };
    Ok(near + far)
}

/// `∫ (dΠ_∞ - dΠ_1)`, equal to one.
pub fn levy_mass_gap(norm: &NormSpec, alpha: f64) -> Result<f64> {
    let inf = LevyMeasureSpec::new(*norm, alpha, None)?;
    let one = LevyMeasureSpec::new(*norm, alpha, Some(1.0))?;
    let d = norm.d as f64;
    let e = d + alpha;
    // Π_∞ - Π_1 has density α/(d+α) min{1, ‖x‖^{-d-α}}; evaluated directly to
    // avoid cancelling two poles at the origin.
    let diff = |t: f64| if t < 1.0 { alpha / e } else { inf.radial_density(t) };
    debug_assert!((diff(2.0) - (inf.radial_density(2.0) - one.radial_density(2.0))).abs() < 1e-15);
    let f = |t: f64| diff(t) * d * t.powf(d - 1.0);
    let opts = QuadOptions::tol(1e-13, 1e-12);
    // Power tail: integrate in log t.
    let tail = integrate_to_inf(|u| f(u.exp()) * u.exp(), 0.0, opts)?.value;
    Ok(integrate(&f, 0.0, 1.0, opts)?.value + tail)
}

/// `∫ (‖x‖² ∧ 1) dΠ`, finite for every Lévy measure.
pub fn levy_small_jump_integral(spec: &LevyMeasureSpec) -> Result<f64> {
    radial_integral(spec, |t| (t * t).min(1.0), QuadOptions::tol(1e-13, 1e-11))
}

/// True when `u` is within rounding of a signed coordinate vector.
fn coordinate_axis(u: &[f64]) -> Option<usize> {
    let mut axis = None;
    for (i, v) in u.iter().enumerate() {
        if (v.abs() - 1.0).abs() < 1e-14 {
            if axis.is_some() {
                return None;
            }
            axis = Some(i);
        } else if v.abs() > 1e-14 {
            return None;
        }
    }
    axis
}

fn check_direction(norm: &NormSpec, u: &[f64]) -> Result<()> {
    if u.len() != norm.d {
        return Err(Error::domain("direction has the wrong dimension"));
    }
    let n2: f64 = u.iter().map(|v| v * v).sum();
    if (n2 - 1.0).abs() > 1e-10 {
        return Err(Error::domain("direction must be a Euclidean unit vector"));
    }
    Ok(())
}

/// `∫_B <y,u>^{2c} dy` over the unit-volume ball of `norm`.
///
/// Exact in every case: the cube integral expands multinomially into
/// factorised one-dimensional moments, the Euclidean ball uses rotation
/// invariance.
pub fn ball_moment(norm: &NormSpec, c: u32, u: &[f64]) -> Result<f64> {
    check_direction(norm, u)?;
    let k = 2 * c;
    let d = norm.d;
    match norm.family {
        NormFamily::ScaledSup => {
            // ∫_{-1/2}^{1/2} y^j dy for even j.
            let mono = |j: u32| if j % 2 == 1 { 0.0 } else { 0.5f64.powi(j as i32) / (j + 1) as f64 };
            if coordinate_axis(u).is_some() {
                return Ok(mono(k));
            }
            let mut total = 0.0;
            let mut exps = vec![0u32; d];
            fn rec(i: usize, left: u32, exps: &mut Vec<u32>, u: &[f64], mono: &dyn Fn(u32) -> f64, total: &mut f64, k: u32) {
                if i + 1 == exps.len() {
                    exps[i] = left;
                    let mut coef = 1.0;
                    let mut n = 0;
                    let mut term = 1.0;
                    for (j, &e) in exps.iter().enumerate() {
                        n += e;
                        coef *= binomial(n, e);
                        term *= u[j].powi(e as i32) * mono(e);
                    }
                    debug_assert_eq!(n, k);
                    *total += coef * term;
                    return;
                }
                for e in (0..=left).step_by(2) {
                    exps[i] = e;
                    rec(i + 1, left - e, exps, u, mono, total, k);
                }
            }
            rec(0, k, &mut exps, u, &mono, &mut total, k);
            Ok(total)
        }
        NormFamily::ScaledEuclidean => {
            let rho = 1.0 / norm.scale_constant;
            let df = d as f64;
            let mut sphere = double_factorial_f64(k as i64 - 1);
            for j in 0..c {
                sphere /= df + 2.0 * j as f64;
            }
            // V_d ρ^d = 1; radial factor d/(d + 2c).
            Ok(rho.powi(k as i32) * df / (df + k as f64) * sphere)
        }
    }
}

/// `sup_{y∈B} ‖y‖₂`.
pub fn ball_euclid_radius(norm: &NormSpec) -> f64 {
    match norm.family {
        NormFamily::ScaledSup => 0.5 * (norm.d as f64).sqrt(),
        NormFamily::ScaledEuclidean => 1.0 / norm.scale_constant,
    }
}

/// Uniform point of the unit-volume ball.
pub fn sample_uniform_ball<R: Rng + ?Sized>(norm: &NormSpec, rng: &mut R) -> Vector {
    let d = norm.d;
    let mut y = [0.0; 4];
    match norm.family {
        NormFamily::ScaledSup => {
            for v in y.iter_mut().take(d) {
                *v = rng.random::<f64>() - 0.5;
            }
        }
        NormFamily::ScaledEuclidean => {
            let mut n2 = 0.0;
            for v in y.iter_mut().take(d) {
                *v = rng.sample(StandardNormal);
                n2 += *v * *v;
            }
            let rad = rng.random::<f64>().powf(1.0 / d as f64) / norm.scale_constant / n2.sqrt();
            for v in y.iter_mut().take(d) {
                *v *= rad;
            }
        }
    }
    y
}
