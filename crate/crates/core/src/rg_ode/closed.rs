use serde::{Deserialize, Serialize};

use super::integrator::{dopri5, OdeOptions};
use super::profile::Profile;
use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_to_inf, QuadOptions};

fn quad_opts() -> QuadOptions {
    QuadOptions::tol(1e-14, 1e-12)
}

/// Closed form of the solution of `f' = A (1 - h) r^{-α-1} f²` that grows
/// like `(α/A) r^α`:
/// `f(r) = (α/A) r^α (1 - α r^α ∫_r^∞ h(s) s^{-α-1} ds)^{-1}`.
///
/// The tail integral is computed by quadrature up to `horizon` and
/// analytically beyond it, treating `h` as constant there.
pub fn solve_riccati_exact(a: f64, alpha: f64, h: &Profile, r: f64, horizon: f64) -> Result<f64> {
    if !(a > 0.0 && alpha > 0.0 && r > 0.0) {
        return Err(Error::domain("riccati needs A, α, r > 0"));
    }
    let tail = riccati_tail_integral(alpha, h, r, horizon)?;
    let bracket = 1.0 - alpha * r.powf(alpha) * tail;
    if !(bracket > 0.0) {
        return Err(Error::BlowUp { r, bracket });
    }
    Ok(alpha / a * r.powf(alpha) / bracket)
}

/// `∫_r^∞ h(s) s^{-α-1} ds`.
pub fn riccati_tail_integral(alpha: f64, h: &Profile, r: f64, horizon: f64) -> Result<f64> {
    if h.is_zero() {
        return Ok(0.0);
    }
    let g = |s: f64| h.eval(s) * s.powf(-alpha - 1.0);
    if let Profile::Power { b, .. } = h {
        if *b < alpha {
            // In log variable the integrand is smooth and decays exponentially.
            let q = integrate_to_inf(|u| g(r * u.exp()) * r * u.exp(), 0.0, quad_opts())?;
            return Ok(q.value);
        }
        return Err(Error::domain("driving exponent must be below α for a convergent tail"));
    }
    let hz = horizon.max(r);
    let body = if hz > r {
        integrate(|u| g(u.exp()) * u.exp(), r.ln(), hz.ln(), quad_opts())?.value
    } else {
        0.0
    };
    Ok(body + h.tail_value(hz) * hz.powf(-alpha) / alpha)
}

/// Data of `f' = (1 - δ) (a / r) f + h(r) / r` on `[r0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivenOdeSpec {
    pub a: f64,
    pub h: Profile,
    pub delta: Profile,
    pub r0: f64,
    pub f0: f64,
}

/// `f(r) = e^{I(r)} (f(r0) + ∫_{r0}^r h(s)/s e^{-I(s)} ds)` with
/// `I(s) = ∫_{r0}^s (1 - δ(t)) a/t dt`, by nested quadrature in `log r`.
pub fn solve_linear_driven_exact(spec: &DrivenOdeSpec, r: f64) -> Result<f64> {
    if !(spec.r0 > 0.0 && r >= spec.r0) {
        return Err(Error::domain("need 0 < r0 <= r"));
    }
    let l0 = spec.r0.ln();
    let big_i = |u: f64| -> Result<f64> {
        if spec.delta.is_zero() {
            Ok(spec.a * (u - l0))
        } else {
            Ok(integrate(|v| (1.0 - spec.delta.eval(v.exp())) * spec.a, l0, u, quad_opts())?.value)
        }
    };
    let lr = r.ln();
    let i_r = big_i(lr)?;
    let drive = if spec.h.is_zero() {
        0.0
    } else {
        let mut failure = None;
        // e^{I(r) - I(s)} keeps the integrand bounded for growing solutions.
        let q = integrate(
            |u| match big_i(u) {
                Ok(iu) => spec.h.eval(u.exp()) * (i_r - iu).exp(),
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            },
            l0,
            lr,
            QuadOptions::tol(0.0, 1e-12),
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        q.value
    };
    Ok(i_r.exp() * spec.f0 + drive)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    DrivingDominant,
    SelfDominant,
    CriticalLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticClass {
    pub regime: Regime,
    /// Regular-variation index of the solution.
    pub index: f64,
    /// `f / h → 1/(b - a)` in the driving-dominant regime.
    pub limit_constant: Option<f64>,
}

/// Asymptotic class of `f' ≈ a f / r + h / r` with `h` of index `b`.
pub fn classify_driving_regime(a: f64, b: f64) -> Result<AsymptoticClass> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain("classification needs a, b > 0"));
    }
    let tol = 1e-12 * a.abs().max(b.abs());
    Ok(if (b - a).abs() <= tol {
        AsymptoticClass {
            regime: Regime::CriticalLog,
            index: a,
            limit_constant: None,
        }
    } else if b > a {
        AsymptoticClass {
            regime: Regime::DrivingDominant,
            index: b,
            limit_constant: Some(1.0 / (b - a)),
        }
    } else {
        AsymptoticClass {
            regime: Regime::SelfDominant,
            index: a,
            limit_constant: None,
        }
    })
}

/// Forward integration of the Riccati equation against its closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiccatiCheck {
    pub r: Vec<f64>,
    pub forward: Vec<f64>,
    pub exact: Vec<f64>,
    pub max_rel_err: f64,
}

/// Integrates `f' = A (1 - h) r^{-α-1} f²` in `t = log r` from the closed
/// form at `r_out[0]` and compares on the grid.
pub fn riccati_check(a: f64, alpha: f64, h: &Profile, r_out: &[f64], horizon: f64, opts: OdeOptions) -> Result<RiccatiCheck> {
    if r_out.len() < 2 || r_out[0] <= 0.0 {
        return Err(Error::domain("riccati check needs an increasing grid of positive radii"));
    }
    let exact = r_out.iter().map(|&r| solve_riccati_exact(a, alpha, h, r, horizon)).collect::<Result<Vec<_>>>()?;
    let ts: Vec<f64> = r_out.iter().map(|r| r.ln()).collect();
    let (ys, _) = dopri5(
        |t, y, dy| {
            let r = t.exp();
            dy[0] = a * (1.0 - h.eval(r)) * r.powf(-alpha) * y[0] * y[0];
        },
        ts[0],
        &[exact[0]],
        &ts,
        opts,
    )?;
    let forward: Vec<f64> = ys.into_iter().map(|y| y[0]).collect();
    let max_rel_err = forward.iter().zip(&exact).map(|(f, e)| (f / e - 1.0).abs()).fold(0.0, f64::max);
    Ok(RiccatiCheck {
        r: r_out.to_vec(),
        forward,
        exact,
        max_rel_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riccati_closed_forms() {
        let (a, alpha) = (1.7, 0.6);
        for r in [1.0, 10.0, 1e3] {
            let f = solve_riccati_exact(a, alpha, &Profile::Zero, r, 1e6).unwrap();
            assert!((f / (alpha / a * r.powf(alpha)) - 1.0).abs() < 1e-14);
            let c = 0.3;
            let f = solve_riccati_exact(a, alpha, &Profile::Constant { c }, r, 1e6).unwrap();
            assert!((f / (alpha / a * r.powf(alpha) / (1.0 - c)) - 1.0).abs() < 1e-10);
            // h(s) = c/s: bracket 1 - αc/((α+1) r).
            let h = Profile::Power { c, b: -1.0 };
            let f = solve_riccati_exact(a, alpha, &h, r, 1e6).unwrap();
            let want = alpha / a * r.powf(alpha) / (1.0 - alpha * c / ((alpha + 1.0) * r));
            assert!((f / want - 1.0).abs() < 1e-10);
        }
        assert!(matches!(
            solve_riccati_exact(1.0, 0.5, &Profile::Constant { c: 1.5 }, 2.0, 10.0),
            Err(Error::BlowUp { .. })
        ));
    }

    #[test]
    fn riccati_forward_integration_matches() {
        let (a, alpha) = (1.0, 0.8);
        let h = Profile::Power { c: 0.4, b: -0.5 };
        let ts: Vec<f64> = (0..=30).map(|i| i as f64 * 1e3f64.ln() / 30.0).collect();
        let f0 = solve_riccati_exact(a, alpha, &h, 1.0, 1e9).unwrap();
        let (ys, _) = dopri5(
            |t, y, dy| {
                let r = t.exp();
                dy[0] = a * (1.0 - h.eval(r)) * r.powf(-alpha) * y[0] * y[0];
            },
            0.0,
            &[f0],
            &ts,
            OdeOptions::tol(1e-12, 1e-14),
        )
        .unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            let want = solve_riccati_exact(a, alpha, &h, t.exp(), 1e9).unwrap();
            assert!((y[0] / want - 1.0).abs() < 1e-8, "r = {}", t.exp());
        }
    }

    #[test]
    fn riccati_check_over_three_decades() {
        let h = Profile::Power { c: 0.4, b: -0.5 };
        let r: Vec<f64> = (0..=30).map(|i| 10f64.powf(i as f64 * 0.1)).collect();
        let c = riccati_check(1.0, 0.8, &h, &r, 1e9, OdeOptions::tol(1e-12, 1e-14)).unwrap();
        assert!(c.max_rel_err < 1e-8, "{}", c.max_rel_err);
    }

    #[test]
    fn linear_driven_limits() {
        let hom = DrivenOdeSpec {
            a: 1.3,
            h: Profile::Zero,
            delta: Profile::Zero,
            r0: 2.0,
            f0: 0.7,
        };
        let f = solve_linear_driven_exact(&hom, 50.0).unwrap();
        assert!((f / (0.7 * 25f64.powf(1.3)) - 1.0).abs() < 1e-13);

        let (a, b) = (1.0, 2.0);
        let spec = DrivenOdeSpec {
            a,
            h: Profile::Power { c: 1.0, b },
            delta: Profile::Zero,
            r0: 1.0,
            f0: 1.0,
        };
        let r = 1e6;
        let f = solve_linear_driven_exact(&spec, r).unwrap();
        assert!((f * (b - a) / r.powf(b) - 1.0).abs() < 1e-3);
        let exact = r.powf(a) * (1.0 + (r.powf(b - a) - 1.0) / (b - a));
        assert!((f / exact - 1.0).abs() < 1e-10);

        let crit = DrivenOdeSpec {
            a: 1.5,
            h: Profile::Power { c: 1.0, b: 1.5 },
            delta: Profile::Zero,
            r0: 1.0,
            f0: 0.0,
        };
        let f = solve_linear_driven_exact(&crit, r).unwrap();
        assert!((f / (r.powf(1.5) * r.ln()) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn linear_driven_with_error_function_matches_integration() {
        let spec = DrivenOdeSpec {
            a: 0.8,
            h: Profile::Power { c: 2.0, b: 0.5 },
            delta: Profile::Power { c: 0.3, b: -0.7 },
            r0: 1.0,
            f0: 0.2,
        };
        let ts = [0.0, 2.0, 5.0, 8.0];
        let (ys, _) = dopri5(
            |t, y, dy| {
                let r = t.exp();
                dy[0] = (1.0 - spec.delta.eval(r)) * spec.a * y[0] + spec.h.eval(r);
            },
            0.0,
            &[spec.f0],
            &ts,
            OdeOptions::tol(1e-12, 1e-14),
        )
        .unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            let f = solve_linear_driven_exact(&spec, t.exp()).unwrap();
            assert!((f / y[0] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn regimes() {
        for alpha in [0.5, 1.0, 1.5] {
            let c = classify_driving_regime(2.0 * alpha, 2.0 + alpha).unwrap();
            assert_eq!(c.regime, Regime::DrivingDominant);
            assert!((c.limit_constant.unwrap() - 1.0 / (2.0 - alpha)).abs() < 1e-14);
        }
        let c = classify_driving_regime(6.0, 5.0).unwrap();
        assert_eq!((c.regime, c.index), (Regime::SelfDominant, 6.0));
        assert_eq!(classify_driving_regime(4.0, 4.0).unwrap().regime, Regime::CriticalLog);
    }
}
