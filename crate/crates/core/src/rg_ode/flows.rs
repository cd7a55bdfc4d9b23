use serde::{Deserialize, Serialize};

use super::extract::{fit_critical_log, log_slope_last_decade};
use super::integrator::{dopri5, OdeOptions};
use crate::diagrams::double_factorial_f64;
use crate::error::{Error, Result};
use crate::special::{binomial, multinomial};

/// Log-spaced output grid on `[r0, r1]` with `n + 1` points.
pub fn log_grid(r0: f64, r1: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    let (l0, l1) = (r0.ln(), r1.ln());
    (0..=n).map(|i| (l0 + (l1 - l0) * i as f64 / n as f64).exp()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentHierarchyState {
    pub r: f64,
    /// `m[p - 1] = M_p(r)`.
    pub m: Vec<f64>,
}

/// `(2p - 3)!! A^{p-1} (α/β) r^{(2p-1)α}`, the exact self-similar family.
pub fn moment_family(alpha: f64, beta: f64, a: f64, p: usize, r: f64) -> f64 {
    double_factorial_f64(2 * p as i64 - 3) * a.powi(p as i32 - 1) * alpha / beta * r.powf((2 * p - 1) as f64 * alpha)
}

/// Integrates `dM_p/dr = β r^{-α-1} Σ_{ℓ<p} C(p, ℓ) M_{ℓ+1} M_{p-ℓ}` from
/// `r0` to each point of `r_out`, starting at `m0` (or on the family when
/// `m0` is `None`).
///
/// The unknowns are `M_p / r^{(2p-1)α}` in `t = log r`, which turns the
/// system autonomous.
pub fn integrate_moment_hierarchy(
    alpha: f64,
    beta: f64,
    a: f64,
    p_max: usize,
    r0: f64,
    m0: Option<&[f64]>,
    r_out: &[f64],
    opts: OdeOptions,
) -> Result<Vec<MomentHierarchyState>> {
    if !(alpha > 0.0 && beta > 0.0 && r0 > 0.0) || p_max == 0 {
        return Err(Error::domain("hierarchy needs α, β, r0 > 0 and p_max >= 1"));
    }
    let init: Vec<f64> = match m0 {
        Some(m) if m.len() == p_max => m.to_vec(),
        Some(_) => return Err(Error::domain("initial data length must equal p_max")),
        None => (1..=p_max).map(|p| moment_family(alpha, beta, a, p, r0)).collect(),
    };
    if init.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::domain("initial moments must be positive"));
    }
    let expo = |p: usize| (2 * p - 1) as f64 * alpha;
    let y0: Vec<f64> = init.iter().enumerate().map(|(i, v)| v / r0.powf(expo(i + 1))).collect();
    let coef: Vec<Vec<f64>> = (1..=p_max)
        .map(|p| (0..p).map(|l| binomial(p as u32, l as u32)).collect())
        .collect();
    let t0 = r0.ln();
    let ts: Vec<f64> = r_out.iter().map(|r| r.ln()).collect();
    let (ys, _) = dopri5(
        |_, y, dy| {
            for p in 1..=p_max {
                let mut s = 0.0;
                for l in 0..p {
                    s += coef[p - 1][l] * y[l] * y[p - l - 1];
                }
                dy[p - 1] = beta * s - expo(p) * y[p - 1];
            }
        },
        t0,
        &y0,
        &ts,
        opts,
    )?;
    Ok(r_out
        .iter()
        .zip(ys)
        .map(|(&r, y)| MomentHierarchyState {
            r,
            m: y.iter().enumerate().map(|(i, v)| v * r.powf(expo(i + 1))).collect(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GyrationRegime {
    /// `α < 2`: `f ~ (α/(2-α)) ∫_B ‖y‖² · r² (α/β) r^α`.
    Diffusive,
    /// `α = 2`: `f ~ C r^4 log r`.
    CriticalLog,
    /// `α > 2`: regularly varying of index `2α`.
    Anomalous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GyrationReport {
    pub alpha: f64,
    pub beta_c: f64,
    pub ball_moment: f64,
    pub regime: GyrationRegime,
    /// Driving constant `C = (α²/β_c) ∫_B ‖y‖²`.
    pub driving_constant: f64,
    /// Diffusive: `f / (r² (α/β_c) r^α)` at `r1`. Critical: fitted `C`.
    /// Anomalous: log-slope over the last decade.
    pub extracted: f64,
    /// Value the extracted quantity tends to.
    pub predicted: f64,
    pub r: Vec<f64>,
    pub f: Vec<f64>,
}

/// Solves `f' = 2α f / r + C r^{1+α}` with `f(r0) = f0`.
pub fn gyration_flow(
    alpha: f64,
    beta_c: f64,
    ball_moment: f64,
    r0: f64,
    f0: f64,
    r_out: &[f64],
    opts: OdeOptions,
) -> Result<GyrationReport> {
    if !(alpha > 0.0 && beta_c > 0.0 && r0 > 0.0) || r_out.len() < 2 {
        return Err(Error::domain("gyration flow needs α, β_c, r0 > 0 and two output radii"));
    }
    let c = alpha * alpha / beta_c * ball_moment;
    // g = f / r^{2α} obeys dg/dt = C e^{(2-α) t}.
    let t0 = r0.ln();
    let ts: Vec<f64> = r_out.iter().map(|r| r.ln()).collect();
    let (ys, _) = dopri5(
        |t, _, dy| dy[0] = c * ((2.0 - alpha) * t).exp(),
        t0,
        &[f0 / r0.powf(2.0 * alpha)],
        &ts,
        opts,
    )?;
    let f: Vec<f64> = r_out.iter().zip(&ys).map(|(r, y)| y[0] * r.powf(2.0 * alpha)).collect();
    let r1 = *r_out.last().unwrap();
    let f1 = *f.last().unwrap();
    let (regime, extracted, predicted) = if (alpha - 2.0).abs() < 1e-12 {
        let fit = fit_critical_log(r_out, &f, 2.0 * alpha)?;
        (GyrationRegime::CriticalLog, fit.0, c)
    } else if alpha < 2.0 {
        let norm = r1 * r1 * alpha / beta_c * r1.powf(alpha);
        (GyrationRegime::Diffusive, f1 / norm, alpha / (2.0 - alpha) * ball_moment)
    } else {
        let lr: Vec<f64> = r_out.iter().map(|r| r.ln()).collect();
        let lf: Vec<f64> = f.iter().map(|v| v.ln()).collect();
        (GyrationRegime::Anomalous, log_slope_last_decade(&lr, &lf)?, 2.0 * alpha)
    };
    Ok(GyrationReport {
        alpha,
        beta_c,
        ball_moment,
        regime,
        driving_constant: c,
        extracted,
        predicted,
        r: r_out.to_vec(),
        f,
    })
}

fn check_ball_moments(p_max: usize, ball_moments: &[f64]) -> Result<()> {
    if ball_moments.len() <= p_max {
        return Err(Error::domain("ball_moments must hold orders 0..=p_max"));
    }
    if (ball_moments[0] - 1.0).abs() > 1e-9 {
        return Err(Error::domain("the ball must have unit volume"));
    }
    Ok(())
}

/// Triples `(a, b, c)` with `a + b + c = p`, excluding `(p, 0, 0)` and
/// `(0, p, 0)`, with weight `(2p)! / ((2a)! (2b)! (2c)!)`.
fn driving_terms(p: usize) -> Vec<(usize, usize, usize, f64)> {
    let mut out = Vec::new();
    for a in 0..=p {
        for b in 0..=p - a {
            let c = p - a - b;
            if (a == p) || (b == p) {
                continue;
            }
            out.push((a, b, c, multinomial(&[2 * a as u32, 2 * b as u32, 2 * c as u32])));
        }
    }
    out
}

/// Fixed point of the scaled displacement flow for `α < 2`:
/// `A_{2p} = α / (2p - α) Σ' (2p)!/((2a)!(2b)!(2c)!) A_{2a} A_{2b} m_c`,
/// `A_0 = 1`.
pub fn displacement_limits(alpha: f64, p_max: usize, ball_moments: &[f64]) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::domain("displacement limits exist for 0 < α < 2"));
    }
    check_ball_moments(p_max, ball_moments)?;
    let mut w = vec![1.0; p_max + 1];
    for p in 1..=p_max {
        let s: f64 = driving_terms(p)
            .iter()
            .map(|&(a, b, c, k)| k * w[a] * w[b] * ball_moments[c])
            .sum();
        w[p] = alpha / (2.0 * p as f64 - alpha) * s;
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementTrajectory {
    pub alpha: f64,
    pub beta_c: f64,
    pub r: Vec<f64>,
    /// `z[i][p - 1]` models `E Σ_{x∈K} <x,u>^{2p}` at `r[i]`.
    pub z: Vec<Vec<f64>>,
    /// `w[i][p - 1] = z / (r^{2p} (α/β_c) r^α)`.
    pub w: Vec<Vec<f64>>,
}

impl DisplacementTrajectory {
    /// `w_p / w_1^p` at the last radius.
    pub fn gaussian_ratios(&self) -> Vec<f64> {
        let w = self.w.last().unwrap();
        w.iter().enumerate().map(|(i, v)| v / w[0].powi(i as i32 + 1)).collect()
    }

    pub fn final_scaled(&self) -> &[f64] {
        self.w.last().unwrap()
    }
}

/// Mean-field flow of the displacement moments, started from zero spatial
/// moments at `r0`; `M_1` follows `(α/β_c) r^α`.
pub fn displacement_flow(
    alpha: f64,
    beta_c: f64,
    p_max: usize,
    ball_moments: &[f64],
    r0: f64,
    r_out: &[f64],
    opts: OdeOptions,
) -> Result<DisplacementTrajectory> {
    if !(alpha > 0.0 && beta_c > 0.0 && r0 > 0.0) || p_max == 0 {
        return Err(Error::domain("displacement flow needs α, β_c, r0 > 0 and p_max >= 1"));
    }
    check_ball_moments(p_max, ball_moments)?;
    let terms: Vec<_> = (1..=p_max).map(driving_terms).collect();
    let m = ball_moments.to_vec();
    let ts: Vec<f64> = r_out.iter().map(|r| r.ln()).collect();
    let (ys, _) = dopri5(
        |_, y, dy| {
            let w = |i: usize| if i == 0 { 1.0 } else { y[i - 1] };
            for p in 1..=p_max {
                let s: f64 = terms[p - 1].iter().map(|&(a, b, c, k)| k * w(a) * w(b) * m[c]).sum();
                dy[p - 1] = (alpha - 2.0 * p as f64) * y[p - 1] + alpha * s;
            }
        },
        r0.ln(),
        &vec![0.0; p_max],
        &ts,
        opts,
    )?;
    let z = r_out
        .iter()
        .zip(&ys)
        .map(|(&r, w)| {
            let m1 = alpha / beta_c * r.powf(alpha);
            w.iter().enumerate().map(|(i, v)| v * r.powi(2 * (i as i32 + 1)) * m1).collect()
        })
        .collect();
    Ok(DisplacementTrajectory {
        alpha,
        beta_c,
        r: r_out.to_vec(),
        z,
        w: ys,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rg_ode::closed::solve_riccati_exact;
    use crate::rg_ode::profile::Profile;

    #[test]
    fn family_is_preserved() {
        let (alpha, beta, a) = (0.7, 1.3, 0.45);
        let out = integrate_moment_hierarchy(alpha, beta, a, 5, 1.0, None, &[10.0, 100.0], OdeOptions::tol(1e-10, 1e-14)).unwrap();
        for st in &out {
            for p in 1..=5 {
                let want = moment_family(alpha, beta, a, p, st.r);
                assert!((st.m[p - 1] / want - 1.0).abs() < 1e-6, "p={p} r={}", st.r);
            }
        }
    }

    #[test]
    fn first_order_matches_riccati() {
        let (alpha, beta) = (0.6, 2.0);
        let rs = log_grid(1.0, 1e3, 12);
        let out = integrate_moment_hierarchy(alpha, beta, 0.0, 1, 1.0, None, &rs, OdeOptions::default()).unwrap();
        for st in out {
            let want = solve_riccati_exact(beta, alpha, &Profile::Zero, st.r, 1.0).unwrap();
            assert!((st.m[0] / want - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn third_moment_perturbation_decays() {
        let (alpha, beta, a) = (1.0, 1.0, 0.8);
        let eps = 0.1;
        let mut m0: Vec<f64> = (1..=3).map(|p| moment_family(alpha, beta, a, p, 1.0)).collect();
        m0[2] *= 1.0 + eps;
        let out = integrate_moment_hierarchy(alpha, beta, a, 3, 1.0, Some(&m0), &[1.0, 100.0], OdeOptions::default()).unwrap();
        let dev = |st: &MomentHierarchyState| st.m[2] / moment_family(alpha, beta, a, 3, st.r) - 1.0;
        assert!((dev(&out[0]) - eps).abs() < 1e-12);
        assert!(dev(&out[0]) / dev(&out[1]).abs() >= 10.0);
    }

    #[test]
    fn gyration_regimes() {
        let bm = 1.0 / 12.0;
        let rs = log_grid(1.0, 1e4, 200);
        let rep = gyration_flow(1.0, 0.5, bm, 1.0, 0.0, &rs, OdeOptions::default()).unwrap();
        assert_eq!(rep.regime, GyrationRegime::Diffusive);
        assert!((rep.extracted / rep.predicted - 1.0).abs() < 1e-3);

        let rep = gyration_flow(3.0, 0.5, bm, 1.0, 0.0, &rs, OdeOptions::default()).unwrap();
        assert_eq!(rep.regime, GyrationRegime::Anomalous);
        assert!((rep.extracted - 6.0).abs() < 1e-3);

        let rep = gyration_flow(2.0, 0.5, bm, 1.0, 0.0, &rs, OdeOptions::default()).unwrap();
        assert_eq!(rep.regime, GyrationRegime::CriticalLog);
        assert!((rep.extracted / rep.predicted - 1.0).abs() < 2e-2);
        let n = rs.len();
        for i in (n - 51)..n {
            let ratio = rep.f[i] / (rs[i].powi(4) * rs[i].ln()) / rep.driving_constant;
            assert!((ratio - 1.0).abs() < 2e-2);
        }
    }

    #[test]
    fn first_displacement_moment_is_gyration() {
        let (alpha, beta) = (1.2, 0.7);
        let m: Vec<f64> = (0..=2).map(|c| 0.25f64.powi(c) / (2 * c + 1) as f64).collect();
        let rs = log_grid(1.0, 1e3, 30);
        let disp = displacement_flow(alpha, beta, 2, &m, 1.0, &rs, OdeOptions::default()).unwrap();
        let gy = gyration_flow(alpha, beta, m[1], 1.0, 0.0, &rs, OdeOptions::default()).unwrap();
        for (z, f) in disp.z.iter().zip(&gy.f).skip(1) {
            assert!((z[0] / f - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn displacement_converges_to_fixed_point() {
        let alpha = 1.5;
        let m: Vec<f64> = (0..=3).map(|c| 0.25f64.powi(c) / (2 * c + 1) as f64).collect();
        let lim = displacement_limits(alpha, 3, &m).unwrap();
        assert!((lim[1] - alpha / (2.0 - alpha) * m[1]).abs() < 1e-15);
        let disp = displacement_flow(alpha, 1.0, 3, &m, 1.0, &[1.0, 1e14], OdeOptions::default()).unwrap();
        for p in 1..=3 {
            assert!((disp.final_scaled()[p - 1] / lim[p] - 1.0).abs() < 1e-3, "p={p}");
        }
    }

    #[test]
    fn large_alpha_gives_gaussian_ratios() {
        let m: Vec<f64> = (0..=3).map(|c| 0.25f64.powi(c) / (2 * c + 1) as f64).collect();
        let disp = displacement_flow(3.0, 1.0, 3, &m, 1.0, &[1.0, 1e6], OdeOptions::default()).unwrap();
        let g = disp.gaussian_ratios();
        for (p, want) in [(1, 1.0), (2, 6.0), (3, 90.0)] {
            assert!((g[p - 1] / want - 1.0).abs() < 1e-2, "p={p}: {}", g[p - 1]);
        }
    }
}
