//! Dormand–Prince 5(4) with adaptive step control.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h0: None,
            max_steps: 1_000_000,
        }
    }
}

impl OdeOptions {
    pub fn tol(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth- minus fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(t, y)` from `t0` and returns the state at every point
/// of the increasing grid `t_out` (all `≥ t0`).
pub fn dopri5<F>(mut f: F, t0: f64, y0: &[f64], t_out: &[f64], opts: OdeOptions) -> Result<(Vec<Vec<f64>>, OdeStats)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut stats = OdeStats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    let mut out = Vec::with_capacity(t_out.len());
    f(t, &y, &mut k[0]);
    stats.evaluations += 1;
    let span = t_out.last().map_or(0.0, |&te| (te - t0).abs());
    let mut h = opts.h0.unwrap_or_else(|| (span * 1e-3).max(1e-6));
    for &target in t_out {
        if target < t - 1e-15 * t.abs().max(1.0) {
            return Err(Error::domain("output grid must be increasing and start at or after t0"));
        }
        while t < target {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::Stiffness { t });
            }
            let last = t + h >= target;
            let hh = if last { target - t } else { h };
            if hh < 1e-14 * t.abs().max(1.0) && !last {
                return Err(Error::Stiffness { t });
            }
            let stage = |coef: &[(usize, f64)], k: &Vec<Vec<f64>>, y: &[f64], tmp: &mut [f64]| {
                for i in 0..n {
                    let mut s = y[i];
                    for &(j, a) in coef {
                        s += hh * a * k[j][i];
                    }
                    tmp[i] = s;
                }
            };
            stage(&[(0, A21)], &k, &y, &mut tmp);
            f(t + C2 * hh, &tmp, &mut k[1]);
            stage(&[(0, A31), (1, A32)], &k, &y, &mut tmp);
            f(t + C3 * hh, &tmp, &mut k[2]);
            stage(&[(0, A41), (1, A42), (2, A43)], &k, &y, &mut tmp);
            f(t + C4 * hh, &tmp, &mut k[3]);
            stage(&[(0, A51), (1, A52), (2, A53), (3, A54)], &k, &y, &mut tmp);
            f(t + C5 * hh, &tmp, &mut k[4]);
            stage(&[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], &k, &y, &mut tmp);
            f(t + hh, &tmp, &mut k[5]);
            stage(&[(0, B1), (2, B3), (3, B4), (4, B5), (5, B6)], &k, &y, &mut y5);
            f(t + hh, &y5, &mut k[6]);
            stats.evaluations += 6;
            let mut err: f64 = 0.0;
            for i in 0..n {
                let e = hh * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
                let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                h = hh * 0.1;
                stats.rejected += 1;
                continue;
            }
            if err <= 1.0 {
                t = if last { target } else { t + hh };
                std::mem::swap(&mut y, &mut y5);
                k.swap(0, 6);
                stats.accepted += 1;
            } else {
                stats.rejected += 1;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            // A step shortened to land on the grid should not shrink `h`.
            h = if last && err <= 1.0 { h.max(hh * factor) } else { hh * factor };
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let ts: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let (ys, _) = dopri5(|_, y, dy| dy[0] = y[0], 0.0, &[1.0], &ts, OdeOptions::default()).unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            assert!((y[0] / t.exp() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn harmonic_oscillator() {
        let ts = [std::f64::consts::PI * 2.0];
        let (ys, _) = dopri5(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            &ts,
            OdeOptions::default(),
        )
        .unwrap();
        assert!((ys[0][0] - 1.0).abs() < 1e-9 && ys[0][1].abs() < 1e-9);
    }

    #[test]
    fn finite_time_blow_up_is_reported() {
        // y' = y^2 explodes at t = 1.
        let r = dopri5(|_, y, dy| dy[0] = y[0] * y[0], 0.0, &[1.0], &[2.0], OdeOptions::default());
        assert!(matches!(r, Err(Error::Stiffness { .. })));
    }

    #[test]
    fn fixed_step_order_on_riccati() {
        // f' = f² / r² in t = log r with f(1) = 1/2 has f = r / (1 + r).
        let err = |n: usize| {
            let t1 = 3.0;
            let ts: Vec<f64> = (1..=n).map(|i| t1 * i as f64 / n as f64).collect();
            let loose = OdeOptions {
                rtol: 1e12,
                atol: 1e12,
                h0: Some(t1 / n as f64),
                max_steps: 1_000_000,
            };
            let (ys, _) = dopri5(|t, y, dy| dy[0] = y[0] * y[0] * (-t).exp(), 0.0, &[0.5], &ts, loose).unwrap();
            let r = t1.exp();
            (ys[n - 1][0] - r / (1.0 + r)).abs()
        };
        let ratio = err(20) / err(40);
        assert!(ratio > 24.0 && ratio < 40.0, "ratio {ratio}");
    }
}
