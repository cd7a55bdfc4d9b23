use serde::{Deserialize, Serialize};

use super::levy::ball_moment;
use crate::error::{Error, Result};
use crate::model::NormSpec;
use crate::special::{binomial, factorial, multinomial};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Branch {
    /// `α < 2`: jump law driven by the ball moments.
    Stable { alpha: f64 },
    /// `α ≥ 2`: Gaussian mixture with `<u,Σu> = variance`.
    Laplace { variance: f64 },
}

/// `A[p] = A_{2p}(u)`, the `2p`-th moment of the displacement law along `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub u: Vec<f64>,
    pub p_max: usize,
    pub branch: Branch,
    pub a: Vec<f64>,
    /// The same table from the generating function, for cross-checking.
    pub a_egf: Vec<f64>,
    pub max_rel_discrepancy: f64,
}

/// Inverts `Σ F_p θ^{2p} = (1 - Σ_{k≥1} g_k θ^{2k})^{-1}` and returns
/// `A_{2p} = (2p)! F_p`.
pub fn coefficients_from_egf(g: &[f64], p_max: usize) -> Vec<f64> {
    let mut f = vec![0.0; p_max + 1];
    f[0] = 1.0;
    for p in 1..=p_max {
        f[p] = (1..=p).filter(|k| *k < g.len()).map(|k| g[k] * f[p - k]).sum();
    }
    f.iter().enumerate().map(|(p, v)| v * factorial(2 * p as u32)).collect()
}

/// Stable-branch recurrence
/// `A_{2p} = α/(2p-α) Σ' (2p)!/((2a)!(2b)!(2c)!) A_{2a} A_{2b} m_c`
/// over `a+b+c = p` without `(p,0,0)` and `(0,p,0)`.
pub fn stable_recurrence(alpha: f64, m: &[f64], p_max: usize) -> Result<Vec<f64>> {
    if m.len() <= p_max {
        return Err(Error::domain("need ball moments of orders 0..=p_max"));
    }
    let mut a = vec![1.0; p_max + 1];
    for p in 1..=p_max {
        let denom = 2.0 * p as f64 - alpha;
        if denom == 0.0 {
            return Err(Error::Pole(format!("2p = α at p = {p}")));
        }
        let mut s = 0.0;
        for x in 0..=p {
            for y in 0..=p - x {
                if x == p || y == p {
                    continue;
                }
                let z = p - x - y;
                s += multinomial(&[2 * x as u32, 2 * y as u32, 2 * z as u32]) * a[x] * a[y] * m[z];
            }
        }
        a[p] = alpha / denom * s;
    }
    Ok(a)
}

/// Laplace-branch recurrence `A_{2p} = (1/(p-1)) Σ_{a=1}^{p-1} C(2p,2a) A_{2a} A_{2p-2a}`
/// in unit variance.
pub fn laplace_recurrence(p_max: usize) -> Vec<f64> {
    let mut a = vec![1.0; p_max + 1];
    for p in 2..=p_max {
        let s: f64 = (1..p).map(|q| binomial(2 * p as u32, 2 * q as u32) * a[q] * a[p - q]).sum();
        a[p] = s / (p - 1) as f64;
    }
    a
}

pub fn displacement_coefficients(branch: Branch, norm: &NormSpec, u: &[f64], p_max: usize) -> Result<CoefficientTable> {
    let (a, a_egf) = match branch {
        Branch::Stable { alpha } => {
            if !(alpha > 0.0 && alpha < 2.0) {
                return Err(Error::domain("stable branch needs 0 < α < 2"));
            }
            let m: Vec<f64> = (0..=p_max as u32).map(|c| ball_moment(norm, c, u)).collect::<Result<_>>()?;
            let a = stable_recurrence(alpha, &m, p_max)?;
            let g: Vec<f64> = (0..=p_max)
                .map(|p| {
                    if p == 0 {
                        0.0
                    } else {
                        alpha * m[p] / (factorial(2 * p as u32) * (2.0 * p as f64 - alpha))
                    }
                })
                .collect();
            (a, coefficients_from_egf(&g, p_max))
        }
        Branch::Laplace { variance } => {
            if !(variance > 0.0) {
                return Err(Error::domain("variance must be positive"));
            }
            let scale = |v: Vec<f64>| v.iter().enumerate().map(|(p, x)| x * variance.powi(p as i32)).collect::<Vec<_>>();
            (scale(laplace_recurrence(p_max)), scale(coefficients_from_egf(&[0.0, 0.5], p_max)))
        }
    };
    let max_rel_discrepancy = a.iter().zip(&a_egf).map(|(x, y)| (x / y - 1.0).abs()).fold(0.0, f64::max);
    Ok(CoefficientTable {
        u: u.to_vec(),
        p_max,
        branch,
        a,
        a_egf,
        max_rel_discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplace_values() {
        let t = displacement_coefficients(Branch::Laplace { variance: 1.0 }, &NormSpec::scaled_sup(1), &[1.0], 6).unwrap();
        assert_eq!(t.a[0], 1.0);
        assert_eq!(t.a[2], 6.0);
        assert_eq!(t.a[3], 90.0);
        for p in 0..=6 {
            let want = factorial(2 * p as u32) / 2f64.powi(p as i32);
            assert!((t.a[p] / want - 1.0).abs() < 1e-14);
        }
        assert!(t.max_rel_discrepancy < 1e-12);
        let raw = displacement_coefficients(Branch::Laplace { variance: 0.3 }, &NormSpec::scaled_sup(1), &[1.0], 3).unwrap();
        assert!((raw.a[2] - 6.0 * 0.09).abs() < 1e-14);
    }

    #[test]
    fn stable_values_and_duality() {
        for alpha in [0.25, 1.0, 1.5, 1.9] {
            for norm in [NormSpec::scaled_sup(1), NormSpec::scaled_euclidean(3), NormSpec::scaled_sup(2)] {
                let mut u = vec![0.0; norm.d];
                u[0] = 1.0;
                let t = displacement_coefficients(Branch::Stable { alpha }, &norm, &u, 6).unwrap();
                assert_eq!(t.a[0], 1.0);
                assert!(t.a.iter().all(|v| *v > 0.0));
                assert!(t.max_rel_discrepancy < 1e-9, "α={alpha}: {}", t.max_rel_discrepancy);
            }
            let t = displacement_coefficients(Branch::Stable { alpha }, &NormSpec::scaled_sup(1), &[1.0], 2).unwrap();
            assert!((t.a[1] / (alpha / (2.0 - alpha) / 12.0) - 1.0).abs() < 1e-10);
            assert!((t.a_egf[1] / t.a[1] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn egf_inversion_geometric() {
        // 1/(1 - θ²) has F_p = 1.
        let a = coefficients_from_egf(&[0.0, 1.0], 4);
        assert_eq!(a, vec![1.0, 2.0, 24.0, 720.0, 40320.0]);
    }
}
