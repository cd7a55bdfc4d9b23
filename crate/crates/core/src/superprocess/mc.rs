use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::law::DisplacementLaw;
use super::levy::{sample_uniform_ball, Vector};
use crate::diagrams::{enumerate_trees, TreeDiagram};
use crate::error::{Error, Result};
use crate::model::NormSpec;
use crate::rng::{stream_id, stream_rng, Stage, StreamRng};
use crate::stats::{BatchAccumulator, Estimate};

pub const MAX_DIAGRAM_N: usize = 6;
pub const MAX_MC_DEGREE: u32 = 8;
const BATCH: usize = 4096;

/// Test function applied to a leaf position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Integrand {
    One,
    /// `<x, u>^power`.
    Projection { u: Vec<f64>, power: u32 },
    /// `Π x_i^{exps_i}`.
    Monomial { exps: Vec<u32> },
    /// `1(‖x‖₂ ≤ radius)`.
    BallIndicator { radius: f64 },
}

impl Integrand {
    pub fn projection(u: &[f64], power: u32) -> Self {
        Integrand::Projection { u: u.to_vec(), power }
    }

    /// Homogeneity degree of polynomial integrands.
    pub fn degree(&self) -> Option<u32> {
        match self {
            Integrand::One => Some(0),
            Integrand::Projection { power, .. } => Some(*power),
            Integrand::Monomial { exps } => Some(exps.iter().sum()),
            Integrand::BallIndicator { .. } => None,
        }
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        match self {
            Integrand::One => 1.0,
            Integrand::Projection { u, power } => {
                let p: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum();
                p.powi(*power as i32)
            }
            Integrand::Monomial { exps } => exps.iter().zip(x).map(|(&e, v)| v.powi(e as i32)).product(),
            Integrand::BallIndicator { radius } => {
                let n2: f64 = x.iter().map(|v| v * v).sum();
                if n2 <= radius * radius {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `x ↦ φ(c x)`, i.e. the integrand seen at scale `c`.
    fn eval_scaled(&self, x: &Vector, c: f64) -> f64 {
        let mut y = *x;
        for v in y.iter_mut() {
            *v *= c;
        }
        self.eval(&y)
    }
}

/// Runs `per_sample` over `n` samples in fixed batches, one random stream per
/// batch, in parallel on the current rayon pool.
pub fn run_batches<F>(seed: u64, stage: Stage, grid: u32, n: usize, width: usize, per_sample: F) -> BatchAccumulator
where
    F: Fn(&mut StreamRng, &mut [f64]) + Sync,
{
    let n_batches = n.div_ceil(BATCH).max(2);
    let rows: Vec<(u64, Vec<f64>)> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let lo = b * n / n_batches;
            let hi = (b + 1) * n / n_batches;
            let mut rng = stream_rng(seed, stream_id(stage, grid, b as u64));
            let mut sums = vec![0.0; width];
            let mut row = vec![0.0; width];
            for _ in lo..hi {
                row.iter_mut().for_each(|v| *v = 0.0);
                per_sample(&mut rng, &mut row);
                for (s, v) in sums.iter_mut().zip(&row) {
                    *s += v;
                }
            }
            ((hi - lo) as u64, sums)
        })
        .collect();
    let mut acc = BatchAccumulator::new(width);
    for (c, s) in rows {
        acc.push_batch(c, s);
    }
    acc
}

fn check_diagram(n: usize, integrands: &[Integrand]) -> Result<()> {
    if n == 0 || n > MAX_DIAGRAM_N {
        return Err(Error::Size {
            what: "diagram leaves",
            got: n,
            limit: MAX_DIAGRAM_N,
        });
    }
    if integrands.len() != n {
        return Err(Error::domain("one integrand per non-root leaf"));
    }
    let deg: u32 = integrands.iter().map(|f| f.degree().unwrap_or(0)).sum();
    if deg > MAX_MC_DEGREE {
        return Err(Error::Size {
            what: "total monomial degree",
            got: deg as usize,
            limit: MAX_MC_DEGREE as usize,
        });
    }
    Ok(())
}

/// Rooted edge lists of every tree: `(child, parent)` in breadth-first order.
fn tree_schedules(trees: &[TreeDiagram]) -> Vec<Vec<(usize, usize)>> {
    trees
        .iter()
        .map(|t| {
            let (order, parent) = t.rooted();
            order.iter().skip(1).map(|&v| (v, parent[v].unwrap())).collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramEstimate {
    pub n: usize,
    pub n_trees: usize,
    pub n_samples: usize,
    pub value: Estimate,
    pub per_tree: Vec<Estimate>,
}

/// `Σ_T E Π_i φ_i(X_i^T)` where `X_i^T` is leaf `i` relative to leaf 0 when
/// the `2n-1` edges of `T` carry independent `ν_disp` displacements.
pub fn k_moment_mc(n: usize, integrands: &[Integrand], law: &DisplacementLaw, n_samples: usize, seed: u64) -> Result<DiagramEstimate> {
    check_diagram(n, integrands)?;
    let trees = enumerate_trees(n)?;
    let sched = tree_schedules(&trees);
    let nt = trees.len();
    let acc = run_batches(seed, Stage::Diagram, n as u32, n_samples, nt + 1, |rng, row| {
        let mut pos = vec![[0.0; 4]; 2 * n];
        for (k, edges) in sched.iter().enumerate() {
            for &(v, p) in edges {
                let x = law.sample(rng);
                for i in 0..4 {
                    pos[v][i] = pos[p][i] + x[i];
                }
            }
            let val: f64 = (1..=n).map(|i| integrands[i - 1].eval(&pos[i])).product();
            row[k + 1] = val;
            row[0] += val;
        }
    });
    Ok(DiagramEstimate {
        n,
        n_trees: nt,
        n_samples,
        value: acc.mean(0)?,
        per_tree: (1..=nt).map(|k| acc.mean(k)).collect::<Result<_>>()?,
    })
}

pub fn canonical_prefactor(n: usize) -> f64 {
    4f64.powi(n as i32 - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalOptions {
    pub n_samples: usize,
    pub seed: u64,
    /// Allowed relative drift between the two largest scales on top of the
    /// Monte Carlo error.
    pub plateau_rel_tol: f64,
    /// Tail exponent of the edge-time proposal `(γ-1)(1+τ)^{-γ}`; defaults to
    /// the middle of the finite-variance window.
    pub proposal_exponent: Option<f64>,
}

impl Default for CanonicalOptions {
    fn default() -> Self {
        Self {
            n_samples: 200_000,
            seed: 0,
            plateau_rel_tol: 0.05,
            proposal_exponent: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalEstimate {
    pub n: usize,
    pub s: Vec<f64>,
    pub values: Vec<Estimate>,
    pub plateau: Estimate,
    /// `(v_top - v_prev) / v_top` across the top of the grid.
    pub drift: f64,
}

/// Rescaled `κ_s`-edge diagram
/// `2^{2n-2} s^{(2n-1)m} Σ_T E Π φ_i(s X_i^T)`, `m = min{2, α}`, at every
/// `s` of the grid, and its plateau.
///
/// Each edge time `t = τ / s^m` is drawn with `τ` from a heavy-tailed
/// proposal and weighted by `e^{-τ/s^m} / q(τ)`, which is exact at every `s`
/// and keeps the cost independent of `s`.
pub fn canonical_moment_extrapolated(
    n: usize,
    integrands: &[Integrand],
    law: &DisplacementLaw,
    s_grid: &[f64],
    opts: CanonicalOptions,
) -> Result<CanonicalEstimate> {
    check_diagram(n, integrands)?;
    let m = law.scaling_exponent();
    let d = law.d() as f64;
    if s_grid.len() < 2 || s_grid.windows(2).any(|w| !(w[1] > w[0])) || s_grid[0] <= 0.0 {
        return Err(Error::domain("scale grid must be increasing, positive, with at least two points"));
    }
    // A single isotropic Gaussian edge ending in a ball indicator is averaged
    // over the position analytically; the weight then only needs
    // `∫ f²/q < ∞` instead of `∫ f/q < ∞`.
    let conditional = match (n, &integrands[0], law.isotropic_variance()) {
        (1, Integrand::BallIndicator { radius }, Some(v)) => Some((*radius, v, ChiSquared::new(d).map_err(|e| Error::domain(e.to_string()))?)),
        _ => None,
    };
    // Edge-time integrand decays like τ^{-d/m}; the proposal tail γ must
    // satisfy 1 < γ < d/m - 1, or 1 < γ < 2d/m - 1 with the conditional
    // average.
    let upper = if conditional.is_some() { 2.0 * d / m - 1.0 } else { d / m - 1.0 };
    if !(upper > 1.0) {
        return Err(Error::domain(format!(
            "the rescaled diagram has infinite variance here (d = {d}, min{{2, α}} = {m}); needs d > {}",
            if conditional.is_some() { m } else { 2.0 * m }
        )));
    }
    let gamma = opts.proposal_exponent.unwrap_or(0.5 * (1.0 + upper));
    if !(gamma > 1.0 && gamma < upper) {
        return Err(Error::domain(format!("proposal exponent must lie in (1, {upper})")));
    }
    let sched = tree_schedules(&enumerate_trees(n)?);
    let pref = canonical_prefactor(n);
    let mut values = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let sm = s.powf(m);
        // Same streams at every scale.
        let acc = run_batches(opts.seed, Stage::Canonical, n as u32, opts.n_samples, 1, |rng, row| {
            let mut pos = vec![[0.0; 4]; 2 * n];
            for edges in &sched {
                let mut w = 1.0;
                let mut last_t = 0.0;
                for &(v, p) in edges {
                    let u: f64 = 1.0 - rng.random::<f64>();
                    let tau = u.powf(-1.0 / (gamma - 1.0)) - 1.0;
                    if tau > 50.0 * sm {
                        // Weight below e^{-50}.
                        w = 0.0;
                        break;
                    }
                    w *= (-tau / sm).exp() / ((gamma - 1.0) * (1.0 + tau).powf(-gamma));
                    last_t = tau / sm;
                    if conditional.is_none() {
                        let x = law.sample_at(last_t, s, rng);
                        for i in 0..4 {
                            pos[v][i] = pos[p][i] + x[i];
                        }
                    }
                }
                if w == 0.0 {
                    continue;
                }
                let val: f64 = match &conditional {
                    Some((radius, var, chi)) => chi.cdf(radius * radius / (s * s * last_t * var)),
                    None => (1..=n).map(|i| integrands[i - 1].eval(&pos[i])).product(),
                };
                row[0] += pref * w * val;
            }
        });
        values.push(acc.mean(0)?);
    }
    let k = values.len();
    let (top, prev) = (values[k - 1], values[k - 2]);
    let drift = (top.mean - prev.mean) / top.mean;
    let allowed = opts.plateau_rel_tol * top.mean.abs() + 3.0 * (top.stderr.powi(2) + prev.stderr.powi(2)).sqrt();
    if !drift.is_finite() || (top.mean - prev.mean).abs() > allowed {
        return Err(Error::Extrapolation(format!(
            "no plateau: {:.6} at s = {} vs {:.6} at s = {}",
            top.mean,
            s_grid[k - 1],
            prev.mean,
            s_grid[k - 2]
        )));
    }
    Ok(CanonicalEstimate {
        n,
        s: s_grid.to_vec(),
        values,
        plateau: top,
        drift,
    })
}

/// Direct estimate of `2^{2n-2} s^{(2n-1)m} Σ_T E Π φ_i(s X_i^T)` without the
/// time change; usable only at small `s`.
pub fn canonical_moment_direct(n: usize, integrands: &[Integrand], law: &DisplacementLaw, s: f64, n_samples: usize, seed: u64) -> Result<Estimate> {
    let scaled: Vec<ScaledIntegrand> = integrands.iter().map(|f| ScaledIntegrand(f.clone(), s)).collect();
    check_diagram(n, integrands)?;
    let sched = tree_schedules(&enumerate_trees(n)?);
    let acc = run_batches(seed, Stage::Diagram, 100 + n as u32, n_samples, 1, |rng, row| {
        let mut pos = vec![[0.0; 4]; 2 * n];
        for edges in &sched {
            for &(v, p) in edges {
                let x = law.sample(rng);
                for i in 0..4 {
                    pos[v][i] = pos[p][i] + x[i];
                }
            }
            row[0] += (1..=n).map(|i| scaled[i - 1].eval(&pos[i])).product::<f64>();
        }
    });
    let f = canonical_prefactor(n) * s.powf((2 * n - 1) as f64 * law.scaling_exponent());
    let e = acc.mean(0)?;
    Ok(Estimate {
        mean: f * e.mean,
        stderr: f * e.stderr,
    })
}

struct ScaledIntegrand(Integrand, f64);

impl ScaledIntegrand {
    fn eval(&self, x: &Vector) -> f64 {
        self.0.eval_scaled(x, self.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub n: usize,
    pub degree: u32,
    /// `(deg P + m n) E P(S_n)`.
    pub lhs: Estimate,
    /// `m n E P(S_{n+1} [+ U])`.
    pub rhs: Estimate,
    /// `lhs / rhs - 1`.
    pub residual: Estimate,
}

/// Scale-invariance identity for sums `S_n` of `n` i.i.d. `ν_disp` draws:
/// `(deg P + 2n) E P(S_n) = 2n E P(S_{n+1})` for the Laplace branch and
/// `(deg P + αn) E P(S_n) = αn E P(S_{n+1} + U)`, `U` uniform on the unit
/// ball, for the stable branch.
pub fn recurrence_residual(n: usize, p: &Integrand, law: &DisplacementLaw, ball: &NormSpec, n_samples: usize, seed: u64) -> Result<ResidualReport> {
    if n == 0 || n > 3 {
        return Err(Error::Size {
            what: "recurrence order",
            got: n,
            limit: 3,
        });
    }
    let Some(deg) = p.degree() else {
        return Err(Error::domain("recurrence needs a homogeneous polynomial"));
    };
    if deg > 4 {
        return Err(Error::Size {
            what: "recurrence polynomial degree",
            got: deg as usize,
            limit: 4,
        });
    }
    let m = law.scaling_exponent();
    let with_ball = m < 2.0;
    if with_ball && ball.d != law.d() {
        return Err(Error::domain("ball dimension differs from the law"));
    }
    // S_{n+1} reuses S_n, so the two sides are positively correlated and the
    // ratio is sharper than with independent samples.
    let acc = run_batches(seed, Stage::Recurrence, n as u32, n_samples, 2, |rng, row| {
        let mut s = [0.0; 4];
        for _ in 0..n {
            let x = law.sample(rng);
            for i in 0..4 {
                s[i] += x[i];
            }
        }
        row[0] = p.eval(&s);
        let x = law.sample(rng);
        for i in 0..4 {
            s[i] += x[i];
        }
        if with_ball {
            let y = sample_uniform_ball(ball, rng);
            for i in 0..4 {
                s[i] += y[i];
            }
        }
        row[1] = p.eval(&s);
    });
    let cl = deg as f64 + m * n as f64;
    let cr = m * n as f64;
    let l = acc.mean(0)?;
    let r = acc.mean(1)?;
    let ratio = acc.ratio(0, 1)?;
    Ok(ResidualReport {
        n,
        degree: deg,
        lhs: Estimate {
            mean: cl * l.mean,
            stderr: cl * l.stderr,
        },
        rhs: Estimate {
            mean: cr * r.mean,
            stderr: cr * r.stderr,
        },
        residual: Estimate {
            mean: cl / cr * ratio.mean - 1.0,
            stderr: cl / cr * ratio.stderr,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_diagrams() {
        let law = DisplacementLaw::isotropic_laplace(2).unwrap();
        let e = k_moment_mc(1, &[Integrand::One], &law, 10_000, 1).unwrap();
        assert_eq!(e.value.mean, 1.0);
        let e = k_moment_mc(2, &[Integrand::One, Integrand::One], &law, 10_000, 1).unwrap();
        assert_eq!((e.n_trees, e.value.mean), (1, 1.0));
        let e = k_moment_mc(3, &[Integrand::One, Integrand::One, Integrand::One], &law, 5_000, 1).unwrap();
        assert_eq!((e.n_trees, e.value.mean), (3, 3.0));
    }

    #[test]
    fn single_edge_second_moment() {
        let norm = NormSpec::scaled_sup(1);
        let law = DisplacementLaw::stable(norm, 1.2, 0.05).unwrap();
        let table = law.coefficient_table(&[1.0], 1).unwrap();
        let e = k_moment_mc(1, &[Integrand::projection(&[1.0], 2)], &law, 200_000, 2).unwrap();
        assert!(e.value.z(table.a[1]).abs() < 3.0, "{:?} vs {}", e.value, table.a[1]);
    }

    #[test]
    fn degree_cap() {
        let law = DisplacementLaw::isotropic_laplace(1).unwrap();
        let f = Integrand::projection(&[1.0], 5);
        assert!(matches!(k_moment_mc(2, &[f.clone(), f], &law, 10, 0), Err(Error::Size { .. })));
        assert!(matches!(k_moment_mc(7, &vec![Integrand::One; 7], &law, 10, 0), Err(Error::Size { .. })));
    }

    #[test]
    fn deterministic_across_pools() {
        let law = DisplacementLaw::isotropic_laplace(2).unwrap();
        let f = [Integrand::projection(&[1.0, 0.0], 2), Integrand::projection(&[0.0, 1.0], 2)];
        let a = crate::sampler::with_workers(1, || k_moment_mc(2, &f, &law, 20_000, 9).unwrap());
        let b = crate::sampler::with_workers(3, || k_moment_mc(2, &f, &law, 20_000, 9).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn green_function_oracle_brownian() {
        // d = 3, Σ = I/3: G(x) = 3 / (2π|x|), ∫_{|x|≤R} G = 3R².
        let law = DisplacementLaw::isotropic_laplace(3).unwrap();
        let opts = CanonicalOptions {
            n_samples: 200_000,
            seed: 4,
            ..Default::default()
        };
        let r = 1.0;
        let est = canonical_moment_extrapolated(1, &[Integrand::BallIndicator { radius: r }], &law, &[30.0, 100.0, 300.0], opts).unwrap();
        let want = 3.0 * r * r;
        assert!((est.plateau.mean / want - 1.0).abs() < 0.05, "{:?}", est);
    }

    #[test]
    fn time_change_matches_direct_sampling() {
        let law = DisplacementLaw::stable(NormSpec::scaled_euclidean(4), 0.8, 0.05).unwrap();
        let f = [Integrand::BallIndicator { radius: 1.0 }, Integrand::BallIndicator { radius: 1.5 }];
        let s = 1.5;
        let direct = canonical_moment_direct(2, &f, &law, s, 400_000, 5).unwrap();
        let opts = CanonicalOptions {
            n_samples: 400_000,
            seed: 6,
            plateau_rel_tol: 10.0,
            ..Default::default()
        };
        let tc = canonical_moment_extrapolated(2, &f, &law, &[1.0, s], opts).unwrap();
        let diff = tc.plateau.mean - direct.mean;
        let se = (tc.plateau.stderr.powi(2) + direct.stderr.powi(2)).sqrt();
        assert!(diff.abs() < 4.0 * se, "{:?} vs {:?}", tc.plateau, direct);
        assert_eq!(canonical_prefactor(2), 4.0);
    }

    #[test]
    fn recurrence_constant_polynomial_is_exact() {
        let law = DisplacementLaw::stable(NormSpec::scaled_sup(1), 1.5, 0.05).unwrap();
        let rep = recurrence_residual(2, &Integrand::One, &law, &NormSpec::scaled_sup(1), 10_000, 3).unwrap();
        assert_eq!(rep.residual.mean, 0.0);
    }

    #[test]
    fn recurrence_laplace_quadratic_and_quartic() {
        let law = DisplacementLaw::isotropic_laplace(1).unwrap();
        let ball = NormSpec::scaled_sup(1);
        for k in [2, 4] {
            let rep = recurrence_residual(1, &Integrand::projection(&[1.0], k), &law, &ball, 400_000, 8).unwrap();
            assert!(rep.residual.mean.abs() < 3.0 * rep.residual.stderr, "{rep:?}");
        }
    }

    #[test]
    fn stable_dilation_exponent() {
        let alpha = 1.0;
        let law = DisplacementLaw::stable(NormSpec::scaled_euclidean(3), alpha, 0.1).unwrap();
        let opts = CanonicalOptions {
            n_samples: 40_000,
            seed: 11,
            ..Default::default()
        };
        let cs = [0.5f64, 1.0, 2.0];
        let mut ys = Vec::new();
        for c in cs {
            let est = canonical_moment_extrapolated(1, &[Integrand::BallIndicator { radius: c }], &law, &[10.0, 30.0], opts).unwrap();
            ys.push(est.plateau.mean.ln());
        }
        let xs: Vec<f64> = cs.iter().map(|c| c.ln()).collect();
        let fit = crate::stats::line_fit(&xs, &ys).unwrap();
        assert!((fit.slope / alpha - 1.0).abs() < 0.05, "slope {}", fit.slope);
    }

    #[test]
    fn recurrence_stable_quadratic() {
        let norm = NormSpec::scaled_sup(1);
        let law = DisplacementLaw::stable(norm, 1.5, 0.05).unwrap();
        let rep = recurrence_residual(2, &Integrand::projection(&[1.0], 2), &law, &norm, 200_000, 12).unwrap();
        assert!(rep.residual.mean.abs() < 3.0 * rep.residual.stderr, "{rep:?}");
    }
}
