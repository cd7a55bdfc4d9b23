use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::flow::BallSum;
use crate::error::{Error, Result};
use crate::model::lattice::ball_points;
use crate::model::norm::{add, neg, sub, within, Point, ORIGIN};
use crate::sampler::{BoxConfiguration, ClusterSample, LatticeBox};
use crate::stats::{BatchAccumulator, Estimate};

pub const MIN_EDIAN_CONFIGS: usize = 100;
/// Largest box for which pair-level plug-in estimators are formed.
pub const MAX_PLUGIN_VERTICES: usize = 4096;

/// Level of the edian quantile, `1 - e^{-1}`.
pub fn edian_level() -> f64 {
    1.0 - (-1.0f64).exp()
}

/// Box points within distance `r` of the origin.
pub fn measurement_mask(lbox: &LatticeBox, r: f64) -> Vec<bool> {
    lbox.points.iter().map(|x| within(lbox.norm.lattice_norm(x), r)).collect()
}

/// `max_x |K_x ∩ W|` per configuration for the window selected by `mask`.
pub fn max_intersections(configs: &[BoxConfiguration], mask: &[bool]) -> Vec<u64> {
    configs.iter().map(|c| c.max_intersection(mask)).collect()
}

/// Empirical `(1 - e^{-1})`-quantile of the maximal intersections: the
/// smallest `n` with `P̂(max ≤ n) ≥ 1 - e^{-1}`.
pub fn estimate_edian(max_intersections: &[u64]) -> Result<u64> {
    if max_intersections.len() < MIN_EDIAN_CONFIGS {
        return Err(Error::domain(format!(
            "edian needs at least {MIN_EDIAN_CONFIGS} configurations, got {}",
            max_intersections.len()
        )));
    }
    let mut v = max_intersections.to_vec();
    v.sort_unstable();
    let k = (edian_level() * v.len() as f64).ceil() as usize;
    Ok(v[k.clamp(1, v.len()) - 1])
}

/// The same quantile of an exact law `P(max = m)`, `m = 0..`.
pub fn edian_from_law(law: &[f64]) -> u64 {
    let mut c = 0.0;
    for (m, p) in law.iter().enumerate() {
        c += p;
        if c >= edian_level() {
            return m as u64;
        }
    }
    law.len().saturating_sub(1) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TightnessPoint {
    pub lambda: f64,
    /// `P̂(max ≥ λ M)`.
    pub prob: Estimate,
    /// `e^{1 - λ/9}`.
    pub bound: f64,
    /// `e^{-λ/9}`, for comparison.
    pub bound_tight: f64,
}

/// Exceedance probabilities of the maximal intersection over `λ M`.
pub fn tightness_profile(max_intersections: &[u64], m: u64, lambdas: &[f64]) -> Result<Vec<TightnessPoint>> {
    let n = max_intersections.len();
    if n < 2 {
        return Err(Error::Estimation("tightness needs at least two configurations".into()));
    }
    Ok(lambdas
        .iter()
        .map(|&lambda| {
            let thr = lambda * m as f64;
            let hits = max_intersections.iter().filter(|&&v| v as f64 >= thr).count() as f64;
            let p = hits / n as f64;
            TightnessPoint {
                lambda,
                prob: Estimate {
                    mean: p,
                    stderr: (p * (1.0 - p) / n as f64).sqrt(),
                },
                bound: (1.0 - lambda / 9.0).exp(),
                bound_tight: (-lambda / 9.0).exp(),
            }
        })
        .collect())
}

/// Two-point function of a box, `conn(i, j) = P(i ↔ j)` between box indices.
pub trait Connectivity {
    fn conn(&self, i: usize, j: usize) -> f64;
}

/// Empirical pair-connection frequencies over sampled configurations.
pub struct EmpiricalConnectivity<'a>(pub &'a [BoxConfiguration]);

impl Connectivity for EmpiricalConnectivity<'_> {
    fn conn(&self, i: usize, j: usize) -> f64 {
        let hits = self.0.iter().filter(|c| c.labels[i] == c.labels[j]).count();
        hits as f64 / self.0.len() as f64
    }
}

impl<F: Fn(usize, usize) -> f64> Connectivity for F {
    fn conn(&self, i: usize, j: usize) -> f64 {
        self(i, j)
    }
}

/// Translation-averaged ball sums: the mean over box points `y` of
/// `Σ_{x ∈ box, ‖x - y‖ ≤ ρ} P(y ↔ x)`.
pub fn two_point_ball_sums(conn: &impl Connectivity, lbox: &LatticeBox, rhos: &[f64]) -> Vec<BallSum> {
    let n = lbox.len();
    rhos.iter()
        .map(|&rho| {
            let offsets = if rho >= 0.0 { ball_points(&lbox.norm, rho) } else { Vec::new() };
            let mut total = 0.0;
            for (i, y) in lbox.points.iter().enumerate() {
                for v in &offsets {
                    if let Some(j) = lbox.index_of(&add(y, v)) {
                        total += conn.conn(i, j);
                    }
                }
            }
            BallSum {
                rho,
                value: Estimate::exact(total / n as f64),
            }
        })
        .collect()
}

/// Ball sums estimated from box configurations.
pub fn estimate_two_point_profile(configs: &[BoxConfiguration], lbox: &LatticeBox, rhos: &[f64]) -> Result<Vec<BallSum>> {
    if configs.is_empty() {
        return Err(Error::Estimation("no box configurations".into()));
    }
    Ok(two_point_ball_sums(&EmpiricalConnectivity(configs), lbox, rhos))
}

/// Ball sums `E|K ∩ B_ρ|` from cluster samples, with batch-means errors.
/// Truncated samples are excluded.
pub fn ball_sums_from_clusters(samples: &[ClusterSample], radii: &[f64]) -> Result<Vec<BallSum>> {
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .filter(|s| !s.truncated)
        .map(|s| s.ball_counts.iter().map(|&c| c as f64).collect())
        .collect();
    if rows.iter().any(|r| r.len() != radii.len()) {
        return Err(Error::domain("ball counts do not match the radius grid"));
    }
    let acc = BatchAccumulator::from_rows(&rows, radii.len(), super::moments::DEFAULT_BATCHES);
    radii
        .iter()
        .enumerate()
        .map(|(k, &rho)| Ok(BallSum { rho, value: acc.mean(k)? }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleEstimate {
    /// `∇̂(0, 0)`.
    pub at_origin: f64,
    /// `sup_{x≠0} ∇̂(0, x)` over box displacements.
    pub sup_off_origin: f64,
    /// `(x, ∇̂(0, x))` for every box displacement `x`.
    pub values: Vec<(Point, f64)>,
}

fn is_canonical(v: &Point) -> bool {
    *v >= neg(v)
}

/// Plug-in triangle diagram `∇̂(0, x) = Σ_{y,z} τ̂(y) τ̂(z - y) τ̂(x - z)` with
/// the translation-averaged two-point function
/// `τ̂(v) = mean_{y, y+v ∈ box} P(y ↔ y + v)`, computed by direct sums.
/// Both `τ̂` and `∇̂` are evaluated on canonical representatives of `±v`,
/// so `∇̂(0, x) = ∇̂(0, -x)` exactly.
pub fn triangle_from(conn: &impl Connectivity, lbox: &LatticeBox) -> Result<TriangleEstimate> {
    let n = lbox.len();
    if n > MAX_PLUGIN_VERTICES {
        return Err(Error::Size {
            what: "plug-in box vertices",
            got: n,
            limit: MAX_PLUGIN_VERTICES,
        });
    }
    let mut acc: HashMap<Point, (f64, u64)> = HashMap::new();
    for i in 0..n {
        for j in 0..n {
            let v = sub(&lbox.points[j], &lbox.points[i]);
            if is_canonical(&v) {
                let e = acc.entry(v).or_insert((0.0, 0));
                e.0 += conn.conn(i, j);
                e.1 += 1;
            }
        }
    }
    let mut keys: Vec<Point> = acc.keys().copied().collect();
    keys.sort_unstable();
    let mut tau: HashMap<Point, f64> = HashMap::new();
    for k in &keys {
        let (s, c) = acc[k];
        tau.insert(*k, s / c as f64);
        tau.insert(neg(k), s / c as f64);
    }
    let mut support: Vec<Point> = tau.keys().copied().collect();
    support.sort_unstable();
    let get = |v: &Point| tau.get(v).copied().unwrap_or(0.0);
    // τ̂ * τ̂ on the sum set.
    let mut t2: HashMap<Point, f64> = HashMap::new();
    for y in &support {
        for w in &support {
            *t2.entry(add(y, w)).or_insert(0.0) += get(y) * get(w);
        }
    }
    let mut t2_keys: Vec<Point> = t2.keys().copied().collect();
    t2_keys.sort_unstable();
    let mut values = Vec::with_capacity(support.len());
    let mut canonical_value: HashMap<Point, f64> = HashMap::new();
    for x in support.iter().filter(|x| is_canonical(x)) {
        let v: f64 = t2_keys.iter().map(|z| t2[z] * get(&sub(x, z))).sum();
        canonical_value.insert(*x, v);
    }
    for x in &support {
        let c = if is_canonical(x) { *x } else { neg(x) };
        values.push((*x, canonical_value[&c]));
    }
    let at_origin = canonical_value.get(&ORIGIN).copied().unwrap_or(0.0);
    let sup_off_origin = values.iter().filter(|(x, _)| *x != ORIGIN).map(|(_, v)| *v).fold(0.0, f64::max);
    Ok(TriangleEstimate {
        at_origin,
        sup_off_origin,
        values,
    })
}

pub fn estimate_triangle(configs: &[BoxConfiguration], lbox: &LatticeBox) -> Result<TriangleEstimate> {
    if configs.is_empty() {
        return Err(Error::Estimation("no box configurations".into()));
    }
    triangle_from(&EmpiricalConnectivity(configs), lbox)
}
