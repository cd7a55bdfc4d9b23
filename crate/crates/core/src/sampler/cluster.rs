use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::neighbors::EdgeSampler;
use super::pointmap::PointSet;
use crate::model::norm::{euclid_sq, within, Point, ORIGIN};

pub const DEFAULT_MAX_SIZE: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSample {
    pub size: u64,
    pub truncated: bool,
    /// `Σ_{x∈K} ‖x‖_2^{2p}` for `p = 0..=p_max`.
    pub spatial_sums: Vec<f64>,
    /// `|K ∩ B_ρ|` for each radius of the configured grid.
    pub ball_counts: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vertices: Option<Vec<Point>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOptions {
    pub max_size: u64,
    pub p_max: usize,
    pub ball_radii: Vec<f64>,
    pub keep_vertices: bool,
    /// Restrict the exploration to the lattice ball of this radius.
    pub domain: Option<f64>,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            max_size: DEFAULT_MAX_SIZE,
            p_max: 3,
            ball_radii: Vec::new(),
            keep_vertices: false,
            domain: None,
        }
    }
}

impl ClusterOptions {
    pub fn new(max_size: u64, p_max: usize) -> Self {
        Self {
            max_size,
            p_max,
            ..Self::default()
        }
    }
}

/// Reusable buffers for repeated cluster exploration.
#[derive(Debug, Default)]
pub struct Explorer {
    seen: PointSet,
    queue: VecDeque<Point>,
    buf: Vec<Point>,
}

impl Explorer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Breadth-first exploration of the cluster of the origin.
    ///
    /// A pair is decided by the first of its endpoints to be explored. Pairs
    /// whose other endpoint is already in the cluster never change it, so
    /// they need no record.
    pub fn sample<R: Rng + ?Sized>(&mut self, sampler: &EdgeSampler, opts: &ClusterOptions, rng: &mut R) -> ClusterSample {
        let norm = sampler.params.norm;
        let mut sample = ClusterSample {
            size: 0,
            truncated: false,
            spatial_sums: vec![0.0; opts.p_max + 1],
            ball_counts: vec![0; opts.ball_radii.len()],
            vertices: opts.keep_vertices.then(Vec::new),
        };
        self.seen.clear();
        self.queue.clear();
        let max_size = opts.max_size.max(1);
        let add = |x: Point, sample: &mut ClusterSample, seen: &mut PointSet, queue: &mut VecDeque<Point>| {
            if !seen.insert(x) {
                return;
            }
            sample.size += 1;
            let q = euclid_sq(&x);
            let mut w = 1.0;
            for s in sample.spatial_sums.iter_mut() {
                *s += w;
                w *= q;
            }
            if !opts.ball_radii.is_empty() {
                let nx = norm.lattice_norm(&x);
                for (c, rho) in sample.ball_counts.iter_mut().zip(&opts.ball_radii) {
                    if within(nx, *rho) {
                        *c += 1;
                    }
                }
            }
            if let Some(v) = sample.vertices.as_mut() {
                v.push(x);
            }
            queue.push_back(x);
        };
        add(ORIGIN, &mut sample, &mut self.seen, &mut self.queue);
        while let Some(x) = self.queue.pop_front() {
            if sample.size >= max_size {
                sample.truncated = true;
                break;
            }
            self.buf.clear();
            sampler.sample_fresh(&x, rng, &mut self.buf);
            for &y in &self.buf {
                if let Some(l) = opts.domain {
                    if !within(norm.lattice_norm(&y), l) {
                        continue;
                    }
                }
                add(y, &mut sample, &mut self.seen, &mut self.queue);
                if sample.size >= max_size {
                    break;
                }
            }
        }
        if sample.size >= max_size && !self.queue.is_empty() {
            sample.truncated = true;
        }
        sample
    }
}

pub fn sample_cluster<R: Rng + ?Sized>(sampler: &EdgeSampler, opts: &ClusterOptions, rng: &mut R) -> ClusterSample {
    Explorer::new().sample(sampler, opts, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhostSample {
    pub h: f64,
    pub connected: bool,
    /// Size when the ghost was hit, or the full size otherwise.
    pub cluster_size: u64,
    pub truncated: bool,
}

/// Explores the cluster of the origin, exposing each new vertex to a ghost
/// field of intensity `h`; stops at the first hit.
pub fn sample_ghost_connection<R: Rng + ?Sized>(
    sampler: &EdgeSampler,
    h: f64,
    max_size: u64,
    domain: Option<f64>,
    rng: &mut R,
) -> GhostSample {
    let norm = sampler.params.norm;
    let hit = -(-h).exp_m1();
    let mut seen = PointSet::default();
    let mut queue = VecDeque::new();
    let mut buf = Vec::new();
    seen.insert(ORIGIN);
    queue.push_back(ORIGIN);
    let mut out = GhostSample {
        h,
        connected: false,
        cluster_size: 1,
        truncated: false,
    };
    if rng.random::<f64>() < hit {
        out.connected = true;
        return out;
    }
    while let Some(x) = queue.pop_front() {
        buf.clear();
        sampler.sample_fresh(&x, rng, &mut buf);
        for &y in &buf {
            if domain.is_some_and(|l| !within(norm.lattice_norm(&y), l)) {
                continue;
            }
            if seen.insert(y) {
                out.cluster_size += 1;
                if rng.random::<f64>() < hit {
                    out.connected = true;
                    return out;
                }
                if out.cluster_size >= max_size {
                    out.truncated = true;
                    return out;
                }
                queue.push_back(y);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{KernelSpec, ModelParams, NormSpec};
    use crate::rng::{stream_id, stream_rng, Stage};
    use crate::sampler::boxconf::{box_edge_matrix, LatticeBox};
    use crate::sampler::exact::exact_small_graph_law;
    use crate::stats::chi_square_gof;

    fn params(d: usize, alpha: f64, beta: f64) -> ModelParams {
        ModelParams::new(KernelSpec::pure_power(d, alpha), NormSpec::scaled_sup(d), beta, 0).unwrap()
    }

    #[test]
    fn beta_zero_is_singleton() {
        let s = EdgeSampler::new(&params(2, 1.0, 0.0), 50.0);
        let mut rng = stream_rng(0, 0);
        let c = sample_cluster(&s, &ClusterOptions::new(100, 3), &mut rng);
        assert_eq!(c.size, 1);
        assert_eq!(c.spatial_sums, vec![1.0, 0.0, 0.0, 0.0]);
        assert!(!c.truncated);
    }

    #[test]
    fn invariants_and_truncation() {
        let s = EdgeSampler::new(&params(1, 0.5, 1.2), 300.0);
        let opts = ClusterOptions {
            max_size: 50,
            p_max: 2,
            ball_radii: vec![0.0, 10.0, 100.0, 1e4],
            keep_vertices: true,
            domain: None,
        };
        let mut ex = Explorer::new();
        let mut truncated = 0;
        for i in 0..500 {
            let mut rng = stream_rng(4, i);
            let c = ex.sample(&s, &opts, &mut rng);
            assert!(c.size >= 1 && c.size <= 50);
            assert_eq!(c.spatial_sums[0], c.size as f64);
            let v = c.vertices.as_ref().unwrap();
            assert_eq!(v.len() as u64, c.size);
            let s1: f64 = v.iter().map(euclid_sq).sum();
            assert!((s1 - c.spatial_sums[1]).abs() <= 1e-9 * s1.max(1.0));
            assert_eq!(c.ball_counts[0], 1);
            assert!(c.ball_counts.windows(2).all(|w| w[0] <= w[1]));
            assert!(*c.ball_counts.last().unwrap() <= c.size);
            truncated += c.truncated as u32;
            assert_eq!(c.truncated, c.size == 50);
        }
        assert!(truncated > 0);
    }

    /// Exploration restricted to a box reproduces the exact law of the box graph.
    #[test]
    fn restricted_cluster_law_matches_oracle() {
        let s = EdgeSampler::new(&params(2, 1.0, 2.0), 5.0);
        let b = LatticeBox::new(&NormSpec::scaled_sup(2), 3.0, 100).unwrap();
        assert_eq!(b.len(), 9);
        let law = exact_small_graph_law(&box_edge_matrix(&s, &b), b.index_of(&ORIGIN).unwrap()).unwrap();
        let opts = ClusterOptions {
            domain: Some(3.0),
            keep_vertices: true,
            ..ClusterOptions::default()
        };
        let n = 40_000u64;
        let mut counts = vec![0u64; b.len() + 1];
        let probe = [1, 1, 0, 0];
        let mut hits = 0u64;
        let mut ex = Explorer::new();
        for i in 0..n {
            let mut rng = stream_rng(8, stream_id(Stage::Cluster, 0, i));
            let c = ex.sample(&s, &opts, &mut rng);
            counts[c.size as usize] += 1;
            hits += c.vertices.unwrap().contains(&probe) as u64;
        }
        let g = chi_square_gof(&counts, &law.size_law, 5.0).unwrap();
        assert!(g.p_value > 1e-3, "{g:?}");
        let q = law.connectivity(&[b.index_of(&ORIGIN).unwrap(), b.index_of(&probe).unwrap()]);
        let se = (q * (1.0 - q) / n as f64).sqrt();
        assert!(((hits as f64 / n as f64) - q).abs() < 3.5 * se);
    }

    #[test]
    fn mean_size_monotone_under_coupled_seeds() {
        let mut prev = 0.0;
        for (beta, r) in [(0.5, 20.0), (0.8, 20.0), (0.8, 80.0), (1.0, 80.0)] {
            let s = EdgeSampler::new(&params(1, 0.5, beta), r);
            let mut ex = Explorer::new();
            let n = 4000;
            let mean = (0..n)
                .map(|i| ex.sample(&s, &ClusterOptions::new(1 << 20, 1), &mut stream_rng(2, i)).size as f64)
                .sum::<f64>()
                / n as f64;
            assert!(mean >= prev * 0.98, "{beta} {r}: {mean} < {prev}");
            prev = mean;
        }
    }

    #[test]
    fn ghost_extremes() {
        let s = EdgeSampler::new(&params(1, 0.5, 0.0), 10.0);
        let h = 0.7;
        let n = 20_000;
        let mut conn = 0;
        for i in 0..n {
            let g = sample_ghost_connection(&s, h, 100, None, &mut stream_rng(1, i));
            assert_eq!(g.cluster_size, 1);
            conn += g.connected as u32;
        }
        let q = 1.0 - (-h).exp();
        let se = (q * (1.0 - q) / n as f64).sqrt();
        assert!((conn as f64 / n as f64 - q).abs() < 3.5 * se);
        let s = EdgeSampler::new(&params(1, 0.5, 1.0), 10.0);
        assert!(sample_ghost_connection(&s, 50.0, 100, None, &mut stream_rng(1, 0)).connected);
    }

    #[test]
    fn ghost_matches_oracle_laplace_value() {
        let s = EdgeSampler::new(&params(1, 0.5, 2.5), 7.0);
        let b = LatticeBox::new(&NormSpec::scaled_sup(1), 6.0, 100).unwrap();
        let law = exact_small_graph_law(&box_edge_matrix(&s, &b), b.index_of(&ORIGIN).unwrap()).unwrap();
        let h = 0.2;
        let exact: f64 = law.size_law.iter().enumerate().map(|(k, w)| w * (1.0 - (-h * k as f64).exp())).sum();
        let n = 40_000;
        let hits = (0..n)
            .filter(|&i| sample_ghost_connection(&s, h, 1000, Some(6.0), &mut stream_rng(6, i)).connected)
            .count();
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - exact).abs() < 3.5 * se);
    }
}
