use rand::Rng;
use serde::{Deserialize, Serialize};

use super::neighbors::EdgeSampler;
use super::pointmap::PointMap;
use crate::error::{Error, Result};
use crate::model::lattice::ball_points;
use crate::model::norm::{within, NormFamily, NormSpec, Point};

pub const DEFAULT_BOX_BUDGET: usize = 20_000_000;

/// Lattice ball `B_L` with a point ↔ index map.
#[derive(Debug, Clone)]
pub struct LatticeBox {
    pub norm: NormSpec,
    pub radius: f64,
    pub points: Vec<Point>,
    index: BoxIndex,
}

#[derive(Debug, Clone)]
enum BoxIndex {
    /// The sup-norm ball is the cube `[-m, m]^d`.
    Cube { m: i64 },
    Map(PointMap<u32>),
}

impl LatticeBox {
    pub fn new(norm: &NormSpec, radius: f64, budget: usize) -> Result<Self> {
        let count = crate::model::lattice_ball_count(norm, radius) as usize;
        if count > budget {
            return Err(Error::Resource {
                attempted: count,
                budget,
            });
        }
        let m = norm.coordinate_bound(radius);
        let (points, index) = match norm.family {
            NormFamily::ScaledSup => {
                let mut pts = Vec::with_capacity(count);
                crate::model::lattice::for_each_in_cube(norm.d, m, |x| pts.push(*x));
                (pts, BoxIndex::Cube { m })
            }
            NormFamily::ScaledEuclidean => {
                let pts = ball_points(norm, radius);
                let map = pts.iter().enumerate().map(|(i, x)| (*x, i as u32)).collect();
                (pts, BoxIndex::Map(map))
            }
        };
        Ok(Self {
            norm: *norm,
            radius,
            points,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, x: &Point) -> Option<usize> {
        match &self.index {
            BoxIndex::Cube { m } => {
                let side = 2 * m + 1;
                let mut idx = 0i64;
                for i in (0..self.norm.d).rev() {
                    let c = x[i] + m;
                    if c < 0 || c >= side {
                        return None;
                    }
                    idx = idx * side + c;
                }
                Some(idx as usize)
            }
            BoxIndex::Map(map) => map.get(x).map(|&i| i as usize),
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        within(self.norm.lattice_norm(x), self.radius)
    }
}

/// Union–find with path halving and union by size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let p = self.parent[x] as usize;
            self.parent[x] = self.parent[p];
            x = p;
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a as u32;
        self.size[a] += self.size[b];
        true
    }

    pub fn component_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r] as usize
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct BoxConfiguration {
    pub box_radius: f64,
    pub partition: UnionFind,
    /// Cluster label per box point: the index of its root.
    pub labels: Vec<u32>,
    /// Cluster sizes in decreasing order.
    pub cluster_sizes: Vec<u64>,
}

impl BoxConfiguration {
    pub fn max_cluster(&self) -> u64 {
        self.cluster_sizes.first().copied().unwrap_or(0)
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_sizes.len()
    }

    /// Largest cluster intersection with the points selected by `mask`.
    pub fn max_intersection(&self, mask: &[bool]) -> u64 {
        let mut counts = vec![0u64; self.labels.len()];
        let mut best = 0;
        for (i, &m) in mask.iter().enumerate() {
            if m {
                let c = &mut counts[self.labels[i] as usize];
                *c += 1;
                best = best.max(*c);
            }
        }
        best
    }
}

/// Samples every edge with both endpoints in the box and returns the induced
/// partition. Each pair is decided from its endpoint of smaller index.
pub fn sample_box_configuration<R: Rng + ?Sized>(sampler: &EdgeSampler, lbox: &LatticeBox, rng: &mut R) -> BoxConfiguration {
    let n = lbox.len();
    let mut uf = UnionFind::new(n);
    let mut buf = Vec::new();
    for i in 0..n {
        let x = lbox.points[i];
        buf.clear();
        sampler.sample_fresh(&x, rng, &mut buf);
        for y in &buf {
            if let Some(j) = lbox.index_of(y) {
                if j > i && lbox.contains(y) {
                    uf.union(i, j);
                }
            }
        }
    }
    let mut labels = vec![0u32; n];
    let mut sizes = Vec::new();
    for (i, l) in labels.iter_mut().enumerate() {
        let root = uf.find(i);
        *l = root as u32;
        if root == i {
            sizes.push(uf.size[i] as u64);
        }
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    BoxConfiguration {
        box_radius: lbox.radius,
        partition: uf,
        labels,
        cluster_sizes: sizes,
    }
}

/// Edge-probability matrix of the box graph, for the exact small-graph law.
pub fn box_edge_matrix(sampler: &EdgeSampler, lbox: &LatticeBox) -> Vec<Vec<f64>> {
    let params = &sampler.params;
    lbox.points
        .iter()
        .map(|x| {
            lbox.points
                .iter()
                .map(|y| {
                    if x == y {
                        0.0
                    } else {
                        params.p_at(params.norm.lattice_distance(x, y), sampler.r)
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{KernelSpec, ModelParams, NormSpec};
    use crate::rng::{stream_id, stream_rng, Stage};
    use crate::sampler::exact::exact_small_graph_law;
    use crate::stats::chi_square_gof;

    fn sampler(d: usize, beta: f64, r: f64) -> EdgeSampler {
        let p = ModelParams::new(KernelSpec::pure_power(d, 0.5), NormSpec::scaled_sup(d), beta, 0).unwrap();
        EdgeSampler::new(&p, r)
    }

    #[test]
    fn extremes() {
        let b = LatticeBox::new(&NormSpec::scaled_sup(2), 8.0, 1000).unwrap();
        let mut rng = stream_rng(1, 0);
        let c = sample_box_configuration(&sampler(2, 0.0, 8.0), &b, &mut rng);
        assert_eq!(c.n_clusters(), b.len());
        assert_eq!(c.cluster_sizes.iter().sum::<u64>(), b.len() as u64);
        // r ≥ 2 L · scale covers every pair of the box.
        let c = sample_box_configuration(&sampler(2, 1e6, 40.0), &b, &mut rng);
        assert_eq!(c.cluster_sizes, vec![b.len() as u64]);
        assert!(matches!(
            LatticeBox::new(&NormSpec::scaled_sup(2), 100.0, 10),
            Err(Error::Resource { attempted: 10201, .. })
        ));
    }

    #[test]
    fn index_roundtrip() {
        for norm in [NormSpec::scaled_sup(3), NormSpec::scaled_euclidean(3)] {
            let b = LatticeBox::new(&norm, 7.0, 100_000).unwrap();
            for (i, x) in b.points.iter().enumerate() {
                assert_eq!(b.index_of(x), Some(i));
            }
            assert_eq!(b.index_of(&[100, 0, 0, 0]), None);
        }
    }

    #[test]
    fn cluster_count_law_matches_oracle() {
        for r in [4.0, 9.0] {
            let s = sampler(1, 1.5, r);
            let b = LatticeBox::new(&NormSpec::scaled_sup(1), 4.0, 100).unwrap();
            let law = exact_small_graph_law(&box_edge_matrix(&s, &b), 0).unwrap();
            let probs = law.cluster_count_law().unwrap();
            let n = 40_000;
            let mut counts = vec![0u64; b.len() + 1];
            for i in 0..n {
                let mut rng = stream_rng(3, stream_id(Stage::Box, 0, i));
                counts[sample_box_configuration(&s, &b, &mut rng).n_clusters()] += 1;
            }
            let g = chi_square_gof(&counts, &probs, 5.0).unwrap();
            assert!(g.p_value > 1e-3, "r = {r}: {g:?}");
        }
    }
}
