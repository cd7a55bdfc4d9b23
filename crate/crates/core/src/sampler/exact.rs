//! Exact cluster laws on small weighted graphs.

use crate::error::{Error, Result};

pub const MAX_ORACLE_VERTICES: usize = 14;
pub const MAX_PARTITION_VERTICES: usize = 12;

/// Connection probabilities of every vertex subset of a small graph.
///
/// `conn[S]` is the probability that the subgraph induced on `S` is connected;
/// it satisfies `conn[S] = 1 − Σ_T conn[T] · Q(T, S∖T)` over proper subsets
/// `T` containing the smallest vertex of `S`, where `Q` is the probability
/// that no edge joins the two sets.
#[derive(Debug, Clone)]
pub struct SmallGraphLaw {
    pub n: usize,
    pub root: usize,
    p: Vec<f64>,
    q: Vec<Vec<f64>>,
    conn: Vec<f64>,
    /// `P(|K_root| = k)` for `k = 0..=n` (entry 0 is zero).
    pub size_law: Vec<f64>,
}

pub fn exact_small_graph_law(weights: &[Vec<f64>], root: usize) -> Result<SmallGraphLaw> {
    let n = weights.len();
    if n > MAX_ORACLE_VERTICES {
        return Err(Error::Size {
            what: "oracle vertices",
            got: n,
            limit: MAX_ORACLE_VERTICES,
        });
    }
    if n == 0 || root >= n {
        return Err(Error::domain("root must be a vertex of a non-empty graph"));
    }
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        if weights[i].len() != n {
            return Err(Error::domain("weight matrix must be square"));
        }
        for j in 0..n {
            let w = weights[i][j];
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::domain(format!("edge probability {w} outside [0, 1]")));
            }
            if i != j && (w - weights[j][i]).abs() > 1e-15 {
                return Err(Error::domain("weight matrix must be symmetric"));
            }
            if i != j {
                p[i * n + j] = w;
            }
        }
    }
    let full = 1usize << n;
    let mut q = vec![vec![1.0; full]; n];
    for (i, qi) in q.iter_mut().enumerate() {
        for mask in 1..full {
            let low = mask.trailing_zeros() as usize;
            qi[mask] = qi[mask & (mask - 1)] * (1.0 - p[i * n + low]);
        }
    }
    let mut law = SmallGraphLaw {
        n,
        root,
        p,
        q,
        conn: vec![0.0; full],
        size_law: vec![0.0; n + 1],
    };
    for s in 1..full {
        if s & (s - 1) == 0 {
            law.conn[s] = 1.0;
            continue;
        }
        let low = s & s.wrapping_neg();
        let rest = s ^ low;
        let mut acc = 0.0;
        // Proper sub-subsets of `rest`, including the empty one.
        let mut t = (rest - 1) & rest;
        loop {
            let tm = t | low;
            acc += law.conn[tm] * law.cross(tm, s ^ tm);
            if t == 0 {
                break;
            }
            t = (t - 1) & rest;
        }
        law.conn[s] = (1.0 - acc).max(0.0);
    }
    for s in 1..full {
        if s >> root & 1 == 1 {
            law.size_law[s.count_ones() as usize] += law.cluster_prob(root, s);
        }
    }
    Ok(law)
}

impl SmallGraphLaw {
    fn full_mask(&self) -> usize {
        (1 << self.n) - 1
    }

    pub fn edge(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n + j]
    }

    /// Probability that no edge joins `a` and `b` (disjoint masks).
    pub fn cross(&self, a: usize, b: usize) -> f64 {
        let mut prod = 1.0;
        let mut m = a;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            prod *= self.q[i][b];
            m &= m - 1;
        }
        prod
    }

    pub fn connected_prob(&self, mask: usize) -> f64 {
        self.conn[mask]
    }

    /// `P(C(v) = S)`.
    pub fn cluster_prob(&self, v: usize, mask: usize) -> f64 {
        if mask >> v & 1 == 0 {
            return 0.0;
        }
        self.conn[mask] * self.cross(mask, self.full_mask() ^ mask)
    }

    /// Law of `|C(v)|` for any vertex `v`.
    pub fn size_law_of(&self, v: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n + 1];
        for s in 1..=self.full_mask() {
            if s >> v & 1 == 1 {
                out[s.count_ones() as usize] += self.cluster_prob(v, s);
            }
        }
        out
    }

    /// `E|C(root)|^p`.
    pub fn size_moment(&self, p: u32) -> f64 {
        self.size_law.iter().enumerate().map(|(k, w)| w * (k as f64).powi(p as i32)).sum()
    }

    /// Probability that all listed vertices share one cluster.
    pub fn connectivity(&self, vertices: &[usize]) -> f64 {
        if vertices.is_empty() {
            return 1.0;
        }
        let need = vertices.iter().fold(0usize, |m, &v| m | 1 << v);
        let v0 = vertices[0];
        (1..=self.full_mask())
            .filter(|s| s & need == need)
            .map(|s| self.cluster_prob(v0, s))
            .sum()
    }

    /// `E[Σ_{x∈C(root)} f(x)]` for a per-vertex weight.
    pub fn expected_cluster_sum(&self, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.n).map(|x| self.connectivity(&[self.root, x]) * f(x)).sum()
    }

    /// Joint law `P(#clusters = c, max cluster size = m)` indexed `[c][m]`.
    pub fn partition_law(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.n;
        if n > MAX_PARTITION_VERTICES {
            return Err(Error::Size {
                what: "partition-law vertices",
                got: n,
                limit: MAX_PARTITION_VERTICES,
            });
        }
        let w = n + 1;
        let full = 1usize << n;
        let mut f = vec![0.0; full * w * w];
        f[0] = 1.0;
        for u in 1..full {
            let low = u & u.wrapping_neg();
            let rest = u ^ low;
            let mut t = rest;
            loop {
                let b = t | low;
                let rem = u ^ b;
                let weight = self.conn[b] * self.cross(b, rem);
                if weight > 0.0 {
                    let bs = b.count_ones() as usize;
                    for c in 0..n {
                        for m in 0..=n {
                            let g = f[(rem * w + c) * w + m];
                            if g != 0.0 {
                                f[(u * w + c + 1) * w + m.max(bs)] += weight * g;
                            }
                        }
                    }
                }
                if t == 0 {
                    break;
                }
                t = (t - 1) & rest;
            }
        }
        let base = (full - 1) * w * w;
        Ok((0..w).map(|c| f[base + c * w..base + (c + 1) * w].to_vec()).collect())
    }

    /// Law of the number of clusters.
    pub fn cluster_count_law(&self) -> Result<Vec<f64>> {
        Ok(self.partition_law()?.into_iter().map(|row| row.iter().sum()).collect())
    }

    /// Law of the largest cluster size.
    pub fn max_size_law(&self) -> Result<Vec<f64>> {
        let joint = self.partition_law()?;
        let mut out = vec![0.0; self.n + 1];
        for row in joint {
            for (m, v) in row.into_iter().enumerate() {
                out[m] += v;
            }
        }
        Ok(out)
    }

    /// `τ(i, j) = P(i ↔ j)`, with `τ(i, i) = 1`.
    pub fn two_point_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| if i == j { 1.0 } else { self.connectivity(&[i, j]) }).collect())
            .collect()
    }

    /// `max_v E|C(v)|^p / ((2p-3)!! χ^{2p-1})` with `χ = max_u E|C(u)|`;
    /// the tree-graph inequality says this is at most one.
    pub fn tree_graph_margin(&self, p: u32) -> f64 {
        let moments: Vec<(f64, f64)> = (0..self.n)
            .map(|v| {
                let law = self.size_law_of(v);
                let m = |q: i32| law.iter().enumerate().map(|(k, w)| w * (k as f64).powi(q)).sum::<f64>();
                (m(1), m(p as i32))
            })
            .collect();
        let chi = moments.iter().map(|m| m.0).fold(0.0, f64::max);
        let bound = crate::diagrams::double_factorial_f64(2 * p as i64 - 3) * chi.powi(2 * p as i32 - 1);
        moments.iter().map(|m| m.1 / bound).fold(0.0, f64::max)
    }

    /// Largest `P(x ↔ y ↔ z) / Σ_w τ(x,w) τ(y,w) τ(z,w)` over distinct
    /// triples (three-point tree-graph bound, at most one).
    pub fn three_point_tree_margin(&self) -> f64 {
        let tau = self.two_point_matrix();
        self.fold_triples(|x, y, z, t3| {
            let b: f64 = (0..self.n).map(|w| tau[x][w] * tau[y][w] * tau[z][w]).sum();
            t3 / b
        })
    }

    /// Largest `P(x ↔ y ↔ z)² / (8 τ(x,y) τ(y,z) τ(z,x))` over distinct
    /// triples (Gladkov bound, at most one).
    pub fn gladkov_margin(&self) -> f64 {
        let tau = self.two_point_matrix();
        self.fold_triples(|x, y, z, t3| {
            let b = 8.0 * tau[x][y] * tau[y][z] * tau[z][x];
            if b == 0.0 {
                if t3 == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                t3 * t3 / b
            }
        })
    }

    fn fold_triples(&self, f: impl Fn(usize, usize, usize, f64) -> f64) -> f64 {
        let mut best: f64 = 0.0;
        for x in 0..self.n {
            for y in x + 1..self.n {
                for z in y + 1..self.n {
                    best = best.max(f(x, y, z, self.connectivity(&[x, y, z])));
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(n: usize, p: f64) -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { p }).collect()).collect()
    }

    /// Enumerates all edge configurations.
    fn brute_size_law(w: &[Vec<f64>], root: usize) -> Vec<f64> {
        let n = w.len();
        let edges: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let mut out = vec![0.0; n + 1];
        for cfg in 0u64..1 << edges.len() {
            let mut prob = 1.0;
            for (k, &(i, j)) in edges.iter().enumerate() {
                prob *= if cfg >> k & 1 == 1 { w[i][j] } else { 1.0 - w[i][j] };
            }
            let mut reach = 1u32 << root;
            loop {
                let mut next = reach;
                for (k, &(i, j)) in edges.iter().enumerate() {
                    if cfg >> k & 1 == 1 && (reach >> i & 1 == 1 || reach >> j & 1 == 1) {
                        next |= 1 << i | 1 << j;
                    }
                }
                if next == reach {
                    break;
                }
                reach = next;
            }
            out[reach.count_ones() as usize] += prob;
        }
        out
    }

    #[test]
    fn examples() {
        let law = exact_small_graph_law(&complete(2, 0.3), 0).unwrap();
        assert!((law.size_law[2] - 0.3).abs() < 1e-15);
        let law = exact_small_graph_law(&complete(3, 0.5), 0).unwrap();
        assert!((law.size_law[3] - 0.5).abs() < 1e-15);
        assert!((law.size_law[1] - 0.25).abs() < 1e-15);
        assert!((law.size_moment(1) - 9.0 / 4.0).abs() < 1e-15);
        assert!(exact_small_graph_law(&complete(15, 0.1), 0).is_err());
    }

    #[test]
    fn matches_enumeration() {
        let n = 5;
        let w: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 0.1 + 0.13 * ((i + j) % 5) as f64 }).collect())
            .collect();
        for root in 0..n {
            let law = exact_small_graph_law(&w, root).unwrap();
            let b = brute_size_law(&w, root);
            for k in 0..=n {
                assert!((law.size_law[k] - b[k]).abs() < 1e-13);
            }
            assert!((law.size_law.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn partition_law_is_consistent() {
        let law = exact_small_graph_law(&complete(6, 0.3), 0).unwrap();
        let joint = law.partition_law().unwrap();
        let total: f64 = joint.iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-13);
        let counts = law.cluster_count_law().unwrap();
        // E[#clusters] = Σ_v E[1/|C(v)|].
        let mean_count: f64 = counts.iter().enumerate().map(|(c, w)| c as f64 * w).sum();
        let via_sizes: f64 = (0..6)
            .map(|v| law.size_law_of(v).iter().enumerate().skip(1).map(|(k, w)| w / k as f64).sum::<f64>())
            .sum();
        assert!((mean_count - via_sizes).abs() < 1e-13);
        let empty = exact_small_graph_law(&complete(4, 0.0), 0).unwrap();
        assert!((empty.cluster_count_law().unwrap()[4] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn correlation_inequalities_on_random_graphs() {
        use crate::rng::{stream_id, stream_rng, Stage};
        use rand::Rng;
        let mut rng = stream_rng(9, stream_id(Stage::Test, 40, 0));
        for n in [3usize, 5, 7] {
            let j: Vec<Vec<f64>> = {
                let mut m = vec![vec![0.0; n]; n];
                for a in 0..n {
                    for b in a + 1..n {
                        let v: f64 = rng.random::<f64>() * 2.0;
                        m[a][b] = v;
                        m[b][a] = v;
                    }
                }
                m
            };
            for beta in [0.05, 0.3, 1.0, 3.0] {
                let w: Vec<Vec<f64>> = j.iter().map(|row| row.iter().map(|v| -(-beta * v).exp_m1()).collect()).collect();
                let law = exact_small_graph_law(&w, 0).unwrap();
                for p in [2, 3] {
                    assert!(law.tree_graph_margin(p) <= 1.0 + 1e-12, "n={n} β={beta} p={p}");
                }
                assert!(law.three_point_tree_margin() <= 1.0 + 1e-12);
                assert!(law.gladkov_margin() <= 1.0 + 1e-12);
            }
        }
        // The margin is not vacuous.
        let law = exact_small_graph_law(&complete(3, 0.5), 0).unwrap();
        assert!(law.gladkov_margin() > 0.0);
    }
}
