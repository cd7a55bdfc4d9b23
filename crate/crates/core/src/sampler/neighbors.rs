use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1};

use super::pointmap::{PointMap, PointSet};
use crate::model::norm::{add, within, Point, ORIGIN};
use crate::model::{build_shell_table_with, ModelParams, ShellOptions, ShellSampler, ShellTable};

/// Draws the open edges at a vertex by per-shell binomial thinning.
///
/// For every shell the number of candidate sites is Binomial(count, p_max);
/// the candidate set is a uniform subset of that size, and each candidate is
/// kept with probability `p(y) / p_max`. Every site is therefore open
/// independently with probability exactly `p(y)`.
///
/// Most shells have no candidate. With `λ_i = -count_i · ln(1 - p_max,i)` a
/// shell is non-empty with probability `1 - e^{-λ_i}`, so the next non-empty
/// shell is found by comparing an Exp(1) variable with the cumulative sums of
/// `λ`. Its candidate count is then drawn from the zero-truncated binomial as
/// the position of the first success plus a binomial for the remaining trials.
#[derive(Debug, Clone)]
pub struct EdgeSampler {
    pub params: ModelParams,
    pub r: f64,
    pub table: ShellTable,
    /// `-ln(1 - p_max)` per shell.
    mu: Vec<f64>,
    /// Cumulative `λ` up to and including each shell.
    cum: Vec<f64>,
}

impl EdgeSampler {
    pub fn new(params: &ModelParams, r: f64) -> Self {
        Self::with_options(params, r, ShellOptions::default())
    }

    pub fn with_options(params: &ModelParams, r: f64, opts: ShellOptions) -> Self {
        let table = if params.beta > 0.0 && r.is_finite() {
            build_shell_table_with(params, r, opts)
        } else {
            ShellTable {
                r,
                acceptance_floor: opts.acceptance_floor,
                shells: Vec::new(),
            }
        };
        let mu: Vec<f64> = table.shells.iter().map(|s| -(-s.p_max).ln_1p()).collect();
        let mut cum = Vec::with_capacity(mu.len());
        let mut acc = 0.0;
        for (s, m) in table.shells.iter().zip(&mu) {
            acc += s.lattice_count as f64 * m;
            cum.push(acc);
        }
        Self {
            params: *params,
            r,
            table,
            mu,
            cum,
        }
    }

    /// Candidate count of shell `i` conditioned to be positive.
    fn positive_binomial<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> u64 {
        let c = self.table.shells[i].lattice_count;
        let mu = self.mu[i];
        let p = self.table.shells[i].p_max;
        let lam = c as f64 * mu;
        let u: f64 = rng.random();
        // First success among c trials, given at least one.
        let j = ((-(-u * -(-lam).exp_m1()).ln_1p()) / mu).ceil().clamp(1.0, c as f64) as u64;
        let rest = c - j;
        if rest == 0 || p <= 0.0 {
            return 1;
        }
        1 + Binomial::new(rest, p.min(1.0)).map_or(0, |b| b.sample(rng))
    }

    /// Appends the displacements `y` of open edges `{x, x + y}` drawn afresh.
    pub fn sample_offsets<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<Point>) {
        let norm = &self.params.norm;
        let d = norm.d;
        let total = self.cum.last().copied().unwrap_or(0.0);
        let mut level = 0.0;
        let mut next = 0usize;
        loop {
            level += rng.sample::<f64, _>(Exp1);
            if level >= total || next >= self.cum.len() {
                break;
            }
            // Points of a unit-rate Poisson process on the λ axis mark the
            // non-empty shells; the process restarts at the end of each hit.
            let i = next + self.cum[next..].partition_point(|&c| c <= level);
            if i >= self.cum.len() {
                break;
            }
            next = i + 1;
            level = self.cum[i];
            let shell = &self.table.shells[i];
            let k = self.positive_binomial(i, rng) as usize;
            let mut keep = |y: Point, rng: &mut R| {
                let p = self.params.p_at(norm.lattice_norm(&y), self.r);
                if rng.random::<f64>() * shell.p_max < p {
                    out.push(y);
                }
            };
            match &shell.sampler {
                ShellSampler::Explicit(pts) => {
                    for i in index::sample(rng, pts.len(), k).into_iter() {
                        keep(pts[i], rng);
                    }
                }
                ShellSampler::Cube { m } => {
                    let mut chosen: Vec<Point> = Vec::with_capacity(k);
                    let mut set = PointSet::default();
                    while chosen.len() < k {
                        let mut y = ORIGIN;
                        for c in y.iter_mut().take(d) {
                            *c = rng.random_range(-*m..=*m);
                        }
                        let s = norm.lattice_norm(&y);
                        if !within(s, shell.s_hi) || within(s, shell.s_lo) {
                            continue;
                        }
                        let fresh = if k <= 16 { !chosen.contains(&y) } else { set.insert(y) };
                        if fresh {
                            chosen.push(y);
                        }
                    }
                    for y in chosen {
                        keep(y, rng);
                    }
                }
            }
        }
    }

    pub fn sample_fresh<R: Rng + ?Sized>(&self, x: &Point, rng: &mut R, out: &mut Vec<Point>) {
        let start = out.len();
        self.sample_offsets(rng, out);
        for y in &mut out[start..] {
            *y = add(x, y);
        }
    }

    /// Open neighbours of `x` under the configuration recorded in `memo`.
    ///
    /// A pair is decided when its first endpoint is queried; later queries
    /// from either side return the recorded state.
    pub fn sample_neighbors<R: Rng + ?Sized>(&self, x: &Point, memo: &mut PairMemo, rng: &mut R) -> Vec<Point> {
        if let Some(list) = memo.decided.get(x) {
            return list.clone();
        }
        let mut fresh = Vec::new();
        self.sample_fresh(x, rng, &mut fresh);
        let mut result: Vec<Point> = fresh.into_iter().filter(|y| !memo.decided.contains_key(y)).collect();
        if let Some(back) = memo.incoming.remove(x) {
            result.extend(back);
        }
        for y in &result {
            if !memo.decided.contains_key(y) {
                memo.incoming.entry(*y).or_default().push(*x);
            }
        }
        memo.decided.insert(*x, result.clone());
        result
    }
}

/// Edge states recorded for one configuration.
#[derive(Debug, Default, Clone)]
pub struct PairMemo {
    epoch: u64,
    decided: PointMap<Vec<Point>>,
    incoming: PointMap<Vec<Point>>,
}

impl PairMemo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Starts a new configuration, discarding every recorded pair.
    pub fn reset(&mut self) {
        self.epoch += 1;
        self.decided = PointMap::default();
        self.incoming = PointMap::default();
    }

    pub fn is_decided(&self, x: &Point) -> bool {
        self.decided.contains_key(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{KernelSpec, NormSpec};
    use crate::rng::{stream_rng, stream_id, Stage};

    fn params(beta: f64) -> ModelParams {
        ModelParams::new(KernelSpec::pure_power(1, 0.5), NormSpec::scaled_sup(1), beta, 3).unwrap()
    }

    #[test]
    fn beta_zero_and_tiny_cutoff_are_empty() {
        let mut rng = stream_rng(1, 0);
        let s = EdgeSampler::new(&params(0.0), 10.0);
        let mut memo = PairMemo::new();
        for i in 0..100 {
            assert!(s.sample_neighbors(&[i, 0, 0, 0], &mut memo, &mut rng).is_empty());
        }
        let s = EdgeSampler::new(&params(5.0), 1.5);
        memo.reset();
        assert!(s.sample_neighbors(&ORIGIN, &mut memo, &mut rng).is_empty());
    }

    #[test]
    fn large_beta_opens_every_pair_in_ball() {
        let s = EdgeSampler::new(&params(1e3), 4.0);
        let mut hits = [0u32; 4];
        let n = 4000;
        for i in 0..n {
            let mut rng = stream_rng(9, stream_id(Stage::Test, 0, i));
            let mut memo = PairMemo::new();
            for y in s.sample_neighbors(&ORIGIN, &mut memo, &mut rng) {
                let k = match y[0] {
                    -2 => 0,
                    -1 => 1,
                    1 => 2,
                    2 => 3,
                    _ => panic!("{y:?}"),
                };
                hits[k] += 1;
            }
        }
        // J_4(4) = 0 so ±2 sit on the cutoff sphere and are never open.
        assert_eq!(hits[0], 0);
        assert_eq!(hits[3], 0);
        let p = params(1e3).p_at(2.0, 4.0);
        assert!(p > 1.0 - 1e-3);
        for h in [hits[1], hits[2]] {
            assert!(h as f64 / n as f64 >= 1.0 - 1e-3);
        }
    }

    #[test]
    fn memo_is_symmetric_and_idempotent() {
        let s = EdgeSampler::new(&params(2.0), 200.0);
        let mut rng = stream_rng(5, 1);
        let mut memo = PairMemo::new();
        let xs: Vec<Point> = (-20..20).map(|i| [i, 0, 0, 0]).collect();
        let first: Vec<Vec<Point>> = xs.iter().map(|x| s.sample_neighbors(x, &mut memo, &mut rng)).collect();
        for (x, n) in xs.iter().zip(&first) {
            assert_eq!(&s.sample_neighbors(x, &mut memo, &mut rng), n);
            for y in n {
                if memo.is_decided(y) {
                    assert!(s.sample_neighbors(y, &mut memo, &mut rng).contains(x));
                }
            }
        }
        for (i, x) in xs.iter().enumerate() {
            for (j, y) in xs.iter().enumerate() {
                if i != j {
                    assert_eq!(first[i].contains(y), first[j].contains(x));
                }
            }
        }
        let e = memo.epoch();
        memo.reset();
        assert_eq!(memo.epoch(), e + 1);
        assert!(!memo.is_decided(&xs[0]));
    }

    #[test]
    fn marginals_match_edge_probabilities() {
        // Euclidean d = 2 exercises both explicit and cube shells.
        let norm = NormSpec::scaled_euclidean(2);
        let p = ModelParams::new(KernelSpec::pure_power(2, 1.0), norm, 3.0, 0).unwrap();
        let r = 150.0;
        let opts = ShellOptions {
            explicit_limit: 64,
            ..ShellOptions::default()
        };
        let s = EdgeSampler::with_options(&p, r, opts);
        assert!(s.table.shells.iter().any(|sh| matches!(sh.sampler, ShellSampler::Cube { .. })));
        let probes: Vec<Point> = vec![[1, 0, 0, 0], [1, 1, 0, 0], [3, -2, 0, 0], [-9, 4, 0, 0], [40, 0, 0, 0]];
        let n = 200_000u64;
        let mut counts = vec![0u64; probes.len()];
        let mut total = 0u64;
        let mut rng = stream_rng(77, 0);
        let mut buf = Vec::new();
        for _ in 0..n {
            buf.clear();
            s.sample_offsets(&mut rng, &mut buf);
            total += buf.len() as u64;
            for (c, y) in counts.iter_mut().zip(&probes) {
                if buf.contains(y) {
                    *c += 1;
                }
            }
        }
        for (c, y) in counts.iter().zip(&probes) {
            let q = p.p_at(norm.lattice_norm(y), r);
            let se = (q * (1.0 - q) / n as f64).sqrt();
            let z = (*c as f64 / n as f64 - q) / se;
            assert!(z.abs() < 4.5, "{y:?}: z = {z}");
        }
        let mean_deg = total as f64 / n as f64;
        let exact: f64 = crate::model::lattice::ball_points(&norm, r)
            .iter()
            .skip(1)
            .map(|y| p.p_at(norm.lattice_norm(y), r))
            .sum();
        assert!((mean_deg - exact).abs() < 5.0 * (exact / n as f64).sqrt(), "{mean_deg} vs {exact}");
    }
}
