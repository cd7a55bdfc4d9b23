use serde::{Deserialize, Serialize};

use super::kernel::ModelParams;
use super::lattice::{lattice_ball_count, shell_points};
use super::norm::Point;
use crate::quad::{integrate, QuadOptions};

/// Shells with at most this many points keep an explicit point list.
pub const EXPLICIT_LIMIT: u64 = 4096;

pub const DEFAULT_ACCEPTANCE_FLOOR: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ShellSampler {
    Explicit(Vec<Point>),
    /// Rejection from the cube `[-m, m]^d`.
    Cube { m: i64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    pub s_lo: f64,
    pub s_hi: f64,
    pub lattice_count: u64,
    /// Edge probability at the smallest distance occupied in the shell.
    pub p_max: f64,
    /// Mean of `p(y) / p_max` over the shell's points.
    pub acceptance: f64,
    pub sampler: ShellSampler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellTable {
    pub r: f64,
    pub acceptance_floor: f64,
    pub shells: Vec<Shell>,
}

impl ShellTable {
    pub fn total_count(&self) -> u64 {
        self.shells.iter().map(|s| s.lattice_count).sum()
    }

    /// Expected number of open edges at a vertex, `Σ_{y≠0} p(y)`.
    pub fn expected_degree(&self) -> f64 {
        self.shells
            .iter()
            .map(|s| s.lattice_count as f64 * s.p_max * s.acceptance)
            .sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ShellOptions {
    pub shells_per_decade: usize,
    pub acceptance_floor: f64,
    pub explicit_limit: u64,
}

impl Default for ShellOptions {
    fn default() -> Self {
        Self {
            shells_per_decade: 8,
            acceptance_floor: DEFAULT_ACCEPTANCE_FLOOR,
            explicit_limit: EXPLICIT_LIMIT,
        }
    }
}

pub fn build_shell_table(params: &ModelParams, r: f64, shells_per_decade: usize) -> ShellTable {
    build_shell_table_with(
        params,
        r,
        ShellOptions {
            shells_per_decade,
            ..ShellOptions::default()
        },
    )
}

pub fn build_shell_table_with(params: &ModelParams, r: f64, opts: ShellOptions) -> ShellTable {
    let mut table = ShellTable {
        r,
        acceptance_floor: opts.acceptance_floor,
        shells: Vec::new(),
    };
    if !(r >= 1.0) {
        return table;
    }
    let spd = opts.shells_per_decade.max(1) as f64;
    let mut bounds = vec![0.0, 1.0];
    let mut k = 1;
    loop {
        let b = 10f64.powf(k as f64 / spd);
        if b >= r {
            break;
        }
        bounds.push(b);
        k += 1;
    }
    if r > 1.0 {
        bounds.push(r);
    }
    let mut builder = Builder { params, r, opts, out: &mut table.shells };
    for w in bounds.windows(2) {
        builder.add(w[0], w[1], 0);
    }
    table
}

struct Builder<'a> {
    params: &'a ModelParams,
    r: f64,
    opts: ShellOptions,
    out: &'a mut Vec<Shell>,
}

impl Builder<'_> {
    fn add(&mut self, lo: f64, hi: f64, depth: usize) {
        let norm = &self.params.norm;
        let count = lattice_ball_count(norm, hi) - lattice_ball_count(norm, lo);
        if count == 0 {
            return;
        }
        let splittable = depth < 60 && hi > lo * (1.0 + 1e-9);
        if count <= self.opts.explicit_limit {
            let pts = shell_points(norm, lo, hi);
            debug_assert_eq!(pts.len() as u64, count);
            let dists: Vec<f64> = pts.iter().map(|x| norm.lattice_norm(x)).collect();
            let dmin = dists.iter().cloned().fold(f64::INFINITY, f64::min);
            let dmax = dists.iter().cloned().fold(0.0, f64::max);
            let p_max = self.params.p_at(dmin, self.r);
            let acceptance = if p_max > 0.0 {
                dists.iter().map(|&s| self.params.p_at(s, self.r)).sum::<f64>() / (count as f64 * p_max)
            } else {
                1.0
            };
            if acceptance < self.opts.acceptance_floor && dmax > dmin && splittable {
                let mid = (lo.max(dmin * 0.5) * hi).sqrt();
                self.add(lo, mid, depth + 1);
                self.add(mid, hi, depth + 1);
                return;
            }
            self.out.push(Shell {
                s_lo: lo,
                s_hi: hi,
                lattice_count: count,
                p_max,
                acceptance,
                sampler: ShellSampler::Explicit(pts),
            });
        } else {
            let p_max = self.params.p_at(lo, self.r);
            let acceptance = self.radial_acceptance(lo, hi, p_max);
            if acceptance < self.opts.acceptance_floor && splittable {
                let mid = (lo * hi).sqrt();
                self.add(lo, mid, depth + 1);
                self.add(mid, hi, depth + 1);
                return;
            }
            self.out.push(Shell {
                s_lo: lo,
                s_hi: hi,
                lattice_count: count,
                p_max,
                acceptance,
                sampler: ShellSampler::Cube {
                    m: norm.coordinate_bound(hi),
                },
            });
        }
    }

    /// Continuum approximation of the mean thinning acceptance.
    fn radial_acceptance(&self, lo: f64, hi: f64, p_max: f64) -> f64 {
        if p_max <= 0.0 {
            return 1.0;
        }
        let d = self.params.d() as f64;
        let (ulo, uhi) = (lo.powf(d), hi.powf(d));
        let q = integrate(
            |u| self.params.p_at(u.powf(1.0 / d), self.r),
            ulo,
            uhi,
            QuadOptions::tol(0.0, 1e-6),
        );
        match q {
            Ok(q) => q.value / ((uhi - ulo) * p_max),
            Err(_) => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::kernel::KernelSpec;
    use crate::model::norm::NormSpec;

    fn params(d: usize, alpha: f64, beta: f64, euclid: bool) -> ModelParams {
        let norm = if euclid { NormSpec::scaled_euclidean(d) } else { NormSpec::scaled_sup(d) };
        ModelParams::new(KernelSpec::pure_power(d, alpha), norm, beta, 0).unwrap()
    }

    #[test]
    fn degenerate_and_small_tables() {
        let p = params(1, 0.3, 1.0, false);
        assert!(build_shell_table(&p, 1.0, 8).shells.is_empty());
        let t = build_shell_table(&p, 4.0, 8);
        assert_eq!(t.total_count(), 4);
    }

    #[test]
    fn counts_partition_ball_and_p_max_decreases() {
        for (d, euclid, r) in [(1, false, 1e5), (2, false, 300.0), (2, true, 120.0), (3, true, 30.0)] {
            let p = params(d, 0.8, 0.7, euclid);
            let t = build_shell_table(&p, r, 6);
            assert_eq!(t.total_count(), lattice_ball_count(&p.norm, r) - 1);
            for w in t.shells.windows(2) {
                assert!(w[1].p_max <= w[0].p_max);
                assert!(w[0].s_hi <= w[1].s_lo);
            }
            for s in &t.shells {
                assert!(s.acceptance >= t.acceptance_floor - 1e-6 || s.p_max == 0.0, "{s:?}");
                if let ShellSampler::Explicit(pts) = &s.sampler {
                    for y in pts {
                        let dist = p.norm.lattice_norm(y);
                        assert!(dist > s.s_lo && dist <= s.s_hi);
                        assert!(p.p_at(dist, r) <= s.p_max);
                    }
                } else {
                    assert!(p.p_at(s.s_lo, r) <= s.p_max);
                }
            }
        }
    }
}
