use std::io::Write;

use serde::{Deserialize, Serialize};

use super::boxes::ball_sums_from_clusters;
use super::moments::{estimate_gyration, estimate_moments};
use crate::error::Result;
use crate::sampler::ClusterSample;
use crate::stats::Estimate;

/// `Σ_{x∈B_ρ} P̂(0 ↔ x)` at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSum {
    pub rho: f64,
    pub value: Estimate,
}

/// Number of sampled clusters with `lo ≤ |K| < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailBin {
    pub lo: u64,
    pub hi: u64,
    pub count: u64,
}

/// Log-binned histogram of cluster sizes with bins `[2^k, 2^{k+1})`.
pub fn size_histogram(sizes: impl IntoIterator<Item = u64>) -> Vec<TailBin> {
    let mut counts: Vec<u64> = Vec::new();
    for s in sizes {
        let k = 63 - s.max(1).leading_zeros() as usize;
        if counts.len() <= k {
            counts.resize(k + 1, 0);
        }
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| TailBin {
            lo: 1 << k,
            hi: 1u64.checked_shl(k as u32 + 1).unwrap_or(u64::MAX),
            count,
        })
        .collect()
}

/// Flow observables at one `(β, r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPoint {
    pub beta: f64,
    pub r: f64,
    pub n_samples: u64,
    pub n_truncated: u64,
    /// `E|K|^p` for `p = 0..=p_max`, over untruncated samples.
    pub moment_est: Vec<Estimate>,
    /// `ξ_2(r)²`.
    pub gyration2: Option<Estimate>,
    /// `E|K|² / E|K|`.
    pub size_biased_mean: Estimate,
    /// `V_r = E|K|² / (E|K|)³`.
    pub vertex_factor: Estimate,
    /// `E|K|³ E|K| / (E|K|²)²`.
    pub chi_ratio: Option<Estimate>,
    /// `M_r` proxy.
    pub edian: Option<u64>,
    pub two_point_ball_sum: Vec<BallSum>,
    /// `sup_{x≠0} ∇̂(0, x)`.
    pub triangle_sup: Option<f64>,
    pub tail_hist: Vec<TailBin>,
}

impl FlowPoint {
    /// A point with no measurements, every size moment equal to one.
    pub fn empty(beta: f64, r: f64) -> Self {
        Self {
            beta,
            r,
            n_samples: 0,
            n_truncated: 0,
            moment_est: vec![Estimate::exact(1.0)],
            gyration2: None,
            size_biased_mean: Estimate::exact(1.0),
            vertex_factor: Estimate::exact(1.0),
            chi_ratio: None,
            edian: None,
            two_point_ball_sum: Vec::new(),
            triangle_sup: None,
            tail_hist: Vec::new(),
        }
    }

    /// `θ = β r^{-α} E|K|`.
    pub fn theta(&self, alpha: f64) -> Option<Estimate> {
        let m = self.moment_est.get(1)?;
        let s = self.beta * self.r.powf(-alpha);
        Some(Estimate {
            mean: s * m.mean,
            stderr: s * m.stderr,
        })
    }
}

/// Flow point from cluster samples at one `(β, r)`. The box observables
/// (`edian`, `triangle_sup`) are left unset. `ball_radii` must be the grid
/// the samples' ball counts were taken on.
pub fn flow_point_from_samples(beta: f64, r: f64, samples: &[ClusterSample], p_max: usize, ball_radii: &[f64]) -> Result<FlowPoint> {
    let rep = estimate_moments(samples, p_max)?;
    let kept: Vec<ClusterSample> = samples.iter().filter(|s| !s.truncated).cloned().collect();
    let gyration2 = if kept.iter().all(|s| s.spatial_sums.len() > 1) {
        Some(estimate_gyration(&kept)?)
    } else {
        None
    };
    let two_point_ball_sum = if ball_radii.is_empty() {
        Vec::new()
    } else {
        ball_sums_from_clusters(&kept, ball_radii)?
    };
    Ok(FlowPoint {
        beta,
        r,
        n_samples: rep.n_samples,
        n_truncated: rep.n_truncated,
        moment_est: rep.moment_est,
        gyration2,
        size_biased_mean: rep.size_biased_mean,
        vertex_factor: rep.vertex_factor,
        chi_ratio: rep.chi_ratio,
        edian: None,
        two_point_ball_sum,
        triangle_sup: None,
        tail_hist: size_histogram(kept.iter().map(|s| s.size)),
    })
}

pub fn write_flow_json<W: Write>(mut w: W, point: &FlowPoint) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, point)?;
    writeln!(w)?;
    Ok(())
}

fn opt(e: Option<Estimate>) -> [String; 2] {
    match e {
        Some(e) => [e.mean.to_string(), e.stderr.to_string()],
        None => [String::new(), String::new()],
    }
}

/// Flow table, one row per point. All points must share `p_max`.
pub fn write_flow_csv<W: Write>(w: W, points: &[FlowPoint]) -> Result<()> {
    let p_max = points.iter().map(|p| p.moment_est.len()).max().unwrap_or(1).saturating_sub(1);
    let mut wr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = ["beta", "r", "n_samples", "n_truncated"].iter().map(|s| s.to_string()).collect();
    for p in 1..=p_max {
        header.push(format!("moment_{p}"));
        header.push(format!("moment_{p}_se"));
    }
    for name in ["gyration2", "size_biased_mean", "vertex_factor", "chi_ratio"] {
        header.push(name.to_string());
        header.push(format!("{name}_se"));
    }
    header.push("edian".into());
    header.push("triangle_sup".into());
    wr.write_record(&header)?;
    for pt in points {
        let mut row = vec![pt.beta.to_string(), pt.r.to_string(), pt.n_samples.to_string(), pt.n_truncated.to_string()];
        for p in 1..=p_max {
            row.extend(opt(pt.moment_est.get(p).copied()));
        }
        row.extend(opt(pt.gyration2));
        row.extend(opt(Some(pt.size_biased_mean)));
        row.extend(opt(Some(pt.vertex_factor)));
        row.extend(opt(pt.chi_ratio));
        row.push(pt.edian.map(|v| v.to_string()).unwrap_or_default());
        row.push(pt.triangle_sup.map(|v| v.to_string()).unwrap_or_default());
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}
