//! Stage implementations behind the `lrp` subcommands.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BetaSpec, RunConfig};
use super::manifest::RunManifest;
use crate::diagrams::{double_factorial, enumerate_trees, verify_convolution_identity, ConvolutionCheck};
use crate::error::{Error, Result};
use crate::model::{NormFamily, NormSpec};
use crate::observables::{
    default_tail_window, estimate_betac, estimate_edian, estimate_moments, estimate_volume_tail_with, flow_point_from_samples,
    measurement_mask, triangle_from, write_flow_csv, write_flow_json, BetacEstimate, BetacOptions, FlowPoint, TailFit,
    MAX_TRUNCATED_FRACTION, MIN_EDIAN_CONFIGS,
};
use crate::rg_ode::{
    displacement_flow, gyration_flow, integrate_moment_hierarchy, log_grid, moment_family, riccati_check, write_hierarchy_csv,
    GyrationReport, OdeOptions, Profile, RiccatiCheck,
};
use crate::rng::{stream_id, stream_rng, Stage};
use crate::sampler::boxconf::DEFAULT_BOX_BUDGET;
use crate::sampler::{
    read_cluster_csv, sample_box_configuration, sample_clusters, with_workers, write_cluster_csv, ClusterOptions, ClusterRecord,
    ClusterSample, EdgeSampler, Explorer, LatticeBox,
};
use crate::special::gamma;
use crate::stats::Estimate;
use crate::superprocess::{ball_moment, CoefficientTable, DisplacementLaw, DEFAULT_EPS};
use crate::tauberian::{fit_laplace_profile, laplace_profile, scaling_functions, FitOptions};

pub const CLUSTERS_CSV: &str = "clusters.csv";
pub const BOXES_CSV: &str = "boxes.csv";
pub const BETAC_JSON: &str = "betac.json";
pub const TAIL_JSON: &str = "tail.json";
pub const FLOW_CSV: &str = "flow.csv";
pub const FLOW_PLOT: &str = "flow_plot.gp";
pub const REPORT_CSV: &str = "report.csv";

/// Boxes up to this many sites keep their cluster labels in `boxes.csv`,
/// which feeds the triangle plug-in.
pub const MAX_LABELLED_BOX: usize = 512;

pub fn flow_point_file(k: usize) -> String {
    format!("flow_point_{k}.json")
}

/// Resolved global options shared by every stage.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: Option<RunConfig>,
    pub out: PathBuf,
    pub seed: u64,
    pub workers: usize,
}

impl Context {
    /// Applies the `--seed`, `--workers` and `--out` overrides to `config`.
    pub fn new(mut config: Option<RunConfig>, out: Option<PathBuf>, seed: Option<u64>, workers: Option<usize>) -> Self {
        if let Some(c) = config.as_mut() {
            if let Some(s) = seed {
                c.run.seed = s;
            }
            if let Some(w) = workers {
                c.run.workers = w;
            }
        }
        let out = out
            .or_else(|| config.as_ref().map(|c| c.output.dir.clone()))
            .unwrap_or_else(|| PathBuf::from("out"));
        let seed = config.as_ref().map_or(seed.unwrap_or(1), |c| c.run.seed);
        let workers = config.as_ref().map_or(workers.unwrap_or(0), |c| c.run.workers);
        Self { config, out, seed, workers }
    }

    pub fn config(&self) -> Result<&RunConfig> {
        self.config
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs --config PATH".into()))
    }

    fn prepare_out(&self) -> Result<()> {
        fs::create_dir_all(&self.out)?;
        Ok(())
    }

    fn manifest(&self, stage: &str) -> RunManifest {
        RunManifest::new(stage, self.config.as_ref(), self.seed, self.workers)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn finish(&self, mut man: RunManifest, t0: Instant) -> Result<()> {
        man.wall_time_s = t0.elapsed().as_secs_f64();
        man.write(&self.out)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn open_dependency(path: &Path, stage: &str) -> Result<File> {
    File::open(path).map_err(|_| Error::Dependency {
        stage: stage.to_string(),
        path: path.display().to_string(),
    })
}

/// `run.beta`, reading `betac.json` for `"critical"`.
pub fn resolve_beta(ctx: &Context) -> Result<f64> {
    match &ctx.config()?.run.beta {
        BetaSpec::Value(b) => Ok(*b),
        BetaSpec::Named(_) => read_betac(ctx).map(|e| e.beta_hat),
    }
}

fn read_betac(ctx: &Context) -> Result<BetacEstimate> {
    let f = open_dependency(&ctx.path(BETAC_JSON), "betac")?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

fn cluster_options(cfg: &RunConfig, r: f64) -> ClusterOptions {
    ClusterOptions {
        ball_radii: cfg.ball_radii(r),
        ..ClusterOptions::new(cfg.run.max_size, cfg.run.p_max)
    }
}

/// One sampled box configuration. The box has radius `2r` and the maximum
/// intersection is taken over `B_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRow {
    pub grid: u32,
    pub index: u64,
    pub r: f64,
    pub max_intersection: u64,
    pub max_cluster: u64,
    /// Space-separated cluster labels, empty above [`MAX_LABELLED_BOX`] sites.
    pub labels: String,
}

impl BoxRow {
    fn parse_labels(&self) -> Result<Vec<u32>> {
        self.labels
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| Error::Estimation(format!("bad box label {s:?}"))))
            .collect()
    }
}

fn box_lattice(cfg: &RunConfig, r: f64) -> Result<LatticeBox> {
    LatticeBox::new(&cfg.norm()?, 2.0 * r, DEFAULT_BOX_BUDGET)
}

fn sample_boxes(sampler: &EdgeSampler, cfg: &RunConfig, k: u32, r: f64, seed: u64, workers: usize) -> Result<Vec<BoxRow>> {
    let lbox = box_lattice(cfg, r)?;
    let mask = measurement_mask(&lbox, r);
    let keep = lbox.len() <= MAX_LABELLED_BOX;
    Ok(with_workers(workers, || {
        (0..cfg.run.box_samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(seed, stream_id(Stage::Box, k, i));
                let c = sample_box_configuration(sampler, &lbox, &mut rng);
                let labels = if keep {
                    c.labels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ")
                } else {
                    String::new()
                };
                BoxRow {
                    grid: k,
                    index: i,
                    r,
                    max_intersection: c.max_intersection(&mask),
                    max_cluster: c.max_cluster(),
                    labels,
                }
            })
            .collect()
    }))
}

pub fn write_box_csv<W: Write>(w: W, rows: &[BoxRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for row in rows {
        wr.serialize(row)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_box_csv<R: std::io::Read>(r: R) -> Result<Vec<BoxRow>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Samples pooled over the radius grid.
#[derive(Debug, Clone, Default)]
pub struct Samples {
    pub clusters: Vec<ClusterRecord>,
    pub boxes: Vec<BoxRow>,
}

/// Draws `run.samples` clusters (and `run.box_samples` boxes) per radius and
/// writes `clusters.csv`, `boxes.csv` and the manifest.
pub fn cmd_sample(ctx: &Context) -> Result<Samples> {
    let t0 = Instant::now();
    let cfg = ctx.config()?;
    ctx.prepare_out()?;
    let beta = resolve_beta(ctx)?;
    let params = cfg.params(beta)?;
    let mut man = ctx.manifest("sample");
    if matches!(cfg.run.beta, BetaSpec::Named(_)) {
        man.beta_c = Some(beta);
    }
    let mut out = Samples::default();
    for (k, &r) in cfg.run.r_grid.iter().enumerate() {
        let sampler = EdgeSampler::new(&params, r);
        let recs = sample_clusters(&sampler, &cluster_options(cfg, r), ctx.seed, k as u32, cfg.run.samples, ctx.workers);
        let trunc = recs.iter().filter(|c| c.sample.truncated).count();
        man.sample_counts.insert(format!("clusters_r{k}"), recs.len() as u64);
        man.truncation_rates.insert(format!("clusters_r{k}"), trunc as f64 / recs.len() as f64);
        out.clusters.extend(recs);
        if cfg.run.box_samples > 0 {
            let rows = sample_boxes(&sampler, cfg, k as u32, r, ctx.seed, ctx.workers)?;
            man.sample_counts.insert(format!("boxes_r{k}"), rows.len() as u64);
            out.boxes.extend(rows);
        }
    }
    write_cluster_csv(BufWriter::new(File::create(ctx.path(CLUSTERS_CSV))?), &out.clusters)?;
    man.outputs.push(CLUSTERS_CSV.into());
    let box_path = ctx.path(BOXES_CSV);
    if out.boxes.is_empty() {
        if box_path.exists() {
            fs::remove_file(&box_path)?;
        }
    } else {
        write_box_csv(BufWriter::new(File::create(&box_path)?), &out.boxes)?;
        man.outputs.push(BOXES_CSV.into());
    }
    println!(
        "sampled {} clusters and {} boxes over {} radii at beta = {beta}",
        out.clusters.len(),
        out.boxes.len(),
        cfg.run.r_grid.len()
    );
    ctx.finish(man, t0)?;
    Ok(out)
}

/// Reads the outputs of `cmd_sample`.
pub fn load_samples(ctx: &Context) -> Result<Samples> {
    let f = open_dependency(&ctx.path(CLUSTERS_CSV), "sample")?;
    let clusters = read_cluster_csv(BufReader::new(f))?;
    let box_path = ctx.path(BOXES_CSV);
    let boxes = if box_path.exists() {
        read_box_csv(BufReader::new(File::open(box_path)?))?
    } else {
        Vec::new()
    };
    Ok(Samples { clusters, boxes })
}

fn grid_samples(samples: &Samples, k: usize) -> (Vec<&ClusterRecord>, Vec<&BoxRow>) {
    let k = k as u32;
    (
        samples.clusters.iter().filter(|c| c.grid == k).collect(),
        samples.boxes.iter().filter(|b| b.grid == k).collect(),
    )
}

fn box_observables(cfg: &RunConfig, r: f64, rows: &[&BoxRow], pt: &mut FlowPoint) -> Result<()> {
    if rows.len() >= MIN_EDIAN_CONFIGS {
        let maxes: Vec<u64> = rows.iter().map(|b| b.max_intersection).collect();
        pt.edian = Some(estimate_edian(&maxes)?);
    }
    if rows.is_empty() || rows.iter().any(|b| b.labels.is_empty()) {
        return Ok(());
    }
    let lbox = box_lattice(cfg, r)?;
    let labels = rows.iter().map(|b| b.parse_labels()).collect::<Result<Vec<_>>>()?;
    if labels.iter().any(|l| l.len() != lbox.len()) {
        return Err(Error::Dependency {
            stage: "sample".into(),
            path: format!("{BOXES_CSV} (label count does not match a box of radius {})", 2.0 * r),
        });
    }
    let n = labels.len() as f64;
    let conn = |i: usize, j: usize| labels.iter().filter(|l| l[i] == l[j]).count() as f64 / n;
    pt.triangle_sup = Some(triangle_from(&conn, &lbox)?.sup_off_origin);
    Ok(())
}

/// One flow point per radius from pooled samples; pure in its inputs.
pub fn analyse_samples(cfg: &RunConfig, samples: &Samples) -> Result<Vec<FlowPoint>> {
    let mut points = Vec::new();
    for k in 0..cfg.run.r_grid.len() {
        let (recs, boxes) = grid_samples(samples, k);
        let Some(first) = recs.first() else {
            return Err(Error::Dependency {
                stage: "sample".into(),
                path: format!("{CLUSTERS_CSV} (no rows for radius index {k})"),
            });
        };
        let (beta, r) = (first.beta, first.r);
        let cs: Vec<ClusterSample> = recs.iter().map(|c| c.sample.clone()).collect();
        let radii = if cs.iter().all(|s| !s.ball_counts.is_empty()) { cfg.ball_radii(r) } else { Vec::new() };
        let mut pt = flow_point_from_samples(beta, r, &cs, cfg.run.p_max, &radii)?;
        box_observables(cfg, r, &boxes, &mut pt)?;
        points.push(pt);
    }
    Ok(points)
}

/// A flow point on the exact mean-field family `M_p(r)`.
pub fn synthetic_point(alpha: f64, beta: f64, a: f64, p_max: usize, r: f64) -> Result<FlowPoint> {
    if !(beta > 0.0 && alpha > 0.0 && a > 0.0) {
        return Err(Error::domain("synthetic flow needs α, β, A > 0"));
    }
    let m: Vec<f64> = (0..=p_max).map(|p| if p == 0 { 1.0 } else { moment_family(alpha, beta, a, p, r) }).collect();
    let mut pt = FlowPoint::empty(beta, r);
    pt.moment_est = m.iter().map(|&v| Estimate::exact(v)).collect();
    pt.size_biased_mean = Estimate::exact(m[2] / m[1]);
    pt.vertex_factor = Estimate::exact(m[2] / m[1].powi(3));
    pt.chi_ratio = (p_max >= 3).then(|| Estimate::exact(m[3] * m[1] / (m[2] * m[2])));
    Ok(pt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowSource {
    /// Sample first, then analyse the written CSVs.
    Sample,
    /// Analyse existing CSVs.
    FromSamples,
    /// Exact family with amplitude `A`.
    Synthetic { a: f64 },
}

/// Gnuplot script for `log E|K|^p` against `log r` with reference lines of
/// slope `(2p-1)α` through the first point.
pub fn flow_plot_script(points: &[FlowPoint], alpha: f64) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset logscale xy\nset xlabel 'r'\nset ylabel 'E|K|^p'\nset key left top\n");
    let p_max = points.iter().map(|p| p.moment_est.len()).min().unwrap_or(1).saturating_sub(1);
    let mut plots = Vec::new();
    for p in 1..=p_max {
        let slope = (2 * p - 1) as f64 * alpha;
        let (r0, m0) = points.first().map_or((1.0, 1.0), |pt| (pt.r, pt.moment_est[p].mean));
        s.push_str(&format!("ref{p}(x) = {m0:e} * (x / {r0:e})**{slope}\n"));
        plots.push(format!("'{FLOW_CSV}' using 2:(column('moment_{p}')) with points title 'E|K|^{p}'"));
        plots.push(format!("ref{p}(x) with lines dashtype 2 title 'reference slope {slope:.4}'"));
    }
    s.push_str("plot ");
    s.push_str(&plots.join(", \\\n     "));
    s.push('\n');
    s
}

pub fn cmd_flow(ctx: &Context, source: FlowSource) -> Result<Vec<FlowPoint>> {
    let t0 = Instant::now();
    let cfg = ctx.config()?;
    ctx.prepare_out()?;
    let mut man = ctx.manifest("flow");
    let points = match source {
        FlowSource::Synthetic { a } => {
            let beta = resolve_beta(ctx)?;
            cfg.run
                .r_grid
                .iter()
                .map(|&r| synthetic_point(cfg.model.alpha, beta, a, cfg.run.p_max, r))
                .collect::<Result<Vec<_>>>()?
        }
        FlowSource::Sample | FlowSource::FromSamples => {
            if source == FlowSource::Sample {
                cmd_sample(ctx)?;
            }
            let samples = load_samples(ctx)?;
            for (k, _) in cfg.run.r_grid.iter().enumerate() {
                let (recs, boxes) = grid_samples(&samples, k);
                man.sample_counts.insert(format!("clusters_r{k}"), recs.len() as u64);
                if !boxes.is_empty() {
                    man.sample_counts.insert(format!("boxes_r{k}"), boxes.len() as u64);
                }
            }
            analyse_samples(cfg, &samples)?
        }
    };
    for (k, pt) in points.iter().enumerate() {
        let name = flow_point_file(k);
        let mut w = BufWriter::new(File::create(ctx.path(&name))?);
        write_flow_json(&mut w, pt)?;
        w.flush()?;
        man.outputs.push(name);
        if pt.n_samples > 0 {
            man.truncation_rates.insert(format!("clusters_r{k}"), pt.n_truncated as f64 / pt.n_samples as f64);
        }
        let m1 = &pt.moment_est[1];
        println!("r = {:e}  E|K| = {:.6e} ± {:.2e}  V_r = {:.4e}", pt.r, m1.mean, m1.stderr, pt.vertex_factor.mean);
    }
    write_flow_csv(BufWriter::new(File::create(ctx.path(FLOW_CSV))?), &points)?;
    fs::write(ctx.path(FLOW_PLOT), flow_plot_script(&points, cfg.model.alpha))?;
    man.outputs.extend([FLOW_CSV.to_string(), FLOW_PLOT.to_string()]);
    ctx.finish(man, t0)?;
    Ok(points)
}

/// Mean cluster size oracle with common random numbers: sample `i` at the
/// `k`-th radius uses the same stream for every `β`.
fn betac_mean_size(cfg: &RunConfig, seed: u64, workers: usize, beta: f64, k: u32, r: f64) -> Result<(Estimate, u64)> {
    let params = cfg.params(beta)?;
    let sampler = EdgeSampler::new(&params, r);
    let opts = ClusterOptions::new(cfg.run.max_size, 1);
    let samples: Vec<ClusterSample> = with_workers(workers, || {
        (0..cfg.analysis.betac_samples)
            .into_par_iter()
            .map_init(Explorer::new, |ex, i| {
                let mut rng = stream_rng(seed, stream_id(Stage::Betac, k, i));
                ex.sample(&sampler, &opts, &mut rng)
            })
            .collect()
    });
    let trunc = samples.iter().filter(|s| s.truncated).count() as u64;
    if trunc as f64 > MAX_TRUNCATED_FRACTION * samples.len() as f64 {
        // Treated as supercritical by the flatness fit.
        return Ok((Estimate::exact(f64::INFINITY), trunc));
    }
    Ok((estimate_moments(&samples, 2)?.moment_est[1], trunc))
}

pub fn cmd_betac(ctx: &Context) -> Result<BetacEstimate> {
    let t0 = Instant::now();
    let cfg = ctx.config()?;
    ctx.prepare_out()?;
    let a = &cfg.analysis;
    let grid = a.betac_r_grid.clone();
    let mut calls = 0u64;
    let mut truncated = 0u64;
    let oracle = |beta: f64, r: f64| -> Result<Estimate> {
        let k = grid
            .iter()
            .position(|&g| g == r)
            .ok_or_else(|| Error::domain(format!("radius {r} not on the betac grid")))?;
        let (e, t) = betac_mean_size(cfg, ctx.seed, ctx.workers, beta, k as u32, r)?;
        calls += 1;
        truncated += t;
        Ok(e)
    };
    let est = estimate_betac(
        oracle,
        cfg.model.alpha,
        &grid,
        (a.betac_bracket[0], a.betac_bracket[1]),
        BetacOptions {
            resolution: a.betac_resolution,
            max_iter: a.betac_max_iter,
        },
    )?;
    write_json(&ctx.path(BETAC_JSON), &est)?;
    let mut man = ctx.manifest("betac");
    let total = calls * a.betac_samples;
    man.sample_counts.insert("clusters".into(), total);
    man.truncation_rates.insert("clusters".into(), truncated as f64 / total.max(1) as f64);
    man.beta_c = Some(est.beta_hat);
    man.outputs.push(BETAC_JSON.into());
    println!("beta_c = {:.6} [{:.6}, {:.6}] after {} flatness evaluations", est.beta_hat, est.ci.0, est.ci.1, est.profile.len());
    ctx.finish(man, t0)?;
    Ok(est)
}

/// Volume-tail and Laplace-side fits at one radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub grid: u32,
    pub beta: f64,
    pub r: f64,
    pub window: (f64, f64),
    pub tail: Option<TailFit>,
    pub laplace: Option<TailFit>,
    /// Laplace amplitude over `Γ(1/2)` times the tail amplitude; `1` for an
    /// exact `n^{-1/2}` tail.
    pub karamata_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn tail_row(cfg: &RunConfig, k: usize, recs: &[&ClusterRecord]) -> TailRow {
    let max_size = cfg.run.max_size;
    let window = cfg
        .analysis
        .tail_window
        .map(|[lo, hi]| (lo, hi))
        .unwrap_or_else(|| default_tail_window(max_size));
    let samples: Vec<ClusterSample> = recs.iter().map(|c| c.sample.clone()).collect();
    let mut row = TailRow {
        grid: k as u32,
        beta: recs.first().map_or(f64::NAN, |c| c.beta),
        r: recs.first().map_or(f64::NAN, |c| c.r),
        window,
        tail: None,
        laplace: None,
        karamata_ratio: None,
        error: None,
    };
    let min_decades = cfg.analysis.min_decades;
    match estimate_volume_tail_with(&samples, max_size, Some(window), min_decades) {
        Ok(t) => row.tail = Some(t),
        Err(e) => row.error = Some(e.to_string()),
    }
    let sizes: Vec<f64> = samples.iter().map(|s| s.size as f64).collect();
    let h = log_grid(1.0 / window.1, 1.0 / window.0, 20);
    let opts = FitOptions {
        window: None,
        index_candidate: Some(0.5),
        min_decades,
    };
    match fit_laplace_profile(&laplace_profile(&sizes, &h), opts) {
        Ok(l) => row.laplace = Some(l),
        Err(e) => {
            row.error.get_or_insert_with(|| e.to_string());
        }
    }
    if let (Some(t), Some(l)) = (&row.tail, &row.laplace) {
        row.karamata_ratio = Some(l.amplitude / (gamma(0.5) * t.amplitude));
    }
    row
}

pub fn cmd_tail(ctx: &Context) -> Result<Vec<TailRow>> {
    let t0 = Instant::now();
    let cfg = ctx.config()?;
    let samples = load_samples(ctx)?;
    let mut man = ctx.manifest("tail");
    let mut rows = Vec::new();
    for k in 0..cfg.run.r_grid.len() {
        let (recs, _) = grid_samples(&samples, k);
        if recs.is_empty() {
            return Err(Error::Dependency {
                stage: "sample".into(),
                path: format!("{CLUSTERS_CSV} (no rows for radius index {k})"),
            });
        }
        let row = tail_row(cfg, k, &recs);
        man.sample_counts.insert(format!("clusters_r{k}"), recs.len() as u64);
        match &row.tail {
            Some(t) => println!(
                "r = {:e}  slope = {:.4} ± {:.4}  amplitude = {:.4} ± {:.4}  power_law = {}",
                row.r, t.slope, t.slope_ci, t.amplitude, t.amplitude_ci, t.power_law
            ),
            None => println!("r = {:e}  tail fit failed: {}", row.r, row.error.as_deref().unwrap_or("")),
        }
        rows.push(row);
    }
    write_json(&ctx.path(TAIL_JSON), &rows)?;
    man.outputs.push(TAIL_JSON.into());
    ctx.finish(man, t0)?;
    if rows.iter().all(|r| r.tail.is_none()) {
        let why = rows[0].error.clone().unwrap_or_default();
        return Err(Error::Fit(format!("no radius produced a tail fit; first failure: {why}")));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeCase {
    Riccati,
    Hierarchy,
    Gyration,
    Displacement,
}

impl OdeCase {
    pub fn name(self) -> &'static str {
        match self {
            OdeCase::Riccati => "riccati",
            OdeCase::Hierarchy => "hierarchy",
            OdeCase::Gyration => "gyration",
            OdeCase::Displacement => "displacement",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeArgs {
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub p_max: usize,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyReport {
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub p_max: usize,
    /// Largest relative deviation from the exact family over the grid.
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementReport {
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
    pub final_scaled: Vec<f64>,
    /// `w_p / w_1^p` at the last radius.
    pub gaussian_ratios: Vec<f64>,
}

fn ode_file(case: OdeCase) -> String {
    format!("ode_{}.json", case.name())
}

pub fn cmd_ode(ctx: &Context, case: OdeCase, args: OdeArgs) -> Result<()> {
    let t0 = Instant::now();
    ctx.prepare_out()?;
    let mut man = ctx.manifest("ode");
    let name = ode_file(case);
    let tight = OdeOptions::tol(1e-12, 1e-14);
    match case {
        OdeCase::Riccati => {
            let h = Profile::Power { c: 0.4, b: -0.5 };
            let r = log_grid(1.0, 1e3, 30);
            let c: RiccatiCheck = riccati_check(args.a, args.alpha, &h, &r, 1e9, tight)?;
            println!("riccati residual = {:.3e} ({})", c.max_rel_err, if c.max_rel_err < 1e-8 { "< 1e-8" } else { ">= 1e-8" });
            write_json(&ctx.path(&name), &c)?;
        }
        OdeCase::Hierarchy => {
            let r = log_grid(1.0, 1e3, 30);
            let states = integrate_moment_hierarchy(args.alpha, args.beta, args.a, args.p_max, 1.0, None, &r, tight)?;
            let fam = |p: usize, r: f64| moment_family(args.alpha, args.beta, args.a, p, r);
            let max_rel_err = states
                .iter()
                .flat_map(|s| s.m.iter().enumerate().map(move |(i, &m)| (m / fam(i + 1, s.r) - 1.0).abs()))
                .fold(0.0, f64::max);
            let csv_name = "ode_hierarchy.csv";
            write_hierarchy_csv(BufWriter::new(File::create(ctx.path(csv_name))?), &states, fam)?;
            man.outputs.push(csv_name.into());
            println!("hierarchy max relative deviation from the exact family = {max_rel_err:.3e}");
            let rep = HierarchyReport {
                alpha: args.alpha,
                beta: args.beta,
                a: args.a,
                p_max: args.p_max,
                max_rel_err,
            };
            write_json(&ctx.path(&name), &rep)?;
        }
        OdeCase::Gyration => {
            let norm = NormSpec::new(NormFamily::ScaledSup, args.d)?;
            let u = unit_direction(args.d);
            let bm = ball_moment(&norm, 1, &u)? * args.d as f64;
            let r = log_grid(1.0, 1e4, 40);
            let rep: GyrationReport = gyration_flow(args.alpha, args.beta, bm, 1.0, 0.0, &r, tight)?;
            println!("gyration {:?}: extracted = {:.6e}, predicted = {:.6e}", rep.regime, rep.extracted, rep.predicted);
            write_json(&ctx.path(&name), &rep)?;
        }
        OdeCase::Displacement => {
            let norm = NormSpec::new(NormFamily::ScaledSup, args.d)?;
            let u = unit_direction(args.d);
            let m = (0..=args.p_max as u32).map(|c| ball_moment(&norm, c, &u)).collect::<Result<Vec<_>>>()?;
            let r = log_grid(1.0, 1e4, 40);
            let traj = displacement_flow(args.alpha, args.beta, args.p_max, &m, 1.0, &r, tight)?;
            let rep = DisplacementReport {
                alpha: args.alpha,
                beta: args.beta,
                r: *r.last().unwrap(),
                final_scaled: traj.final_scaled().to_vec(),
                gaussian_ratios: traj.gaussian_ratios(),
            };
            for (p, g) in rep.gaussian_ratios.iter().enumerate() {
                println!("p = {}  w_p / w_1^p = {g:.6e}", p + 1);
            }
            write_json(&ctx.path(&name), &rep)?;
        }
    }
    man.outputs.insert(0, name);
    ctx.finish(man, t0)
}

fn unit_direction(d: usize) -> Vec<f64> {
    let mut u = vec![0.0; d];
    u[0] = 1.0;
    u
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramsReport {
    pub n: usize,
    pub count: usize,
    /// `(2n-3)!!` as a decimal string.
    pub expected: String,
    pub trees: Vec<String>,
    pub convolution: ConvolutionCheck,
}

pub fn cmd_diagrams(ctx: &Context, n: usize) -> Result<DiagramsReport> {
    let t0 = Instant::now();
    ctx.prepare_out()?;
    let trees = enumerate_trees(n)?;
    let rep = DiagramsReport {
        n,
        count: trees.len(),
        expected: double_factorial(2 * n as i64 - 3)?.to_string(),
        trees: trees.iter().map(|t| t.canonical_code()).collect(),
        convolution: verify_convolution_identity(n as u64)?,
    };
    println!("{} trees with {} labelled leaves ((2n-3)!! = {})", rep.count, n + 1, rep.expected);
    for t in &rep.trees {
        println!("{t}");
    }
    println!(
        "convolution identity at n = {}: {} = {} ({})",
        n,
        rep.convolution.lhs,
        rep.convolution.rhs,
        if rep.convolution.holds { "holds" } else { "FAILS" }
    );
    let name = "diagrams.json";
    write_json(&ctx.path(name), &rep)?;
    let mut man = ctx.manifest("diagrams");
    man.outputs.push(name.into());
    ctx.finish(man, t0)?;
    Ok(rep)
}

pub fn cmd_superproc(ctx: &Context, alpha: f64, d: usize, norm: NormFamily, p_max: usize) -> Result<CoefficientTable> {
    let t0 = Instant::now();
    ctx.prepare_out()?;
    let spec = NormSpec::new(norm, d)?;
    let law = if alpha < 2.0 {
        DisplacementLaw::stable(spec, alpha, DEFAULT_EPS)?
    } else {
        DisplacementLaw::isotropic_laplace(d)?
    };
    let table = law.coefficient_table(&unit_direction(d), p_max)?;
    println!("branch {:?}, max recurrence/egf discrepancy {:.2e}", table.branch, table.max_rel_discrepancy);
    for (p, (a, g)) in table.a.iter().zip(&table.a_egf).enumerate() {
        println!("A_{:<2} = {a:.10e}   (egf {g:.10e})", 2 * p);
    }
    let name = "superproc.json";
    write_json(&ctx.path(name), &table)?;
    let mut man = ctx.manifest("superproc");
    man.outputs.push(name.into());
    ctx.finish(man, t0)?;
    Ok(table)
}

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub quantity: String,
    pub beta: f64,
    pub r: f64,
    pub value: f64,
    pub stderr: f64,
}

fn read_flow_points(dir: &Path) -> Result<Vec<FlowPoint>> {
    let mut pts = Vec::new();
    for k in 0.. {
        let p = dir.join(flow_point_file(k));
        if !p.exists() {
            break;
        }
        pts.push(serde_json::from_reader(BufReader::new(File::open(p)?))?);
    }
    Ok(pts)
}

fn row(quantity: impl Into<String>, beta: f64, r: f64, e: Estimate) -> ReportRow {
    ReportRow {
        quantity: quantity.into(),
        beta,
        r,
        value: e.mean,
        stderr: e.stderr,
    }
}

/// Gathers every stage JSON in the output directory into `report.csv`.
pub fn cmd_report(ctx: &Context) -> Result<Vec<ReportRow>> {
    let t0 = Instant::now();
    let points = read_flow_points(&ctx.out)?;
    let betac: Option<BetacEstimate> = match File::open(ctx.path(BETAC_JSON)) {
        Ok(f) => Some(serde_json::from_reader(BufReader::new(f))?),
        Err(_) => None,
    };
    let tails: Vec<TailRow> = match File::open(ctx.path(TAIL_JSON)) {
        Ok(f) => serde_json::from_reader(BufReader::new(f))?,
        Err(_) => Vec::new(),
    };
    if points.is_empty() && betac.is_none() && tails.is_empty() {
        return Err(Error::Dependency {
            stage: "flow".into(),
            path: ctx.path(&flow_point_file(0)).display().to_string(),
        });
    }
    let d = ctx.config.as_ref().map_or(1, |c| c.model.d);
    let mut rows = Vec::new();
    for pt in &points {
        let (b, r) = (pt.beta, pt.r);
        for (p, m) in pt.moment_est.iter().enumerate().skip(1) {
            rows.push(row(format!("E|K|^{p}"), b, r, *m));
        }
        if let Some(g) = pt.gyration2 {
            let xi = g.mean.max(0.0).sqrt();
            rows.push(row("xi_2", b, r, Estimate { mean: xi, stderr: g.stderr / (2.0 * xi) }));
        }
        rows.push(row("V_r", b, r, pt.vertex_factor));
        if let Some(c) = pt.chi_ratio {
            rows.push(row("chi_ratio", b, r, c));
        }
        if let Some(m) = pt.edian {
            rows.push(row("M_r", b, r, Estimate::exact(m as f64)));
        }
        if let Some(t) = pt.triangle_sup {
            rows.push(row("triangle_sup", b, r, Estimate::exact(t)));
        }
    }
    let with_moments: Vec<FlowPoint> = points.iter().filter(|p| p.moment_est.len() > 2).cloned().collect();
    if !with_moments.is_empty() {
        for s in scaling_functions(&with_moments, d)? {
            rows.push(row("zeta", s.beta, s.r, s.zeta));
            rows.push(row("eta", s.beta, s.r, s.eta));
            rows.push(row("N", s.beta, s.r, s.n_clusters));
        }
    }
    for t in &tails {
        if let Some(f) = &t.tail {
            rows.push(row("tail_slope", t.beta, t.r, Estimate { mean: f.slope, stderr: f.slope_ci / 1.96 }));
            rows.push(row("tail_amplitude", t.beta, t.r, Estimate { mean: f.amplitude, stderr: f.amplitude_ci / 1.96 }));
        }
    }
    if let Some(b) = &betac {
        let half = (b.ci.1 - b.ci.0) / 2.0;
        rows.push(row("beta_c", b.beta_hat, f64::NAN, Estimate { mean: b.beta_hat, stderr: half / 1.96 }));
    }
    ctx.prepare_out()?;
    let mut wr = csv::Writer::from_writer(BufWriter::new(File::create(ctx.path(REPORT_CSV))?));
    for r in &rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    println!("{:<16} {:>10} {:>12} {:>16} {:>12}", "quantity", "beta", "r", "value", "stderr");
    for r in &rows {
        println!("{:<16} {:>10.6} {:>12.4e} {:>16.8e} {:>12.4e}", r.quantity, r.beta, r.r, r.value, r.stderr);
    }
    let mut man = ctx.manifest("report");
    man.beta_c = betac.map(|b| b.beta_hat);
    man.outputs.push(REPORT_CSV.into());
    ctx.finish(man, t0)?;
    Ok(rows)
}
