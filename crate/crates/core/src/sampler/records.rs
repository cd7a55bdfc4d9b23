use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cluster::{ClusterOptions, ClusterSample, Explorer};
use super::neighbors::EdgeSampler;
use crate::error::{Error, Result};
use crate::rng::{stream_id, stream_rng, Stage};

/// One sampled cluster together with the stream it was drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub grid: u32,
    pub index: u64,
    pub stream: u64,
    pub beta: f64,
    pub r: f64,
    pub sample: ClusterSample,
}

/// Runs `f` on a pool of `workers` threads (0 = rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Draws `n` clusters; sample `i` uses stream `(Cluster, grid, i)`, so the
/// output does not depend on the number of worker threads.
pub fn sample_clusters(
    sampler: &EdgeSampler,
    opts: &ClusterOptions,
    seed: u64,
    grid: u32,
    n: u64,
    workers: usize,
) -> Vec<ClusterRecord> {
    with_workers(workers, || {
        (0..n)
            .into_par_iter()
            .map_init(Explorer::new, |ex, i| {
                let stream = stream_id(Stage::Cluster, grid, i);
                let mut rng = stream_rng(seed, stream);
                ClusterRecord {
                    grid,
                    index: i,
                    stream,
                    beta: sampler.params.beta,
                    r: sampler.r,
                    sample: ex.sample(sampler, opts, &mut rng),
                }
            })
            .collect()
    })
}

fn header(p_max: usize, n_balls: usize) -> Vec<String> {
    let mut h: Vec<String> = ["grid", "index", "stream", "beta", "r", "size", "truncated"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..=p_max).map(|p| format!("spatial_sum_{p}")));
    h.extend((0..n_balls).map(|k| format!("ball_count_{k}")));
    h
}

/// Writes records as CSV with a header row. Floats use Rust's shortest
/// round-trip formatting, so reading back is lossless.
pub fn write_cluster_csv<W: Write>(w: W, records: &[ClusterRecord]) -> Result<()> {
    let p_max = records.first().map_or(0, |r| r.sample.spatial_sums.len().saturating_sub(1));
    let n_balls = records.first().map_or(0, |r| r.sample.ball_counts.len());
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header(p_max, n_balls))?;
    for rec in records {
        let s = &rec.sample;
        let mut row = vec![
            rec.grid.to_string(),
            rec.index.to_string(),
            rec.stream.to_string(),
            rec.beta.to_string(),
            rec.r.to_string(),
            s.size.to_string(),
            (s.truncated as u8).to_string(),
        ];
        row.extend(s.spatial_sums.iter().map(|v| v.to_string()));
        row.extend(s.ball_counts.iter().map(|v| v.to_string()));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_cluster_csv<R: Read>(r: R) -> Result<Vec<ClusterRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let hdr = rd.headers()?.clone();
    let n_sums = hdr.iter().filter(|h| h.starts_with("spatial_sum_")).count();
    let n_balls = hdr.iter().filter(|h| h.starts_with("ball_count_")).count();
    if hdr.len() != 7 + n_sums + n_balls || n_sums == 0 {
        return Err(Error::Config("unrecognized cluster CSV header".into()));
    }
    let bad = |e: String| Error::Config(format!("malformed cluster CSV: {e}"));
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let f = |i: usize| row[i].parse::<f64>().map_err(|e| bad(e.to_string()));
        let u = |i: usize| row[i].parse::<u64>().map_err(|e| bad(e.to_string()));
        let spatial_sums = (0..n_sums).map(|k| f(7 + k)).collect::<Result<Vec<_>>>()?;
        let ball_counts = (0..n_balls).map(|k| u(7 + n_sums + k)).collect::<Result<Vec<_>>>()?;
        out.push(ClusterRecord {
            grid: u(0)? as u32,
            index: u(1)?,
            stream: u(2)?,
            beta: f(3)?,
            r: f(4)?,
            sample: ClusterSample {
                size: u(5)?,
                truncated: u(6)? != 0,
                spatial_sums,
                ball_counts,
                vertices: None,
            },
        });
    }
    Ok(out)
}
