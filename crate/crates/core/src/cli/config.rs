use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{KernelSpec, ModelParams, NormFamily, NormSpec, MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    PurePower,
    Smoothed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub d: usize,
    pub alpha: f64,
    #[serde(default = "default_norm")]
    pub norm: NormFamily,
    #[serde(default = "default_kernel")]
    pub kernel: KernelKind,
    /// Spread `L` of the smoothed kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
}

fn default_norm() -> NormFamily {
    NormFamily::ScaledSup
}

fn default_kernel() -> KernelKind {
    KernelKind::PurePower
}

/// `β` as a number, or `"critical"` for the estimate written by `betac`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaSpec {
    Value(f64),
    Named(String),
}

impl Default for BetaSpec {
    fn default() -> Self {
        BetaSpec::Named("critical".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunBlock {
    pub beta: BetaSpec,
    pub r_grid: Vec<f64>,
    /// Cluster samples per `r`.
    pub samples: u64,
    /// Box configurations per `r` for the edian; 0 disables them.
    pub box_samples: u64,
    pub max_size: u64,
    pub p_max: usize,
    pub seed: u64,
    pub workers: usize,
    /// Two-point radii run over `[r·ball_lo, r·ball_hi]`.
    pub ball_lo: f64,
    pub ball_hi: f64,
    pub ball_per_decade: usize,
}

impl Default for RunBlock {
    fn default() -> Self {
        Self {
            beta: BetaSpec::default(),
            r_grid: vec![1e2, 1e3, 1e4],
            samples: 10_000,
            box_samples: 0,
            max_size: 10_000_000,
            p_max: 3,
            seed: 1,
            workers: 0,
            ball_lo: 1e-3,
            ball_hi: 1e-1,
            ball_per_decade: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_window: Option<[f64; 2]>,
    pub min_decades: f64,
    pub betac_bracket: [f64; 2],
    pub betac_resolution: f64,
    pub betac_max_iter: usize,
    /// Radii of the flatness fit; the top decade is used.
    pub betac_r_grid: Vec<f64>,
    pub betac_samples: u64,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        Self {
            tail_window: None,
            min_decades: 1.5,
            betac_bracket: [0.3, 0.6],
            betac_resolution: 1e-3,
            betac_max_iter: 20,
            betac_r_grid: vec![1e3, 3e3, 1e4],
            betac_samples: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: PathBuf,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub analysis: AnalysisBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{key}`: {msg}"))
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("{v} must be a positive finite number")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Range checks of every numeric field.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if m.d == 0 || m.d > MAX_DIM {
            return Err(bad("model.d", format!("{} outside 1..={MAX_DIM}", m.d)));
        }
        positive("model.alpha", m.alpha)?;
        match (m.kernel, m.l) {
            (KernelKind::Smoothed, None) => return Err(bad("model.l", "required by the smoothed kernel")),
            (KernelKind::Smoothed, Some(l)) => positive("model.l", l)?,
            (KernelKind::PurePower, Some(_)) => return Err(bad("model.l", "only valid for the smoothed kernel")),
            (KernelKind::PurePower, None) => {}
        }
        let r = &self.run;
        match &r.beta {
            BetaSpec::Value(b) if !(*b >= 0.0 && b.is_finite()) => return Err(bad("run.beta", format!("{b} must be finite and ≥ 0"))),
            BetaSpec::Named(s) if s != "critical" => return Err(bad("run.beta", format!("expected a number or \"critical\", got {s:?}"))),
            _ => {}
        }
        if r.r_grid.is_empty() {
            return Err(bad("run.r_grid", "must not be empty"));
        }
        for &v in &r.r_grid {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(bad("run.r_grid", format!("{v} must be finite and ≥ 1")));
            }
        }
        if r.r_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("run.r_grid", "must be strictly increasing"));
        }
        if r.samples < 2 {
            return Err(bad("run.samples", "need at least 2"));
        }
        if r.max_size == 0 {
            return Err(bad("run.max_size", "must be positive"));
        }
        if !(2..=8).contains(&r.p_max) {
            return Err(bad("run.p_max", format!("{} outside 2..=8", r.p_max)));
        }
        if r.workers > 1024 {
            return Err(bad("run.workers", format!("{} exceeds 1024", r.workers)));
        }
        positive("run.ball_lo", r.ball_lo)?;
        positive("run.ball_hi", r.ball_hi)?;
        if r.ball_lo >= r.ball_hi {
            return Err(bad("run.ball_lo", "must be below run.ball_hi"));
        }
        if !(1..=20).contains(&r.ball_per_decade) {
            return Err(bad("run.ball_per_decade", "outside 1..=20"));
        }
        let a = &self.analysis;
        if let Some([lo, hi]) = a.tail_window {
            positive("analysis.tail_window", lo)?;
            if !(hi > lo) {
                return Err(bad("analysis.tail_window", "needs lo < hi"));
            }
        }
        positive("analysis.min_decades", a.min_decades)?;
        let [blo, bhi] = a.betac_bracket;
        if !(blo >= 0.0 && bhi > blo && bhi.is_finite()) {
            return Err(bad("analysis.betac_bracket", "needs 0 ≤ lo < hi"));
        }
        positive("analysis.betac_resolution", a.betac_resolution)?;
        if a.betac_max_iter == 0 || a.betac_max_iter > 60 {
            return Err(bad("analysis.betac_max_iter", "outside 1..=60"));
        }
        if a.betac_r_grid.len() < 2 || a.betac_r_grid.iter().any(|v| !(*v >= 1.0 && v.is_finite())) {
            return Err(bad("analysis.betac_r_grid", "needs at least two radii ≥ 1"));
        }
        if a.betac_samples < 2 {
            return Err(bad("analysis.betac_samples", "need at least 2"));
        }
        Ok(())
    }

    pub fn kernel(&self) -> KernelSpec {
        let m = &self.model;
        match m.kernel {
            KernelKind::PurePower => KernelSpec::pure_power(m.d, m.alpha),
            KernelKind::Smoothed => KernelSpec::smoothed(m.d, m.alpha, m.l.unwrap_or(1.0)),
        }
    }

    pub fn norm(&self) -> Result<NormSpec> {
        NormSpec::new(self.model.norm, self.model.d)
    }

    pub fn params(&self, beta: f64) -> Result<ModelParams> {
        ModelParams::new(self.kernel(), self.norm()?, beta, self.run.seed)
    }

    /// Two-point radii at cut-off `r`.
    pub fn ball_radii(&self, r: f64) -> Vec<f64> {
        let run = &self.run;
        let decades = (run.ball_hi / run.ball_lo).log10();
        let n = (decades * run.ball_per_decade as f64).round().max(1.0) as usize;
        (0..=n).map(|i| r * run.ball_lo * (run.ball_hi / run.ball_lo).powf(i as f64 / n as f64)).collect()
    }
}
