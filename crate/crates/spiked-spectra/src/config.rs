//! Run configuration: one JSON document, overridden field by field by CLI flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spiked_core::laws::{Family, LawSpec, Side, Spike, SpikedModel};

/// Artifact version embedded in every output.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable naming the law-table cache directory.
pub const CACHE_ENV: &str = "SPIKED_SPECTRA_CACHE";

/// Spike as written in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikeSpec {
    /// Population eigenvalue.
    pub value: f64,
    /// Repeats.
    #[serde(default = "one")]
    pub multiplicity: usize,
}

fn one() -> usize {
    1
}

/// Model block: `N` with either `M` or `γ` (then `M = ⌈γ²N⌉`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    /// Dimension.
    pub n: Option<usize>,
    /// Sample count.
    pub m: Option<usize>,
    /// Aspect ratio `√(M/N)`.
    pub gamma: Option<f64>,
    /// Spikes.
    pub spikes: Vec<SpikeSpec>,
}

impl ModelSpec {
    /// Validated core model.
    pub fn build(&self) -> Result<SpikedModel> {
        let n = self.n.context("model.n is required")?;
        let spikes: Vec<Spike> = self.spikes.iter().map(|s| Spike::new(s.value, s.multiplicity)).collect();
        let model = match (self.m, self.gamma) {
            (Some(m), None) => SpikedModel::new(n, m, spikes)?,
            (None, Some(g)) => SpikedModel::with_gamma(n, g, spikes)?,
            (Some(m), Some(g)) => {
                let model = SpikedModel::with_gamma(n, g, spikes)?;
                if model.m != m {
                    bail!("model.m = {m} disagrees with ceil(gamma^2 N) = {}", model.m);
                }
                model
            }
            (None, None) => bail!("model needs m or gamma"),
        };
        Ok(model)
    }
}

/// Law family as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum FamilyName {
    /// Generalized Tracy–Widom `F_k`.
    F,
    /// GUE-edge law `G_k`.
    G,
}

/// Evaluation grid: explicit points, or `lo..=hi` in steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Left end.
    #[serde(default)]
    pub lo: Option<f64>,
    /// Right end.
    #[serde(default)]
    pub hi: Option<f64>,
    /// Spacing.
    #[serde(default)]
    pub step: Option<f64>,
    /// Explicit points (take precedence).
    #[serde(default)]
    pub points: Option<Vec<f64>>,
}

impl GridSpec {
    /// Grid points in order.
    pub fn points(&self) -> Result<Vec<f64>> {
        if let Some(p) = &self.points {
            if p.is_empty() || p.iter().any(|x| !x.is_finite()) {
                bail!("grid.points must be finite and nonempty");
            }
            return Ok(p.clone());
        }
        let (lo, hi, step) = match (self.lo, self.hi, self.step) {
            (Some(a), Some(b), Some(s)) => (a, b, s),
            _ => bail!("grid needs points or lo, hi and step"),
        };
        if !(lo.is_finite() && hi >= lo && step > 0.0) {
            bail!("grid needs lo <= hi and step > 0");
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| lo + step * i as f64).collect())
    }
}

/// Law block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LawConfig {
    /// Family.
    pub family: FamilyName,
    /// Index `k`.
    pub k: usize,
    /// Grid.
    pub grid: GridSpec,
    /// Nyström nodes for `F_k`.
    pub nodes: usize,
}

impl Default for LawConfig {
    fn default() -> Self {
        LawConfig {
            family: FamilyName::F,
            k: 0,
            grid: GridSpec { lo: Some(-8.0), hi: Some(5.0), step: Some(0.1), points: None },
            nodes: spiked_core::laws::DEFAULT_NODES,
        }
    }
}

impl LawConfig {
    /// Unit-scale law descriptor (`μ = 0`, `ν = 1`).
    pub fn spec(&self) -> Result<LawSpec> {
        let (family, alpha) = match self.family {
            FamilyName::F => (Family::TracyWidomGeneralized, 2.0 / 3.0),
            FamilyName::G => (Family::GueEdge, 0.5),
        };
        if family == Family::GueEdge && self.k == 0 {
            bail!("family G needs k >= 1");
        }
        Ok(LawSpec { family, k: self.k, side: Side::Max, mu: 0.0, nu: 1.0, alpha })
    }
}

/// Monte Carlo block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    /// Replicates.
    pub replicates: usize,
    /// Master seed.
    pub seed: u64,
    /// Worker threads (0 = all cores). Never affects results.
    pub jobs: usize,
    /// Use the dense eigensolver instead of the banded factor.
    pub dense: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { replicates: 1000, seed: 0, jobs: 0, dense: false }
    }
}

/// Inputs of the two-sided test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestConfig {
    /// Observed smallest eigenvalue of `S`.
    pub lambda_min: Option<f64>,
    /// Observed largest eigenvalue of `S`.
    pub lambda_max: Option<f64>,
    /// Level.
    pub alpha: f64,
    /// Samples CSV written by `simulate`, tested row by row.
    pub samples: Option<PathBuf>,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig { lambda_min: None, lambda_max: None, alpha: 0.05, samples: None }
    }
}

/// Whole configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Model.
    pub model: ModelSpec,
    /// Law tabulation.
    pub law: LawConfig,
    /// Monte Carlo.
    pub mc: McConfig,
    /// Two-sided test.
    pub test: TestConfig,
    /// Output directory.
    pub out: PathBuf,
    /// Law-table cache directory (falls back to `SPIKED_SPECTRA_CACHE`).
    pub cache: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelSpec::default(),
            law: LawConfig::default(),
            mc: McConfig::default(),
            test: TestConfig::default(),
            out: PathBuf::from("out"),
            cache: None,
        }
    }
}

impl RunConfig {
    /// Parse a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Cache directory from the config or the environment.
    pub fn cache_dir(&self) -> Option<PathBuf> {
        self.cache.clone().or_else(|| std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
    }
}

/// SHA-256 of the canonical (sorted-key) JSON form of `value`, hex encoded.
pub fn hash_json(value: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

/// SHA-256 of raw bytes, hex encoded.
pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
