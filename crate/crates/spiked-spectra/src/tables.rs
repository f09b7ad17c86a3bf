//! Law tabulation with an on-disk cache.

use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use serde_json::json;
use spiked_core::laws::{f_k, g_k, Family, LawSpec, LawTable};

use crate::config::{hash_json, LawConfig, RunConfig, VERSION};
use crate::output::{output_path, write_guarded, Cell, Manifest, Table, WriteOutcome};

/// `law(x)` at every point, evaluated in parallel; the first failing `x` aborts.
pub fn evaluate(law: &LawSpec, points: &[f64], nodes: usize) -> Result<Vec<f64>> {
    points
        .par_iter()
        .map(|&x| {
            match law.family {
                Family::TracyWidomGeneralized => f_k(law.k, x, nodes),
                Family::GueEdge => g_k(law.k, x),
            }
            .map_err(|e| anyhow!("law evaluation failed at x = {x}: {e}"))
        })
        .collect()
}

/// Interpolation table of `law` on `[lo, hi]` with spacing `step`.
pub fn law_table(law: &LawSpec, lo: f64, hi: f64, step: f64) -> Result<LawTable> {
    let count = ((hi - lo) / step).round() as usize + 1;
    let xs: Vec<f64> = (0..count).map(|i| lo + step * i as f64).collect();
    let values = evaluate(law, &xs, spiked_core::laws::DEFAULT_NODES)?;
    Ok(LawTable::from_values(xs, values))
}

/// Cache key document: family, k, grid, nodes and version.
pub fn law_key(law: &LawConfig) -> Result<serde_json::Value> {
    Ok(json!({
        "family": law.family,
        "k": law.k,
        "grid": law.grid.points()?,
        "nodes": law.nodes,
        "version": VERSION,
    }))
}

/// Result of `tabulate-law`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulateOutcome {
    /// Table path.
    pub csv: PathBuf,
    /// Manifest path.
    pub manifest: PathBuf,
    /// Whether the table bytes came from the cache.
    pub cache_hit: bool,
    /// What happened to the table file.
    pub written: WriteOutcome,
}

/// Tabulate the configured law to `<out>/law-<hash>.csv`.
pub fn cmd_tabulate_law(cfg: &RunConfig, force: bool) -> Result<TabulateOutcome> {
    let key = law_key(&cfg.law)?;
    let hash = hash_json(&key);
    let csv = output_path(&cfg.out, "law", &hash, "csv");
    let manifest = output_path(&cfg.out, "law", &hash, "json");
    if csv.exists() && !force {
        return Ok(TabulateOutcome { csv, manifest, cache_hit: false, written: WriteOutcome::Kept });
    }
    let cached = cfg.cache_dir().map(|d| d.join(format!("law-{hash}.csv")));
    let (bytes, cache_hit) = match &cached {
        Some(p) if p.exists() => (fs::read(p).with_context(|| format!("reading cache {}", p.display()))?, true),
        _ => {
            let spec = cfg.law.spec()?;
            let points = cfg.law.grid.points()?;
            let values = evaluate(&spec, &points, cfg.law.nodes)?;
            let mut t = Table::new(&["x", "value"]);
            t.rows = points.iter().zip(&values).map(|(&x, &v)| vec![Cell::Float(x), Cell::Float(v)]).collect();
            let bytes = t.to_bytes(&hash)?;
            if let Some(p) = &cached {
                write_guarded(p, &bytes, true)?;
            }
            (bytes, false)
        }
    };
    let written = write_guarded(&csv, &bytes, true)?;
    let mut m = Manifest::new("tabulate-law", &hash, key);
    m.reference("outputs", &csv, &bytes);
    write_guarded(&manifest, &m.to_bytes()?, true)?;
    Ok(TabulateOutcome { csv, manifest, cache_hit, written })
}
