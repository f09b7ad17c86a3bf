//! Parallel replicate sampling with ordered collection.

use std::path::PathBuf;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde_json::json;
use spiked_core::ensemble::{EnsembleRun, ExtremeSamples, Sampler};
use spiked_core::laws::{scaling_for, Side, SpikedModel};

use crate::config::{hash_json, RunConfig};
use crate::output::{output_path, write_guarded, Cell, Manifest, Table, WriteOutcome};

/// Thread pool with `jobs` workers (0 = rayon default).
pub fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().context("building thread pool")
}

/// Sample every replicate of `run`; results are indexed, so `jobs` never changes them.
pub fn sample_parallel(run: &EnsembleRun, sampler: Sampler, jobs: usize) -> Result<ExtremeSamples> {
    let results: Vec<_> =
        pool(jobs)?.install(|| (0..run.replicates).into_par_iter().map(|i| run.replicate(i, sampler)).collect());
    Ok(ExtremeSamples::collect(results))
}

/// Model parameters as recorded in manifests and hashes.
pub fn model_json(model: &SpikedModel) -> serde_json::Value {
    json!({
        "n": model.n,
        "m": model.m,
        "gamma": model.gamma,
        "spikes": model.spikes.iter().map(|s| json!({"value": s.value, "multiplicity": s.multiplicity})).collect::<Vec<_>>(),
    })
}

/// Result of `simulate`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutcome {
    /// Samples path.
    pub csv: PathBuf,
    /// Manifest path.
    pub manifest: PathBuf,
    /// Rows written (replicates that did not fail).
    pub rows: usize,
    /// Failed replicate indices.
    pub failures: Vec<usize>,
    /// What happened to the samples file.
    pub written: WriteOutcome,
}

/// Sample `(λ_min, λ_max)` for every replicate and write them with their scaled values.
pub fn cmd_simulate(cfg: &RunConfig, force: bool) -> Result<SimulateOutcome> {
    let model = cfg.model.build()?;
    let sampler = if cfg.mc.dense { Sampler::Dense } else { Sampler::Banded };
    let key = json!({
        "model": model_json(&model),
        "replicates": cfg.mc.replicates,
        "seed": cfg.mc.seed,
        "sampler": if cfg.mc.dense { "dense" } else { "banded" },
    });
    let hash = hash_json(&key);
    let csv = output_path(&cfg.out, "samples", &hash, "csv");
    let manifest = output_path(&cfg.out, "samples", &hash, "json");
    if csv.exists() && !force {
        return Ok(SimulateOutcome { csv, manifest, rows: 0, failures: vec![], written: WriteOutcome::Kept });
    }
    let run = EnsembleRun::new(model.clone(), cfg.mc.replicates, cfg.mc.seed)?;
    let samples = sample_parallel(&run, sampler, cfg.mc.jobs)?;
    let (lmin, lmax) = (scaling_for(&model, Side::Min)?, scaling_for(&model, Side::Max)?);
    let mut t = Table::new(&["replicate", "stream_id", "lambda_min", "lambda_max", "scaled_min", "scaled_max"]);
    for (&i, &(lo, hi)) in samples.indices.iter().zip(&samples.pairs) {
        t.rows.push(vec![
            Cell::Int(i as u64),
            Cell::Int(run.stream_id(i)),
            Cell::Float(lo),
            Cell::Float(hi),
            Cell::Float(lmin.scale(lo, model.m)),
            Cell::Float(lmax.scale(hi, model.m)),
        ]);
    }
    let bytes = t.to_bytes(&hash)?;
    let written = write_guarded(&csv, &bytes, true)?;
    let mut m = Manifest::new("simulate", &hash, key);
    m.set("derived_m", model.m);
    m.set("failures", samples.failures.clone());
    m.set(
        "laws",
        json!({
            "min": {"family": format!("{:?}", lmin.family), "k": lmin.k, "mu": lmin.mu, "nu": lmin.nu, "alpha": lmin.alpha},
            "max": {"family": format!("{:?}", lmax.family), "k": lmax.k, "mu": lmax.mu, "nu": lmax.nu, "alpha": lmax.alpha},
        }),
    );
    m.reference("outputs", &csv, &bytes);
    write_guarded(&manifest, &m.to_bytes()?, true)?;
    Ok(SimulateOutcome {
        csv,
        manifest,
        rows: samples.pairs.len(),
        failures: samples.failures.clone(),
        written,
    })
}
