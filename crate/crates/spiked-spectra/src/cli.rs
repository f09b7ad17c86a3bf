//! Argument parsing and subcommand dispatch.
//!
//! Exit status: 0 pass/accept, 1 suite failure or rejection, 2 usage error,
//! 3 runtime error.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use spiked_core::stats::HypothesisTest;

use crate::config::{hash_bytes, hash_json, FamilyName, GridSpec, ModelSpec, RunConfig, SpikeSpec};
use crate::output::{output_path, read_columns, write_guarded, Cell, Manifest, Table, WriteOutcome};
use crate::simulate::{cmd_simulate, model_json};
use crate::tables::cmd_tabulate_law;
use crate::verify::{run_suite, Suite, SuiteParams};

/// Accept, pass.
pub const EXIT_OK: i32 = 0;
/// Reject, suite failure.
pub const EXIT_FAIL: i32 = 1;
/// Bad arguments or config.
pub const EXIT_USAGE: i32 = 2;
/// Anything that went wrong while running.
pub const EXIT_ERROR: i32 = 3;

/// Extreme eigenvalues of spiked complex Wishart matrices.
#[derive(Debug, Parser)]
#[command(name = "spiked-spectra", version)]
pub struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo replicates.
    #[arg(long, global = true)]
    replicates: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate F_k or G_k on a grid.
    TabulateLaw(LawArgs),
    /// Sample extreme eigenvalues of the configured model.
    Simulate(SimArgs),
    /// Run one verification suite.
    Verify(VerifyArgs),
    /// Two-sided test of observed extremes against the configured model.
    HypothesisTest(TestArgs),
}

#[derive(Debug, Args)]
struct LawArgs {
    /// Law family.
    #[arg(long, value_enum)]
    family: Option<FamilyName>,
    /// Index k.
    #[arg(long)]
    k: Option<usize>,
    /// Grid left end.
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<f64>,
    /// Grid right end.
    #[arg(long, allow_hyphen_values = true)]
    hi: Option<f64>,
    /// Grid spacing.
    #[arg(long)]
    step: Option<f64>,
    /// Explicit grid points, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    points: Option<Vec<f64>>,
    /// Quadrature nodes for F_k.
    #[arg(long)]
    nodes: Option<usize>,
    /// Cache directory (else SPIKED_SPECTRA_CACHE).
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Dimension N.
    #[arg(long)]
    n: Option<usize>,
    /// Sample count M.
    #[arg(long)]
    m: Option<usize>,
    /// Aspect ratio sqrt(M/N); M = ceil(gamma^2 N) when M is not given.
    #[arg(long)]
    gamma: Option<f64>,
    /// Spike as value or value:multiplicity; repeatable.
    #[arg(long = "spike", value_parser = parse_spike)]
    spikes: Vec<SpikeSpec>,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Dense eigensolver instead of the banded sampler.
    #[arg(long)]
    dense: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Suite name.
    #[arg(value_enum)]
    suite: Suite,
    /// Main dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Smaller dimension for the KS-decrease check.
    #[arg(long)]
    small_n: Option<usize>,
    /// Monte Carlo replicates of the oracle comparison.
    #[arg(long)]
    oracle_replicates: Option<usize>,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Observed smallest eigenvalue.
    #[arg(long)]
    lambda_min: Option<f64>,
    /// Observed largest eigenvalue.
    #[arg(long)]
    lambda_max: Option<f64>,
    /// Level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Samples CSV from `simulate`; every row is tested.
    #[arg(long)]
    samples: Option<PathBuf>,
}

fn parse_spike(s: &str) -> std::result::Result<SpikeSpec, String> {
    let (v, mult) = match s.split_once(':') {
        Some((v, m)) => (v, m.parse::<usize>().map_err(|e| format!("multiplicity {m:?}: {e}"))?),
        None => (s, 1),
    };
    let value = v.parse::<f64>().map_err(|e| format!("spike value {v:?}: {e}"))?;
    Ok(SpikeSpec { value, multiplicity: mult })
}

fn apply_model(spec: &mut ModelSpec, a: &ModelArgs) {
    if a.n.is_some() {
        spec.n = a.n;
    }
    match (a.m, a.gamma) {
        (Some(m), None) => (spec.m, spec.gamma) = (Some(m), None),
        (None, Some(g)) => (spec.m, spec.gamma) = (None, Some(g)),
        (Some(m), Some(g)) => (spec.m, spec.gamma) = (Some(m), Some(g)),
        (None, None) => {}
    }
    if !a.spikes.is_empty() {
        spec.spikes = a.spikes.clone();
    }
}

fn base_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.mc.seed = s;
    }
    if let Some(r) = g.replicates {
        cfg.mc.replicates = r;
    }
    if let Some(o) = &g.out {
        cfg.out = o.clone();
    }
    if let Some(j) = g.jobs {
        cfg.mc.jobs = j;
    }
    if cfg.mc.replicates == 0 {
        bail!("replicates must be at least 1");
    }
    Ok(cfg)
}

fn written(w: WriteOutcome) -> &'static str {
    match w {
        WriteOutcome::Written => "wrote",
        WriteOutcome::Kept => "kept existing",
    }
}

fn tabulate(g: &GlobalArgs, a: &LawArgs) -> Result<i32> {
    let mut cfg = base_config(g)?;
    if let Some(f) = a.family {
        cfg.law.family = f;
    }
    if let Some(k) = a.k {
        cfg.law.k = k;
    }
    if let Some(n) = a.nodes {
        cfg.law.nodes = n;
    }
    if a.cache.is_some() {
        cfg.cache = a.cache.clone();
    }
    if let Some(p) = &a.points {
        cfg.law.grid = GridSpec { lo: None, hi: None, step: None, points: Some(p.clone()) };
    } else if a.lo.is_some() || a.hi.is_some() || a.step.is_some() {
        let d = &cfg.law.grid;
        cfg.law.grid = GridSpec { lo: a.lo.or(d.lo), hi: a.hi.or(d.hi), step: a.step.or(d.step), points: None };
    }
    let r = cmd_tabulate_law(&cfg, g.force)?;
    println!("{} {}{}", written(r.written), r.csv.display(), if r.cache_hit { " (cache hit)" } else { "" });
    Ok(EXIT_OK)
}

fn simulate(g: &GlobalArgs, a: &SimArgs) -> Result<i32> {
    let mut cfg = base_config(g)?;
    apply_model(&mut cfg.model, &a.model);
    cfg.mc.dense |= a.dense;
    let r = cmd_simulate(&cfg, g.force)?;
    println!("{} {} ({} rows, {} failed replicates)", written(r.written), r.csv.display(), r.rows, r.failures.len());
    Ok(EXIT_OK)
}

fn verify(g: &GlobalArgs, a: &VerifyArgs) -> Result<i32> {
    let cfg = base_config(g)?;
    let mut p = SuiteParams::default();
    if let Some(s) = g.seed {
        p.seed = s;
    }
    if let Some(r) = g.replicates {
        p.replicates = r;
    }
    p.jobs = cfg.mc.jobs;
    if let Some(n) = a.n {
        p.n = n;
    }
    if let Some(n) = a.small_n {
        p.small_n = n;
    }
    if let Some(r) = a.oracle_replicates {
        p.oracle_replicates = r;
    }
    let report = run_suite(a.suite, &p);
    for x in &report.assertions {
        println!("{} {}: {:.6e} (bound {})", if x.pass { "PASS" } else { "FAIL" }, x.name, x.value, x.bound);
    }
    let key = json!({"suite": a.suite.name(), "params": p});
    let hash = hash_json(&key);
    let mut m = Manifest::new("verify", &hash, key);
    m.set("suite", a.suite.name());
    m.set("assertions", serde_json::to_value(&report.assertions)?);
    m.set("pass", report.pass);
    let path = output_path(&cfg.out, &format!("verify-{}", a.suite.name()), &hash, "json");
    let w = write_guarded(&path, &m.to_bytes()?, g.force)?;
    println!("{} {}", written(w), path.display());
    println!("suite {}: {}", a.suite.name(), if report.pass { "PASS" } else { "FAIL" });
    Ok(if report.pass { EXIT_OK } else { EXIT_FAIL })
}

fn hypothesis(g: &GlobalArgs, a: &TestArgs) -> Result<i32> {
    let mut cfg = base_config(g)?;
    apply_model(&mut cfg.model, &a.model);
    if a.lambda_min.is_some() {
        cfg.test.lambda_min = a.lambda_min;
    }
    if a.lambda_max.is_some() {
        cfg.test.lambda_max = a.lambda_max;
    }
    if let Some(al) = a.alpha {
        cfg.test.alpha = al;
    }
    if a.samples.is_some() {
        cfg.test.samples = a.samples.clone();
    }
    let alpha = cfg.test.alpha;
    if !(alpha > 0.0 && alpha < 1.0) {
        bail!("alpha must lie in (0, 1)");
    }
    let model = cfg.model.build()?;
    if let Some(path) = cfg.test.samples.clone() {
        let input = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let cols = read_columns(&path)?;
        let (lo, hi) = match (cols.get("lambda_min"), cols.get("lambda_max")) {
            (Some(a), Some(b)) => (a, b),
            _ => bail!("{} lacks lambda_min/lambda_max columns", path.display()),
        };
        let key = json!({"model": model_json(&model), "alpha": alpha, "samples": hash_bytes(&input)});
        let hash = hash_json(&key);
        let test = HypothesisTest::tabulated(&model, -10.0, 6.0, 0.02)?;
        let mut t = Table::new(&["row", "scaled_min", "scaled_max", "t", "reject"]);
        let mut rejected = 0usize;
        for (i, (&x, &y)) in lo.iter().zip(hi).enumerate() {
            let o = test.run(x, y, alpha)?;
            rejected += o.reject as usize;
            t.rows.push(vec![
                Cell::Int(i as u64),
                Cell::Float(o.scaled_min),
                Cell::Float(o.scaled_max),
                Cell::Float(o.t),
                Cell::Int(o.reject as u64),
            ]);
        }
        let rate = rejected as f64 / lo.len().max(1) as f64;
        let csv = output_path(&cfg.out, "test", &hash, "csv");
        let bytes = t.to_bytes(&hash)?;
        let w = write_guarded(&csv, &bytes, g.force)?;
        let mut m = Manifest::new("hypothesis-test", &hash, key);
        m.reference("inputs", &path, &input);
        m.reference("outputs", &csv, &bytes);
        m.set("rows", lo.len());
        m.set("rejected", rejected);
        m.set("rejection_rate", rate);
        write_guarded(&output_path(&cfg.out, "test", &hash, "json"), &m.to_bytes()?, g.force)?;
        println!("{} {}", written(w), csv.display());
        println!("rejected {rejected} of {} rows (rate {rate:.4}) at alpha = {alpha}", lo.len());
        return Ok(EXIT_OK);
    }
    let (Some(x), Some(y)) = (cfg.test.lambda_min, cfg.test.lambda_max) else {
        bail!("hypothesis-test needs --lambda-min and --lambda-max, or --samples");
    };
    let o = HypothesisTest::new(&model)?.run(x, y, alpha)?;
    let key = json!({"model": model_json(&model), "alpha": alpha, "lambda_min": x, "lambda_max": y});
    let hash = hash_json(&key);
    let mut m = Manifest::new("hypothesis-test", &hash, key);
    m.set("t", o.t);
    m.set("scaled_min", o.scaled_min);
    m.set("scaled_max", o.scaled_max);
    m.set("reject", o.reject);
    let path = output_path(&cfg.out, "test", &hash, "json");
    write_guarded(&path, &m.to_bytes()?, g.force)?;
    println!("T = {:.6e}: {} at alpha = {alpha}", o.t, if o.reject { "reject" } else { "accept" });
    Ok(if o.reject { EXIT_FAIL } else { EXIT_OK })
}

/// Parse `args` (program name first), run, and return the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let r = match &cli.command {
        Command::TabulateLaw(a) => tabulate(&cli.global, a),
        Command::Simulate(a) => simulate(&cli.global, a),
        Command::Verify(a) => verify(&cli.global, a),
        Command::HypothesisTest(a) => hypothesis(&cli.global, a),
    };
    match r {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}
