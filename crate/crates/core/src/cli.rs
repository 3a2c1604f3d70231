//! Command-line front end: `fit`, `simulate` and `summarize`.
//!
//! Exit status: 0 on success, 1 for invalid data or configuration, 2 for
//! bad flags or missing input files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Config, ConfigError, SCHEMA_VERSION};
use crate::draws::{encode_draws, read_draws, write_atomic, DrawsHeader};
use crate::report::build_report;
use crate::sampler::run_chain_with;
use crate::simbench::{
    aggregate, derive_seed, format_aggregate, run_replicate, simulate_cohort, ReplicateRecord, Scenario,
};
use crate::strata::{ingest_dataset, write_dataset};

pub const WORKERS_ENV: &str = "CLBART_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "clbart", version, about = "Conditional logistic BART for case-crossover data")]
pub struct Cli {
    /// Print the default configuration (TOML) and exit.
    #[arg(long)]
    pub print_config: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit CL-BART to a stratified data file.
    Fit(FitArgs),
    /// Run the simulation benchmark.
    Simulate(SimulateArgs),
    /// Summarize an existing draws file.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Delimited file with one row per case or referent day.
    #[arg(long)]
    pub data: PathBuf,
    /// TOML configuration file (see `--print-config`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of trees.
    #[arg(long)]
    pub trees: Option<usize>,
    /// Total MCMC iterations, including burn-in.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Iterations discarded before keeping draws.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Keep every `thin`-th post-burn-in draw.
    #[arg(long)]
    pub thin: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Effect surface: `cart` or `friedman`.
    #[arg(long)]
    pub scenario: Option<Scenario>,
    /// Number of simulated cohorts.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Comma-separated tree counts, e.g. `1,5`.
    #[arg(long, value_delimiter = ',')]
    pub trees: Option<Vec<usize>>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML configuration file (see `--print-config`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Individuals per cohort.
    #[arg(long)]
    pub individuals: Option<usize>,
    /// Follow-up length in days.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Total MCMC iterations, including burn-in.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Iterations discarded before keeping draws.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Keep every `thin`-th post-burn-in draw.
    #[arg(long)]
    pub thin: Option<usize>,
    /// Worker threads (default: $CLBART_WORKERS, else the number of CPUs).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Also write each simulated cohort as `cohort_<r>.csv`, readable by `fit`.
    #[arg(long)]
    pub save_cohorts: bool,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Draws file written by `fit`.
    #[arg(long)]
    pub draws: PathBuf,
    /// TOML configuration file (see `--print-config`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Credible level, overriding the config file.
    #[arg(long)]
    pub level: Option<f64>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Invalid(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Invalid(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Missing { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

/// Written next to every set of outputs; with the `config.toml` written
/// alongside it, enough to rerun the command exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub schema_version: u32,
    pub seed: u64,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub config: Config,
    pub reproduce: String,
}

/// Wall-clock timing, kept out of the manifest so that repeated runs give
/// byte-identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_clock_seconds: f64,
}

fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    Ok(match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    })
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} file {} not found", path.display())))
    }
}

struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| invalid(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(invalid)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn finish(mut self, mut manifest: RunManifest, started: Instant) -> Result<(), CliError> {
        manifest.outputs = self.written.clone();
        manifest.outputs.push("manifest.json".into());
        self.json("manifest.json", &manifest)?;
        self.json(
            "timing.json",
            &Timing {
                wall_clock_seconds: started.elapsed().as_secs_f64(),
            },
        )
    }
}

fn manifest(command: &str, seed: u64, inputs: Vec<String>, config: &Config, reproduce: String) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        schema_version: SCHEMA_VERSION,
        seed,
        inputs,
        outputs: Vec::new(),
        config: config.clone(),
        reproduce,
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let started = Instant::now();
    require_file(&args.data, "data")?;
    let mut cfg = load_config(args.config.as_deref())?;
    let s = &mut cfg.sampler;
    if let Some(v) = args.seed {
        s.seed = v;
    }
    if let Some(v) = args.trees {
        s.n_trees = v;
    }
    if let Some(v) = args.iterations {
        s.iterations = v;
    }
    if let Some(v) = args.burn_in {
        s.burn_in = v;
    }
    if let Some(v) = args.thin {
        s.thin = v;
    }
    cfg.sampler.validate().map_err(invalid)?;
    let data = ingest_dataset(&args.data, &cfg.data).map_err(invalid)?;
    let flagged = data.flagged_strata();
    if !flagged.is_empty() {
        eprintln!(
            "note: {} strata have no exposure variation and carry no information about tau",
            flagged.len()
        );
    }
    eprintln!(
        "fitting {} strata, {} moderators, {} confounders; {} iterations",
        data.len(),
        data.n_moderators(),
        data.n_confounders(),
        cfg.sampler.iterations
    );
    let total = cfg.sampler.iterations;
    let step = (total / 10).max(1);
    let post = run_chain_with(&data, &cfg.sampler, |it| {
        if it % step == 0 {
            eprintln!("  iteration {it}/{total}");
        }
    })
    .map_err(invalid)?;
    let header = DrawsHeader::new(&data, &post);
    let report = build_report(&header, &post.draws, &cfg.summary).map_err(invalid)?;

    let mut out = OutDir::create(&args.out)?;
    out.write("draws.jsonl", &encode_draws(&header, &post.draws))?;
    out.write("summary.txt", report.to_text().as_bytes())?;
    out.json("summary.json", &report)?;
    out.write("config.toml", cfg.to_toml()?.as_bytes())?;
    let reproduce = format!(
        "clbart fit --data {} --config <this directory>/config.toml --out <dir>",
        args.data.display()
    );
    let m = manifest("fit", cfg.sampler.seed, vec![args.data.display().to_string()], &cfg, reproduce);
    out.finish(m, started)?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

pub fn cmd_summarize(args: &SummarizeArgs) -> Result<(), CliError> {
    let started = Instant::now();
    require_file(&args.draws, "draws")?;
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(level) = args.level {
        if !(level > 0.0 && level < 1.0) {
            return Err(CliError::Usage(format!("--level must lie in (0, 1), got {level}")));
        }
        cfg.summary.level = level;
    }
    let (header, draws) = read_draws(&args.draws).map_err(invalid)?;
    let report = build_report(&header, &draws, &cfg.summary).map_err(invalid)?;
    let mut out = OutDir::create(&args.out)?;
    out.write("summary.txt", report.to_text().as_bytes())?;
    out.json("summary.json", &report)?;
    out.write("config.toml", cfg.to_toml()?.as_bytes())?;
    let reproduce = format!(
        "clbart summarize --draws {} --config <this directory>/config.toml --out <dir>",
        args.draws.display()
    );
    let m = manifest(
        "summarize",
        header.config.seed,
        vec![args.draws.display().to_string()],
        &cfg,
        reproduce,
    );
    out.finish(m, started)
}

fn worker_count(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        return if n == 0 {
            Err(CliError::Usage("--workers must be at least 1".into()))
        } else {
            Ok(n)
        };
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
        };
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let mut cfg = load_config(args.config.as_deref())?;
    let sim = &mut cfg.simulation;
    if let Some(v) = args.scenario {
        sim.cohort.scenario = v;
    }
    if let Some(v) = args.replicates {
        sim.replicates = v;
    }
    if let Some(v) = &args.trees {
        sim.trees = v.clone();
    }
    if let Some(v) = args.seed {
        sim.cohort.seed = v;
    }
    if let Some(v) = args.individuals {
        sim.cohort.n_individuals = v;
    }
    if let Some(v) = args.horizon {
        sim.cohort.horizon_days = v;
    }
    let s = &mut cfg.sampler;
    if let Some(v) = args.iterations {
        s.iterations = v;
    }
    if let Some(v) = args.burn_in {
        s.burn_in = v;
    }
    if let Some(v) = args.thin {
        s.thin = v;
    }
    if cfg.simulation.replicates == 0 {
        return Err(CliError::Usage("--replicates must be at least 1".into()));
    }
    if cfg.simulation.trees.contains(&0) {
        return Err(CliError::Usage("tree counts must be at least 1".into()));
    }
    cfg.sampler.validate().map_err(invalid)?;
    cfg.simulation.cohort.validate().map_err(invalid)?;
    let workers = worker_count(args.workers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(invalid)?;
    let sim = &cfg.simulation;
    eprintln!(
        "simulating {} replicate(s) of the {} scenario, trees {:?}, {} worker(s)",
        sim.replicates, sim.cohort.scenario, sim.trees, workers
    );
    type Outcome = (Vec<ReplicateRecord>, Option<Vec<u8>>);
    let results: Vec<Result<Outcome, String>> = pool.install(|| {
        (0..sim.replicates)
            .into_par_iter()
            .map(|r| {
                let mut spec = sim.cohort.clone();
                spec.seed = derive_seed(sim.cohort.seed, r as u64);
                let res = run_replicate(&spec, &cfg.sampler, &sim.trees, r).map_err(|e| format!("replicate {r}: {e}"));
                eprintln!("  replicate {r} done");
                let cohort = if args.save_cohorts {
                    let c = simulate_cohort(&spec).map_err(|e| format!("replicate {r}: {e}"))?;
                    let mut buf = Vec::new();
                    write_dataset(&mut buf, &c.dataset).map_err(|e| e.to_string())?;
                    Some(buf)
                } else {
                    None
                };
                res.map(|recs| (recs, cohort))
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut cohorts = Vec::new();
    for r in results {
        let (recs, cohort) = r.map_err(CliError::Invalid)?;
        records.extend(recs);
        cohorts.push(cohort);
    }
    let rows = aggregate(&records);
    let mut jsonl = Vec::new();
    for r in &records {
        serde_json::to_writer(&mut jsonl, r).map_err(invalid)?;
        jsonl.push(b'\n');
    }
    let mut out = OutDir::create(&args.out)?;
    out.write("records.jsonl", &jsonl)?;
    for (r, c) in cohorts.iter().enumerate() {
        if let Some(bytes) = c {
            out.write(&format!("cohort_{r}.csv"), bytes)?;
        }
    }
    out.write("aggregate.txt", format_aggregate(&rows).as_bytes())?;
    out.json("aggregate.json", &rows)?;
    out.write("config.toml", cfg.to_toml()?.as_bytes())?;
    let reproduce = format!(
        "clbart simulate --config <this directory>/config.toml{} --out <dir>",
        if args.save_cohorts { " --save-cohorts" } else { "" }
    );
    let m = manifest("simulate", cfg.simulation.cohort.seed, Vec::new(), &cfg, reproduce);
    out.finish(m, started)?;
    eprint!("{}", format_aggregate(&rows));
    Ok(())
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: &Cli) -> i32 {
    if cli.print_config {
        return match Config::default().to_toml() {
            Ok(text) => {
                print!("{text}");
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        };
    }
    let result = match &cli.command {
        Some(Command::Fit(a)) => cmd_fit(a),
        Some(Command::Simulate(a)) => cmd_simulate(a),
        Some(Command::Summarize(a)) => cmd_summarize(a),
        None => Err(CliError::Usage(
            "no command given; try `clbart --help` or `clbart --print-config`".into(),
        )),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
