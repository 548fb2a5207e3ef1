//! Command-line front end: run experiments and ablation grids, analyze and
//! replay evolved genomes, and export plot-ready CSV data.
//!
//! Exit codes: 0 on success, 1 on runtime failures, 2 on usage or
//! configuration errors.

mod arms;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use trajneat::analysis;
use trajneat::config::ExperimentConfig;
use trajneat::engine::{self, RunOutcome, Snapshot};
use trajneat::genome::{deserialize_genome, serialize_genome, Genome};
use trajneat::network::{compile, NetworkOptions};
use trajneat::report;
use trajneat::task::{evaluate_traced, TraceRow};

const OUT_DIR_ENV: &str = "TRAJNEAT_OUT_DIR";

#[derive(Parser)]
#[command(name = "trajneat", version, about = "Neuroevolution for open-loop trajectory following")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its logs and snapshots.
    Run(RunArgs),
    /// Run the same experiment across several seeds and aggregate.
    Batch(BatchArgs),
    /// Run a feature-ablation grid with paired seeds.
    Ablate(AblateArgs),
    /// Print structural statistics and histograms of a genome file.
    Analyze(AnalyzeArgs),
    /// Re-simulate a stored genome and export its trajectory.
    Replay(ReplayArgs),
    /// Export a genome's connection list for external graph tools.
    ExportEdges(ExportEdgesArgs),
}

/// Config resolution shared by the experiment commands.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// Experiment config file (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set features.ctrnn=true (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    generations: Option<u64>,
    #[arg(long)]
    population: Option<usize>,
    /// Task variant: 2d, 3d-holonomic, 3d-nonholonomic.
    #[arg(long)]
    task: Option<String>,
    /// Selection scheme: truncation or speciation.
    #[arg(long)]
    selection: Option<String>,
    /// Parent fraction for truncation selection.
    #[arg(long)]
    fraction: Option<f64>,
    /// Evaluate serially instead of in parallel (results are identical).
    #[arg(long)]
    serial: bool,
}

impl ConfigArgs {
    fn overrides(&self) -> Result<Vec<(String, String)>, CliError> {
        let mut pairs = Vec::new();
        if let Some(seed) = self.seed {
            pairs.push(("seed".into(), seed.to_string()));
        }
        if let Some(generations) = self.generations {
            pairs.push(("generations".into(), generations.to_string()));
        }
        if let Some(population) = self.population {
            pairs.push(("population".into(), population.to_string()));
        }
        if let Some(task) = &self.task {
            pairs.push(("task".into(), task.clone()));
        }
        if let Some(selection) = &self.selection {
            pairs.push(("selection.scheme".into(), selection.clone()));
        }
        if let Some(fraction) = self.fraction {
            pairs.push(("selection.fraction".into(), fraction.to_string()));
        }
        if self.serial {
            pairs.push(("parallel".into(), "false".into()));
        }
        for set in &self.sets {
            let (key, value) = set
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {set:?}")))?;
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }
        Ok(pairs)
    }

    /// Loads the file (if any) and applies the overrides.
    fn resolve(&self) -> Result<(ExperimentConfig, Vec<(String, String)>), CliError> {
        let text = match &self.config {
            Some(path) => std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?,
            None => String::new(),
        };
        let overrides = self.overrides()?;
        let config = ExperimentConfig::from_toml_with_overrides(&text, &overrides)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok((config, overrides))
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory (default: $TRAJNEAT_OUT_DIR or the working directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of runs; seeds are seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Explicit comma-separated seed list (overrides --runs).
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Comma-separated arm names (default: all).
    #[arg(long, value_delimiter = ',')]
    arms: Vec<String>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Genome file to analyze.
    #[arg(long)]
    genome: PathBuf,
    /// Neuron group size for the output-connection histogram.
    #[arg(long, default_value_t = 10)]
    bucket: usize,
    /// Directory for histogram CSVs (omit to print stats only).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    genome: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output CSV path (default: replay.csv in the output directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Snapshot metadata to verify against (default: sibling .meta.json).
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Args)]
struct ExportEdgesArgs {
    #[arg(long)]
    genome: PathBuf,
    /// Output CSV path (default: edges.csv in the output directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<trajneat::CoreError> for CliError {
    fn from(e: trajneat::CoreError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Batch(args) => cmd_batch(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Replay(args) => cmd_replay(args),
        Command::ExportEdges(args) => cmd_export_edges(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn out_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Provenance comments stamped into every CSV.
fn provenance(
    config: &ExperimentConfig,
    overrides: &[(String, String)],
) -> Vec<(String, String)> {
    let mut comments = vec![
        ("tool_version".to_string(), format!("trajneat {}", env!("CARGO_PKG_VERSION"))),
        ("config_hash".to_string(), config.hash()),
        ("seed".to_string(), config.seed.to_string()),
    ];
    if !overrides.is_empty() {
        let echo: Vec<String> = overrides.iter().map(|(k, v)| format!("{k}={v}")).collect();
        comments.push(("overrides".to_string(), echo.join(" ")));
    }
    comments
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

/// Snapshot sidecar: enough to verify a replay without rerunning evolution.
#[derive(Debug, Serialize, Deserialize)]
struct SnapshotMeta {
    generation: u64,
    seed: u64,
    config_hash: String,
    fitness: f64,
    steps_survived: u64,
}

fn write_run_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    overrides: &[(String, String)],
    outcome: &RunOutcome,
) -> Result<(), CliError> {
    let comments = provenance(config, overrides);
    write(&dir.join("runlog.csv"), &report::runlog_csv(&outcome.log, &comments))?;
    if !outcome.species_log.is_empty() {
        write(
            &dir.join("species.csv"),
            &report::species_csv(&outcome.species_log, &comments),
        )?;
    }
    write(
        &dir.join("trajectory.json"),
        &serde_json::to_string_pretty(&outcome.trajectory).expect("trajectory serializes"),
    )?;
    for snapshot in &outcome.snapshots {
        write_snapshot(dir, config, snapshot)?;
    }
    Ok(())
}

fn write_snapshot(dir: &Path, config: &ExperimentConfig, snapshot: &Snapshot) -> Result<(), CliError> {
    let stem = format!("best_gen{:05}", snapshot.generation);
    write(
        &dir.join(format!("{stem}.genome.json")),
        &serialize_genome(&snapshot.genome),
    )?;
    let meta = SnapshotMeta {
        generation: snapshot.generation,
        seed: config.seed,
        config_hash: config.hash(),
        fitness: snapshot.fitness,
        steps_survived: snapshot.steps_survived,
    };
    let mut text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    text.push('\n');
    write(&dir.join(format!("{stem}.meta.json")), &text)?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let (config, overrides) = args.config.resolve()?;
    let dir = out_dir(&args.out);
    let outcome = engine::run(&config)?;
    write_run_outputs(&dir, &config, &overrides, &outcome)?;
    let last = outcome.log.records.last().expect("at least one generation");
    println!(
        "final best fitness {} over {} steps (generation {})",
        last.best_fitness, last.best_steps, last.generation
    );
    Ok(())
}

fn batch_seeds(base: u64, runs: usize, explicit: &[u64]) -> Result<Vec<u64>, CliError> {
    let seeds: Vec<u64> = if explicit.is_empty() {
        (0..runs as u64).map(|i| base + i).collect()
    } else {
        explicit.to_vec()
    };
    if seeds.is_empty() {
        return Err(CliError::Usage("a batch needs at least one run".into()));
    }
    Ok(seeds)
}

fn run_batch_to_dir(
    dir: &Path,
    config: &ExperimentConfig,
    overrides: &[(String, String)],
    seeds: &[u64],
) -> Result<(), CliError> {
    let mut logs = Vec::new();
    for &seed in seeds {
        let mut run_config = config.clone();
        run_config.seed = seed;
        let outcome = engine::run(&run_config)?;
        write_run_outputs(&dir.join(format!("run_seed{seed}")), &run_config, overrides, &outcome)?;
        logs.push(outcome.log);
    }
    let aggregate = engine::aggregate_logs(&logs.iter().collect::<Vec<_>>());
    let mut comments = provenance(config, overrides);
    comments.push((
        "seeds".to_string(),
        seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
    ));
    write(&dir.join("aggregate.csv"), &report::aggregate_csv(&aggregate, &comments))?;
    Ok(())
}

fn cmd_batch(args: BatchArgs) -> Result<(), CliError> {
    let (config, overrides) = args.config.resolve()?;
    let seeds = batch_seeds(config.seed, args.runs, &args.seeds)?;
    let dir = out_dir(&args.out);
    run_batch_to_dir(&dir, &config, &overrides, &seeds)?;
    println!("batch complete: {} runs in {}", seeds.len(), dir.display());
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> Result<(), CliError> {
    let (base, overrides) = args.config.resolve()?;
    let seeds = batch_seeds(base.seed, args.runs, &args.seeds)?;
    let arm_names: Vec<String> = if args.arms.is_empty() {
        arms::ARM_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        args.arms.clone()
    };
    // Validate every arm before spending any compute.
    let mut configs = Vec::new();
    for name in &arm_names {
        configs.push((name.clone(), arms::apply_arm(&base, name).map_err(CliError::Usage)?));
    }
    let dir = out_dir(&args.out);
    for (name, config) in &configs {
        run_batch_to_dir(&dir.join(name), config, &overrides, &seeds)?;
        println!("arm {name} done");
    }
    Ok(())
}

fn load_genome(path: &Path) -> Result<Genome, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read genome {}: {e}", path.display())))?;
    deserialize_genome(&text).map_err(|e| CliError::Usage(e.to_string()))
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    if args.bucket == 0 {
        return Err(CliError::Usage("--bucket must be at least 1".into()));
    }
    let genome = load_genome(&args.genome)?;
    let stats = analysis::network_stats(&genome);
    let histograms = analysis::age_histograms(&genome, args.bucket);
    println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
    if let Some(dir) = &args.out {
        let comments = vec![("genome".to_string(), args.genome.display().to_string())];
        write(
            &dir.join("span_histogram.csv"),
            &report::histogram_csv(&histograms.span_histogram, ("span", "count"), &comments),
        )?;
        write(
            &dir.join("output_age_histogram.csv"),
            &report::histogram_csv(
                &histograms.output_connections_per_bucket,
                ("bucket", "mean_output_connections"),
                &comments,
            ),
        )?;
    }
    Ok(())
}

fn sibling_meta(genome_path: &Path) -> Option<PathBuf> {
    let name = genome_path.file_name()?.to_str()?;
    let meta_name = name.strip_suffix(".genome.json")?;
    let path = genome_path.with_file_name(format!("{meta_name}.meta.json"));
    path.exists().then_some(path)
}

fn replay_rows(
    genome: &Genome,
    config: &ExperimentConfig,
) -> Result<(f64, u64, Vec<TraceRow>), CliError> {
    let options = NetworkOptions {
        n_outputs: config.task.n_outputs(),
        output_fn: config.features.output_fn,
        ctrnn: config.features.ctrnn,
    };
    // Grow the trajectory until the individual dies on it; extensions are
    // prefix-stable so this reproduces the trajectory it evolved on.
    let mut min_steps = 0;
    loop {
        let spec = engine::regenerate_trajectory(config, min_steps);
        let mut phenotype = compile(genome, options).map_err(|e| CliError::Usage(e.to_string()))?;
        phenotype.reset();
        let (eval, rows) = evaluate_traced(
            &mut phenotype,
            &spec,
            config.task,
            config.parameters.scaffold_period,
            spec.total_steps(),
        )?;
        if eval.steps_survived < spec.total_steps() {
            return Ok((eval.fitness, eval.steps_survived, rows));
        }
        min_steps = spec.total_steps() + 1;
    }
}

fn cmd_replay(args: ReplayArgs) -> Result<(), CliError> {
    let genome = load_genome(&args.genome)?;
    let (config, overrides) = args.config.resolve()?;
    let (fitness, steps, rows) = replay_rows(&genome, &config)?;

    let mut comments = provenance(&config, &overrides);
    comments.push(("genome".to_string(), args.genome.display().to_string()));
    let csv = report::trajectory_csv(&rows, config.task.dim(), &comments);
    let path = args
        .out
        .clone()
        .unwrap_or_else(|| out_dir(&None).join("replay.csv"));
    write(&path, &csv)?;
    println!("replayed fitness {fitness} over {steps} steps");

    let meta_path = args.meta.clone().or_else(|| sibling_meta(&args.genome));
    if let Some(meta_path) = meta_path {
        let meta: SnapshotMeta = serde_json::from_str(&std::fs::read_to_string(&meta_path)?)
            .map_err(|e| CliError::Usage(format!("bad meta {}: {e}", meta_path.display())))?;
        if meta.fitness != fitness || meta.steps_survived != steps {
            return Err(CliError::Runtime(format!(
                "replay mismatch: snapshot recorded fitness {} / {} steps",
                meta.fitness, meta.steps_survived
            )));
        }
        println!("replay matches snapshot metadata (generation {})", meta.generation);
    }
    Ok(())
}

fn cmd_export_edges(args: ExportEdgesArgs) -> Result<(), CliError> {
    let genome = load_genome(&args.genome)?;
    let comments = vec![("genome".to_string(), args.genome.display().to_string())];
    let csv = report::edges_csv(&genome, &comments);
    let path = args
        .out
        .clone()
        .unwrap_or_else(|| out_dir(&None).join("edges.csv"));
    write(&path, &csv)?;
    println!("wrote {} edges to {}", genome.connections.len(), path.display());
    Ok(())
}
