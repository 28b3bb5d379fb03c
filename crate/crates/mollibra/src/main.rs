//! Command-line entry points: single runs, multi-seed benches, the
//! component ablation grid, and offline report aggregation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mollibra::bench::{self, MatrixReport};
use mollibra::config::{Config, TaskConfig};

#[derive(Parser)]
#[command(
    name = "mollibra",
    version,
    about = "Budget-aware genetic molecular optimization with multi-fingerprint GP surrogates and a gated zero-shot critic"
)]
struct Cli {
    /// Only log errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one optimization run and write its trajectory.
    Run {
        /// TOML configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Built-in configuration instead of a file:
        /// mollibra | tripp-gp-bo | molleo | random-ranking.
        #[arg(long)]
        preset: Option<String>,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Results directory (default: results).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured tasks over multiple seeds and aggregate.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Seeds (repeatable); defaults to the config's bench.seeds.
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        /// Parallel runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the 2x2 component grid (multi-fingerprint x critic).
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate a directory of trajectory files.
    Report {
        /// Directory laid out as <task>/<config-hash>/<seed>.jsonl.
        results_dir: PathBuf,
        /// Where to write summary.json and summary.csv (default: the
        /// results directory itself).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Runtime(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Run {
            config,
            preset,
            seed,
            out,
        } => cmd_run(config, preset, seed, out),
        Command::Bench {
            config,
            preset,
            seeds,
            jobs,
            out,
        } => cmd_matrix(config, preset, seeds, jobs, out, false),
        Command::Ablate {
            config,
            preset,
            seeds,
            jobs,
            out,
        } => cmd_matrix(config, preset, seeds, jobs, out, true),
        Command::Report { results_dir, out } => cmd_report(&results_dir, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn resolve_config(config: Option<PathBuf>, preset: Option<String>) -> Result<Config, Failure> {
    match (config, preset) {
        (Some(path), None) => Config::load(&path).map_err(|e| Failure::Config(e.to_string())),
        (None, Some(name)) => Config::preset(&name)
            .ok_or_else(|| Failure::Config(format!("unknown preset '{name}'"))),
        (Some(_), Some(_)) => Err(Failure::Config(
            "--config and --preset are mutually exclusive".into(),
        )),
        (None, None) => Err(Failure::Config(
            "a configuration is required: pass --config PATH or --preset NAME".into(),
        )),
    }
}

fn cmd_run(
    config: Option<PathBuf>,
    preset: Option<String>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let mut config = resolve_config(config, preset)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let out_dir = out.unwrap_or_else(|| PathBuf::from("results"));
    let cell_dir = out_dir.join(&config.task.name).join(config.config_hash());
    std::fs::create_dir_all(&cell_dir).map_err(|e| Failure::Runtime(e.to_string()))?;
    let path = cell_dir.join(format!("{}.jsonl", config.seed));
    let mut file = std::fs::File::create(&path).map_err(|e| Failure::Runtime(e.to_string()))?;

    let run = bench::run_one(&config, "run", config.seed, Some(&mut file))
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    println!(
        "task={} seed={} best={:.4} top10_auc={:.4} calls={} trajectory={}",
        run.task,
        run.seed,
        run.best_score,
        run.top10_auc,
        run.records.len(),
        path.display()
    );
    Ok(())
}

fn cmd_matrix(
    config: Option<PathBuf>,
    preset: Option<String>,
    seeds: Vec<u64>,
    jobs: usize,
    out: Option<PathBuf>,
    ablation: bool,
) -> Result<(), Failure> {
    let config = resolve_config(config, preset)?;
    let seeds = if seeds.is_empty() {
        config.bench.seeds.clone()
    } else {
        seeds
    };
    if seeds.is_empty() {
        return Err(Failure::Config("no seeds given: pass --seed or set bench.seeds".into()));
    }
    let tasks: Vec<TaskConfig> = if config.bench.tasks.is_empty() {
        vec![config.task.clone()]
    } else {
        config.bench.tasks.clone()
    };
    let configs: Vec<(String, Config)> = if ablation {
        config.ablation_variants()
    } else {
        vec![("run".to_string(), config.clone())]
    };

    let out_dir = out.unwrap_or_else(|| PathBuf::from("results"));
    std::fs::create_dir_all(&out_dir).map_err(|e| Failure::Runtime(e.to_string()))?;
    let report = bench::run_matrix(&tasks, &configs, &seeds, jobs, Some(&out_dir));

    let failed_cells: Vec<&bench::CellReport> = report
        .cells
        .iter()
        .filter(|c| !c.failures.is_empty())
        .collect();
    for cell in &report.cells {
        println!(
            "task={} config={} n={} mean_auc={:.4} std_auc={:.4}",
            cell.task,
            cell.config_name,
            cell.per_seed.len(),
            cell.mean_auc,
            cell.std_auc
        );
    }
    let stem = if ablation { "ablation" } else { "report" };
    write_report(&report, &out_dir, stem)?;
    if !failed_cells.is_empty() {
        let detail: Vec<String> = failed_cells
            .iter()
            .flat_map(|c| {
                c.failures
                    .iter()
                    .map(|f| format!("{}/{}: {f}", c.task, c.config_name))
            })
            .collect();
        return Err(Failure::Runtime(format!(
            "{} run(s) failed: {}",
            detail.len(),
            detail.join("; ")
        )));
    }
    Ok(())
}

fn write_report(report: &MatrixReport, out_dir: &Path, stem: &str) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(out_dir.join(format!("{stem}.json")), json)
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    std::fs::write(out_dir.join(format!("{stem}.csv")), report.to_csv())
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok(())
}

fn cmd_report(results_dir: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let report =
        bench::report_directory(results_dir).map_err(|e| Failure::Config(e.to_string()))?;
    if report.cells.is_empty() {
        return Err(Failure::Config(format!(
            "no trajectory files under {}",
            results_dir.display()
        )));
    }
    for cell in &report.cells {
        let stalls: u32 = cell.per_seed.iter().map(|s| s.stall_events).sum();
        println!(
            "task={} config={} n={} mean_auc={:.4} std_auc={:.4} stalls={}",
            cell.task,
            cell.config_name,
            cell.per_seed.len(),
            cell.mean_auc,
            cell.std_auc,
            stalls
        );
    }
    let out_dir = out.unwrap_or_else(|| results_dir.to_path_buf());
    std::fs::create_dir_all(&out_dir).map_err(|e| Failure::Config(e.to_string()))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(out_dir.join("summary.json"), json)
        .map_err(|e| Failure::Config(e.to_string()))?;
    std::fs::write(out_dir.join("summary.csv"), report.to_csv())
        .map_err(|e| Failure::Config(e.to_string()))?;
    Ok(())
}
