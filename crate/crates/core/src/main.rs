use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use frechet_som::cli::{
    cmd_dist, cmd_infer, cmd_overlap, cmd_rank, cmd_report, cmd_simulate, cmd_train, RunConfig,
};
use frechet_som::metrics::MetricKind;
use frechet_som::Error;

const WORKERS_ENV: &str = "FRECHET_SOM_WORKERS";

#[derive(Parser)]
#[command(
    name = "frechet-som",
    about = "Train self-organizing maps on spatio-temporal volumes and test group differences",
    version
)]
struct Cli {
    /// Thread count for parallel stages (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Config file of `key = value` lines; command-line flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run directory holding the study artifacts
    run: PathBuf,

    /// Base random seed
    #[arg(long)]
    seed: Option<u64>,

    /// Metrics to use: t-smd, s-smd, st-smd, or all
    #[arg(long)]
    metric: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-group study into a run directory
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Scenario: SC1, SC2, or SC3
        #[arg(long)]
        scenario: Option<String>,
        /// Signal-to-noise ratio
        #[arg(long)]
        snr: Option<f64>,
        /// Subjects per group
        #[arg(long)]
        n_per_group: Option<usize>,
    },
    /// Train one SOM per subject listed in the run manifest
    Train {
        #[command(flatten)]
        common: Common,
        /// Map grid as HEIGHTxWIDTH, e.g. 3x3
        #[arg(long)]
        grid: Option<String>,
        /// Training iterations
        #[arg(long)]
        iterations: Option<usize>,
        /// Training algorithm: batch or sequential
        #[arg(long)]
        algorithm: Option<String>,
    },
    /// Compute raw and metric-closed pairwise distance matrices
    Dist {
        #[command(flatten)]
        common: Common,
    },
    /// Permutation tests on the closed distance matrices
    Infer {
        #[command(flatten)]
        common: Common,
        /// Number of permutation replicates
        #[arg(long)]
        permutations: Option<usize>,
        /// Test statistic: t or f
        #[arg(long)]
        statistic: Option<String>,
        /// Null-hypothesis offset for the t statistic
        #[arg(long)]
        delta0: Option<f64>,
    },
    /// Rank the group-mean map's units by sample Jaccard index
    Rank {
        #[command(flatten)]
        common: Common,
    },
    /// Overlap of ranked units with a binary reference map
    Overlap {
        #[command(flatten)]
        common: Common,
        /// Whitespace-separated 0/1 reference map file
        #[arg(long)]
        reference: PathBuf,
    },
    /// Replicated synthetic study: per-replicate p-values plus a summary
    Report {
        /// Output directory for replicate files and summary.csv
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        n_per_group: Option<usize>,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        permutations: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
        /// Skip generation and only aggregate existing replicate files
        #[arg(long)]
        aggregate_only: bool,
    },
}

fn apply_opt(cfg: &mut RunConfig, key: &str, value: Option<String>) -> frechet_som::Result<()> {
    if let Some(v) = value {
        cfg.apply(key, &v)?;
    }
    Ok(())
}

fn single_metric(cfg: &RunConfig) -> frechet_som::Result<MetricKind> {
    if cfg.metrics.len() != 1 {
        return Err(Error::Config(
            "this command needs exactly one --metric".into(),
        ));
    }
    Ok(cfg.metrics[0])
}

fn run(cli: Cli) -> frechet_som::Result<()> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }

    let workers = match cli.workers {
        Some(w) => Some(w),
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => Some(v.parse().map_err(|_| {
                Error::Config(format!("bad {WORKERS_ENV} value '{v}'"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(workers) = workers {
        if workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }

    let apply_common = |cfg: &mut RunConfig, common: &Common| -> frechet_som::Result<()> {
        if let Some(seed) = common.seed {
            cfg.seed = seed;
        }
        apply_opt(cfg, "metric", common.metric.clone())
    };

    match cli.command {
        Command::Simulate {
            common,
            scenario,
            snr,
            n_per_group,
        } => {
            apply_common(&mut cfg, &common)?;
            apply_opt(&mut cfg, "scenario", scenario)?;
            apply_opt(&mut cfg, "snr", snr.map(|v| v.to_string()))?;
            apply_opt(&mut cfg, "n_per_group", n_per_group.map(|v| v.to_string()))?;
            cmd_simulate(&cfg, &common.run)
        }
        Command::Train {
            common,
            grid,
            iterations,
            algorithm,
        } => {
            apply_common(&mut cfg, &common)?;
            apply_opt(&mut cfg, "grid", grid)?;
            apply_opt(&mut cfg, "iterations", iterations.map(|v| v.to_string()))?;
            apply_opt(&mut cfg, "algorithm", algorithm)?;
            cmd_train(&cfg, &common.run)
        }
        Command::Dist { common } => {
            apply_common(&mut cfg, &common)?;
            cmd_dist(&cfg, &common.run)
        }
        Command::Infer {
            common,
            permutations,
            statistic,
            delta0,
        } => {
            apply_common(&mut cfg, &common)?;
            apply_opt(&mut cfg, "permutations", permutations.map(|v| v.to_string()))?;
            apply_opt(&mut cfg, "statistic", statistic)?;
            apply_opt(&mut cfg, "delta0", delta0.map(|v| v.to_string()))?;
            cmd_infer(&cfg, &common.run)
        }
        Command::Rank { common } => {
            apply_common(&mut cfg, &common)?;
            let metric = single_metric(&cfg)?;
            cmd_rank(&cfg, &common.run, metric)
        }
        Command::Overlap { common, reference } => {
            apply_common(&mut cfg, &common)?;
            let metric = single_metric(&cfg)?;
            cmd_overlap(&cfg, &common.run, metric, &reference)
        }
        Command::Report {
            out,
            seed,
            metric,
            scenario,
            snr,
            n_per_group,
            grid,
            iterations,
            permutations,
            replicates,
            aggregate_only,
        } => {
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            apply_opt(&mut cfg, "metric", metric)?;
            apply_opt(&mut cfg, "scenario", scenario)?;
            apply_opt(&mut cfg, "snr", snr.map(|v| v.to_string()))?;
            apply_opt(&mut cfg, "n_per_group", n_per_group.map(|v| v.to_string()))?;
            apply_opt(&mut cfg, "grid", grid)?;
            apply_opt(&mut cfg, "iterations", iterations.map(|v| v.to_string()))?;
            apply_opt(&mut cfg, "permutations", permutations.map(|v| v.to_string()))?;
            apply_opt(&mut cfg, "replicates", replicates.map(|v| v.to_string()))?;
            cmd_report(&cfg, &out, aggregate_only)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with success status
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
