//! `merge-marl`: train and evaluate cooperative merge-control policies,
//! sweep ablations, and merge learning curves into reports.
//!
//! Exit codes: 0 on success, 2 on usage errors (bad flags, unknown names),
//! 1 on runtime failures.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use experiment_cli::{
    ablate_features, ablate_n, ablation_dirs, evaluate_checkpoint, merge_runs, parse_mask,
    print_eval_report, resolve_spec, run, ExperimentSpec, FileConfig, MergedReport, RawSpecArgs,
};
use mappo_trainer::FeatureMask;

#[derive(Parser)]
#[command(
    name = "merge-marl",
    about = "Multi-agent training harness for highway on-ramp merging with a priority vehicle",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one experiment across its seeds and write run directories.
    Train(RunFlags),
    /// Greedily evaluate a saved checkpoint on a scenario.
    Evaluate(EvalFlags),
    /// Sweep the maximum-observable-vehicle count and merge the results.
    #[command(name = "ablate-n")]
    AblateN(AblateNFlags),
    /// Sweep observation feature masks and merge the results.
    #[command(name = "ablate-features")]
    AblateFeatures(AblateFeaturesFlags),
    /// Merge completed run directories into a mean±std curve CSV and table.
    Report(ReportFlags),
}

#[derive(Args, Clone)]
struct RunFlags {
    /// Traffic scenario: 1..5.
    #[arg(long)]
    scenario: Option<u8>,
    /// Algorithm: mappo_lsa, mappo, ippo_lsa, ippo.
    #[arg(long)]
    algo: Option<String>,
    /// Observation encoder override: lsa or flatten.
    #[arg(long)]
    encoder: Option<String>,
    /// Maximum observable vehicles override.
    #[arg(long)]
    n_obs: Option<usize>,
    /// Feature mask: full, no_position, no_presence_priority, no_velocity,
    /// add_angles.
    #[arg(long)]
    mask: Option<String>,
    /// Training seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Training epochs per seed.
    #[arg(long)]
    epochs: Option<u32>,
    /// Root output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalFlags {
    /// Parameter snapshot to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Number of greedy episodes.
    #[arg(long, default_value_t = 20)]
    episodes: usize,
    /// Episode-seed stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct AblateNFlags {
    /// Observable-vehicle counts to sweep, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 6])]
    n_values: Vec<usize>,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct AblateFeaturesFlags {
    /// Masks to sweep, comma separated; defaults to all five.
    #[arg(long, value_delimiter = ',')]
    masks: Option<Vec<String>>,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct ReportFlags {
    /// Completed spec directories (each containing seed*/metrics.csv).
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
    /// Directory for the merged report.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Optional trailing moving-average window added as an extra column.
    #[arg(long)]
    ma_window: Option<usize>,
}

enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(flags) => {
            let spec = resolve(&flags)?;
            let report = run(&spec)?;
            for seed in &report.seeds {
                println!(
                    "seed {}: final-window reward {:.4}, crash rate {:.3} ({})",
                    seed.seed, seed.final_window_reward, seed.final_window_crash_rate,
                    seed.metrics_csv
                );
            }
            println!("{}", report.summary_line());
            println!(
                "artifacts in {}",
                spec.out.join(report.spec_id).display()
            );
            Ok(())
        }
        Command::Evaluate(flags) => {
            let spec = resolve(&flags.run)?;
            if flags.episodes == 0 {
                return Err(usage("episodes must be at least 1"));
            }
            let report =
                evaluate_checkpoint(&spec, &flags.checkpoint, flags.episodes, flags.seed)?;
            print_eval_report(&report, &mut std::io::stdout().lock())
                .map_err(CliError::Runtime)?;
            Ok(())
        }
        Command::AblateN(flags) => {
            let spec = resolve(&flags.run)?;
            if flags.n_values.is_empty() || flags.n_values.iter().any(|&n| n == 0) {
                return Err(usage("n-values must be positive integers"));
            }
            let reports = ablate_n(&spec, &flags.n_values)?;
            let merged = finish_sweep(&spec, &reports, "ablate_n_report.csv")?;
            print!("{}", merged.to_table());
            Ok(())
        }
        Command::AblateFeatures(flags) => {
            let spec = resolve(&flags.run)?;
            let masks: Vec<FeatureMask> = match &flags.masks {
                Some(names) => names
                    .iter()
                    .map(|n| parse_mask(n))
                    .collect::<Result<_, _>>()
                    .map_err(usage)?,
                None => FeatureMask::ALL.to_vec(),
            };
            if masks.is_empty() {
                return Err(usage("at least one mask is required"));
            }
            let reports = ablate_features(&spec, &masks)?;
            let merged = finish_sweep(&spec, &reports, "ablate_features_report.csv")?;
            print!("{}", merged.to_table());
            Ok(())
        }
        Command::Report(flags) => {
            if flags.ma_window == Some(0) {
                return Err(usage("ma-window must be at least 1"));
            }
            let merged = merge_runs(&flags.dirs, flags.ma_window)?;
            for warning in &merged.warnings {
                eprintln!("warning: {warning}");
            }
            fs::create_dir_all(&flags.out)
                .map_err(|e| CliError::Runtime(anyhow::Error::new(e)))?;
            let csv_path = flags.out.join("report.csv");
            fs::write(&csv_path, merged.to_csv(flags.ma_window))
                .map_err(|e| CliError::Runtime(anyhow::Error::new(e)))?;
            print!("{}", merged.to_table());
            println!("merged curve written to {}", csv_path.display());
            Ok(())
        }
    }
}

fn resolve(flags: &RunFlags) -> Result<ExperimentSpec, CliError> {
    let file = match &flags.config {
        Some(path) => Some(FileConfig::from_path(path).map_err(usage)?),
        None => None,
    };
    let raw = RawSpecArgs {
        scenario: flags.scenario,
        algo: flags.algo.clone(),
        encoder: flags.encoder.clone(),
        n_obs: flags.n_obs,
        mask: flags.mask.clone(),
        seeds: flags.seeds.clone(),
        epochs: flags.epochs,
        out: flags.out.clone(),
    };
    resolve_spec(&raw, file.as_ref()).map_err(usage)
}

/// Writes the merged comparison CSV for a finished sweep and returns the
/// merged curves.
fn finish_sweep(
    spec: &ExperimentSpec,
    reports: &[experiment_cli::RunReport],
    file_name: &str,
) -> Result<MergedReport, CliError> {
    let dirs = ablation_dirs(spec, reports);
    let merged = merge_runs(&dirs, None)?;
    for warning in &merged.warnings {
        eprintln!("warning: {warning}");
    }
    let path = spec.out.join(file_name);
    fs::write(&path, merged.to_csv(None))
        .map_err(|e| CliError::Runtime(anyhow::Error::new(e)))?;
    println!("comparison curve written to {}", path.display());
    Ok(merged)
}
