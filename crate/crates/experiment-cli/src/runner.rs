//! Executes experiment specs: trains per seed, writes run directories
//! (config echo, per-epoch metrics CSV, parameter snapshots), and produces
//! per-spec summaries.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use highway_sim::ScenarioConfig;
use mappo_trainer::{evaluate_policy, EvalReport, FeatureMask, PolicyModel, Trainer};
use serde::{Deserialize, Serialize};

use crate::spec::{ExperimentSpec, HyperTable};

/// Column order of every per-epoch metrics CSV.
pub const METRICS_HEADER: &str =
    "epoch,mean_reward_norm,policy_loss,value_loss,entropy,clip_fraction,crash_rate";

/// Outcome of one (spec, seed) training run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    /// Learning-curve CSV, relative to the spec directory.
    pub metrics_csv: String,
    /// Mean normalized reward over the final tenth of training.
    pub final_window_reward: f64,
    /// Mean per-episode crash rate over the final tenth of training.
    pub final_window_crash_rate: f64,
}

/// Aggregate over seeds for one spec.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub spec_id: String,
    pub epochs: u32,
    pub seeds: Vec<SeedOutcome>,
    /// Mean and population standard deviation of the per-seed
    /// final-window rewards.
    pub reward_mean: f64,
    pub reward_std: f64,
    pub crash_rate_mean: f64,
}

impl RunReport {
    pub fn summary_line(&self) -> String {
        format!(
            "{}: reward {:.4} ± {:.4} over {} seed(s), crash rate {:.3}",
            self.spec_id,
            self.reward_mean,
            self.reward_std,
            self.seeds.len(),
            self.crash_rate_mean
        )
    }
}

/// Full configuration echoed into each run directory so a run can be
/// reproduced from its artifacts alone.
#[derive(Debug, Serialize)]
struct ConfigEcho<'a> {
    experiment: ExperimentEcho,
    hyper: HyperTable,
    scenario: &'a ScenarioConfig,
}

#[derive(Debug, Serialize)]
struct ExperimentEcho {
    spec_id: String,
    scenario: u8,
    algorithm: String,
    encoder: String,
    mask: String,
    n_obs: usize,
    seed: u64,
    epochs: u32,
}

/// Trains `spec` once per seed. Each run directory receives `config.toml`,
/// `metrics.csv`, and `checkpoint_final.bin`; the spec directory receives a
/// `report.toml` aggregate.
pub fn run(spec: &ExperimentSpec) -> Result<RunReport> {
    spec.validate().map_err(anyhow::Error::msg)?;
    let spec_id = spec.spec_id();
    let spec_dir = spec.out.join(&spec_id);
    let mut seeds = Vec::with_capacity(spec.seeds.len());

    for &seed in &spec.seeds {
        let run_dir = spec_dir.join(format!("seed{seed}"));
        fs::create_dir_all(&run_dir)
            .with_context(|| format!("creating run directory {}", run_dir.display()))?;

        let scenario = spec.scenario_config()?;
        let model_cfg = spec.model_config(&scenario);
        write_config_echo(spec, &scenario, seed, &run_dir)?;

        let mut trainer = Trainer::new(scenario, model_cfg, spec.hyper, seed)?;
        let metrics_path = run_dir.join("metrics.csv");
        let mut csv = String::with_capacity(64 * (spec.epochs as usize + 1));
        csv.push_str(METRICS_HEADER);
        csv.push('\n');

        let window = (spec.epochs / 10).max(1) as usize;
        let mut tail_rewards = Vec::with_capacity(window);
        let mut tail_crashes = Vec::with_capacity(window);
        for epoch in 1..=spec.epochs {
            let m = trainer.train_epoch()?;
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                m.epoch,
                m.mean_reward_norm,
                m.policy_loss,
                m.value_loss,
                m.entropy,
                m.clip_fraction,
                m.crash_rate
            ));
            if epoch as usize > spec.epochs as usize - window {
                tail_rewards.push(m.mean_reward_norm);
                tail_crashes.push(m.crash_rate);
            }
            if let Some(every) = spec.checkpoint_every {
                if every > 0 && epoch % every == 0 && epoch != spec.epochs {
                    trainer
                        .model()
                        .save_snapshot(&run_dir.join(format!("checkpoint_ep{epoch}.bin")))?;
                }
            }
        }
        fs::write(&metrics_path, csv)
            .with_context(|| format!("writing {}", metrics_path.display()))?;
        trainer
            .model()
            .save_snapshot(&run_dir.join("checkpoint_final.bin"))?;

        seeds.push(SeedOutcome {
            seed,
            metrics_csv: format!("seed{seed}/metrics.csv"),
            final_window_reward: mean(&tail_rewards),
            final_window_crash_rate: mean(&tail_crashes),
        });
    }

    let rewards: Vec<f64> = seeds.iter().map(|s| s.final_window_reward).collect();
    let crashes: Vec<f64> = seeds.iter().map(|s| s.final_window_crash_rate).collect();
    let report = RunReport {
        spec_id,
        epochs: spec.epochs,
        seeds,
        reward_mean: mean(&rewards),
        reward_std: population_std(&rewards),
        crash_rate_mean: mean(&crashes),
    };
    let report_path = spec_dir.join("report.toml");
    let text = toml::to_string_pretty(&report).context("serializing run report")?;
    fs::write(&report_path, text)
        .with_context(|| format!("writing {}", report_path.display()))?;
    Ok(report)
}

fn write_config_echo(
    spec: &ExperimentSpec,
    scenario: &ScenarioConfig,
    seed: u64,
    run_dir: &Path,
) -> Result<()> {
    let echo = ConfigEcho {
        experiment: ExperimentEcho {
            spec_id: spec.spec_id(),
            scenario: spec.scenario,
            algorithm: spec.algorithm.label().to_string(),
            encoder: spec.encoder.label().to_string(),
            mask: spec.mask.label().to_string(),
            n_obs: spec.effective_n_obs(),
            seed,
            epochs: spec.epochs,
        },
        hyper: HyperTable::from(spec.hyper),
        scenario,
    };
    let path = run_dir.join("config.toml");
    let text = toml::to_string_pretty(&echo).context("serializing config echo")?;
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Runs a sweep over maximum-observable-vehicle counts. Returns one report
/// per value, in input order.
pub fn ablate_n(base: &ExperimentSpec, n_values: &[usize]) -> Result<Vec<RunReport>> {
    anyhow::ensure!(!n_values.is_empty(), "at least one n value is required");
    let mut reports = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let mut spec = base.clone();
        spec.n_obs = Some(n);
        reports.push(run(&spec)?);
    }
    Ok(reports)
}

/// Runs a sweep over observation feature masks. Returns one report per
/// mask, in input order.
pub fn ablate_features(base: &ExperimentSpec, masks: &[FeatureMask]) -> Result<Vec<RunReport>> {
    anyhow::ensure!(!masks.is_empty(), "at least one mask is required");
    let mut reports = Vec::with_capacity(masks.len());
    for &mask in masks {
        let mut spec = base.clone();
        spec.mask = mask;
        reports.push(run(&spec)?);
    }
    Ok(reports)
}

/// Spec directories produced by an ablation, in sweep order.
pub fn ablation_dirs(base: &ExperimentSpec, reports: &[RunReport]) -> Vec<PathBuf> {
    reports
        .iter()
        .map(|r| base.out.join(&r.spec_id))
        .collect()
}

/// Greedy evaluation of a saved parameter snapshot on a scenario.
pub fn evaluate_checkpoint(
    spec: &ExperimentSpec,
    checkpoint: &Path,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport> {
    let scenario = spec.scenario_config()?;
    let model_cfg = spec.model_config(&scenario);
    let mut model = PolicyModel::new(model_cfg, 0)?;
    model
        .load_snapshot(checkpoint)
        .with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    Ok(evaluate_policy(&model, &scenario, episodes, seed)?)
}

pub fn print_eval_report(report: &EvalReport, out: &mut impl std::io::Write) -> Result<()> {
    writeln!(out, "episodes = {}", report.episodes)?;
    writeln!(out, "mean_reward = {:.6}", report.mean_reward)?;
    writeln!(out, "crash_rate = {:.6}", report.crash_rate)?;
    writeln!(out, "mean_cav_speed = {:.6}", report.mean_cav_speed)?;
    writeln!(out, "pv_delay = {:.6}", report.pv_delay)?;
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}
