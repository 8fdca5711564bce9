//! Experiment harness for the highway-merge multi-agent training stack:
//! describes runs (scenario, algorithm, encoder, observation mask, seeds),
//! executes them into self-contained run directories, sweeps ablations over
//! observable-vehicle counts and feature masks, and merges the resulting
//! learning curves into plotting-ready CSV reports.

pub mod report;
pub mod runner;
pub mod spec;

pub use report::{merge_runs, CurveRow, GroupSummary, MergedReport};
pub use runner::{
    ablate_features, ablate_n, ablation_dirs, evaluate_checkpoint, print_eval_report, run,
    RunReport, SeedOutcome, METRICS_HEADER,
};
pub use spec::{
    default_n_obs, parse_encoder, parse_mask, resolve_spec, Algorithm, ExperimentSpec, FileConfig,
    HyperOverrides, HyperTable, RawSpecArgs, ALGORITHM_NAMES,
};
