//! Configuration files and experiment orchestration behind the `dada` CLI.

mod config;
mod experiment;

pub use config::{parse_config, Baseline, DatasetFamily, RunConfig, OUT_DIR_ENV};
pub use experiment::{
    ablation_arms, effective_train_config, output_root, prepare_data, run_ablations, run_experiment, run_seed,
    sweep_m, write_datasets, DomainData, SeedRun, Summary, SummaryRow,
};
