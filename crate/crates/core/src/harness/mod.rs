//! Configuration, artifact files, plots, and the pipeline stages driven by
//! the command-line tool.

mod config;
mod pipeline;
mod svg;
mod tables;

pub use config::{GridConfig, Paths, PipelineConfig, RESOLVED_CONFIG};
pub use pipeline::{
    bench, build_cache_file, gen_data, load_artifacts, load_dataset, plan_once, run, run_file_stem, summary_file,
    sweep, sweep_file, train_model, trials_file, BenchResult, ControllerKind, PlanOnce, PLAN_ONCE_SVG, TRAINING_LOG,
};
pub use svg::{count_class, Svg};
pub use tables::{
    dataset_csv, parse_dataset, parse_trials, sig9, summary_csv, sweep_csv, telemetry_csv, training_csv, trajectory_csv,
    trials_csv, DATASET_COLUMNS, TRIAL_COLUMNS,
};

/// Written into every artifact next to the config hash.
pub const TOOL_VERSION: &str = concat!("genplan ", env!("CARGO_PKG_VERSION"));
