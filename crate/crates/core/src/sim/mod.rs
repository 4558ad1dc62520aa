//! Scenario harness: configuration, closed-loop runs, metrics, Monte Carlo
//! sweeps and file output.

mod config;
mod harness;
pub mod io;
pub mod metrics;
mod montecarlo;

pub use config::{
    AssemblyConfig, BaselineGains, ControllerConfig, GpConfig, InitialCondition, MetricsConfig, Phases,
    PlantConfig, RosgpConfig, ScenarioConfig, TargetConfig,
};
pub use harness::{
    collect_training_data, dataset_from_records, derive_seed, run_scenario, sparse_options, train_full,
    train_sparse, Experiment, Mode, Models, Phase, RunLog, StepRecord, TrainingTimes,
};
pub use metrics::{summarize, Metrics};
pub use montecarlo::{draw_scenario, monte_carlo, McDraw, McRanges, McRun, McSummary, MonteCarloConfig, Range};
