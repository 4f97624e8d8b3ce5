//! Experiment configuration, scenario construction, runs and outputs.

pub mod config;
pub mod env;
pub mod experiment;
pub mod report;

pub use config::{ExperimentConfig, PolicyKind};
pub use env::{build_scenario, select_sources, sim_params, Env, Scenario};
pub use experiment::{
    aggregate, compare_bands, converged, make_policy, read_metrics, replay_bands, run_experiment, run_policy, run_seed, seed_dir,
    Aggregate, BandRow, RunHistory, RunOptions, RunSummary, StepMetrics,
};
pub use report::{dump_topology, link_budget, LinkBudgetRow, TopologyDump, TopologyNode};
