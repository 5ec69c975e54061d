//! Config-driven scenario runner behind the `tr` binary.

mod config;
mod runner;

pub use config::{
    ModelSection, RescalingSection, ResolvedModel, Scenario, ScenarioConfig, SolverSection, OUTPUT_DIR_ENV,
};
pub use runner::{
    build_setup, evaluate_scenario, render_validation, run_scenario, scenario_tables, sweep, sweep_csv,
    trajectory_csv, validate_command, write_outputs, write_tables, Check, JsonComplex, PropagationSummary,
    ScenarioRun, ScenarioSetup, SweepRow,
};
