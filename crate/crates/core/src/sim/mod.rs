//! Scenario harness: configuration, the user base, the run loop, metrics
//! and CSV output.

pub mod config;
pub mod metrics;
pub mod output;
pub mod run;
pub mod world;

pub use config::{RecognizerChoice, Scenario, ScenarioConfig, WorldParams};
pub use metrics::{aggregate_runs, final_rate, poor_match_histogram, response_rate, Aggregate};
pub use run::{derive_seed, run_simulation, RunSeries, RunStats, Simulation, StepRecord};
pub use world::{generate_request, Community, World};

use crate::error::Result;

/// Runs every configured run of one scenario.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<RunSeries>> {
    (0..cfg.runs).map(|r| run_simulation(cfg, r)).collect()
}

/// Aggregate over a scenario's runs.
pub fn summarize(runs: &[RunSeries]) -> Result<Aggregate> {
    let curves: Vec<Vec<f64>> = runs.iter().map(RunSeries::match_percents).collect();
    aggregate_runs(&curves)
}
