//! Seeded experiment runner: configs, training runs, grids and CSV logs.

mod config;
mod grid;
mod runner;

use thiserror::Error;

pub use config::{default_total_steps, is_known_key, AgentHyper, ConfigEntries, ExperimentConfig};
pub use grid::{
    aggregate, aggregate_dir, expand_grid, parse_log_name, run_grid, write_aggregate, write_grid,
    write_summary, CurvePoint, Grid, GridCell, SummaryRow, AGGREGATE_HEADER, SUMMARY_HEADER,
};
pub use runner::{
    csv_file_name, evaluate, mean_std, read_rows, run_experiment, run_seed, write_rows,
    BranchCounts, LogRow, RunLog, CSV_HEADER, TRAIN_RETURN_WINDOW,
};

use crate::envsim::EnvError;
use crate::explore::ExploreError;
use crate::nnet::NnetError;
use crate::qlearn::QlearnError;
use crate::replay::ReplayError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config field `{field}`: {message}")]
    ConfigInvalid { field: String, message: String },
    #[error("unknown config field `{0}`")]
    UnknownField(String),
    #[error("logs cannot be aggregated: {0}")]
    MisalignedLogs(String),
    #[error("malformed run log: {0}")]
    BadLog(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error(transparent)]
    Qlearn(#[from] QlearnError),
    #[error(transparent)]
    Nnet(#[from] NnetError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Whether the error comes from the user's configuration rather than a failed run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            HarnessError::ConfigInvalid { .. } | HarnessError::UnknownField(_)
        )
    }
}
