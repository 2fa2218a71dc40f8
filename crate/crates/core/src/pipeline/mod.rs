//! Configuration, persistence and the command implementations behind the CLI.

pub mod commands;
pub mod config;
pub mod formats;
pub mod report;

pub use commands::{eval, inspect, load_split, pipeline, train, train_axes, Split, TrainedAxes};
pub use config::{PipelineConfig, TaskMode};
pub use report::{EvalReport, RunReport, Timing};
