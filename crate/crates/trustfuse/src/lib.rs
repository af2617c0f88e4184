//! Experiment harness around [`trustfuse_core`]: TOML configuration,
//! scenario presets, parallel seed sweeps and CSV/JSON result files.

pub mod config;
pub mod experiment;
pub mod output;
pub mod scenario;

pub use trustfuse_core as core;

pub use config::{load_config, ConfigError, FileConfig};
pub use experiment::{run_cells, summarize, CellRun, CellSummary, ExperimentError};
pub use scenario::{Cell, ExperimentSpec, Scenario, SchemeSelection};
