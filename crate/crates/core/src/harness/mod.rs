//! Configuration, seeded runs, metrics files and summaries.

pub mod config;
pub mod grid;
pub mod metrics;
pub mod ope_run;
pub mod summary;

pub use config::{parse_config_text, read_config_file, RunConfig};
pub use grid::{expand_grid, plan_grid, run_config, run_grid, train_to_file, write_metrics, GridRun};
pub use metrics::{metrics_to_csv, parse_metrics_csv, read_metrics, MetricsRow, METRICS_HEADER};
pub use ope_run::{run_ope, OpeArgs};
pub use summary::{summarize_dir, SummaryRow};
