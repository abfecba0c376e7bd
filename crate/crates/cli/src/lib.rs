//! Config ingestion, solver orchestration and report emission for the `sion`
//! command-line tool.

pub mod config;
pub mod report;
pub mod run;
pub mod selftest;

pub use config::{load_config, oligopoly_config, parse_config, ConfigError, Format, Method, RunConfig};
pub use report::{emit_report, encode, RunReport, Status, CSV_HEADER};
pub use run::{run, Command, RunOptions};
