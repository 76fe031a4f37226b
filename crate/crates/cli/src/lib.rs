//! Configuration, suites and report emission behind the `dualkin` binary.

pub mod config;
pub mod report;
pub mod suites;

pub use config::{parse_config, parse_config_str, ConfigError, ExperimentConfig};
pub use report::{emit_report, Check, ExperimentReport, SuiteOutput};
pub use suites::{run_suite, Suite};
