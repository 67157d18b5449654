//! Experiment runner: reproducible, parallel, persisted verification
//! campaigns wiring the simulators, limit samplers, and test engine
//! together.

pub mod config;
pub mod experiment;
pub mod oracle_cache;
pub mod record;
pub mod report;

pub use config::{Coupling, ExperimentConfig, ExperimentKind, GridConfig, PhiConfig, Tolerances};
pub use experiment::{mc_batch, run};
pub use oracle_cache::OracleCache;
pub use record::{CellResult, ResultRecord, Verdict};
pub use report::{render_markdown, report, write_csv};
