//! Configuration, orchestration and persistence of experiment runs.

// `!(x > 0.0)` style guards deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;
pub mod summary;

pub use config::{load, Experiment, RunConfig, Violation, ViolationKind, OUTPUT_ROOT_VAR, SCHEMA_VERSION};
pub use run::{run, RunError, RunOutcome};
pub use summary::{Summary, SummaryRow, SUMMARY_FILE};
