//! Command-line front end: model ingestion, subcommands orchestrating the
//! library, and deterministic machine-readable reports.

pub mod commands;
pub mod report;
pub mod schema;

pub use report::{OutputFormat, Table};
pub use schema::{parse_model, parse_model_str, ParsedModel};
