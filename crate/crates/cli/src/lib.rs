//! Library side of the `magep` binary: trial grids, property suites,
//! subcommand bodies and the `report/1` JSON layout.

pub mod commands;
pub mod grid;
pub mod report;
pub mod suites;

pub use commands::CliError;
pub use grid::{Grid, GridPoint};
pub use suites::{run_check, run_suite, Fault, Options, Suite};
