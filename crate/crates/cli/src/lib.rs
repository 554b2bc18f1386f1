//! Subcommands of the `lculab` experiment harness.
//!
//! Every command returns a [`Report`]: summary lines for standard output plus
//! the named checks whose outcome decides the exit status.

pub mod campaign;
pub mod coeffs;
pub mod cost;
pub mod kappa_scan;
pub mod optimal;
pub mod order_scan;
pub mod report;
pub mod trials;

pub use report::{Check, OutputArgs, Report, Table};
