//! Harness library behind the `stoheat` binary: config loading and
//! validation, experiment execution with CSV ledgers and manifests, the
//! built-in verification suite, and run-directory reporting.

pub mod accept;
pub mod config;
pub mod report;
pub mod runner;
