//! Library surface of the workbench CLI, reused by the integration and
//! acceptance suites.

pub mod config;
pub mod ops;
