//! Library behind the `atyp` binary: run configuration, the staged
//! pipeline, evaluation against ground truth, and report generation.

pub mod config;
pub mod evaluate;
pub mod pipeline;
pub mod report;
