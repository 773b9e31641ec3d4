//! Core library for clustering and anomaly detection on collections of
//! bivariate, unequal-length signals.
//!
//! The pieces compose into a pipeline:
//!
//! 1. [`features`] summarises each segment's key variable as a fixed-length
//!    vector; [`som`] quantises those vectors on a self-organizing map and
//!    [`hac`] groups the map units into superclasses by Ward linkage.
//! 2. [`align`] picks a medoid reference curve per cluster and realigns every
//!    member (both channels, same offset) against it, so curves of different
//!    lengths become pointwise comparable.
//! 3. [`detect`] builds empirical confidence tubes (CT) and lag-conditional
//!    quantile tables (CQ) from the aligned curves and scores each segment.
//!
//! [`simgen`] produces the synthetic two-regime benchmark used to exercise
//! the pipeline end to end, and [`io`] reads and writes every artifact as
//! plain CSV/TOML so stages can be re-run independently.
//!
//! With the `parallel` feature (on by default) the expensive kernels fan out
//! over rayon; `*_seq` variants of those entry points are always compiled and
//! produce identical results, element for element.

pub mod align;
pub mod cluster;
pub mod detect;
pub mod error;
pub mod features;
pub mod hac;
pub mod io;
pub mod series;
pub mod simgen;
pub mod som;

pub use error::{CoreError, Result};
