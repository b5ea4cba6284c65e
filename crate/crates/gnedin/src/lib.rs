//! Bayesian analysis of Gnedin's species sampling model, the exchangeable
//! partition family with a finite but random number of types.
//!
//! The crate provides the partition law and its fixed-type extreme
//! components, sequential and stick-breaking samplers, closed-form posterior
//! predictive distributions for an additional sample, and independent
//! enumeration and Monte Carlo oracles that every closed form is validated
//! against. All probability computations run on either of two backends:
//! exact big rationals (equality-grade checks) or signed log-domain doubles
//! (large-scale evaluation).

pub mod combinatorics;
pub mod error;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod partitions;
pub mod posterior;
pub mod sampler;
pub mod series;

pub use error::{Error, Result};
pub use model::{ModelParams, OccupancyVector, TypeCount};
pub use numeric::{Mode, Value};
