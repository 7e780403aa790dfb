//! Cue-based retrieval simulation of sentence comprehension under three
//! impairment parameters: goal activation (GA), default action time (DAT)
//! and activation noise (ANS).
//!
//! The crate is organised bottom-up:
//!
//! - [`memory`]: activation calculus and thresholded competitive retrieval.
//! - [`schedule`]: timed encode/fire/retrieve scripts for the relative-clause
//!   sentence types and single-trial scoring.
//! - [`grid`]: the discretised parameter space and Monte Carlo accuracy
//!   surfaces.
//! - [`fitting`]: per-participant absolute-distance fitting with tie averaging
//!   and non-default parameter tabulation.
//! - [`clustering`]: agglomerative clustering of fitted parameter vectors and
//!   two-group discrimination.
//! - [`dataset`], [`synth`], [`pipeline`]: participant data, synthetic
//!   cohorts and the end-to-end report.

pub mod clustering;
pub mod dataset;
pub mod error;
pub mod fitting;
pub mod grid;
pub mod memory;
pub mod pipeline;
pub mod schedule;
pub mod seed;
pub mod synth;
mod table;

pub use error::{Error, Result};
pub use memory::{ParameterPoint, RetrievalConstants};
pub use schedule::SentenceType;
