//! Exact tests for approximate mutual exclusivity (anti-co-occurrence) of
//! alteration sets in a binary alteration-by-sample matrix.
//!
//! The crate is `no_std` with `alloc`. It contains every algorithmic piece:
//!
//! * [`dataset`]: the packed alteration matrix, preprocessing and coverage queries.
//! * [`exact`]: the conditional null distribution of the union size by iterated
//!   hypergeometric convolution, and tail p-values.
//! * [`combine`]: Stouffer combination of discrete per-group p-values (mid-p or
//!   randomised).
//! * [`multiplicity`]: size-dependent weights, weighted Bonferroni / BH and
//!   nested-set pruning.
//! * [`greedy`]: candidate generation by repeated union of the most
//!   anti-co-occurring pair.
//! * [`pipeline`]: end-to-end analysis producing a [`pipeline::Report`].
//! * [`oracle`] and [`simulate`]: brute-force and Monte Carlo checks, null and
//!   planted data generators.
//!
//! File formats, parallel execution and the command-line tool live in the
//! companion `anticooc` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bits;
pub mod combine;
pub mod dataset;
mod error;
pub mod exact;
pub mod exec;
pub mod greedy;
pub mod multiplicity;
pub mod oracle;
pub mod pipeline;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
